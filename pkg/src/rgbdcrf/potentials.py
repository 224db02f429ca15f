"""Energy terms of the dense CRF: unary potentials, Potts compatibility,
Gaussian kernels, and exact total-energy evaluation.

total_energy is the quadratic-cost reference used as the inference test
oracle; it is intended for small images only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .core import LabelMap, NormalizedDepth, RgbImage, UnaryField

# Lower clamp on softmax probabilities; bounds unary potentials at -log(eps).
SOFTMAX_CLAMP = 1e-12


class KernelVariant(enum.Enum):
    """Appearance kernel selection."""

    JOINT = "joint"      # one Gaussian over position+color+depth
    SPLIT = "split"      # separate color and depth bilateral kernels
    RGB_ONLY = "rgb"     # depth term removed (ablation)


@dataclass(frozen=True)
class CrfParams:
    """Dense CRF weights and bandwidths.

    Defaults: the fixed smoothness settings (omega2 = 3, sigma_gamma = 3)
    plus midpoints of the tuner's search ranges for the remaining
    parameters. These are declared defaults, not tuned optima.
    """

    omega1: float = 8.0
    omega2: float = 3.0
    sigma_alpha: float = 130.0
    sigma_beta: float = 9.5
    sigma_gamma: float = 3.0
    sigma_nu: float = 9.5
    lam: float = 1.0
    kernel_variant: KernelVariant = KernelVariant.JOINT
    iterations: int = 10

    def __post_init__(self):
        for name in ("omega1", "omega2"):
            # zero weights are allowed so message passing can be switched off
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("sigma_alpha", "sigma_beta", "sigma_gamma", "sigma_nu"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not isinstance(self.kernel_variant, KernelVariant):
            object.__setattr__(self, "kernel_variant", KernelVariant(self.kernel_variant))


@dataclass(frozen=True)
class PixelFeature:
    """Feature vector of one pixel: position, color, and normalized depth."""

    position: Tuple[float, float]
    color: Tuple[float, float, float]
    depth: float


def potts(a: int, b: int) -> int:
    """Label compatibility: 0 for equal labels, 1 otherwise."""
    return 0 if a == b else 1


def smoothness_kernel(pi: Sequence[float], pj: Sequence[float], sigma_gamma: float) -> float:
    """Position-only Gaussian kernel suppressing small isolated regions."""
    if sigma_gamma <= 0:
        raise ValueError("sigma_gamma must be positive")
    dp2 = (pi[0] - pj[0]) ** 2 + (pi[1] - pj[1]) ** 2
    return math.exp(-dp2 / (2.0 * sigma_gamma**2))


def _sq(a: Sequence[float], b: Sequence[float]) -> float:
    return float(sum((x - y) ** 2 for x, y in zip(a, b)))


def appearance_joint(fi: PixelFeature, fj: PixelFeature, params: CrfParams) -> float:
    """Single Gaussian over position, color and depth differences."""
    exponent = (
        _sq(fi.position, fj.position) / (2.0 * params.sigma_alpha**2)
        + _sq(fi.color, fj.color) / (2.0 * params.sigma_beta**2)
        + (fi.depth - fj.depth) ** 2 / (2.0 * params.sigma_nu**2)
    )
    return math.exp(-exponent)


def appearance_split(fi: PixelFeature, fj: PixelFeature, params: CrfParams) -> float:
    """Color bilateral plus lam-weighted depth bilateral kernel."""
    dp2 = _sq(fi.position, fj.position) / (2.0 * params.sigma_alpha**2)
    color_term = math.exp(-dp2 - _sq(fi.color, fj.color) / (2.0 * params.sigma_beta**2))
    depth_term = math.exp(-dp2 - (fi.depth - fj.depth) ** 2 / (2.0 * params.sigma_nu**2))
    return color_term + params.lam * depth_term


def _appearance_rgb_only(fi: PixelFeature, fj: PixelFeature, params: CrfParams) -> float:
    exponent = (
        _sq(fi.position, fj.position) / (2.0 * params.sigma_alpha**2)
        + _sq(fi.color, fj.color) / (2.0 * params.sigma_beta**2)
    )
    return math.exp(-exponent)


def appearance_kernel(fi: PixelFeature, fj: PixelFeature, params: CrfParams) -> float:
    """Appearance kernel according to params.kernel_variant."""
    if params.kernel_variant is KernelVariant.JOINT:
        return appearance_joint(fi, fj, params)
    if params.kernel_variant is KernelVariant.SPLIT:
        return appearance_split(fi, fj, params)
    return _appearance_rgb_only(fi, fj, params)


def pairwise(fi: PixelFeature, fj: PixelFeature, yi: int, yj: int, params: CrfParams) -> float:
    """Potts-gated weighted sum of the appearance and smoothness kernels."""
    mu = potts(yi, yj)
    if mu == 0:
        return 0.0
    theta_a = appearance_kernel(fi, fj, params)
    theta_s = smoothness_kernel(fi.position, fj.position, params.sigma_gamma)
    return mu * (params.omega1 * theta_a + params.omega2 * theta_s)


def softmax(scores: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis."""
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def unary_from_scores(unary: UnaryField) -> np.ndarray:
    """Negative log of the per-pixel softmax, clamped below at 1e-12."""
    p = softmax(unary.scores)
    return -np.log(np.clip(p, SOFTMAX_CLAMP, None))


def features_from_rasters(rgb: RgbImage, depth: NormalizedDepth) -> List[PixelFeature]:
    """Per-pixel features in row-major order; positions are (x, y) with
    (0, 0) at the top-left corner."""
    if (rgb.height, rgb.width) != (depth.height, depth.width):
        raise ValueError("rgb and depth dimensions must match")
    feats = []
    color = rgb.data.astype(np.float64)
    for y in range(rgb.height):
        for x in range(rgb.width):
            feats.append(
                PixelFeature(
                    position=(float(x), float(y)),
                    color=tuple(color[y, x]),
                    depth=float(depth.data[y, x]),
                )
            )
    return feats


def total_energy(
    labeling: LabelMap,
    unary_potentials: np.ndarray,
    features: Sequence[PixelFeature],
    params: CrfParams,
) -> float:
    """Exact CRF energy: unary sum plus each unordered pixel pair once.

    O(N^2) in the pixel count; intended for small images and test oracles.
    """
    phi = np.asarray(unary_potentials, dtype=np.float64)
    labels = np.asarray(labeling.labels).reshape(-1)
    n = labels.size
    if phi.ndim != 3 or phi.shape[0] * phi.shape[1] != n:
        raise ValueError("unary potentials do not match the label map")
    if len(features) != n:
        raise ValueError("feature list does not match the label map")

    flat_phi = phi.reshape(n, phi.shape[2])
    energy = float(flat_phi[np.arange(n), labels].sum())

    pos = np.array([f.position for f in features], dtype=np.float64)
    col = np.array([f.color for f in features], dtype=np.float64)
    dep = np.array([f.depth for f in features], dtype=np.float64)

    two_sa2 = 2.0 * params.sigma_alpha**2
    two_sb2 = 2.0 * params.sigma_beta**2
    two_sg2 = 2.0 * params.sigma_gamma**2
    two_sv2 = 2.0 * params.sigma_nu**2

    # accumulate sum over ordered pairs, halved at the end; the diagonal
    # contributes nothing because potts(y, y) = 0
    pair_sum = 0.0
    block = max(1, int(2**22 // max(n, 1)))
    for start in range(0, n, block):
        stop = min(n, start + block)
        dp2 = ((pos[start:stop, None, :] - pos[None, :, :]) ** 2).sum(-1)
        dc2 = ((col[start:stop, None, :] - col[None, :, :]) ** 2).sum(-1)
        dd2 = (dep[start:stop, None] - dep[None, :]) ** 2
        if params.kernel_variant is KernelVariant.JOINT:
            theta_a = np.exp(-dp2 / two_sa2 - dc2 / two_sb2 - dd2 / two_sv2)
        elif params.kernel_variant is KernelVariant.SPLIT:
            theta_a = np.exp(-dp2 / two_sa2 - dc2 / two_sb2) + params.lam * np.exp(
                -dp2 / two_sa2 - dd2 / two_sv2
            )
        else:
            theta_a = np.exp(-dp2 / two_sa2 - dc2 / two_sb2)
        theta_s = np.exp(-dp2 / two_sg2)
        w = params.omega1 * theta_a + params.omega2 * theta_s
        differs = labels[start:stop, None] != labels[None, :]
        pair_sum += float(w[differs].sum())
    return energy + 0.5 * pair_sum
