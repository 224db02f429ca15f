"""Mean-field inference for the fully-connected CRF.

Message passing runs through one of two interchangeable Gaussian-filter
backends: exact brute force (the oracle, quadratic cost) or the
permutohedral lattice (fast approximation). Backend choice is always
explicit.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import (
    DimensionMismatchError,
    LabelMap,
    MarginalField,
    NormalizedDepth,
    RgbImage,
    UnaryField,
    argmax_labels,
)
from .lattice import (
    FeatureMatrix,
    PermutohedralLattice,
    build_lattice,
    gaussian_filter_bruteforce,
    gaussian_filter_lattice,
)
from .potentials import (
    CrfParams,
    KernelVariant,
    features_from_rasters,
    softmax,
    total_energy,
    unary_from_scores,
)

log = logging.getLogger(__name__)

# Largest pixel count the O(n^2) backend accepts inside run_inference.
MAX_BRUTE_FORCE_PIXELS = 64 * 64


class Backend(enum.Enum):
    BRUTE_FORCE = "brute"
    LATTICE = "lattice"


class BruteForceLimitError(ValueError):
    """Image too large for the quadratic-cost backend."""


@dataclass(frozen=True)
class InferenceConfig:
    """How to run mean-field: backend, step count, optional energy logging.

    iterations = None defers to CrfParams.iterations. With record_energy
    set, the exact energy of the current argmax labeling is logged after
    every step via the O(n^2) oracle, so keep images small.
    """

    backend: Backend = Backend.LATTICE
    iterations: Optional[int] = None
    record_energy: bool = False

    def __post_init__(self):
        if not isinstance(self.backend, Backend):
            object.__setattr__(self, "backend", Backend(self.backend))
        if self.iterations is not None and self.iterations < 0:
            raise ValueError("iterations must be >= 0")


class _Filter:
    """One Gaussian message-passing operator with a fixed weight."""

    def __init__(self, weight: float, features: FeatureMatrix, backend: Backend):
        self.weight = weight
        self.backend = backend
        self.features = features
        self.lattice: Optional[PermutohedralLattice] = None
        if backend is Backend.LATTICE:
            self.lattice = build_lattice(features)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        if self.lattice is not None:
            return gaussian_filter_lattice(self.lattice, values)
        return gaussian_filter_bruteforce(self.features, values)


AppearanceFeatures = Union[FeatureMatrix, Tuple[FeatureMatrix, FeatureMatrix]]


def smoothness_features(width: int, height: int, sigma_gamma: float) -> FeatureMatrix:
    """Position features (x, y) divided by the smoothness bandwidth."""
    ys, xs = np.mgrid[0:height, 0:width]
    rows = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64) / sigma_gamma
    return FeatureMatrix(rows=rows)


def appearance_features(
    rgb: RgbImage, depth: NormalizedDepth, params: CrfParams
) -> AppearanceFeatures:
    """Bandwidth-normalized appearance features for the configured kernel.

    Joint: one 6-dim feature set (position, color, depth). RgbOnly: 5-dim
    without depth. Split: a (color bilateral, depth bilateral) pair.
    """
    h, w = rgb.height, rgb.width
    ys, xs = np.mgrid[0:h, 0:w]
    pos = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64) / params.sigma_alpha
    col = rgb.data.reshape(-1, 3).astype(np.float64) / params.sigma_beta
    dep = depth.data.reshape(-1, 1) / params.sigma_nu

    if params.kernel_variant is KernelVariant.JOINT:
        return FeatureMatrix(rows=np.concatenate([pos, col, dep], axis=1))
    if params.kernel_variant is KernelVariant.RGB_ONLY:
        return FeatureMatrix(rows=np.concatenate([pos, col], axis=1))
    return (
        FeatureMatrix(rows=np.concatenate([pos, col], axis=1)),
        FeatureMatrix(rows=np.concatenate([pos, dep], axis=1)),
    )


def _build_filters(
    smoothness: FeatureMatrix,
    appearance: AppearanceFeatures,
    params: CrfParams,
    backend: Backend,
) -> List[_Filter]:
    filters = [_Filter(params.omega2, smoothness, backend)]
    if isinstance(appearance, tuple):
        color_feats, depth_feats = appearance
        filters.append(_Filter(params.omega1, color_feats, backend))
        filters.append(_Filter(params.omega1 * params.lam, depth_feats, backend))
    else:
        filters.append(_Filter(params.omega1, appearance, backend))
    return filters


def _step(q_flat: np.ndarray, phi_flat: np.ndarray, filters: Sequence[_Filter]) -> np.ndarray:
    """One parallel mean-field update with Potts compatibility."""
    message = np.zeros_like(q_flat)
    for filt in filters:
        if filt.weight != 0.0:
            message += filt.weight * filt(q_flat)
    # Potts: the penalty for label l sums messages of all other labels
    pairwise = message.sum(axis=1, keepdims=True) - message
    logq = -phi_flat - pairwise
    logq -= logq.max(axis=1, keepdims=True)
    q_new = np.exp(logq)
    q_new /= q_new.sum(axis=1, keepdims=True)
    return q_new


def meanfield_step(
    q: MarginalField,
    unary_potentials: np.ndarray,
    smoothness: FeatureMatrix,
    appearance: AppearanceFeatures,
    params: CrfParams,
    backend: Backend = Backend.BRUTE_FORCE,
) -> MarginalField:
    """Apply one mean-field update to q and renormalize per pixel."""
    phi = np.asarray(unary_potentials, dtype=np.float64)
    if phi.shape != q.q.shape:
        raise DimensionMismatchError("unary potentials must match the marginal field")
    k = q.num_classes
    filters = _build_filters(smoothness, appearance, params, backend)
    q_new = _step(q.q.reshape(-1, k), phi.reshape(-1, k), filters)
    return MarginalField(q=q_new.reshape(q.q.shape))


def run_inference(
    unary: UnaryField,
    rgb: RgbImage,
    depth: NormalizedDepth,
    params: CrfParams,
    config: InferenceConfig = InferenceConfig(),
) -> Tuple[MarginalField, LabelMap]:
    """Refine a score map: softmax init, mean-field steps, argmax decode.

    With iterations = 0 the result is the plain unary argmax. Deterministic
    for both backends.
    """
    if (rgb.height, rgb.width) != (unary.height, unary.width):
        raise DimensionMismatchError(
            f"rgb {rgb.width}x{rgb.height} does not match unary {unary.width}x{unary.height}"
        )
    if (depth.height, depth.width) != (unary.height, unary.width):
        raise DimensionMismatchError(
            f"depth {depth.width}x{depth.height} does not match unary "
            f"{unary.width}x{unary.height}"
        )
    n = unary.height * unary.width
    if config.backend is Backend.BRUTE_FORCE and n > MAX_BRUTE_FORCE_PIXELS:
        raise BruteForceLimitError(
            f"brute-force backend rejects images over {MAX_BRUTE_FORCE_PIXELS} pixels "
            f"(got {n}); use the lattice backend"
        )

    iterations = config.iterations if config.iterations is not None else params.iterations
    k = unary.num_classes
    q_flat = softmax(unary.scores).reshape(-1, k)
    if iterations == 0:
        marginals = MarginalField(q=q_flat.reshape(unary.scores.shape))
        return marginals, argmax_labels(unary.scores)

    phi = unary_from_scores(unary)
    phi_flat = phi.reshape(-1, k)
    smooth = smoothness_features(unary.width, unary.height, params.sigma_gamma)
    appearance = appearance_features(rgb, depth, params)
    filters = _build_filters(smooth, appearance, params, config.backend)

    features = features_from_rasters(rgb, depth) if config.record_energy else None
    for step_index in range(iterations):
        q_flat = _step(q_flat, phi_flat, filters)
        if features is not None:
            labels = LabelMap(
                labels=q_flat.argmax(axis=1).reshape(unary.height, unary.width).astype(np.int32),
                num_classes=k,
            )
            energy = total_energy(labels, phi, features, params)
            log.info("mean-field iteration %d: energy %.6f", step_index + 1, energy)

    marginals = MarginalField(q=q_flat.reshape(unary.scores.shape))
    return marginals, argmax_labels(marginals)
