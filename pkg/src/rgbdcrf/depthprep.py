"""Depth validity screening, hole filling, and range/statistics normalization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .core import DepthImage, NormalizedDepth, RgbImage

DEPTH_MAX = 65535.0

# Exclusion rule for unusable samples: strictly more than this fraction of
# invalid pixels disqualifies an image.
DEFAULT_INVALID_THRESHOLD = 0.45


class UnfillableDepthError(ValueError):
    """Depth image contains no valid pixel to fill from."""


@dataclass(frozen=True)
class DepthStats:
    """Summary of the valid portion of a depth image.

    mean/std are population statistics over valid pixels and are None when
    no pixel is valid.
    """

    valid_fraction: float
    mean: Optional[float]
    std: Optional[float]


def depth_stats(depth: DepthImage) -> DepthStats:
    """Valid fraction plus mean/std over valid pixels only."""
    mask = depth.valid_mask
    total = mask.size
    valid = int(mask.sum())
    if valid == 0:
        return DepthStats(valid_fraction=0.0, mean=None, std=None)
    values = depth.data[mask].astype(np.float64)
    return DepthStats(
        valid_fraction=valid / total,
        mean=float(values.mean()),
        std=float(values.std()),
    )


def sample_is_usable(depth: DepthImage, threshold: float = DEFAULT_INVALID_THRESHOLD) -> bool:
    """True unless strictly more than `threshold` of the pixels are invalid."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    invalid_fraction = 1.0 - depth.valid_mask.mean()
    return bool(invalid_fraction <= threshold)


def fill_invalid(depth: DepthImage) -> DepthImage:
    """Replace invalid pixels with their nearest valid pixel's value.

    Nearest is Euclidean pixel distance; equidistant sources resolve to the
    smallest row-major index. Valid pixels are returned unchanged.
    """
    mask = depth.valid_mask
    if mask.all():
        return depth
    if not mask.any():
        raise UnfillableDepthError("depth image has no valid pixels")

    h, w = depth.data.shape
    invalid = ~mask
    # exact Euclidean distances; the returned indices break ties arbitrarily,
    # so re-resolve ties deterministically below
    _, (src_y, src_x) = ndimage.distance_transform_edt(invalid, return_indices=True)
    py, px = np.nonzero(invalid)
    d2 = (src_y[invalid] - py) ** 2 + (src_x[invalid] - px) ** 2

    source_linear = np.empty(py.shape, dtype=np.int64)
    for dist2 in np.unique(d2):
        group = d2 == dist2
        gy, gx = py[group], px[group]
        offsets = _ring_offsets(int(dist2))
        cand_y = gy[:, None] + offsets[:, 0][None, :]
        cand_x = gx[:, None] + offsets[:, 1][None, :]
        inside = (cand_y >= 0) & (cand_y < h) & (cand_x >= 0) & (cand_x < w)
        cy = np.clip(cand_y, 0, h - 1)
        cx = np.clip(cand_x, 0, w - 1)
        ok = inside & mask[cy, cx]
        linear = np.where(ok, cy * w + cx, np.iinfo(np.int64).max)
        source_linear[group] = linear.min(axis=1)

    filled = depth.data.copy()
    filled[invalid] = depth.data.reshape(-1)[source_linear]
    return DepthImage(data=filled)


def _ring_offsets(dist2: int) -> np.ndarray:
    """All integer (dy, dx) with dy^2 + dx^2 == dist2."""
    r = int(np.floor(np.sqrt(dist2)))
    offsets = []
    for dy in range(-r, r + 1):
        rem = dist2 - dy * dy
        dx = int(round(np.sqrt(rem)))
        if dx * dx != rem:
            continue
        offsets.append((dy, dx))
        if dx != 0:
            offsets.append((dy, -dx))
    return np.asarray(offsets, dtype=np.int64)


def normalize_depth_to_rgb(depth: DepthImage, rgb: RgbImage) -> NormalizedDepth:
    """Scale and shift depth to match the RGB image's mean and std.

    Invalid pixels are first filled from their nearest valid neighbor; the
    depth statistics are then taken over the filled image and matched to
    the pooled statistics of all RGB channel samples. A constant depth
    image maps to the constant RGB mean.
    """
    if (depth.height, depth.width) != (rgb.height, rgb.width):
        raise ValueError(
            f"depth {depth.width}x{depth.height} does not match rgb {rgb.width}x{rgb.height}"
        )
    original_valid = depth.valid_mask
    filled = fill_invalid(depth).data.astype(np.float64)

    rgb_samples = rgb.data.astype(np.float64)
    mu_rgb = float(rgb_samples.mean())
    sigma_rgb = float(rgb_samples.std())
    mu_d = float(filled.mean())
    sigma_d = float(filled.std())

    if sigma_d == 0.0:
        out = np.full(filled.shape, mu_rgb)
    else:
        out = (filled - mu_d) / sigma_d * sigma_rgb + mu_rgb
    return NormalizedDepth(data=out, validity_mask=original_valid)


def normalize_depth_range(depth: DepthImage) -> np.ndarray:
    """Map raw 16-bit samples linearly onto [0, 255] (65535 -> 255)."""
    return depth.data.astype(np.float64) * (255.0 / DEPTH_MAX)
