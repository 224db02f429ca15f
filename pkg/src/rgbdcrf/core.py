"""Shared raster types for RGB-D CRF refinement.

All types are thin, immutable wrappers around numpy arrays. Real-valued
rasters are float64 internally; 8/16-bit integer payloads keep their
on-disk dtype.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

IGNORE_LABEL = 255

# Sensor values treated as missing measurements (see DepthImage).
INVALID_DEPTH_MARKERS = (0, 65535)


class DimensionMismatchError(ValueError):
    """Raster dimensions do not agree."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RgbImage:
    """8-bit color raster, shape (height, width, 3)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise DimensionMismatchError(f"expected (H, W, 3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatchError("image must be at least 1x1")
        if arr.dtype != np.uint8:
            raise ValueError(f"RgbImage requires uint8 data, got {arr.dtype}")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class DepthImage:
    """Raw 16-bit depth raster; 0 and 65535 mark invalid samples."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"expected (H, W) array, got shape {arr.shape}")
        if arr.dtype != np.uint16:
            raise ValueError(f"DepthImage requires uint16 data, got {arr.dtype}")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def valid_mask(self) -> np.ndarray:
        mask = np.ones(self.data.shape, dtype=bool)
        for marker in INVALID_DEPTH_MARKERS:
            mask &= self.data != marker
        return mask


@dataclass(frozen=True)
class NormalizedDepth:
    """Real-valued depth raster after affine rescaling.

    ``validity_mask`` records which pixels carried a valid sensor reading
    before any filling took place.
    """

    data: np.ndarray
    validity_mask: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        mask = np.asarray(self.validity_mask, dtype=bool)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"expected (H, W) array, got shape {arr.shape}")
        if mask.shape != arr.shape:
            raise DimensionMismatchError("validity mask shape must match depth data")
        if not np.isfinite(arr).all():
            raise ValueError("normalized depth must be finite")
        object.__setattr__(self, "data", _freeze(arr))
        object.__setattr__(self, "validity_mask", _freeze(mask))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class UnaryField:
    """Per-pixel class score map (logits), shape (height, width, K)."""

    scores: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.scores, dtype=np.float64)
        if arr.ndim != 3:
            raise DimensionMismatchError(f"expected (H, W, K) array, got shape {arr.shape}")
        if arr.shape[2] < 2:
            raise ValueError("unary field needs at least 2 classes")
        if not np.isfinite(arr).all():
            raise ValueError("unary scores must be finite")
        object.__setattr__(self, "scores", _freeze(arr))

    @property
    def width(self) -> int:
        return self.scores.shape[1]

    @property
    def height(self) -> int:
        return self.scores.shape[0]

    @property
    def num_classes(self) -> int:
        return self.scores.shape[2]


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class indices; IGNORE_LABEL marks unlabeled ground truth."""

    labels: np.ndarray
    num_classes: Optional[int] = None

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"expected (H, W) array, got shape {arr.shape}")
        arr = arr.astype(np.int32, copy=False)
        if arr.min(initial=0) < 0:
            raise ValueError("labels must be non-negative")
        if self.num_classes is not None:
            rest = arr[arr != IGNORE_LABEL]
            if rest.size and rest.max() >= self.num_classes:
                raise ValueError(
                    f"label {rest.max()} out of range for {self.num_classes} classes"
                )
        object.__setattr__(self, "labels", _freeze(arr))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class MarginalField:
    """Per-pixel label distribution maintained by mean-field, (H, W, K)."""

    q: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.q, dtype=np.float64)
        if arr.ndim != 3:
            raise DimensionMismatchError(f"expected (H, W, K) array, got shape {arr.shape}")
        if (arr < 0).any() or (arr > 1 + 1e-12).any():
            raise ValueError("marginals must lie in [0, 1]")
        sums = arr.sum(axis=2)
        if not np.allclose(sums, 1.0, atol=1e-6):
            raise ValueError("per-pixel marginals must sum to 1 within 1e-6")
        object.__setattr__(self, "q", _freeze(arr))

    @property
    def width(self) -> int:
        return self.q.shape[1]

    @property
    def height(self) -> int:
        return self.q.shape[0]

    @property
    def num_classes(self) -> int:
        return self.q.shape[2]


@dataclass(frozen=True)
class ClassPalette:
    """Ordered class names with unique display colors."""

    names: Tuple[str, ...]
    colors: Tuple[Tuple[int, int, int], ...]
    ignore_label: int = IGNORE_LABEL

    def __post_init__(self):
        names = tuple(self.names)
        colors = tuple(tuple(int(c) for c in rgb) for rgb in self.colors)
        if len(names) != len(colors):
            raise ValueError("palette needs one color per class name")
        if len(set(colors)) != len(colors):
            raise ValueError("palette colors must be unique")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "colors", colors)

    def __len__(self) -> int:
        return len(self.names)


# SUN RGB-D 37-class segmentation label set.
SUNRGBD_CLASS_NAMES = (
    "wall", "floor", "cabinet", "bed", "chair", "sofa", "table", "door",
    "window", "bookshelf", "picture", "counter", "blinds", "desk", "shelves",
    "curtain", "dresser", "pillow", "mirror", "floor_mat", "clothes",
    "ceiling", "books", "fridge", "tv", "paper", "towel", "shower_curtain",
    "box", "whiteboard", "person", "night_stand", "toilet", "sink", "lamp",
    "bathtub", "bag",
)


def distinct_colors(k: int) -> Tuple[Tuple[int, int, int], ...]:
    """Deterministic palette of k visually distinct RGB triples."""
    colors = []
    for i in range(k):
        hue = (i * 0.61803398875) % 1.0
        value = 0.95 if i % 2 == 0 else 0.65
        sat = 0.9 if i % 3 else 0.55
        r, g, b = colorsys.hsv_to_rgb(hue, sat, value)
        colors.append((int(round(r * 255)), int(round(g * 255)), int(round(b * 255))))
    # hue stepping by the golden ratio gives unique colors for any practical
    # k, but guard against a quantization collision anyway
    seen = {}
    for idx, c in enumerate(colors):
        while c in seen:
            c = ((c[0] + 1) % 256, c[1], c[2])
        seen[c] = idx
        colors[idx] = c
    return tuple(colors)


def default_palette(k: int) -> ClassPalette:
    """Palette with generated names/colors for k classes."""
    names = tuple(f"class_{i}" for i in range(k))
    return ClassPalette(names=names, colors=distinct_colors(k))


def sunrgbd_palette() -> ClassPalette:
    """Reference 37-class palette."""
    return ClassPalette(names=SUNRGBD_CLASS_NAMES, colors=distinct_colors(37))


FieldLike = Union[UnaryField, MarginalField, np.ndarray]


def _field_array(field: FieldLike) -> np.ndarray:
    if isinstance(field, UnaryField):
        return field.scores
    if isinstance(field, MarginalField):
        return field.q
    arr = np.asarray(field, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionMismatchError(f"expected (H, W, K) field, got shape {arr.shape}")
    return arr


def argmax_labels(field: FieldLike) -> LabelMap:
    """Per-pixel argmax over class channels; ties resolve to the lowest index."""
    arr = _field_array(field)
    if arr.shape[2] < 2:
        raise DimensionMismatchError("field needs at least 2 class channels")
    labels = arr.argmax(axis=2).astype(np.int32)
    return LabelMap(labels=labels, num_classes=arr.shape[2])


@dataclass(frozen=True)
class ConsistencyReport:
    """Outcome of cross-checking raster dimensions."""

    ok: bool
    mismatch: Optional[str] = None

    def __bool__(self) -> bool:
        return self.ok


def validate_dimensions(rgb: RgbImage, depth: DepthImage, unary: UnaryField) -> ConsistencyReport:
    """Check that color, depth and unary rasters share width and height.

    The report names the first pair that disagrees (rgb/depth checked
    before rgb/unary).
    """
    ref = (rgb.height, rgb.width)
    if (depth.height, depth.width) != ref:
        return ConsistencyReport(
            ok=False,
            mismatch=(
                f"rgb/depth: rgb is {rgb.width}x{rgb.height}, "
                f"depth is {depth.width}x{depth.height}"
            ),
        )
    if (unary.height, unary.width) != ref:
        return ConsistencyReport(
            ok=False,
            mismatch=(
                f"rgb/unary: rgb is {rgb.width}x{rgb.height}, "
                f"unary is {unary.width}x{unary.height}"
            ),
        )
    return ConsistencyReport(ok=True)
