"""Synthetic RGB-D scenes with ground truth and noisy score maps.

Desk-scale stand-ins for real indoor captures: piecewise-constant color
and depth regions, plus a unary channel whose argmax is correct with a
configurable probability.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import ClassPalette, DepthImage, LabelMap, RgbImage, UnaryField, default_palette
from .ingest import save_depth, save_label_map, save_rgb, save_unary

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Region:
    """One painted region; later regions overwrite earlier ones.

    shape "rect" uses (x0, y0, x1, y1) with exclusive upper bounds;
    shape "circle" uses (cx, cy, radius).
    """

    shape: str
    geometry: Tuple[float, ...]
    class_index: int
    color: Tuple[int, int, int]
    depth: int

    def __post_init__(self):
        if self.shape not in ("rect", "circle"):
            raise ValueError(f"unknown region shape {self.shape!r}")
        n_geo = 4 if self.shape == "rect" else 3
        if len(self.geometry) != n_geo:
            raise ValueError(f"{self.shape} region needs {n_geo} geometry values")
        if not 0 <= self.depth <= 65535:
            raise ValueError("region depth must fit 16-bit sensor units")


@dataclass(frozen=True)
class SceneSpec:
    """Declarative scene: canvas size, regions, and unary noise level."""

    width: int
    height: int
    regions: Tuple[Region, ...]
    num_classes: int
    noise_p: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if self.width < 1 or self.height < 1:
            raise ValueError("canvas must be at least 1x1")
        if not self.regions:
            raise ValueError("scene needs at least one region")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        for region in self.regions:
            if not 0 <= region.class_index < self.num_classes:
                raise ValueError(f"region class {region.class_index} out of range")
        if not (1.0 / self.num_classes) < self.noise_p <= 1.0:
            raise ValueError("noise_p must lie in (1/K, 1]")


def render_scene(spec: SceneSpec) -> Tuple[RgbImage, DepthImage, LabelMap]:
    """Paint regions in order; every pixel must be covered by some region."""
    h, w = spec.height, spec.width
    labels = np.full((h, w), -1, dtype=np.int32)
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    depth = np.zeros((h, w), dtype=np.uint16)
    ys, xs = np.mgrid[0:h, 0:w]
    for region in spec.regions:
        if region.shape == "rect":
            x0, y0, x1, y1 = region.geometry
            mask = (xs >= x0) & (xs < x1) & (ys >= y0) & (ys < y1)
        else:
            cx, cy, radius = region.geometry
            mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius**2
        labels[mask] = region.class_index
        rgb[mask] = region.color
        depth[mask] = region.depth
    if (labels < 0).any():
        raise ValueError("regions do not cover the canvas")
    return (
        RgbImage(data=rgb),
        DepthImage(data=depth),
        LabelMap(labels=labels, num_classes=spec.num_classes),
    )


def noisy_unary(gt: LabelMap, num_classes: int, p: float, rng: np.random.Generator) -> UnaryField:
    """Score map whose per-pixel argmax equals the true label with probability p.

    Each pixel's predicted label is drawn (true with probability p, the
    rest of the mass split evenly); scores are the log of that
    distribution centered on the draw.
    """
    if not (1.0 / num_classes) < p <= 1.0:
        raise ValueError("p must lie in (1/K, 1]")
    h, w = gt.labels.shape
    true = np.asarray(gt.labels)
    correct = rng.uniform(size=(h, w)) < p
    # wrong draws pick uniformly among the other classes
    shift = rng.integers(1, num_classes, size=(h, w))
    drawn = np.where(correct, true, (true + shift) % num_classes)
    low = np.log((1.0 - p) / (num_classes - 1)) if p < 1.0 else np.log(1e-12)
    scores = np.full((h, w, num_classes), low)
    yy, xx = np.mgrid[0:h, 0:w]
    scores[yy, xx, drawn] = np.log(p)
    return UnaryField(scores=scores)


def depth_edge_spec(width: int = 64, height: int = 64, seed: int = 0) -> SceneSpec:
    """Two same-color rectangles split vertically, separated only by depth.

    The shared color (40, 120, 200) pools to std ~65, so after statistics
    matching the two depth levels sit ~131 apart: far beyond 10x the
    default depth bandwidth of 9.5.
    """
    color = (40, 120, 200)
    half = width // 2
    return SceneSpec(
        width=width,
        height=height,
        regions=(
            Region("rect", (0, 0, half, height), 0, color, 20000),
            Region("rect", (half, 0, width, height), 1, color, 40000),
        ),
        num_classes=2,
        noise_p=0.55,
        seed=seed,
    )


def blocks_spec(
    width: int,
    height: int,
    num_classes: int,
    num_regions: int = 6,
    noise_p: float = 0.55,
    seed: int = 0,
) -> SceneSpec:
    """Random multi-class scene: a base plane plus overlapping rectangles."""
    rng = np.random.default_rng(seed)
    regions: List[Region] = [
        Region("rect", (0, 0, width, height), 0, (200, 200, 60), 45000)
    ]
    for i in range(1, num_regions):
        cls = int(rng.integers(0, num_classes))
        x0 = int(rng.integers(0, max(1, width - 4)))
        y0 = int(rng.integers(0, max(1, height - 4)))
        x1 = int(rng.integers(x0 + 2, width + 1))
        y1 = int(rng.integers(y0 + 2, height + 1))
        color = tuple(int(c) for c in rng.integers(0, 256, size=3))
        depth = int(rng.integers(5000, 60000))
        regions.append(Region("rect", (x0, y0, x1, y1), cls, color, depth))
    return SceneSpec(
        width=width,
        height=height,
        regions=tuple(regions),
        num_classes=num_classes,
        noise_p=noise_p,
        seed=seed,
    )


PRESETS = {
    "depth-edge": depth_edge_spec,
}


def scene_spec_from_json(path: PathLike) -> SceneSpec:
    """Load a SceneSpec from a JSON file."""
    raw = json.loads(Path(path).read_text())
    regions = []
    for item in raw["regions"]:
        if item["shape"] == "rect":
            geometry = (item["x0"], item["y0"], item["x1"], item["y1"])
        elif item["shape"] == "circle":
            geometry = (item["cx"], item["cy"], item["radius"])
        else:
            raise ValueError(f"unknown region shape {item['shape']!r}")
        regions.append(
            Region(
                shape=item["shape"],
                geometry=geometry,
                class_index=int(item["class"]),
                color=tuple(int(c) for c in item["color"]),
                depth=int(item["depth"]),
            )
        )
    return SceneSpec(
        width=int(raw["width"]),
        height=int(raw["height"]),
        regions=tuple(regions),
        num_classes=int(raw["num_classes"]),
        noise_p=float(raw.get("noise_p", 0.55)),
        seed=int(raw.get("seed", 0)),
    )


def write_sample(
    root: PathLike,
    sample_id: str,
    spec: SceneSpec,
    palette: Optional[ClassPalette] = None,
) -> None:
    """Render one sample into the rgb/depth/gt/unary dataset layout."""
    root = Path(root)
    for sub in ("rgb", "depth", "gt", "unary"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    rgb, depth, gt = render_scene(spec)
    rng = np.random.default_rng(spec.seed)
    unary = noisy_unary(gt, spec.num_classes, spec.noise_p, rng)
    if palette is None:
        palette = default_palette(spec.num_classes)
    save_rgb(rgb, root / "rgb" / f"{sample_id}.png")
    save_depth(depth, root / "depth" / f"{sample_id}.png")
    save_label_map(gt, palette, root / "gt" / f"{sample_id}.png")
    save_unary(unary, root / "unary" / f"{sample_id}.unr")
