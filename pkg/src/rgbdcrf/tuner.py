"""Iteratively-refined random search over CRF parameters.

Round 0 samples uniformly from the full ranges; every later round
re-centers each searched range on the incumbent best value, shrinks its
width, and clips to the original bounds. The objective is mean IoU over a
validation set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import LabelMap, NormalizedDepth, RgbImage, UnaryField
from .depthprep import normalize_depth_to_rgb
from .inference import Backend, InferenceConfig, run_inference
from .ingest import DatasetSample, load_depth, load_label_map, load_rgb, load_unary, pair_dataset
from .metrics import ConfusionMatrix, accumulate, mean_iou
from .potentials import CrfParams, KernelVariant
from .core import default_palette

PathLike = Union[str, Path]

SEARCHED_PARAMS = ("omega1", "sigma_alpha", "sigma_beta", "sigma_nu")


@dataclass(frozen=True)
class SearchSpace:
    """Closed ranges for the searched parameters plus the fixed settings."""

    omega1: Tuple[float, float] = (5.0, 11.0)
    sigma_alpha: Tuple[float, float] = (90.0, 170.0)
    sigma_beta: Tuple[float, float] = (7.0, 12.0)
    sigma_nu: Tuple[float, float] = (7.0, 12.0)
    omega2: float = 3.0
    sigma_gamma: float = 3.0
    kernel_variant: KernelVariant = KernelVariant.JOINT
    iterations: int = 10

    def __post_init__(self):
        for name in SEARCHED_PARAMS:
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is inverted: ({lo}, {hi})")

    def ranges(self) -> Dict[str, Tuple[float, float]]:
        return {name: getattr(self, name) for name in SEARCHED_PARAMS}


@dataclass(frozen=True)
class SearchConfig:
    rounds: int = 3
    samples_per_round: int = 20
    shrink: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1 or self.samples_per_round < 1:
            raise ValueError("rounds and samples_per_round must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")


@dataclass(frozen=True)
class TrialRecord:
    params: CrfParams
    objective: float
    round_index: int
    seed: int


@dataclass(frozen=True)
class ValidationSample:
    """One loaded validation sample; ground truth is mandatory."""

    sample_id: str
    rgb: RgbImage
    depth: NormalizedDepth
    unary: UnaryField
    gt: LabelMap


class MissingGroundTruthError(ValueError):
    pass


def load_validation_samples(root: PathLike) -> List[ValidationSample]:
    """Load and depth-normalize every paired sample under root (gt required)."""
    samples = []
    for entry in pair_dataset(root):
        if entry.gt_path is None:
            raise MissingGroundTruthError(f"sample {entry.sample_id} has no ground truth")
        rgb = load_rgb(entry.rgb_path)
        unary = load_unary(entry.unary_path)
        palette = default_palette(unary.num_classes)
        samples.append(
            ValidationSample(
                sample_id=entry.sample_id,
                rgb=rgb,
                depth=normalize_depth_to_rgb(load_depth(entry.depth_path), rgb),
                unary=unary,
                gt=load_label_map(entry.gt_path, palette),
            )
        )
    return samples


def sample_config(
    space: SearchSpace,
    rng: np.random.Generator,
    ranges: Optional[Dict[str, Tuple[float, float]]] = None,
) -> CrfParams:
    """Draw each searched parameter uniformly; fixed parameters are copied.

    Draws happen in SEARCHED_PARAMS order so a seeded generator yields a
    reproducible sequence.
    """
    active = ranges if ranges is not None else space.ranges()
    drawn = {name: float(rng.uniform(lo, hi)) for name, (lo, hi) in
             ((n, active[n]) for n in SEARCHED_PARAMS)}
    return CrfParams(
        omega1=drawn["omega1"],
        omega2=space.omega2,
        sigma_alpha=drawn["sigma_alpha"],
        sigma_beta=drawn["sigma_beta"],
        sigma_gamma=space.sigma_gamma,
        sigma_nu=drawn["sigma_nu"],
        kernel_variant=space.kernel_variant,
        iterations=space.iterations,
    )


def evaluate_config(
    params: CrfParams,
    samples: Sequence[ValidationSample],
    backend: Backend = Backend.LATTICE,
) -> float:
    """Mean IoU of the refined predictions over the validation set."""
    if not samples:
        raise ValueError("need at least one validation sample")
    k = samples[0].unary.num_classes
    cm = ConfusionMatrix(k)
    config = InferenceConfig(backend=backend)
    for sample in samples:
        _, pred = run_inference(sample.unary, sample.rgb, sample.depth, params, config)
        accumulate(cm, pred, sample.gt)
    return mean_iou(cm)


def random_search(
    samples: Sequence[ValidationSample],
    space: SearchSpace = SearchSpace(),
    config: SearchConfig = SearchConfig(),
    backend: Backend = Backend.LATTICE,
) -> Tuple[TrialRecord, List[TrialRecord]]:
    """Run the refining random search; returns (best record, full history).

    The best record has the maximum objective, ties resolved to the
    earliest trial. Every sampled value stays inside the original bounds.
    """
    if not samples:
        raise ValueError("need at least one validation sample")
    rng = np.random.default_rng(config.seed)
    original = space.ranges()
    widths = {name: hi - lo for name, (lo, hi) in original.items()}
    current = dict(original)

    history: List[TrialRecord] = []
    best: Optional[TrialRecord] = None
    for round_index in range(config.rounds):
        if round_index > 0 and best is not None:
            for name in SEARCHED_PARAMS:
                widths[name] *= config.shrink
                center = getattr(best.params, name)
                lo, hi = original[name]
                current[name] = (
                    max(lo, center - widths[name] / 2.0),
                    min(hi, center + widths[name] / 2.0),
                )
        for _ in range(config.samples_per_round):
            params = sample_config(space, rng, ranges=current)
            objective = evaluate_config(params, samples, backend=backend)
            record = TrialRecord(
                params=params,
                objective=objective,
                round_index=round_index,
                seed=config.seed,
            )
            history.append(record)
            if best is None or record.objective > best.objective:
                best = record
    assert best is not None
    return best, history


def refine_ranges(
    original: Dict[str, Tuple[float, float]],
    center: CrfParams,
    width_scale: float,
) -> Dict[str, Tuple[float, float]]:
    """One round of range refinement (exposed for tests): shrink the
    original widths by width_scale, center on the incumbent, clip."""
    out = {}
    for name, (lo, hi) in original.items():
        width = (hi - lo) * width_scale
        c = getattr(center, name)
        out[name] = (max(lo, c - width / 2.0), min(hi, c + width / 2.0))
    return out


# --- flat key = value parameter files -------------------------------------

_PARAM_KEYS = (
    "omega1", "omega2", "sigma_alpha", "sigma_beta", "sigma_gamma",
    "sigma_nu", "lambda", "kernel", "iterations",
)


def save_params(params: CrfParams, path: PathLike) -> None:
    """Write CrfParams as diff-friendly key = value text."""
    lines = [
        f"omega1 = {params.omega1!r}",
        f"omega2 = {params.omega2!r}",
        f"sigma_alpha = {params.sigma_alpha!r}",
        f"sigma_beta = {params.sigma_beta!r}",
        f"sigma_gamma = {params.sigma_gamma!r}",
        f"sigma_nu = {params.sigma_nu!r}",
        f"lambda = {params.lam!r}",
        f"kernel = {params.kernel_variant.value}",
        f"iterations = {params.iterations}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_params(path: PathLike) -> CrfParams:
    """Read a key = value parameter file written by save_params."""
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed parameter line: {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    unknown = set(values) - set(_PARAM_KEYS)
    if unknown:
        raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
    base = CrfParams()
    return CrfParams(
        omega1=float(values.get("omega1", base.omega1)),
        omega2=float(values.get("omega2", base.omega2)),
        sigma_alpha=float(values.get("sigma_alpha", base.sigma_alpha)),
        sigma_beta=float(values.get("sigma_beta", base.sigma_beta)),
        sigma_gamma=float(values.get("sigma_gamma", base.sigma_gamma)),
        sigma_nu=float(values.get("sigma_nu", base.sigma_nu)),
        lam=float(values.get("lambda", base.lam)),
        kernel_variant=KernelVariant(values.get("kernel", base.kernel_variant.value)),
        iterations=int(values.get("iterations", base.iterations)),
    )


def write_trial_log(history: Sequence[TrialRecord], path: PathLike) -> None:
    """One line per trial: round, searched parameters, objective."""
    lines = []
    for index, record in enumerate(history):
        p = record.params
        lines.append(
            f"round={record.round_index} trial={index} "
            f"omega1={p.omega1:.6f} sigma_alpha={p.sigma_alpha:.6f} "
            f"sigma_beta={p.sigma_beta:.6f} sigma_nu={p.sigma_nu:.6f} "
            f"objective={record.objective:.6f}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
