"""Command-line surface: refine, evaluate, tune, synth, depthprep, and a
dilated-convolution receptive-field calculator."""

from __future__ import annotations

import dataclasses
import logging
import os
import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import click
import numpy as np

from .core import (
    ClassPalette,
    NormalizedDepth,
    default_palette,
    sunrgbd_palette,
    validate_dimensions,
)
from .depthprep import depth_stats, normalize_depth_to_rgb, sample_is_usable
from .inference import Backend, InferenceConfig, run_inference
from .ingest import (
    IngestError,
    load_depth,
    load_label_map,
    load_rgb,
    load_unary,
    render_labels,
    save_label_map,
)
from .metrics import ConfusionMatrix, accumulate
from .potentials import CrfParams, KernelVariant
from .report import (
    classwise_table,
    render_iou_figure,
    render_search_figure,
    summary_line,
    write_classwise_csv,
)
from .synth import PRESETS, SceneSpec, scene_spec_from_json, write_sample
from .tuner import (
    SearchConfig,
    SearchSpace,
    load_params,
    load_validation_samples,
    random_search,
    save_params,
    write_trial_log,
)

log = logging.getLogger(__name__)


def receptive_field(layers: Sequence[Tuple[int, int, int]]) -> int:
    """Receptive-field side length of stacked (kernel, dilation, stride) layers.

    Standard recurrence: r grows by (k - 1) * d * jump per layer and jump
    multiplies by the stride.
    """
    r = 1
    jump = 1
    for kernel, dilation, stride in layers:
        if kernel < 1 or kernel % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {kernel}")
        if dilation < 1 or stride < 1:
            raise ValueError("dilation and stride must be >= 1")
        r += (kernel - 1) * dilation * jump
        jump *= stride
    return r


def _palette_for(k: int, palette_file: Optional[str]) -> ClassPalette:
    if palette_file:
        names, colors = [], []
        for raw in Path(palette_file).read_text().splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise click.ClickException(
                    f"palette line must be 'name r g b': {raw!r}"
                )
            names.append(parts[0])
            colors.append(tuple(int(c) for c in parts[1:]))
        return ClassPalette(names=tuple(names), colors=tuple(colors))
    if k == 37:
        return sunrgbd_palette()
    return default_palette(k)


@click.group()
def main():
    """Depth-sensitive dense CRF refinement for semantic segmentation."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")


@main.command("refine")
@click.option("--rgb", "rgb_path", required=True, type=click.Path())
@click.option("--depth", "depth_path", required=True, type=click.Path())
@click.option("--unary", "unary_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--out-overlay", "overlay_path", type=click.Path(), default=None)
@click.option("--params", "params_path", type=click.Path(), default=None,
              help="key = value parameter file (see tune --out)")
@click.option("--kernel", type=click.Choice(["joint", "split", "rgb"]), default=None)
@click.option("--iters", type=int, default=None)
@click.option("--backend", type=click.Choice(["brute", "lattice"]), default="lattice")
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--w1", type=float, default=None)
@click.option("--w2", type=float, default=None)
@click.option("--sa", type=float, default=None)
@click.option("--sb", type=float, default=None)
@click.option("--sg", type=float, default=None)
@click.option("--sv", type=float, default=None)
@click.option("--strict", is_flag=True,
              help="error out instead of falling back to the rgb kernel on unusable depth")
def cmd_refine(rgb_path, depth_path, unary_path, out_path, overlay_path, params_path,
               kernel, iters, backend, lam, w1, w2, sa, sb, sg, sv, strict):
    """Refine a score map with the dense CRF and write the label PNG."""
    try:
        rgb = load_rgb(rgb_path)
        depth = load_depth(depth_path)
        unary = load_unary(unary_path)
    except IngestError as exc:
        raise click.ClickException(str(exc))

    report = validate_dimensions(rgb, depth, unary)
    if not report.ok:
        raise click.ClickException(f"dimension mismatch: {report.mismatch}")

    params = load_params(params_path) if params_path else CrfParams()
    overrides = {
        "omega1": w1, "omega2": w2, "sigma_alpha": sa, "sigma_beta": sb,
        "sigma_gamma": sg, "sigma_nu": sv, "lam": lam,
        "kernel_variant": KernelVariant(kernel) if kernel else None,
        "iterations": iters,
    }
    changed = {k: v for k, v in overrides.items() if v is not None}
    if changed:
        params = dataclasses.replace(params, **changed)

    usable = sample_is_usable(depth)
    if usable:
        depth_norm = normalize_depth_to_rgb(depth, rgb)
    else:
        invalid_pct = 100.0 * (1.0 - depth.valid_mask.mean())
        if strict:
            raise click.ClickException(
                f"depth unusable (invalid {invalid_pct:.1f}% > 45%) and --strict is set"
            )
        log.warning(
            "depth unusable (invalid %.1f%% > 45%%): falling back to the rgb-only kernel",
            invalid_pct,
        )
        params = dataclasses.replace(params, kernel_variant=KernelVariant.RGB_ONLY)
        depth_norm = NormalizedDepth(
            data=np.zeros((depth.height, depth.width)),
            validity_mask=np.zeros((depth.height, depth.width), dtype=bool),
        )

    config = InferenceConfig(backend=Backend(backend))
    started = time.perf_counter()
    try:
        _, labels = run_inference(unary, rgb, depth_norm, params, config)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    elapsed = time.perf_counter() - started

    palette = _palette_for(unary.num_classes, None)
    save_label_map(labels, palette, out_path)
    if overlay_path:
        overlay = (
            0.5 * rgb.data.astype(np.float64)
            + 0.5 * render_labels(labels, palette).astype(np.float64)
        )
        from PIL import Image

        tmp = Path(overlay_path).with_name(Path(overlay_path).name + ".tmp")
        Image.fromarray(np.clip(np.rint(overlay), 0, 255).astype(np.uint8)).save(
            tmp, format="PNG"
        )
        os.replace(tmp, overlay_path)
    click.echo(
        f"refined {unary.width}x{unary.height} (K={unary.num_classes}, "
        f"{params.kernel_variant.value} kernel, {backend} backend) in {elapsed:.2f}s"
    )


def _collect_pairs(pred: Path, gt: Path) -> List[Tuple[Path, Path]]:
    if pred.is_file() and gt.is_file():
        return [(pred, gt)]
    if not (pred.is_dir() and gt.is_dir()):
        raise click.ClickException("--pred and --gt must both be files or both directories")
    pred_map = {p.stem: p for p in sorted(pred.glob("*.png"))}
    gt_map = {p.stem: p for p in sorted(gt.glob("*.png"))}
    unmatched = sorted(set(pred_map) ^ set(gt_map))
    if unmatched:
        raise click.ClickException(f"unmatched sample ids: {', '.join(unmatched)}")
    if not pred_map:
        raise click.ClickException("no PNG files to evaluate")
    return [(pred_map[s], gt_map[s]) for s in sorted(pred_map)]


@main.command("evaluate")
@click.option("--pred", required=True, type=click.Path(exists=True))
@click.option("--gt", required=True, type=click.Path(exists=True))
@click.option("--classes", "num_classes", type=int, default=None)
@click.option("--palette", "palette_file", type=click.Path(exists=True), default=None,
              help="text palette: one 'name r g b' line per class")
@click.option("--classwise", is_flag=True, help="print the classwise IoU table")
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--fig", "fig_path", type=click.Path(), default=None,
              help="render the classwise IoU bar chart to this file")
def cmd_evaluate(pred, gt, num_classes, palette_file, classwise, csv_path, fig_path):
    """Print Pixel / Mean / IoU for predictions against ground truth."""
    if num_classes is None and palette_file is None:
        raise click.ClickException("pass --classes K or --palette FILE")
    palette = _palette_for(num_classes or 0, palette_file)
    k = len(palette)
    cm = ConfusionMatrix(k)
    try:
        for pred_path, gt_path in _collect_pairs(Path(pred), Path(gt)):
            accumulate(cm, load_label_map(pred_path, palette), load_label_map(gt_path, palette))
    except (IngestError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(summary_line(cm))
    if classwise:
        click.echo(classwise_table(cm, palette.names))
    if csv_path:
        write_classwise_csv(cm, palette.names, csv_path)
    if fig_path:
        render_iou_figure(cm, palette.names, fig_path)


@main.command("tune")
@click.option("--val", "val_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--rounds", type=int, default=3, show_default=True)
@click.option("--samples", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--shrink", type=float, default=0.5, show_default=True)
@click.option("--backend", type=click.Choice(["brute", "lattice"]), default="lattice")
@click.option("--log", "log_path", type=click.Path(), default=None,
              help="trial log destination (default: <out>.log)")
@click.option("--fig", "fig_path", type=click.Path(), default=None,
              help="render search progress to this file")
def cmd_tune(val_dir, out_path, rounds, samples, seed, shrink, backend, log_path, fig_path):
    """Random-search CRF parameters against a validation directory."""
    try:
        val_samples = load_validation_samples(val_dir)
    except (IngestError, ValueError) as exc:
        raise click.ClickException(str(exc))
    if not val_samples:
        raise click.ClickException(f"no complete validation samples under {val_dir}")
    config = SearchConfig(rounds=rounds, samples_per_round=samples, shrink=shrink, seed=seed)
    best, history = random_search(
        val_samples, SearchSpace(), config, backend=Backend(backend)
    )
    save_params(best.params, out_path)
    write_trial_log(history, log_path or f"{out_path}.log")
    if fig_path:
        render_search_figure(
            [r.objective for r in history], [r.round_index for r in history], fig_path
        )
    click.echo(
        f"best objective {best.objective:.4f} in round {best.round_index} "
        f"(omega1={best.params.omega1:.3f}, sigma_alpha={best.params.sigma_alpha:.3f}, "
        f"sigma_beta={best.params.sigma_beta:.3f}, sigma_nu={best.params.sigma_nu:.3f})"
    )


@main.command("synth")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None)
@click.option("--spec", "spec_path", type=click.Path(exists=True), default=None,
              help="JSON scene description")
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--size", default="64x64", show_default=True, help="WIDTHxHEIGHT for presets")
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_synth(out_dir, preset, spec_path, count, size, seed):
    """Write synthetic rgb/depth/gt/unary samples."""
    if (preset is None) == (spec_path is None):
        raise click.ClickException("pass exactly one of --preset or --spec")
    try:
        width, height = (int(v) for v in size.lower().split("x"))
    except ValueError:
        raise click.ClickException(f"bad --size {size!r}, expected WIDTHxHEIGHT")
    for index in range(count):
        sample_seed = seed + index
        if preset:
            spec = PRESETS[preset](width=width, height=height, seed=sample_seed)
        else:
            base = scene_spec_from_json(spec_path)
            spec = SceneSpec(
                width=base.width, height=base.height, regions=base.regions,
                num_classes=base.num_classes, noise_p=base.noise_p, seed=sample_seed,
            )
        try:
            write_sample(out_dir, f"{index:04d}", spec)
        except ValueError as exc:
            raise click.ClickException(str(exc))
    click.echo(f"wrote {count} sample(s) under {out_dir}")


@main.command("depthprep")
@click.option("--depth", "depth_path", required=True, type=click.Path())
@click.option("--rgb", "rgb_path", required=True, type=click.Path())
@click.option("--check-only", is_flag=True, help="report usability without writing output")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="normalized raster destination (default: <depth>.norm.npy)")
def cmd_depthprep(depth_path, rgb_path, check_only, out_path):
    """Report depth usability and write the RGB-statistics-matched raster."""
    try:
        depth = load_depth(depth_path)
        rgb = load_rgb(rgb_path)
    except IngestError as exc:
        raise click.ClickException(str(exc))
    stats = depth_stats(depth)
    invalid_pct = 100.0 * (1.0 - stats.valid_fraction)
    usable = sample_is_usable(depth)
    verdict = "usable" if usable else "unusable"
    comparison = "<=" if usable else ">"
    click.echo(f"valid fraction: {stats.valid_fraction:.4f}")
    click.echo(f"verdict: {verdict} (invalid {invalid_pct:.1f}% {comparison} 45%)")
    if stats.mean is None:
        click.echo("depth stats: undefined (no valid pixels)")
    else:
        click.echo(f"depth mean: {stats.mean:.2f}  std: {stats.std:.2f}")
    if check_only:
        return
    if stats.valid_fraction == 0.0:
        raise click.ClickException("cannot normalize: depth image has no valid pixels")
    normalized = normalize_depth_to_rgb(depth, rgb)
    target = Path(out_path) if out_path else Path(str(depth_path) + ".norm.npy")
    tmp = target.with_name(target.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.save(fh, normalized.data.astype(np.float32))
    os.replace(tmp, target)
    click.echo(f"wrote {target}")


@main.command("receptive-field")
@click.option("--layer", "-l", "layers", multiple=True, required=True,
              help="one convolution layer as KERNEL,DILATION,STRIDE")
def cmd_receptive_field(layers):
    """Receptive-field side length of a stack of (dilated) convolutions."""
    parsed = []
    for spec in layers:
        parts = spec.split(",")
        if len(parts) != 3:
            raise click.ClickException(f"bad --layer {spec!r}, expected K,D,S")
        try:
            parsed.append(tuple(int(p) for p in parts))
        except ValueError:
            raise click.ClickException(f"bad --layer {spec!r}, expected integers")
    try:
        side = receptive_field(parsed)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"receptive field: {side}x{side}")


if __name__ == "__main__":
    main()
