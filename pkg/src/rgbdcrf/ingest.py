"""File I/O: PNG rasters, the .unr unary container, and dataset pairing.

PNG headers are validated directly against the IHDR chunk so that
unsupported bit depths are rejected instead of being silently converted.
"""

from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from PIL import Image

from .core import IGNORE_LABEL, ClassPalette, DepthImage, LabelMap, RgbImage, UnaryField

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

UNARY_MAGIC = b"UNR1"

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class IngestError(Exception):
    """Base class for file ingestion failures."""


class MissingFileError(IngestError):
    pass


class MalformedFileError(IngestError):
    pass


class UnsupportedFormatError(IngestError):
    pass


class BadMagicError(MalformedFileError):
    pass


class TruncatedPayloadError(MalformedFileError):
    pass


class NonFiniteScoreError(IngestError):
    pass


class LabelRangeError(IngestError):
    pass


def _read_png_header(path: Path) -> tuple[int, int, int, int]:
    """Return (width, height, bit_depth, color_type) from the IHDR chunk."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(33)
    except FileNotFoundError:
        raise MissingFileError(f"no such file: {path}") from None
    except IsADirectoryError:
        raise MissingFileError(f"not a file: {path}") from None
    if len(head) < 33 or head[:8] != _PNG_SIGNATURE or head[12:16] != b"IHDR":
        raise MalformedFileError(f"{path} is not a PNG file")
    width, height = struct.unpack(">II", head[16:24])
    bit_depth, color_type = head[24], head[25]
    return width, height, bit_depth, color_type


def _decode_png(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img)
    except Exception as exc:
        raise MalformedFileError(f"failed to decode {path}: {exc}") from exc


def load_rgb(path: PathLike) -> RgbImage:
    """Load an 8-bit RGB or RGBA PNG; any alpha channel is discarded."""
    path = Path(path)
    _, _, bit_depth, color_type = _read_png_header(path)
    if color_type not in (2, 6):
        raise UnsupportedFormatError(
            f"{path}: expected an RGB/RGBA PNG, got color type {color_type}"
        )
    if bit_depth != 8:
        raise UnsupportedFormatError(
            f"{path}: expected 8 bits per channel, got {bit_depth}"
        )
    arr = _decode_png(path)
    if arr.ndim != 3 or arr.shape[2] not in (3, 4):
        raise MalformedFileError(f"{path}: unexpected decoded shape {arr.shape}")
    return RgbImage(data=arr[:, :, :3].astype(np.uint8, copy=False))


def load_depth(path: PathLike) -> DepthImage:
    """Load a single-channel 16-bit grayscale PNG, sample-exact."""
    path = Path(path)
    _, _, bit_depth, color_type = _read_png_header(path)
    if color_type != 0:
        raise UnsupportedFormatError(
            f"{path}: expected single-channel grayscale depth, got color type {color_type}"
        )
    if bit_depth != 16:
        raise UnsupportedFormatError(
            f"{path}: expected 16-bit depth samples, got {bit_depth}-bit"
        )
    arr = _decode_png(path)
    return DepthImage(data=arr.astype(np.uint16, copy=False))


def save_depth(depth: DepthImage, path: PathLike) -> None:
    """Write a DepthImage as a 16-bit grayscale PNG."""
    _atomic_image_save(Image.fromarray(np.asarray(depth.data)), Path(path))


def save_rgb(rgb: RgbImage, path: PathLike) -> None:
    """Write an RgbImage as an 8-bit RGB PNG."""
    _atomic_image_save(Image.fromarray(np.asarray(rgb.data)), Path(path))


def load_unary(path: PathLike) -> UnaryField:
    """Read a .unr score-map container (see save_unary for the layout)."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        raise MissingFileError(f"no such file: {path}") from None
    if len(blob) < 16:
        raise TruncatedPayloadError(f"{path}: file shorter than the 16-byte header")
    if blob[:4] != UNARY_MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}, expected {UNARY_MAGIC!r}")
    width, height, num_classes = struct.unpack("<III", blob[4:16])
    if width < 1 or height < 1 or num_classes < 2:
        raise MalformedFileError(
            f"{path}: invalid header dimensions {width}x{height}x{num_classes}"
        )
    expected = width * height * num_classes
    payload = np.frombuffer(blob, dtype="<f4", offset=16)
    if payload.size != expected:
        raise TruncatedPayloadError(
            f"{path}: header claims {expected} floats, payload has {payload.size}"
        )
    if not np.isfinite(payload).all():
        raise NonFiniteScoreError(f"{path}: payload contains non-finite scores")
    scores = payload.reshape(height, width, num_classes).astype(np.float64)
    return UnaryField(scores=scores)


def save_unary(field: UnaryField, path: PathLike) -> None:
    """Write a UnaryField to the .unr container.

    Layout: magic "UNR1", then width/height/num_classes as little-endian
    u32, then width*height*num_classes little-endian float32, row-major
    with the class index fastest.
    """
    path = Path(path)
    payload = field.scores.astype("<f4")
    if not np.isfinite(payload).all():
        raise NonFiniteScoreError("unary scores do not fit finite float32")
    header = UNARY_MAGIC + struct.pack("<III", field.width, field.height, field.num_classes)
    _atomic_write_bytes(path, header + payload.tobytes())


def load_label_map(path: PathLike, palette: ClassPalette) -> LabelMap:
    """Load an 8-bit indexed or grayscale PNG of class indices."""
    path = Path(path)
    _, _, bit_depth, color_type = _read_png_header(path)
    if color_type not in (0, 3):
        raise UnsupportedFormatError(
            f"{path}: expected grayscale or indexed label PNG, got color type {color_type}"
        )
    if bit_depth != 8:
        raise UnsupportedFormatError(f"{path}: expected 8-bit labels, got {bit_depth}-bit")
    arr = _decode_png(path).astype(np.int32)
    k = len(palette)
    bad = (arr >= k) & (arr != palette.ignore_label)
    if bad.any():
        value = int(arr[bad][0])
        raise LabelRangeError(f"{path}: label value {value} out of range for {k} classes")
    return LabelMap(labels=arr, num_classes=k)


def save_label_map(
    label_map: LabelMap,
    palette: ClassPalette,
    path: PathLike,
    color_path: Optional[PathLike] = None,
) -> None:
    """Write class indices as an 8-bit grayscale PNG.

    When color_path is given, also render the labels through the palette
    into a companion RGB PNG.
    """
    labels = np.asarray(label_map.labels)
    k = len(palette)
    bad = (labels >= k) & (labels != palette.ignore_label)
    if bad.any():
        raise LabelRangeError(
            f"label value {int(labels[bad][0])} out of range for {k} classes"
        )
    _atomic_image_save(Image.fromarray(labels.astype(np.uint8)), Path(path))
    if color_path is not None:
        _atomic_image_save(Image.fromarray(render_labels(label_map, palette)), Path(color_path))


def render_labels(label_map: LabelMap, palette: ClassPalette) -> np.ndarray:
    """Map class indices to palette colors; ignore pixels render black."""
    lut = np.zeros((256, 3), dtype=np.uint8)
    for idx, color in enumerate(palette.colors):
        lut[idx] = color
    return lut[np.asarray(label_map.labels)]


@dataclass(frozen=True)
class DatasetSample:
    """Paths for one paired rgb/depth/unary (and optional gt) sample."""

    sample_id: str
    rgb_path: Path
    depth_path: Path
    unary_path: Path
    gt_path: Optional[Path] = None


def pair_dataset(root: PathLike) -> List[DatasetSample]:
    """Pair samples from rgb/, depth/, unary/ and optional gt/ subdirectories.

    Only ids present in all three required directories are returned, in
    sorted id order; incomplete ids are logged and skipped.
    """
    root = Path(root)
    if not root.is_dir():
        raise MissingFileError(f"dataset root is not a directory: {root}")

    def ids_in(sub: str, suffix: str) -> dict:
        folder = root / sub
        if not folder.is_dir():
            return {}
        return {p.stem: p for p in sorted(folder.glob(f"*{suffix}"))}

    rgb = ids_in("rgb", ".png")
    depth = ids_in("depth", ".png")
    unary = ids_in("unary", ".unr")
    gt = ids_in("gt", ".png")

    samples = []
    for sample_id in sorted(set(rgb) | set(depth) | set(unary)):
        missing = [
            name
            for name, table in (("rgb", rgb), ("depth", depth), ("unary", unary))
            if sample_id not in table
        ]
        if missing:
            log.warning("sample %s skipped: missing %s", sample_id, ", ".join(missing))
            continue
        samples.append(
            DatasetSample(
                sample_id=sample_id,
                rgb_path=rgb[sample_id],
                depth_path=depth[sample_id],
                unary_path=unary[sample_id],
                gt_path=gt.get(sample_id),
            )
        )
    return samples


def _atomic_write_bytes(path: Path, blob: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def _atomic_image_save(img: Image.Image, path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    img.save(tmp, format="PNG")
    os.replace(tmp, path)
