"""Image and annotation I/O plus dataset enumeration.

Images are binary PPM (P6) / PGM (P5) with maxval 255 only; annotations
are plain text, one box per line as ``x y w h [ignore]``.  Pixel data is
stored row-major with the plane index fastest (the PPM byte order), i.e.
as a ``(height, width, planes)`` uint8 array.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    EmptyDataset,
    MalformedHeader,
    MalformedLine,
    MissingAnnotation,
    NegativeDimension,
    TruncatedData,
    UnsupportedFormat,
)

IMAGE_SUFFIXES = (".ppm", ".pgm")


@dataclass(frozen=True, eq=False)
class Image:
    """8-bit image; ``data`` has shape (height, width, planes)."""

    width: int
    height: int
    planes: int  # 3 (RGB) or 1 (gray)
    data: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise MalformedHeader(f"bad dimensions {self.width}x{self.height}")
        if self.planes not in (1, 3):
            raise UnsupportedFormat(f"unsupported plane count {self.planes}")
        if self.data.shape != (self.height, self.width, self.planes):
            raise TruncatedData(
                f"data shape {self.data.shape} != "
                f"({self.height}, {self.width}, {self.planes})"
            )


@dataclass(frozen=True)
class GroundTruthBox:
    x: float
    y: float
    w: float
    h: float
    ignore: bool = False


@dataclass(frozen=True)
class DatasetLayout:
    pos_dir: str = "pos"
    annot_dir: str = "pos-annot"
    neg_dir: str = "neg"
    annot_suffix: str = ".txt"


@dataclass(frozen=True)
class DatasetIndex:
    positives: tuple[tuple[Path, Path], ...]  # (image, annotation) pairs
    negatives: tuple[Path, ...]


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_header_tokens(raw: bytes, count: int):
    """Pull whitespace-separated header tokens, skipping # comments.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the header.
    """
    pos = 0
    tokens = []
    for _ in range(count):
        m = _TOKEN.match(raw, pos)
        if not m:
            raise MalformedHeader("unexpected end of header")
        tokens.append(m.group(1))
        pos = m.end()
    if pos >= len(raw) or raw[pos] not in b" \t\r\n":
        raise MalformedHeader("header not terminated by whitespace")
    return tokens, pos + 1


def load_image(path) -> Image:
    """Decode a binary PPM (P6) or PGM (P5) file with maxval 255."""
    raw = Path(path).read_bytes()
    if len(raw) < 2:
        raise MalformedHeader(f"{path}: too short to hold a header")
    magic = raw[:2]
    if magic == b"P5":
        planes = 1
    elif magic == b"P6":
        planes = 3
    elif magic in (b"P1", b"P2", b"P3", b"P4"):
        raise UnsupportedFormat(f"{path}: only binary P5/P6 supported, got {magic!r}")
    else:
        raise MalformedHeader(f"{path}: bad magic {magic!r}")

    tokens, data_off = _read_header_tokens(raw[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise MalformedHeader(f"{path}: non-numeric header field") from None
    if width < 1 or height < 1:
        raise MalformedHeader(f"{path}: bad dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedFormat(f"{path}: maxval {maxval} != 255")

    need = width * height * planes
    payload = raw[2 + data_off : 2 + data_off + need]
    if len(payload) < need:
        raise TruncatedData(f"{path}: expected {need} bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, planes)
    return Image(width, height, planes, data.copy())


def save_image(img: Image, path) -> None:
    """Write an Image as binary PGM (1 plane) or PPM (3 planes)."""
    magic = b"P5" if img.planes == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, img.width, img.height)
    Path(path).write_bytes(header + img.data.tobytes())


def load_annotations(path) -> list[GroundTruthBox]:
    """Parse a box-per-line annotation file: ``x y w h [ignore]``."""
    boxes = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split()
            if len(fields) not in (4, 5):
                raise MalformedLine(f"{path}:{lineno}: expected 4 or 5 fields")
            try:
                x, y, w, h = (float(v) for v in fields[:4])
            except ValueError:
                raise MalformedLine(f"{path}:{lineno}: non-numeric field") from None
            if w <= 0 or h <= 0:
                raise NegativeDimension(f"{path}:{lineno}: non-positive box {w}x{h}")
            ignore = False
            if len(fields) == 5:
                if fields[4] not in ("0", "1"):
                    raise MalformedLine(f"{path}:{lineno}: ignore flag must be 0 or 1")
                ignore = fields[4] == "1"
            boxes.append(GroundTruthBox(x, y, w, h, ignore))
    return boxes


def list_images(directory) -> list[Path]:
    """All PGM/PPM files directly inside a directory, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        return []
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def scan_dataset(root, layout: DatasetLayout = DatasetLayout()) -> DatasetIndex:
    """Enumerate a dataset directory into a sorted, deterministic index.

    ``root`` holds positive images under ``layout.pos_dir`` with one
    annotation file per image under ``layout.annot_dir`` (same stem),
    plus object-free images under ``layout.neg_dir``.
    """
    root = Path(root)
    pos_images = list_images(root / layout.pos_dir)
    neg_images = tuple(list_images(root / layout.neg_dir))

    positives = []
    for img_path in pos_images:
        annot = root / layout.annot_dir / (img_path.stem + layout.annot_suffix)
        if not annot.is_file():
            raise MissingAnnotation(f"no annotation file for {img_path}")
        positives.append((img_path, annot))

    if not positives or not neg_images:
        raise EmptyDataset(
            f"{root}: found {len(positives)} positives, {len(neg_images)} negatives"
        )
    return DatasetIndex(tuple(positives), neg_images)
