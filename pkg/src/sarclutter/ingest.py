"""Image input/output, pixel series, regions and synthetic clutter scenes.

Pixel coordinates are zero-based ``(row, col)`` everywhere; rectangles are
half-open ``(r0, c0, r1, c1)``, so ``(0, 0, 21, 21)`` holds 441 pixels.
"""

from __future__ import annotations

import csv
import os
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import models
from .cfar import check_rect
from .errors import DataError, DomainError, FormatError, LengthError

PHOENIX_BEGIN = b"[PhoenixHeaderVer"
PHOENIX_END = b"[EndofPhoenixHeader]"
ASPECT_KEY = "TargetAz"
_PHOENIX_RESERVED = {"PhoenixHeaderLength", "native_header_length", "NumberOfColumns", "NumberOfRows", "path"}


@dataclass(frozen=True, eq=False)
class AmplitudeImage:
    """2-D grid of non-negative amplitudes plus string metadata."""

    pixels: np.ndarray
    meta: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise DomainError("an amplitude image must be a non-empty 2-D grid")
        if not np.all(np.isfinite(px)):
            raise DataError("amplitudes must be finite")
        if np.any(px < 0):
            raise DataError("amplitudes must be non-negative")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "meta", {str(k): str(v) for k, v in self.meta.items()})

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def cols(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, AmplitudeImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels) and self.meta == other.meta


# ---------------------------------------------------------------------------
# MSTAR Phoenix


def _parse_phoenix_header(blob: bytes):
    if not blob.startswith(PHOENIX_BEGIN):
        raise FormatError("missing Phoenix header begin sentinel")
    end = blob.find(PHOENIX_END)
    if end < 0:
        raise FormatError("missing Phoenix header end sentinel")
    newline = blob.find(b"\n", end)
    body_start = len(blob) if newline < 0 else newline + 1
    text = blob[:end].decode("ascii", errors="replace")
    header = {}
    for line in text.splitlines()[1:]:
        if "=" not in line:
            continue
        key, value = line.split("=", 1)
        header[key.strip()] = value.strip()
    return header, body_start


def _header_int(header, key):
    try:
        return int(header[key])
    except KeyError:
        raise FormatError(f"Phoenix header lacks {key}") from None
    except ValueError:
        raise FormatError(f"non-numeric {key}: {header[key]!r}") from None


def read_mstar(path, byteorder: str = ">") -> AmplitudeImage:
    """Read the magnitude block of an MSTAR Phoenix chip.

    The ASCII header runs from the ``[PhoenixHeaderVer..]`` line to
    ``[EndofPhoenixHeader]``. When it declares ``PhoenixHeaderLength`` (and
    optionally ``native_header_length``) the payload starts at their sum;
    otherwise right after the end sentinel line. The payload holds
    ``rows * cols`` float32 magnitudes followed by the phase block, which is
    ignored.

    Parameters
    ----------
    path : str or os.PathLike
    byteorder : {'>', '<'}
        Payload byte order; big-endian per the public format. Little-endian
        exists for files mangled by careless conversion tools.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    header, offset = _parse_phoenix_header(blob)
    rows = _header_int(header, "NumberOfRows")
    cols = _header_int(header, "NumberOfColumns")
    if rows < 1 or cols < 1:
        raise FormatError(f"invalid image dimensions {rows}x{cols}")
    if "PhoenixHeaderLength" in header:
        offset = _header_int(header, "PhoenixHeaderLength")
        if "native_header_length" in header:
            offset += _header_int(header, "native_header_length")
    count = rows * cols
    available = max(len(blob) - offset, 0) // 4
    if available < count:
        raise LengthError(f"payload holds {available} floats, header declares {rows}x{cols} = {count}")
    magnitude = np.frombuffer(blob, dtype=np.dtype(byteorder + "f4"), count=count, offset=offset)
    magnitude = magnitude.reshape(rows, cols).astype(np.float64)
    if not np.all(np.isfinite(magnitude)) or np.any(magnitude < 0):
        raise DataError(f"{os.fspath(path)}: magnitude block has negative or non-finite values")
    meta = dict(header)
    meta.setdefault("path", os.fspath(path))
    return AmplitudeImage(magnitude, meta)


def write_mstar(image: AmplitudeImage, path, phase=None) -> None:
    """Write an image as a Phoenix chip (magnitude plus phase block).

    Header length fields are fixed-width so the declared length is exact.
    """
    meta = {k: v for k, v in image.meta.items() if k not in _PHOENIX_RESERVED}
    lines = [
        "[PhoenixHeaderVer01.04]",
        "PhoenixHeaderLength= 0000000000",
        "native_header_length= 0000000000",
        f"NumberOfColumns= {image.cols}",
        f"NumberOfRows= {image.rows}",
    ]
    lines += [f"{k}= {v}" for k, v in meta.items() if "\n" not in k + v and "=" not in k]
    lines.append(PHOENIX_END.decode())
    head = ("\n".join(lines) + "\n").encode("ascii")
    head = head.replace(b"PhoenixHeaderLength= 0000000000", b"PhoenixHeaderLength= %010d" % len(head), 1)
    if phase is None:
        phase = np.zeros(image.shape)
    payload = np.concatenate([image.pixels.ravel(), np.asarray(phase, dtype=np.float64).ravel()])
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(payload.astype(">f4").tobytes())


# ---------------------------------------------------------------------------
# PGM

_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def read_pgm(path) -> AmplitudeImage:
    """Read a binary (P5) graymap; values are rescaled to ``[0, 255]``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P5"):
        raise FormatError(f"{os.fspath(path)}: not a binary PGM (P5) file")
    pos = 2
    fields = []
    for _ in range(3):
        m = _PGM_TOKEN.match(blob, pos)
        if m is None:
            raise FormatError("truncated PGM header")
        try:
            fields.append(int(m.group(1)))
        except ValueError:
            raise FormatError(f"bad PGM header field {m.group(1)!r}") from None
        pos = m.end()
    width, height, maxval = fields
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise FormatError(f"bad PGM header {width}x{height} maxval {maxval}")
    pos += 1  # single whitespace byte before the raster
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    count = width * height
    if len(blob) - pos < count * dtype.itemsize:
        raise LengthError("PGM raster shorter than its header declares")
    raster = np.frombuffer(blob, dtype=dtype, count=count, offset=pos).reshape(height, width)
    pixels = raster.astype(np.float64)
    if maxval != 255:
        pixels = pixels * (255.0 / maxval)
    return AmplitudeImage(pixels, {"path": os.fspath(path), "maxval": str(maxval)})


def to_gray_bytes(image) -> np.ndarray:
    """Clamp and round to ``uint8``; boolean masks map to 0/255."""
    arr = np.asarray(getattr(image, "pixels", image))
    if arr.dtype == bool:
        return np.where(arr, 255, 0).astype(np.uint8)
    return np.clip(np.rint(arr.astype(np.float64)), 0, 255).astype(np.uint8)


def write_pgm(image, path) -> None:
    """Write an image or boolean mask as a binary P5 graymap, maxval 255."""
    data = to_gray_bytes(image)
    if data.ndim != 2:
        raise DomainError("PGM output needs a 2-D array")
    height, width = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def load_image(path, byteorder: str = ">") -> AmplitudeImage:
    """Read a PGM or Phoenix file, sniffing the format from its first bytes."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        return read_pgm(path)
    return read_mstar(path, byteorder)


# ---------------------------------------------------------------------------
# transforms


def normalize_to_gray(image: AmplitudeImage) -> AmplitudeImage:
    """Map ``[0, max]`` linearly onto ``[0, 255]``; all-zero stays all-zero."""
    top = image.pixels.max()
    if top == 0:
        return AmplitudeImage(np.zeros(image.shape), image.meta)
    return AmplitudeImage(image.pixels * (255.0 / top), image.meta)


@dataclass(frozen=True, eq=False)
class PixelSeries:
    row: int
    col: int
    values: np.ndarray
    aspect_deg: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if np.any(values < 0):
            raise DataError("series amplitudes must be non-negative")
        object.__setattr__(self, "values", values)
        if self.aspect_deg is not None:
            aspect = np.array(self.aspect_deg, dtype=np.float64)
            if aspect.shape != values.shape:
                raise DomainError("aspect list must match the series length")
            object.__setattr__(self, "aspect_deg", aspect)

    def __len__(self):
        return self.values.size

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "aspect_deg", "value"])
        for i, v in enumerate(self.values):
            aspect = "" if self.aspect_deg is None else repr(float(self.aspect_deg[i]))
            writer.writerow([i, aspect, repr(float(v))])


def _aspect(image):
    try:
        return float(image.meta[ASPECT_KEY])
    except (KeyError, ValueError):
        return None


def stack_series(images: Sequence[AmplitudeImage], row: int, col: int) -> PixelSeries:
    """Collect pixel ``(row, col)`` across an ordered stack of images.

    Aspect angles come from each image's ``TargetAz`` entry; if any image
    lacks one the series carries no aspect list.
    """
    if not images:
        raise DomainError("empty image stack")
    shape = images[0].shape
    for img in images:
        if img.shape != shape:
            raise DomainError(f"image dimensions differ: {img.shape} vs {shape}")
    if not (0 <= row < shape[0] and 0 <= col < shape[1]):
        raise DomainError(f"pixel ({row}, {col}) outside {shape[0]}x{shape[1]} images")
    values = [img.pixels[row, col] for img in images]
    aspects = [_aspect(img) for img in images]
    aspect = None if any(a is None for a in aspects) else aspects
    return PixelSeries(row, col, values, aspect)


def region_samples(image, rect) -> np.ndarray:
    """Row-major pixel values of the half-open rectangle ``(r0, c0, r1, c1)``."""
    px = getattr(image, "pixels", image)
    r0, c0, r1, c1 = check_rect(rect, px.shape)
    return np.array(px[r0:r1, c0:c1], dtype=np.float64).ravel()


# ---------------------------------------------------------------------------
# synthetic scenes


@dataclass(frozen=True)
class SceneSpec:
    rows: int
    cols: int
    clutter: models.ClutterModel
    targets: List[Tuple[int, int, float]] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DomainError("scene dimensions must be positive")
        targets = [(int(r), int(c), float(a)) for r, c, a in self.targets]
        for r, c, a in targets:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise DomainError(f"target ({r}, {c}) outside the scene")
            if not a > 0:
                raise DomainError("target amplitudes must be positive")
        object.__setattr__(self, "targets", targets)


def synth_scene(spec: SceneSpec) -> AmplitudeImage:
    """i.i.d. clutter from ``spec.clutter`` with target pixels overwritten."""
    pixels = models.sample(spec.clutter, spec.rows * spec.cols, spec.seed).reshape(spec.rows, spec.cols)
    for r, c, amplitude in spec.targets:
        pixels[r, c] = amplitude
    meta = {"source": "synthetic", "seed": str(spec.seed), "clutter": spec.clutter.family}
    return AmplitudeImage(pixels, meta)
