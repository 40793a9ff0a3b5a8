"""Raster types, cropping, quantization, and bit-exact file I/O.

Two raster types cover the whole package: ``Image8`` is the 8-bit RGB ingest
unit, ``ImageF`` the float64 result of any preprocessing. Both wrap read-only
numpy arrays, so values can be shared freely across threads.

File formats:

* PPM ``P6`` (maxval 255) is the sole 8-bit interchange format. The encoder
  emits one canonical byte form (single-space tokens, newline before the
  payload) so identical images always produce identical files.
* ``PIXMAP-IMF1`` is a plain-text container for ``ImageF`` using shortest
  round-trip decimals, exact under write/read.
* PGM ``P5`` is write-only, for grayscale heatmap export.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PixmapError
from .rng import SplitMix64


@dataclass(frozen=True)
class Image8:
    """H x W x 3 unsigned 8-bit raster."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise PixmapError("bad-shape", f"Image8 needs HxWx3 data, got {arr.shape}")
        if arr.dtype != np.uint8:
            raise PixmapError("bad-dtype", f"Image8 needs uint8 data, got {arr.dtype}")
        arr = np.ascontiguousarray(arr).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, Image8) and np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class ImageF:
    """H x W x C float64 raster; all samples finite."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] < 1:
            raise PixmapError("bad-shape", f"ImageF needs HxWxC data, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise PixmapError("non-finite", "ImageF samples must be finite")
        arr = np.ascontiguousarray(arr).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class CropSpec:
    """Square crop: ``center``, or ``random`` with an explicit seed."""

    size: int
    mode: str = "center"
    seed: int | None = None

    def __post_init__(self):
        if self.size < 1:
            raise PixmapError("bad-crop", "crop size must be >= 1")
        if self.mode not in ("center", "random"):
            raise PixmapError("bad-crop", f"unknown crop mode {self.mode!r}")
        if self.mode == "random" and self.seed is None:
            raise PixmapError("bad-crop", "random crop requires a seed")


# --- PPM P6 -----------------------------------------------------------------


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    """Next whitespace-delimited header token, skipping '#' comments."""
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PixmapError("malformed-header", "unexpected end of PPM header")
    return buf[start:pos], pos


def decode_ppm(raw: bytes) -> Image8:
    """Decode a binary PPM (P6, maxval 255).

    Accepts standard header whitespace and '#' comments; rejects any other
    PNM variant, maxval != 255, short payloads, and trailing bytes.
    """
    if len(raw) < 2 or raw[:2] != b"P6":
        magic = raw[:2].decode("ascii", "replace") if len(raw) >= 2 else "<empty>"
        raise PixmapError("unsupported-format", f"expected P6 magic, got {magic!r}")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _read_token(raw, pos)
        if not tok.isdigit():
            raise PixmapError("malformed-header", f"non-numeric header token {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PixmapError("malformed-header", f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise PixmapError("unsupported-maxval", f"maxval must be 255, got {maxval}")
    if pos >= len(raw) or not raw[pos : pos + 1].isspace():
        raise PixmapError("malformed-header", "missing whitespace before payload")
    pos += 1
    payload = raw[pos:]
    expected = width * height * 3
    if len(payload) < expected:
        raise PixmapError("truncated-payload", f"need {expected} bytes, got {len(payload)}")
    if len(payload) > expected:
        raise PixmapError("oversized-payload", f"{len(payload) - expected} trailing bytes")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return Image8(arr)


def encode_ppm(img: Image8) -> bytes:
    """Encode to the canonical P6 byte form; identical images give identical bytes."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.data.tobytes()


def write_pgm(path, gray: np.ndarray) -> None:
    """Write a 2-D uint8 array as binary PGM (P5, maxval 255)."""
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise PixmapError("bad-shape", "PGM writer needs a 2-D uint8 array")
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii") + gray.tobytes())


# --- crop / float conversion -------------------------------------------------


def crop(img: Image8, spec: CropSpec) -> Image8:
    """Cut a size x size window; center offsets are floor((dim - size) / 2)."""
    s = spec.size
    if s > min(img.height, img.width):
        raise PixmapError(
            "crop-too-large", f"crop {s} exceeds image {img.height}x{img.width}"
        )
    if spec.mode == "center":
        top = (img.height - s) // 2
        left = (img.width - s) // 2
    else:
        rng = SplitMix64(spec.seed)
        top = rng.randrange(img.height - s + 1)
        left = rng.randrange(img.width - s + 1)
    return Image8(img.data[top : top + s, left : left + s])


def to_float(img: Image8) -> ImageF:
    """Copy samples to float64, values 0..255 unchanged."""
    return ImageF(img.data.astype(np.float64))


def quantize(img: ImageF, lo: float, hi: float) -> Image8:
    """Affinely map [lo, hi] to [0, 255], clamp, and round half to even."""
    if not lo < hi:
        raise PixmapError("bad-range", f"quantize needs lo < hi, got [{lo}, {hi}]")
    if img.channels != 3:
        raise PixmapError("bad-shape", f"quantize needs 3 channels, got {img.channels}")
    scaled = (img.data - lo) * (255.0 / (hi - lo))
    return Image8(np.rint(np.clip(scaled, 0.0, 255.0)).astype(np.uint8))


# --- ImageF text container ----------------------------------------------------

_IMF_MAGIC = "PIXMAP-IMF1"


def write_imagef(path, img: ImageF) -> None:
    """Write an ImageF as text: magic, dims, one line of decimals per row."""
    lines = [_IMF_MAGIC, f"{img.height} {img.width} {img.channels}"]
    flat = img.data.reshape(img.height, img.width * img.channels)
    for row in flat:
        lines.append(" ".join(repr(x) for x in row.tolist()))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_imagef(path) -> ImageF:
    """Read a PIXMAP-IMF1 file; exact inverse of :func:`write_imagef`."""
    with open(path, "r", encoding="ascii") as fh:
        magic = fh.readline().strip()
        if magic != _IMF_MAGIC:
            raise PixmapError("unsupported-format", f"expected {_IMF_MAGIC}, got {magic!r}")
        try:
            h, w, c = (int(t) for t in fh.readline().split())
        except ValueError as exc:
            raise PixmapError("malformed-header", f"bad IMF dimensions: {exc}") from exc
        rows = []
        for _ in range(h):
            line = fh.readline()
            if not line:
                raise PixmapError("truncated-payload", "IMF file ended early")
            row = np.array([float(t) for t in line.split()], dtype=np.float64)
            if row.size != w * c:
                raise PixmapError("truncated-payload", f"IMF row has {row.size} samples")
            rows.append(row)
    return ImageF(np.stack(rows).reshape(h, w, c))
