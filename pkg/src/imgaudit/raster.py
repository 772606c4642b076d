"""Image values, file I/O, box geometry, preprocessing pipelines and degradation.

A Raster is an immutable (height, width, channels) float array with values
in [0, 1]. All operations are pure; randomness enters only through explicit
seeds (see rng).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DimensionError, FormatError

__all__ = [
    "Raster",
    "BBox",
    "CentralCrop",
    "Resize",
    "load_image",
    "save_image",
    "to_grayscale",
    "pad_bbox",
    "central_crop",
    "resize_bilinear",
    "apply_pipeline",
    "jpeg_like_compress",
    "gaussian_noise",
]


class Raster:
    """Immutable image: float64 pixels in [0,1], shape (height, width, channels)."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise DimensionError(f"raster must be HxW or HxWx{{1,3}}, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"raster must be at least 1x1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DimensionError("raster contains non-finite pixel values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise DimensionError("raster pixel values must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        self.pixels = arr

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def plane(self) -> np.ndarray:
        """The single channel as a 2-D array (raises for multichannel rasters)."""
        if self.channels != 1:
            raise DimensionError(f"expected 1 channel, got {self.channels}")
        return self.pixels[:, :, 0]

    def __eq__(self, other) -> bool:
        return isinstance(other, Raster) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"Raster({self.width}x{self.height}x{self.channels})"


@dataclass(frozen=True)
class BBox:
    """Half-open pixel box: [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (0 <= self.x0 < self.x1 and 0 <= self.y0 < self.y1):
            raise DimensionError(f"invalid bbox ({self.x0},{self.y0},{self.x1},{self.y1})")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0


@dataclass(frozen=True)
class CentralCrop:
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise DimensionError("crop size must be >= 1")

    def descriptor(self) -> dict:
        return {"variant": "central_crop", "size": self.size}


@dataclass(frozen=True)
class Resize:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DimensionError("resize dimensions must be >= 1")

    def descriptor(self) -> dict:
        return {"variant": "resize", "width": self.width, "height": self.height}


Pipeline = CentralCrop | Resize


def pipeline_from_descriptor(d: dict) -> Pipeline:
    if d.get("variant") == "central_crop":
        return CentralCrop(int(d["size"]))
    if d.get("variant") == "resize":
        return Resize(int(d["width"]), int(d["height"]))
    raise FormatError(f"unknown pipeline descriptor {d!r}")


# ---------------------------------------------------------------------------
# File I/O: 8-bit PNG (gray/RGB) plus binary PGM (P5) / PPM (P6)
# ---------------------------------------------------------------------------

def _read_pnm(path: str) -> Raster:
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] not in (b"P5", b"P6"):
        raise FormatError(f"{path}: not a binary PGM/PPM file")
    channels = 1 if data[:2] == b"P5" else 3
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # '#' comments allowed through to end of line
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PNM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in fields)
    except ValueError:
        raise FormatError(f"{path}: malformed PNM header") from None
    if maxval != 255:
        raise FormatError(f"{path}: unsupported PNM maxval {maxval} (only 255)")
    n = width * height * channels
    raw = data[pos : pos + n]
    if len(raw) != n:
        raise FormatError(f"{path}: truncated PNM pixel data")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)
    return Raster(arr.astype(np.float64) / 255.0)


def _write_pnm(path: str, img: Raster) -> None:
    magic = b"P5" if img.channels == 1 else b"P6"
    bytes_ = np.floor(img.pixels * 255.0 + 0.5).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (img.width, img.height))
        f.write(bytes_.tobytes())


def _read_png(path: str) -> Raster:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("L", "RGB"):
                raise FormatError(f"{path}: unsupported PNG mode {im.mode} (only 8-bit L/RGB)")
            arr = np.asarray(im, dtype=np.uint8)
    except (UnidentifiedImageError, SyntaxError, ValueError) as e:
        raise FormatError(f"{path}: cannot decode PNG ({e})") from e
    except OSError as e:
        # Pillow raises OSError for truncated streams; treat as format damage
        raise FormatError(f"{path}: corrupt or truncated PNG ({e})") from e
    return Raster(arr.astype(np.float64) / 255.0)


def _write_png(path: str, img: Raster) -> None:
    from PIL import Image

    bytes_ = np.floor(img.pixels * 255.0 + 0.5).astype(np.uint8)
    if img.channels == 1:
        im = Image.fromarray(bytes_[:, :, 0], mode="L")
    else:
        im = Image.fromarray(bytes_, mode="RGB")
    im.save(path, format="PNG")


def load_image(path: str) -> Raster:
    """Read a PNG / binary PGM / binary PPM file into a Raster."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such image file: {path}")
    ext = os.path.splitext(path)[1].lower()
    if ext in (".pgm", ".ppm", ".pnm"):
        return _read_pnm(path)
    if ext == ".png":
        return _read_png(path)
    raise FormatError(f"{path}: unsupported image format {ext!r}")


def save_image(path: str, img: Raster) -> None:
    """Write a Raster; format chosen by extension, 8-bit round(v*255) quantization."""
    ext = os.path.splitext(path)[1].lower()
    if ext in (".pgm", ".ppm", ".pnm"):
        _write_pnm(path, img)
    elif ext == ".png":
        _write_png(path, img)
    else:
        raise FormatError(f"{path}: unsupported image format {ext!r}")


# ---------------------------------------------------------------------------
# Geometry and pipelines
# ---------------------------------------------------------------------------

def to_grayscale(img: Raster) -> Raster:
    """BT.601 luma; single-channel input is returned as-is."""
    if img.channels == 1:
        return img
    y = (
        0.299 * img.pixels[:, :, 0]
        + 0.587 * img.pixels[:, :, 1]
        + 0.114 * img.pixels[:, :, 2]
    )
    return Raster(np.clip(y, 0.0, 1.0))


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def pad_bbox(b: BBox, p: float, img_w: int, img_h: int) -> BBox:
    """Expand each side outward by round_half_up(p * box side), clamped to the image."""
    if p < 0:
        raise DimensionError("padding factor must be >= 0")
    dx = _round_half_up(p * b.width)
    dy = _round_half_up(p * b.height)
    return BBox(
        max(0, b.x0 - dx),
        max(0, b.y0 - dy),
        min(img_w, b.x1 + dx),
        min(img_h, b.y1 + dy),
    )


def crop_bbox(img: Raster, b: BBox) -> Raster:
    if b.x1 > img.width or b.y1 > img.height:
        raise DimensionError(f"bbox {b} exceeds image {img.width}x{img.height}")
    return Raster(img.pixels[b.y0 : b.y1, b.x0 : b.x1, :])


def central_crop(img: Raster, size: int) -> Raster:
    """size x size patch centered with floor((dim-size)/2) top-left offsets."""
    if size > min(img.width, img.height):
        raise DimensionError(
            f"crop size {size} exceeds image {img.width}x{img.height}"
        )
    x0 = (img.width - size) // 2
    y0 = (img.height - size) // 2
    return Raster(img.pixels[y0 : y0 + size, x0 : x0 + size, :])


def _axis_weights(n_in: int, n_out: int):
    # half-pixel centers: src = (dst + 0.5) * (in/out) - 0.5, clamped to edges
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i0 = np.minimum(i0, n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    return i0, i1, frac


def resize_bilinear(img: Raster, out_w: int, out_h: int) -> Raster:
    """Bilinear resample with half-pixel convention and clamp-to-edge sampling."""
    if out_w < 1 or out_h < 1:
        raise DimensionError("output dimensions must be >= 1")
    if out_w == img.width and out_h == img.height:
        return img
    x0, x1, fx = _axis_weights(img.width, out_w)
    y0, y1, fy = _axis_weights(img.height, out_h)
    p = img.pixels
    fx = fx[np.newaxis, :, np.newaxis]
    fy = fy[:, np.newaxis, np.newaxis]
    top = (1.0 - fx) * p[y0][:, x0, :] + fx * p[y0][:, x1, :]
    bot = (1.0 - fx) * p[y1][:, x0, :] + fx * p[y1][:, x1, :]
    out = (1.0 - fy) * top + fy * bot
    return Raster(np.clip(out, 0.0, 1.0))


def apply_pipeline(img: Raster, b: BBox, p: float, pipe: Pipeline) -> Raster:
    """Pad the box, extract the sub-image, central-crop or resize it."""
    padded = pad_bbox(b, p, img.width, img.height)
    sub = crop_bbox(img, padded)
    if isinstance(pipe, CentralCrop):
        return central_crop(sub, pipe.size)
    return resize_bilinear(sub, pipe.width, pipe.height)


# ---------------------------------------------------------------------------
# Degradation operators
# ---------------------------------------------------------------------------

# JPEG Annex K luminance quantization table
_JPEG_LUMA = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)


def quantization_table(q: int) -> np.ndarray:
    """Annex-K luminance table scaled to quality q in [1, 100]."""
    if not 1 <= q <= 100:
        raise DimensionError(f"quality must be in [1,100], got {q}")
    s = 5000.0 / q if q < 50 else 200.0 - 2.0 * q
    return np.clip(np.floor((_JPEG_LUMA * s + 50.0) / 100.0), 1.0, 255.0)


def _dct_matrix(n: int = 8) -> np.ndarray:
    k = np.arange(n)[:, np.newaxis]
    x = np.arange(n)[np.newaxis, :]
    d = np.cos((2 * x + 1) * k * np.pi / (2 * n)) * np.sqrt(2.0 / n)
    d[0, :] = np.sqrt(1.0 / n)
    return d


_DCT8 = _dct_matrix(8)


def jpeg_like_compress(img: Raster, q: int) -> Raster:
    """Blockwise DCT quantization round trip at quality q (JPEG-style low-pass)."""
    if img.channels != 1:
        raise DimensionError("jpeg_like_compress expects a 1-channel raster")
    table = quantization_table(q)
    plane = img.plane() * 255.0 - 128.0
    h, w = plane.shape
    ph, pw = (-h) % 8, (-w) % 8
    padded = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    hb, wb = padded.shape[0] // 8, padded.shape[1] // 8
    blocks = padded.reshape(hb, 8, wb, 8).transpose(0, 2, 1, 3)
    coeffs = np.einsum("ij,bcjk,lk->bcil", _DCT8, blocks, _DCT8)
    coeffs = np.round(coeffs / table) * table
    rec = np.einsum("ji,bcjk,kl->bcil", _DCT8, coeffs, _DCT8)
    out = rec.transpose(0, 2, 1, 3).reshape(padded.shape)[:h, :w]
    return Raster(np.clip((out + 128.0) / 255.0, 0.0, 1.0))


def gaussian_noise(img: Raster, sigma: float, seed: int) -> Raster:
    """Seeded additive white Gaussian noise, clamped to [0,1]."""
    if sigma < 0:
        raise DimensionError("sigma must be >= 0")
    if sigma == 0:
        return img
    z = rng.normals(seed, img.pixels.size).reshape(img.pixels.shape)
    return Raster(np.clip(img.pixels + sigma * z, 0.0, 1.0))
