"""Manifest-driven dataset ingestion and the seeded synthetic corpus generator.

The generator stands in for licensed deepfake datasets: "real" images are
1/f textures from spectral synthesis; "fake" variants add the classic
generator artifacts (nearest-neighbor upsampling replicas, Gaussian smoothing).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import DimensionError, EmptyDatasetError, ParseError
from .raster import BBox, Raster, apply_pipeline, load_image, save_image, to_grayscale
from .spectrum import profile_of

MANIFEST_COLUMNS = ["path", "label", "dataset", "x0", "y0", "x1", "y1"]


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int
    dataset: str
    bbox: BBox


@dataclass(frozen=True)
class SynthSpec:
    """One synthetic dataset: kind is 'real1f', 'fake_upsample' or 'fake_smoothed'."""

    kind: str
    size: int = 64
    count: int = 100
    seed: int = 0
    spectral_slope: float = 1.0
    factor: int = 2            # fake_upsample only
    kernel_sigma: float = 1.5  # fake_smoothed only

    def __post_init__(self):
        if self.kind not in ("real1f", "fake_upsample", "fake_smoothed"):
            raise DimensionError(f"unknown corpus kind {self.kind!r}")
        if self.count < 1 or self.size < 16:
            raise DimensionError("SynthSpec requires count >= 1 and size >= 16")
        if self.kind == "fake_upsample" and self.factor < 2:
            raise DimensionError("upsample factor must be >= 2")
        if self.kind == "fake_smoothed" and self.kernel_sigma <= 0:
            raise DimensionError("kernel sigma must be > 0")


# ---------------------------------------------------------------------------
# Manifest I/O
# ---------------------------------------------------------------------------

def read_manifest(path: str) -> list[ManifestEntry]:
    """Parse a `path,label,dataset,x0,y0,x1,y1` CSV; paths resolve relative to it."""
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != MANIFEST_COLUMNS:
            raise ParseError(
                f"{path}:1: expected header {','.join(MANIFEST_COLUMNS)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 7:
                raise ParseError(f"{path}:{lineno}: expected 7 columns, got {len(row)}")
            rel, label_s, dataset, *box_s = row
            try:
                label = int(label_s)
                coords = [int(v) for v in box_s]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer label or bbox") from None
            if label not in (0, 1):
                raise ParseError(f"{path}:{lineno}: label must be 0 or 1, got {label}")
            try:
                bbox = BBox(coords[0], coords[1], coords[2], coords[3])
            except DimensionError as e:
                raise ParseError(f"{path}:{lineno}: {e}") from None
            entries.append(ManifestEntry(os.path.join(base, rel), label, dataset, bbox))
    return entries


def write_manifest(path: str, entries: list[ManifestEntry]) -> None:
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_COLUMNS)
        for e in entries:
            writer.writerow([
                os.path.relpath(e.path, base), e.label, e.dataset,
                e.bbox.x0, e.bbox.y0, e.bbox.x1, e.bbox.y1,
            ])


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------

def _synth_texture(size: int, slope: float, seed: int) -> np.ndarray:
    """Spectral synthesis: white noise shaped so power ~ 1/f^(2*slope), min-max
    normalized to [0,1]."""
    noise = rng.normals(seed, size * size).reshape(size, size)
    spec = np.fft.fft2(noise)
    freq = np.fft.fftfreq(size) * size  # integer frequency coordinates
    fr = np.hypot(freq[:, np.newaxis], freq[np.newaxis, :])
    amp = np.zeros_like(fr)
    nz = fr > 0
    amp[nz] = fr[nz] ** (-slope)
    img = np.fft.ifft2(spec * amp).real
    lo, hi = img.min(), img.max()
    if hi <= lo:
        return np.full((size, size), 0.5)
    return (img - lo) / (hi - lo)


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _smooth(img: np.ndarray, sigma: float) -> np.ndarray:
    k = _gaussian_kernel(sigma)
    radius = len(k) // 2
    out = img
    for axis in (0, 1):
        padded = np.pad(out, [(radius, radius) if a == axis else (0, 0) for a in (0, 1)],
                        mode="edge")
        acc = np.zeros_like(out)
        for i, w in enumerate(k):
            sl = [slice(None)] * 2
            sl[axis] = slice(i, i + out.shape[axis])
            acc += w * padded[tuple(sl)]
        out = acc
    return out


def synth_image(spec: SynthSpec, index: int) -> Raster:
    """Deterministic image `index` of the dataset described by `spec`."""
    seed = rng.derive_seed(spec.seed, index)
    if spec.kind == "real1f":
        return Raster(_synth_texture(spec.size, spec.spectral_slope, seed))
    if spec.kind == "fake_upsample":
        f = spec.factor
        small = _synth_texture(-(-spec.size // f), spec.spectral_slope, seed)
        up = np.repeat(np.repeat(small, f, axis=0), f, axis=1)
        return Raster(up[: spec.size, : spec.size])
    # fake_smoothed
    base = _synth_texture(spec.size, spec.spectral_slope, seed)
    return Raster(np.clip(_smooth(base, spec.kernel_sigma), 0.0, 1.0))


def generate_corpus(spec: SynthSpec, out_dir: str, name: str,
                    label: int | None = None) -> str:
    """Write `count` PGM images plus a manifest; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    if label is None:
        label = 0 if spec.kind == "real1f" else 1
    entries = []
    for i in range(spec.count):
        img = synth_image(spec, i)
        path = os.path.join(out_dir, f"{name}_{i:05d}.pgm")
        save_image(path, img)
        entries.append(ManifestEntry(path, label, name,
                                     BBox(0, 0, spec.size, spec.size)))
    manifest = os.path.join(out_dir, f"{name}_manifest.csv")
    write_manifest(manifest, entries)
    return manifest


def generate_multi_corpus(specs: dict[str, SynthSpec], out_dir: str) -> str:
    """Generate several datasets into one directory with a combined manifest."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for name, spec in specs.items():
        generate_corpus(spec, out_dir, name)
        entries.extend(read_manifest(os.path.join(out_dir, f"{name}_manifest.csv")))
    manifest = os.path.join(out_dir, "manifest.csv")
    write_manifest(manifest, entries)
    return manifest


# ---------------------------------------------------------------------------
# Feature extraction for the learn/attack/embed stages
# ---------------------------------------------------------------------------

def load_samples(entries: list[ManifestEntry], padding: float, pipe,
                 features: str = "profile", normalize: bool = True):
    """Features (n, d), labels (n,), dataset tags per manifest entry.

    features='profile' uses the radial log-power profile; 'pixels' uses the
    flattened grayscale pixels of the pipeline output.
    """
    if not entries:
        raise EmptyDatasetError("manifest contains no entries")
    if features not in ("profile", "pixels"):
        raise DimensionError(f"unknown feature kind {features!r}")
    rows, labels, tags = [], [], []
    for e in entries:
        img = load_image(e.path)
        patch = apply_pipeline(img, e.bbox, padding, pipe)
        if features == "profile":
            rows.append(profile_of(patch, normalize=normalize).bins)
        else:
            rows.append(to_grayscale(patch).plane().reshape(-1))
        labels.append(e.label)
        tags.append(e.dataset)
    X = np.stack(rows)
    return X, np.array(labels, dtype=np.int64), tags
