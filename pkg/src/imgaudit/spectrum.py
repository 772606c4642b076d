"""2-D DFT, centered log power spectrum and the radial (azimuthal) density profile."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NormalizationError
from .raster import Raster, to_grayscale

LOG_EPS = 1e-8


@dataclass(frozen=True)
class ComplexGrid:
    """Frequency-domain grid; values[v, u] is the coefficient at (u, v)."""

    values: np.ndarray

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SpectralProfile:
    """Mean log power per integer radius from the DC bin."""

    bins: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "bins", np.asarray(self.bins, dtype=np.float64))
        if not np.all(np.isfinite(self.bins)):
            raise DimensionError("profile bins must be finite")

    @property
    def n_bins(self) -> int:
        return len(self.bins)


def dft2(img: Raster) -> ComplexGrid:
    """Exact 2-D DFT, F(u,v) = sum_xy f(x,y) exp(-2pi i (ux/W + vy/H))."""
    plane = img.plane()
    return ComplexGrid(np.fft.fft2(plane))


def naive_dft2(plane: np.ndarray) -> np.ndarray:
    """Quadratic double-sum DFT; the correctness oracle for dft2."""
    h, w = plane.shape
    ex = np.exp(-2j * np.pi * np.outer(np.arange(w), np.arange(w)) / w)
    ey = np.exp(-2j * np.pi * np.outer(np.arange(h), np.arange(h)) / h)
    return ey @ plane.astype(np.complex128) @ ex.T


def log_power_centered(g: ComplexGrid) -> np.ndarray:
    """ln(|F| + eps) with the DC bin shifted to (floor(W/2), floor(H/2))."""
    return np.fft.fftshift(np.log(np.abs(g.values) + LOG_EPS))


def azimuthal_average(power: np.ndarray) -> SpectralProfile:
    """Mean over annuli of constant integer radius around the centered DC bin."""
    power = np.asarray(power, dtype=np.float64)
    if power.ndim != 2 or power.size < 1:
        raise DimensionError("azimuthal_average expects a non-empty 2-D grid")
    h, w = power.shape
    cy, cx = h // 2, w // 2
    y, x = np.indices(power.shape)
    r = np.floor(np.hypot(x - cx, y - cy) + 0.5).astype(np.int64)
    n_bins = min(h, w) // 2 + 1
    keep = r < n_bins
    sums = np.bincount(r[keep], weights=power[keep], minlength=n_bins)
    counts = np.bincount(r[keep], minlength=n_bins)
    if np.any(counts == 0):
        raise DimensionError("empty radial bin (grid too small)")
    return SpectralProfile(sums / counts)


def profile_of(img: Raster, normalize: bool = True) -> SpectralProfile:
    """Radial log-power profile of an image (grayscaled internally)."""
    prof = azimuthal_average(log_power_centered(dft2(to_grayscale(img))))
    if not normalize:
        return prof
    dc = prof.bins[0]
    if dc == 0.0:
        raise NormalizationError("cannot normalize profile: DC log power is zero")
    return SpectralProfile(prof.bins / dc, normalized=True)


def profile_to_csv(profile: SpectralProfile) -> str:
    lines = ["bin,value"]
    lines += [f"{i},{v:.9g}" for i, v in enumerate(profile.bins)]
    return "\n".join(lines) + "\n"
