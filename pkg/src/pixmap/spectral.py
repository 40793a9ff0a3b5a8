"""Frequency-domain diagnostics: 2-D power spectra and radial profiles.

The quantities here back both analysis output and the test suite: mean power
spectra over image sets, and the 1-D azimuthal profile that aggregates
spectral power over rings of constant frequency radius. The ratio of high- to
low-band radial power is the scalar used to show that mapping-based
preprocessing lifts high-frequency energy relative to low.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import PixmapError
from .image import ImageF


@dataclass(frozen=True)
class Spectrum2D:
    """Non-negative power per frequency bin, DC at (H//2, W//2)."""

    power: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.power, dtype=np.float64)
        if arr.ndim != 2:
            raise PixmapError("bad-shape", f"spectrum must be 2-D, got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise PixmapError("bad-spectrum", "power must be finite and non-negative")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "power", arr)

    @property
    def height(self) -> int:
        return self.power.shape[0]

    @property
    def width(self) -> int:
        return self.power.shape[1]


@dataclass(frozen=True)
class RadialProfile:
    """Mean power and bin occupancy per integer frequency radius.

    ``values[r]`` is the mean power over bins whose rounded distance to the
    DC center is r, for r = 0 .. floor(min(H, W) / 2). Bins beyond the top
    radius (spectrum corners) are folded into the top ring so that
    sum(values * counts) always equals the total spectral power.
    """

    values: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        c = np.asarray(self.counts, dtype=np.int64)
        if v.ndim != 1 or v.shape != c.shape:
            raise PixmapError("bad-profile", "values and counts must be 1-D, same length")
        if np.any(c < 1):
            raise PixmapError("bad-profile", "every radius must have at least one bin")
        v = v.copy()
        c = c.copy()
        v.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "counts", c)

    @property
    def max_radius(self) -> int:
        return len(self.values) - 1


def dft2(channel: np.ndarray) -> np.ndarray:
    """Forward 2-D DFT of one channel (standard e^{-2pi i} convention)."""
    arr = np.asarray(channel)
    if arr.ndim != 2:
        raise PixmapError("bad-shape", f"dft2 needs a 2-D array, got {arr.shape}")
    return np.fft.fft2(arr)


def idft2(freq: np.ndarray) -> np.ndarray:
    """Inverse 2-D DFT; idft2(dft2(x)) recovers x to rounding error."""
    arr = np.asarray(freq)
    if arr.ndim != 2:
        raise PixmapError("bad-shape", f"idft2 needs a 2-D array, got {arr.shape}")
    return np.fft.ifft2(arr)


def power_spectrum(channel: np.ndarray) -> Spectrum2D:
    """|DFT|^2 with quadrants swapped so DC sits at (H//2, W//2)."""
    freq = dft2(channel)
    return Spectrum2D(np.fft.fftshift(np.abs(freq) ** 2))


def mean_spectrum(images: Sequence[ImageF] | Iterable[ImageF]) -> Spectrum2D:
    """Element-wise mean of per-image, channel-averaged power spectra."""
    acc = None
    count = 0
    dims = None
    for img in images:
        if dims is None:
            dims = (img.height, img.width)
        elif (img.height, img.width) != dims:
            raise PixmapError(
                "dim-mismatch",
                f"image {img.height}x{img.width} does not match {dims[0]}x{dims[1]}",
            )
        chan_acc = np.zeros(dims, dtype=np.float64)
        for c in range(img.channels):
            chan_acc += power_spectrum(img.data[:, :, c]).power
        chan_acc /= img.channels
        acc = chan_acc if acc is None else acc + chan_acc
        count += 1
    if acc is None:
        raise PixmapError("empty-input", "mean_spectrum needs at least one image")
    return Spectrum2D(acc / count)


def azimuthal_profile(spec: Spectrum2D) -> RadialProfile:
    """Collapse a centered spectrum into mean power per integer radius.

    Radii are rounded Euclidean distances to the DC bin; squared distances
    between lattice points are integers, so no distance ever lands exactly
    on a .5 tie. Corner bins past floor(min(H, W) / 2) fold into the top
    ring (see :class:`RadialProfile`).
    """
    h, w = spec.height, spec.width
    cy, cx = h // 2, w // 2
    yy, xx = np.ogrid[:h, :w]
    dist = np.hypot(yy - cy, xx - cx)
    max_r = min(h, w) // 2
    radii = np.minimum(np.rint(dist).astype(np.int64), max_r)
    counts = np.bincount(radii.ravel(), minlength=max_r + 1)
    sums = np.bincount(radii.ravel(), weights=spec.power.ravel(), minlength=max_r + 1)
    return RadialProfile(sums / counts, counts)


def band_ratio(profile: RadialProfile) -> float:
    """Mean power over the top third of radii divided by the bottom third.

    DC (radius 0) is excluded from the low band. Both bands span
    floor(R / 3) radii, where R is the top radius. A flat spectrum gives
    1.0; smooth imagery gives values well below 1.
    """
    r_max = profile.max_radius
    if r_max + 1 < 6:
        raise PixmapError("profile-too-short", f"band_ratio needs >= 6 radii, got {r_max + 1}")
    nband = r_max // 3
    low = profile.values[1 : 1 + nband]
    high = profile.values[r_max - nband + 1 : r_max + 1]
    low_mean = float(np.mean(low))
    if low_mean == 0.0:
        raise PixmapError("degenerate-spectrum", "low band carries no power")
    return float(np.mean(high)) / low_mean


def profile_csv(profile: RadialProfile) -> str:
    """Render a radial profile as CSV: radius, mean_power, count."""
    lines = ["radius,mean_power,count"]
    for r, (v, c) in enumerate(zip(profile.values.tolist(), profile.counts.tolist())):
        lines.append(f"{r},{v!r},{c}")
    return "\n".join(lines) + "\n"


def heatmap_u8(spec: Spectrum2D) -> np.ndarray:
    """Log-scaled, max-normalized uint8 rendering of a spectrum."""
    g = np.log1p(spec.power)
    peak = g.max()
    if peak > 0:
        g = g / peak
    return np.rint(g * 255.0).astype(np.uint8)
