"""Pixel-value mapping tables: the core preprocessing step.

A mapping table replaces each 8-bit pixel value with a real number. Breaking
the monotone ordering of adjacent values turns smooth image regions into
high-frequency texture while keeping the lookup invertible enough to preserve
local pixel relationships (equal inputs stay equal outputs).

Two constructions are provided:

* the fixed table ``v - round2(v / 256) * 256``, where ``round2`` rounds to
  two decimal places with ties to even, yielding outputs in [-1.28, 1.28];
* per-channel random tables with entries drawn i.i.d. from U(-1, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PixmapError
from .image import Image8, ImageF
from .rng import SplitMix64


@dataclass(frozen=True)
class MappingTable:
    """256 finite output values, one per 8-bit input value."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=np.float64)
        if arr.shape != (256,):
            raise PixmapError("bad-table", f"mapping table needs 256 entries, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise PixmapError("bad-table", "mapping table entries must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)


def build_fixed_table() -> MappingTable:
    """Build the deterministic table ``v - round2(v / 256) * 256``.

    For lattice inputs v in 0..255 the rounded quantity is k/100 with
    k = round_half_even(25 v / 64); 25v/64 is a dyadic rational, exactly
    representable, so Python's banker's rounding resolves the ties at
    v in {32, 96, 160, 224} exactly. Each entry is then the correctly
    rounded float64 of the rational (25 v - 64 k) / 25, so every call
    returns a bit-identical table with all entries in [-1.28, 1.28].
    """
    entries = np.empty(256, dtype=np.float64)
    for v in range(256):
        k = round(25 * v / 64)
        entries[v] = (25 * v - 64 * k) / 25
    return MappingTable(entries)


def build_random_tables(seed: int) -> tuple[MappingTable, MappingTable, MappingTable]:
    """Draw three per-channel tables with entries i.i.d. uniform on [-1, 1)."""
    rng = SplitMix64(seed)
    draws = rng.uniforms(3 * 256, lo=-1.0, hi=1.0)
    return tuple(MappingTable(draws[c * 256 : (c + 1) * 256]) for c in range(3))


def apply_mapping(img: Image8, tables) -> ImageF:
    """Look up every sample: out[x, y, c] = tables[c][img[x, y, c]].

    Pass a single table to share it across all three channels (fixed mode)
    or exactly three tables for per-channel mapping (random mode).
    """
    if isinstance(tables, MappingTable):
        tables = (tables,) * 3
    else:
        tables = tuple(tables)
        if len(tables) == 1:
            tables = tables * 3
        elif len(tables) != 3:
            raise PixmapError(
                "bad-table-count", f"need 1 or 3 mapping tables, got {len(tables)}"
            )
    out = np.empty(img.data.shape, dtype=np.float64)
    for c, table in enumerate(tables):
        out[:, :, c] = table.entries[img.data[:, :, c]]
    return ImageF(out)


def adjacent_gap_profile(table: MappingTable) -> np.ndarray:
    """Absolute output gaps between consecutive input values, |T[v+1] - T[v]|."""
    return np.abs(np.diff(table.entries))
