"""Observation-map construction from per-light intensities.

A map is a d x d x 4 grid: channels 0..2 hold brightness-compensated
rgb (intensity / brightness, per channel), channel 3 holds the
normalized gray value (sum of compensated channels divided by the
maximum over the map).  Cell (u, v) indexes the light direction by
u = floor(d * (l_x + 1) / 2), v likewise from l_y, clamped to d - 1.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInput
from .geom import rotate_about_z

GRAY = 3  # channel index of the normalized-gray plane


@dataclass(frozen=True)
class LightSample:
    direction: np.ndarray    # (3,)
    phi: np.ndarray          # (3,) per-channel brightness, > 0
    intensity: np.ndarray    # (3,)


@dataclass(frozen=True)
class ObservationMap:
    d: int
    grid: np.ndarray         # (d, d, 4) float32
    occupancy: np.ndarray    # (d, d) bool

    @property
    def rgb(self):
        return self.grid[:, :, :GRAY]

    @property
    def gray(self):
        return self.grid[:, :, GRAY]


def cell_of(l, d):
    """Grid cell of a light direction; raw indices equal to d (at
    l_x or l_y = 1) clamp to d - 1."""
    l = np.asarray(l, dtype=np.float64)
    u = np.minimum(np.floor(d * (l[..., 0] + 1.0) / 2.0).astype(np.int64), d - 1)
    v = np.minimum(np.floor(d * (l[..., 1] + 1.0) / 2.0).astype(np.int64), d - 1)
    return u, v


def build_map_arrays(directions, phis, intensities, d):
    """Vectorized map construction from (J, 3) arrays.

    Cell collisions resolve to the last light in input order; the gray
    channel is normalized by the maximum over the surviving cells (all
    zeros when that maximum is zero).
    """
    directions = np.asarray(directions, dtype=np.float64)
    phis = np.asarray(phis, dtype=np.float64)
    intensities = np.asarray(intensities, dtype=np.float64)
    j = directions.shape[0]
    if j == 0:
        raise EmptyInput("no light samples")

    comp = intensities / phis
    gray = comp.sum(axis=1)
    u, v = cell_of(directions, d)
    flat = u * d + v

    # last-writer-wins per cell: first occurrence in the reversed order
    _, rev_idx = np.unique(flat[::-1], return_index=True)
    sel = j - 1 - rev_idx

    grid = np.zeros((d, d, 4), dtype=np.float64)
    occupancy = np.zeros((d, d), dtype=bool)
    cells = flat[sel]
    grid.reshape(-1, 4)[cells, :3] = comp[sel]
    gmax = gray[sel].max()
    if gmax > 0.0:
        grid.reshape(-1, 4)[cells, GRAY] = gray[sel] / gmax
    occupancy.reshape(-1)[cells] = True
    return ObservationMap(d=d, grid=grid.astype(np.float32), occupancy=occupancy)


def build_map(samples: Sequence[LightSample], d):
    """Map construction from a sequence of light samples."""
    if len(samples) == 0:
        raise EmptyInput("no light samples")
    directions = np.stack([np.asarray(s.direction, dtype=np.float64) for s in samples])
    phis = np.stack([np.asarray(s.phi, dtype=np.float64) for s in samples])
    intensities = np.stack([np.asarray(s.intensity, dtype=np.float64) for s in samples])
    return build_map_arrays(directions, phis, intensities, d)


def rotated_variant(samples: Sequence[LightSample], theta, d):
    """Map built after rotating every light direction about z by theta.

    The rotation happens in light space (exact), never by resampling
    the grid.
    """
    if len(samples) == 0:
        raise EmptyInput("no light samples")
    directions = np.stack([np.asarray(s.direction, dtype=np.float64) for s in samples])
    phis = np.stack([np.asarray(s.phi, dtype=np.float64) for s in samples])
    intensities = np.stack([np.asarray(s.intensity, dtype=np.float64) for s in samples])
    return build_map_arrays(rotate_about_z(directions, theta), phis, intensities, d)
