"""Flat binary serialization for grid fields.

Layout (all little-endian 64-bit):
  int64   d
  int64   time_nodes
  int64   space_nodes[0..d-1]
  float64 horizon
  float64 lo_0, hi_0, ..., lo_{d-1}, hi_{d-1}
  int64   components
  float64 values, row-major over (time, *space, components)
"""

from __future__ import annotations

import numpy as np

from .fields import GridField, SpaceTimeBox

_I8 = np.dtype("<i8")
_F8 = np.dtype("<f8")


def write_grid_field(field: GridField, path) -> None:
    box = field.box
    with open(path, "wb") as fh:
        head = np.array([box.dimension, box.time_nodes, *box.space_nodes], dtype=_I8)
        head.tofile(fh)
        geom = np.array(
            [box.horizon] + [v for lo_hi in box.bounds for v in lo_hi], dtype=_F8
        )
        geom.tofile(fh)
        np.array([field.components], dtype=_I8).tofile(fh)
        np.ascontiguousarray(field.values, dtype=_F8).tofile(fh)


def read_grid_field(path) -> GridField:
    with open(path, "rb") as fh:
        d = int(np.fromfile(fh, dtype=_I8, count=1)[0])
        if d not in (1, 2, 3):
            raise ValueError(f"corrupt grid file: dimension {d}")
        nt = int(np.fromfile(fh, dtype=_I8, count=1)[0])
        ns = tuple(int(v) for v in np.fromfile(fh, dtype=_I8, count=d))
        geom = np.fromfile(fh, dtype=_F8, count=1 + 2 * d)
        horizon = float(geom[0])
        bounds = tuple((float(geom[1 + 2 * i]), float(geom[2 + 2 * i])) for i in range(d))
        ncomp = int(np.fromfile(fh, dtype=_I8, count=1)[0])
        count = nt * int(np.prod(ns)) * ncomp
        values = np.fromfile(fh, dtype=_F8, count=count)
        if values.size != count:
            raise ValueError("corrupt grid file: truncated value payload")
    box = SpaceTimeBox(d, horizon, bounds, ns, nt)
    return GridField(box, values.reshape(nt, *ns, ncomp), ncomp)
