"""Space-time vector fields, mixed-norm and Hoelder-norm machinery.

Everything here is immutable after construction; evaluators are vectorized
over batches of points so that many workers can read concurrently.
Fields conceptually live on all of R^d but are computed on a finite box;
callers must declare an effective support radius so that truncation error
is controlled (fields without a decay declaration are rejected by the norm
routines rather than silently truncated).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SingularityError


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, order="C")  # own copy: callers keep theirs
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SpaceTimeBox:
    """A box [0, T] x prod_i [lo_i, hi_i] with tensor-grid resolutions.

    ``space_nodes[i]`` counts grid nodes along axis i (spacing
    (hi-lo)/(n-1)); ``time_nodes`` counts nodes on [0, T] including both
    endpoints.
    """

    dimension: int
    horizon: float
    bounds: tuple[tuple[float, float], ...]
    space_nodes: tuple[int, ...]
    time_nodes: int

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(bounds) != self.dimension or len(self.space_nodes) != self.dimension:
            raise ValueError("bounds/resolutions must have one entry per axis")
        for lo, hi in bounds:
            if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
                raise ValueError(f"empty or non-finite axis bounds ({lo}, {hi})")
        if self.time_nodes < 2 or any(n < 2 for n in self.space_nodes):
            raise ValueError("all grid resolutions must be >= 2")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "space_nodes", tuple(int(n) for n in self.space_nodes))
        object.__setattr__(self, "time_nodes", int(self.time_nodes))

    @property
    def dt(self) -> float:
        return self.horizon / (self.time_nodes - 1)

    @property
    def dx(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.space_nodes))

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.time_nodes)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.bounds, self.space_nodes)]

    def grid_points(self) -> np.ndarray:
        """All spatial nodes as a (prod(space_nodes), d) array, C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def with_horizon(self, horizon: float, time_nodes: int | None = None) -> "SpaceTimeBox":
        return SpaceTimeBox(
            self.dimension,
            float(horizon),
            self.bounds,
            self.space_nodes,
            self.time_nodes if time_nodes is None else time_nodes,
        )

    def volume(self) -> float:
        v = 1.0
        for lo, hi in self.bounds:
            v *= hi - lo
        return v


def prodi_serrin_check(p: float, q: float, d: int) -> tuple[bool, float]:
    """Subcriticality check d/p + 2/q < 1 for exponents in (1, inf).

    Returns (passed, margin) with margin = 1 - d/p - 2/q.
    """
    for name, v in (("p", p), ("q", q)):
        if not (isinstance(v, (int, float)) and math.isfinite(v) and 1.0 < v):
            raise ValueError(f"exponent {name} must be finite and in (1, inf), got {v!r}")
    if not (isinstance(d, int) and d >= 1):
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    margin = 1.0 - d / p - 2.0 / q
    return margin > 0.0, margin


@dataclass(frozen=True)
class DriftField:
    """A space-time vector field with an analytic core and an explicit
    singularity policy.

    ``fn(t, x)`` maps a scalar time and an (n, d) point array to (n, d)
    values.  The policy fields:

    * ``cap``: magnitudes above this are rescaled onto the cap (never
      silently applied; if unset, non-finite evaluations raise).
    * ``mollify``: the smoothing length used when the core was built with
      |x| -> sqrt(|x|^2 + delta^2); recorded for report metadata.
    * ``support_radius``: evaluations outside this ball are zero; doubles
      as the decay declaration required by the norm routines.
    """

    fn: Callable[[float, np.ndarray], np.ndarray]
    dimension: int
    p: float
    q: float
    cap: float | None = None
    mollify: float | None = None
    support_radius: float | None = None
    holder_alpha: float | None = None
    time_independent: bool = True
    name: str = "custom"

    def prodi_serrin(self) -> tuple[bool, float]:
        return prodi_serrin_check(self.p, self.q, self.dimension)

    @property
    def holder_mode(self) -> bool:
        return self.holder_alpha is not None

    def require_admissible(self) -> None:
        """Gate used by the ladder and the simulator: either the declared
        exponents are subcritical or the drift is flagged Hoelder-mode."""
        ok, margin = self.prodi_serrin()
        if not ok and not self.holder_mode:
            raise ValueError(
                f"drift {self.name!r}: declared exponents (p={self.p}, q={self.q}) fail "
                f"the subcriticality check (margin {margin:.4f}) and no Hoelder mode is declared"
            )

    def evaluate(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        v = np.asarray(self.fn(float(t), x), dtype=np.float64)
        if v.shape != x.shape:
            raise ValueError(f"drift evaluator returned shape {v.shape}, expected {x.shape}")
        if self.support_radius is not None:
            outside = np.einsum("ij,ij->i", x, x) > self.support_radius**2
            if outside.any():
                v = np.where(outside[:, None], 0.0, v)
        bad = ~np.isfinite(v).all(axis=1)
        if bad.any():
            if self.cap is None:
                idx = int(np.argmax(bad))
                raise SingularityError(
                    f"drift {self.name!r} evaluated to a non-finite value at t={t}, "
                    f"x={x[idx]} and no cap/mollification policy is set",
                    path=idx,
                )
            v = np.where(bad[:, None], self.cap, v)
        if self.cap is not None:
            mag = np.sqrt(np.einsum("ij,ij->i", v, v))
            over = mag > self.cap
            if over.any():
                scale = np.where(over, self.cap / np.where(mag > 0, mag, 1.0), 1.0)
                v = v * scale[:, None]
        return v

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.evaluate(t, x)


class GridField:
    """Scalar/vector/matrix field sampled on the tensor grid of a box.

    Values have shape (time_nodes, *space_nodes, components); the stored
    array is read-only.  Interpolation is multilinear in space and
    piecewise-constant (left endpoint) in time, matching the left-point
    convention of the path simulator.
    """

    def __init__(self, box: SpaceTimeBox, values: np.ndarray, components: int):
        values = np.asarray(values, dtype=np.float64)
        expected = (box.time_nodes, *box.space_nodes, components)
        if values.shape != expected:
            raise ValueError(f"grid values have shape {values.shape}, expected {expected}")
        self.box = box
        self.components = int(components)
        self.values = _readonly(values)

    def time_index(self, t) -> np.ndarray:
        """Left-endpoint index of t in the time grid (clipped to range)."""
        idx = np.floor(np.asarray(t, dtype=np.float64) / self.box.dt).astype(np.int64)
        return np.clip(idx, 0, self.box.time_nodes - 1)

    def slice_values(self, t: float) -> np.ndarray:
        """Grid values at the left time node of t, shape (*space, components)."""
        return self.values[int(self.time_index(t))]

    def evaluate(self, t: float, x: np.ndarray, *, outside: str = "zero") -> np.ndarray:
        """Interpolate at points x, shape (n, d) -> (n, components).

        ``outside`` selects the extension convention: "zero" (compactly
        supported fields such as drifts) or "clamp" (continuous extension
        used for smooth transform fields).
        """
        return interpolate_spatial(self.slice_values(t), self.box, x, outside=outside)

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean magnitude over components, shape (nt, *space)."""
        return np.sqrt(np.einsum("...c,...c->...", self.values, self.values))

    def scaled(self, c: float) -> "GridField":
        return GridField(self.box, self.values * c, self.components)

    def __add__(self, other: "GridField") -> "GridField":
        if other.box is not self.box and other.box != self.box:
            raise ValueError("cannot add grid fields on different boxes")
        return GridField(self.box, self.values + other.values, self.components)

    @staticmethod
    def sample(box: SpaceTimeBox, evaluator, components: int, *, time_independent: bool = False) -> "GridField":
        """Sample an analytic evaluator on the full tensor grid."""
        pts = box.grid_points()
        nt = box.time_nodes
        shape = (nt, *box.space_nodes, components)
        out = np.empty(shape)
        times = box.times()
        first = None
        for j, t in enumerate(times):
            if time_independent and first is not None:
                out[j] = first
                continue
            vals = np.asarray(evaluator(float(t), pts), dtype=np.float64)
            vals = vals.reshape(*box.space_nodes, components)
            out[j] = vals
            if time_independent:
                first = vals
        return GridField(box, out, components)


def interpolate_spatial(slab: np.ndarray, box: SpaceTimeBox, x: np.ndarray,
                        *, outside: str = "zero") -> np.ndarray:
    """Multilinear interpolation of one spatial slab (*space, c) at points
    (n, d); see GridField.evaluate for the extension conventions."""
    if outside not in ("zero", "clamp"):
        raise ValueError(f"unknown outside policy {outside!r}")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d = box.dimension
    c = slab.shape[-1]
    lo = np.array([b[0] for b in box.bounds])
    hi = np.array([b[1] for b in box.bounds])
    dx = np.array(box.dx)
    inside = ((x >= lo) & (x <= hi)).all(axis=1)
    xq = np.clip(x, lo, hi)
    pos = (xq - lo) / dx
    # snap to grid nodes so node evaluation reproduces stored values exactly
    rounded = np.round(pos)
    pos = np.where(np.abs(pos - rounded) <= 1e-9, rounded, pos)
    i0 = np.minimum(pos.astype(np.int64), np.array(box.space_nodes) - 2)
    frac = pos - i0
    out = np.zeros((x.shape[0], c))
    for corner in range(1 << d):
        w = np.ones(x.shape[0])
        idx = []
        for axis in range(d):
            bit = (corner >> axis) & 1
            w = w * (frac[:, axis] if bit else 1.0 - frac[:, axis])
            idx.append(i0[:, axis] + bit)
        out += w[:, None] * slab[tuple(idx)]
    if outside == "zero":
        out[~inside] = 0.0
    return out


@dataclass(frozen=True)
class MixedNorm:
    """An L^q-in-time of L^p-in-space norm value with its quadrature stamp."""

    value: float
    p: float
    q: float
    time_nodes: int
    space_nodes: tuple[int, ...]

    def __float__(self) -> float:
        return self.value


def _space_weights(box: SpaceTimeBox) -> np.ndarray:
    """Tensor trapezoid weights over the spatial grid, shape space_nodes."""
    w = None
    for (lo, hi), n in zip(box.bounds, box.space_nodes):
        h = (hi - lo) / (n - 1)
        w1 = np.full(n, h)
        w1[0] = w1[-1] = h / 2.0
        w = w1 if w is None else np.multiply.outer(w, w1)
    return w


def _as_magnitude_slices(f, box: SpaceTimeBox, times: np.ndarray):
    """Yield |f(t, .)| on the spatial grid for each requested time."""
    if isinstance(f, GridField):
        mags = f.magnitude()
        for t in times:
            yield mags[int(f.time_index(t))]
    else:
        pts = box.grid_points()
        cached = None
        static = getattr(f, "time_independent", False)
        for t in times:
            if cached is None or not static:
                v = np.asarray(f(float(t), pts), dtype=np.float64)
                if v.ndim == 1:
                    v = v[:, None]
                cached = np.sqrt(np.einsum("ij,ij->i", v, v)).reshape(box.space_nodes)
            yield cached


def lqp_norm(f, p: float, q: float, box: SpaceTimeBox) -> MixedNorm:
    """Mixed-norm quadrature (int_0^T (int |f|^p dy)^(q/p) dr)^(1/q).

    Trapezoid in space; midpoint rule in time for analytic evaluators.  A
    GridField integrates its own left-constant-in-time interpolant exactly,
    which amounts to a left-endpoint rule on the stored slices.  The field
    is assumed negligible outside the box: analytic drifts must declare a
    support radius (or be GridFields, which are compactly supported by
    construction).
    """
    if not (math.isfinite(p) and math.isfinite(q) and p > 0 and q > 0):
        raise ValueError(f"exponents must be finite and positive, got p={p}, q={q}")
    if isinstance(f, DriftField) and f.support_radius is None:
        raise ValueError(
            f"drift {f.name!r} declares no support radius; refusing to truncate "
            "an undeclared-decay field to the quadrature box"
        )
    nt = box.time_nodes
    dt = box.dt
    if isinstance(f, GridField):
        times = box.times()[:-1]  # left rule: last node has zero weight
        tw = np.full(nt - 1, dt)
    else:
        times = box.times()[:-1] + dt / 2.0
        tw = np.full(nt - 1, dt)
    sw = _space_weights(box)
    inner_acc = 0.0
    for wt, mag in zip(tw, _as_magnitude_slices(f, box, times)):
        if not np.isfinite(mag).all():
            raise SingularityError(
                "non-finite values in mixed-norm quadrature (uncapped singularity?)"
            )
        inner = float(np.sum(sw * np.power(mag, p)))
        if not math.isfinite(inner):
            raise SingularityError(
                f"|f|^{p} overflowed the spatial quadrature (uncapped singularity?)"
            )
        inner_acc += wt * inner ** (q / p)
    if not math.isfinite(inner_acc):
        raise SingularityError("mixed-norm time quadrature overflowed")
    return MixedNorm(inner_acc ** (1.0 / q), p, q, nt, box.space_nodes)


def _holder_pairs(box: SpaceTimeBox, probe_count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Probe pairs for the Hoelder quotient: box corners, axis-adjacent grid
    nodes, and seeded random pairs.  Adjacent-node pairs pin the quotient of
    kink-type fields exactly; corners reach the diameter of the box."""
    d = box.dimension
    axes = box.axes()
    pairs_a: list[np.ndarray] = []
    pairs_b: list[np.ndarray] = []
    lo = np.array([b[0] for b in box.bounds])
    hi = np.array([b[1] for b in box.bounds])
    corners = np.array(np.meshgrid(*[[l, h] for l, h in box.bounds], indexing="ij")).reshape(d, -1).T
    for i in range(len(corners)):
        for j in range(i + 1, len(corners)):
            pairs_a.append(corners[i])
            pairs_b.append(corners[j])
    # adjacent nodes along each axis, other coordinates at mid-grid node
    for axis in range(d):
        base = np.array([ax[len(ax) // 2] for ax in axes])
        for k in range(len(axes[axis]) - 1):
            a = base.copy()
            b = base.copy()
            a[axis] = axes[axis][k]
            b[axis] = axes[axis][k + 1]
            pairs_a.append(a)
            pairs_b.append(b)
    rng = np.random.Generator(np.random.Philox(key=np.array([seed & (2**64 - 1), 0x68_6F_6C], dtype=np.uint64)))
    ra = rng.uniform(lo, hi, size=(probe_count, d))
    rb = rng.uniform(lo, hi, size=(probe_count, d))
    a = np.vstack([np.array(pairs_a).reshape(-1, d), ra])
    b = np.vstack([np.array(pairs_b).reshape(-1, d), rb])
    keep = np.linalg.norm(a - b, axis=1) > 1e-12
    return a[keep], b[keep]


def holder_norm(f, alpha: float, box: SpaceTimeBox, probe_count: int = 512, seed: int = 0) -> float:
    """Lower-bound estimate of sup_t [ sup_x |f| + sup_{x!=y} |f(x)-f(y)| / |x-y|^alpha ].

    Deterministic given the seed.  The supremum part scans all grid nodes;
    the quotient part uses corner pairs, axis-adjacent node pairs and
    ``probe_count`` random pairs per time node.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    evaluator = f.evaluate if isinstance(f, (DriftField, GridField)) else f
    pts = box.grid_points()
    a, b = _holder_pairs(box, probe_count, seed)
    gaps = np.linalg.norm(a - b, axis=1) ** alpha
    best = 0.0
    static = getattr(f, "time_independent", False)
    times = box.times() if not static else box.times()[:1]
    for t in times:
        va = np.asarray(evaluator(float(t), pts), dtype=np.float64)
        if va.ndim == 1:
            va = va[:, None]
        sup = float(np.sqrt(np.einsum("ij,ij->i", va, va)).max())
        fa = np.asarray(evaluator(float(t), a), dtype=np.float64)
        fb = np.asarray(evaluator(float(t), b), dtype=np.float64)
        if fa.ndim == 1:
            fa, fb = fa[:, None], fb[:, None]
        diff = np.sqrt(np.einsum("ij,ij->i", fa - fb, fa - fb))
        quot = float((diff / gaps).max())
        best = max(best, sup + quot)
    return best
