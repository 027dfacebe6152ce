"""Iterated drift regularization: the map Phi -> (b . grad) U_Phi, where
U_Phi solves the backward heat equation with forcing -Phi, the ladder of its
iterates, and contraction diagnostics.

Level k stores Phi_k (level 0 is the drift itself), the heat solution U_k,
and three bookkeeping norms: ||Phi_k|| in the chosen mode (Hoelder or mixed
L^q-L^p), the grid supremum of |grad U_k| and the mode norm of D2 U_k.  The
cumulative objects are

    C_n = sum_k sup |grad U_k|,     D_n = sum_k ||D2 U_k||,
    U^(n) = sum_k U_k,              residual drift = Phi_{n+1},

and the contraction regime is C_n <= 1/2.  Ladder construction is
sequential in k (each level feeds on the previous); completed ladders are
immutable and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import DriftField, GridField, SpaceTimeBox, holder_norm, lqp_norm
from .heat import HeatSolution, solve_backward_heat

MODES = ("holder", "lqp")


class _Negated:
    """Forcing adapter feeding -Phi to the heat solver."""

    def __init__(self, f):
        self._f = f
        self.time_independent = getattr(f, "time_independent", False)

    def __call__(self, t, x):
        return -np.asarray(self._f(t, x))


@dataclass(frozen=True)
class LadderLevel:
    index: int
    phi: GridField
    solution: HeatSolution
    phi_norm: float
    grad_sup: float
    hess_norm: float


@dataclass(frozen=True)
class ZvonkinLadder:
    drift: DriftField
    box: SpaceTimeBox
    mode: str
    levels: tuple[LadderLevel, ...]
    residual: GridField  # Phi_{depth+1}

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def _check_depth(self, depth: int | None) -> int:
        n = self.depth if depth is None else int(depth)
        if not 0 <= n <= self.depth:
            raise ValueError(f"depth {depth} outside built range 0..{self.depth}")
        return n

    def cumulative_potential(self, depth: int | None = None) -> GridField:
        """U^(n): pointwise sum of the level heat solutions up to depth."""
        n = self._check_depth(depth)
        acc = self.levels[0].solution.u.values.copy()
        for lv in self.levels[1 : n + 1]:
            acc += lv.solution.u.values
        return GridField(self.box, acc, self.levels[0].solution.u.components)

    def cumulative_gradient(self, depth: int | None = None) -> GridField:
        """grad U^(n): the sum of kernel-differentiated level gradients (never
        finite differences of the summed field)."""
        n = self._check_depth(depth)
        acc = self.levels[0].solution.grad.values.copy()
        for lv in self.levels[1 : n + 1]:
            acc += lv.solution.grad.values
        return GridField(self.box, acc, self.levels[0].solution.grad.components)

    def residual_drift(self, depth: int | None = None) -> GridField:
        """Phi_{n+1}, the drift term remaining after n+1 regularization steps."""
        n = self._check_depth(depth)
        if n == self.depth:
            return self.residual
        return self.levels[n + 1].phi

    def scaled_residual(self, depth: int | None = None) -> GridField:
        """2^(n+1) Phi_{n+1}: the residual scaled back by its expected decay."""
        n = self._check_depth(depth)
        return self.residual_drift(n).scaled(2.0 ** (n + 1))

    def contraction_constants(self, depth: int | None = None) -> tuple[float, float]:
        n = self._check_depth(depth)
        c = sum(lv.grad_sup for lv in self.levels[: n + 1])
        dn = sum(lv.hess_norm for lv in self.levels[: n + 1])
        return c, dn


@dataclass(frozen=True)
class HorizonDiagnostics:
    horizon: float
    phi_norms: tuple[float, ...]      # per level 0..n, plus residual at the end
    grad_sups: tuple[float, ...]
    hess_norms: tuple[float, ...]
    c_cumulative: tuple[float, ...]   # C_k for k = 0..n
    d_cumulative: tuple[float, ...]
    ratios: tuple[float, ...]         # ||Phi_{k+1}|| / ||Phi_k||, k = 0..n
    epsilon: float                    # (4 ||b||)^(-1) in the mode norm
    epsilon_chain: tuple[float, ...]  # eps^k ||b||^(k+1), k = 0..n+1

    @property
    def c_n(self) -> float:
        return self.c_cumulative[-1]

    @property
    def d_n(self) -> float:
        return self.d_cumulative[-1]


@dataclass(frozen=True)
class ContractionReport:
    mode: str
    depth: int
    per_horizon: tuple[HorizonDiagnostics, ...]
    bracket_horizon: float | None     # largest tested horizon with C_n <= 1/2


def _mode_field_norm(f: GridField, mode: str, drift: DriftField, box: SpaceTimeBox,
                     probes: int, seed: int) -> float:
    if mode == "holder":
        return holder_norm(f, drift.holder_alpha, box, probes, seed)
    return lqp_norm(f, drift.p, drift.q, box).value


def _sup_magnitude(f: GridField) -> float:
    return float(f.magnitude().max())


def _contract(b_values: np.ndarray, grad: GridField) -> np.ndarray:
    """(b . grad) U on the grid: out_i = sum_j b_j d_j U_i."""
    box = grad.box
    d = box.dimension
    c = grad.components // d
    g = grad.values.reshape(*grad.values.shape[:-1], c, d)
    return np.einsum("...j,...ij->...i", b_values, g)


def apply_T(b: DriftField, phi, box: SpaceTimeBox, *, time_quad: int | None = None) -> GridField:
    """One regularization step: solve the vector backward heat equation with
    forcing -phi and contract the drift with the solution gradient."""
    b.require_admissible()
    grid = _apply_T_full(b, phi, box, _sample_drift(b, box).values, time_quad)[0]
    return grid


def _sample_drift(b: DriftField, box: SpaceTimeBox) -> GridField:
    return GridField.sample(box, b.evaluate, box.dimension,
                            time_independent=b.time_independent)


def _apply_T_full(b, phi, box, b_values, time_quad) -> tuple[GridField, HeatSolution]:
    forcing = phi.scaled(-1.0) if isinstance(phi, GridField) else _Negated(phi)
    sol = solve_backward_heat(forcing, box, 0.0, with_hessian=True,
                              time_quad=time_quad, exponents=(b.p, b.q))
    out = _contract(b_values, sol.grad)
    return GridField(box, out, box.dimension), sol


def build_ladder(b: DriftField, depth: int, box: SpaceTimeBox, mode: str = "lqp", *,
                 probes: int = 256, seed: int = 0,
                 time_quad: int | None = None) -> ZvonkinLadder:
    """Compute Phi_k and U_k for k = 0..depth plus the residual Phi_{depth+1}.

    Mode "holder" requires a drift with a declared Hoelder exponent; mode
    "lqp" requires the subcriticality check to pass.  A non-contracting
    horizon is not an error here; it shows up in the contraction report.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if mode == "holder":
        if not b.holder_mode:
            raise ValueError(f"drift {b.name!r} declares no Hoelder exponent; use mode='lqp'")
    else:
        ok, margin = b.prodi_serrin()
        if not ok:
            raise ValueError(
                f"drift {b.name!r}: exponents (p={b.p}, q={b.q}) fail subcriticality "
                f"(margin {margin:.4f}); mixed-norm mode needs a subcritical declaration"
            )
    phi_grid = _sample_drift(b, box)
    b_values = phi_grid.values
    levels = []
    forcing = b  # level 0 solves with the analytic drift (exact tails)
    for k in range(depth + 1):
        next_phi, sol = _apply_T_full(b, forcing, box, b_values, time_quad)
        hess_norm = (
            _sup_magnitude(sol.hessian)
            if mode == "holder"
            else lqp_norm(sol.hessian, b.p, b.q, box).value
        )
        levels.append(
            LadderLevel(
                index=k,
                phi=phi_grid,
                solution=sol,
                phi_norm=_mode_field_norm(phi_grid, mode, b, box, probes, seed),
                grad_sup=_sup_magnitude(sol.grad),
                hess_norm=hess_norm,
            )
        )
        phi_grid = next_phi
        forcing = next_phi
    return ZvonkinLadder(b, box, mode, tuple(levels), phi_grid)


def transformed_fields(ladder: ZvonkinLadder, depth: int | None = None
                       ) -> tuple[GridField, GridField, GridField]:
    """(U^(n), grad U^(n), residual drift) used to build Y = X + U^(n)(t, X)."""
    return (
        ladder.cumulative_potential(depth),
        ladder.cumulative_gradient(depth),
        ladder.residual_drift(depth),
    )


def contraction_report(ladder: ZvonkinLadder, horizons, *, probes: int = 256,
                       seed: int = 0, time_quad: int | None = None) -> ContractionReport:
    """Rebuild the ladder at each horizon and report contraction diagnostics,
    including the empirical bracket: the largest tested horizon with
    C_n <= 1/2, and the geometric prediction chain from eps = (4 ||b||)^(-1)."""
    if ladder.depth < 1:
        raise ValueError("contraction diagnostics need ladder depth >= 1")
    horizons = sorted(float(h) for h in horizons)
    diagnostics = []
    for horizon in horizons:
        sub_box = ladder.box.with_horizon(horizon)
        lad = build_ladder(ladder.drift, ladder.depth, sub_box, ladder.mode,
                           probes=probes, seed=seed, time_quad=time_quad)
        phi_norms = [lv.phi_norm for lv in lad.levels]
        phi_norms.append(
            _mode_field_norm(lad.residual, lad.mode, lad.drift, sub_box, probes, seed)
        )
        grad_sups = tuple(lv.grad_sup for lv in lad.levels)
        hess_norms = tuple(lv.hess_norm for lv in lad.levels)
        c_cum = tuple(np.cumsum(grad_sups))
        d_cum = tuple(np.cumsum(hess_norms))
        ratios = tuple(
            (phi_norms[k + 1] / phi_norms[k]) if phi_norms[k] > 0.0 else 0.0
            for k in range(len(phi_norms) - 1)
        )
        base = phi_norms[0]
        eps = math.inf if base == 0.0 else 1.0 / (4.0 * base)
        chain = tuple(
            0.0 if base == 0.0 else eps**k * base ** (k + 1)
            for k in range(len(phi_norms))
        )
        diagnostics.append(
            HorizonDiagnostics(
                horizon=horizon,
                phi_norms=tuple(phi_norms),
                grad_sups=grad_sups,
                hess_norms=hess_norms,
                c_cumulative=c_cum,
                d_cumulative=d_cum,
                ratios=ratios,
                epsilon=eps,
                epsilon_chain=chain,
            )
        )
    bracket = None
    for diag in diagnostics:
        if diag.c_n <= 0.5:
            bracket = diag.horizon
    return ContractionReport(
        mode=ladder.mode,
        depth=ladder.depth,
        per_horizon=tuple(diagnostics),
        bracket_horizon=bracket,
    )
