"""Euler path simulation with left-point drift evaluation, common-noise
coupling, the regularizing change of variables Y = X + U^(n)(t, X), and the
moment functionals built on coupled batches.

Paths are embarrassingly parallel: increments come from per-path keyed
streams (see rng), so identical configs give bit-identical batches at any
worker count.  Batches are immutable after simulation; analyses may run
concurrently on shared batches.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BoxMismatchError, SingularityError
from .fields import DriftField, SpaceTimeBox
from .reports import EstimateReport, combined_se, mean_report
from .rng import brownian_increments, buffer_checksum
from .zvonkin import ZvonkinLadder

# indicator threshold for "the transformed paths have met", in relative path scale
COLLISION_THRESHOLD = 1e-14


@dataclass(frozen=True)
class SimConfig:
    drift: DriftField
    box: SpaceTimeBox
    step: float
    n_paths: int
    seed: int
    ladder_depth: int | None = None
    moment_orders: tuple[float, ...] = (2.0,)

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("need at least one path")
        steps = self.box.horizon / self.step
        if abs(steps - round(steps)) > 4.0 * np.spacing(steps):
            raise ValueError(
                f"step {self.step} does not divide horizon {self.box.horizon}: "
                f"step count {steps} is not integral"
            )
        if round(steps) < 1:
            raise ValueError("horizon shorter than one step")
        for p in self.moment_orders:
            if p < 2.0:
                raise ValueError(f"moment orders must be >= 2, got {p}")
        object.__setattr__(self, "moment_orders", tuple(float(p) for p in self.moment_orders))

    @property
    def n_steps(self) -> int:
        return int(round(self.box.horizon / self.step))

    def ito_constant(self, p: float) -> float:
        """Second-order constant used to discount the p-th power expansion of
        the transformed gap; scalar-case value p(p-1)/2."""
        return p * (p - 1.0) / 2.0

    def regularization_metadata(self) -> dict:
        return {
            "h": self.step,
            "cap": self.drift.cap,
            "mollify": self.drift.mollify,
        }


class PathBatch:
    """A batch of Euler trajectories sharing one increment buffer.

    ``paths`` has shape (N, n_steps + 1, d); step 0 equals the initial point
    exactly, and with zero drift the trajectory is exactly the running sum of
    increments.  All arrays are read-only.
    """

    def __init__(self, config: SimConfig, start: np.ndarray, times: np.ndarray,
                 paths: np.ndarray, increments: np.ndarray,
                 drift_square_integral: np.ndarray,
                 sup_distance_to_partner: np.ndarray | None = None):
        self.config = config
        self.start = start
        self.times = times
        self.paths = paths
        self.increments = increments
        self.drift_square_integral = drift_square_integral
        self.sup_distance_to_partner = sup_distance_to_partner
        for a in (self.start, self.times, self.paths, self.drift_square_integral):
            a.flags.writeable = False

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def dimension(self) -> int:
        return self.paths.shape[2]

    def increments_checksum(self) -> str:
        return buffer_checksum(self.increments)


def _drive(cfg: SimConfig, x: np.ndarray, increments: np.ndarray,
           path_offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Left-point Euler recursion over one contiguous slice of paths."""
    n, m, d = increments.shape
    h = cfg.step
    paths = np.empty((n, m + 1, d))
    paths[:, 0, :] = x
    dsq = np.zeros(n)
    drift = cfg.drift
    for step in range(m):
        t = step * h
        try:
            v = drift.evaluate(t, paths[:, step, :])
        except SingularityError as err:
            raise SingularityError(
                f"drift {drift.name!r} exploded at step {step} (t={t:g}): {err}",
                path=None if err.path is None else path_offset + err.path,
                step=step,
            ) from None
        paths[:, step + 1, :] = paths[:, step, :] + v * h + increments[:, step, :]
        dsq += np.einsum("ij,ij->i", v, v) * h
    return paths, dsq


def _drive_chunked(cfg: SimConfig, x: np.ndarray, increments: np.ndarray,
                   workers: int) -> tuple[np.ndarray, np.ndarray]:
    n = increments.shape[0]
    workers = max(1, min(int(workers), n))
    if workers == 1:
        return _drive(cfg, x, increments)
    bounds = np.linspace(0, n, workers + 1, dtype=int)
    chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    paths = np.empty((n, increments.shape[1] + 1, increments.shape[2]))
    dsq = np.empty(n)
    # per-path streams and disjoint output slices: the partition cannot
    # change any value, only the schedule
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {
            pool.submit(_drive, cfg, x, increments[a:b], a): (a, b) for a, b in chunks
        }
        for fut, (a, b) in futures.items():
            p, q = fut.result()
            paths[a:b] = p
            dsq[a:b] = q
    return paths, dsq


def simulate(cfg: SimConfig, x, *, workers: int = 1) -> PathBatch:
    """Euler batch from one starting point, with the squared-drift integral
    recorded per path as the integrability monitor."""
    cfg.drift.require_admissible()
    d = cfg.box.dimension
    x = np.broadcast_to(np.asarray(x, dtype=np.float64), (d,)).copy()
    increments = brownian_increments(cfg.seed, cfg.n_paths, cfg.n_steps, d, cfg.step)
    paths, dsq = _drive_chunked(cfg, x, increments, workers)
    times = np.arange(cfg.n_steps + 1) * cfg.step
    return PathBatch(cfg, x, times, paths, increments, dsq)


def simulate_coupled(cfg: SimConfig, x1, x2, *, workers: int = 1) -> tuple[PathBatch, PathBatch]:
    """Two batches driven by the same increment buffer (common-noise
    coupling), each carrying the pathwise sup distance to its partner."""
    cfg.drift.require_admissible()
    d = cfg.box.dimension
    x1 = np.broadcast_to(np.asarray(x1, dtype=np.float64), (d,)).copy()
    x2 = np.broadcast_to(np.asarray(x2, dtype=np.float64), (d,)).copy()
    increments = brownian_increments(cfg.seed, cfg.n_paths, cfg.n_steps, d, cfg.step)
    p1, q1 = _drive_chunked(cfg, x1, increments, workers)
    p2, q2 = _drive_chunked(cfg, x2, increments, workers)
    gap = np.linalg.norm(p1 - p2, axis=2).max(axis=1)
    gap.flags.writeable = False
    times = np.arange(cfg.n_steps + 1) * cfg.step
    b1 = PathBatch(cfg, x1, times, p1, increments, q1, sup_distance_to_partner=gap)
    b2 = PathBatch(cfg, x2, times, p2, increments, q2, sup_distance_to_partner=gap)
    return b1, b2


@dataclass(frozen=True)
class TransformedBatch:
    """Per-step transform data attached to a batch: Y = X + U^(n)(t, X),
    sigma = grad U^(n)(t, X) and the residual drift along the path."""

    base: PathBatch
    depth: int
    y: np.ndarray               # (N, M+1, d)
    sigma: np.ndarray           # (N, M+1, d, d)
    residual_drift: np.ndarray  # (N, M+1, d)

    def __post_init__(self):
        for a in (self.y, self.sigma, self.residual_drift):
            a.flags.writeable = False


def transformed_process(batch: PathBatch, ladder: ZvonkinLadder,
                        depth: int | None = None) -> TransformedBatch:
    """Attach Y, sigma and the residual drift time series to a batch.

    The transform fields are interpolated with the clamp extension (they are
    smooth and non-compact); the residual drift uses the zero extension like
    any drift.
    """
    box = ladder.box
    horizon = batch.times[-1]
    if abs(box.horizon - horizon) > 1e-12 * max(1.0, box.horizon):
        raise BoxMismatchError(
            f"ladder horizon {box.horizon} != batch horizon {horizon}"
        )
    if box.dimension != batch.dimension:
        raise BoxMismatchError("ladder and batch dimensions differ")
    u_field = ladder.cumulative_potential(depth)
    g_field = ladder.cumulative_gradient(depth)
    b_field = ladder.residual_drift(depth)
    n, m1, d = batch.paths.shape
    y = np.empty_like(batch.paths)
    sigma = np.empty((n, m1, d, d))
    residual = np.empty_like(batch.paths)
    for step in range(m1):
        t = float(batch.times[step])
        pts = batch.paths[:, step, :]
        y[:, step, :] = pts + u_field.evaluate(t, pts, outside="clamp")
        sigma[:, step, :, :] = g_field.evaluate(t, pts, outside="clamp").reshape(n, d, d)
        residual[:, step, :] = b_field.evaluate(t, pts, outside="zero")
    dep = ladder.depth if depth is None else int(depth)
    return TransformedBatch(batch, dep, y, sigma, residual)


def ito_residual(tb: TransformedBatch) -> EstimateReport:
    """Defect of the transformed reformulation along simulated paths:

        r_t = X_t - x - U(0, x) + U(t, X_t)
              - sum b_res(s, X_s) h - sum (sigma_s + I) dW_s,

    summarized as E[sup_t |r_t|].  Exactly zero (to rounding) for zero drift;
    for smooth drift it shrinks with the step size.
    """
    batch = tb.base
    cfg = batch.config
    h = cfg.step
    x = batch.start
    n, m1, d = batch.paths.shape
    u0 = tb.y[:, 0, :] - batch.paths[:, 0, :]           # U(0, x), identical rows
    drift_sum = np.zeros((n, d))
    noise_sum = np.zeros((n, d))
    sup_r = np.zeros(n)
    eye = np.eye(d)
    for step in range(1, m1):
        prev = step - 1
        drift_sum = drift_sum + tb.residual_drift[:, prev, :] * h
        dw = batch.increments[:, prev, :]
        noise_sum = noise_sum + np.einsum("nij,nj->ni", tb.sigma[:, prev, :, :] + eye, dw)
        u_t = tb.y[:, step, :] - batch.paths[:, step, :]
        r = batch.paths[:, step, :] - x - u0 + u_t - drift_sum - noise_sum
        sup_r = np.maximum(sup_r, np.linalg.norm(r, axis=1))
    return mean_report(
        sup_r,
        quantity="ito_residual_sup",
        inequality="E[sup_t |r_t|] -> 0 as h -> 0",
        depth=tb.depth,
        **cfg.regularization_metadata(),
    )


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Aggregate fine increments into blocks of ``factor`` (Brownian
    refinement consistency for step-size studies)."""
    n, m, d = increments.shape
    if m % factor:
        raise ValueError(f"{m} steps not divisible by {factor}")
    return increments.reshape(n, m // factor, factor, d).sum(axis=2)


def ito_residual_convergence(cfg: SimConfig, x, ladder: ZvonkinLadder,
                             levels: int = 3, factor: int = 2,
                             depth: int | None = None) -> tuple[list[EstimateReport], float]:
    """Run the residual at h, h*factor, ... on a common Brownian refinement
    and fit the convergence order; returns (reports fine->coarse, order).

    The transform fields are piecewise-constant in time, so cfg.step should
    be an integer multiple of the ladder grid's dt: otherwise the time
    interpolation adds an h-independent floor that flattens the fit."""
    if levels < 3:
        raise ValueError("order fit needs at least 3 levels")
    d = cfg.box.dimension
    x = np.broadcast_to(np.asarray(x, dtype=np.float64), (d,)).copy()
    fine = brownian_increments(cfg.seed, cfg.n_paths, cfg.n_steps, d, cfg.step)
    reports = []
    hs = []
    for lvl in range(levels):
        mult = factor**lvl
        h = cfg.step * mult
        sub = SimConfig(cfg.drift, cfg.box, h, cfg.n_paths, cfg.seed,
                        cfg.ladder_depth, cfg.moment_orders)
        inc = fine if mult == 1 else coarsen_increments(fine, mult)
        paths, dsq = _drive(sub, x, inc)
        times = np.arange(sub.n_steps + 1) * h
        batch = PathBatch(sub, x, times, paths, inc, dsq)
        tb = transformed_process(batch, ladder, depth)
        reports.append(ito_residual(tb))
        hs.append(h)
    order = float(np.polyfit(np.log(hs), np.log([r.estimate for r in reports]), 1)[0])
    return reports, order


def a_process(tb1: TransformedBatch, tb2: TransformedBatch, *, p: float = 2.0,
              k_values: tuple[float, ...] | None = None
              ) -> tuple[np.ndarray, list[EstimateReport]]:
    """The increasing discount functional of a coupled pair,

        A_t = int_0^t |sigma^1 - sigma^2|^2 / |Y^1 - Y^2|^2 1{Y^1 != Y^2} ds

    (left Riemann sum; the indicator zeroes steps where |dY| is below
    COLLISION_THRESHOLD relative to the path scale), plus exponential-moment
    reports E[exp(k A_T)] for each k (defaults: 1 and the p-expansion
    constant p(p-1)/2)."""
    if tb1.base.increments is not tb2.base.increments:
        raise BoxMismatchError("A-process needs a coupled pair sharing increments")
    cfg = tb1.base.config
    h = cfg.step
    if k_values is None:
        k_values = (1.0, cfg.ito_constant(p))
    dy = tb1.y - tb2.y                                   # (N, M+1, d)
    dsig = tb1.sigma - tb2.sigma                         # (N, M+1, d, d)
    gap2 = np.einsum("nmi,nmi->nm", dy, dy)
    sig2 = np.einsum("nmij,nmij->nm", dsig, dsig)
    scale = np.maximum(
        1.0,
        np.maximum(np.linalg.norm(tb1.y, axis=2), np.linalg.norm(tb2.y, axis=2)).max(axis=1),
    )
    alive = gap2 > (COLLISION_THRESHOLD * scale[:, None]) ** 2
    ratio = np.where(alive, sig2 / np.where(alive, gap2, 1.0), 0.0)
    a_t = np.concatenate(
        [np.zeros((ratio.shape[0], 1)), np.cumsum(ratio[:, :-1] * h, axis=1)], axis=1
    )
    reports = []
    for k in k_values:
        reports.append(
            mean_report(
                np.exp(k * a_t[:, -1]),
                quantity=f"exp_moment_A_T[k={k:g}]",
                inequality="E[exp(k A_T)] bounded uniformly in the ladder depth",
                k=k,
                depth=tb1.depth,
            )
        )
    return a_t, reports


def holder_moment_estimate(cfg: SimConfig, x_pairs, p: float, *,
                           workers: int = 1) -> EstimateReport:
    """Initial-condition sensitivity ratio R = E[sup_t |dX|^p]^(1/p) / |dx|
    over a ladder of separations; passes when R does not blow up as the
    separation shrinks (max over the two smallest <= 2x max over the two
    largest)."""
    pairs = [(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))
             for a, b in x_pairs]
    if len(pairs) < 3:
        raise ValueError("need at least 3 separation pairs")
    seps = [float(np.linalg.norm(a - b)) for a, b in pairs]
    if any(s2 >= s1 for s1, s2 in zip(seps, seps[1:])):
        raise ValueError("pairs must be ordered by strictly shrinking separation")
    ratios = []
    ratio_ses = []
    for (a, b), sep in zip(pairs, seps):
        b1, _b2 = simulate_coupled(cfg, a, b, workers=workers)
        sup_p = b1.sup_distance_to_partner**p
        m = float(sup_p.mean())
        se = float(sup_p.std(ddof=1) / math.sqrt(len(sup_p)))
        r = m ** (1.0 / p) / sep
        # delta method through the p-th root
        r_se = se / (p * m ** ((p - 1.0) / p)) / sep if m > 0 else 0.0
        ratios.append(r)
        ratio_ses.append(r_se)
    head = max(ratios[:2])
    tail = max(ratios[-2:])
    passed = tail <= 2.0 * head
    return EstimateReport(
        quantity=f"holder_moment_ratio[p={p:g}]",
        estimate=max(ratios),
        std_error=max(ratio_ses),
        n_samples=cfg.n_paths * len(pairs),
        inequality="max R over two smallest separations <= 2 * max R over two largest",
        passed=passed,
        details={
            "separations": seps,
            "ratios": ratios,
            "ratio_ses": ratio_ses,
            "p": p,
        },
    )


def drift_difference_decay(cfg: SimConfig, x1, x2, ladder: ZvonkinLadder,
                           depths, *, p: float = 2.0,
                           workers: int = 1) -> tuple[list[EstimateReport], float]:
    """Depth decay of E[int |dX|^(p-1) |b_res^(n)(X^1) - b_res^(n)(X^2)| ds]
    on one coupled batch; returns per-depth reports and the fitted per-depth
    geometric ratio."""
    depths = sorted(int(n) for n in depths)
    if depths[-1] > ladder.depth:
        raise ValueError(f"ladder depth {ladder.depth} < requested {depths[-1]}")
    b1, b2 = simulate_coupled(cfg, x1, x2, workers=workers)
    gap = np.linalg.norm(b1.paths - b2.paths, axis=2) ** (p - 1.0)  # (N, M+1)
    h = cfg.step
    reports = []
    values = []
    for n in depths:
        field_n = ladder.residual_drift(n)
        diff = np.empty(gap.shape)
        for step in range(b1.paths.shape[1]):
            t = float(b1.times[step])
            va = field_n.evaluate(t, b1.paths[:, step, :], outside="zero")
            vb = field_n.evaluate(t, b2.paths[:, step, :], outside="zero")
            diff[:, step] = np.linalg.norm(va - vb, axis=1)
        functional = (gap[:, :-1] * diff[:, :-1]).sum(axis=1) * h
        rep = mean_report(
            functional,
            quantity=f"coupled_drift_difference[n={n}]",
            inequality="decays geometrically with the ladder depth",
            depth=n,
            p=p,
        )
        reports.append(rep)
        values.append(rep.estimate)
    logs = np.log(np.maximum(values, 1e-300))
    slope = float(np.polyfit(depths, logs, 1)[0])
    return reports, float(math.exp(slope))


def moment_stability(cfg: SimConfig, x, orders=None, *, workers: int = 1) -> list[EstimateReport]:
    """Terminal moments E[|X_T|^p]: finite and stable under doubling the
    sample (first half vs full batch within 3 combined standard errors)."""
    orders = cfg.moment_orders if orders is None else tuple(orders)
    batch = simulate(cfg, x, workers=workers)
    term = np.linalg.norm(batch.paths[:, -1, :], axis=1)
    half = cfg.n_paths // 2
    out = []
    for p in orders:
        sample = term**p
        full = mean_report(sample, f"terminal_moment[p={p:g}]",
                           "finite and stable under sample doubling")
        head = sample[:half]
        se_h = float(head.std(ddof=1) / math.sqrt(half)) if half > 1 else 0.0
        drift_ok = abs(full.estimate - float(head.mean())) <= 3.0 * combined_se(full.std_error, se_h)
        out.append(
            EstimateReport(
                full.quantity, full.estimate, full.std_error, full.n_samples,
                full.inequality,
                passed=bool(np.isfinite(full.estimate) and drift_ok),
                details={"half_estimate": float(head.mean()), "half_se": se_h, "p": p},
            )
        )
    return out


def drift_integrability_monitor(cfg: SimConfig, x, *, workers: int = 1) -> EstimateReport:
    """Empirical proxy for the finite-energy condition on solutions: the
    squared-drift integral along drifted paths should not exceed the
    99.9th percentile of the same functional along driftless paths (the
    drift evaluated on x + W) more than 1% of the time."""
    batch = simulate(cfg, x, workers=workers)
    zero = DriftField(lambda t, z: np.zeros_like(z), cfg.box.dimension,
                      cfg.drift.p, cfg.drift.q, support_radius=1.0, name="zero")
    base_cfg = SimConfig(zero, cfg.box, cfg.step, cfg.n_paths, cfg.seed,
                         cfg.ladder_depth, cfg.moment_orders)
    base = simulate(base_cfg, x, workers=workers)
    h = cfg.step
    ref = np.zeros(cfg.n_paths)
    for step in range(cfg.n_steps):
        v = cfg.drift.evaluate(step * h, base.paths[:, step, :])
        ref += np.einsum("ij,ij->i", v, v) * h
    threshold = float(np.quantile(ref, 0.999))
    frac = float((batch.drift_square_integral > max(threshold, 1e-300)).mean())
    return EstimateReport(
        quantity="drift_square_integral_tail",
        estimate=frac,
        std_error=float(math.sqrt(max(frac * (1 - frac), 1e-12) / cfg.n_paths)),
        n_samples=cfg.n_paths,
        inequality="tail fraction above the driftless 99.9th percentile < 1%",
        passed=frac < 0.01,
        details={"threshold": threshold},
    )
