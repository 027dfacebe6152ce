"""Change-of-measure toolchain: exponential path weights, the weighted
representation E[Phi(X)] = E[Phi(x + W) rho_T], exact-smoothing window
estimates, the additive-functional exponential bound, and exponential moment
stability checks.

The stochastic integral in the log-weight is discretized with left-point
evaluation against the same increments that drive the paths, so the weighted
estimator and the direct simulator share randomness (common random numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import DriftField, SpaceTimeBox, interpolate_spatial, lqp_norm
from .heat import smoothed_time_integral
from .reports import EstimateReport, combined_se, mean_report
from .sde import PathBatch, SimConfig, simulate


def _zero_like(cfg: SimConfig) -> DriftField:
    return DriftField(lambda t, z: np.zeros_like(z), cfg.box.dimension,
                      cfg.drift.p, cfg.drift.q, support_radius=1.0, name="zero")


def brownian_batch(cfg: SimConfig, x, *, workers: int = 1) -> PathBatch:
    """x + W on the simulation grid, driven by the same increments the
    drifted simulation with this config would use."""
    base = SimConfig(_zero_like(cfg), cfg.box, cfg.step, cfg.n_paths, cfg.seed,
                     cfg.ladder_depth, cfg.moment_orders)
    return simulate(base, x, workers=workers)


@dataclass(frozen=True)
class GirsanovWeight:
    """Per-path log-weights log rho_T = sum b . dW - (1/2) sum |b|^2 h and
    the squared-drift integral along the carrying Brownian batch."""

    log_weights: np.ndarray
    drift_square_integral: np.ndarray
    batch: PathBatch

    def __post_init__(self):
        self.log_weights.flags.writeable = False
        self.drift_square_integral.flags.writeable = False

    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def normalization_report(self) -> EstimateReport:
        w = self.weights()
        rep = mean_report(w, "mean_weight", "E[rho_T] = 1 (martingale normalization)")
        ok = abs(rep.estimate - 1.0) <= 3.0 * rep.std_error
        return EstimateReport(rep.quantity, rep.estimate, rep.std_error,
                              rep.n_samples, rep.inequality, passed=ok)


def girsanov_weight(b: DriftField, batch: PathBatch) -> GirsanovWeight:
    h = batch.config.step
    n, m1, _ = batch.paths.shape
    logw = np.zeros(n)
    dsq = np.zeros(n)
    for step in range(m1 - 1):
        t = float(batch.times[step])
        v = b.evaluate(t, batch.paths[:, step, :])
        logw += np.einsum("ij,ij->i", v, batch.increments[:, step, :])
        dsq += np.einsum("ij,ij->i", v, v) * h
    logw -= 0.5 * dsq
    return GirsanovWeight(logw, dsq, batch)


def _stability_flag(samples: np.ndarray) -> tuple[bool, dict]:
    """Half-sample vs full-sample drift within 3 combined standard errors."""
    n = samples.size
    half = samples[: n // 2]
    m_full = float(samples.mean())
    m_half = float(half.mean())
    se_full = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    se_half = float(half.std(ddof=1) / math.sqrt(half.size)) if half.size > 1 else 0.0
    stable = (
        math.isfinite(m_full)
        and abs(m_full - m_half) <= 3.0 * max(combined_se(se_full, se_half), 1e-300)
    )
    return stable, {"half_estimate": m_half, "half_se": se_half}


def girsanov_expectation(phi, b: DriftField, x, cfg: SimConfig, *,
                         workers: int = 1) -> EstimateReport:
    """Weighted-Brownian estimate of E[Phi(X)] for a nonnegative path
    functional ``phi(batch) -> (N,)``.

    The report carries the effective sample size, the martingale
    normalization estimate, and a Novikov proxy (stability of
    E[exp((1/2) int |b|^2)] under sample doubling); an effective sample size
    below 1% of N sets the weight-degeneracy flag.
    """
    batch = brownian_batch(cfg, x, workers=workers)
    gw = girsanov_weight(b, batch)
    w = gw.weights()
    values = np.asarray(phi(batch), dtype=np.float64)
    if values.shape != (cfg.n_paths,):
        raise ValueError(f"functional returned shape {values.shape}, expected ({cfg.n_paths},)")
    sample = values * w
    ess = float(w.sum() ** 2 / (w**2).sum())
    novikov_ok, novikov_details = _stability_flag(np.exp(0.5 * gw.drift_square_integral))
    norm_rep = gw.normalization_report()
    rep = mean_report(sample, "weighted_expectation",
                      "agrees with the direct estimate of E[Phi(X)]")
    return EstimateReport(
        rep.quantity, rep.estimate, rep.std_error, rep.n_samples, rep.inequality,
        passed=None,
        details={
            "ess": ess,
            "weight_degenerate": ess < 0.01 * cfg.n_paths,
            "novikov_stable": novikov_ok,
            "mean_weight": norm_rep.estimate,
            "mean_weight_se": norm_rep.std_error,
        },
    )


def two_estimator_check(phi, b: DriftField, x, cfg: SimConfig, *,
                        workers: int = 1) -> tuple[EstimateReport, EstimateReport, bool]:
    """Direct simulate-and-average vs weighted-Brownian estimate of the same
    functional on common randomness; agreement within 3 combined standard
    errors is the weak-uniqueness surrogate."""
    drifted = simulate(SimConfig(b, cfg.box, cfg.step, cfg.n_paths, cfg.seed,
                                 cfg.ladder_depth, cfg.moment_orders), x,
                       workers=workers)
    direct = mean_report(np.asarray(phi(drifted), dtype=np.float64),
                         "direct_expectation", "agrees with the weighted estimate")
    weighted = girsanov_expectation(phi, b, x, cfg, workers=workers)
    gap = abs(direct.estimate - weighted.estimate)
    tol = 3.0 * combined_se(direct.std_error, weighted.std_error)
    return direct, weighted, bool(gap <= max(tol, 1e-12))


def standard_functionals(direction: int = 0, threshold: float = 0.5) -> dict:
    """Three nonnegative path functionals used by the agreement checks."""

    def positive_terminal(batch: PathBatch) -> np.ndarray:
        return np.maximum(batch.paths[:, -1, direction], 0.0)

    def running_sup(batch: PathBatch) -> np.ndarray:
        return np.linalg.norm(batch.paths, axis=2).max(axis=1)

    def terminal_indicator(batch: PathBatch) -> np.ndarray:
        return (batch.paths[:, -1, direction] > threshold).astype(np.float64)

    return {
        "positive_terminal": positive_terminal,
        "running_sup": running_sup,
        "terminal_indicator": terminal_indicator,
    }


@dataclass(frozen=True)
class KernelBound:
    """Fit of sup_x E[int_s^t f(r, x + W_{r-s}) dr] <= C (t-s)^beta ||f||."""

    p_prime: float
    q_prime: float
    beta: float
    fitted_exponent: float
    fitted_constant: float
    windows: tuple[tuple[float, float], ...]
    sup_values: tuple[float, ...]
    field_norm: float

    @property
    def exponent_ok(self) -> bool:
        return self.fitted_exponent >= self.beta - 0.1


def kernel_window_beta(p_prime: float, q_prime: float, d: int) -> float:
    """beta = 1 - 1/q' - d/(2 p'); positive exactly when d/p' + 2/q' < 2."""
    return 1.0 - 1.0 / q_prime - d / (2.0 * p_prime)


def kernel_bound_estimate(f, p_prime: float, q_prime: float, windows,
                          probe_points, box: SpaceTimeBox, *,
                          time_quad: int | None = None) -> KernelBound:
    """Exact-Gaussian-smoothing estimate of the window functional over a
    ladder of (s, t) windows, sup over the probe set, and a least-squares fit
    of the decay exponent against the theoretical beta."""
    d = box.dimension
    check = d / p_prime + 2.0 / q_prime
    if not check < 2.0:
        raise ValueError(
            f"(p'={p_prime}, q'={q_prime}) violates d/p' + 2/q' < 2 (got {check:.4f})"
        )
    beta = kernel_window_beta(p_prime, q_prime, d)
    probe_points = np.atleast_2d(np.asarray(probe_points, dtype=np.float64))
    windows = [(float(s), float(t)) for s, t in windows]
    if len(windows) < 2:
        raise ValueError("exponent fitting needs a ladder of at least 2 windows")
    sups = []
    for s, t in windows:
        slab = smoothed_time_integral(f, box, s, t, time_quad=time_quad)
        mags = np.sqrt(np.einsum("...c,...c->...", slab, slab))[..., None]
        vals = interpolate_spatial(mags, box, probe_points, outside="clamp")[:, 0]
        sups.append(float(np.maximum.accumulate(vals)[-1]))
    norm = lqp_norm(f, p_prime, q_prime, box).value
    lengths = np.array([t - s for s, t in windows])
    logs = np.log(np.maximum(sups, 1e-300))
    slope, intercept = np.polyfit(np.log(lengths), logs, 1)
    constant = math.exp(intercept) / norm if norm > 0 else 0.0
    return KernelBound(
        p_prime=p_prime,
        q_prime=q_prime,
        beta=beta,
        fitted_exponent=float(slope),
        fitted_constant=float(constant),
        windows=tuple(windows),
        sup_values=tuple(sups),
        field_norm=norm,
    )


def khasminskii_check(f, cfg: SimConfig, probe_points, *,
                      time_quad: int | None = None,
                      workers: int = 1) -> EstimateReport:
    """Exponential moment of an additive functional of Brownian motion.

    alpha = sup over probes of int_0^T (G_s * f(s))(x) ds is computed by
    quadrature (no sampling); the Monte Carlo estimate of
    sup_x E[exp(int_0^T f(s, x + W_s) ds)] is then checked against
    1 / (1 - alpha) when alpha < 1, and reported without assertion otherwise.
    """
    box = cfg.box
    probe_points = np.atleast_2d(np.asarray(probe_points, dtype=np.float64))
    sample_pts = box.grid_points()
    probe_vals = np.asarray(f(0.0, sample_pts), dtype=np.float64)
    if probe_vals.min() < 0.0:
        raise ValueError("the additive-functional bound needs a nonnegative field")
    slab = smoothed_time_integral(f, box, 0.0, box.horizon, time_quad=time_quad)
    alphas = interpolate_spatial(slab, box, probe_points, outside="clamp")[:, 0]
    alpha = float(alphas.max())
    h = cfg.step
    best = None
    for probe in probe_points:
        batch = brownian_batch(cfg, probe, workers=workers)
        s = np.zeros(cfg.n_paths)
        for step in range(cfg.n_steps):
            v = np.asarray(f(step * h, batch.paths[:, step, :]), dtype=np.float64)
            s += v.reshape(cfg.n_paths) * h
        rep = mean_report(np.exp(s), "khasminskii_exp_moment",
                          "sup_x E[exp(int f)] <= 1/(1 - alpha) for alpha < 1")
        if best is None or rep.estimate > best.estimate:
            best = rep
    if alpha < 1.0:
        bound = 1.0 / (1.0 - alpha)
        passed = best.estimate <= bound + 3.0 * best.std_error
    else:
        bound = math.inf
        passed = None
    return EstimateReport(
        best.quantity, best.estimate, best.std_error, best.n_samples,
        best.inequality, passed=passed,
        details={"alpha": alpha, "bound": bound, "n_probes": len(probe_points)},
    )


def exp_moment_check(f: DriftField, k_values, cfg: SimConfig, x, *,
                     workers: int = 1) -> list[EstimateReport]:
    """Finiteness (via doubling stability) of E[exp(k int |f(s, x+W_s)|^2 ds)]
    for each k, and of the weight moments E[rho_T^a] for a in {-1, 1/2, 2}."""
    ok, margin = f.prodi_serrin()
    if not ok:
        raise ValueError(
            f"field {f.name!r}: exponents (p={f.p}, q={f.q}) fail subcriticality "
            f"(margin {margin:.4f})"
        )
    batch = brownian_batch(cfg, x, workers=workers)
    gw = girsanov_weight(f, batch)
    out = []
    for k in k_values:
        samples = np.exp(float(k) * gw.drift_square_integral)
        stable, extra = _stability_flag(samples)
        rep = mean_report(samples, f"exp_moment_drift_square[k={k:g}]",
                          "finite and stable under sample doubling",
                          passed=stable, k=float(k), **extra)
        out.append(rep)
    for a in (-1.0, 0.5, 2.0):
        samples = np.exp(a * gw.log_weights)
        stable, extra = _stability_flag(samples)
        out.append(
            mean_report(samples, f"weight_moment[a={a:g}]",
                        "finite and stable under sample doubling",
                        passed=stable, alpha=a, **extra)
        )
    return out
