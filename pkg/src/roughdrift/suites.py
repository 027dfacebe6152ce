"""Verification suites: orchestration of the module operations into named
check lists with JSON-lines reports and plot-ready CSV series.

No numeric logic lives here; every check calls module operations and applies
the stated threshold.  Reports are deterministic: identical configs (and
seeds) reproduce byte-identical report payloads at any worker count, so wall
times live in a separate meta file.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import girsanov as gs
from . import sde, zvonkin
from .corpus import PRESET_NAMES, make_drift, preset_spec
from .fields import SpaceTimeBox
from .heat import measure_constants, solve_backward_heat, sup_gradient

SUITE_NAMES = (
    "heat-constants", "lemma1", "lemma2", "lemma3", "lemma4",
    "prop-estimate", "appendix",
)

# check id -> the inequality or property it decides, in formula form
CHECK_CLAIMS = {
    "gradient_constant_monotone": "C(T_k) is strictly decreasing along the shrinking horizon ladder",
    "gradient_constant_vanishes": "C(T_min) / C(T_max) < 0.25 across an 8x horizon reduction",
    "damped_gradient_suppression": "sup|grad u| ratio <= 0.75 per 4x damping increase",
    "ladder_bracket_exists": "some tested horizon has C_n <= 1/2",
    "ladder_ratios_halving": "||Phi_{k+1}|| / ||Phi_k|| <= 1/2 for k = 0..3 at the bracketed horizon",
    "ladder_cumulative_gradient": "C_n <= 1/2 at the bracketed horizon",
    "ladder_hessian_sum_stable": "D_n changes by < 10% from depth 4 to depth 8 at the bracketed horizon",
    "transform_gradient_bounded": "|sigma_t| <= 1/2 at every step of every path",
    "transform_gap_comparability": "|dX|/2 <= |dY| <= (3/2)|dX| at every step of every path",
    "coupling_shared_noise": "coupled batches consume bit-identical increment buffers",
    "coupled_drift_difference_decay": "coupled residual-drift functional decays with fitted per-depth ratio <= 0.75",
    "exp_moment_uniform_in_depth": "E[exp(k A_T)] estimates at different depths agree within 3 combined se",
    "sup_moment_ratio_bounded": "E[sup_t |dX|^p]^(1/p) / |dx| stays within factor 2 as |dx| -> 0",
    "terminal_moments_stable": "E[|X_T|^p] finite and stable under sample doubling",
    "drift_energy_tail_small": "squared-drift integral exceeds the driftless 99.9th percentile on < 1% of paths",
    "khasminskii_bound": "MC estimate of sup_x E[exp(int f)] <= 1/(1 - alpha) + 3 se",
    "weighted_direct_agreement": "direct and weighted estimates agree within 3 combined se",
    "weight_normalization": "mean rho_T = 1 within 3 se",
    "kernel_window_exponent": "fitted window exponent >= beta - 0.1",
    "exp_moment_stability": "exponential moments stable under sample doubling",
    "squared_field_window_admissible": "(p/2, q/2) satisfies d/p' + 2/q' < 2 for every subcritical preset",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment = one config; all suites read from the same record so
    a single file drives any of them reproducibly."""

    name: str = "default"
    preset: str = "gaussian_bump"
    preset_params: dict = field(default_factory=dict)
    dimension: int = 1
    bounds: tuple = ((-4.0, 4.0),)
    space_nodes: tuple = (192,)
    time_nodes: int = 65
    horizon: float = 0.2
    # heat-constants suite
    heat_space_nodes: tuple = (256,)
    heat_time_nodes: int = 128
    decay_horizons: tuple = (0.4, 0.2, 0.1, 0.05)
    lambdas: tuple = (1.0, 4.0, 16.0, 64.0)
    # ladder suites
    ladder_space_nodes: tuple = (160,)
    ladder_time_nodes: int = 49
    ladder_horizons: tuple = (0.2, 0.1, 0.05, 0.025)
    ladder_depth: int = 8
    depth: int = 4
    depth_list: tuple = (1, 2, 4)
    decay_depths: tuple = (0, 1, 2, 3, 4)
    uniformity_horizon: float = 0.05
    uniformity_amplitude: float = 0.5
    # SDE suites
    steps: int = 256
    n_paths: int = 10000
    girsanov_paths: int = 20000
    aux_paths: int = 4000
    start: tuple = (0.0,)
    separations: tuple = (0.2, 0.1, 0.05, 0.025)
    moment_orders: tuple = (2.0, 4.0)
    # appendix fixtures
    probe_points: tuple = ((0.0,), (0.5,), (1.0,))
    kernel_windows: tuple = (0.4, 0.2, 0.1, 0.05)
    kernel_exponents: tuple = ((4.0, 4.0), (2.0, 2.0))
    khasminskii_alphas: tuple = (0.5, 0.8)
    functional_threshold: float = 0.25
    # execution
    probes: int = 192
    seed: int = 20240
    workers: int = 1
    time_quad: int | None = None
    out_dir: str | None = None

    def box(self) -> SpaceTimeBox:
        return SpaceTimeBox(self.dimension, self.horizon, tuple(map(tuple, self.bounds)),
                            tuple(self.space_nodes), self.time_nodes)

    def ladder_box(self, horizon: float | None = None) -> SpaceTimeBox:
        return SpaceTimeBox(self.dimension, self.horizon if horizon is None else horizon,
                            tuple(map(tuple, self.bounds)),
                            tuple(self.ladder_space_nodes), self.ladder_time_nodes)

    def heat_box(self, horizon: float) -> SpaceTimeBox:
        return SpaceTimeBox(self.dimension, horizon, tuple(map(tuple, self.bounds)),
                            tuple(self.heat_space_nodes), self.heat_time_nodes)

    def drift(self, preset: str | None = None):
        name = self.preset if preset is None else preset
        params = dict(self.preset_params) if preset in (None, self.preset) else {}
        return make_drift(name, self.dimension, params)

    def sim_config(self, *, n_paths: int | None = None, box: SpaceTimeBox | None = None,
                   drift=None, depth: int | None = None) -> sde.SimConfig:
        box = self.box() if box is None else box
        return sde.SimConfig(
            drift=self.drift() if drift is None else drift,
            box=box,
            step=box.horizon / self.steps,
            n_paths=self.n_paths if n_paths is None else n_paths,
            seed=self.seed,
            ladder_depth=self.depth if depth is None else depth,
            moment_orders=tuple(self.moment_orders),
        )

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        known = {f for f in ExperimentConfig.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        def tup(v):
            return tuple(tup(x) for x in v) if isinstance(v, (list, tuple)) else v
        return ExperimentConfig(**{k: tup(v) for k, v in data.items()})

    @staticmethod
    def from_file(path) -> "ExperimentConfig":
        text = Path(path).read_text()
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
        return ExperimentConfig.from_dict(data or {})

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, int, float, str)) or x is None:
        return x
    return str(x)


@dataclass(frozen=True)
class CheckOutcome:
    check: str
    claim: str
    status: str  # "pass" | "fail" | "report"
    numbers: dict

    def to_json_line(self) -> str:
        payload = {
            "check": self.check,
            "claim": self.claim,
            "status": self.status,
            "numbers": _jsonable(self.numbers),
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class SuiteResult:
    suite: str
    outcomes: tuple[CheckOutcome, ...]
    fingerprint: str
    wall_time: float
    series: dict = field(default_factory=dict)  # name -> (header, rows)

    @property
    def failed(self) -> bool:
        return any(o.status == "fail" for o in self.outcomes)


def _outcome(check: str, passed: bool | None, numbers: dict, *, variant: str = "") -> CheckOutcome:
    claim = CHECK_CLAIMS[check]
    status = "report" if passed is None else ("pass" if passed else "fail")
    name = f"{check}[{variant}]" if variant else check
    return CheckOutcome(name, claim, status, numbers)


# ---------------------------------------------------------------- suites


def _suite_heat_constants(cfg: ExperimentConfig):
    drift = cfg.drift()
    horizons = sorted(cfg.decay_horizons, reverse=True)
    consts = measure_constants(drift, cfg.heat_box(horizons[0]), horizons,
                               time_quad=cfg.time_quad)
    grads = [c.grad_constant for c in consts]
    monotone = all(a > b for a, b in zip(grads, grads[1:]))
    ratio = grads[-1] / grads[0] if grads[0] > 0 else 0.0
    outcomes = [
        _outcome("gradient_constant_monotone", monotone,
                 {"horizons": horizons, "grad_constants": grads}),
        _outcome("gradient_constant_vanishes", ratio < 0.25,
                 {"ratio": ratio, "bound": 0.25}),
    ]
    lams = sorted(cfg.lambdas)
    sups = []
    box = cfg.heat_box(horizons[0])
    for lam in lams:
        sol = solve_backward_heat(drift, box, lam, with_hessian=False,
                                  time_quad=cfg.time_quad)
        sups.append(sup_gradient(sol))
    ratios = [b / a for a, b in zip(sups, sups[1:])]
    outcomes.append(
        _outcome("damped_gradient_suppression", all(r <= 0.75 for r in ratios),
                 {"lambdas": lams, "sup_gradients": sups, "ratios": ratios, "bound": 0.75})
    )
    series = {
        "gradient_constants": (
            ["horizon", "grad_constant", "hess_constant"],
            [[c.horizon, c.grad_constant, c.hess_constant] for c in consts],
        ),
        "damped_gradients": (
            ["damping", "sup_gradient"], [[l, s] for l, s in zip(lams, sups)],
        ),
    }
    return outcomes, series


def _ladder_mode(drift) -> str:
    return "holder" if drift.holder_mode else "lqp"


def _suite_lemma1(cfg: ExperimentConfig):
    outcomes = []
    rows = []
    for preset in PRESET_NAMES:
        drift = cfg.drift(preset)
        mode = _ladder_mode(drift)
        lad = zvonkin.build_ladder(drift, cfg.ladder_depth, cfg.ladder_box(),
                                   mode, probes=cfg.probes, seed=cfg.seed,
                                   time_quad=cfg.time_quad)
        rep = zvonkin.contraction_report(lad, cfg.ladder_horizons,
                                         probes=cfg.probes, seed=cfg.seed,
                                         time_quad=cfg.time_quad)
        bracket = rep.bracket_horizon
        outcomes.append(_outcome("ladder_bracket_exists", bracket is not None,
                                 {"preset": preset, "bracket": bracket,
                                  "horizons": [d.horizon for d in rep.per_horizon]},
                                 variant=preset))
        if bracket is None:
            continue
        diag = next(d for d in rep.per_horizon if d.horizon == bracket)
        for d in rep.per_horizon:
            for k, (pn, ratio) in enumerate(zip(d.phi_norms, d.ratios)):
                rows.append([preset, d.horizon, k, pn, ratio,
                             d.c_cumulative[min(k, len(d.c_cumulative) - 1)],
                             d.d_cumulative[min(k, len(d.d_cumulative) - 1)]])
        head_ratios = diag.ratios[:4]
        zero_drift = diag.phi_norms[0] == 0.0
        outcomes.append(_outcome(
            "ladder_ratios_halving",
            all(r <= 0.5 for r in head_ratios),
            {"preset": preset, "bracket": bracket, "ratios": list(head_ratios),
             "zero_drift": zero_drift},
            variant=preset,
        ))
        outcomes.append(_outcome(
            "ladder_cumulative_gradient", diag.c_n <= 0.5,
            {"preset": preset, "c_n": diag.c_n, "epsilon": diag.epsilon,
             "epsilon_chain": list(diag.epsilon_chain)},
            variant=preset,
        ))
        if cfg.ladder_depth >= 8:
            d4, d8 = diag.d_cumulative[4], diag.d_cumulative[8]
            stable = abs(d8 - d4) <= 0.10 * max(d4, 1e-12)
            outcomes.append(_outcome(
                "ladder_hessian_sum_stable", stable,
                {"preset": preset, "d_4": d4, "d_8": d8}, variant=preset,
            ))
    series = {
        "ladder_norms": (
            ["preset", "horizon", "level", "phi_norm", "ratio", "c_k", "d_k"], rows,
        )
    }
    return outcomes, series


def _suite_lemma2(cfg: ExperimentConfig):
    drift = cfg.drift()
    box = cfg.ladder_box(cfg.horizon)
    lad = zvonkin.build_ladder(drift, cfg.depth, box, _ladder_mode(drift),
                               probes=cfg.probes, seed=cfg.seed, time_quad=cfg.time_quad)
    c_n, d_n = lad.contraction_constants()
    sim = sde.SimConfig(drift, box, box.horizon / cfg.steps, cfg.n_paths, cfg.seed,
                        cfg.depth, tuple(cfg.moment_orders))
    sep = cfg.separations[0]
    x0 = np.asarray(cfg.start, dtype=np.float64)
    e0 = np.zeros(cfg.dimension)
    e0[0] = 1.0
    b1, b2 = sde.simulate_coupled(sim, x0 - 0.5 * sep * e0, x0 + 0.5 * sep * e0,
                                  workers=cfg.workers)
    t1 = sde.transformed_process(b1, lad)
    t2 = sde.transformed_process(b2, lad)
    sig_mag = np.sqrt(np.einsum("nmij,nmij->nm", t1.sigma, t1.sigma))
    sig_max = float(max(sig_mag.max(), np.sqrt(np.einsum("nmij,nmij->nm", t2.sigma, t2.sigma)).max()))
    dx = np.linalg.norm(b1.paths - b2.paths, axis=2)
    dy = np.linalg.norm(t1.y - t2.y, axis=2)
    ok_mask = dx > 0
    lo_viol = int((dy[ok_mask] < 0.5 * dx[ok_mask] - 1e-12).sum())
    hi_viol = int((dy[ok_mask] > 1.5 * dx[ok_mask] + 1e-12).sum())
    ratio_min = float((dy[ok_mask] / dx[ok_mask]).min())
    ratio_max = float((dy[ok_mask] / dx[ok_mask]).max())
    outcomes = [
        _outcome("coupling_shared_noise",
                 b1.increments_checksum() == b2.increments_checksum(),
                 {"checksum": b1.increments_checksum()}),
        _outcome("transform_gradient_bounded", sig_max <= 0.5,
                 {"sup_sigma": sig_max, "c_n": c_n, "d_n": d_n, "depth": cfg.depth}),
        _outcome("transform_gap_comparability", lo_viol == 0 and hi_viol == 0,
                 {"low_violations": lo_viol, "high_violations": hi_viol,
                  "ratio_min": ratio_min, "ratio_max": ratio_max,
                  "samples": int(ok_mask.sum()), "paths": cfg.n_paths}),
    ]
    series = {
        "gap_ratio_quantiles": (
            ["quantile", "dy_over_dx"],
            [[q, float(np.quantile(dy[ok_mask] / dx[ok_mask], q))]
             for q in (0.0, 0.01, 0.5, 0.99, 1.0)],
        )
    }
    return outcomes, series


def _suite_lemma3(cfg: ExperimentConfig):
    drift = cfg.drift()
    box = cfg.ladder_box(cfg.horizon)
    depth_needed = max(cfg.decay_depths) + 1
    lad = zvonkin.build_ladder(drift, depth_needed, box, _ladder_mode(drift),
                               probes=cfg.probes, seed=cfg.seed, time_quad=cfg.time_quad)
    sim = sde.SimConfig(drift, box, box.horizon / cfg.steps, cfg.aux_paths, cfg.seed,
                        None, tuple(cfg.moment_orders))
    sep = cfg.separations[0]
    e0 = np.zeros(cfg.dimension)
    e0[0] = 1.0
    x0 = np.asarray(cfg.start, dtype=np.float64)
    reports, ratio = sde.drift_difference_decay(
        sim, x0 - 0.5 * sep * e0, x0 + 0.5 * sep * e0, lad, cfg.decay_depths,
        p=cfg.moment_orders[0], workers=cfg.workers,
    )
    outcomes = [
        _outcome("coupled_drift_difference_decay", ratio <= 0.75,
                 {"fitted_ratio": ratio, "bound": 0.75,
                  "depths": list(cfg.decay_depths),
                  "values": [r.estimate for r in reports]}),
    ]
    series = {
        "drift_difference_decay": (
            ["depth", "estimate", "std_error"],
            [[n, r.estimate, r.std_error] for n, r in zip(cfg.decay_depths, reports)],
        )
    }
    return outcomes, series


def _suite_lemma4(cfg: ExperimentConfig):
    # uniformity across depths is claimed in the contraction regime; run well
    # inside it (short horizon, moderate amplitude) so depth-dependence sits
    # below the Monte Carlo resolution
    if cfg.preset != "zero":
        drift = make_drift(cfg.preset, cfg.dimension,
                           {**cfg.preset_params, "amplitude": cfg.uniformity_amplitude})
    else:
        drift = cfg.drift()
    box = cfg.ladder_box(cfg.uniformity_horizon)
    max_depth = max(cfg.depth_list)
    lad = zvonkin.build_ladder(drift, max_depth, box, _ladder_mode(drift),
                               probes=cfg.probes, seed=cfg.seed, time_quad=cfg.time_quad)
    sim = sde.SimConfig(drift, box, box.horizon / cfg.steps, cfg.aux_paths, cfg.seed,
                        None, tuple(cfg.moment_orders))
    sep = cfg.separations[0]
    e0 = np.zeros(cfg.dimension)
    e0[0] = 1.0
    x0 = np.asarray(cfg.start, dtype=np.float64)
    b1, b2 = sde.simulate_coupled(sim, x0 - 0.5 * sep * e0, x0 + 0.5 * sep * e0,
                                  workers=cfg.workers)
    p = cfg.moment_orders[-1]
    k_values = tuple(dict.fromkeys((1.0, sim.ito_constant(p))))
    per_depth: dict[float, list] = {k: [] for k in k_values}
    rows = []
    for n in cfg.depth_list:
        t1 = sde.transformed_process(b1, lad, n)
        t2 = sde.transformed_process(b2, lad, n)
        _, reps = sde.a_process(t1, t2, p=p, k_values=k_values)
        for k, rep in zip(k_values, reps):
            per_depth[k].append(rep)
            rows.append([n, k, rep.estimate, rep.std_error])
    outcomes = []
    for k in k_values:
        reps = per_depth[k]
        worst_gap = 0.0
        worst_tol = math.inf
        ok = True
        for i in range(len(reps)):
            for j in range(i + 1, len(reps)):
                gap = abs(reps[i].estimate - reps[j].estimate)
                tol = 3.0 * math.hypot(reps[i].std_error, reps[j].std_error)
                if gap > tol:
                    ok = False
                if gap - tol > worst_gap - worst_tol:
                    worst_gap, worst_tol = gap, tol
        outcomes.append(_outcome(
            "exp_moment_uniform_in_depth", ok,
            {"k": k, "depths": list(cfg.depth_list),
             "estimates": [r.estimate for r in reps],
             "std_errors": [r.std_error for r in reps],
             "worst_gap": worst_gap, "worst_tolerance": worst_tol},
            variant=f"k={k:g}",
        ))
    series = {"a_process_moments": (["depth", "k", "estimate", "std_error"], rows)}
    return outcomes, series


def _suite_prop_estimate(cfg: ExperimentConfig):
    drift = cfg.drift()
    box = cfg.box()
    sim = sde.SimConfig(drift, box, box.horizon / cfg.steps, cfg.n_paths, cfg.seed,
                        None, tuple(cfg.moment_orders))
    e0 = np.zeros(cfg.dimension)
    e0[0] = 1.0
    x0 = np.asarray(cfg.start, dtype=np.float64)
    pairs = [(x0 - 0.5 * s * e0, x0 + 0.5 * s * e0) for s in cfg.separations]
    outcomes = []
    rows = []
    for p in cfg.moment_orders:
        rep = sde.holder_moment_estimate(sim, pairs, p, workers=cfg.workers)
        outcomes.append(_outcome("sup_moment_ratio_bounded", rep.passed,
                                 rep.details | {"p": p}, variant=f"p={p:g}"))
        for s, r, se in zip(rep.details["separations"], rep.details["ratios"],
                            rep.details["ratio_ses"]):
            rows.append([p, s, r, se])
    stab = sde.moment_stability(
        sde.SimConfig(drift, box, box.horizon / cfg.steps, cfg.n_paths, cfg.seed,
                      None, (2.0, 4.0, 8.0)),
        x0, workers=cfg.workers)
    outcomes.append(_outcome(
        "terminal_moments_stable", all(r.passed for r in stab),
        {"orders": [r.details["p"] for r in stab],
         "estimates": [r.estimate for r in stab]},
    ))
    mon = sde.drift_integrability_monitor(
        sde.SimConfig(drift, box, box.horizon / cfg.steps, cfg.aux_paths, cfg.seed),
        x0, workers=cfg.workers)
    outcomes.append(_outcome("drift_energy_tail_small", mon.passed,
                             {"tail_fraction": mon.estimate,
                              "threshold": mon.details["threshold"]}))
    series = {"sup_moment_ratios": (["p", "separation", "ratio", "ratio_se"], rows)}
    return outcomes, series


def _khasminskii_fixture(cfg: ExperimentConfig, target_alpha: float):
    """Constant field for alpha = 0.5; a scaled bump for other targets."""
    box = cfg.box()
    if target_alpha == 0.5:
        c = target_alpha / box.horizon

        class ConstField:
            time_independent = True

            def __call__(self, t, x):
                return np.full(x.shape[0], c)

        return ConstField(), "constant"

    from .heat import smoothed_time_integral

    class BumpField:
        time_independent = True
        amplitude = 1.0

        def __call__(self, t, x):
            r2 = np.einsum("ij,ij->i", x, x)
            return self.amplitude * np.exp(-r2 / (2.0 * 0.5**2))

    f = BumpField()
    slab = smoothed_time_integral(f, box, 0.0, box.horizon, time_quad=cfg.time_quad)
    base = float(np.sqrt(np.einsum("...c,...c->...", slab, slab)).max())
    f.amplitude = target_alpha / base  # alpha scales linearly with amplitude
    return f, "bump"


def _suite_appendix(cfg: ExperimentConfig):
    drift = cfg.drift()
    box = cfg.box()
    outcomes = []
    # exponential-functional bound fixtures
    sim_small = sde.SimConfig(drift, box, box.horizon / cfg.steps, cfg.aux_paths,
                              cfg.seed, None, tuple(cfg.moment_orders))
    probe_pts = [list(p) for p in cfg.probe_points]
    for target in cfg.khasminskii_alphas:
        f, kind = _khasminskii_fixture(cfg, target)
        rep = gs.khasminskii_check(f, sim_small, probe_pts, time_quad=cfg.time_quad,
                                   workers=cfg.workers)
        outcomes.append(_outcome("khasminskii_bound", rep.passed,
                                 {"fixture": kind, "target_alpha": target,
                                  "alpha": rep.details["alpha"],
                                  "estimate": rep.estimate, "se": rep.std_error,
                                  "bound": rep.details["bound"]},
                                 variant=kind))
    # change-of-measure agreement
    sim_g = sde.SimConfig(drift, box, box.horizon / cfg.steps, cfg.girsanov_paths,
                          cfg.seed, None, tuple(cfg.moment_orders))
    x0 = np.asarray(cfg.start, dtype=np.float64)
    mean_w = None
    for name, fn in gs.standard_functionals(threshold=cfg.functional_threshold).items():
        direct, weighted, ok = gs.two_estimator_check(fn, drift, x0, sim_g,
                                                      workers=cfg.workers)
        mean_w = (weighted.details["mean_weight"], weighted.details["mean_weight_se"])
        outcomes.append(_outcome(
            "weighted_direct_agreement", ok,
            {"functional": name, "direct": direct.estimate, "direct_se": direct.std_error,
             "weighted": weighted.estimate, "weighted_se": weighted.std_error,
             "ess": weighted.details["ess"]},
            variant=name,
        ))
    outcomes.append(_outcome(
        "weight_normalization",
        abs(mean_w[0] - 1.0) <= 3.0 * mean_w[1],
        {"mean_weight": mean_w[0], "se": mean_w[1]},
    ))
    # kernel window exponents
    krows = []
    for p_prime, q_prime in cfg.kernel_exponents:
        windows = [(0.0, w) for w in sorted(cfg.kernel_windows, reverse=True)]
        wbox = box.with_horizon(max(cfg.kernel_windows), 9)

        class IndicatorField:
            time_independent = True

            def __call__(self, t, x):
                return (np.abs(x) <= 0.5).all(axis=1).astype(float)

        kb = gs.kernel_bound_estimate(IndicatorField(), p_prime, q_prime, windows,
                                      probe_pts, wbox, time_quad=cfg.time_quad)
        outcomes.append(_outcome(
            "kernel_window_exponent", kb.exponent_ok,
            {"p_prime": p_prime, "q_prime": q_prime, "beta": kb.beta,
             "fitted_exponent": kb.fitted_exponent,
             "fitted_constant": kb.fitted_constant},
            variant=f"p{p_prime:g}q{q_prime:g}",
        ))
        for (s, t), v in zip(kb.windows, kb.sup_values):
            krows.append([p_prime, q_prime, t - s, v])
    # exponential moments of the corpus drift
    reps = gs.exp_moment_check(drift, (2.0,), sim_small, x0, workers=cfg.workers)
    outcomes.append(_outcome(
        "exp_moment_stability", all(r.passed for r in reps),
        {"quantities": [r.quantity for r in reps],
         "estimates": [r.estimate for r in reps]},
    ))
    # squared-field admissibility arithmetic for the whole corpus
    details = {}
    all_ok = True
    for name in PRESET_NAMES:
        spec = preset_spec(name)
        val = cfg.dimension / (spec.p / 2.0) + 2.0 / (spec.q / 2.0)
        details[name] = val
        all_ok = all_ok and val < 2.0
    outcomes.append(_outcome("squared_field_window_admissible", all_ok, details))
    series = {"kernel_windows": (["p_prime", "q_prime", "window", "sup_value"], krows)}
    return outcomes, series


_SUITES = {
    "heat-constants": _suite_heat_constants,
    "lemma1": _suite_lemma1,
    "lemma2": _suite_lemma2,
    "lemma3": _suite_lemma3,
    "lemma4": _suite_lemma4,
    "prop-estimate": _suite_prop_estimate,
    "appendix": _suite_appendix,
}


def run_suite(name: str, cfg: ExperimentConfig | None = None,
              out_dir=None) -> SuiteResult:
    """Execute one named suite and (optionally) write its artifacts:
    report.jsonl, series/*.csv, config.lock and meta.json."""
    if name not in _SUITES:
        raise KeyError(f"unknown suite {name!r}; known: {sorted(_SUITES)}")
    cfg = cfg or ExperimentConfig()
    started = time.perf_counter()
    outcomes, series = _SUITES[name](cfg)
    wall = time.perf_counter() - started
    result = SuiteResult(
        suite=name,
        outcomes=tuple(outcomes),
        fingerprint=cfg.fingerprint(),
        wall_time=wall,
        series=series,
    )
    target = out_dir or cfg.out_dir
    if target is not None:
        write_suite_artifacts(result, cfg, target)
    return result


def write_suite_artifacts(result: SuiteResult, cfg: ExperimentConfig, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = out / "report.jsonl"
    with report.open("w") as fh:
        for o in result.outcomes:
            fh.write(o.to_json_line() + "\n")
    (out / "config.lock").write_text(cfg.canonical_json() + "\n")
    (out / "meta.json").write_text(json.dumps(
        {"suite": result.suite, "fingerprint": result.fingerprint,
         "wall_time_s": result.wall_time}, indent=2) + "\n")
    if result.series:
        series_dir = out / "series"
        series_dir.mkdir(exist_ok=True)
        for sname, (header, rows) in result.series.items():
            with (series_dir / f"{sname}.csv").open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                for row in rows:
                    w.writerow([_jsonable(v) for v in row])
    return out


def corpus_list(d: int = 1) -> list[dict]:
    from .corpus import registry_dump

    return registry_dump(d)
