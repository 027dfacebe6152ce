"""Command-line harness.

Exit codes: 0 = all asserted checks passed, 2 = at least one assertion
failed, 1 = execution error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import girsanov as gs
from . import sde, zvonkin
from .corpus import registry_dump
from .gridio import write_grid_field
from .heat import solve_backward_heat, sup_gradient
from .suites import SUITE_NAMES, ExperimentConfig, run_suite, _jsonable


def _load_config(path, seed, workers, out) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(path) if path else ExperimentConfig()
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if workers is not None:
        updates["workers"] = workers
    if out is not None:
        updates["out_dir"] = str(out)
    if updates:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **updates})
    return cfg


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True),
                      default=None, help="Experiment config file (YAML or JSON).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override the RNG seed.")(fn)
    fn = click.option("--workers", type=int, default=None,
                      help="Cap on internal parallelism (results are identical at any value).")(fn)
    fn = click.option("--out", type=click.Path(), default=None, help="Output directory.")(fn)
    return fn


def _emit_lines(reports, out):
    lines = [json.dumps(_jsonable(r.to_json()), sort_keys=True) for r in reports]
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "report.jsonl").write_text(text)
    click.echo(text, nl=False)


def _functional_csv(rows, out):
    path = Path(out) / "functionals.csv"
    with path.open("w") as fh:
        fh.write("path,functional,value\n")
        for idx, name, value in rows:
            fh.write(f"{idx},{name},{value!r}\n")


@click.group()
def cli():
    """Desk-scale numerics for SDEs with integrable drift."""


@cli.command("corpus")
@click.option("--dimension", type=int, default=1, show_default=True)
def corpus_cmd(dimension):
    """Dump the drift preset registry with subcriticality margins."""
    click.echo(json.dumps(_jsonable(registry_dump(dimension)), indent=2, sort_keys=True))


@cli.command("heat-solve")
@_common_options
@click.option("--preset", default=None, help="Drift preset used as forcing.")
@click.option("--damping", type=float, default=0.0, show_default=True)
@click.option("--emit-fields/--no-emit-fields", default=True, show_default=True)
def heat_solve_cmd(config_path, seed, workers, out, preset, damping, emit_fields):
    """Solve the backward heat equation for a corpus forcing; write the
    solution fields in the binary grid format plus a JSON summary."""
    cfg = _load_config(config_path, seed, workers, out)
    drift = cfg.drift(preset)
    box = cfg.heat_box(max(cfg.decay_horizons))
    sol = solve_backward_heat(drift, box, damping, time_quad=cfg.time_quad)
    p, q = sol.forcing_norm.p, sol.forcing_norm.q
    from .fields import lqp_norm

    summary = {
        "T": box.horizon,
        "lambda": damping,
        "grad_const": (sup_gradient(sol) / sol.forcing_norm.value
                       if sol.forcing_norm.value > 0 else 0.0),
        "hess_const": (lqp_norm(sol.hessian, p, q, box).value / sol.forcing_norm.value
                       if sol.forcing_norm.value > 0 else 0.0),
        "forcing_norm": sol.forcing_norm.value,
    }
    target = Path(cfg.out_dir or "heat-solve-out")
    target.mkdir(parents=True, exist_ok=True)
    if emit_fields:
        write_grid_field(sol.u, target / "u.grid")
        write_grid_field(sol.grad, target / "grad.grid")
        if sol.hessian is not None:
            write_grid_field(sol.hessian, target / "hessian.grid")
    (target / "summary.json").write_text(json.dumps(_jsonable(summary), sort_keys=True) + "\n")
    click.echo(json.dumps(_jsonable(summary), sort_keys=True))


@cli.command("zvonkin")
@_common_options
@click.option("--preset", default=None)
@click.option("--depth", type=int, default=None)
@click.option("--emit-fields/--no-emit-fields", default=False, show_default=True)
def zvonkin_cmd(config_path, seed, workers, out, preset, depth, emit_fields):
    """Build the regularization ladder and report contraction diagnostics."""
    cfg = _load_config(config_path, seed, workers, out)
    drift = cfg.drift(preset)
    depth = cfg.ladder_depth if depth is None else depth
    mode = "holder" if drift.holder_mode else "lqp"
    ladder = zvonkin.build_ladder(drift, depth, cfg.ladder_box(), mode,
                                  probes=cfg.probes, seed=cfg.seed,
                                  time_quad=cfg.time_quad)
    report = zvonkin.contraction_report(ladder, cfg.ladder_horizons,
                                        probes=cfg.probes, seed=cfg.seed,
                                        time_quad=cfg.time_quad)
    payload = {
        "mode": report.mode,
        "depth": report.depth,
        "bracket_horizon": report.bracket_horizon,
        "per_horizon": [
            {
                "horizon": d.horizon,
                "phi_norms": list(d.phi_norms),
                "grad_sups": list(d.grad_sups),
                "hess_norms": list(d.hess_norms),
                "c_n": d.c_n,
                "d_n": d.d_n,
                "ratios": list(d.ratios),
                "epsilon": d.epsilon,
                "epsilon_chain": list(d.epsilon_chain),
            }
            for d in report.per_horizon
        ],
    }
    if cfg.out_dir:
        target = Path(cfg.out_dir)
        target.mkdir(parents=True, exist_ok=True)
        (target / "contraction.json").write_text(
            json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
        if emit_fields:
            for lv in ladder.levels:
                write_grid_field(lv.phi, target / f"phi_{lv.index}.grid")
    click.echo(json.dumps(_jsonable(payload), sort_keys=True))


@cli.command("simulate")
@_common_options
@click.option("--preset", default=None)
@click.option("--paths", "n_paths", type=int, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--moments", default=None, help="Comma-separated moment orders.")
@click.option("--functionals-csv/--no-functionals-csv", default=False, show_default=True)
def simulate_cmd(config_path, seed, workers, out, preset, n_paths, steps, moments,
                 functionals_csv):
    """Euler batch from one start: moment and integrability reports."""
    cfg = _load_config(config_path, seed, workers, out)
    drift = cfg.drift(preset)
    box = cfg.box()
    orders = (tuple(float(v) for v in moments.split(",")) if moments
              else tuple(cfg.moment_orders))
    sim = sde.SimConfig(drift, box, box.horizon / (steps or cfg.steps),
                        n_paths or cfg.n_paths, cfg.seed, None, orders)
    x0 = np.asarray(cfg.start, dtype=np.float64)
    reports = sde.moment_stability(sim, x0, workers=cfg.workers)
    reports.append(sde.drift_integrability_monitor(sim, x0, workers=cfg.workers))
    if functionals_csv and cfg.out_dir:
        batch = sde.simulate(sim, x0, workers=cfg.workers)
        rows = [(i, "drift_square_integral", v)
                for i, v in enumerate(batch.drift_square_integral)]
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        _functional_csv(rows, cfg.out_dir)
    _emit_lines(reports, cfg.out_dir)
    sys.exit(2 if any(r.passed is False for r in reports) else 0)


@cli.command("couple")
@_common_options
@click.option("--preset", default=None)
@click.option("--paths", "n_paths", type=int, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--order", "p", type=float, default=2.0, show_default=True)
@click.option("--functionals-csv/--no-functionals-csv", default=False, show_default=True)
def couple_cmd(config_path, seed, workers, out, preset, n_paths, steps, p,
               functionals_csv):
    """Coupled two-start batches: sup-distance moment ratio reports."""
    cfg = _load_config(config_path, seed, workers, out)
    drift = cfg.drift(preset)
    box = cfg.box()
    sim = sde.SimConfig(drift, box, box.horizon / (steps or cfg.steps),
                        n_paths or cfg.n_paths, cfg.seed, None, (max(p, 2.0),))
    e0 = np.zeros(cfg.dimension)
    e0[0] = 1.0
    x0 = np.asarray(cfg.start, dtype=np.float64)
    pairs = [(x0 - 0.5 * s * e0, x0 + 0.5 * s * e0) for s in cfg.separations]
    rep = sde.holder_moment_estimate(sim, pairs, p, workers=cfg.workers)
    if functionals_csv and cfg.out_dir:
        b1, _ = sde.simulate_coupled(sim, *pairs[0], workers=cfg.workers)
        rows = [(i, "sup_distance", v) for i, v in enumerate(b1.sup_distance_to_partner)]
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        _functional_csv(rows, cfg.out_dir)
    _emit_lines([rep], cfg.out_dir)
    sys.exit(2 if rep.passed is False else 0)


@cli.command("girsanov-check")
@_common_options
@click.option("--preset", default=None)
@click.option("--paths", "n_paths", type=int, default=None)
def girsanov_cmd(config_path, seed, workers, out, preset, n_paths):
    """Direct vs weighted estimates for the standard functionals."""
    cfg = _load_config(config_path, seed, workers, out)
    drift = cfg.drift(preset)
    box = cfg.box()
    sim = sde.SimConfig(drift, box, box.horizon / cfg.steps,
                        n_paths or cfg.girsanov_paths, cfg.seed, None,
                        tuple(cfg.moment_orders))
    x0 = np.asarray(cfg.start, dtype=np.float64)
    lines = []
    failed = False
    for name, fn in gs.standard_functionals(threshold=cfg.functional_threshold).items():
        direct, weighted, ok = gs.two_estimator_check(fn, drift, x0, sim,
                                                      workers=cfg.workers)
        failed = failed or not ok
        lines.append({
            "check": f"weighted_direct_agreement[{name}]",
            "estimate": weighted.estimate,
            "se": weighted.std_error,
            "bound": direct.estimate,
            "pass": ok,
        })
    text = "\n".join(json.dumps(_jsonable(l), sort_keys=True) for l in lines) + "\n"
    if cfg.out_dir:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out_dir) / "report.jsonl").write_text(text)
    click.echo(text, nl=False)
    sys.exit(2 if failed else 0)


@cli.command("khasminskii")
@_common_options
@click.option("--alpha", type=float, default=0.5, show_default=True,
              help="Target expected-functional level of the fixture.")
def khasminskii_cmd(config_path, seed, workers, out, alpha):
    """Exponential-moment bound for an additive Brownian functional."""
    from .suites import _khasminskii_fixture

    cfg = _load_config(config_path, seed, workers, out)
    f, kind = _khasminskii_fixture(cfg, alpha)
    drift = cfg.drift()
    box = cfg.box()
    sim = sde.SimConfig(drift, box, box.horizon / cfg.steps, cfg.aux_paths,
                        cfg.seed, None, tuple(cfg.moment_orders))
    rep = gs.khasminskii_check(f, sim, [list(pt) for pt in cfg.probe_points],
                               time_quad=cfg.time_quad, workers=cfg.workers)
    line = {
        "check": f"khasminskii_bound[{kind}]",
        "estimate": rep.estimate,
        "se": rep.std_error,
        "bound": rep.details["bound"],
        "pass": rep.passed,
    }
    text = json.dumps(_jsonable(line), sort_keys=True) + "\n"
    if cfg.out_dir:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out_dir) / "report.jsonl").write_text(text)
    click.echo(text, nl=False)
    sys.exit(2 if rep.passed is False else 0)


@cli.command("kernel-bound")
@_common_options
@click.option("--p-prime", type=float, default=4.0, show_default=True)
@click.option("--q-prime", type=float, default=4.0, show_default=True)
def kernel_bound_cmd(config_path, seed, workers, out, p_prime, q_prime):
    """Window-exponent fit for exact Gaussian smoothing of a rough field."""
    cfg = _load_config(config_path, seed, workers, out)
    box = cfg.box().with_horizon(max(cfg.kernel_windows), 9)

    class IndicatorField:
        time_independent = True

        def __call__(self, t, x):
            return (np.abs(x) <= 0.5).all(axis=1).astype(float)

    windows = [(0.0, w) for w in sorted(cfg.kernel_windows, reverse=True)]
    kb = gs.kernel_bound_estimate(IndicatorField(), p_prime, q_prime, windows,
                                  [list(pt) for pt in cfg.probe_points], box,
                                  time_quad=cfg.time_quad)
    line = {
        "check": f"kernel_window_exponent[p{p_prime:g}q{q_prime:g}]",
        "estimate": kb.fitted_exponent,
        "se": 0.0,
        "bound": kb.beta - 0.1,
        "pass": kb.exponent_ok,
    }
    text = json.dumps(_jsonable(line), sort_keys=True) + "\n"
    if cfg.out_dir:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out_dir) / "report.jsonl").write_text(text)
    click.echo(text, nl=False)
    sys.exit(2 if kb.exponent_ok is False else 0)


@cli.command("suite")
@_common_options
@click.option("--name", type=click.Choice(SUITE_NAMES), required=True)
def suite_cmd(config_path, seed, workers, out, name):
    """Run one verification suite and write its artifact directory."""
    cfg = _load_config(config_path, seed, workers, out)
    result = run_suite(name, cfg, out_dir=cfg.out_dir)
    for o in result.outcomes:
        click.echo(f"{o.status:6s} {o.check}")
    click.echo(f"suite={name} checks={len(result.outcomes)} "
               f"failed={sum(o.status == 'fail' for o in result.outcomes)} "
               f"fingerprint={result.fingerprint[:12]}")
    sys.exit(2 if result.failed else 0)


def main(argv=None):
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except (click.UsageError, click.ClickException) as err:
        err.show()
        sys.exit(1)
    except click.exceptions.Abort:  # pragma: no cover
        sys.exit(1)
    sys.exit(rv or 0)


if __name__ == "__main__":
    main()
