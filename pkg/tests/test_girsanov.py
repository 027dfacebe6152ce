import math

import numpy as np
import pytest

from roughdrift.corpus import PRESET_NAMES, make_drift, preset_spec
from roughdrift.fields import DriftField, SpaceTimeBox
from roughdrift.girsanov import (
    brownian_batch,
    exp_moment_check,
    girsanov_expectation,
    girsanov_weight,
    kernel_bound_estimate,
    kernel_window_beta,
    khasminskii_check,
    standard_functionals,
    two_estimator_check,
)
from roughdrift.sde import SimConfig

from conftest import ScalarField, make_const_drift


@pytest.fixture(scope="module")
def g_box():
    return SpaceTimeBox(1, 0.25, ((-4.0, 4.0),), (160,), 41)


def cfg_for(drift, box, n_paths=4000, steps=64, seed=17):
    return SimConfig(drift, box, box.horizon / steps, n_paths, seed)


class TestWeights:
    def test_zero_drift_unit_weights(self, g_box):
        drift = make_drift("zero", 1)
        cfg = cfg_for(drift, g_box, n_paths=200)
        batch = brownian_batch(cfg, [0.1])
        gw = girsanov_weight(drift, batch)
        assert np.array_equal(gw.weights(), np.ones(200))
        rep = gw.normalization_report()
        assert rep.estimate == 1.0
        assert rep.passed

    def test_martingale_normalization_per_corpus_drift(self, g_box):
        for name in PRESET_NAMES:
            drift = make_drift(name, 1)
            cfg = cfg_for(drift, g_box, n_paths=4000, seed=23)
            gw = girsanov_weight(drift, brownian_batch(cfg, [0.0]))
            rep = gw.normalization_report()
            assert rep.passed, (name, rep.estimate, rep.std_error)

    def test_brownian_batch_reuses_increment_streams(self, g_box):
        from roughdrift.sde import simulate

        drift = make_drift("gaussian_bump", 1)
        cfg = cfg_for(drift, g_box, n_paths=32)
        direct = simulate(cfg, [0.0])
        brown = brownian_batch(cfg, [0.0])
        assert np.array_equal(direct.increments, brown.increments)


class TestGirsanovExpectation:
    def test_zero_drift_equals_plain_mean(self, g_box):
        drift = make_drift("zero", 1)
        cfg = cfg_for(drift, g_box, n_paths=500)
        fn = standard_functionals()["running_sup"]
        rep = girsanov_expectation(fn, drift, [0.0], cfg)
        plain = fn(brownian_batch(cfg, [0.0]))
        assert rep.estimate == pytest.approx(plain.mean(), rel=1e-14)
        assert rep.details["ess"] == pytest.approx(cfg.n_paths)

    def test_constant_drift_terminal_mean(self, g_box):
        # E[X_T] = x + c T, reachable by both estimators
        c, x0 = 0.8, 0.1
        drift = make_const_drift(c)
        cfg = cfg_for(drift, g_box, n_paths=20000)
        target = x0 + c * g_box.horizon

        def terminal(batch):
            return batch.paths[:, -1, 0]

        rep = girsanov_expectation(terminal, drift, [x0], cfg)
        assert abs(rep.estimate - target) < 3.5 * rep.std_error
        direct, weighted, ok = two_estimator_check(terminal, drift, [x0], cfg)
        assert ok
        assert abs(direct.estimate - target) < 3.5 * direct.std_error

    def test_two_estimator_agreement_for_corpus_drift(self, g_box):
        drift = make_drift("gaussian_bump", 1)
        cfg = cfg_for(drift, g_box, n_paths=8000)
        for name, fn in standard_functionals().items():
            direct, weighted, ok = two_estimator_check(fn, drift, [0.0], cfg)
            assert ok, (name, direct.estimate, weighted.estimate)
            assert weighted.details["novikov_stable"]
            assert not weighted.details["weight_degenerate"]

    def test_functional_shape_validated(self, g_box):
        drift = make_drift("zero", 1)
        cfg = cfg_for(drift, g_box, n_paths=16)
        with pytest.raises(ValueError, match="shape"):
            girsanov_expectation(lambda b: np.zeros(3), drift, [0.0], cfg)


class TestKhasminskii:
    def test_constant_half_alpha(self, g_box):
        # alpha = c T = 1/2 exactly; the additive functional is deterministic
        # so the estimate is e^{1/2}, under the bound 1/(1 - alpha) = 2
        c = 0.5 / g_box.horizon
        f = ScalarField(lambda t, x: np.full(x.shape[0], c))
        cfg = cfg_for(make_drift("gaussian_bump", 1), g_box, n_paths=400)
        rep = khasminskii_check(f, cfg, [[0.0], [1.0]])
        assert rep.details["alpha"] == pytest.approx(0.5, abs=1e-12)
        assert rep.estimate == pytest.approx(math.exp(0.5), rel=1e-12)
        assert rep.details["bound"] == pytest.approx(2.0)
        assert rep.passed

    def test_zero_field(self, g_box):
        f = ScalarField(lambda t, x: np.zeros(x.shape[0]))
        cfg = cfg_for(make_drift("zero", 1), g_box, n_paths=100)
        rep = khasminskii_check(f, cfg, [[0.0]])
        assert rep.details["alpha"] == 0.0
        assert rep.estimate == 1.0
        assert rep.passed

    def test_bump_near_point_eight(self, g_box):
        target = 0.8
        base = ScalarField(lambda t, x: np.exp(-x[:, 0] ** 2 / (2 * 0.5**2)))
        from roughdrift.heat import smoothed_time_integral

        slab = smoothed_time_integral(base, g_box, 0.0, g_box.horizon)
        amp = target / float(slab.max())
        f = ScalarField(lambda t, x: amp * np.exp(-x[:, 0] ** 2 / (2 * 0.5**2)))
        cfg = cfg_for(make_drift("gaussian_bump", 1), g_box, n_paths=4000)
        rep = khasminskii_check(f, cfg, [[0.0], [0.5], [1.0]])
        assert rep.details["alpha"] == pytest.approx(target, abs=1e-9)
        assert rep.passed  # estimate <= 5 + 3 se

    def test_supercritical_alpha_reports_only(self, g_box):
        c = 1.2 / g_box.horizon
        f = ScalarField(lambda t, x: np.full(x.shape[0], c))
        cfg = cfg_for(make_drift("zero", 1), g_box, n_paths=100)
        rep = khasminskii_check(f, cfg, [[0.0]])
        assert rep.passed is None
        assert rep.details["bound"] == math.inf

    def test_negative_field_rejected(self, g_box):
        f = ScalarField(lambda t, x: -np.ones(x.shape[0]))
        cfg = cfg_for(make_drift("zero", 1), g_box, n_paths=10)
        with pytest.raises(ValueError, match="nonnegative"):
            khasminskii_check(f, cfg, [[0.0]])


class TestKernelBound:
    def test_beta_arithmetic(self):
        # 2 beta = 2 - 2/q' - d/p'
        assert kernel_window_beta(4.0, 4.0, 1) == pytest.approx(0.625)
        assert kernel_window_beta(2.0, 2.0, 1) == pytest.approx(0.25)
        assert kernel_window_beta(4.0, 4.0, 2) == pytest.approx(0.5)

    def test_beta_positive_iff_condition(self):
        assert kernel_window_beta(1.0, 1.0, 1) < 0.0  # d/p' + 2/q' = 3 >= 2
        assert kernel_window_beta(1.01, 4.0, 1) > 0.0

    def test_constant_field_exact_window(self):
        box = SpaceTimeBox(1, 0.4, ((-2.0, 2.0),), (64,), 9)
        f = ScalarField(lambda t, x: np.ones(x.shape[0]))
        kb = kernel_bound_estimate(f, 4.0, 4.0, [(0.0, 0.4), (0.0, 0.2), (0.0, 0.1)],
                                   [[0.0]], box)
        for (s, t), v in zip(kb.windows, kb.sup_values):
            assert v == pytest.approx(t - s, rel=1e-12)
        assert kb.fitted_exponent == pytest.approx(1.0, abs=1e-9)
        assert kb.exponent_ok

    def test_indicator_fixture_exponent(self):
        box = SpaceTimeBox(1, 0.4, ((-4.0, 4.0),), (256,), 9)
        f = ScalarField(lambda t, x: (np.abs(x[:, 0]) <= 0.5).astype(float))
        windows = [(0.0, w) for w in (0.4, 0.2, 0.1, 0.05)]
        kb = kernel_bound_estimate(f, 4.0, 4.0, windows, [[0.0], [0.5], [1.0]], box)
        assert kb.beta == pytest.approx(0.625)
        assert kb.fitted_exponent >= 0.525
        assert kb.exponent_ok

    def test_invalid_exponents_rejected(self, g_box):
        f = ScalarField(lambda t, x: np.ones(x.shape[0]))
        with pytest.raises(ValueError, match="violates"):
            kernel_bound_estimate(f, 1.0, 1.0, [(0.0, 0.1)], [[0.0]], g_box)

    def test_sup_monotone_in_probes(self):
        box = SpaceTimeBox(1, 0.4, ((-4.0, 4.0),), (128,), 9)
        f = ScalarField(lambda t, x: (np.abs(x[:, 0]) <= 0.5).astype(float))
        probes = [[0.0], [0.3], [0.8], [2.0]]
        sups = []
        for n in range(1, len(probes) + 1):
            kb = kernel_bound_estimate(f, 4.0, 4.0, [(0.0, 0.2), (0.0, 0.1)],
                                       probes[:n], box)
            sups.append(kb.sup_values[0])
        assert all(a <= b + 1e-15 for a, b in zip(sups, sups[1:] + [sups[-1]]))

    def test_single_window_rejected(self, g_box):
        f = ScalarField(lambda t, x: np.ones(x.shape[0]))
        with pytest.raises(ValueError, match="ladder"):
            kernel_bound_estimate(f, 4.0, 4.0, [(0.0, 0.1)], [[0.0]], g_box)


class TestExpMoments:
    def test_zero_field_all_unit(self, g_box):
        drift = make_drift("zero", 1)
        cfg = cfg_for(drift, g_box, n_paths=200)
        reps = exp_moment_check(drift, (2.0, -1.0), cfg, [0.0])
        for rep in reps:
            assert rep.estimate == 1.0
            assert rep.passed

    def test_constant_field_closed_form(self, g_box):
        # int |c|^2 ds = c^2 T is deterministic
        c = 0.6
        drift = make_const_drift(c)
        cfg = cfg_for(drift, g_box, n_paths=300)
        reps = exp_moment_check(drift, (2.0,), cfg, [0.0])
        drift_sq = [r for r in reps if r.quantity.startswith("exp_moment_drift_square")][0]
        assert drift_sq.estimate == pytest.approx(
            math.exp(2.0 * c**2 * g_box.horizon), rel=1e-12)

    def test_corpus_drift_stable_under_doubling(self, g_box):
        drift = make_drift("gaussian_bump", 1)
        cfg = cfg_for(drift, g_box, n_paths=8000)
        reps = exp_moment_check(drift, (2.0, -1.0), cfg, [0.0])
        assert len(reps) == 5  # two k values + three weight moments
        assert all(r.passed for r in reps)

    def test_subcriticality_gate(self, g_box):
        bad = DriftField(lambda t, x: np.zeros_like(x), 1, 2.0, 2.0,
                         support_radius=1.0)
        cfg = cfg_for(make_drift("zero", 1), g_box, n_paths=10)
        with pytest.raises(ValueError, match="subcriticality"):
            exp_moment_check(bad, (1.0,), cfg, [0.0])


def test_squared_exponents_admissible_for_corpus():
    # (p, q) subcritical implies (p/2, q/2) satisfies the window condition
    for name in PRESET_NAMES:
        spec = preset_spec(name)
        assert 1.0 / (spec.p / 2) + 2.0 / (spec.q / 2) < 2.0
        assert kernel_window_beta(spec.p / 2, spec.q / 2, 1) > 0.0
