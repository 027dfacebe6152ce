import json

import numpy as np
import pytest

from roughdrift.corpus import (
    PRESET_NAMES,
    load_corpus_file,
    make_drift,
    preset_spec,
    registry_dump,
    regularization_schedule,
)
from roughdrift.fields import prodi_serrin_check


def test_registry_has_at_least_five_presets():
    dump = registry_dump(1)
    assert len(dump) >= 5
    assert {e["name"] for e in dump} == set(PRESET_NAMES)


def test_every_preset_subcritical_or_holder():
    for entry in registry_dump(1):
        assert entry["subcritical"] or entry["holder_mode"]


def test_truncated_radial_margin():
    spec = preset_spec("truncated_radial")
    assert spec.params["beta"] == 0.3
    ok, margin = prodi_serrin_check(spec.p, spec.q, 1)
    assert ok and margin > 0.4


def test_zero_preset_evaluates_to_zero():
    z = make_drift("zero", 2)
    v = z.evaluate(0.1, np.array([[0.3, -0.2], [0.0, 0.0]]))
    assert np.array_equal(v, np.zeros((2, 2)))


def test_overrides_flow_through():
    d = make_drift("gaussian_bump", 1, {"amplitude": 2.0, "width": 0.5})
    v = d.evaluate(0.0, np.array([[0.0]]))
    assert v[0, 0] == pytest.approx(2.0)


def test_unknown_preset_and_param_rejected():
    with pytest.raises(KeyError):
        make_drift("vortex", 1)
    with pytest.raises(KeyError):
        make_drift("gaussian_bump", 1, {"frequency": 3.0})


def test_holder_kink_is_bounded_compact_and_rough():
    d = make_drift("holder_kink", 1)
    xs = np.linspace(-3, 3, 301)[:, None]
    v = d.evaluate(0.0, xs)[:, 0]
    assert np.abs(v).max() <= 1.0 + 1e-12
    assert v[0] == 0.0 and v[-1] == 0.0
    # increments near the center scale like |x|^alpha, not |x|
    h = 1e-6
    inc = abs(d.evaluate(0.0, np.array([[h]]))[0, 0] - d.evaluate(0.0, np.array([[0.0]]))[0, 0])
    assert inc == pytest.approx(h**0.5 / 1.5**0.5, rel=1e-3)


def test_mollified_radial_is_finite_at_origin():
    d = make_drift("truncated_radial", 1)
    v = d.evaluate(0.0, np.array([[0.0], [1e-12]]))
    assert np.isfinite(v).all()


def test_corpus_file_yaml_and_json(tmp_path):
    y = tmp_path / "corpus.yaml"
    y.write_text("truncated_radial:\n  beta: 0.2\n  amplitude: 0.8\nzero:\n")
    specs = load_corpus_file(y)
    assert specs["truncated_radial"].params["beta"] == 0.2
    assert specs["truncated_radial"].params["amplitude"] == 0.8
    assert "zero" in specs

    j = tmp_path / "corpus.json"
    j.write_text(json.dumps({"gaussian_bump": {"width": 0.7, "p": 9, "q": 20}}))
    specs = load_corpus_file(j)
    assert specs["gaussian_bump"].params["width"] == 0.7
    assert specs["gaussian_bump"].p == 9.0


def test_corpus_file_must_be_mapping(tmp_path):
    f = tmp_path / "corpus.yaml"
    f.write_text("- a\n- b\n")
    with pytest.raises(ValueError):
        load_corpus_file(f)


def test_regularization_schedule_scaling():
    d1, m1 = regularization_schedule(0.01)
    d2, m2 = regularization_schedule(0.04)
    assert d2 / d1 == pytest.approx(2.0)       # delta ~ sqrt(h)
    assert m1 / m2 == pytest.approx(4.0**0.25)  # cap ~ h^(-1/4)
