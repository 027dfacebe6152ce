"""Registry of named drift presets and the config-file loader.

Every preset carries explicit regularization parameters (cap, mollification
scale) and a declared effective support radius; nothing is regularized
silently.  Config files (YAML or JSON) map preset names to parameter
overrides, e.g.::

    truncated_radial:
      beta: 0.2
      cap: 30.0
      amplitude: 0.8
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .fields import DriftField, prodi_serrin_check

PRESET_NAMES = ("zero", "gaussian_bump", "indicator_box", "holder_kink", "truncated_radial")


@dataclass(frozen=True)
class PresetSpec:
    """A preset's default parameters plus declared function-space data."""

    name: str
    params: dict
    p: float
    q: float
    holder_alpha: float | None = None

    def margin(self, d: int) -> float:
        return prodi_serrin_check(self.p, self.q, d)[1]


_DEFAULTS = {
    "zero": PresetSpec("zero", {}, p=7.0, q=15.0),
    "gaussian_bump": PresetSpec(
        "gaussian_bump", {"amplitude": 1.0, "width": 0.6}, p=7.0, q=15.0, holder_alpha=0.5
    ),
    "indicator_box": PresetSpec(
        "indicator_box", {"amplitude": 1.0, "radius": 1.0}, p=7.0, q=15.0
    ),
    "holder_kink": PresetSpec(
        "holder_kink", {"amplitude": 1.0, "radius": 1.5, "alpha": 0.5},
        p=7.0, q=15.0, holder_alpha=0.5,
    ),
    "truncated_radial": PresetSpec(
        "truncated_radial",
        {"beta": 0.3, "radius": 1.0, "amplitude": 1.0, "cap": 25.0, "delta": 0.05},
        p=7.0, q=15.0,
    ),
}


def _zero(d: int, spec: PresetSpec) -> DriftField:
    def fn(t, x):
        return np.zeros_like(x)

    return DriftField(fn, d, spec.p, spec.q, support_radius=1.0, name="zero",
                      holder_alpha=spec.holder_alpha)


def _gaussian_bump(d: int, spec: PresetSpec) -> DriftField:
    amp = float(spec.params["amplitude"])
    width = float(spec.params["width"])
    direction = np.ones(d) / math.sqrt(d)

    def fn(t, x):
        r2 = np.einsum("ij,ij->i", x, x)
        return amp * np.exp(-r2 / (2.0 * width**2))[:, None] * direction

    # 8 widths: tail magnitude exp(-32) is far below quadrature tolerances
    return DriftField(fn, d, spec.p, spec.q, support_radius=8.0 * width,
                      holder_alpha=spec.holder_alpha, name="gaussian_bump")


def _indicator_box(d: int, spec: PresetSpec) -> DriftField:
    amp = float(spec.params["amplitude"])
    radius = float(spec.params["radius"])
    direction = np.zeros(d)
    direction[0] = 1.0

    def fn(t, x):
        inside = (np.abs(x) <= radius).all(axis=1)
        return amp * inside[:, None] * direction

    return DriftField(fn, d, spec.p, spec.q,
                      support_radius=radius * math.sqrt(d) + 1e-9, name="indicator_box")


def _holder_kink(d: int, spec: PresetSpec) -> DriftField:
    amp = float(spec.params["amplitude"])
    radius = float(spec.params["radius"])
    alpha = float(spec.params["alpha"])
    direction = np.ones(d) / math.sqrt(d)

    def fn(t, x):
        r = np.sqrt(np.einsum("ij,ij->i", x, x))
        profile = np.clip(1.0 - (r / radius) ** alpha, 0.0, None)
        return amp * profile[:, None] * direction

    return DriftField(fn, d, spec.p, spec.q, support_radius=radius,
                      holder_alpha=alpha, name="holder_kink")


def _truncated_radial(d: int, spec: PresetSpec) -> DriftField:
    amp = float(spec.params["amplitude"])
    beta = float(spec.params["beta"])
    radius = float(spec.params["radius"])
    cap = spec.params.get("cap")
    delta = spec.params.get("delta")
    cap = None if cap is None else float(cap)
    delta = None if delta is None else float(delta)

    def fn(t, x):
        r2 = np.einsum("ij,ij->i", x, x)
        if delta is not None:
            r2 = r2 + delta**2
        inside = np.einsum("ij,ij->i", x, x) <= radius**2
        # without a mollification scale the origin evaluates to nan on
        # purpose; the cap policy (or its absence) decides what happens
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = amp * r2 ** (-(beta + 1.0) / 2.0)
            return np.where(inside, scale, 0.0)[:, None] * x

    return DriftField(fn, d, spec.p, spec.q, cap=cap, mollify=delta,
                      support_radius=radius, name="truncated_radial")


_BUILDERS = {
    "zero": _zero,
    "gaussian_bump": _gaussian_bump,
    "indicator_box": _indicator_box,
    "holder_kink": _holder_kink,
    "truncated_radial": _truncated_radial,
}


def preset_spec(name: str, overrides: dict | None = None) -> PresetSpec:
    if name not in _DEFAULTS:
        raise KeyError(f"unknown drift preset {name!r}; known: {sorted(_DEFAULTS)}")
    spec = _DEFAULTS[name]
    if overrides:
        overrides = dict(overrides)
        p = overrides.pop("p", spec.p)
        q = overrides.pop("q", spec.q)
        holder_alpha = overrides.pop("holder_alpha", spec.holder_alpha)
        params = {**spec.params, **overrides}
        unknown = set(params) - set(spec.params)
        if unknown:
            raise KeyError(f"preset {name!r} does not take parameters {sorted(unknown)}")
        spec = PresetSpec(name, params, float(p), float(q), holder_alpha)
    return spec


def make_drift(name: str, d: int, overrides: dict | None = None) -> DriftField:
    spec = preset_spec(name, overrides)
    return _BUILDERS[name](d, spec)


def registry_dump(d: int = 1) -> list[dict]:
    """Names, parameters, declared exponents and subcriticality margins for
    every preset (the `corpus` CLI payload)."""
    out = []
    for name in PRESET_NAMES:
        spec = _DEFAULTS[name]
        ok, margin = prodi_serrin_check(spec.p, spec.q, d)
        out.append(
            {
                "name": name,
                "params": dict(spec.params),
                "p": spec.p,
                "q": spec.q,
                "subcritical": ok,
                "margin": margin,
                "holder_mode": spec.holder_alpha is not None,
                "holder_alpha": spec.holder_alpha,
            }
        )
    return out


def load_corpus_file(path) -> dict[str, PresetSpec]:
    """Parse a corpus config file mapping preset names to overrides."""
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        data = json.loads(text)
    else:
        data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ValueError("corpus config must be a mapping of preset name -> parameters")
    return {name: preset_spec(name, overrides or {}) for name, overrides in data.items()}


def regularization_schedule(h: float, *, delta_coeff: float = 1.0, cap_coeff: float = 1.0) -> tuple[float, float]:
    """Default joint schedule for step-size studies of singular drifts:
    mollification delta ~ sqrt(h), cap ~ h^(-1/4)."""
    return delta_coeff * math.sqrt(h), cap_coeff * h ** (-0.25)
