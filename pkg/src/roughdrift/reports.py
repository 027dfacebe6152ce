"""Monte Carlo estimate records: point estimate, standard error, and the
inequality the estimate is checked against."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class EstimateReport:
    quantity: str
    estimate: float
    std_error: float
    n_samples: int
    inequality: str
    passed: bool | None = None  # None = report-only, no assertion attached
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "quantity": self.quantity,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "inequality": self.inequality,
            "passed": self.passed,
        }
        out.update({k: v for k, v in sorted(self.details.items())})
        return out


def mean_report(samples: np.ndarray, quantity: str, inequality: str,
                passed: bool | None = None, **details) -> EstimateReport:
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.size
    est = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimateReport(quantity, est, se, n, inequality, passed, dict(details))


def combined_se(*errors: float) -> float:
    return math.sqrt(sum(e * e for e in errors))
