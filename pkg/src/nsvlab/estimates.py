"""Monte Carlo estimates with standard errors, plus uniformity diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

TWO_PI = 2.0 * np.pi


@dataclass
class EstimateWithError:
    """A sample mean, its standard error, and the sample count behind it."""

    value: float
    std_error: float
    n: int

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "EstimateWithError":
        x = np.asarray(samples, dtype=float).ravel()
        n = x.size
        if n == 0:
            raise ValueError("no samples")
        se = float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return cls(float(np.mean(x)), se, n)

    def within(self, target: float, n_se: float, atol: float = 0.0) -> bool:
        return abs(self.value - target) <= n_se * self.std_error + atol

    def combined_se(self, other: "EstimateWithError") -> float:
        return float(np.hypot(self.std_error, other.std_error))

    def __str__(self) -> str:
        return f"{self.value:.6g} +/- {self.std_error:.2g} (n={self.n})"


def ks_uniform_statistic(samples: np.ndarray, width: float = TWO_PI) -> float:
    """Kolmogorov-Smirnov distance of samples to Uniform[0, width)."""
    x = np.asarray(samples, dtype=float).ravel() / width
    return float(stats.kstest(x, "uniform").statistic)


def ks_critical_value(n: int, significance: float = 0.05) -> float:
    """Asymptotic one-sample KS critical value c(alpha)/sqrt(n)."""
    c = np.sqrt(-0.5 * np.log(significance / 2.0))
    return float(c / np.sqrt(n))
