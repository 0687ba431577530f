"""Small statistics helpers: binomial intervals, means with standard errors."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class Estimate:
    """Point estimate with standard error and a two-sided interval."""

    value: float
    stderr: float
    lo: float
    hi: float
    n: int

    def upper(self, sigmas: float = 3.0) -> float:
        return self.value + sigmas * self.stderr

    def lower(self, sigmas: float = 3.0) -> float:
        return self.value - sigmas * self.stderr

    def to_dict(self) -> dict:
        return asdict(self)


def wilson_interval(successes: int, n: int, z: float = 3.0) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("n must be positive")
    phat = successes / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def binomial_estimate(successes: int, n: int, z: float = 3.0) -> Estimate:
    """Proportion with binomial standard error and a Wilson interval."""
    phat = successes / n
    lo, hi = wilson_interval(successes, n, z)
    return Estimate(phat, float(np.sqrt(phat * (1 - phat) / n)), lo, hi, n)


def mean_estimate(samples: np.ndarray, z: float = 3.0) -> Estimate:
    x = np.asarray(samples, dtype=float)
    m = float(x.mean())
    se = float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0
    return Estimate(m, se, m - z * se, m + z * se, len(x))


def loglinear_slope(t: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log(y) against t."""
    return float(sps.linregress(np.asarray(t, float), np.log(np.asarray(y, float))).slope)
