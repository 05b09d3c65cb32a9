"""Confidence intervals for Monte Carlo error counts."""

import math
from typing import Tuple

from scipy import stats


def wilson_interval(errors: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    if not 0 <= errors <= trials:
        raise ValueError(f"errors ({errors}) must lie in 0..trials ({trials})")
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    low = 0.0 if errors == 0 else max(0.0, center - half)
    high = 1.0 if errors == trials else min(1.0, center + half)
    return low, high


def relative_halfwidth(errors: int, trials: int, confidence: float = 0.95) -> float:
    """Wilson half-width divided by the point estimate (inf with no errors)."""
    if errors == 0 or trials == 0:
        return math.inf
    low, high = wilson_interval(errors, trials, confidence)
    return (high - low) / 2.0 / (errors / trials)


def binomial_sigma(p: float, trials: int) -> float:
    """Standard deviation of an error-rate estimate over `trials` bits."""
    return math.sqrt(p * (1.0 - p) / trials)


def mean_interval(total: float, total_sq: float, count: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Normal-approximation interval for a sample mean given its running sums."""
    if count <= 0:
        return math.nan, math.nan
    mean = total / count
    if count == 1:
        return mean, mean
    var = max(total_sq / count - mean * mean, 0.0) * count / (count - 1)
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    half = z * math.sqrt(var / count)
    return mean - half, mean + half
