"""Reusable aggregators that turn raw per-address histories into features.

All aggregators are pure functions. A feature that cannot be computed from
the available data (empty group, single transaction, zero span) returns the
explicit marker MISSING (None), never NaN, so downstream imputation can tell
"absent" apart from "zero".
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Optional, Sequence

import numpy as np
from scipy import stats

MISSING = None

FeatureValue = Optional[float]

TWO_DAYS = 172_800  # seconds per sleepiness bucket


def first_significant_digit(x) -> int:
    """Leading nonzero decimal digit of a positive number.

    Exact for (big) integers; floats go through repr, which preserves the
    leading digit for every finite positive value.
    """
    if x <= 0:
        raise ValueError(f"first significant digit undefined for {x!r}")
    if isinstance(x, int):
        return int(str(x)[0])
    for ch in repr(float(x)):
        if ch in "123456789":
            return int(ch)
        if ch == "e":  # pragma: no cover - unreachable for positive finite x
            break
    raise ValueError(f"no significant digit in {x!r}")


def benford_p_value(values: Sequence) -> FeatureValue:
    """Pearson chi-squared p-value of first-digit counts against Benford.

    Zeros (and negatives) carry no first significant digit and are skipped.
    The p-value is the chi-squared(8) upper tail at the test statistic; no
    minimum-expected-count guard is applied because the result is consumed
    as a behavioral feature, not as a hypothesis test.
    """
    digits = [first_significant_digit(v) for v in values if v > 0]
    n = len(digits)
    if n == 0:
        return MISSING
    observed = Counter(digits)
    chi2 = 0.0
    for d in range(1, 10):
        expected = n * math.log10(1 + 1 / d)
        chi2 += (observed.get(d, 0) - expected) ** 2 / expected
    return float(stats.chi2.sf(chi2, df=8))


def _is_round(v: int) -> bool:
    s = str(v)
    return len(s) <= 7 or set(s[7:]) == {"0"}


def trade_value_clustering(values: Sequence[int]) -> FeatureValue:
    """Fraction of positive values that are "round".

    A value is round when every decimal digit after its 7th significant
    digit is zero; values with at most 7 significant digits are round.
    """
    positive = [v for v in values if v > 0]
    if not positive:
        return MISSING
    return sum(_is_round(v) for v in positive) / len(positive)


def gap_based_sleepiness(timestamps: Sequence[int]) -> FeatureValue:
    """Mean over two-day buckets of the largest within-bucket activity gap.

    Timestamps (sorted ascending) are bucketed by floor(t / 172800); each
    bucket with at least two timestamps contributes its maximum consecutive
    delta, and the result is the mean of those maxima. With no qualifying
    bucket the value is MISSING.
    """
    buckets: dict[int, list[int]] = {}
    for t in timestamps:
        buckets.setdefault(t // TWO_DAYS, []).append(t)
    maxima = [max(b - a for a, b in zip(ts, ts[1:]))
              for ts in buckets.values() if len(ts) >= 2]
    if not maxima:
        return MISSING
    return float(np.mean(maxima))


def numerical_stats(values: Sequence) -> tuple[FeatureValue, ...]:
    """(mean, mode, std, min, max, q95) of a numeric sample.

    Population standard deviation; mode ties break toward the smallest
    value; q95 by linear interpolation at rank 0.95*(n-1). Empty input
    yields six MISSING values.
    """
    if len(values) == 0:
        return (MISSING,) * 6
    arr = np.array([float(v) for v in values])
    counts = Counter(values)
    top = max(counts.values())
    mode = float(min(v for v, c in counts.items() if c == top))
    return (float(arr.mean()), mode, float(arr.std()),
            float(arr.min()), float(arr.max()), float(np.quantile(arr, 0.95)))


NUMERICAL_STAT_NAMES = ("mean", "mode", "std", "min", "max", "q95")


def _entropy(counts: Sequence[int]) -> float:
    n = sum(counts)
    return -sum((c / n) * math.log(c / n) for c in counts if c > 0) + 0.0


def categorical_stats(values: Sequence, domain: Sequence) -> dict[str, FeatureValue]:
    """Entropy, per-class share, and mode of a categorical sample.

    The share vector spans the whole fixed `domain` (absent classes get 0);
    mode ties break by domain order. Empty input yields MISSING everywhere.
    A value outside the domain is a caller bug and raises ValueError.
    """
    counts = Counter(values)
    unknown = set(counts) - set(domain)
    if unknown:
        raise ValueError(f"values outside domain {tuple(domain)}: {sorted(unknown)}")
    out: dict[str, FeatureValue] = {}
    n = len(values)
    if n == 0:
        out["entropy"] = MISSING
        for cls in domain:
            out[f"share_{cls}"] = MISSING
        out["mode"] = MISSING
        return out
    out["entropy"] = _entropy(list(counts.values()))
    for cls in domain:
        out[f"share_{cls}"] = counts.get(cls, 0) / n
    top = max(counts.values())
    out["mode"] = float(next(cls for cls in domain if counts.get(cls, 0) == top))
    return out


def hour_of_day_entropy(timestamps: Sequence[int]) -> FeatureValue:
    """Natural-log entropy of the hour-of-day distribution of timestamps."""
    if len(timestamps) == 0:
        return MISSING
    hours = Counter((t // 3600) % 24 for t in timestamps)
    return _entropy(list(hours.values()))
