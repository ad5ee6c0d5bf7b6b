"""Paired one-sided and Welch two-sided t-tests with Cohen's d."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .results import StatResult
from .special import t_sf


def paired_t_one_sided(x: Sequence[float], y: Sequence[float]) -> StatResult:
    """One-sided paired t-test on d = x - y (alternative: mean(d) > 0).

    Cohen's d = mean(d)/sd(d), which equals t/sqrt(n). All-zero differences
    give the null convention t=0, p=0.5; zero variance with a nonzero mean
    is the degenerate limit p -> 0, flagged rather than erroring.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("paired samples must be 1-d and equal length")
    n = x.size
    if n < 2:
        raise ValueError("paired t-test needs n >= 2")
    d = x - y
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return StatResult(
                kind="paired_t", estimate=0.0, statistic=0.0, df=float(df),
                p_value=0.5, sides=1, effect_size=0.0, flags=("all_differences_zero",),
            )
        t = math.inf if mean > 0 else -math.inf
        return StatResult(
            kind="paired_t", estimate=mean, statistic=t, df=float(df),
            p_value=0.0 if mean > 0 else 1.0, sides=1,
            effect_size=math.copysign(math.inf, mean), flags=("zero_variance",),
        )
    t = mean / (sd / math.sqrt(n))
    effect = mean / sd
    return StatResult(
        kind="paired_t", estimate=mean, statistic=t, df=float(df),
        p_value=t_sf(t, df), sides=1, effect_size=effect,
        extra={"n": n, "sd_diff": sd},
    )


def welch_t_two_sided(a: Sequence[float], b: Sequence[float]) -> StatResult:
    """Welch's unequal-variance t-test with Satterthwaite fractional df."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or a.size < 2 or b.size < 2:
        raise ValueError("welch t-test needs two 1-d samples with n >= 2")
    na, nb = a.size, b.size
    va = float(a.var(ddof=1))
    vb = float(b.var(ddof=1))
    diff = float(a.mean() - b.mean())
    sa2, sb2 = va / na, vb / nb
    if sa2 + sb2 == 0.0:
        # both samples constant: t=0 convention when means agree
        if diff == 0.0:
            return StatResult(
                kind="welch_t", estimate=0.0, statistic=0.0, df=float(na + nb - 2),
                p_value=1.0, sides=2, flags=("zero_variance",),
            )
        t = math.copysign(math.inf, diff)
        return StatResult(
            kind="welch_t", estimate=diff, statistic=t, df=float(na + nb - 2),
            p_value=0.0, sides=2, flags=("zero_variance",),
        )
    t = diff / math.sqrt(sa2 + sb2)
    df = (sa2 + sb2) ** 2 / (sa2**2 / (na - 1) + sb2**2 / (nb - 1))
    p = 2.0 * t_sf(abs(t), df)
    # pooled-SD standardized mean difference as the conventional effect size
    pooled = math.sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2))
    effect = diff / pooled if pooled > 0 else None
    return StatResult(
        kind="welch_t", estimate=diff, statistic=t, df=df, p_value=min(p, 1.0),
        sides=2, effect_size=effect, extra={"n_a": na, "n_b": nb},
    )
