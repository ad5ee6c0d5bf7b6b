"""Percentile bootstrap for scalar statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

STATISTICS: dict[str, Callable[[np.ndarray], float]] = {
    "median": lambda a: float(np.median(a)),
    "mean": lambda a: float(np.mean(a)),
    "std": lambda a: float(np.std(a, ddof=1)) if a.size > 1 else 0.0,
}


@dataclass
class BootstrapResult:
    statistic: str
    point: float
    ci_low: float
    ci_high: float
    n_resamples: int
    seed: int
    resample_mean: float
    resample_sd: float
    resample_median: float

    @property
    def ci(self) -> tuple[float, float]:
        return (self.ci_low, self.ci_high)


def bootstrap_stat(
    data: Sequence[float],
    statistic: Union[str, Callable[[np.ndarray], float]] = "median",
    n_resamples: int = 500,
    seed: int = 0,
    ci_level: float = 0.95,
) -> BootstrapResult:
    """Resample with replacement at the original size; percentile CI.

    Deterministic under `seed`. `statistic` is a registered name or any
    callable mapping an array to a scalar.
    """
    values = np.asarray(data, dtype=float)
    if values.ndim != 1 or values.size < 1:
        raise ValueError("bootstrap needs a non-empty 1-d sample")
    if n_resamples < 1:
        raise ValueError("n_resamples must be positive")
    if isinstance(statistic, str):
        name = statistic
        try:
            func = STATISTICS[statistic]
        except KeyError:
            raise ValueError(f"unknown statistic {statistic!r}; have {sorted(STATISTICS)}")
    else:
        name, func = getattr(statistic, "__name__", "custom"), statistic

    rng = np.random.default_rng(seed)
    n = values.size
    stats = np.empty(n_resamples)
    for i in range(n_resamples):
        stats[i] = func(values[rng.integers(0, n, size=n)])
    alpha = (1.0 - ci_level) / 2.0
    lo, hi = np.quantile(stats, [alpha, 1.0 - alpha])
    return BootstrapResult(
        statistic=name,
        point=func(values),
        ci_low=float(lo),
        ci_high=float(hi),
        n_resamples=n_resamples,
        seed=seed,
        resample_mean=float(stats.mean()),
        resample_sd=float(stats.std(ddof=1)) if n_resamples > 1 else 0.0,
        resample_median=float(np.median(stats)),
    )
