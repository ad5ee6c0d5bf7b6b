"""Common result container for the analysis battery."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass
class StatResult:
    """One test's output: estimate, statistic, df, p, optional effect size.

    `df` is a scalar for t-tests and a (df1, df2) pair for F-tests; Welch
    dfs are fractional. `flags` carries documented caveats (boundary fits,
    zero-variance limits, exact fits) rather than silent corrections.
    """

    kind: str
    estimate: float
    statistic: float
    df: Union[float, tuple[float, float]]
    p_value: float
    sides: int
    effect_size: Optional[float] = None
    term: Optional[str] = None
    flags: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value out of range: {self.p_value}")
        dfs = self.df if isinstance(self.df, tuple) else (self.df,)
        if any(d <= 0 for d in dfs):
            raise ValueError(f"df must be positive: {self.df}")
        if self.sides not in (1, 2):
            raise ValueError("sides must be 1 or 2")

    def flagged(self, name: str) -> bool:
        return name in self.flags
