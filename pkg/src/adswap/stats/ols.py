"""Ordinary least squares with drop-term ANOVA F-tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .design import DesignMatrix
from .results import StatResult
from .special import f_sf


class RankError(ValueError):
    """Design matrix is rank deficient; names the offending columns."""

    def __init__(self, columns: list[str]):
        super().__init__(f"collinear columns: {', '.join(columns)}")
        self.columns = columns


@dataclass
class OlsResult:
    coefficients: np.ndarray
    columns: list[str]
    rss: float
    df_resid: int
    sigma2: float
    term_tests: dict[str, StatResult]
    flags: tuple[str, ...] = ()
    fitted: Optional[np.ndarray] = field(default=None, repr=False)

    def coef(self, column: str) -> float:
        return float(self.coefficients[self.columns.index(column)])


def _qr_solve(X: np.ndarray, y: np.ndarray, columns: Sequence[str]) -> tuple[np.ndarray, float]:
    """Least squares through QR; near-zero R diagonal names collinear columns."""
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    tol = max(X.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    bad = [columns[i] for i in range(len(diag)) if diag[i] <= tol]
    if bad:
        raise RankError(bad)
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    return beta, float(resid @ resid)


def _rss_only(X: np.ndarray, y: np.ndarray) -> float:
    beta, residuals, _rank, _sv = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return float(resid @ resid)


def fit_ols_anova(design: DesignMatrix, y: Sequence[float]) -> OlsResult:
    """Least-squares fit plus per-term F-tests by nested-model RSS reduction.

    For each model term the reduced model drops that term's columns; the
    F statistic compares the RSS increase against the full-model residual
    variance with df2 = n - p_full. An exactly interpolating fit makes
    every denominator zero: the result is flagged and F reported as inf.
    """
    X = design.X
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError(f"y must have {n} entries")
    if n <= p:
        raise ValueError(f"need n > p for residual df (n={n}, p={p})")

    beta, rss_full = _qr_solve(X, y, design.columns)
    df_resid = n - p
    scale = float(y @ y)
    exact = rss_full <= max(scale, 1.0) * 1e-12
    sigma2 = rss_full / df_resid
    flags = ("exact_fit",) if exact else ()

    term_tests: dict[str, StatResult] = {}
    for term in design.term_names():
        cols = design.terms[term]
        df1 = len(cols)
        keep = [j for j in range(p) if j not in cols]
        rss_reduced = _rss_only(X[:, keep], y)
        if exact:
            term_tests[term] = StatResult(
                kind="ols_term_f", estimate=rss_reduced - rss_full, statistic=math.inf,
                df=(float(df1), float(df_resid)), p_value=0.0, sides=1, term=term,
                flags=("exact_fit",),
            )
            continue
        f_stat = ((rss_reduced - rss_full) / df1) / sigma2
        f_stat = max(f_stat, 0.0)  # guard tiny negative from roundoff
        term_tests[term] = StatResult(
            kind="ols_term_f", estimate=rss_reduced - rss_full, statistic=f_stat,
            df=(float(df1), float(df_resid)), p_value=f_sf(f_stat, df1, df_resid),
            sides=1, term=term,
        )

    return OlsResult(
        coefficients=beta, columns=list(design.columns), rss=rss_full,
        df_resid=df_resid, sigma2=sigma2, term_tests=term_tests, flags=flags,
        fitted=X @ beta,
    )
