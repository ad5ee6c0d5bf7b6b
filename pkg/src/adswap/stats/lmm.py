"""Random-intercept linear mixed model fitted by profiled restricted likelihood.

The only random effect is one intercept per group, so the covariance is
block diagonal with blocks sigma2_e * (I + theta * J), theta = sigma2_b /
sigma2_e. For fixed theta both the GLS fixed effects and sigma2_e have
closed forms, leaving a one-dimensional profiled objective

    L(theta) = (n - p) * ln RSS_W(theta) + sum_i ln(1 + n_i * theta) + ln det A(theta)

with W_i = I - theta/(1 + n_i*theta) * J and A = sum_i X_i' W_i X_i, which a
coarse log grid plus golden-section refinement minimizes. Term tests are
Wald F statistics against residual df = n - p, a documented approximation
that is flagged in every result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .design import DesignMatrix
from .results import StatResult
from .special import f_sf

THETA_GRID = (0.0,) + tuple(np.logspace(-8.0, 6.0, 57))
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
RESIDUAL_DF_FLAG = "residual_df_approximation"


@dataclass
class LmmResult:
    coefficients: np.ndarray
    columns: list[str]
    sigma2_b: float
    sigma2_e: float
    theta: float
    reml_objective: float
    df_resid: int
    term_tests: dict[str, StatResult]
    profile: tuple[tuple[float, float], ...] = field(repr=False, default=())
    flags: tuple[str, ...] = ()

    def coef(self, column: str) -> float:
        return float(self.coefficients[self.columns.index(column)])


class _Blocks:
    """Per-group sufficient statistics; every theta evaluation is O(g * p^2)."""

    def __init__(self, X: np.ndarray, y: np.ndarray, groups: Sequence):
        order: dict[object, int] = {}
        for g in groups:
            order.setdefault(g, len(order))
        self.g = len(order)
        n, p = X.shape
        self.n, self.p = n, p
        self.sizes = np.zeros(self.g)
        self.sxx = np.zeros((self.g, p, p))
        self.sxy = np.zeros((self.g, p))
        self.syy = np.zeros(self.g)
        self.u = np.zeros((self.g, p))   # column sums of X within group
        self.v = np.zeros(self.g)        # sum of y within group
        for row, g in enumerate(groups):
            i = order[g]
            x = X[row]
            self.sizes[i] += 1
            self.sxx[i] += np.outer(x, x)
            self.sxy[i] += x * y[row]
            self.syy[i] += y[row] * y[row]
            self.u[i] += x
            self.v[i] += y[row]

    def gls(self, theta: float) -> tuple[np.ndarray, float, float]:
        """Returns (beta, weighted RSS, ln det A) at this variance ratio."""
        c = theta / (1.0 + self.sizes * theta)          # per-group shrinkage
        A = self.sxx.sum(axis=0) - np.einsum("g,gi,gj->ij", c, self.u, self.u)
        rhs = self.sxy.sum(axis=0) - (c * self.v) @ self.u
        ywy = float(self.syy.sum() - np.dot(c, self.v**2))
        beta = np.linalg.solve(A, rhs)
        rss = ywy - float(beta @ rhs)
        sign, logdet = np.linalg.slogdet(A)
        if sign <= 0:
            raise np.linalg.LinAlgError("X'WX not positive definite")
        return beta, max(rss, 0.0), logdet

    def objective(self, theta: float) -> float:
        _beta, rss, logdet = self.gls(theta)
        if rss <= 0.0:
            # exact interpolation: REML degenerates; steer the search away
            return math.inf
        penalty = float(np.log1p(self.sizes * theta).sum())
        return (self.n - self.p) * math.log(rss) + penalty + logdet


def _golden_minimize(f, lo: float, hi: float, iters: int = 80) -> float:
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
        if b - a <= 1e-12 * max(1.0, abs(a) + abs(b)):
            break
    return (a + b) / 2.0


def fit_lmm_random_intercept(
    design: DesignMatrix,
    y: Sequence[float],
    groups: Sequence,
) -> LmmResult:
    X = design.X
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,) or len(groups) != n:
        raise ValueError("X, y, groups must agree in length")
    unique = set(groups)
    if len(unique) < 2:
        raise ValueError("need at least 2 groups for a random intercept")
    counts: dict[object, int] = {}
    for g in groups:
        counts[g] = counts.get(g, 0) + 1
    if max(counts.values()) < 2:
        raise ValueError("need at least one group with 2+ observations")
    if n <= p:
        raise ValueError(f"need n > p (n={n}, p={p})")

    blocks = _Blocks(X, y, groups)
    profile = tuple((theta, blocks.objective(theta)) for theta in THETA_GRID)
    best_idx = min(range(len(profile)), key=lambda i: profile[i][1])

    # Refine around the best grid point; the bracket neighbors keep the
    # minimum interior unless it sits on a boundary of the grid itself.
    lo = THETA_GRID[best_idx - 1] if best_idx > 0 else 0.0
    hi = THETA_GRID[best_idx + 1] if best_idx + 1 < len(THETA_GRID) else THETA_GRID[-1]
    flags: list[str] = [RESIDUAL_DF_FLAG]
    if best_idx == len(THETA_GRID) - 1:
        flags.append("boundary_theta_max")
    theta = _golden_minimize(blocks.objective, lo, hi)
    candidates = [theta, THETA_GRID[best_idx]]
    if best_idx == 0:
        candidates.append(0.0)
    theta = min(candidates, key=blocks.objective)
    if theta == 0.0:
        flags.append("boundary_theta_zero")

    beta, rss, _logdet = blocks.gls(theta)
    df_resid = n - p
    sigma2_e = rss / df_resid
    sigma2_b = theta * sigma2_e
    objective = blocks.objective(theta)

    # Wald tests: Cov(beta) = sigma2_e * A(theta)^{-1}
    c = theta / (1.0 + blocks.sizes * theta)
    A = blocks.sxx.sum(axis=0) - np.einsum("g,gi,gj->ij", c, blocks.u, blocks.u)
    cov = sigma2_e * np.linalg.inv(A)
    term_tests: dict[str, StatResult] = {}
    for term in design.term_names():
        cols = design.terms[term]
        q = len(cols)
        b_t = beta[cols]
        cov_t = cov[np.ix_(cols, cols)]
        f_stat = float(b_t @ np.linalg.solve(cov_t, b_t)) / q
        f_stat = max(f_stat, 0.0)
        term_tests[term] = StatResult(
            kind="lmm_term_f", estimate=float(np.mean(b_t)), statistic=f_stat,
            df=(float(q), float(df_resid)), p_value=f_sf(f_stat, q, df_resid),
            sides=1, term=term, flags=(RESIDUAL_DF_FLAG,),
        )

    return LmmResult(
        coefficients=beta, columns=list(design.columns), sigma2_b=sigma2_b,
        sigma2_e=sigma2_e, theta=theta, reml_objective=objective,
        df_resid=df_resid, term_tests=term_tests, profile=profile,
        flags=tuple(flags),
    )
