"""Analysis battery: descriptive metrics, t-tests, OLS/ANOVA, random-intercept
mixed model, bootstrap, percent change. All inference runs on hand-built tail
probabilities (see special)."""

from .bootstrap import BootstrapResult, bootstrap_stat
from .design import DesignMatrix, build_design_matrix, collapse_race
from .lmm import LmmResult, fit_lmm_random_intercept
from .metrics import (
    AdMetrics,
    MetricDiff,
    PercentChangeResult,
    compute_ad_metrics,
    metric_diffs,
    percent_change,
)
from .ols import OlsResult, RankError, fit_ols_anova
from .results import StatResult
from .special import betainc, chi2_sf, f_sf, gammainc_lower, gammainc_upper, ln_gamma, t_sf
from .ttests import paired_t_one_sided, welch_t_two_sided

__all__ = [
    "AdMetrics",
    "BootstrapResult",
    "DesignMatrix",
    "LmmResult",
    "MetricDiff",
    "OlsResult",
    "PercentChangeResult",
    "RankError",
    "StatResult",
    "betainc",
    "bootstrap_stat",
    "build_design_matrix",
    "chi2_sf",
    "collapse_race",
    "compute_ad_metrics",
    "f_sf",
    "fit_lmm_random_intercept",
    "fit_ols_anova",
    "gammainc_lower",
    "gammainc_upper",
    "ln_gamma",
    "metric_diffs",
    "paired_t_one_sided",
    "percent_change",
    "t_sf",
    "welch_t_two_sided",
]
