"""Offline analysis over exported CSV bundles.

A bundle is a directory holding the four export files (ads.csv,
deliveries.csv, surveys.csv, participants.csv). Analyses join them by
participant id, aggregate per-ad measurements to participant means where
the model calls for it, and render a plain-text report in which every
fitted quantity appears with a stable label so reports diff cleanly
across runs.

Metric conventions:
  interest, representativity  Likert 1..7 from per-ad survey answers.
  recognition                 1.0 for a "yes" answer, else 0.0.
  views                       share of a participant's ads with >=1 view.
  clicks                      share of viewed ads that were clicked.

Phase pairing: the midpoint survey and the observational ads describe the
pre-swap week; the final survey and the swap deliveries describe the
post-swap week. Paired comparisons difference pre minus post.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .stats import (
    LmmResult,
    OlsResult,
    PercentChangeResult,
    RankError,
    StatResult,
    build_design_matrix,
    collapse_race,
    compute_ad_metrics,
    fit_lmm_random_intercept,
    fit_ols_anova,
    metric_diffs,
    paired_t_one_sided,
    percent_change,
    welch_t_two_sided,
)

METRICS = ("interest", "representativity", "recognition", "views", "clicks")
MODELS = ("paired", "welch", "ols", "lmm")
SURVEY_METRICS = ("interest", "representativity", "recognition")
DEMOGRAPHIC_FACTORS = ("age", "gender", "race", "education", "income", "region")

BUNDLE_FILES = {
    "ads": "ads.csv",
    "deliveries": "deliveries.csv",
    "surveys": "surveys.csv",
    "participants": "participants.csv",
}


class AnalysisError(Exception):
    pass


@dataclass
class Bundle:
    ads: list[dict]
    deliveries: list[dict]
    surveys: list[dict]
    participants: list[dict]

    def demographics(self) -> dict[str, dict]:
        out = {}
        for row in self.participants:
            out[row["participant_id"]] = {
                "age": row["age"],
                "gender": row["gender"],
                "race": frozenset(row["race"].split("|")) if row["race"] else frozenset(),
                "education": row["education"],
                "income": row["income"],
                "region": row["region"],
            }
        return out


def load_bundle(path) -> Bundle:
    root = Path(path)
    tables = {}
    for key, filename in BUNDLE_FILES.items():
        file_path = root / filename
        if not file_path.exists():
            raise AnalysisError(f"bundle is missing {filename} under {root}")
        with file_path.open(newline="") as handle:
            tables[key] = list(csv.DictReader(handle))
    return Bundle(**tables)


# ---- metric extraction ---------------------------------------------------------------


def _per_ad_value(row: dict, metric: str) -> Optional[float]:
    if metric == "recognition":
        answer = row.get("recognition", "")
        return None if not answer else (1.0 if answer == "yes" else 0.0)
    raw = row.get(metric, "")
    return float(raw) if raw else None


def survey_phase_means(bundle: Bundle, metric: str) -> dict[str, dict[str, float]]:
    """Per-participant mean of a per-ad survey metric, keyed by survey phase."""
    sums: dict[tuple[str, str], list[float]] = {}
    for row in bundle.surveys:
        if row["section"] != "per_ad" or not row["submitted_at"]:
            continue
        value = _per_ad_value(row, metric)
        if value is None:
            continue
        sums.setdefault((row["participant_id"], row["phase"]), []).append(value)
    out: dict[str, dict[str, float]] = {"midpoint": {}, "final": {}}
    for (pid, phase), values in sums.items():
        out.setdefault(phase, {})[pid] = sum(values) / len(values)
    return out


def activity_phase_rates(bundle: Bundle, metric: str) -> dict[str, dict[str, float]]:
    """Per-participant view/click rates: observational from own captured ads,
    intervention from swap deliveries served to them."""
    obs_rows = [
        {
            "participant_id": r["participant_id"],
            "view_count": int(r["view_count"]),
            "click_count": int(r["click_count"]),
        }
        for r in bundle.ads
        if r["phase"] == "observational" and r["redacted"] != "true"
    ]
    swap_rows = [
        {
            "participant_id": r["recipient_id"],
            "view_count": int(r["view_count"]),
            "click_count": int(r["click_count"]),
        }
        for r in bundle.deliveries
    ]
    result: dict[str, dict[str, float]] = {}
    for phase, rows in (("observational", obs_rows), ("intervention", swap_rows)):
        computed = compute_ad_metrics(rows)
        values: dict[str, float] = {}
        for pid, pm in computed.per_participant.items():
            rate = pm.view_rate if metric == "views" else pm.click_rate_among_viewed
            if rate is not None:
                values[pid] = rate
        result[phase] = values
    return result


def phase_values(bundle: Bundle, metric: str) -> tuple[dict[str, float], dict[str, float]]:
    """(pre-swap values, post-swap values) per participant for the metric."""
    if metric in SURVEY_METRICS:
        means = survey_phase_means(bundle, metric)
        return means.get("midpoint", {}), means.get("final", {})
    rates = activity_phase_rates(bundle, metric)
    return rates.get("observational", {}), rates.get("intervention", {})


def per_ad_rows(bundle: Bundle, metric: str) -> list[dict]:
    """One row per per-ad survey answer with covariates for mixed modeling."""
    if metric not in SURVEY_METRICS:
        raise AnalysisError(
            f"model 'lmm' works on per-ad survey metrics ({', '.join(SURVEY_METRICS)}); "
            f"use paired/welch/ols for {metric!r}"
        )
    demo = bundle.demographics()
    rows = []
    for row in bundle.surveys:
        if row["section"] != "per_ad" or not row["submitted_at"]:
            continue
        value = _per_ad_value(row, metric)
        pid = row["participant_id"]
        if value is None or pid not in demo:
            continue
        rows.append(
            {
                "value": value,
                "participant_id": pid,
                "seen_status": row["seen_status"],
                "targeted_user": row["targeted_user"],
                "has_people": row["has_people"],
                "phase": row["phase"],
                **demo[pid],
            }
        )
    return rows


# ---- model runners --------------------------------------------------------------------


@dataclass
class AnalysisReport:
    metric: str
    model: str
    seed: int
    lines: list[str] = field(default_factory=list)
    results: list[StatResult] = field(default_factory=list)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return "%.10g" % value
    if isinstance(value, (tuple, list)):
        return "(" + ", ".join(_fmt(v) for v in value) + ")"
    return str(value)


def _result_lines(result: StatResult) -> list[str]:
    lines = [f"[result] {result.kind}"]
    if result.term:
        lines.append(f"  term: {result.term}")
    lines.append(f"  estimate: {_fmt(result.estimate)}")
    lines.append(f"  statistic: {_fmt(result.statistic)}")
    lines.append(f"  df: {_fmt(result.df)}")
    lines.append(f"  p_value: {_fmt(result.p_value)}")
    lines.append(f"  sides: {result.sides}")
    lines.append(f"  effect_size: {_fmt(result.effect_size)}")
    lines.append(f"  flags: {', '.join(result.flags) if result.flags else 'none'}")
    for key in sorted(result.extra):
        lines.append(f"  extra.{key}: {_fmt(result.extra[key])}")
    return lines


def _percent_change_lines(change: PercentChangeResult) -> list[str]:
    return [
        "[percent_change]",
        f"  mean_percent: {_fmt(change.mean_percent)}",
        f"  participants: {len(change.per_participant)}",
        f"  excluded_zero_baseline: {change.excluded_zero_obs}",
    ]


def _run_paired(bundle: Bundle, metric: str, report: AnalysisReport) -> None:
    pre, post = phase_values(bundle, metric)
    diffs = metric_diffs(metric, pre, post)
    if len(diffs) < 2:
        raise AnalysisError(f"paired model needs >=2 participants with both phases; have {len(diffs)}")
    x = [d.obs_value for d in diffs]
    y = [d.interv_value for d in diffs]
    report.lines.append(f"pairs: {len(diffs)}")
    report.lines.append(f"pre_swap_mean: {_fmt(sum(x) / len(x))}")
    report.lines.append(f"post_swap_mean: {_fmt(sum(y) / len(y))}")
    result = paired_t_one_sided(x, y)
    report.results.append(result)
    report.lines.extend(_result_lines(result))
    report.lines.extend(_percent_change_lines(percent_change(pre, post)))


def _factor_level(demo: dict, factor: str) -> str:
    value = demo[factor]
    if isinstance(value, frozenset):
        return collapse_race(value)
    return str(value)


def _run_welch(bundle: Bundle, metric: str, by: Sequence[str], report: AnalysisReport) -> None:
    if len(by) != 1:
        raise AnalysisError("welch model needs exactly one --by factor")
    factor = by[0]
    if factor not in DEMOGRAPHIC_FACTORS:
        raise AnalysisError(f"unknown factor {factor!r}; have {', '.join(DEMOGRAPHIC_FACTORS)}")
    pre, _post = phase_values(bundle, metric)
    demo = bundle.demographics()
    by_level: dict[str, list[float]] = {}
    for pid, value in pre.items():
        if pid in demo:
            by_level.setdefault(_factor_level(demo[pid], factor), []).append(value)
    if len(by_level) < 2:
        raise AnalysisError(f"factor {factor!r} has fewer than two levels with data")
    ranked = sorted(by_level.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    (level_a, a), (level_b, b) = ranked[0], ranked[1]
    skipped = sum(len(v) for _l, v in ranked[2:])
    if len(a) < 2 or len(b) < 2:
        raise AnalysisError("welch model needs >=2 observations per group")
    report.lines.append(f"factor: {factor}")
    report.lines.append(f"group_a: {level_a} (n={len(a)})")
    report.lines.append(f"group_b: {level_b} (n={len(b)})")
    if skipped:
        report.lines.append(f"observations_in_other_levels: {skipped}")
    result = welch_t_two_sided(a, b)
    report.results.append(result)
    report.lines.extend(_result_lines(result))


def _parse_factors(by: Sequence[str], default: Sequence[str]) -> tuple[list[str], list[tuple[str, str]]]:
    names = list(by) if by else list(default)
    plain, inter = [], []
    for name in names:
        if ":" in name:
            left, _sep, right = name.partition(":")
            inter.append((left, right))
            for part in (left, right):
                if part not in plain:
                    plain.append(part)
        elif name not in plain:
            plain.append(name)
    return plain, inter


def _coefficient_lines(columns: Sequence[str], coefficients) -> list[str]:
    lines = ["[coefficients]"]
    for name, value in zip(columns, coefficients):
        lines.append(f"  {name}: {_fmt(float(value))}")
    return lines


def _reference_lines(design) -> list[str]:
    lines = ["[reference_levels]"]
    for var in sorted(design.reference_levels):
        lines.append(f"  {var}: {design.reference_levels[var]}")
    return lines


def _run_ols(bundle: Bundle, metric: str, by: Sequence[str], report: AnalysisReport) -> None:
    pre, _post = phase_values(bundle, metric)
    demo = bundle.demographics()
    rows, y = [], []
    for pid in sorted(pre):
        if pid in demo:
            rows.append(demo[pid])
            y.append(pre[pid])
    if len(rows) < 3:
        raise AnalysisError(f"ols model needs >=3 participants with data; have {len(rows)}")
    default = list(DEMOGRAPHIC_FACTORS) + ["race:gender"]
    plain, inter = _parse_factors(by, default)
    for name in plain:
        if name not in DEMOGRAPHIC_FACTORS:
            raise AnalysisError(f"unknown factor {name!r}; have {', '.join(DEMOGRAPHIC_FACTORS)}")
    design = build_design_matrix(rows, categorical=plain, interactions=inter)
    try:
        fit: OlsResult = fit_ols_anova(design, y)
    except RankError as exc:
        raise AnalysisError(f"design matrix is rank deficient in columns: {', '.join(exc.columns)}")
    except ValueError as exc:
        raise AnalysisError(str(exc))
    report.lines.append(f"observations: {len(rows)}")
    report.lines.append(f"columns: {len(design.columns)}")
    report.lines.extend(_reference_lines(design))
    report.lines.extend(_coefficient_lines(fit.columns, fit.coefficients))
    report.lines.append(f"rss: {_fmt(fit.rss)}")
    report.lines.append(f"sigma2: {_fmt(fit.sigma2)}")
    report.lines.append(f"model_flags: {', '.join(fit.flags) if fit.flags else 'none'}")
    for term in fit.term_tests.values():
        report.results.append(term)
        report.lines.extend(_result_lines(term))


def _run_lmm(bundle: Bundle, metric: str, by: Sequence[str], report: AnalysisReport) -> None:
    rows = per_ad_rows(bundle, metric)
    if len(rows) < 4:
        raise AnalysisError(f"lmm model needs more per-ad answers; have {len(rows)}")
    default = ["seen_status", "targeted_user", "has_people", "phase"] + list(
        DEMOGRAPHIC_FACTORS
    ) + ["race:gender"]
    allowed = set(DEMOGRAPHIC_FACTORS) | {"seen_status", "targeted_user", "has_people", "phase"}
    plain, inter = _parse_factors(by, default)
    for name in plain:
        if name not in allowed:
            raise AnalysisError(f"unknown factor {name!r}; have {', '.join(sorted(allowed))}")
    design = build_design_matrix(rows, categorical=plain, interactions=inter)
    y = [row["value"] for row in rows]
    groups = [row["participant_id"] for row in rows]
    try:
        fit: LmmResult = fit_lmm_random_intercept(design, y, groups)
    except RankError as exc:
        raise AnalysisError(f"design matrix is rank deficient in columns: {', '.join(exc.columns)}")
    except ValueError as exc:
        raise AnalysisError(str(exc))
    report.lines.append(f"observations: {len(rows)}")
    report.lines.append(f"groups: {len(set(groups))}")
    report.lines.extend(_reference_lines(design))
    report.lines.extend(_coefficient_lines(fit.columns, fit.coefficients))
    report.lines.append(f"sigma2_between: {_fmt(fit.sigma2_b)}")
    report.lines.append(f"sigma2_residual: {_fmt(fit.sigma2_e)}")
    report.lines.append(f"variance_ratio: {_fmt(fit.theta)}")
    report.lines.append(f"reml_objective: {_fmt(fit.reml_objective)}")
    report.lines.append(f"model_flags: {', '.join(fit.flags) if fit.flags else 'none'}")
    for term in fit.term_tests.values():
        report.results.append(term)
        report.lines.extend(_result_lines(term))


def run_analysis(
    bundle: Bundle,
    metric: str,
    model: str,
    by: Sequence[str] = (),
    seed: int = 0,
) -> AnalysisReport:
    if metric not in METRICS:
        raise AnalysisError(f"unknown metric {metric!r}; have {', '.join(METRICS)}")
    if model not in MODELS:
        raise AnalysisError(f"unknown model {model!r}; have {', '.join(MODELS)}")
    report = AnalysisReport(metric=metric, model=model, seed=seed)
    report.lines.append("# ad swap analysis")
    report.lines.append(f"metric: {metric}")
    report.lines.append(f"model: {model}")
    report.lines.append(f"seed: {seed}")
    if model == "paired":
        _run_paired(bundle, metric, report)
    elif model == "welch":
        _run_welch(bundle, metric, by, report)
    elif model == "ols":
        _run_ols(bundle, metric, by, report)
    else:
        _run_lmm(bundle, metric, by, report)
    return report
