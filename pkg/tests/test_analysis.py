"""Analysis battery over an exported bundle from the simulated study.

Uses the session-scoped small simulation: enough participants for every
model to fit, small enough to keep the suite fast.
"""

import pytest

from adswap.analysis import (
    AnalysisError,
    Bundle,
    load_bundle,
    per_ad_rows,
    phase_values,
    run_analysis,
    survey_phase_means,
)


@pytest.fixture(scope="session")
def bundle(small_bundle_dir):
    return load_bundle(small_bundle_dir)


def test_load_bundle_reads_all_tables(bundle):
    assert bundle.ads and bundle.deliveries and bundle.surveys and bundle.participants
    demo = bundle.demographics()
    assert all(isinstance(d["race"], frozenset) for d in demo.values())


def test_load_bundle_missing_file(tmp_path):
    with pytest.raises(AnalysisError):
        load_bundle(tmp_path)


def test_survey_phase_means_cover_both_phases(bundle):
    means = survey_phase_means(bundle, "interest")
    assert set(means) == {"midpoint", "final"}
    for phase_map in means.values():
        assert phase_map, "phase has per-participant values"
        assert all(1.0 <= v <= 7.0 for v in phase_map.values())


def test_recognition_values_are_rates(bundle):
    means = survey_phase_means(bundle, "recognition")
    for phase_map in means.values():
        assert all(0.0 <= v <= 1.0 for v in phase_map.values())


def test_phase_values_activity_metrics(bundle):
    pre, post = phase_values(bundle, "views")
    assert pre and post
    assert all(0.0 <= v <= 1.0 for v in pre.values())
    assert all(0.0 <= v <= 1.0 for v in post.values())


def test_per_ad_rows_shape(bundle):
    rows = per_ad_rows(bundle, "interest")
    assert rows
    for row in rows[:10]:
        assert row["phase"] in ("midpoint", "final")
        assert row["seen_status"] in ("seen", "unseen")
        assert row["targeted_user"] in ("self", "partner")
        assert isinstance(row["participant_id"], str)
        assert 1.0 <= row["value"] <= 7.0
    with pytest.raises(AnalysisError):
        per_ad_rows(bundle, "views")  # activity metrics have no per-ad answers


@pytest.mark.parametrize("metric", ["interest", "representativity", "recognition", "views"])
def test_paired_model_runs(bundle, metric):
    report = run_analysis(bundle, metric, "paired")
    text = report.text()
    assert "[result] paired_t" in text
    assert "statistic:" in text and "p_value:" in text
    assert "[percent_change]" in text
    assert report.results


def test_welch_model_runs_with_factor(bundle):
    report = run_analysis(bundle, "interest", "welch", by=["gender"])
    text = report.text()
    assert "[result] welch_t" in text
    assert "factor: gender" in text
    assert "group_a:" in text and "group_b:" in text


def test_welch_rejects_multiple_factors(bundle):
    with pytest.raises(AnalysisError):
        run_analysis(bundle, "interest", "welch", by=["gender", "age"])


def test_ols_model_runs(bundle):
    report = run_analysis(bundle, "interest", "ols", by=["gender"])
    text = report.text()
    assert "[result] ols_term_f" in text
    assert "[coefficients]" in text
    assert "[reference_levels]" in text


def test_ols_confounded_factors_are_clean_error(bundle):
    # the synthetic cohort cycles gender and region with the same period,
    # so the two factors are perfectly collinear
    with pytest.raises(AnalysisError):
        run_analysis(bundle, "interest", "ols", by=["gender", "region"])


def test_lmm_interaction_factor(bundle):
    report = run_analysis(
        bundle, "interest", "lmm",
        by=["seen_status", "targeted_user", "seen_status:targeted_user"],
    )
    assert any(r.term == "seen_status:targeted_user" for r in report.results)


def test_lmm_model_runs(bundle):
    report = run_analysis(bundle, "interest", "lmm", by=["seen_status", "targeted_user"])
    text = report.text()
    assert "sigma2_between:" in text
    assert "sigma2_residual:" in text
    assert "[result] lmm_term_f" in text


def test_lmm_rejects_activity_metrics(bundle):
    with pytest.raises(AnalysisError):
        run_analysis(bundle, "views", "lmm")


def test_unknown_metric_and_model(bundle):
    with pytest.raises(AnalysisError):
        run_analysis(bundle, "happiness", "paired")
    with pytest.raises(AnalysisError):
        run_analysis(bundle, "interest", "anova")


def test_report_text_is_deterministic(bundle):
    a = run_analysis(bundle, "interest", "paired", seed=3).text()
    b = run_analysis(bundle, "interest", "paired", seed=3).text()
    assert a == b


def test_overparameterized_request_is_clean_error(bundle):
    # every demographic plus interactions overwhelms the small cohort;
    # the failure must surface as AnalysisError, not a numpy traceback
    with pytest.raises(AnalysisError):
        run_analysis(
            bundle, "interest", "ols",
            by=["age", "gender", "race", "education", "income", "region",
                "age:gender", "race:education", "income:region"],
        )


def test_empty_bundle_is_clean_error():
    empty = Bundle(ads=[], deliveries=[], surveys=[], participants=[])
    with pytest.raises(AnalysisError):
        run_analysis(empty, "interest", "paired")
