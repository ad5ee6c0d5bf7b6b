"""Design-matrix coding rules and the OLS fitter against independent oracles.

Hand cases were worked on paper (group means, residual sums) with the F
tail frozen from mpmath. Random problems are cross-checked against the
normal equations solved by a different linear-algebra path than the
fitter's QR.
"""

import math

import numpy as np
import pytest

from adswap.stats import (
    RankError,
    build_design_matrix,
    collapse_race,
    fit_ols_anova,
)

REL = 1e-12


def test_collapse_race():
    assert collapse_race(["white"]) == "white"
    assert collapse_race({"asian"}) == "asian"
    assert collapse_race(["white", "asian"]) == "multiracial"
    assert collapse_race(["black_or_african_american", "white", "asian"]) == "multiracial"
    with pytest.raises(ValueError):
        collapse_race([])


def test_reference_level_is_most_frequent():
    rows = [{"g": v} for v in ["b", "b", "b", "a", "a", "c"]]
    dm = build_design_matrix(rows, categorical=["g"])
    assert dm.reference_levels["g"] == "b"
    assert dm.columns == ["Intercept", "g[a]", "g[c]"]


def test_reference_tie_breaks_lexicographically():
    rows = [{"g": v} for v in ["b", "a", "b", "a"]]
    dm = build_design_matrix(rows, categorical=["g"])
    assert dm.reference_levels["g"] == "a"
    assert dm.columns == ["Intercept", "g[b]"]


def test_dummy_columns_are_indicators():
    rows = [{"g": v} for v in ["a", "b", "c", "b"]]
    dm = build_design_matrix(rows, categorical=["g"])
    assert dm.reference_levels["g"] == "b"
    assert dm.columns == ["Intercept", "g[a]", "g[c]"]
    np.testing.assert_array_equal(dm.X[:, 0], [1, 1, 1, 1])
    np.testing.assert_array_equal(dm.X[:, 1], [1, 0, 0, 0])
    np.testing.assert_array_equal(dm.X[:, 2], [0, 0, 1, 0])


def test_boolean_and_raceset_levels():
    rows = [
        {"seen": True, "race": frozenset({"white"})},
        {"seen": False, "race": frozenset({"white", "asian"})},
        {"seen": False, "race": frozenset({"asian"})},
    ]
    dm = build_design_matrix(rows, categorical=["seen", "race"])
    assert dm.reference_levels["seen"] == "false"
    assert "seen[true]" in dm.columns
    assert any(c.startswith("race[multiracial]") or c == "race[multiracial]" for c in dm.columns)


def test_numeric_column_passthrough():
    rows = [{"age": 20}, {"age": 35}, {"age": 50}]
    dm = build_design_matrix(rows, numeric=["age"])
    assert dm.columns == ["Intercept", "age"]
    np.testing.assert_allclose(dm.X[:, 1], [20.0, 35.0, 50.0])


def test_interaction_columns_are_products():
    rows = [
        {"g": "a", "h": "x"},
        {"g": "a", "h": "y"},
        {"g": "b", "h": "x"},
        {"g": "b", "h": "y"},
        {"g": "b", "h": "y"},
    ]
    dm = build_design_matrix(rows, categorical=["g", "h"], interactions=[("g", "h")])
    # refs: g -> b (3 of 5), h -> y (3 of 5); dummies g[a], h[x]
    assert dm.reference_levels == {"g": "b", "h": "x"} or dm.reference_levels == {"g": "b", "h": "y"}
    ref_h = dm.reference_levels["h"]
    other_h = "x" if ref_h == "y" else "y"
    inter = f"g[a]:h[{other_h}]"
    assert inter in dm.columns
    gi = dm.columns.index("g[a]")
    hi = dm.columns.index(f"h[{other_h}]")
    ii = dm.columns.index(inter)
    np.testing.assert_array_equal(dm.X[:, ii], dm.X[:, gi] * dm.X[:, hi])
    assert "g:h" in dm.terms


def test_interaction_requires_categorical_factors():
    rows = [{"g": "a", "age": 1.0}, {"g": "b", "age": 2.0}]
    with pytest.raises(ValueError):
        build_design_matrix(rows, categorical=["g"], numeric=["age"], interactions=[("g", "age")])


def test_single_level_factor_contributes_no_columns():
    rows = [{"g": "only"}, {"g": "only"}]
    dm = build_design_matrix(rows, categorical=["g"])
    assert dm.columns == ["Intercept"]
    assert "g" not in dm.terms


def test_empty_rows_rejected():
    with pytest.raises(ValueError):
        build_design_matrix([], categorical=["g"])


# -- OLS -------------------------------------------------------------------


def test_two_group_hand_case():
    # A=[1,2,3], B=[3,4,5]: beta = (2, 2), RSS = 4, sigma2 = 1, F_group = 6
    rows = [{"g": "a"}] * 3 + [{"g": "b"}] * 3
    y = [1.0, 2.0, 3.0, 3.0, 4.0, 5.0]
    dm = build_design_matrix(rows, categorical=["g"])
    fit = fit_ols_anova(dm, y)
    assert fit.coef("Intercept") == pytest.approx(2.0, rel=REL)
    assert fit.coef("g[b]") == pytest.approx(2.0, rel=REL)
    assert fit.rss == pytest.approx(4.0, rel=REL)
    assert fit.df_resid == 4
    assert fit.sigma2 == pytest.approx(1.0, rel=REL)
    res = fit.term_tests["g"]
    assert res.statistic == pytest.approx(6.0, rel=REL)
    assert res.df == (1.0, 4.0)
    assert res.p_value == pytest.approx(0.070483996910219948, rel=1e-12)


def test_exact_fit_flagged():
    rows = [{"x": float(v)} for v in range(4)]
    y = [1.0, 3.0, 5.0, 7.0]
    dm = build_design_matrix(rows, numeric=["x"])
    fit = fit_ols_anova(dm, y)
    assert fit.flags == ("exact_fit",)
    assert fit.coef("Intercept") == pytest.approx(1.0, abs=1e-10)
    assert fit.coef("x") == pytest.approx(2.0, rel=1e-10)
    res = fit.term_tests["x"]
    assert res.statistic == math.inf
    assert res.p_value == 0.0
    assert res.flagged("exact_fit")


def test_four_level_factor_df():
    rng = np.random.default_rng(5)
    levels = ["asian", "black_or_african_american", "multiracial", "white"]
    rows = [{"race": levels[i % 4]} for i in range(24)]
    y = rng.normal(size=24)
    dm = build_design_matrix(rows, categorical=["race"])
    fit = fit_ols_anova(dm, y)
    res = fit.term_tests["race"]
    assert res.df == (3.0, 20.0)


def test_collinear_columns_named():
    rows = [{"a": float(v), "b": 2.0 * v} for v in range(6)]
    dm = build_design_matrix(rows, numeric=["a", "b"])
    with pytest.raises(RankError) as err:
        fit_ols_anova(dm, np.arange(6.0))
    assert "b" in err.value.columns or "a" in err.value.columns


def test_saturated_model_rejected():
    rows = [{"x": 0.0}, {"x": 1.0}]
    dm = build_design_matrix(rows, numeric=["x"])
    with pytest.raises(ValueError):
        fit_ols_anova(dm, [1.0, 2.0])


@pytest.mark.parametrize("seed", range(20))
def test_random_problems_match_normal_equations(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(12, 50))
    levels = ["a", "b", "c", "d"][: int(rng.integers(2, 5))]
    rows = [
        {"g": levels[int(rng.integers(len(levels)))], "z": float(rng.normal())}
        for _ in range(n)
    ]
    # guarantee every level appears so the design is full rank
    for i, lv in enumerate(levels):
        rows[i]["g"] = lv
    y = rng.normal(size=n)
    dm = build_design_matrix(rows, categorical=["g"], numeric=["z"])
    fit = fit_ols_anova(dm, y)

    X = dm.X
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    np.testing.assert_allclose(fit.coefficients, beta, rtol=1e-8, atol=1e-10)
    resid = y - X @ beta
    assert fit.rss == pytest.approx(float(resid @ resid), rel=1e-8)

    for term, res in fit.term_tests.items():
        cols = dm.terms[term]
        keep = [j for j in range(X.shape[1]) if j not in cols]
        Xr = X[:, keep]
        br = np.linalg.solve(Xr.T @ Xr, Xr.T @ y)
        rr = y - Xr @ br
        rss_r = float(rr @ rr)
        df1 = len(cols)
        f_expect = ((rss_r - fit.rss) / df1) / fit.sigma2
        assert res.statistic == pytest.approx(max(f_expect, 0.0), rel=1e-7, abs=1e-10)
        assert res.df == (float(df1), float(fit.df_resid))
