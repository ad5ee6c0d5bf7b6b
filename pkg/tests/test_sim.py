"""End-to-end simulation driver.

The session-scoped report in conftest exercises the full happy path; the
tests here re-run tiny cohorts only where a fresh run is the point
(determinism, threading, odd cohorts).
"""

import json

import pytest

from adswap.model import StudyConfig
from adswap.sim import (
    SimProfile,
    default_profiles,
    profiles_from_file,
    run_simulation,
)


def tiny_config(**overrides) -> StudyConfig:
    base = dict(
        observational_days=2, intervention_days=2, min_ads_gate=4,
        reminder_day=1, rng_seed=11,
    )
    base.update(overrides)
    return StudyConfig(**base)


def test_same_seed_same_report_bytes():
    profiles = default_profiles(4, seed=5, ads_per_day=6, swaps_per_day=8)
    a = run_simulation(tiny_config(), profiles, seed=9, threads=1)
    b = run_simulation(tiny_config(), profiles, seed=9, threads=1)
    assert a.canonical_text() == b.canonical_text()


def test_different_seed_changes_report():
    profiles = default_profiles(4, seed=5, ads_per_day=6, swaps_per_day=8)
    a = run_simulation(tiny_config(), profiles, seed=9)
    b = run_simulation(tiny_config(), profiles, seed=10)
    assert a.canonical_text() != b.canonical_text()


def test_report_invariants_and_conservation(small_sim_report):
    report = small_sim_report
    assert report.invariants_checked > 0
    c = report.conservation
    assert c["ads_ingested"] == c["ads_stored"] + c["ads_duplicates"]
    assert c["stored_now"] == c["ads_stored"]
    assert c["exportable"] == c["stored_now"] - c["redacted"]


def test_report_final_states(small_sim_report):
    states = set(small_sim_report.final_states.values())
    assert states <= {"offboarded", "dropped"}
    assert "offboarded" in states


def test_report_summary_counts(small_sim_report):
    s = small_sim_report.summary
    assert s["pairs"] == 4 and s["unpaired"] == 0
    assert s["midpoint_answered"] > 0 and s["final_answered"] > 0
    assert s["swap_requests"] > 0


def test_report_exports_have_headers(small_sim_report):
    for kind in ("ads", "deliveries", "surveys", "participants"):
        rows = small_sim_report.exports[kind]
        assert len(rows) > 1, kind
        header = rows[0]
        assert len(set(header)) == len(header)
        assert all(len(r) == len(header) for r in rows[1:]), kind


def test_threaded_run_completes_with_same_conservation():
    profiles = default_profiles(4, seed=5, ads_per_day=6, swaps_per_day=8)
    serial = run_simulation(tiny_config(), profiles, seed=9, threads=1)
    threaded = run_simulation(tiny_config(), profiles, seed=9, threads=3)
    assert threaded.invariants_checked > 0
    assert threaded.conservation == serial.conservation
    assert threaded.final_states == serial.final_states


def test_odd_cohort_excludes_one():
    profiles = default_profiles(3, seed=2, ads_per_day=6, swaps_per_day=8)
    report = run_simulation(tiny_config(), profiles, seed=1)
    assert report.summary["unpaired"] == 1
    assert report.summary["pairs"] == 1
    # the unpaired participant cannot enter the swap phase
    assert list(report.final_states.values()).count("dropped") == 1


def test_write_produces_bundle(small_sim_report, tmp_path):
    small_sim_report.write(tmp_path)
    names = {p.name for p in tmp_path.iterdir()}
    assert names == {"report.txt", "ads.csv", "deliveries.csv", "surveys.csv", "participants.csv"}
    assert (tmp_path / "report.txt").read_text() == small_sim_report.canonical_text()


def test_needs_two_profiles():
    with pytest.raises(ValueError):
        run_simulation(tiny_config(), default_profiles(1))


def test_default_profiles_deterministic_and_overridable():
    a = default_profiles(6, seed=3, view_prob=0.9)
    b = default_profiles(6, seed=3, view_prob=0.9)
    assert a == b
    assert all(p.view_prob == 0.9 for p in a)
    assert len({p.demographics.gender for p in a}) > 1


def test_profiles_from_file_round_trip(tmp_path):
    docs = [
        {
            "name": "alpha",
            "demographics": {
                "age": "25-34", "gender": "woman", "race": ["asian"],
                "education": "bachelors", "income": "50k-75k", "region": "west",
            },
            "view_prob": 0.5,
            "swaps_per_day": 3,
        },
        {
            "name": "beta",
            "demographics": {
                "age": "35-44", "gender": "man", "race": ["white", "black"],
                "education": "graduate", "income": "gt_150k", "region": "south",
            },
        },
    ]
    path = tmp_path / "profiles.json"
    path.write_text(json.dumps(docs))
    loaded = profiles_from_file(path)
    assert [p.name for p in loaded] == ["alpha", "beta"]
    assert loaded[0].view_prob == 0.5 and loaded[0].swaps_per_day == 3
    assert loaded[1].demographics.race == frozenset({"white", "black"})
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"not": "a list"}))
    with pytest.raises(ValueError):
        profiles_from_file(bad)


def test_profile_validation():
    demo = default_profiles(1)[0].demographics
    with pytest.raises(ValueError):
        SimProfile(name="x", demographics=demo, view_prob=1.5)
    with pytest.raises(ValueError):
        SimProfile(name="x", demographics=demo, ads_per_day=-1)
