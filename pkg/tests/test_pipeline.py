"""Post-processing jobs: blob dedupe, redirect resolution, persist retry
accounting, detection adapter grammar, domain aggregation, rerun no-ops."""

import sys
import threading

import pytest

from adswap.clock import SimClock
from adswap.domains import SuffixRules
from adswap.model import AdRecord, Phase
from adswap.pipeline import (
    AdapterError,
    BlobStore,
    Detection,
    FetchError,
    MAX_PERSIST_ATTEMPTS,
    PipelineError,
    PipelineState,
    ResolveError,
    aggregate_domains,
    command_classifier,
    has_people,
    parse_detection_lines,
    resolve_link,
    run_job,
)

CATS = ("person", "car", "dog")


def make_ad(ad_id, pid="p1", target="https://shop.example/x", image="https://cdn.example/a.png",
            source="https://news.example/story", captured=100.0):
    return AdRecord(
        id=ad_id, participant_id=pid, phase=Phase.OBSERVATIONAL, payload_kind="image",
        target_url=target, source_page_url=source, image_url=image,
        slot_width=300, slot_height=250, captured_at=captured,
    )


# ---- blob store ------------------------------------------------------------------


def test_blob_store_content_addressing(tmp_path):
    blobs = BlobStore(tmp_path / "blobs")
    ref1 = blobs.put(b"same bytes")
    ref2 = blobs.put(b"same bytes")
    ref3 = blobs.put(b"other bytes")
    assert ref1 == ref2 != ref3
    assert ref1.startswith("sha256:")
    assert blobs.get(ref1) == b"same bytes"
    assert blobs.has(ref3) and not blobs.has("sha256:" + "0" * 64)
    # equal content stored once on disk
    files = [p for p in (tmp_path / "blobs").rglob("*") if p.is_file()]
    assert len(files) == 2


def test_blob_store_rejects_foreign_refs(tmp_path):
    blobs = BlobStore(tmp_path)
    with pytest.raises(PipelineError):
        blobs.path_for("md5:abc")


# ---- redirect resolution ------------------------------------------------------------


def fake_fetcher(table):
    def fetch(url):
        return table[url]

    return fetch


def test_resolve_follows_chain():
    table = {
        "https://t.example/a": (302, "https://t.example/b"),
        "https://t.example/b": (301, "/c"),
        "https://t.example/c": (200, None),
    }
    final, hops = resolve_link("https://t.example/a", fake_fetcher(table))
    assert final == "https://t.example/c"
    assert hops == 2


def test_resolve_relative_location_joins_base():
    table = {
        "https://t.example/dir/a": (302, "sub/b"),
        "https://t.example/dir/sub/b": (200, None),
    }
    final, hops = resolve_link("https://t.example/dir/a", fake_fetcher(table))
    assert final == "https://t.example/dir/sub/b"


def test_resolve_loop_detected():
    table = {
        "https://t.example/a": (302, "https://t.example/b"),
        "https://t.example/b": (302, "https://t.example/a"),
    }
    with pytest.raises(ResolveError) as err:
        resolve_link("https://t.example/a", fake_fetcher(table))
    assert err.value.kind == "redirect_loop"


def test_resolve_hop_limit():
    table = {f"https://t.example/{i}": (302, f"https://t.example/{i+1}") for i in range(20)}
    with pytest.raises(ResolveError) as err:
        resolve_link("https://t.example/0", fake_fetcher(table), max_hops=5)
    assert err.value.kind == "too_many_redirects"


def test_no_redirect_is_zero_hops():
    final, hops = resolve_link("https://t.example/a", lambda u: (200, None))
    assert final == "https://t.example/a" and hops == 0


def test_redirect_without_location_terminates():
    final, hops = resolve_link("https://t.example/a", lambda u: (302, None))
    assert final == "https://t.example/a" and hops == 0


# ---- detection grammar ----------------------------------------------------------


def test_parse_detection_lines():
    text = "person 0.91 0.1 0.2 0.3 0.4\n\ncar 0.5 0 0 1 1\n"
    out = parse_detection_lines(text, CATS)
    assert out == [
        Detection("person", 0.91, (0.1, 0.2, 0.3, 0.4)),
        Detection("car", 0.5, (0.0, 0.0, 1.0, 1.0)),
    ]


@pytest.mark.parametrize(
    "line",
    [
        "person 0.9 0.1 0.2 0.3",          # arity
        "person 0.9 0.1 0.2 0.3 0.4 0.5",  # arity
        "unicorn 0.9 0.1 0.2 0.3 0.4",     # unknown category
        "person high 0.1 0.2 0.3 0.4",     # non-numeric
        "person 1.5 0.1 0.2 0.3 0.4",      # confidence out of range
        "person 0.9 0.1 0.2 0.3 1.4",      # box out of range
    ],
)
def test_parse_detection_rejects(line):
    with pytest.raises(AdapterError):
        parse_detection_lines(line, CATS)


def test_has_people_threshold():
    dets = [Detection("person", 0.49, (0, 0, 1, 1)), Detection("car", 0.99, (0, 0, 1, 1))]
    assert not has_people(dets, threshold=0.5)
    assert has_people(dets, threshold=0.4)
    assert not has_people([], threshold=0.0)


def test_command_classifier_runs_and_fails_cleanly(tmp_path):
    good = tmp_path / "good.py"
    good.write_text("print('person 0.9 0.1 0.1 0.2 0.2')")
    classify = command_classifier([sys.executable, str(good)], CATS)
    assert classify("ignored.png") == [Detection("person", 0.9, (0.1, 0.1, 0.2, 0.2))]

    crash = tmp_path / "crash.py"
    crash.write_text("raise SystemExit(3)")
    with pytest.raises(AdapterError):
        command_classifier([sys.executable, str(crash)], CATS)("x.png")

    garbage = tmp_path / "garbage.py"
    garbage.write_text("print('not a detection')")
    with pytest.raises(AdapterError):
        command_classifier([sys.executable, str(garbage)], CATS)("x.png")


# ---- jobs -----------------------------------------------------------------------


def run(job, ads, state=None, clock=None, **kw):
    state = state if state is not None else PipelineState()
    clock = clock or SimClock()
    return run_job(job, ads, state, clock, **kw), state


def test_resolve_job_sets_final_urls_and_skips_done():
    table = {
        "https://shop.example/x": (301, "https://shop.example/final"),
        "https://shop.example/final": (200, None),
    }
    ads = [make_ad("a1"), make_ad("a2")]
    ads[1].resolved_target_url = "https://done.example/"
    job, state = run("resolve", ads, resolver=fake_fetcher(table))
    assert job.processed == 1 and job.failed == 0
    assert ads[0].resolved_target_url == "https://shop.example/final"
    assert ads[1].resolved_target_url == "https://done.example/"
    # rerun is a no-op
    job2, _ = run("resolve", ads, state=state, resolver=fake_fetcher(table))
    assert job2.processed == 0


def test_resolve_permanent_failure_recorded_retryable_not():
    def fetch(url):
        if "loop" in url:
            return (302, url)  # immediate self-loop: permanent
        raise ResolveError("retryable", url, "connection reset")

    ads = [make_ad("a1", target="https://t.example/loop"), make_ad("a2", target="https://t.example/flaky")]
    job, _ = run("resolve", ads, resolver=fetch)
    assert job.failed == 2
    assert ads[0].resolved_target_url == "error:redirect_loop"
    assert ads[1].resolved_target_url is None  # retryable failures stay pending


def test_persist_job_stores_dedupes_and_gives_up(tmp_path):
    blobs = BlobStore(tmp_path)
    fails = {"https://cdn.example/broken.png"}

    def fetch(url):
        if url in fails:
            raise FetchError(url)
        return f"bytes-of:{url}".encode()

    ads = [
        make_ad("a1", image="https://cdn.example/same.png"),
        make_ad("a2", image="https://cdn.example/same.png"),
        make_ad("a3", image="https://cdn.example/broken.png"),
    ]
    state = PipelineState()
    for attempt in range(MAX_PERSIST_ATTEMPTS):
        job, _ = run("persist", ads, state=state, image_fetcher=fetch, blobs=blobs)
        if attempt == 0:
            assert job.processed == 2 and job.failed == 1
            assert ads[0].stored_image_ref == ads[1].stored_image_ref
        else:
            assert job.processed == 0 and job.failed == 1
    assert "a3" in state.unretrievable
    # after giving up the ad is skipped entirely
    job, _ = run("persist", ads, state=state, image_fetcher=fetch, blobs=blobs)
    assert job.processed == 0 and job.failed == 0


def test_persist_recovers_before_limit(tmp_path):
    blobs = BlobStore(tmp_path)
    calls = {"n": 0}

    def fetch(url):
        calls["n"] += 1
        if calls["n"] == 1:
            raise FetchError(url)
        return b"finally"

    ads = [make_ad("a1")]
    state = PipelineState()
    run("persist", ads, state=state, image_fetcher=fetch, blobs=blobs)
    assert state.persist_attempts["a1"] == 1
    run("persist", ads, state=state, image_fetcher=fetch, blobs=blobs)
    assert ads[0].stored_image_ref is not None
    assert "a1" not in state.persist_attempts
    assert "a1" not in state.unretrievable


def test_detect_job_labels_stored_ads(tmp_path):
    blobs = BlobStore(tmp_path)
    ads = [make_ad("a1"), make_ad("a2"), make_ad("a3")]
    for ad in ads[:2]:
        ad.stored_image_ref = blobs.put(f"img:{ad.id}".encode())
    # a3 has no stored image yet: detect must leave it alone

    def classify(path):
        return [Detection("person", 0.9, (0, 0, 1, 1))] if "a1" not in path else []

    by_path = {str(blobs.path_for(ads[0].stored_image_ref)): [Detection("car", 0.9, (0, 0, 1, 1))],
               str(blobs.path_for(ads[1].stored_image_ref)): [Detection("person", 0.8, (0, 0, 1, 1))]}
    job, state = run("detect", ads, blobs=blobs, classifier=lambda p: by_path[p])
    assert job.processed == 2
    assert ads[0].has_people is False
    assert ads[1].has_people is True
    assert ads[2].has_people is None
    assert state.detections["a2"] == (Detection("person", 0.8, (0, 0, 1, 1)),)
    # rerun no-op: labels already set
    job2, _ = run("detect", ads, state=state, blobs=blobs, classifier=lambda p: by_path[p])
    assert job2.processed == 0


def test_detect_adapter_failure_leaves_unlabeled(tmp_path):
    blobs = BlobStore(tmp_path)
    ad = make_ad("a1")
    ad.stored_image_ref = blobs.put(b"img")

    def broken(path):
        raise AdapterError("boom")

    job, _ = run("detect", [ad], blobs=blobs, classifier=broken)
    assert job.failed == 1 and ad.has_people is None


def test_detect_respects_person_threshold(tmp_path):
    blobs = BlobStore(tmp_path)
    ad = make_ad("a1")
    ad.stored_image_ref = blobs.put(b"img")
    weak = lambda p: [Detection("person", 0.3, (0, 0, 1, 1))]
    job, _ = run("detect", [ad], blobs=blobs, classifier=weak, person_threshold=0.5)
    assert ad.has_people is False


def test_window_filters_by_captured_at():
    table = {"https://shop.example/x": (200, None)}
    ads = [make_ad("a1", captured=50.0), make_ad("a2", captured=150.0)]
    job, _ = run("resolve", ads, window=(100.0, 200.0), resolver=fake_fetcher(table))
    assert job.processed == 1
    assert ads[0].resolved_target_url is None


def test_redacted_ads_excluded_from_all_jobs(tmp_path):
    ad = make_ad("a1")
    ad.redacted = True
    job, state = run("domains", [ad])
    table = state.domain_tables["source"]
    assert table.valid == 0 and table.errors == 0


def test_unknown_job_rejected():
    with pytest.raises(PipelineError):
        run("shuffle", [])


def test_job_mutex_blocks_concurrent_same_job():
    state = PipelineState()
    state.lock_for("resolve").acquire()
    with pytest.raises(PipelineError):
        run_job("resolve", [], state, SimClock(), resolver=lambda u: (200, None))
    state.lock_for("resolve").release()
    # a different job is free to run concurrently
    run_job("domains", [], state, SimClock())


def test_job_run_ledger_records_timing():
    clock = SimClock()
    state = PipelineState()
    run_job("domains", [make_ad("a1")], state, clock)
    (entry,) = state.job_runs
    assert entry.job == "domains"
    assert entry.finished_at >= entry.started_at
    assert entry.processed == 3  # one record per ad per table kind


# ---- domain aggregation ------------------------------------------------------------


def test_aggregate_domains_counts_and_presence():
    records = [
        ("p1", "https://a.shop.example/x"),
        ("p1", "https://shop.example/y"),
        ("p2", "https://shop.example/z"),
        ("p2", "https://news.example/s"),
        ("p3", ""),
    ]
    table = aggregate_domains(records, "target")
    assert table.rows == [
        ("shop.example", 3, 0.75),
        ("news.example", 1, 0.25),
    ]
    assert table.presence == [("shop.example", 2 / 3), ("news.example", 1 / 3)]
    assert table.valid == 4 and table.errors == 1


def test_aggregate_domains_orders_ties_alphabetically():
    records = [("p1", "https://b.example/"), ("p1", "https://a.example/")]
    table = aggregate_domains(records, "source")
    assert [r[0] for r in table.rows] == ["a.example", "b.example"]


def test_aggregate_domains_counts_bare_suffix_as_error():
    table = aggregate_domains([("p1", "https://com/")], "target")
    assert table.valid == 0 and table.errors == 1


def test_aggregate_domains_custom_rules():
    rules = SuffixRules("dev\nplatform.dev\n")
    table = aggregate_domains([("p1", "https://x.platform.dev/")], "target", rules)
    assert table.rows[0][0] == "x.platform.dev"


def test_aggregate_domains_rejects_unknown_kind():
    with pytest.raises(PipelineError):
        aggregate_domains([], "referrer")


def test_domains_job_builds_three_tables_and_masks_resolve_errors():
    ads = [make_ad("a1"), make_ad("a2")]
    ads[0].resolved_target_url = "https://final.example/x"
    ads[1].resolved_target_url = "error:redirect_loop"
    job, state = run("domains", ads)
    assert set(state.domain_tables) == {"source", "target", "resolved_target"}
    resolved = state.domain_tables["resolved_target"]
    assert resolved.rows == [("final.example", 1, 1.0)]
    assert resolved.errors == 1  # the error-marked URL counts as unresolvable
    assert state.domain_tables["source"].rows == [("news.example", 2, 1.0)]
