"""Post-processing jobs over captured ads: redirect resolution, image
persistence, person detection via an external classifier, and registrable-
domain aggregation.

Jobs are idempotent by construction: each selects only rows still missing
its output, so rerunning a window changes nothing. A per-job mutex keeps
two instances of the same job from interleaving; distinct jobs may run in
parallel. The classifier is an external command exchanging a line-oriented
record format (docs/pipeline-formats.md), so a real model, a stub, or an
oracle file can be swapped in without code changes; in-process callables
are accepted too for desk-scale runs.
"""

from __future__ import annotations

import hashlib
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional
from urllib.parse import urljoin

from .clock import Clock
from .domains import DomainError, SuffixRules, embedded_suffix_rules, registrable_domain
from .model import AdRecord

DEFAULT_PERSON_THRESHOLD = 0.5
MAX_PERSIST_ATTEMPTS = 3

# Closed category vocabulary for the object-detection adapter (80 common
# object classes; multi-word names use underscores to fit the record grammar).
DEFAULT_CATEGORIES = (
    "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train", "truck",
    "boat", "traffic_light", "fire_hydrant", "stop_sign", "parking_meter", "bench",
    "bird", "cat", "dog", "horse", "sheep", "cow", "elephant", "bear", "zebra",
    "giraffe", "backpack", "umbrella", "handbag", "tie", "suitcase", "frisbee",
    "skis", "snowboard", "sports_ball", "kite", "baseball_bat", "baseball_glove",
    "skateboard", "surfboard", "tennis_racket", "bottle", "wine_glass", "cup",
    "fork", "knife", "spoon", "bowl", "banana", "apple", "sandwich", "orange",
    "broccoli", "carrot", "hot_dog", "pizza", "donut", "cake", "chair", "couch",
    "potted_plant", "bed", "dining_table", "toilet", "tv", "laptop", "mouse",
    "remote", "keyboard", "cell_phone", "microwave", "oven", "toaster", "sink",
    "refrigerator", "book", "clock", "vase", "scissors", "teddy_bear",
    "hair_drier", "toothbrush",
)


class PipelineError(Exception):
    pass


class ResolveError(PipelineError):
    def __init__(self, kind: str, url: str, detail: str = ""):
        super().__init__(f"{kind}: {url} {detail}".rstrip())
        self.kind = kind
        self.url = url


class FetchError(PipelineError):
    """Transient fetch failure; the persist job retries these."""


class AdapterError(PipelineError):
    """Classifier crashed, timed out, or emitted garbage; ad stays unlabeled."""


# ---- blob storage ---------------------------------------------------------------


class BlobStore:
    """Content-addressed byte store: equal bytes collapse to one blob."""

    def __init__(self, root):
        from pathlib import Path

        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        path = self.root / digest[:2] / digest[2:]
        if not path.exists():
            path.parent.mkdir(exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            tmp.rename(path)
        return f"sha256:{digest}"

    def path_for(self, ref: str):
        if not ref.startswith("sha256:"):
            raise PipelineError(f"bad blob ref: {ref!r}")
        digest = ref[len("sha256:") :]
        return self.root / digest[:2] / digest[2:]

    def get(self, ref: str) -> bytes:
        return self.path_for(ref).read_bytes()

    def has(self, ref: str) -> bool:
        return self.path_for(ref).exists()


# ---- redirect resolution -----------------------------------------------------------

HeadFetcher = Callable[[str], tuple[int, Optional[str]]]


def resolve_link(url: str, fetch: HeadFetcher, max_hops: int = 10) -> tuple[str, int]:
    """Follow 3xx responses to the final URL; returns (final_url, hop_count)."""
    visited = {url}
    current = url
    hops = 0
    while True:
        status, location = fetch(current)
        if not 300 <= status < 400 or location is None:
            return current, hops
        nxt = urljoin(current, location)
        hops += 1
        if nxt in visited:
            raise ResolveError("redirect_loop", url, f"revisits {nxt}")
        if hops > max_hops:
            raise ResolveError("too_many_redirects", url, f"exceeded {max_hops} hops")
        visited.add(nxt)
        current = nxt


def http_head_fetcher(timeout: float = 10.0) -> HeadFetcher:
    """Real fetcher on httpx; network failures surface as retryable errors."""
    import httpx

    client = httpx.Client(follow_redirects=False, timeout=timeout)

    def fetch(url: str) -> tuple[int, Optional[str]]:
        try:
            response = client.get(url)
        except httpx.HTTPError as exc:
            raise ResolveError("retryable", url, str(exc))
        return response.status_code, response.headers.get("location")

    return fetch


# ---- object detection ----------------------------------------------------------------


@dataclass(frozen=True)
class Detection:
    category: str
    confidence: float
    box: tuple[float, float, float, float]  # normalized x, y, w, h

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")
        if any(not 0.0 <= v <= 1.0 for v in self.box):
            raise ValueError(f"box out of range: {self.box}")


def parse_detection_lines(text: str, categories: tuple[str, ...]) -> list[Detection]:
    """Record grammar: one detection per line, `category confidence x y w h`."""
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise AdapterError(f"bad detection record: {line!r}")
        category = parts[0]
        if category not in categories:
            raise AdapterError(f"unknown category: {category!r}")
        try:
            numbers = [float(p) for p in parts[1:]]
        except ValueError:
            raise AdapterError(f"non-numeric detection record: {line!r}")
        try:
            out.append(Detection(category, numbers[0], tuple(numbers[1:])))
        except ValueError as exc:
            raise AdapterError(str(exc))
    return out


Classifier = Callable[[str], list[Detection]]


def command_classifier(
    argv: list[str], categories: tuple[str, ...] = DEFAULT_CATEGORIES, timeout: float = 30.0
) -> Classifier:
    """Adapter running an external detector: image path in, records out."""

    def classify(image_path: str) -> list[Detection]:
        try:
            proc = subprocess.run(
                argv + [image_path], capture_output=True, text=True, timeout=timeout
            )
        except (subprocess.TimeoutExpired, OSError) as exc:
            raise AdapterError(f"classifier failed: {exc}")
        if proc.returncode != 0:
            raise AdapterError(f"classifier exited {proc.returncode}: {proc.stderr.strip()}")
        return parse_detection_lines(proc.stdout, categories)

    return classify


def has_people(detections: Iterable[Detection], threshold: float = DEFAULT_PERSON_THRESHOLD) -> bool:
    return any(d.category == "person" and d.confidence >= threshold for d in detections)


# ---- domain aggregation ----------------------------------------------------------------

KIND_FIELDS = {
    "source": "source_page_url",
    "target": "target_url",
    "resolved_target": "resolved_target_url",
}


@dataclass
class DomainTable:
    kind: str
    rows: list[tuple[str, int, float]]          # (domain, count, share of valid rows)
    presence: list[tuple[str, float]]           # (domain, share of participants with it)
    valid: int
    errors: int


def aggregate_domains(
    records: Iterable[tuple[str, str]],
    kind: str,
    suffix_rules: Optional[SuffixRules] = None,
) -> DomainTable:
    """Frequency and participant-presence shares of registrable domains.

    `records` yields (participant_id, url). Unresolvable hosts count as
    errors and are excluded from the share denominator.
    """
    if kind not in KIND_FIELDS:
        raise PipelineError(f"kind must be one of {sorted(KIND_FIELDS)}")
    rules = suffix_rules or embedded_suffix_rules()
    counts: dict[str, int] = {}
    by_participant: dict[str, set[str]] = {}
    errors = 0
    participants: set[str] = set()
    for pid, url in records:
        participants.add(pid)
        if not url:
            errors += 1
            continue
        try:
            domain = registrable_domain(url, rules)
        except DomainError:
            errors += 1
            continue
        counts[domain] = counts.get(domain, 0) + 1
        by_participant.setdefault(domain, set()).add(pid)
    valid = sum(counts.values())
    rows = [
        (domain, count, count / valid)
        for domain, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    ]
    n_participants = len(participants) or 1
    presence = [
        (domain, len(by_participant[domain]) / n_participants)
        for domain, _count, _share in rows
    ]
    return DomainTable(kind=kind, rows=rows, presence=presence, valid=valid, errors=errors)


# ---- job runner ------------------------------------------------------------------------


@dataclass
class JobRun:
    job: str
    window: Optional[tuple[float, float]]
    processed: int
    failed: int
    started_at: float
    finished_at: float


@dataclass
class PipelineState:
    """Cross-run bookkeeping: retry counts, labels-in-limbo, job ledger."""

    job_runs: list[JobRun] = field(default_factory=list)
    persist_attempts: dict[str, int] = field(default_factory=dict)
    unretrievable: set[str] = field(default_factory=set)
    domain_tables: dict[str, DomainTable] = field(default_factory=dict)
    detections: dict[str, tuple[Detection, ...]] = field(default_factory=dict)
    locks: dict[str, threading.Lock] = field(default_factory=dict)

    def lock_for(self, job: str) -> threading.Lock:
        return self.locks.setdefault(job, threading.Lock())


JOB_NAMES = ("resolve", "persist", "detect", "domains")


def _in_window(ad: AdRecord, window: Optional[tuple[float, float]]) -> bool:
    if window is None:
        return True
    start, end = window
    return start <= ad.captured_at < end


def run_job(
    job: str,
    ads: list[AdRecord],
    state: PipelineState,
    clock: Clock,
    window: Optional[tuple[float, float]] = None,
    *,
    resolver: Optional[HeadFetcher] = None,
    image_fetcher: Optional[Callable[[str], bytes]] = None,
    blobs: Optional[BlobStore] = None,
    classifier: Optional[Classifier] = None,
    person_threshold: float = DEFAULT_PERSON_THRESHOLD,
    suffix_rules: Optional[SuffixRules] = None,
) -> JobRun:
    """Run one named job over the window. Reruns are no-ops on processed ads."""
    if job not in JOB_NAMES:
        raise PipelineError(f"unknown job {job!r}; have {', '.join(JOB_NAMES)}")
    mutex = state.lock_for(job)
    if not mutex.acquire(blocking=False):
        raise PipelineError(f"job {job!r} already running")
    started = clock.now()
    processed = failed = 0
    try:
        rows = [ad for ad in ads if not ad.redacted and _in_window(ad, window)]
        if job == "resolve":
            if resolver is None:
                raise PipelineError("resolve job needs a resolver")
            for ad in rows:
                if ad.resolved_target_url is not None or not ad.target_url:
                    continue
                try:
                    final, _hops = resolve_link(ad.target_url, resolver)
                    ad.resolved_target_url = final
                    processed += 1
                except ResolveError as exc:
                    failed += 1
                    if exc.kind != "retryable":
                        # permanent failure: record verbatim so reruns skip it
                        ad.resolved_target_url = f"error:{exc.kind}"
        elif job == "persist":
            if image_fetcher is None or blobs is None:
                raise PipelineError("persist job needs an image fetcher and a blob store")
            for ad in rows:
                if ad.image_url is None or ad.stored_image_ref is not None:
                    continue
                if ad.id in state.unretrievable:
                    continue
                try:
                    data = image_fetcher(ad.image_url)
                except FetchError:
                    attempts = state.persist_attempts.get(ad.id, 0) + 1
                    state.persist_attempts[ad.id] = attempts
                    if attempts >= MAX_PERSIST_ATTEMPTS:
                        state.unretrievable.add(ad.id)
                    failed += 1
                    continue
                ad.stored_image_ref = blobs.put(data)
                state.persist_attempts.pop(ad.id, None)
                processed += 1
        elif job == "detect":
            if classifier is None:
                raise PipelineError("detect job needs a classifier")
            for ad in rows:
                if ad.has_people is not None or ad.stored_image_ref is None:
                    continue
                path = str(blobs.path_for(ad.stored_image_ref)) if blobs else ad.stored_image_ref
                try:
                    detections = classifier(path)
                except AdapterError:
                    failed += 1
                    continue
                state.detections[ad.id] = tuple(detections)
                ad.has_people = has_people(detections, person_threshold)
                processed += 1
        else:  # domains
            for kind, url_field in KIND_FIELDS.items():
                records = []
                for ad in rows:
                    url = getattr(ad, url_field) or ""
                    if url.startswith("error:"):
                        url = ""
                    records.append((ad.participant_id, url))
                state.domain_tables[kind] = aggregate_domains(records, kind, suffix_rules)
                processed += len(records)
    finally:
        mutex.release()
    run = JobRun(
        job=job, window=window, processed=processed, failed=failed,
        started_at=started, finished_at=clock.now(),
    )
    state.job_runs.append(run)
    return run
