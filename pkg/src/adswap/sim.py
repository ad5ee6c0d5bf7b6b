"""Deterministic simulated-participant driver.

Synthetic participants run the whole study protocol against a real server
instance, talking only HTTP: register with onboarding codes, upload ads and
telemetry day by day, request swap ads during the intervention week, and
answer both surveys through a configurable respondent policy. The server
clock is advanced explicitly one day at a time, so a two-week study runs in
seconds while every timing rule still fires.

Respondent policy is a clipped linear rule: each profile carries a latent
affinity for self-targeted and partner-targeted ads, Likert answers are
the affinity plus Gaussian noise rounded into 1..7. This is a test
instrument, not a behavioral model.

Invariants are audited continuously (ingest acknowledgements, conservation
counters, slot geometry echoes, survey shape rules) and once more at the
end against the full export (pairing symmetry, swap-source ownership, tier
selection). Any violation aborts the run naming the invariant.

Same seed, same profiles, threads=1 gives a byte-identical report.
"""

from __future__ import annotations

import csv
import io
import json
import random
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .clock import DAY_SECONDS, SimClock, from_iso, to_iso
from .model import (
    AGE_BANDS,
    EDUCATION_BANDS,
    GENDERS,
    INCOME_BANDS,
    RACES,
    REGIONS,
    Demographics,
    StudyConfig,
)
from . import pipeline
from .api import create_app
from .intervention import ASPECT_TOLERANCE

GEOMETRIES = ((300, 250), (728, 90), (160, 600), (320, 50))

DEFAULT_RULESET = "\n".join(
    [
        "! simulation ruleset",
        "||ads.example^$image",
        "||tracker.example^",
        "@@||ads.example/allowlisted^",
        "news.example##.sponsored",
    ]
)


class SimInvariantViolation(Exception):
    def __init__(self, name: str, detail: str = ""):
        super().__init__(f"{name}: {detail}" if detail else name)
        self.name = name


@dataclass(frozen=True)
class SimProfile:
    name: str
    demographics: Demographics
    ads_per_day: int = 8
    view_prob: float = 0.272
    click_prob: float = 0.02
    self_affinity: float = 4.5
    partner_affinity: float = 3.0
    recognition_seen_yes: float = 0.41
    recognition_unseen_yes: float = 0.21
    likert_noise: float = 0.8
    swaps_per_day: int = 40
    redact_count: int = 0
    seed: int = 0

    def __post_init__(self):
        for label, p in (
            ("view_prob", self.view_prob),
            ("click_prob", self.click_prob),
            ("recognition_seen_yes", self.recognition_seen_yes),
            ("recognition_unseen_yes", self.recognition_unseen_yes),
        ):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{label} must be in [0,1], got {p}")
        if self.ads_per_day < 0 or self.swaps_per_day < 0 or self.redact_count < 0:
            raise ValueError("volumes must be non-negative")

    @staticmethod
    def from_dict(doc: dict) -> "SimProfile":
        demo = doc.get("demographics", {})
        return SimProfile(
            name=str(doc["name"]),
            demographics=Demographics(
                age=str(demo["age"]),
                gender=str(demo["gender"]),
                race=frozenset(str(r) for r in demo["race"]),
                education=str(demo["education"]),
                income=str(demo["income"]),
                region=str(demo["region"]),
            ),
            **{
                key: doc[key]
                for key in (
                    "ads_per_day", "view_prob", "click_prob", "self_affinity",
                    "partner_affinity", "recognition_seen_yes", "recognition_unseen_yes",
                    "likert_noise", "swaps_per_day", "redact_count", "seed",
                )
                if key in doc
            },
        )


def profiles_from_file(path) -> list[SimProfile]:
    docs = json.loads(Path(path).read_text())
    if not isinstance(docs, list):
        raise ValueError("profiles file must hold a JSON array")
    return [SimProfile.from_dict(doc) for doc in docs]


def default_profiles(count: int, seed: int = 0, **overrides) -> list[SimProfile]:
    """Varied synthetic cohort; demographics cycle the vocabularies."""
    rng = random.Random(f"profiles:{seed}")
    out = []
    for i in range(count):
        race: frozenset[str]
        if i % 7 == 0:
            race = frozenset({RACES[i % len(RACES)], RACES[(i + 2) % len(RACES)]})
        else:
            race = frozenset({RACES[i % len(RACES)]})
        demo = Demographics(
            age=AGE_BANDS[i % len(AGE_BANDS)],
            gender=GENDERS[i % len(GENDERS)],
            race=race,
            education=EDUCATION_BANDS[i % len(EDUCATION_BANDS)],
            income=INCOME_BANDS[i % len(INCOME_BANDS)],
            region=REGIONS[i % len(REGIONS)],
        )
        out.append(
            SimProfile(
                name=f"profile-{i:03d}",
                demographics=demo,
                seed=rng.randrange(2**31),
                **overrides,
            )
        )
    return out


# ---- report --------------------------------------------------------------------------


@dataclass
class SimulationReport:
    seed: int
    compression: float
    threads: int
    profile_count: int
    summary: dict = field(default_factory=dict)
    final_states: dict = field(default_factory=dict)
    conservation: dict = field(default_factory=dict)
    invariants_checked: int = 0
    notifications: list = field(default_factory=list)
    exports: dict = field(default_factory=dict)   # kind -> list of csv rows

    def canonical_text(self) -> str:
        buf = io.StringIO()
        buf.write("# simulation report\n")
        buf.write(f"seed: {self.seed}\n")
        buf.write(f"compression: {self.compression:g}\n")
        buf.write(f"threads: {self.threads}\n")
        buf.write(f"profiles: {self.profile_count}\n")
        buf.write(f"invariants_checked: {self.invariants_checked}\n")
        for key in sorted(self.summary):
            buf.write(f"summary.{key}: {self.summary[key]}\n")
        for key in sorted(self.conservation):
            buf.write(f"conservation.{key}: {self.conservation[key]}\n")
        for pid in sorted(self.final_states):
            buf.write(f"state.{pid}: {self.final_states[pid]}\n")
        buf.write(f"notifications: {len(self.notifications)}\n")
        for kind, topic, detail in self.notifications:
            buf.write(f"  {kind} {topic} {detail}\n")
        for kind in sorted(self.exports):
            rows = self.exports[kind]
            buf.write(f"[export.{kind}] rows={len(rows)}\n")
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerows(rows)
        return buf.getvalue()

    def write(self, out_dir) -> None:
        root = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)
        for kind, rows in self.exports.items():
            with (root / f"{kind}.csv").open("w", newline="") as handle:
                csv.writer(handle, lineterminator="\n").writerows(rows)
        (root / "report.txt").write_text(self.canonical_text())


# ---- driver --------------------------------------------------------------------------


class _Auditor:
    def __init__(self):
        self.checked = 0

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.checked += 1
        if not ok:
            raise SimInvariantViolation(name, detail)


class _Harness:
    """One study server plus per-thread HTTP clients bound to it."""

    def __init__(self, config: StudyConfig, threads: int):
        from fastapi.testclient import TestClient

        self.app = create_app(config, clock=SimClock(), sim_mode=True)
        self.store = self.app.state.store
        self.config = config
        self.threads = threads
        self._local = threading.local()
        self._client_factory = lambda: TestClient(self.app, raise_server_exceptions=True)
        self.admin_headers = {"Authorization": f"Bearer {config.auditor_token}"}

    @property
    def client(self):
        client = getattr(self._local, "client", None)
        if client is None:
            client = self._client_factory()
            self._local.client = client
        return client

    def call(self, method: str, path: str, token: Optional[str] = None, expect: int = 200, **kw):
        headers = dict(kw.pop("headers", {}))
        if token:
            headers["Authorization"] = f"Bearer {token}"
        response = self.client.request(method, path, headers=headers, **kw)
        if response.status_code != expect:
            raise SimInvariantViolation(
                "http_status",
                f"{method} {path} -> {response.status_code}, wanted {expect}: {response.text[:200]}",
            )
        return response.json()

    def admin(self, method: str, path: str, **kw):
        return self.call(method, path, headers=self.admin_headers, **kw)


def _likert(rng: random.Random, center: float, noise: float) -> int:
    return max(1, min(7, round(rng.gauss(center, noise))))


def _answer_survey(
    harness: _Harness,
    auditor: _Auditor,
    profile: SimProfile,
    pid: str,
    token: str,
    phase: str,
    run_seed: int,
) -> dict:
    doc = harness.call("GET", "/v1/survey", token=token)["survey"]
    again = harness.call("GET", "/v1/survey", token=token)["survey"]
    auditor.check("survey_immutable_after_release", doc == again, doc["survey_id"])
    auditor.check("survey_phase", doc["phase"] == phase, f"{doc['phase']} != {phase}")

    per_ad = doc["per_ad"]
    auditor.check("per_ad_budget", len(per_ad) <= 24, str(len(per_ad)))
    auditor.check(
        "holistic_budget", len(doc["holistic"]["ads"]) <= 40, str(len(doc["holistic"]["ads"]))
    )
    counts: dict[tuple, int] = {}
    ids_seen = set()
    forced = "self" if phase == "midpoint" else "partner"
    for question in per_ad:
        cat = question["category"]
        key = (cat["seen_status"], cat["targeted_user"], cat["has_people"])
        counts[key] = counts.get(key, 0) + 1
        ad_id = question["ad"]["ad_id"]
        auditor.check("per_ad_unique_ads", ad_id not in ids_seen, ad_id)
        ids_seen.add(ad_id)
        if cat["seen_status"] == "seen":
            auditor.check(
                "seen_targeting_forced", cat["targeted_user"] == forced,
                f"{phase}: seen paired with {cat['targeted_user']}",
            )
    for key, n in counts.items():
        auditor.check(
            "per_category_cap", n <= harness.config.per_ad_per_category_max, f"{key}: {n}"
        )

    rng = random.Random(f"sim:{run_seed}:{pid}:{phase}:answers")
    answers: dict = {"per_ad": [], "experience": {}}
    if not doc["holistic"]["skipped"]:
        center = profile.self_affinity if phase == "midpoint" else profile.partner_affinity
        answers["holistic"] = {
            "recognition_bucket": rng.randint(1, 7),
            "interest": _likert(rng, center, profile.likert_noise),
            "representativity": _likert(rng, center, profile.likert_noise),
        }
    for question in per_ad:
        cat = question["category"]
        center = profile.self_affinity if cat["targeted_user"] == "self" else profile.partner_affinity
        p_yes = (
            profile.recognition_seen_yes
            if cat["seen_status"] == "seen"
            else profile.recognition_unseen_yes
        )
        if rng.random() < p_yes:
            recognition = "yes"
        else:
            recognition = "no" if rng.random() < 0.8 else "unsure"
        answers["per_ad"].append(
            {
                "ad_id": question["ad"]["ad_id"],
                "recognition": recognition,
                "interest": _likert(rng, center, profile.likert_noise),
                "representativity": _likert(rng, center, profile.likert_noise),
            }
        )
    answers["experience"] = {
        "rating": rng.randint(4, 7),
        "recommend": rng.randint(3, 7),
        "disabled_freq": rng.randint(1, 4),
        "incognito_freq": rng.randint(1, 3),
        "comments": f"sim {pid} {phase}",
    }
    ack = harness.call("POST", "/v1/survey", token=token, json={"answers": answers})
    auditor.check("survey_submitted", ack["submitted"] is True, pid)
    return doc


def _label_ads(harness: _Harness, blob_dir: str, state: pipeline.PipelineState) -> None:
    """Run persist + detect in process so per-ad pools have people labels."""
    blobs = pipeline.BlobStore(blob_dir)

    def fetch_image(url: str) -> bytes:
        return f"img:{url}".encode()

    def classify(path: str) -> list[pipeline.Detection]:
        data = Path(path).read_bytes()
        if (sum(data) % 2) == 0:
            return [pipeline.Detection("person", 0.9, (0.1, 0.1, 0.5, 0.5))]
        return [pipeline.Detection("car", 0.9, (0.2, 0.2, 0.4, 0.4))]

    with harness.store.lock:
        ads = sorted(harness.store.ads.values(), key=lambda a: a.id)
    clock = harness.store.clock
    pipeline.run_job("persist", ads, state, clock, image_fetcher=fetch_image, blobs=blobs)
    pipeline.run_job(
        "detect", ads, state, clock, classifier=classify, blobs=blobs,
        person_threshold=harness.config.person_confidence_threshold,
    )


def _audit_conservation(harness: _Harness, auditor: _Auditor) -> dict:
    overview = harness.admin("GET", "/v1/admin/overview")
    c = overview["conservation"]
    auditor.check(
        "conservation_ingest_split",
        c["ads_ingested"] == c["ads_stored"] + c["ads_duplicates"],
        json.dumps(c),
    )
    auditor.check("conservation_no_deletion", c["stored_now"] == c["ads_stored"], json.dumps(c))
    auditor.check(
        "conservation_exportable",
        c["exportable"] == c["stored_now"] - c["redacted"],
        json.dumps(c),
    )
    return c


def _audit_exports(
    exports: dict, requested_geometry: dict[str, tuple[int, int]], auditor: _Auditor
) -> None:
    participants = exports["participants"]
    header = participants[0]
    pid_col = header.index("participant_id")
    partner_col = header.index("partner_id")
    partner_of = {row[pid_col]: row[partner_col] for row in participants[1:]}
    for pid, partner in partner_of.items():
        if partner:
            auditor.check(
                "pairing_symmetric", partner_of.get(partner) == pid, f"{pid}<->{partner}"
            )
            auditor.check("pairing_no_self", partner != pid, pid)

    ads = exports["ads"]
    ad_header = ads[0]
    col = {name: ad_header.index(name) for name in ad_header}
    ad_owner: dict[str, str] = {}
    obs_pool: dict[str, list[tuple[str, int, int]]] = {}
    for row in ads[1:]:
        ad_owner[row[col["ad_id"]]] = row[col["participant_id"]]
        if row[col["phase"]] == "observational" and row[col["redacted"]] == "false":
            obs_pool.setdefault(row[col["participant_id"]], []).append(
                (row[col["ad_id"]], int(row[col["slot_width"]]), int(row[col["slot_height"]]))
            )

    deliveries = exports["deliveries"]
    d_header = deliveries[0]
    dcol = {name: d_header.index(name) for name in d_header}
    for row in deliveries[1:]:
        recipient = row[dcol["recipient_id"]]
        source = row[dcol["source_ad_id"]]
        width = int(row[dcol["slot_width"]])
        height = int(row[dcol["slot_height"]])
        partner = partner_of.get(recipient, "")
        auditor.check("swap_recipient_paired", bool(partner), recipient)
        auditor.check(
            "swap_source_from_partner", ad_owner.get(source) == partner,
            f"{source} owner {ad_owner.get(source)} != {partner}",
        )
        requested = requested_geometry.get(row[dcol["swap_delivery_id"]])
        if requested is not None:
            auditor.check(
                "swap_geometry_echo", (width, height) == requested,
                f"{(width, height)} != {requested}",
            )
        pool = obs_pool.get(partner, [])
        exact = [a for a, w, h in pool if (w, h) == (width, height)]
        if exact:
            auditor.check("swap_tier_exact", source in exact, source)
        elif height > 0:
            ratio = width / height
            near = [
                a for a, w, h in pool
                if h > 0 and abs((w / h) / ratio - 1.0) <= ASPECT_TOLERANCE
            ]
            if near:
                auditor.check("swap_tier_aspect", source in near, source)


def run_simulation(
    config: StudyConfig,
    profiles: list[SimProfile],
    compression: float = 20000.0,
    seed: int = 0,
    threads: int = 1,
    out_dir=None,
) -> SimulationReport:
    if len(profiles) < 2:
        raise ValueError("simulation needs at least 2 profiles")
    harness = _Harness(config, threads)
    auditor = _Auditor()
    report = SimulationReport(
        seed=seed, compression=compression, threads=threads, profile_count=len(profiles)
    )

    ruleset_ack = harness.admin("POST", "/v1/admin/ruleset", json={"text": DEFAULT_RULESET})
    published = harness.call("GET", "/v1/ruleset")["ruleset"]
    auditor.check(
        "ruleset_version_published", published["version"] == ruleset_ack["version"],
        json.dumps(ruleset_ack),
    )

    # Enrollment: waitlist -> cohort -> onboarding codes -> register.
    pid_of: dict[str, str] = {}
    profile_of: dict[str, SimProfile] = {}
    for profile in profiles:
        demo = profile.demographics
        ack = harness.admin(
            "POST", "/v1/admin/waitlist",
            json={
                "demographics": {
                    "age": demo.age, "gender": demo.gender, "race": sorted(demo.race),
                    "education": demo.education, "income": demo.income, "region": demo.region,
                }
            },
        )
        pid_of[profile.name] = ack["participant_id"]
        profile_of[ack["participant_id"]] = profile
    selected = harness.admin(
        "POST", "/v1/admin/select_cohort", json={"quota": len(profiles)}
    )["selected"]
    auditor.check(
        "cohort_covers_waitlist_at_full_quota",
        sorted(selected) == sorted(pid_of.values()),
        f"{len(selected)} of {len(profiles)}",
    )
    tokens: dict[str, str] = {}
    for pid in sorted(selected):
        code = harness.admin(
            "POST", "/v1/admin/grant_onboarding", json={"participant_id": pid}
        )["onboarding_code"]
        ack = harness.call(
            "POST", "/v1/register",
            json={"onboarding_code": code, "instance_info": f"sim-{pid}"},
        )
        auditor.check("register_echoes_participant", ack["participant_id"] == pid, pid)
        tokens[pid] = ack["token"]

    pairs = harness.admin("POST", "/v1/admin/assign_pairs", json={})
    harness.admin("POST", "/v1/admin/start_study", json={})
    now = from_iso(harness.admin("GET", "/v1/admin/overview")["server_time"])

    event_counter: dict[str, int] = {pid: 0 for pid in tokens}
    ledger_lock = threading.Lock()
    requested_geometry: dict[str, tuple[int, int]] = {}
    total_swap_requests = 0

    def next_event_id(pid: str) -> str:
        with ledger_lock:
            event_counter[pid] += 1
            return f"{pid}-ev-{event_counter[pid]}"

    def ingest_day(pid: str, tag: str, day: int, base_time: float, view_own: bool) -> None:
        profile = profile_of[pid]
        token = tokens[pid]
        rng = random.Random(f"sim:{seed}:{pid}:{tag}:{day}")
        ads_payload = []
        for i in range(profile.ads_per_day):
            width, height = GEOMETRIES[i % len(GEOMETRIES)]
            ads_payload.append(
                {
                    "client_ad_id": f"{pid}-{tag}-{day}-{i}",
                    "payload_kind": "image",
                    "image_url": f"https://cdn.example/{pid}/{tag}-{day}-{i}.png",
                    "target_url": f"https://ads.example/{pid}/{tag}/{day}/{i}",
                    "source_page_url": f"https://news.example/{tag}/page{day}",
                    "slot_geometry": {"w": width, "h": height},
                    "captured_at": to_iso(base_time + i),
                }
            )
        if ads_payload:
            ack = harness.call("POST", "/v1/ads", token=token, json={"ads": ads_payload})
            auditor.check(
                "ingest_acknowledged",
                ack["stored"] + ack["duplicates"] == len(ads_payload),
                json.dumps(ack),
            )
        if not view_own:
            return
        events = []
        for i in range(profile.ads_per_day):
            if rng.random() < profile.view_prob:
                events.append(
                    {
                        "client_event_id": next_event_id(pid),
                        "kind": "view",
                        "ref_kind": "ad",
                        "ad_ref": f"{pid}-{tag}-{day}-{i}",
                    }
                )
                if rng.random() < profile.click_prob:
                    events.append(
                        {
                            "client_event_id": next_event_id(pid),
                            "kind": "click",
                            "ref_kind": "ad",
                            "ad_ref": f"{pid}-{tag}-{day}-{i}",
                        }
                    )
        if events:
            ack = harness.call("POST", "/v1/events", token=token, json={"events": events})
            auditor.check(
                "events_applied_cleanly",
                ack["applied"] == len(events) and not ack["errors"],
                json.dumps(ack),
            )

    def swap_day(pid: str, day: int) -> None:
        nonlocal total_swap_requests
        profile = profile_of[pid]
        token = tokens[pid]
        rng = random.Random(f"sim:{seed}:{pid}:swap:{day}")
        events = []
        for j in range(profile.swaps_per_day):
            width, height = GEOMETRIES[j % len(GEOMETRIES)]
            ack = harness.call("GET", f"/v1/swap?w={width}&h={height}", token=token)
            geometry = ack["slot_geometry"]
            auditor.check(
                "swap_geometry_response",
                geometry == {"w": width, "h": height},
                json.dumps(geometry),
            )
            delivery_id = ack["swap_delivery_id"]
            with ledger_lock:
                requested_geometry[delivery_id] = (width, height)
                total_swap_requests += 1
            if rng.random() < profile.view_prob:
                events.append(
                    {
                        "client_event_id": next_event_id(pid),
                        "kind": "view",
                        "ref_kind": "swap",
                        "ad_ref": delivery_id,
                    }
                )
                if rng.random() < profile.click_prob:
                    events.append(
                        {
                            "client_event_id": next_event_id(pid),
                            "kind": "click",
                            "ref_kind": "swap",
                            "ad_ref": delivery_id,
                        }
                    )
        if events:
            ack = harness.call("POST", "/v1/events", token=token, json={"events": events})
            auditor.check(
                "events_applied_cleanly",
                ack["applied"] == len(events) and not ack["errors"],
                json.dumps(ack),
            )

    def for_each_participant(pids, work) -> None:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(work, pids))
        else:
            for pid in pids:
                work(pid)

    active = sorted(tokens)

    # Observational week.
    for day in range(1, config.observational_days + 1):
        for_each_participant(
            active, lambda pid, d=day, t=now: ingest_day(pid, "obs", d, t, True)
        )
        _audit_conservation(harness, auditor)
        now = from_iso(
            harness.admin(
                "POST", "/v1/admin/clock_advance", json={"seconds": DAY_SECONDS}
            )["now"]
        )

    # Optional redactions before the midpoint survey is generated.
    for pid in active:
        profile = profile_of[pid]
        if profile.redact_count:
            mine = harness.call("GET", "/v1/me/ads", token=tokens[pid])["ads"]
            candidates = [a["ad_id"] for a in mine if not a["redacted"]]
            doomed = candidates[-profile.redact_count:]
            ack = harness.call(
                "POST", "/v1/me/redact", token=tokens[pid], json={"ad_ids": doomed}
            )
            auditor.check("redaction_counts_new_ids", ack["redacted"] == len(doomed), pid)

    blob_dir = tempfile.mkdtemp(prefix="adswap-sim-blobs-")
    pipeline_state = pipeline.PipelineState()
    _label_ads(harness, blob_dir, pipeline_state)

    released = harness.admin("POST", "/v1/admin/release_survey", json={"phase": "midpoint"})
    report.summary["midpoint_released"] = released["released"]
    view = harness.admin("GET", "/v1/admin/participants")
    in_midpoint = sorted(
        p["participant_id"] for p in view["participants"] if p["state"] == "midpoint_survey"
    )
    for pid in in_midpoint:
        _answer_survey(harness, auditor, profile_of[pid], pid, tokens[pid], "midpoint", seed)
    report.summary["midpoint_answered"] = len(in_midpoint)

    # Survey milestones move participants forward on the next tick.
    harness.admin("POST", "/v1/admin/tick", json={})
    view = harness.admin("GET", "/v1/admin/participants")
    in_intervention = sorted(
        p["participant_id"] for p in view["participants"] if p["state"] == "intervention"
    )

    # Intervention week: keep capturing own ads (hidden client-side, so no
    # view events on them) and serve partner swaps with telemetry.
    for day in range(1, config.intervention_days + 1):
        for_each_participant(
            in_intervention, lambda pid, d=day, t=now: ingest_day(pid, "int", d, t, False)
        )
        for_each_participant(in_intervention, lambda pid, d=day: swap_day(pid, d))
        _audit_conservation(harness, auditor)
        now = from_iso(
            harness.admin(
                "POST", "/v1/admin/clock_advance", json={"seconds": DAY_SECONDS}
            )["now"]
        )

    _label_ads(harness, blob_dir, pipeline_state)
    released = harness.admin("POST", "/v1/admin/release_survey", json={"phase": "final"})
    report.summary["final_released"] = released["released"]
    final_answered = 0
    view = harness.admin("GET", "/v1/admin/participants")
    in_final = sorted(
        p["participant_id"] for p in view["participants"] if p["state"] == "final_survey"
    )
    for pid in in_final:
        _answer_survey(harness, auditor, profile_of[pid], pid, tokens[pid], "final", seed)
        final_answered += 1
    report.summary["final_answered"] = final_answered
    harness.admin("POST", "/v1/admin/tick", json={})
    report.summary["pairs"] = len(pairs["pairs"])
    report.summary["unpaired"] = 1 if pairs["unpaired"] else 0
    report.summary["swap_requests"] = total_swap_requests

    report.conservation = _audit_conservation(harness, auditor)
    for kind in ("ads", "deliveries", "surveys", "participants"):
        text = harness.client.get(
            f"/v1/export?kind={kind}&include_redacted_stubs=true",
            headers=harness.admin_headers,
        )
        if text.status_code != 200:
            raise SimInvariantViolation("export_available", f"{kind}: {text.status_code}")
        report.exports[kind] = list(csv.reader(io.StringIO(text.text)))
    _audit_exports(report.exports, requested_geometry, auditor)

    participants_rows = report.exports["participants"]
    header = participants_rows[0]
    pid_col, state_col = header.index("participant_id"), header.index("state")
    report.final_states = {row[pid_col]: row[state_col] for row in participants_rows[1:]}
    report.notifications = [
        (n["kind"], n["participant_id"], n["detail"])
        for n in harness.admin("GET", "/v1/admin/notifications")["notifications"]
    ]
    report.invariants_checked = auditor.checked
    if out_dir is not None:
        report.write(out_dir)
    return report
