"""In-memory study store: the single source of truth behind the HTTP API.

One coarse lock serializes all mutations, which trivially satisfies the
per-participant single-writer rule and keeps counter updates atomic; reads
take the same lock and therefore see consistent snapshots. Identifier,
token, and swap-selection randomness all derive from config.rng_seed, so a
simulated run with a fixed seed is bit-reproducible.
"""

from __future__ import annotations

import hashlib
import random
import threading
from typing import Iterator, Optional

from . import model, surveys
from .clock import Clock, from_iso, to_iso
from .filters import ClientRulesetDoc, RuleSet, compile_ruleset, parse_filter_list
from .intervention import SwapDelivery, SwapError, build_swap_pool, select_swap_ad
from .model import (
    AdRecord,
    Demographics,
    LifecycleState,
    Milestone,
    Participant,
    Phase,
    StudyConfig,
    StudyError,
)

PAYLOAD_KINDS = ("image", "text")
EXPORT_KINDS = ("ads", "deliveries", "surveys", "participants")


class ApiError(Exception):
    """Domain failure with an HTTP status for the transport layer."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _derived_rng(seed: int, label: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


class StudyStore:
    def __init__(self, config: StudyConfig, clock: Clock, sim_mode: bool = False):
        self.config = config
        self.clock = clock
        self.sim_mode = sim_mode
        self.lock = threading.RLock()

        self.participants: dict[str, Participant] = {}
        self.ads: dict[str, AdRecord] = {}
        self.ads_by_participant: dict[str, list[str]] = {}
        self.client_ad_index: dict[tuple[str, str], str] = {}
        self.deliveries: dict[str, SwapDelivery] = {}
        self.deliveries_by_recipient: dict[str, list[str]] = {}
        self.event_ids: dict[str, set[str]] = {}
        self.tokens: dict[str, str] = {}
        self.token_of: dict[str, str] = {}
        self.codes: dict[str, str] = {}
        self.used_codes: set[str] = set()
        self.surveys: dict[tuple[str, str], surveys.SurveyInstance] = {}
        self.notifications: list[dict] = []
        self.study_started = False

        self.counters = {
            "ads_ingested": 0,
            "ads_stored": 0,
            "ads_duplicates": 0,
            "events_applied": 0,
            "events_duplicates": 0,
            "events_dropped": 0,
            "events_errors": 0,
        }

        self._seq = {"participant": 0, "ad": 0, "delivery": 0}
        self._id_rng = _derived_rng(config.rng_seed, "identifiers")
        self._swap_rng = _derived_rng(config.rng_seed, "swap-selection")

        self.ruleset: RuleSet
        self.ruleset_doc: ClientRulesetDoc
        self.set_ruleset("", version=1)

    # ---- id and credential generation -------------------------------------

    def _next_id(self, kind: str, prefix: str, width: int) -> str:
        self._seq[kind] += 1
        return f"{prefix}{self._seq[kind]:0{width}d}"

    def _new_token(self) -> str:
        return f"tok-{self._id_rng.getrandbits(128):032x}"

    def _new_code(self) -> str:
        return f"code-{self._id_rng.getrandbits(64):016x}"

    # ---- auth --------------------------------------------------------------

    def participant_for_token(self, token: str) -> Participant:
        pid = self.tokens.get(token)
        if pid is None:
            raise ApiError(401, "invalid_token", "unknown or revoked credential")
        return self.participants[pid]

    def require_auditor(self, token: str) -> None:
        if token != self.config.auditor_token:
            raise ApiError(401, "unauthorized", "auditor credential required")

    # ---- waitlist and cohort -----------------------------------------------

    def add_waitlist(self, demographics: Demographics) -> Participant:
        with self.lock:
            demographics.validate()
            pid = self._next_id("participant", "p", 5)
            participant = Participant(id=pid, demographics=demographics)
            self.participants[pid] = participant
            self.ads_by_participant[pid] = []
            self.deliveries_by_recipient[pid] = []
            self.event_ids[pid] = set()
            return participant

    def select_cohort(self, quota: int) -> list[str]:
        with self.lock:
            waitlisted = sorted(
                (p for p in self.participants.values() if p.state is LifecycleState.WAITLISTED),
                key=lambda p: p.id,
            )
            try:
                chosen = model.select_balanced_cohort(waitlisted, quota, self.config.rng_seed)
            except model.CohortError as exc:
                raise ApiError(409, "cohort_error", str(exc))
            for p in chosen:
                model.transition(p, LifecycleState.SELECTED, self.clock.now())
            return [p.id for p in chosen]

    def grant_onboarding(self, pid: str) -> str:
        with self.lock:
            participant = self._participant(pid)
            if participant.state is not LifecycleState.SELECTED:
                raise ApiError(
                    409, "illegal_state", f"{pid} is {participant.state.value}, not selected"
                )
            model.transition(participant, LifecycleState.ONBOARDING, self.clock.now())
            return self._issue_code(pid)

    def reissue_code(self, pid: str) -> str:
        """Fresh single-use code for the reconnect flow."""
        with self.lock:
            participant = self._participant(pid)
            if participant.terminal:
                raise ApiError(409, "terminal", f"{pid} is {participant.state.value}")
            if participant.state in (LifecycleState.WAITLISTED, LifecycleState.SELECTED):
                raise ApiError(409, "illegal_state", "participant has not begun onboarding")
            return self._issue_code(pid)

    def _issue_code(self, pid: str) -> str:
        code = self._new_code()
        self.codes[code] = pid
        return code

    def _participant(self, pid: str) -> Participant:
        participant = self.participants.get(pid)
        if participant is None:
            raise ApiError(404, "unknown_participant", f"no participant {pid}")
        return participant

    # ---- registration -------------------------------------------------------

    def register(self, code: str, instance_info: str) -> tuple[str, str]:
        """Exchange a single-use onboarding code for a fresh bearer token."""
        with self.lock:
            pid = self.codes.get(code)
            if pid is None or code in self.used_codes:
                raise ApiError(403, "bad_code", "unknown or already-used onboarding code")
            participant = self.participants[pid]
            if participant.terminal:
                raise ApiError(403, "terminal", f"participant is {participant.state.value}")
            self.used_codes.add(code)
            old = self.token_of.pop(pid, None)
            if old is not None:
                del self.tokens[old]
            token = self._new_token()
            self.tokens[token] = pid
            self.token_of[pid] = token
            if participant.onboarded_at is None:
                participant.onboarded_at = self.clock.now()
                participant.milestones_completed.add(Milestone.ONBOARDING.value)
            return token, pid

    # ---- study control -------------------------------------------------------

    def assign_pairs(self) -> model.Pairing:
        with self.lock:
            eligible = sorted(
                (
                    p
                    for p in self.participants.values()
                    if p.state in (LifecycleState.ONBOARDING, LifecycleState.OBSERVATIONAL)
                    and p.id in self.token_of
                ),
                key=lambda p: p.id,
            )
            try:
                return model.assign_swap_pairs(eligible, self.config.rng_seed)
            except model.PairingError as exc:
                raise ApiError(409, "pairing_error", str(exc))

    def start_study(self) -> int:
        """Move every registered onboarding participant into ad collection."""
        with self.lock:
            now = self.clock.now()
            count = 0
            for participant in sorted(self.participants.values(), key=lambda p: p.id):
                if participant.state is LifecycleState.ONBOARDING and participant.id in self.token_of:
                    model.transition(participant, LifecycleState.OBSERVATIONAL, now)
                    count += 1
            self.study_started = True
            return count

    def notify(self, pid: str, kind: str, detail: str) -> None:
        self.notifications.append(
            {"at": self.clock.now(), "participant_id": pid, "kind": kind, "detail": detail}
        )

    def unredacted_count(self, pid: str, phase: Phase) -> int:
        return sum(
            1
            for ad_id in self.ads_by_participant[pid]
            if self.ads[ad_id].phase is phase and not self.ads[ad_id].redacted
        )

    def tick(self) -> None:
        """One scheduler pass: advance every participant that is due."""
        with self.lock:
            now = self.clock.now()
            for participant in sorted(self.participants.values(), key=lambda p: p.id):
                if participant.terminal:
                    continue
                if participant.state is LifecycleState.OBSERVATIONAL:
                    count = self.unredacted_count(participant.id, Phase.OBSERVATIONAL)
                elif participant.state is LifecycleState.INTERVENTION:
                    count = self.unredacted_count(participant.id, Phase.INTERVENTION_ORIGINAL)
                elif participant.state in (
                    LifecycleState.MIDPOINT_SURVEY,
                    LifecycleState.FINAL_SURVEY,
                ):
                    count = 0
                else:
                    continue
                model.advance_phase(participant, now, self.config, count, self.notify)

    def clock_advance(self, seconds: float) -> float:
        if not self.sim_mode:
            raise ApiError(403, "not_sim", "clock control only exists in simulation mode")
        now = self.clock.advance(seconds)  # type: ignore[attr-defined]
        self.tick()
        return now

    def offboard(self, pid: str) -> None:
        with self.lock:
            participant = self._participant(pid)
            if participant.terminal:
                raise ApiError(409, "terminal", f"{pid} already {participant.state.value}")
            model.transition(participant, LifecycleState.OFFBOARDED, self.clock.now())

    # ---- ads -----------------------------------------------------------------

    def ingest_ads(self, token: str, ads: list[dict]) -> dict:
        with self.lock:
            participant = self.participant_for_token(token)
            if participant.terminal:
                raise ApiError(409, "terminal", f"participant is {participant.state.value}")
            phase = participant.active_phase
            if phase is None:
                raise ApiError(
                    409, "not_collecting", f"no ad collection in state {participant.state.value}"
                )
            # Validate the whole batch before touching any state so a bad
            # entry cannot leave counters and rows half-applied.
            batch = [self._validate_ad(ad, i) for i, ad in enumerate(ads)]
            stored = duplicates = 0
            for parsed in batch:
                self.counters["ads_ingested"] += 1
                key = (participant.id, parsed["client_ad_id"])
                if key in self.client_ad_index:
                    duplicates += 1
                    continue
                ad_id = self._next_id("ad", "ad", 8)
                record = AdRecord(
                    id=ad_id,
                    participant_id=participant.id,
                    phase=phase,
                    payload_kind=parsed["payload_kind"],
                    target_url=parsed["target_url"],
                    source_page_url=parsed["source_page_url"],
                    image_url=parsed["image_url"],
                    text=parsed["text"],
                    slot_width=parsed["slot_width"],
                    slot_height=parsed["slot_height"],
                    captured_at=parsed["captured_at"],
                )
                self.ads[ad_id] = record
                self.ads_by_participant[participant.id].append(ad_id)
                self.client_ad_index[key] = ad_id
                stored += 1
            self.counters["ads_stored"] += stored
            self.counters["ads_duplicates"] += duplicates
            return {"stored": stored, "duplicates": duplicates}

    def _validate_ad(self, ad: dict, index: int) -> dict:
        def need(field: str) -> object:
            value = ad.get(field)
            if value in (None, ""):
                raise ApiError(422, "bad_ad", f"ads[{index}].{field} required")
            return value

        payload_kind = need("payload_kind")
        if payload_kind not in PAYLOAD_KINDS:
            raise ApiError(422, "bad_ad", f"ads[{index}].payload_kind must be image or text")
        geometry = ad.get("slot_geometry") or {}
        width, height = geometry.get("w"), geometry.get("h")
        if not isinstance(width, int) or not isinstance(height, int) or width < 0 or height < 0:
            raise ApiError(422, "bad_ad", f"ads[{index}].slot_geometry needs integer w and h")
        captured_raw = need("captured_at")
        try:
            captured_at = from_iso(str(captured_raw))
        except ValueError:
            raise ApiError(422, "bad_ad", f"ads[{index}].captured_at not an ISO instant")
        return {
            "client_ad_id": str(need("client_ad_id")),
            "payload_kind": payload_kind,
            "target_url": str(need("target_url")),
            "source_page_url": str(need("source_page_url")),
            "image_url": str(need("image_url")) if payload_kind == "image" else None,
            "text": str(need("text")) if payload_kind == "text" else None,
            "slot_width": width,
            "slot_height": height,
            "captured_at": captured_at,
        }

    def my_ads(self, token: str) -> list[AdRecord]:
        with self.lock:
            participant = self.participant_for_token(token)
            return [self.ads[a] for a in self.ads_by_participant[participant.id]]

    def redact(self, token: str, ad_ids: list[str]) -> model.RedactionReceipt:
        with self.lock:
            participant = self.participant_for_token(token)
            owned = [self.ads[a] for a in self.ads_by_participant[participant.id]]
            try:
                return model.redact_ads(participant, owned, ad_ids)
            except model.RedactionError as exc:
                raise ApiError(403, "foreign_ad", str(exc))

    def apply_labels(self, labels: list[tuple[str, bool]]) -> dict:
        """Attach has-people labels computed offline by the detect job.

        Redacted ads are skipped (their creative is gone; nothing samples
        them anyway). Unknown ids are reported, not fatal, so a stale
        label file degrades instead of aborting."""
        with self.lock:
            applied = skipped = 0
            unknown: list[str] = []
            for ad_id, has_people in labels:
                ad = self.ads.get(ad_id)
                if ad is None:
                    unknown.append(ad_id)
                elif ad.redacted:
                    skipped += 1
                else:
                    ad.has_people = has_people
                    applied += 1
            return {"applied": applied, "skipped": skipped, "unknown": unknown}

    # ---- events ----------------------------------------------------------------

    def ingest_events(self, token: str, events: list[dict]) -> dict:
        with self.lock:
            participant = self.participant_for_token(token)
            seen = self.event_ids[participant.id]
            applied = duplicates = dropped = 0
            errors: list[dict] = []
            for i, event in enumerate(events):
                event_id = event.get("client_event_id")
                kind = event.get("kind")
                ref = event.get("ad_ref")
                ref_kind = event.get("ref_kind", "ad")
                if not event_id or kind not in ("view", "click") or not ref:
                    errors.append({"index": i, "error": "malformed_event"})
                    continue
                if event_id in seen:
                    duplicates += 1
                    continue
                if ref_kind == "ad":
                    ad_id = self.client_ad_index.get((participant.id, ref))
                    if ad_id is None:
                        errors.append({"index": i, "error": "unknown_ad_ref"})
                        continue
                    record = self.ads[ad_id]
                    seen.add(event_id)
                    if record.redacted:
                        dropped += 1
                        continue
                    if kind == "view":
                        record.view_count += 1
                    else:
                        record.click_count += 1
                    applied += 1
                elif ref_kind == "swap":
                    delivery = self.deliveries.get(ref)
                    if delivery is None or delivery.recipient_id != participant.id:
                        errors.append({"index": i, "error": "unknown_ad_ref"})
                        continue
                    seen.add(event_id)
                    if kind == "view":
                        delivery.view_count += 1
                    else:
                        delivery.click_count += 1
                    applied += 1
                else:
                    errors.append({"index": i, "error": "bad_ref_kind"})
            self.counters["events_applied"] += applied
            self.counters["events_duplicates"] += duplicates
            self.counters["events_dropped"] += dropped
            self.counters["events_errors"] += len(errors)
            return {"applied": applied, "duplicates": duplicates, "dropped": dropped, "errors": errors}

    # ---- swap serving -------------------------------------------------------------

    def serve_swap(self, token: str, width: int, height: int) -> tuple[SwapDelivery, AdRecord]:
        with self.lock:
            participant = self.participant_for_token(token)
            if participant.state is not LifecycleState.INTERVENTION:
                raise ApiError(
                    409, "not_intervention", f"no swaps in state {participant.state.value}"
                )
            if participant.partner_id is None:
                raise ApiError(409, "unpaired", "participant has no swap partner")
            partner = self.participants[participant.partner_id]
            partner_ads = [self.ads[a] for a in self.ads_by_participant[partner.id]]
            pool = build_swap_pool(partner, partner_ads)
            try:
                ad = select_swap_ad(pool, (width, height), self._swap_rng)
            except SwapError as exc:
                raise ApiError(409, "empty_pool", str(exc))
            delivery = SwapDelivery(
                swap_delivery_id=self._next_id("delivery", "sw", 8),
                recipient_id=participant.id,
                source_ad_id=ad.id,
                slot_width=width,
                slot_height=height,
                served_at=self.clock.now(),
            )
            self.deliveries[delivery.swap_delivery_id] = delivery
            self.deliveries_by_recipient[participant.id].append(delivery.swap_delivery_id)
            return delivery, ad

    # ---- ruleset --------------------------------------------------------------------

    def set_ruleset(self, text: str, version: Optional[int] = None) -> list:
        with self.lock:
            if version is None:
                version = self.ruleset.version + 1
            ruleset, warnings = parse_filter_list(text, version=version)
            self.ruleset = ruleset
            self.ruleset_doc = compile_ruleset(ruleset)
            return warnings

    # ---- surveys ----------------------------------------------------------------------

    def _survey_phase_for_state(self, state: LifecycleState) -> Optional[str]:
        if state is LifecycleState.MIDPOINT_SURVEY:
            return surveys.MIDPOINT
        if state is LifecycleState.FINAL_SURVEY:
            return surveys.FINAL
        return None

    def pregenerate_survey(self, pid: str, phase: str) -> surveys.SurveyInstance:
        with self.lock:
            cached = self.surveys.get((pid, phase))
            if cached is not None:
                return cached
            participant = self._participant(pid)
            expected_state = (
                LifecycleState.MIDPOINT_SURVEY if phase == surveys.MIDPOINT else LifecycleState.FINAL_SURVEY
            )
            if participant.state is not expected_state:
                raise ApiError(
                    409,
                    "not_gated",
                    f"{pid} is {participant.state.value}; {phase} survey requires {expected_state.value}",
                )
            instance = self._generate_survey_unchecked(participant, phase)
            self.surveys[(pid, phase)] = instance
            return instance

    def _generate_survey_unchecked(
        self, participant: Participant, phase: str
    ) -> surveys.SurveyInstance:
        own = [self.ads[a] for a in self.ads_by_participant[participant.id]]
        partner_ads: list[AdRecord] = []
        if participant.partner_id is not None:
            partner_ads = [self.ads[a] for a in self.ads_by_participant[participant.partner_id]]
        viewed_sources = frozenset(
            self.deliveries[d].source_ad_id
            for d in self.deliveries_by_recipient[participant.id]
            if self.deliveries[d].view_count > 0
        )
        candidates = surveys.assemble_candidates(phase, own, partner_ads, viewed_sources)
        rng = surveys.survey_rng(self.config.rng_seed, participant.id, phase)
        return surveys.generate_survey(participant.id, phase, candidates, self.config, rng)

    def release_survey(self, phase: str) -> int:
        """Pregenerate (if needed) and release the survey for every eligible participant."""
        if phase not in (surveys.MIDPOINT, surveys.FINAL):
            raise ApiError(422, "bad_phase", f"unknown survey phase {phase!r}")
        with self.lock:
            expected_state = (
                LifecycleState.MIDPOINT_SURVEY if phase == surveys.MIDPOINT else LifecycleState.FINAL_SURVEY
            )
            released = 0
            for participant in sorted(self.participants.values(), key=lambda p: p.id):
                if participant.state is expected_state:
                    instance = self.pregenerate_survey(participant.id, phase)
                    if not instance.released:
                        instance.released = True
                        released += 1
            return released

    def get_survey(self, token: str) -> surveys.SurveyInstance:
        with self.lock:
            participant = self.participant_for_token(token)
            phase = self._survey_phase_for_state(participant.state)
            if phase is None:
                raise ApiError(409, "no_survey", f"no survey in state {participant.state.value}")
            instance = self.surveys.get((participant.id, phase))
            if instance is None or not instance.released:
                raise ApiError(404, "not_released", f"{phase} survey not released yet")
            return instance

    def submit_survey(self, token: str, answers: dict) -> surveys.SurveyInstance:
        with self.lock:
            participant = self.participant_for_token(token)
            instance = self.get_survey(token)
            try:
                surveys.submit_response(instance, answers, self.clock.now())
            except surveys.ValidationError as exc:
                raise ApiError(422, "invalid_answers", str(exc))
            except surveys.SurveyError as exc:
                raise ApiError(409, "survey_rejected", str(exc))
            milestone = (
                Milestone.MIDPOINT_SURVEY if instance.phase == surveys.MIDPOINT else Milestone.FINAL_SURVEY
            )
            participant.milestones_completed.add(milestone.value)
            return instance

    # ---- export and ledgers ------------------------------------------------------------

    def conservation(self) -> dict:
        with self.lock:
            redacted = sum(1 for ad in self.ads.values() if ad.redacted)
            stored = len(self.ads)
            return {
                "ads_ingested": self.counters["ads_ingested"],
                "ads_stored": self.counters["ads_stored"],
                "ads_duplicates": self.counters["ads_duplicates"],
                "stored_now": stored,
                "redacted": redacted,
                "exportable": stored - redacted,
            }

    def export_rows(
        self,
        kind: str,
        phase: Optional[str] = None,
        participant: Optional[str] = None,
        include_redacted_stubs: bool = False,
    ) -> list[list[str]]:
        """Materialized rows (header first); built under the lock so the
        snapshot is consistent even while clients keep writing."""
        if kind not in EXPORT_KINDS:
            raise ApiError(422, "bad_kind", f"kind must be one of {', '.join(EXPORT_KINDS)}")
        with self.lock:
            if kind == "ads":
                return list(self._export_ads(phase, participant, include_redacted_stubs))
            if kind == "deliveries":
                return list(self._export_deliveries(participant))
            if kind == "surveys":
                return list(self._export_surveys(participant))
            return list(self._export_participants())

    AD_COLUMNS = [
        "ad_id", "participant_id", "phase", "payload_kind", "image_url", "stored_image_ref",
        "text", "target_url", "resolved_target_url", "source_page_url", "slot_width",
        "slot_height", "view_count", "click_count", "has_people", "captured_at", "redacted",
    ]

    def _export_ads(self, phase, participant, include_stubs) -> Iterator[list[str]]:
        yield list(self.AD_COLUMNS)
        for ad_id in sorted(self.ads):
            ad = self.ads[ad_id]
            if phase and ad.phase.value != phase:
                continue
            if participant and ad.participant_id != participant:
                continue
            if ad.redacted and not include_stubs:
                continue
            tri = "" if ad.has_people is None else ("true" if ad.has_people else "false")
            yield [
                ad.id, ad.participant_id, ad.phase.value, ad.payload_kind,
                ad.image_url or "", ad.stored_image_ref or "", ad.text or "",
                ad.target_url, ad.resolved_target_url or "", ad.source_page_url,
                str(ad.slot_width), str(ad.slot_height), str(ad.view_count),
                str(ad.click_count), tri, to_iso(ad.captured_at) if ad.captured_at else "",
                "true" if ad.redacted else "false",
            ]

    DELIVERY_COLUMNS = [
        "swap_delivery_id", "recipient_id", "source_ad_id", "slot_width", "slot_height",
        "served_at", "view_count", "click_count",
    ]

    def _export_deliveries(self, participant) -> Iterator[list[str]]:
        yield list(self.DELIVERY_COLUMNS)
        for delivery_id in sorted(self.deliveries):
            d = self.deliveries[delivery_id]
            if participant and d.recipient_id != participant:
                continue
            yield [
                d.swap_delivery_id, d.recipient_id, d.source_ad_id, str(d.slot_width),
                str(d.slot_height), to_iso(d.served_at), str(d.view_count), str(d.click_count),
            ]

    SURVEY_COLUMNS = [
        "survey_id", "participant_id", "phase", "section", "ad_id", "seen_status",
        "targeted_user", "has_people", "recognition", "interest", "representativity",
        "recognition_bucket", "holistic_ad_count", "rating", "recommend", "disabled_freq",
        "incognito_freq", "submitted_at",
    ]

    def _export_surveys(self, participant) -> Iterator[list[str]]:
        yield list(self.SURVEY_COLUMNS)
        for key in sorted(self.surveys):
            instance = self.surveys[key]
            if participant and instance.participant_id != participant:
                continue
            submitted = to_iso(instance.submitted_at) if instance.submitted_at else ""
            base = [instance.survey_id, instance.participant_id, instance.phase]
            holistic = instance.holistic
            if not holistic.skipped:
                yield base + [
                    "holistic", "", "", "", "", "",
                    _opt(holistic.interest), _opt(holistic.representativity),
                    _opt(holistic.recognition_bucket), str(len(holistic.ad_ids)),
                    "", "", "", "", submitted,
                ]
            for question in instance.per_ad:
                yield base + [
                    "per_ad", question.ad_id, question.category.seen_status,
                    question.category.targeted_user, question.category.has_people,
                    question.recognition or "", _opt(question.interest),
                    _opt(question.representativity), "", "", "", "", "", "", submitted,
                ]
            exp = instance.experience
            yield base + [
                "experience", "", "", "", "", "", "", "", "", "",
                _opt(exp.rating), _opt(exp.recommend), _opt(exp.disabled_freq),
                _opt(exp.incognito_freq), submitted,
            ]

    PARTICIPANT_COLUMNS = [
        "participant_id", "age", "gender", "race", "education", "income", "region",
        "state", "partner_id", "onboarded_at", "milestones", "redaction_count",
        "excluded_from_intervention",
    ]

    def _export_participants(self) -> Iterator[list[str]]:
        yield list(self.PARTICIPANT_COLUMNS)
        for pid in sorted(self.participants):
            p = self.participants[pid]
            d = p.demographics
            yield [
                p.id, d.age, d.gender, "|".join(sorted(d.race)), d.education, d.income,
                d.region, p.state.value, p.partner_id or "",
                to_iso(p.onboarded_at) if p.onboarded_at else "",
                "|".join(sorted(p.milestones_completed)), str(p.redaction_count),
                "true" if p.excluded_from_intervention else "false",
            ]

    # ---- admin views ----------------------------------------------------------------------

    def overview(self) -> dict:
        with self.lock:
            by_state: dict[str, int] = {}
            for p in self.participants.values():
                by_state[p.state.value] = by_state.get(p.state.value, 0) + 1
            ads_by_phase: dict[str, int] = {}
            for ad in self.ads.values():
                if not ad.redacted:
                    ads_by_phase[ad.phase.value] = ads_by_phase.get(ad.phase.value, 0) + 1
            surveys_released = sum(1 for s in self.surveys.values() if s.released)
            surveys_submitted = sum(1 for s in self.surveys.values() if s.submitted)
            payments = sum(
                len(p.milestones_completed) * self.config.milestone_payment_units
                for p in self.participants.values()
            )
            return {
                "participants_by_state": by_state,
                "ads_by_phase": ads_by_phase,
                "deliveries": len(self.deliveries),
                "surveys_released": surveys_released,
                "surveys_submitted": surveys_submitted,
                "completion_rate": (surveys_submitted / surveys_released) if surveys_released else None,
                "payments_total_units": payments,
                "conservation": self.conservation(),
                "ruleset_version": self.ruleset.version,
                "study_started": self.study_started,
            }

    def participants_view(self) -> list[dict]:
        with self.lock:
            out = []
            for pid in sorted(self.participants):
                p = self.participants[pid]
                out.append(
                    {
                        "participant_id": p.id,
                        "state": p.state.value,
                        "partner_id": p.partner_id,
                        "milestones": sorted(p.milestones_completed),
                        "redaction_count": p.redaction_count,
                        "ads": len(self.ads_by_participant[pid]),
                        "excluded_from_intervention": p.excluded_from_intervention,
                        "payment_units": len(p.milestones_completed)
                        * self.config.milestone_payment_units,
                    }
                )
            return out


def _opt(value) -> str:
    return "" if value is None else str(value)
