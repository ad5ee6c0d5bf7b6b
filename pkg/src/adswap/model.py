"""Domain model: participants, ads, study lifecycle, cohort balancing, pairing.

Participant mutation is single-writer (callers serialize per participant);
everything here is plain data plus pure-ish transition logic so it can be
driven equally by the HTTP service and the simulation harness.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional

from .clock import DAY_SECONDS


class StudyError(Exception):
    """Base class for domain rule violations."""


class CohortError(StudyError):
    pass


class PairingError(StudyError):
    pass


class TransitionError(StudyError):
    pass


class RedactionError(StudyError):
    pass


# Closed vocabularies for demographic categories. Deployments may narrow or
# extend these through StudyConfig; the defaults cover the bands used by the
# analysis design matrix.
AGE_BANDS = ("18-24", "25-34", "35-44", "45-54", "55-64", "65+")
GENDERS = ("man", "woman", "non_binary", "undisclosed")
RACES = ("white", "asian", "black", "hispanic", "native", "pacific", "other")
EDUCATION_BANDS = ("high_school", "some_college", "bachelors", "graduate")
INCOME_BANDS = ("lt_25k", "25k-50k", "50k-75k", "75k-100k", "100k-150k", "gt_150k")
REGIONS = ("northeast", "midwest", "south", "west")

MARGINALIZED_GENDERS = frozenset({"woman", "non_binary"})


class LifecycleState(str, Enum):
    WAITLISTED = "waitlisted"
    SELECTED = "selected"
    ONBOARDING = "onboarding"
    OBSERVATIONAL = "observational"
    MIDPOINT_SURVEY = "midpoint_survey"
    INTERVENTION = "intervention"
    FINAL_SURVEY = "final_survey"
    OFFBOARDED = "offboarded"
    DROPPED = "dropped"


TERMINAL_STATES = frozenset({LifecycleState.OFFBOARDED, LifecycleState.DROPPED})

# Legal lifecycle edges. Any non-terminal state may also drop out.
_GRAPH: dict[LifecycleState, frozenset[LifecycleState]] = {
    LifecycleState.WAITLISTED: frozenset({LifecycleState.SELECTED}),
    LifecycleState.SELECTED: frozenset({LifecycleState.ONBOARDING}),
    LifecycleState.ONBOARDING: frozenset({LifecycleState.OBSERVATIONAL}),
    LifecycleState.OBSERVATIONAL: frozenset({LifecycleState.MIDPOINT_SURVEY}),
    LifecycleState.MIDPOINT_SURVEY: frozenset({LifecycleState.INTERVENTION}),
    LifecycleState.INTERVENTION: frozenset({LifecycleState.FINAL_SURVEY}),
    LifecycleState.FINAL_SURVEY: frozenset({LifecycleState.OFFBOARDED}),
    LifecycleState.OFFBOARDED: frozenset(),
    LifecycleState.DROPPED: frozenset(),
}


def legal_transition(src: LifecycleState, dst: LifecycleState) -> bool:
    if src in TERMINAL_STATES:
        return False
    if dst is LifecycleState.DROPPED:
        return True
    return dst in _GRAPH[src]


class Phase(str, Enum):
    """Phase tag carried by every stored ad."""

    OBSERVATIONAL = "observational"
    INTERVENTION_ORIGINAL = "intervention_original"
    INTERVENTION_SWAPPED = "intervention_swapped"


class Milestone(str, Enum):
    ONBOARDING = "onboarding"
    MIDPOINT_SURVEY = "midpoint_survey"
    FINAL_SURVEY = "final_survey"


@dataclass
class Demographics:
    age: str
    gender: str
    race: frozenset[str]
    education: str
    income: str
    region: str

    def validate(self) -> None:
        checks = [
            (self.age, AGE_BANDS, "age"),
            (self.gender, GENDERS, "gender"),
            (self.education, EDUCATION_BANDS, "education"),
            (self.income, INCOME_BANDS, "income"),
            (self.region, REGIONS, "region"),
        ]
        for value, vocab, name in checks:
            if value not in vocab:
                raise StudyError(f"unknown {name} category: {value!r}")
        if not self.race:
            raise StudyError("race set must be non-empty (use {'other'} for undisclosed)")
        for r in self.race:
            if r not in RACES:
                raise StudyError(f"unknown race category: {r!r}")

    @property
    def white_identifying(self) -> bool:
        """True when 'white' is among the selected races.

        The complement ("did not identify as white") is the group that is
        always included by cohort balancing, so multiracial members who also
        selected white count as white-identifying here.
        """
        return "white" in self.race

    @property
    def marginalized_gender(self) -> bool:
        return self.gender in MARGINALIZED_GENDERS


@dataclass
class AdRecord:
    """One captured advertisement: the unit swapped, surveyed, and analyzed."""

    id: str
    participant_id: str
    phase: Phase
    payload_kind: str  # "image" | "text"
    target_url: str = ""
    source_page_url: str = ""
    image_url: Optional[str] = None
    stored_image_ref: Optional[str] = None
    text: Optional[str] = None
    resolved_target_url: Optional[str] = None
    slot_width: int = 0
    slot_height: int = 0
    view_count: int = 0
    click_count: int = 0
    has_people: Optional[bool] = None
    captured_at: float = 0.0
    redacted: bool = False

    @property
    def seen(self) -> bool:
        return self.view_count > 0

    @property
    def geometry(self) -> tuple[int, int]:
        return (self.slot_width, self.slot_height)

    def redact(self) -> None:
        """Erase everything except id, owner, phase, and capture instant."""
        self.payload_kind = ""
        self.target_url = ""
        self.source_page_url = ""
        self.image_url = None
        self.stored_image_ref = None
        self.text = None
        self.resolved_target_url = None
        self.slot_width = 0
        self.slot_height = 0
        self.view_count = 0
        self.click_count = 0
        self.has_people = None
        self.redacted = True


@dataclass
class StudyConfig:
    observational_days: int = 7
    intervention_days: int = 7
    min_ads_gate: int = 50
    reminder_day: int = 4
    holistic_sample_max: int = 40
    per_ad_per_category_max: int = 4
    milestone_payment_units: int = 10
    rng_seed: int = 0
    auditor_token: str = "auditor-dev-token"
    person_confidence_threshold: float = 0.5
    # Holistic recognition buckets 1..7 mapped to percentages for analysis.
    holistic_bucket_percent: tuple[int, ...] = (0, 10, 25, 50, 75, 90, 100)

    def __post_init__(self):
        for name in ("observational_days", "intervention_days", "min_ads_gate", "reminder_day"):
            if getattr(self, name) <= 0:
                raise StudyError(f"{name} must be positive")
        if len(self.holistic_bucket_percent) != 7:
            raise StudyError("holistic_bucket_percent must have 7 entries")

    @property
    def max_per_ad_questions(self) -> int:
        # 6 valid categories per phase x per-category cap (default 4 -> 24).
        return 6 * self.per_ad_per_category_max

    def phase_days(self, phase: Phase | str) -> int:
        if phase in (Phase.OBSERVATIONAL, "observational"):
            return self.observational_days
        return self.intervention_days

    @classmethod
    def from_file(cls, path) -> "StudyConfig":
        """Load from a `key = value` config file (# comments allowed)."""
        values: dict[str, object] = {}
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise StudyError(f"bad config line: {raw.rstrip()}")
                key, val = (part.strip() for part in line.split("=", 1))
                if key == "holistic_bucket_percent":
                    values[key] = tuple(int(v) for v in val.split(","))
                elif key == "auditor_token":
                    values[key] = val
                elif key == "person_confidence_threshold":
                    values[key] = float(val)
                else:
                    values[key] = int(val)
        return cls(**values)


@dataclass
class Participant:
    id: str
    demographics: Demographics
    state: LifecycleState = LifecycleState.WAITLISTED
    partner_id: Optional[str] = None
    onboarded_at: Optional[float] = None
    phase_started_at: Optional[float] = None
    milestones_completed: set[str] = field(default_factory=set)
    redaction_count: int = 0
    excluded_from_intervention: bool = False
    reminded_phases: set[str] = field(default_factory=set)

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL_STATES

    @property
    def active_phase(self) -> Optional[Phase]:
        """Phase tag for ads ingested right now, if collection is allowed."""
        if self.state is LifecycleState.OBSERVATIONAL:
            return Phase.OBSERVATIONAL
        if self.state is LifecycleState.INTERVENTION:
            return Phase.INTERVENTION_ORIGINAL
        return None


def transition(participant: Participant, dst: LifecycleState, now: float) -> LifecycleState:
    """Move a participant along the lifecycle graph or raise TransitionError."""
    if not legal_transition(participant.state, dst):
        raise TransitionError(
            f"illegal transition for {participant.id}: {participant.state.value} -> {dst.value}"
        )
    participant.state = dst
    if dst in (LifecycleState.OBSERVATIONAL, LifecycleState.INTERVENTION):
        participant.phase_started_at = now
    return dst


@dataclass
class GateResult:
    passed: bool
    reason: Optional[str] = None


@dataclass
class RedactionReceipt:
    """Reports only the count; payload contents are gone by design."""

    participant_id: str
    count: int


@dataclass
class Pairing:
    pairs: list[tuple[str, str]]
    partner_of: dict[str, str]
    unpaired: Optional[str] = None


def select_balanced_cohort(
    waitlist: list[Participant], quota: int, seed: int
) -> list[Participant]:
    """Select `quota` members from the waitlist, balancing race and gender.

    Rule (deterministic under `seed`):
      1. Every non-white-identifying member ("white" not in race set) is
         included. If they alone exceed the quota, CohortError reports the
         overflow.
      2. Remaining slots are filled from white-identifying members, drawn
         uniformly at random within gender pools. Each pick comes from the
         pool (men vs. marginalized genders, i.e. women/non-binary) whose
         running selected total is smaller; ties prefer the pool with more
         members left, then the men pool. Undisclosed-gender members fill
         slots only once both gendered pools are empty.
    """
    if quota > len(waitlist):
        raise CohortError(f"quota {quota} exceeds waitlist size {len(waitlist)}")
    for p in waitlist:
        if p.state is not LifecycleState.WAITLISTED:
            raise CohortError(f"{p.id} is not waitlisted (state={p.state.value})")

    nonwhite = [p for p in waitlist if not p.demographics.white_identifying]
    if len(nonwhite) > quota:
        raise CohortError(
            f"quota {quota} cannot hold all {len(nonwhite)} non-white-identifying members"
        )

    selected = list(nonwhite)
    slots = quota - len(selected)

    rng = random.Random(seed)
    white = [p for p in waitlist if p.demographics.white_identifying]
    men = [p for p in white if p.demographics.gender == "man"]
    marg = [p for p in white if p.demographics.marginalized_gender]
    other = [p for p in white if p.demographics.gender == "undisclosed"]
    for pool in (men, marg, other):
        rng.shuffle(pool)

    men_total = sum(1 for p in selected if p.demographics.gender == "man")
    marg_total = sum(1 for p in selected if p.demographics.marginalized_gender)

    while slots > 0 and (men or marg):
        if not men:
            pick_men = False
        elif not marg:
            pick_men = True
        elif men_total < marg_total:
            pick_men = True
        elif marg_total < men_total:
            pick_men = False
        else:
            pick_men = len(men) >= len(marg)
        if pick_men:
            selected.append(men.pop())
            men_total += 1
        else:
            selected.append(marg.pop())
            marg_total += 1
        slots -= 1

    while slots > 0 and other:
        selected.append(other.pop())
        slots -= 1
    if slots > 0:
        raise CohortError("waitlist exhausted before quota was met")
    return selected


def assign_swap_pairs(participants: list[Participant], seed: int) -> Pairing:
    """Uniform random perfect matching; one leftover on odd cohorts.

    A seeded shuffle followed by pairing adjacent entries is uniform over
    perfect matchings. The odd participant out is flagged
    excluded_from_intervention rather than forming a triple.
    """
    if len(participants) < 2:
        raise PairingError("need at least 2 participants to pair")
    allowed = {LifecycleState.ONBOARDING, LifecycleState.OBSERVATIONAL}
    for p in participants:
        if p.state not in allowed:
            raise PairingError(f"{p.id} not pairable in state {p.state.value}")

    order = sorted(participants, key=lambda p: p.id)
    random.Random(seed).shuffle(order)

    pairs: list[tuple[str, str]] = []
    partner_of: dict[str, str] = {}
    unpaired = None
    for i in range(0, len(order) - 1, 2):
        a, b = order[i], order[i + 1]
        a.partner_id, b.partner_id = b.id, a.id
        pairs.append((a.id, b.id))
        partner_of[a.id] = b.id
        partner_of[b.id] = a.id
    if len(order) % 2 == 1:
        leftover = order[-1]
        leftover.partner_id = None
        leftover.excluded_from_intervention = True
        unpaired = leftover.id
    return Pairing(pairs=pairs, partner_of=partner_of, unpaired=unpaired)


def day_of_phase(participant: Participant, now: float) -> int:
    """1-based day index within the current timed phase."""
    if participant.phase_started_at is None:
        raise StudyError(f"{participant.id} has no phase start timestamp")
    return int((now - participant.phase_started_at) // DAY_SECONDS) + 1


def check_activity_gate(
    participant: Participant,
    phase: Phase,
    config: StudyConfig,
    unredacted_count: int,
    now: float = 0.0,
) -> GateResult:
    """Pass iff the participant collected enough unredacted ads in the phase.

    Failing the gate drops the participant on the spot.
    """
    if unredacted_count >= config.min_ads_gate:
        return GateResult(passed=True)
    if not participant.terminal:
        transition(participant, LifecycleState.DROPPED, now)
    return GateResult(passed=False, reason="insufficient_ads")


Notifier = Callable[[str, str, str], None]  # (participant_id, kind, detail)


def advance_phase(
    participant: Participant,
    now: float,
    config: StudyConfig,
    unredacted_ads_in_phase: int,
    notifier: Optional[Notifier] = None,
) -> LifecycleState:
    """Run one scheduling tick for a participant.

    Timed phases end when their configured duration has elapsed AND the
    activity gate passes (otherwise the participant drops). Survey states
    advance only once the matching milestone is recorded. On the reminder
    day of a timed phase a participant with zero collected ads triggers a
    single reminder signal through `notifier`.
    """
    state = participant.state
    if participant.terminal:
        raise TransitionError(f"{participant.id} is terminal ({state.value})")

    if state is LifecycleState.OBSERVATIONAL or state is LifecycleState.INTERVENTION:
        phase = Phase.OBSERVATIONAL if state is LifecycleState.OBSERVATIONAL else Phase.INTERVENTION_ORIGINAL
        days = config.phase_days(phase)
        started = participant.phase_started_at
        elapsed = 0.0 if started is None else now - started
        if elapsed >= days * DAY_SECONDS:
            gate = check_activity_gate(participant, phase, config, unredacted_ads_in_phase, now)
            if not gate.passed:
                if notifier:
                    notifier(participant.id, "dropped", gate.reason or "")
                return participant.state
            nxt = (
                LifecycleState.MIDPOINT_SURVEY
                if state is LifecycleState.OBSERVATIONAL
                else LifecycleState.FINAL_SURVEY
            )
            return transition(participant, nxt, now)
        day = day_of_phase(participant, now)
        if (
            day == config.reminder_day
            and unredacted_ads_in_phase == 0
            and phase.value not in participant.reminded_phases
        ):
            participant.reminded_phases.add(phase.value)
            if notifier:
                notifier(participant.id, "reminder", f"no ads collected by day {day} of {phase.value}")
        return participant.state

    if state is LifecycleState.MIDPOINT_SURVEY:
        if Milestone.MIDPOINT_SURVEY.value in participant.milestones_completed:
            if participant.excluded_from_intervention:
                # No partner pool to draw from; the study ends here for them.
                return transition(participant, LifecycleState.DROPPED, now)
            return transition(participant, LifecycleState.INTERVENTION, now)
        return state

    if state is LifecycleState.FINAL_SURVEY:
        if Milestone.FINAL_SURVEY.value in participant.milestones_completed:
            return transition(participant, LifecycleState.OFFBOARDED, now)
        return state

    # waitlisted/selected/onboarding advance through explicit admin actions.
    return state


def redact_ads(
    participant: Participant, owned_ads: Iterable[AdRecord], ad_ids: list[str]
) -> RedactionReceipt:
    """Erase ad payloads and bump the redaction counter.

    All-or-nothing: a single foreign or unknown id aborts the call before
    any record is touched. Already-redacted ids are accepted (idempotent)
    but do not bump the counter twice.
    """
    by_id = {ad.id: ad for ad in owned_ads}
    for ad_id in ad_ids:
        ad = by_id.get(ad_id)
        if ad is None or ad.participant_id != participant.id:
            raise RedactionError(f"ad {ad_id} does not belong to {participant.id}")
    newly = [by_id[a] for a in dict.fromkeys(ad_ids) if not by_id[a].redacted]
    for ad in newly:
        ad.redact()
    participant.redaction_count += len(newly)
    return RedactionReceipt(participant_id=participant.id, count=len(newly))
