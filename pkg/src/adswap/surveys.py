"""Survey pregeneration, validation, and recognition scoring.

Two survey rounds: midpoint (after the observational week) and final
(after the intervention week). Each carries a holistic image-cloud
question over up to 40 seen ads, up to 24 per-ad questions stratified
over 6 categories of (seen status, targeted user, people present), and
study-experience questions. Who can have "seen" what is forced by the
protocol: before the swap only a participant's own ads can be seen, and
during the swap week only partner ads are shown, so the midpoint survey
has no seen-partner categories and the final survey no seen-self ones.

Samples are pregenerated from a seeded generator and frozen; answers are
validated against closed scales and accepted exactly once.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .model import AdRecord, StudyConfig, StudyError

SEEN, UNSEEN = "seen", "unseen"
SELF, PARTNER = "self", "partner"
PEOPLE, NO_PEOPLE = "people", "noPeople"

MIDPOINT, FINAL = "midpoint", "final"
RECOGNITION_CHOICES = ("yes", "no", "unsure")
LIKERT_MIN, LIKERT_MAX = 1, 7
EXPERIENCE_FIELDS = ("rating", "recommend", "disabled_freq", "incognito_freq")


class SurveyError(StudyError):
    pass


class ValidationError(SurveyError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass(frozen=True)
class PerAdCategory:
    seen_status: str
    targeted_user: str
    has_people: str

    @property
    def key(self) -> str:
        return f"{self.seen_status}-{self.targeted_user}-{self.has_people}"


def categories_for_phase(phase: str) -> tuple[PerAdCategory, ...]:
    """The 6 valid categories; seen-partner only exists after the swap."""
    if phase == MIDPOINT:
        seen_target = SELF
    elif phase == FINAL:
        seen_target = PARTNER
    else:
        raise SurveyError(f"unknown survey phase: {phase!r}")
    return (
        PerAdCategory(SEEN, seen_target, PEOPLE),
        PerAdCategory(SEEN, seen_target, NO_PEOPLE),
        PerAdCategory(UNSEEN, SELF, PEOPLE),
        PerAdCategory(UNSEEN, SELF, NO_PEOPLE),
        PerAdCategory(UNSEEN, PARTNER, PEOPLE),
        PerAdCategory(UNSEEN, PARTNER, NO_PEOPLE),
    )


@dataclass
class SurveyCandidates:
    """Ad pools a survey draws from, already redaction-filtered."""

    holistic: list[AdRecord]
    per_category: dict[PerAdCategory, list[AdRecord]]


def assemble_candidates(
    phase: str,
    own_ads: Iterable[AdRecord],
    partner_ads: Iterable[AdRecord],
    viewed_swap_source_ids: frozenset[str] = frozenset(),
) -> SurveyCandidates:
    """Sort ads into the phase's candidate pools.

    Midpoint pools come from the observational week: the participant's own
    ads split by view count, the partner's entire pool necessarily unseen.
    Final pools come from the swap week: partner ads split by whether a
    swap delivery of them was actually viewed, and the participant's own
    suppressed ads (captured during intervention, never shown) as unseen-self.
    """
    own_obs = [a for a in own_ads if a.phase.value == "observational" and not a.redacted]
    partner_obs = [a for a in partner_ads if a.phase.value == "observational" and not a.redacted]

    if phase == MIDPOINT:
        seen_pool = [a for a in own_obs if a.view_count > 0]
        unseen_self = [a for a in own_obs if a.view_count == 0]
        unseen_partner = partner_obs
        holistic = list(seen_pool)
    elif phase == FINAL:
        seen_pool = [a for a in partner_obs if a.id in viewed_swap_source_ids]
        unseen_partner = [a for a in partner_obs if a.id not in viewed_swap_source_ids]
        unseen_self = [
            a
            for a in own_ads
            if a.phase.value == "intervention_original" and not a.redacted and a.view_count == 0
        ]
        holistic = list(seen_pool)
    else:
        raise SurveyError(f"unknown survey phase: {phase!r}")

    pools = {SEEN: seen_pool, UNSEEN + SELF: unseen_self, UNSEEN + PARTNER: unseen_partner}
    per_category: dict[PerAdCategory, list[AdRecord]] = {}
    for cat in categories_for_phase(phase):
        if cat.seen_status == SEEN:
            base = pools[SEEN]
        else:
            base = pools[UNSEEN + cat.targeted_user]
        want_people = cat.has_people == PEOPLE
        # Per-ad questions require a people label; unlabeled ads are not
        # survey material (the pipeline may not have processed them yet).
        per_category[cat] = [a for a in base if a.has_people is not None and a.has_people == want_people]
    return SurveyCandidates(holistic=holistic, per_category=per_category)


@dataclass
class PerAdQuestion:
    ad_id: str
    category: PerAdCategory
    recognition: Optional[str] = None
    interest: Optional[int] = None
    representativity: Optional[int] = None


@dataclass
class HolisticSection:
    ad_ids: tuple[str, ...]
    skipped: bool
    recognition_bucket: Optional[int] = None
    interest: Optional[int] = None
    representativity: Optional[int] = None


@dataclass
class ExperienceSection:
    rating: Optional[int] = None
    recommend: Optional[int] = None
    disabled_freq: Optional[int] = None
    incognito_freq: Optional[int] = None
    comments: str = ""


@dataclass
class SurveyInstance:
    survey_id: str
    participant_id: str
    phase: str
    holistic: HolisticSection
    per_ad: list[PerAdQuestion]
    experience: ExperienceSection = field(default_factory=ExperienceSection)
    released: bool = False
    submitted_at: Optional[float] = None

    @property
    def submitted(self) -> bool:
        return self.submitted_at is not None


def survey_rng(rng_seed: int, participant_id: str, phase: str) -> random.Random:
    """Generator keyed to (study seed, participant, phase): stable across runs."""
    digest = hashlib.sha256(f"{rng_seed}:{participant_id}:{phase}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _sample(rng: random.Random, ads: list[AdRecord], k: int) -> list[AdRecord]:
    ordered = sorted(ads, key=lambda a: a.id)
    if len(ordered) <= k:
        return ordered
    return rng.sample(ordered, k)


def generate_survey(
    participant_id: str,
    phase: str,
    candidates: SurveyCandidates,
    config: StudyConfig,
    rng: random.Random,
) -> SurveyInstance:
    """Draw the frozen question set for one participant and phase."""
    for cat, pool in candidates.per_category.items():
        for ad in pool:
            if ad.redacted:
                raise SurveyError(f"redacted ad {ad.id} reached sampling")
            if ad.has_people is None:
                raise SurveyError(f"unlabeled ad {ad.id} reached per-ad sampling ({cat.key})")

    holistic_pool = [a for a in candidates.holistic if not a.redacted]
    holistic_ads = _sample(rng, holistic_pool, config.holistic_sample_max)
    holistic = HolisticSection(
        ad_ids=tuple(a.id for a in holistic_ads), skipped=not holistic_ads
    )

    per_ad: list[PerAdQuestion] = []
    used: set[str] = set()
    for cat in categories_for_phase(phase):
        pool = [a for a in candidates.per_category.get(cat, []) if a.id not in used]
        for ad in _sample(rng, pool, config.per_ad_per_category_max):
            used.add(ad.id)
            per_ad.append(PerAdQuestion(ad_id=ad.id, category=cat))
    if len(per_ad) > config.max_per_ad_questions:
        raise SurveyError("per-ad question budget exceeded")  # unreachable by construction

    survey_id = f"survey-{participant_id}-{phase}"
    return SurveyInstance(survey_id, participant_id, phase, holistic, per_ad)


def _check_likert(field_name: str, value) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or not LIKERT_MIN <= value <= LIKERT_MAX:
        raise ValidationError(field_name, f"must be an integer in {LIKERT_MIN}..{LIKERT_MAX}")
    return value


def submit_response(survey: SurveyInstance, answers: dict, now: float) -> SurveyInstance:
    """Validate and attach answers; a survey accepts exactly one submission."""
    if not survey.released:
        raise SurveyError("survey not released")
    if survey.submitted:
        raise SurveyError("survey already submitted")

    holistic = answers.get("holistic")
    if survey.holistic.skipped:
        holistic = None
    elif not isinstance(holistic, dict):
        raise ValidationError("holistic", "section missing")
    per_ad = answers.get("per_ad")
    if not isinstance(per_ad, list):
        raise ValidationError("per_ad", "section missing")
    experience = answers.get("experience")
    if not isinstance(experience, dict):
        raise ValidationError("experience", "section missing")

    if holistic is not None:
        bucket = holistic.get("recognition_bucket")
        if not isinstance(bucket, int) or isinstance(bucket, bool) or not 1 <= bucket <= 7:
            raise ValidationError("holistic.recognition_bucket", "must be an integer in 1..7")
        h_interest = _check_likert("holistic.interest", holistic.get("interest"))
        h_repr = _check_likert("holistic.representativity", holistic.get("representativity"))

    by_ad = {q.ad_id: q for q in survey.per_ad}
    seen_ids = set()
    validated: list[tuple[PerAdQuestion, str, int, int]] = []
    for i, entry in enumerate(per_ad):
        prefix = f"per_ad[{i}]"
        if not isinstance(entry, dict):
            raise ValidationError(prefix, "must be an object")
        ad_id = entry.get("ad_id")
        question = by_ad.get(ad_id)
        if question is None:
            raise ValidationError(f"{prefix}.ad_id", f"not part of this survey: {ad_id!r}")
        if ad_id in seen_ids:
            raise ValidationError(f"{prefix}.ad_id", "answered twice")
        seen_ids.add(ad_id)
        recognition = entry.get("recognition")
        if recognition not in RECOGNITION_CHOICES:
            raise ValidationError(f"{prefix}.recognition", "must be one of yes/no/unsure")
        interest = _check_likert(f"{prefix}.interest", entry.get("interest"))
        repr_v = _check_likert(f"{prefix}.representativity", entry.get("representativity"))
        validated.append((question, recognition, interest, repr_v))
    missing = set(by_ad) - seen_ids
    if missing:
        raise ValidationError("per_ad", f"unanswered ads: {sorted(missing)[:3]}")

    exp_values = {name: _check_likert(f"experience.{name}", experience.get(name)) for name in EXPERIENCE_FIELDS}
    comments = experience.get("comments", "")
    if not isinstance(comments, str):
        raise ValidationError("experience.comments", "must be text")

    # All fields validated; apply atomically.
    if holistic is not None:
        survey.holistic.recognition_bucket = bucket
        survey.holistic.interest = h_interest
        survey.holistic.representativity = h_repr
    for question, recognition, interest, repr_v in validated:
        question.recognition = recognition
        question.interest = interest
        question.representativity = repr_v
    survey.experience = ExperienceSection(comments=comments, **exp_values)
    survey.submitted_at = now
    return survey


@dataclass
class RecognitionScore:
    correct_rate: Optional[float]   # None when no seen ads were answered
    false_rate: Optional[float]     # None when no unseen ads were answered
    seen_answered: int
    unseen_answered: int
    unsure_count: int


def score_recognition(responses: list[tuple[str, bool]]) -> RecognitionScore:
    """Rate of claimed recognition among actually seen vs never-seen ads.

    `responses` pairs each recognition answer with its ground-truth seen
    flag; "unsure" counts as not-yes on both sides. Empty denominators
    yield None rather than 0 so downstream analysis can tell "no data"
    from "never recognized".
    """
    seen_total = unseen_total = seen_yes = unseen_yes = unsure = 0
    for answer, was_seen in responses:
        if answer not in RECOGNITION_CHOICES:
            raise SurveyError(f"bad recognition answer: {answer!r}")
        if answer == "unsure":
            unsure += 1
        if was_seen:
            seen_total += 1
            seen_yes += answer == "yes"
        else:
            unseen_total += 1
            unseen_yes += answer == "yes"
    return RecognitionScore(
        correct_rate=seen_yes / seen_total if seen_total else None,
        false_rate=unseen_yes / unseen_total if unseen_total else None,
        seen_answered=seen_total,
        unseen_answered=unseen_total,
        unsure_count=unsure,
    )


def holistic_bucket_to_percent(bucket: int, config: StudyConfig) -> int:
    """Map a 1..7 recognition bucket to its configured percent midpoint."""
    if not 1 <= bucket <= 7:
        raise SurveyError(f"bucket out of range: {bucket}")
    return config.holistic_bucket_percent[bucket - 1]
