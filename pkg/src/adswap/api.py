"""HTTP wire protocol over the study store.

Field names and endpoint shapes are frozen in docs/protocol.md. Every JSON
response carries {api_version, server_time}; CSV export carries the same
pair as X-Api-Version / X-Server-Time headers. Unknown input fields are
ignored; responses never emit undocumented fields.
"""

from __future__ import annotations

import csv
import io
from typing import Optional

from fastapi import Body, Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .clock import Clock, SimClock, to_iso
from .model import Demographics, StudyConfig, StudyError
from .store import ApiError, StudyStore
from .surveys import SurveyInstance

API_VERSION = "1"


def _bearer(authorization: Optional[str] = Header(default=None)) -> str:
    if not authorization or not authorization.startswith("Bearer "):
        raise ApiError(401, "missing_token", "Authorization: Bearer <token> required")
    return authorization[len("Bearer ") :]


def create_app(
    config: Optional[StudyConfig] = None,
    clock: Optional[Clock] = None,
    sim_mode: bool = False,
) -> FastAPI:
    config = config or StudyConfig()
    if clock is None:
        clock = SimClock() if sim_mode else Clock()
    store = StudyStore(config, clock, sim_mode=sim_mode)
    app = FastAPI(title="ad-swap study server", version=API_VERSION)
    app.state.store = store

    def envelope(**fields) -> dict:
        return {"api_version": API_VERSION, "server_time": clock.iso(), **fields}

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content=envelope(error=exc.code, message=exc.message),
        )

    @app.exception_handler(StudyError)
    async def _study_error(_req: Request, exc: StudyError):
        return JSONResponse(status_code=409, content=envelope(error="study_error", message=str(exc)))

    # ---- participant endpoints ------------------------------------------------

    @app.post("/v1/register")
    def register(body: dict = Body(...)):
        code = str(body.get("onboarding_code", ""))
        info = str(body.get("instance_info", ""))
        token, pid = store.register(code, info)
        return envelope(token=token, participant_id=pid)

    @app.post("/v1/ads")
    def ingest_ads(body: dict = Body(...), token: str = Depends(_bearer)):
        ads = body.get("ads")
        if not isinstance(ads, list):
            raise ApiError(422, "bad_batch", "body must carry an ads list")
        ack = store.ingest_ads(token, ads)
        return envelope(**ack)

    @app.post("/v1/events")
    def ingest_events(body: dict = Body(...), token: str = Depends(_bearer)):
        events = body.get("events")
        if not isinstance(events, list):
            raise ApiError(422, "bad_batch", "body must carry an events list")
        ack = store.ingest_events(token, events)
        return envelope(**ack)

    @app.get("/v1/swap")
    def serve_swap(
        w: int = Query(..., ge=0), h: int = Query(..., ge=0), token: str = Depends(_bearer)
    ):
        delivery, ad = store.serve_swap(token, w, h)
        return envelope(
            swap_delivery_id=delivery.swap_delivery_id,
            slot_geometry={"w": delivery.slot_width, "h": delivery.slot_height},
            served_at=to_iso(delivery.served_at),
            payload={
                "payload_kind": ad.payload_kind,
                "image_url": ad.image_url,
                "stored_image_ref": ad.stored_image_ref,
                "text": ad.text,
                "target_url": ad.target_url,
                "natural_geometry": {"w": ad.slot_width, "h": ad.slot_height},
            },
        )

    @app.get("/v1/ruleset")
    def get_ruleset():
        doc = store.ruleset_doc
        return envelope(
            ruleset={
                "version": doc.version,
                "digest": doc.digest,
                "network": list(doc.network),
                "exceptions": list(doc.exceptions),
                "cosmetic": list(doc.cosmetic),
            }
        )

    @app.get("/v1/survey")
    def get_survey(token: str = Depends(_bearer)):
        instance = store.get_survey(token)
        return envelope(survey=_survey_doc(store, instance))

    @app.post("/v1/survey")
    def submit_survey(body: dict = Body(...), token: str = Depends(_bearer)):
        answers = body.get("answers")
        if not isinstance(answers, dict):
            raise ApiError(422, "bad_answers", "body must carry an answers object")
        instance = store.submit_survey(token, answers)
        return envelope(survey_id=instance.survey_id, submitted=True, phase=instance.phase)

    @app.get("/v1/me/ads")
    def my_ads(token: str = Depends(_bearer)):
        records = store.my_ads(token)
        return envelope(
            ads=[
                {
                    "ad_id": ad.id,
                    "phase": ad.phase.value,
                    "payload_kind": ad.payload_kind,
                    "image_url": ad.image_url,
                    "text": ad.text,
                    "target_url": ad.target_url,
                    "source_page_url": ad.source_page_url,
                    "view_count": ad.view_count,
                    "click_count": ad.click_count,
                    "redacted": ad.redacted,
                }
                for ad in records
            ]
        )

    @app.post("/v1/me/redact")
    def redact(body: dict = Body(...), token: str = Depends(_bearer)):
        ad_ids = body.get("ad_ids")
        if not isinstance(ad_ids, list):
            raise ApiError(422, "bad_request", "body must carry an ad_ids list")
        receipt = store.redact(token, [str(a) for a in ad_ids])
        return envelope(redacted=receipt.count)

    # ---- export ------------------------------------------------------------------

    @app.get("/v1/export")
    def export(
        kind: str = Query(...),
        phase: Optional[str] = Query(default=None),
        participant: Optional[str] = Query(default=None),
        include_redacted_stubs: bool = Query(default=False),
        token: str = Depends(_bearer),
    ):
        store.require_auditor(token)
        rows = store.export_rows(kind, phase, participant, include_redacted_stubs)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerows(rows)
        return PlainTextResponse(
            content=buf.getvalue(),
            media_type="text/csv",
            headers={"X-Api-Version": API_VERSION, "X-Server-Time": clock.iso()},
        )

    # ---- auditor endpoints ----------------------------------------------------------

    def _admin(token: str = Depends(_bearer)) -> str:
        store.require_auditor(token)
        return token

    @app.get("/v1/admin/overview")
    def overview(_: str = Depends(_admin)):
        return envelope(**store.overview())

    @app.get("/v1/admin/participants")
    def participants(_: str = Depends(_admin)):
        return envelope(participants=store.participants_view())

    @app.post("/v1/admin/waitlist")
    def add_waitlist(body: dict = Body(...), _: str = Depends(_admin)):
        demo = body.get("demographics")
        if not isinstance(demo, dict):
            raise ApiError(422, "bad_request", "body must carry a demographics object")
        try:
            demographics = Demographics(
                age=str(demo.get("age", "")),
                gender=str(demo.get("gender", "")),
                race=frozenset(str(r) for r in demo.get("race", [])),
                education=str(demo.get("education", "")),
                income=str(demo.get("income", "")),
                region=str(demo.get("region", "")),
            )
            participant = store.add_waitlist(demographics)
        except StudyError as exc:
            raise ApiError(422, "bad_demographics", str(exc))
        return envelope(participant_id=participant.id)

    @app.post("/v1/admin/select_cohort")
    def select_cohort(body: dict = Body(...), _: str = Depends(_admin)):
        quota = body.get("quota")
        if not isinstance(quota, int) or quota < 1:
            raise ApiError(422, "bad_request", "quota must be a positive integer")
        return envelope(selected=store.select_cohort(quota))

    @app.post("/v1/admin/grant_onboarding")
    def grant_onboarding(body: dict = Body(...), _: str = Depends(_admin)):
        pid = str(body.get("participant_id", ""))
        return envelope(onboarding_code=store.grant_onboarding(pid))

    @app.post("/v1/admin/reissue_code")
    def reissue_code(body: dict = Body(...), _: str = Depends(_admin)):
        pid = str(body.get("participant_id", ""))
        return envelope(onboarding_code=store.reissue_code(pid))

    @app.post("/v1/admin/assign_pairs")
    def assign_pairs(_: str = Depends(_admin)):
        pairing = store.assign_pairs()
        return envelope(pairs=pairing.pairs, unpaired=pairing.unpaired)

    @app.post("/v1/admin/start_study")
    def start_study(_: str = Depends(_admin)):
        return envelope(started=store.start_study())

    @app.post("/v1/admin/release_survey")
    def release_survey(body: dict = Body(...), _: str = Depends(_admin)):
        phase = str(body.get("phase", ""))
        return envelope(released=store.release_survey(phase))

    @app.post("/v1/admin/offboard")
    def offboard(body: dict = Body(...), _: str = Depends(_admin)):
        pid = str(body.get("participant_id", ""))
        store.offboard(pid)
        return envelope(participant_id=pid, state="offboarded")

    @app.post("/v1/admin/labels")
    def apply_labels(body: dict = Body(...), _: str = Depends(_admin)):
        entries = body.get("labels")
        if not isinstance(entries, list):
            raise ApiError(422, "bad_request", "body must carry a labels list")
        parsed: list[tuple[str, bool]] = []
        for i, entry in enumerate(entries):
            if not isinstance(entry, dict) or not isinstance(entry.get("has_people"), bool):
                raise ApiError(422, "bad_request", f"labels[{i}] needs ad_id and boolean has_people")
            parsed.append((str(entry.get("ad_id", "")), entry["has_people"]))
        return envelope(**store.apply_labels(parsed))

    @app.post("/v1/admin/ruleset")
    def set_ruleset(body: dict = Body(...), _: str = Depends(_admin)):
        text = body.get("text")
        if not isinstance(text, str):
            raise ApiError(422, "bad_request", "body must carry filter-list text")
        warnings = store.set_ruleset(text)
        return envelope(
            version=store.ruleset.version,
            warnings=[
                {"line_no": w.line_no, "line": w.line, "reason": w.reason} for w in warnings
            ],
        )

    @app.get("/v1/admin/notifications")
    def notifications(_: str = Depends(_admin)):
        return envelope(notifications=list(store.notifications))

    @app.post("/v1/admin/tick")
    def tick(_: str = Depends(_admin)):
        store.tick()
        return envelope(ticked=True)

    @app.post("/v1/admin/clock_advance")
    def clock_advance(body: dict = Body(...), _: str = Depends(_admin)):
        seconds = body.get("seconds")
        if not isinstance(seconds, (int, float)) or seconds < 0:
            raise ApiError(422, "bad_request", "seconds must be nonnegative")
        now = store.clock_advance(float(seconds))
        return envelope(now=to_iso(now))

    return app


def _survey_doc(store: StudyStore, instance: SurveyInstance) -> dict:
    """Wire form of a survey with image refs resolved for rendering."""

    def ad_payload(ad_id: str) -> dict:
        ad = store.ads[ad_id]
        return {
            "ad_id": ad.id,
            "payload_kind": ad.payload_kind,
            "image_url": ad.image_url,
            "stored_image_ref": ad.stored_image_ref,
            "text": ad.text,
        }

    return {
        "survey_id": instance.survey_id,
        "phase": instance.phase,
        "submitted": instance.submitted,
        "holistic": {
            "skipped": instance.holistic.skipped,
            "ads": [ad_payload(a) for a in instance.holistic.ad_ids],
        },
        "per_ad": [
            {
                "ad": ad_payload(q.ad_id),
                "category": {
                    "seen_status": q.category.seen_status,
                    "targeted_user": q.category.targeted_user,
                    "has_people": q.category.has_people,
                },
            }
            for q in instance.per_ad
        ],
        "experience_fields": ["rating", "recommend", "disabled_freq", "incognito_freq", "comments"],
    }
