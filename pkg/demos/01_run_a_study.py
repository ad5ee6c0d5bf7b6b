"""Walk one tiny study end to end over the HTTP protocol.

Everything below talks to the server exactly like the browser extension
and the study console would: register, upload ads, report telemetry,
request swaps, answer surveys. Run top to bottom; it prints a snapshot
after each stage.
"""

from fastapi.testclient import TestClient

from adswap.api import create_app
from adswap.model import StudyConfig

DAY = 86400

# Two-day phases keep the walkthrough quick; a real deployment uses the
# default 7/7. sim_mode exposes the clock-advance endpoint.
config = StudyConfig(observational_days=2, intervention_days=2,
                     min_ads_gate=4, reminder_day=1, rng_seed=12)
app = TestClient(create_app(config, sim_mode=True))
auditor = {"Authorization": f"Bearer {config.auditor_token}"}


def admin(method, path, **kwargs):
    response = app.request(method, path, headers=auditor, **kwargs)
    assert response.status_code == 200, response.text
    return response.json()


# ---- enrollment ------------------------------------------------------------

people = [
    {"age": "25-34", "gender": "woman", "race": ["asian"],
     "education": "bachelors", "income": "50k-75k", "region": "west"},
    {"age": "35-44", "gender": "man", "race": ["white"],
     "education": "graduate", "income": "75k-100k", "region": "south"},
    {"age": "18-24", "gender": "non_binary", "race": ["black", "white"],
     "education": "some_college", "income": "25k-50k", "region": "northeast"},
    {"age": "45-54", "gender": "man", "race": ["hispanic"],
     "education": "high_school", "income": "lt_25k", "region": "midwest"},
]
for demo in people:
    admin("POST", "/v1/admin/waitlist", json={"demographics": demo})

selected = admin("POST", "/v1/admin/select_cohort", json={"quota": 4})["selected"]
print("cohort:", selected)

tokens = {}
for pid in selected:
    code = admin("POST", "/v1/admin/grant_onboarding",
                 json={"participant_id": pid})["onboarding_code"]
    ack = app.post("/v1/register",
                   json={"onboarding_code": code, "instance_info": "demo"}).json()
    tokens[pid] = ack["token"]

pairs = admin("POST", "/v1/admin/assign_pairs", json={})
print("pairs:", pairs["pairs"], "unpaired:", pairs["unpaired"])
admin("POST", "/v1/admin/start_study", json={})


# ---- observational week ----------------------------------------------------

def upload_day(pid, day):
    """Each participant sees three ads a day and views two of them."""
    batch = [{
        "client_ad_id": f"{pid}-d{day}-a{i}",
        "payload_kind": "image",
        "image_url": f"https://cdn.example/{pid}/{day}/{i}.png",
        "target_url": f"https://brand{i}.example/landing",
        "source_page_url": "https://news.example/story",
        "slot_geometry": {"w": 300, "h": 250},
        "captured_at": admin("GET", "/v1/admin/overview")["server_time"],
    } for i in range(3)]
    headers = {"Authorization": f"Bearer {tokens[pid]}"}
    ack = app.post("/v1/ads", json={"ads": batch}, headers=headers).json()
    events = [{"client_event_id": f"{pid}-d{day}-v{i}", "kind": "view",
               "ref_kind": "ad", "ad_ref": f"{pid}-d{day}-a{i}"} for i in range(2)]
    app.post("/v1/events", json={"events": events}, headers=headers)
    return ack


for day in range(config.observational_days):
    for pid in selected:
        upload_day(pid, day)
    admin("POST", "/v1/admin/clock_advance", json={"seconds": DAY})

admin("POST", "/v1/admin/tick", json={})
overview = admin("GET", "/v1/admin/overview")
print("after observation:", overview["participants_by_state"],
      "ads:", overview["ads_by_phase"])

# Label the captured ads so the per-ad survey sections have material.
# Normally the detect pipeline job computes these and pushes them back.
ad_rows = app.get("/v1/export?kind=ads", headers=auditor).text.strip().splitlines()[1:]
labels = [{"ad_id": row.split(",")[0], "has_people": n % 2 == 0}
          for n, row in enumerate(ad_rows)]
admin("POST", "/v1/admin/labels", json={"labels": labels})


# ---- midpoint survey ---------------------------------------------------------

admin("POST", "/v1/admin/release_survey", json={"phase": "midpoint"})
for pid in selected:
    headers = {"Authorization": f"Bearer {tokens[pid]}"}
    doc = app.get("/v1/survey", headers=headers).json()["survey"]
    answers = {
        "per_ad": [{"ad_id": q["ad"]["ad_id"], "recognition": "yes",
                    "interest": 5, "representativity": 4} for q in doc["per_ad"]],
        "experience": {"rating": 5, "recommend": 6,
                       "disabled_freq": 2, "incognito_freq": 1, "comments": "demo"},
    }
    if not doc["holistic"]["skipped"]:
        answers["holistic"] = {"recognition_bucket": 4, "interest": 5, "representativity": 4}
    ack = app.post("/v1/survey", json={"answers": answers}, headers=headers).json()
    print(f"{pid} submitted {ack['survey_id']} ({len(doc['per_ad'])} per-ad questions)")
admin("POST", "/v1/admin/tick", json={})


# ---- intervention week: every slot shows the partner's ads -------------------

partner_of = {a: b for a, b in pairs["pairs"]} | {b: a for a, b in pairs["pairs"]}
for day in range(config.intervention_days):
    for pid in selected:
        upload_day(pid, 100 + day)  # suppressed originals keep arriving
        headers = {"Authorization": f"Bearer {tokens[pid]}"}
        swap = app.get("/v1/swap?w=300&h=250", headers=headers).json()
        if day == 0:
            source = swap["payload"]["image_url"].split("/")[3]
            print(f"{pid} slot filled from {source} (partner is {partner_of[pid]})")
        app.post("/v1/events", json={"events": [{
            "client_event_id": f"{pid}-swapview-{day}", "kind": "view",
            "ref_kind": "swap", "ad_ref": swap["swap_delivery_id"]}]},
            headers=headers)
    admin("POST", "/v1/admin/clock_advance", json={"seconds": DAY})
admin("POST", "/v1/admin/tick", json={})

admin("POST", "/v1/admin/release_survey", json={"phase": "final"})
for pid in selected:
    headers = {"Authorization": f"Bearer {tokens[pid]}"}
    doc = app.get("/v1/survey", headers=headers).json()["survey"]
    answers = {
        "per_ad": [{"ad_id": q["ad"]["ad_id"], "recognition": "unsure",
                    "interest": 3, "representativity": 3} for q in doc["per_ad"]],
        "experience": {"rating": 6, "recommend": 6,
                       "disabled_freq": 1, "incognito_freq": 1, "comments": ""},
    }
    if not doc["holistic"]["skipped"]:
        answers["holistic"] = {"recognition_bucket": 3, "interest": 4, "representativity": 4}
    app.post("/v1/survey", json={"answers": answers}, headers=headers)
admin("POST", "/v1/admin/tick", json={})


# ---- wrap up -----------------------------------------------------------------

overview = admin("GET", "/v1/admin/overview")
print("final states:", overview["participants_by_state"])
print("payments (units):", overview["payments_total_units"])
print("conservation:", overview["conservation"])

export = app.get("/v1/export?kind=deliveries", headers=auditor)
print("deliveries export:", len(export.text.strip().splitlines()) - 1, "rows,",
      "served at", export.headers["X-Server-Time"])
