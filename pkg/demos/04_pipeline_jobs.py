"""Post-processing pipeline over a handful of captured ads.

Runs all four jobs (resolve, persist, detect, domains) with in-process
stand-ins for the network and the classifier, printing the ad table
after each stage. The same jobs run over a real bundle with
`adswap pipeline run --job ... --in bundle/`.
"""

import tempfile

from adswap.clock import SimClock
from adswap.model import AdRecord, Phase
from adswap.pipeline import (
    BlobStore,
    Detection,
    PipelineState,
    aggregate_domains,
    parse_detection_lines,
    run_job,
)

ads = []
for i, (target, hops) in enumerate([
    ("https://go.adnet.example/c?id=1", ["https://shoes.example/sale"]),
    ("https://go.adnet.example/c?id=2", ["https://r.example/x", "https://shoes.example/w"]),
    ("https://bank.example/offer", []),
    ("https://go.adnet.example/loop", None),  # redirects to itself forever
]):
    ads.append(AdRecord(
        id=f"ad{i}", participant_id=f"p{i % 2}", phase=Phase.OBSERVATIONAL,
        payload_kind="image", target_url=target,
        image_url=f"https://cdn.example/{i}.png",
        source_page_url=f"https://news{i % 3}.example/story",
        slot_width=300, slot_height=250, captured_at=float(i),
    ))

chains = {
    "https://go.adnet.example/c?id=1": (302, "https://shoes.example/sale"),
    "https://go.adnet.example/c?id=2": (301, "https://r.example/x"),
    "https://r.example/x": (302, "https://shoes.example/w"),
    "https://go.adnet.example/loop": (302, "https://go.adnet.example/loop"),
}


def fake_head(url):
    """Stand-in for a HEAD request: (status, location) per URL."""
    return chains.get(url, (200, None))


state = PipelineState()
clock = SimClock()

run = run_job("resolve", ads, state, clock, resolver=fake_head)
print(f"resolve: processed={run.processed} failed={run.failed}")
for ad in ads:
    print(f"  {ad.id}: {ad.target_url} -> {ad.resolved_target_url}")

# ---- persist creatives into the content-addressed blob store --------------------

blob_dir = tempfile.mkdtemp(prefix="adswap-blobs-")
blobs = BlobStore(blob_dir)
pixels = {f"https://cdn.example/{i}.png": b"PNG" + bytes([i % 2]) for i in range(4)}
run = run_job("persist", ads, state, clock, image_fetcher=pixels.__getitem__, blobs=blobs)
print(f"\npersist: processed={run.processed}; ads 0 and 2 share bytes, so do 1 and 3")
for ad in ads:
    print(f"  {ad.id}: {ad.stored_image_ref}")

# ---- person detection via the record grammar --------------------------------------

records = "person 0.93 0.1 0.1 0.3 0.8\ndog 0.88 0.5 0.5 0.2 0.2"
print("\ndetector output parses to:", parse_detection_lines(records, ("person", "dog")))


def fake_classifier(image_path):
    with open(image_path, "rb") as fh:
        variant = fh.read()[-1]
    if variant == 0:
        return [Detection("person", 0.93, (0.1, 0.1, 0.3, 0.8))]
    return [Detection("dog", 0.88, (0.5, 0.5, 0.2, 0.2))]


run = run_job("detect", ads, state, clock, classifier=fake_classifier, blobs=blobs)
print(f"detect: processed={run.processed}")
print("  labels:", {ad.id: ad.has_people for ad in ads})

# Jobs are idempotent: nothing is left to do on a rerun.
rerun = run_job("detect", ads, state, clock, classifier=fake_classifier, blobs=blobs)
print("  rerun touches", rerun.processed, "ads")

# ---- registrable-domain tables ------------------------------------------------------

table = aggregate_domains(
    [(ad.participant_id, ad.resolved_target_url or "") for ad in ads],
    "resolved_target",
)
print(f"\nresolved-target domains over {table.valid} valid rows "
      f"({table.errors} errors masked):")
for domain, count, share in table.rows:
    print(f"  {domain:<18} count={count} share={share:.2f}")
