"""Command-line front end.

Subcommands:
  analyze       fit a statistical model over an export bundle directory
  pipeline run  run one post-processing job over an export bundle
  simulate      drive a synthetic cohort through a full study
  serve         run the coordination server under uvicorn
"""

from __future__ import annotations

import argparse
import shlex
import sys
from pathlib import Path

from .analysis import METRICS, MODELS, AnalysisError, load_bundle, run_analysis
from .clock import Clock, from_iso
from .model import AdRecord, Phase, StudyConfig
from . import pipeline
from .store import StudyStore


def _config_from(args) -> StudyConfig:
    if getattr(args, "config", None):
        return StudyConfig.from_file(args.config)
    return StudyConfig()


def _cmd_analyze(args) -> int:
    bundle = load_bundle(args.in_dir)
    by = [part for part in (args.by or "").split(",") if part]
    try:
        report = run_analysis(bundle, args.metric, args.model, by=by, seed=args.seed)
    except AnalysisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = report.text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _load_ads_csv(path: Path) -> list[AdRecord]:
    import csv

    with path.open(newline="") as handle:
        rows = list(csv.DictReader(handle))
    ads = []
    for row in rows:
        ads.append(
            AdRecord(
                id=row["ad_id"],
                participant_id=row["participant_id"],
                phase=Phase(row["phase"]),
                payload_kind=row["payload_kind"],
                target_url=row["target_url"],
                source_page_url=row["source_page_url"],
                image_url=row["image_url"] or None,
                stored_image_ref=row["stored_image_ref"] or None,
                text=row["text"] or None,
                resolved_target_url=row["resolved_target_url"] or None,
                slot_width=int(row["slot_width"]),
                slot_height=int(row["slot_height"]),
                view_count=int(row["view_count"]),
                click_count=int(row["click_count"]),
                has_people=None if row["has_people"] == "" else row["has_people"] == "true",
                captured_at=from_iso(row["captured_at"]) if row["captured_at"] else 0.0,
                redacted=row["redacted"] == "true",
            )
        )
    return ads


def _write_ads_csv(path: Path, ads: list[AdRecord]) -> None:
    import csv

    from .clock import to_iso

    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(StudyStore.AD_COLUMNS)
        for ad in ads:
            tri = "" if ad.has_people is None else ("true" if ad.has_people else "false")
            writer.writerow(
                [
                    ad.id, ad.participant_id, ad.phase.value, ad.payload_kind,
                    ad.image_url or "", ad.stored_image_ref or "", ad.text or "",
                    ad.target_url, ad.resolved_target_url or "", ad.source_page_url,
                    str(ad.slot_width), str(ad.slot_height), str(ad.view_count),
                    str(ad.click_count), tri,
                    to_iso(ad.captured_at) if ad.captured_at else "",
                    "true" if ad.redacted else "false",
                ]
            )


def _parse_window(raw: str | None):
    if not raw:
        return None
    try:
        start_raw, end_raw = raw.split("/", 1)
        return (from_iso(start_raw), from_iso(end_raw))
    except ValueError:
        raise SystemExit(f"bad --window {raw!r}; want <ISO>/<ISO>")


def _cmd_pipeline_run(args) -> int:
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out or args.in_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ads = _load_ads_csv(in_dir / "ads.csv")
    state = pipeline.PipelineState()
    clock = Clock()
    window = _parse_window(args.window)
    kwargs: dict = {}
    if args.job == "resolve":
        kwargs["resolver"] = pipeline.http_head_fetcher()
    elif args.job == "persist":
        import httpx

        client = httpx.Client(timeout=10.0)

        def fetch_bytes(url: str) -> bytes:
            try:
                response = client.get(url)
                response.raise_for_status()
            except httpx.HTTPError as exc:
                raise pipeline.FetchError(str(exc))
            return response.content

        kwargs["image_fetcher"] = fetch_bytes
        kwargs["blobs"] = pipeline.BlobStore(args.blobs or out_dir / "blobs")
    elif args.job == "detect":
        if not args.classifier_cmd:
            print("error: detect needs --classifier-cmd", file=sys.stderr)
            return 2
        kwargs["classifier"] = pipeline.command_classifier(shlex.split(args.classifier_cmd))
        kwargs["blobs"] = pipeline.BlobStore(args.blobs or out_dir / "blobs")
        kwargs["person_threshold"] = args.person_threshold
    try:
        run = pipeline.run_job(args.job, ads, state, clock, window, **kwargs)
    except pipeline.PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.job == "domains":
        import csv

        for kind, table in state.domain_tables.items():
            with (out_dir / f"domains_{kind}.csv").open("w", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(["domain", "count", "share", "participant_share"])
                presence = dict(table.presence)
                for domain, count, share in table.rows:
                    writer.writerow(
                        [domain, str(count), f"{share:.6f}", f"{presence[domain]:.6f}"]
                    )
    else:
        _write_ads_csv(out_dir / "ads.csv", ads)
    print(f"job={run.job} processed={run.processed} failed={run.failed}")
    return 0


def _cmd_simulate(args) -> int:
    from .sim import default_profiles, profiles_from_file, run_simulation

    config = _config_from(args)
    if args.profiles:
        profiles = profiles_from_file(args.profiles)
    else:
        profiles = default_profiles(args.participants, seed=args.seed)
    report = run_simulation(
        config,
        profiles,
        compression=args.compress,
        seed=args.seed,
        threads=args.threads,
        out_dir=args.out,
    )
    print(
        f"simulated {report.profile_count} participants: "
        f"{report.summary.get('swap_requests', 0)} swaps, "
        f"{report.invariants_checked} invariant checks"
    )
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    app = create_app(_config_from(args), sim_mode=args.sim)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adswap")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="fit a model over an export bundle")
    analyze.add_argument("--metric", required=True, choices=METRICS)
    analyze.add_argument("--model", required=True, choices=MODELS)
    analyze.add_argument("--by", default="", help="comma-separated factors; a:b adds an interaction")
    analyze.add_argument("--seed", type=int, default=0)
    analyze.add_argument("--in", dest="in_dir", required=True, help="export bundle directory")
    analyze.add_argument("--out", default=None, help="report file (default: stdout)")
    analyze.set_defaults(func=_cmd_analyze)

    pipe = sub.add_parser("pipeline", help="post-processing jobs")
    pipe_sub = pipe.add_subparsers(dest="pipeline_command", required=True)
    run = pipe_sub.add_parser("run", help="run one job over a bundle")
    run.add_argument("--job", required=True, choices=pipeline.JOB_NAMES)
    run.add_argument("--window", default=None, help="<ISO>/<ISO> captured_at range")
    run.add_argument("--in", dest="in_dir", required=True, help="bundle directory with ads.csv")
    run.add_argument("--out", default=None, help="output directory (default: in place)")
    run.add_argument("--blobs", default=None, help="blob store directory")
    run.add_argument("--classifier-cmd", default=None, help="external detector command")
    run.add_argument("--person-threshold", type=float, default=pipeline.DEFAULT_PERSON_THRESHOLD)
    run.set_defaults(func=_cmd_pipeline_run)

    simulate = sub.add_parser("simulate", help="drive a synthetic study")
    simulate.add_argument("--profiles", default=None, help="JSON profile file")
    simulate.add_argument("--participants", type=int, default=6, help="count when no file given")
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--compress", type=float, default=20000.0)
    simulate.add_argument("--threads", type=int, default=1)
    simulate.add_argument("--config", default=None, help="study config file")
    simulate.add_argument("--out", default=None, help="directory for exports + report")
    simulate.set_defaults(func=_cmd_simulate)

    serve = sub.add_parser("serve", help="run the HTTP server")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8420)
    serve.add_argument("--config", default=None)
    serve.add_argument("--sim", action="store_true", help="use the controllable sim clock")
    serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
