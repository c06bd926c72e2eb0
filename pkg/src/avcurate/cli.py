"""Single executable surface for the curation pipeline.

Exit codes: 0 success, 1 validation failure, 2 partial pipeline failure,
64 usage error. With --json every report goes to stdout as one JSON object;
reports embed the effective configuration for provenance.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from . import __version__
from .benchmark import AssembleConfig, Track, assemble_track, audit_manifest
from .clients import HttpClients, MockClients
from .configio import AppConfig, effective_config_dict, load_config, load_music_pool
from .core import ManifestStore, RouteClass, Status, load_manifest
from .costing import UsageLedger, cost_table, ledger_report
from .errors import CurationError
from .evalstats import (
    aggregate_mos,
    clap_report,
    frechet_distance,
    inception_score,
    load_mos_records,
    load_pairwise_results,
    mean_win_rate,
    method_win_rate,
    paired_kl,
    read_matrix,
    tally_pairwise,
)
from .pipeline import posthoc_filter, route, run_handoff, run_pipeline
from .planner import make_plan, plan_config_from_dict, write_plan
from .review import ReviewQueue, create_app

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PARTIAL = 2
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def build_parser() -> _Parser:
    parser = _Parser(prog="avcurate", description=__doc__)
    parser.add_argument("--version", action="version", version=f"avcurate {__version__}")
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--manifest", help="sample manifest JSONL")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--parallelism", type=int, default=1)
    parser.add_argument("--mock", action="store_true",
                        help="use deterministic in-process clients; no network")
    parser.add_argument("--json", action="store_true", dest="as_json",
                        help="emit reports as JSON on stdout")
    parser.add_argument("--log-level", default="WARNING")
    parser.add_argument("--ledger", help="token usage ledger JSONL")

    sub = parser.add_subparsers(dest="command")

    sub.add_parser("route", help="apply consistency routing to pending entries")
    sub.add_parser("caption", help="run the junior-senior handoff on routed entries")
    sub.add_parser("filter", help="apply post-hoc filtering to captioned entries")
    sub.add_parser("run", help="route + caption + filter in one pass")
    sub.add_parser("compact", help="rewrite the manifest keeping current revisions")
    sub.add_parser("cost-report", help="token usage and dollar projections")

    bench = sub.add_parser("bench", help="benchmark construction").add_subparsers(
        dest="bench_command")
    build = bench.add_parser("build", help="assemble one benchmark track")
    build.add_argument("--track", required=True,
                       choices=[t.value for t in Track])
    build.add_argument("--out", required=True)
    build.add_argument("--music-pool", help="JSONL of {id, caption, audio_path}")
    build.add_argument("--mix-dir")
    build.add_argument("--no-audio", action="store_true",
                       help="emit rows without materializing mixed WAVs")
    audit = bench.add_parser("audit", help="coverage-audit accepted captions")
    audit.add_argument("--queue", help="review queue JSONL (enqueues flagged entries)")

    plan = sub.add_parser("plan", help="generate a training plan")
    plan.add_argument("--stages", required=True, help="stage/dataset config JSON")
    plan.add_argument("--out", required=True)

    evalp = sub.add_parser("eval", help="evaluation statistics").add_subparsers(
        dest="eval_command")
    fd = evalp.add_parser("fd")
    fd.add_argument("--x", required=True)
    fd.add_argument("--y", required=True)
    isp = evalp.add_parser("is")
    isp.add_argument("--p", required=True)
    kl = evalp.add_parser("kl")
    kl.add_argument("--p", required=True)
    kl.add_argument("--q", required=True)
    mwr = evalp.add_parser("mwr")
    mwr.add_argument("--results")
    mwr.add_argument("--method")
    mwr.add_argument("--win", type=int)
    mwr.add_argument("--tie", type=int)
    mwr.add_argument("--total", type=int)
    mos = evalp.add_parser("mos")
    mos.add_argument("--records", required=True)
    clap = evalp.add_parser("clap")
    clap.add_argument("--manifest", dest="clap_manifest")

    serve = sub.add_parser("serve", help="start the review service")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--queue")
    serve.add_argument("--media-root")
    return parser


def _emit(args, payload: dict, text: Optional[str] = None) -> None:
    if args.as_json or text is None:
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))
    else:
        print(text)


def _make_clients(args, cfg: AppConfig):
    if args.mock or cfg.mock:
        return MockClients(cfg.clients)
    return HttpClients(cfg.clients)


def _need_manifest(args) -> Path:
    if not args.manifest:
        raise _UsageError("this command needs --manifest")
    path = Path(args.manifest)
    if not path.exists():
        raise CurationError(f"manifest {path} does not exist")
    return path


def _ledger_path(args, manifest: Path) -> Path:
    return Path(args.ledger) if args.ledger else manifest.with_name("usage_ledger.jsonl")


def _load_ledger(path: Path) -> UsageLedger:
    return UsageLedger.read_jsonl(path) if path.exists() else UsageLedger()


# --- subcommand bodies -------------------------------------------------------------

def _cmd_route(args, cfg: AppConfig) -> int:
    manifest = _need_manifest(args)
    store = ManifestStore(manifest)
    clients = _make_clients(args, cfg)
    counts = {"Enhanced": 0, "AudioOnly": 0, "Discard": 0}
    for entry in store.entries():
        if entry.status != Status.PENDING or entry.route is not None:
            continue
        score = entry.scores.ib_score
        if score is None:
            if not entry.media.video_path:
                continue
            score = clients.score_av_alignment(entry.media.video_path,
                                               entry.media.audio_path)
            entry = replace(entry, scores=replace(entry.scores, ib_score=score))
        decided = route(score, cfg.pipeline.router)
        counts[decided.value] += 1
        updated = replace(entry, route=decided)
        if decided == RouteClass.DISCARD:
            updated = replace(updated, status=Status.DISCARDED)
        store.append(updated)
    payload = {"routed": sum(counts.values()), "counts": counts,
               "config": effective_config_dict(cfg)}
    _emit(args, payload, text=f"routed {sum(counts.values())} entries: {counts}")
    return EXIT_OK


def _cmd_caption(args, cfg: AppConfig) -> int:
    manifest = _need_manifest(args)
    store = ManifestStore(manifest)
    clients = _make_clients(args, cfg)
    ledger_path = _ledger_path(args, manifest)
    ledger = _load_ledger(ledger_path)
    captioned, failed = 0, []
    for entry in store.entries():
        if entry.status != Status.PENDING or entry.caption is not None:
            continue
        if entry.route not in (RouteClass.ENHANCED, RouteClass.AUDIO_ONLY):
            continue
        try:
            store.append(run_handoff(entry, clients, cfg.pipeline.escalation, ledger))
            captioned += 1
        except CurationError as exc:
            logger.warning("caption failed for %s: %s", entry.id, exc)
            failed.append(entry.id)
    ledger.write_jsonl(ledger_path)
    payload = {"captioned": captioned, "failed": failed,
               "ledger": str(ledger_path), "config": effective_config_dict(cfg)}
    _emit(args, payload, text=f"captioned {captioned} entries ({len(failed)} failed)")
    return EXIT_PARTIAL if failed else EXIT_OK


def _cmd_filter(args, cfg: AppConfig) -> int:
    manifest = _need_manifest(args)
    store = ManifestStore(manifest)
    clients = _make_clients(args, cfg)
    counts = {"Accepted": 0, "Discarded": 0, "Flagged": 0}
    for entry in store.entries():
        if entry.status != Status.PENDING or entry.caption is None:
            continue
        working = replace(entry)
        status = posthoc_filter(working, clients, cfg.pipeline.filter)
        counts[status.value] += 1
        store.append(replace(working, status=status))
    payload = {"filtered": sum(counts.values()), "counts": counts,
               "config": effective_config_dict(cfg)}
    _emit(args, payload, text=f"filtered {sum(counts.values())} entries: {counts}")
    return EXIT_OK


def _cmd_run(args, cfg: AppConfig) -> int:
    manifest = _need_manifest(args)
    clients = _make_clients(args, cfg)
    ledger_path = _ledger_path(args, manifest)
    ledger = _load_ledger(ledger_path)
    summary = run_pipeline(manifest, clients, cfg.pipeline,
                           parallelism=args.parallelism, ledger=ledger)
    ledger.write_jsonl(ledger_path)
    payload = summary.to_dict() | {"config": effective_config_dict(cfg)}
    _emit(args, payload, text=(
        f"accepted={summary.accepted} discarded={summary.discarded} "
        f"flagged={summary.flagged} escalation_rate={summary.escalation_rate:.3f} "
        f"pending={len(summary.pending)}"))
    return EXIT_PARTIAL if summary.pending else EXIT_OK


def _cmd_compact(args, cfg: AppConfig) -> int:
    manifest = _need_manifest(args)
    kept = ManifestStore(manifest).compact()
    _emit(args, {"entries": kept}, text=f"compacted to {kept} entries")
    return EXIT_OK


def _cmd_cost_report(args, cfg: AppConfig) -> int:
    manifest = Path(args.manifest) if args.manifest else None
    ledger_path = Path(args.ledger) if args.ledger else (
        _ledger_path(args, manifest) if manifest else None)
    ledger = _load_ledger(ledger_path) if ledger_path else UsageLedger()
    report = ledger_report(ledger, cfg.pricing)
    table = cost_table(cfg.pricing)
    payload = {"ledger": report, "reference_table": table,
               "config": effective_config_dict(cfg)}
    lines = [f"{'Configuration':44} {'Input':>7} {'Output':>7} {'USD / 1M samples':>18}"]
    for row in table:
        lines.append(f"{row['configuration']:44} {row['input_tokens']:>7} "
                     f"{row['output_tokens']:>7} {row['usd_per_1m_samples']:>18,.2f}")
    lines.append("")
    lines.append(f"ledger: {report['records']} calls over {report['samples']} samples, "
                 f"total ${report['total_usd']:,.2f}, "
                 f"escalation rate {report['escalation_rate']:.3f}")
    _emit(args, payload, text="\n".join(lines))
    return EXIT_OK


def _cmd_bench_build(args, cfg: AppConfig) -> int:
    manifest = _need_manifest(args)
    store = ManifestStore(manifest)
    music_pool = load_music_pool(args.music_pool) if args.music_pool else []
    assemble_cfg = AssembleConfig(
        natural=cfg.natural,
        synthetic=cfg.synthetic,
        mix=cfg.mix,
        music_pool=music_pool,
        mix_dir=args.mix_dir,
        caption_template=cfg.caption_template,
        materialize_audio=not args.no_audio,
    )
    rows = assemble_track(store, Track(args.track), assemble_cfg, seed=args.seed,
                          out_path=args.out, judge_client=_make_clients(args, cfg))
    payload = {"track": args.track, "rows": len(rows), "out": args.out,
               "seed": args.seed, "config": effective_config_dict(cfg)}
    _emit(args, payload, text=f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_bench_audit(args, cfg: AppConfig) -> int:
    manifest = _need_manifest(args)
    store = ManifestStore(manifest)
    summary = audit_manifest(store, _make_clients(args, cfg))
    queue_size = None
    if args.queue:
        queue = ReviewQueue(args.queue, store, ttl_s=cfg.review_ttl_s)
        queue_size = queue.enqueue_flagged()
    payload = summary.to_dict() | {"queue_size": queue_size,
                                   "config": effective_config_dict(cfg)}
    _emit(args, payload, text=(
        f"audited {summary.audited}: {summary.covered} covered, "
        f"{len(summary.mismatched)} mismatched, {len(summary.errored)} errored"
        + (f", queue size {queue_size}" if queue_size is not None else "")))
    return EXIT_OK


def _cmd_plan(args, cfg: AppConfig) -> int:
    with open(args.stages, "r", encoding="utf-8") as fh:
        stages, datasets = plan_config_from_dict(json.load(fh))
    steps = make_plan(stages, seed=args.seed, datasets=datasets)
    count = write_plan(steps, args.out)
    _emit(args, {"steps": count, "out": args.out, "seed": args.seed},
          text=f"wrote {count} steps to {args.out}")
    return EXIT_OK


def _cmd_eval(args, cfg: AppConfig) -> int:
    cmd = args.eval_command
    if cmd == "fd":
        value = frechet_distance(read_matrix(args.x), read_matrix(args.y))
        payload = {"fd": round(value, 9)}
    elif cmd == "is":
        payload = {"is": inception_score(read_matrix(args.p))}
    elif cmd == "kl":
        payload = {"kl": paired_kl(read_matrix(args.p), read_matrix(args.q))}
    elif cmd == "mwr":
        if args.results:
            if not args.method:
                raise _UsageError("eval mwr --results needs --method")
            results = load_pairwise_results(args.results)
            wins, ties, total = tally_pairwise(results, args.method)
            payload = {"mwr": method_win_rate(results, args.method),
                       "wins": wins, "ties": ties, "total": total}
        elif None not in (args.win, args.tie, args.total):
            payload = {"mwr": mean_win_rate(args.win, args.tie, args.total)}
        else:
            raise _UsageError("eval mwr needs --results or --win/--tie/--total")
    elif cmd == "mos":
        payload = aggregate_mos(load_mos_records(args.records))
    elif cmd == "clap":
        manifest = args.clap_manifest or args.manifest
        if not manifest:
            raise _UsageError("eval clap needs a manifest")
        payload = clap_report(load_manifest(manifest))
    else:
        raise _UsageError("eval needs a subcommand: fd|is|kl|mwr|mos|clap")
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def _cmd_serve(args, cfg: AppConfig) -> int:
    import uvicorn

    manifest = _need_manifest(args)
    queue_path = Path(args.queue) if args.queue else manifest.with_name("review_queue.jsonl")
    media_root = Path(args.media_root) if args.media_root else manifest.parent
    app = create_app(manifest, queue_path, media_root=media_root, ttl_s=cfg.review_ttl_s)
    uvicorn.run(app, host=args.host, port=args.port, log_level=args.log_level.lower())
    return EXIT_OK


_COMMANDS = {
    "route": _cmd_route,
    "caption": _cmd_caption,
    "filter": _cmd_filter,
    "run": _cmd_run,
    "compact": _cmd_compact,
    "cost-report": _cmd_cost_report,
    "plan": _cmd_plan,
    "eval": _cmd_eval,
    "serve": _cmd_serve,
}


def dispatch(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError(parser.format_usage())
        logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.WARNING))
        cfg = load_config(args.config)
        if args.command == "bench":
            if args.bench_command == "build":
                return _cmd_bench_build(args, cfg)
            if args.bench_command == "audit":
                return _cmd_bench_audit(args, cfg)
            raise _UsageError("bench needs a subcommand: build|audit")
        return _COMMANDS[args.command](args, cfg)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except CurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
