"""Command-line entry points for the batch pipeline and the service.

Subcommands: synth, ingest, distill, index, search, sweep, grade,
consensus, report, serve. Exit codes: 0 success, 2 usage/config error,
1 runtime failure (with one machine-readable JSON error line on stderr).
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigFileError, PipelineConfig
from . import pipeline
from .corpus import MalformedInputError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convmem",
        description="Conversational memory engine: segment, distill, index, "
                    "search, and evaluate one user's agent history.",
    )
    parser.add_argument("--config-file", help="pipeline config JSON file")
    parser.add_argument("--store", help="store directory (overrides config)")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("synth", help="generate the deterministic synthetic corpus")
    p.add_argument("--exchanges", type=int, default=1000)
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("ingest", help="segment a message log into exchanges")
    p.add_argument("--in", dest="in_path", help="corpus JSONL (default: store corpus.jsonl)")

    sub.add_parser("distill", help="distill exchanges into palace objects")
    sub.add_parser("index", help="embed and persist the vector stores")

    p = sub.add_parser("search", help="run one configuration over one query")
    p.add_argument("--config", dest="config_id", required=True,
                   help="configuration id, e.g. full_text:bm25_okapi:passthrough")
    p.add_argument("--query", required=True)
    p.add_argument("--rerank", action="store_true")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--k", type=int, default=None)

    p = sub.add_parser("sweep", help="run a config space over the query set")
    p.add_argument("--space", default="evaluated",
                   choices=["pure", "cross", "hybrid", "evaluated", "all"])
    p.add_argument("--queries", dest="queries_path", default=None)

    p = sub.add_parser("grade", help="grade sweep results with the configured graders")
    p.add_argument("--graders", default=None,
                   help="comma-separated provider specs (default from config)")

    sub.add_parser("consensus", help="compute consensus grades with escalation")
    sub.add_parser("report", help="compute metrics, statistics, and the report")

    p = sub.add_parser("serve", help="serve the read-only HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--ui", default=None,
                   help="also serve the built browser client from this directory")
    return parser


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config_file) if args.config_file else PipelineConfig()
    if args.store:
        cfg.store_dir = args.store
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = _load_config(args)
    except (ConfigFileError, OSError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2

    try:
        if args.command == "synth":
            out = pipeline.step_synth(cfg, args.exchanges, args.queries, args.seed)
        elif args.command == "ingest":
            out = pipeline.step_ingest(cfg, args.in_path)
        elif args.command == "distill":
            out = pipeline.step_distill(cfg)
        elif args.command == "index":
            out = pipeline.step_index(cfg)
        elif args.command == "search":
            if args.k is not None:
                cfg.k = args.k
            ranked = pipeline.step_search(cfg, args.config_id, args.query,
                                          rerank=args.rerank, lam=args.lam)
            out = {
                "query": args.query,
                "config_id": ranked.config_id,
                "results": [
                    {"exchange_ref": e.ref, "rank": e.rank, "score": e.score,
                     "provenance": ranked.layer_provenance.get(e.ref, [])}
                    for e in ranked.entries
                ],
            }
        elif args.command == "sweep":
            out = pipeline.step_sweep(cfg, args.space, args.queries_path)
        elif args.command == "grade":
            if args.graders:
                cfg.graders = args.graders.split(",")
            out = pipeline.step_grade(cfg)
        elif args.command == "consensus":
            out = pipeline.step_consensus(cfg)
        elif args.command == "report":
            out = pipeline.step_report(cfg)
        elif args.command == "serve":
            from .service import serve
            serve(cfg, args.host, args.port, frontend_dir=args.ui)
            return 0
        else:  # pragma: no cover - argparse guards this
            parser.print_usage(sys.stderr)
            return 2
    except (MalformedInputError, ConfigFileError, ValueError, KeyError) as exc:
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}), file=sys.stderr)
        return 2
    except (pipeline.StoreLockedError, OSError, RuntimeError) as exc:
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}), file=sys.stderr)
        return 1

    print(json.dumps(out, ensure_ascii=False))
    return 0


if __name__ == "__main__":
    sys.exit(main())
