"""Command-line interface.

Subcommands: synth, ingest-check, blocks, detect, evaluate, export-disc.
Configuration comes from a single JSON file (see pipeline.RunConfig);
--seed overrides the configured seed. Exit codes identify the failing
stage: 2 usage or configuration, 3 corpus, 4 graph construction,
6 training, 7 evaluation or export, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .corpus import format_rfc3339, ingest, split_blocks, synth
from .graph_entropy import GraphError
from .message_graph import CorpusError
from .model import ConfigurationError, TrainingDivergedError
from .pipeline import (
    ConfigFileError,
    RunConfig,
    evaluate,
    export_disc,
    load_run_config,
    run_detect,
)

EXIT_USAGE = 2
EXIT_CORPUS = 3
EXIT_GRAPH = 4
EXIT_TRAINING = 6
EXIT_EVAL = 7


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperevent",
        description="Unsupervised event detection over embedded short messages.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a planted-partition corpus")
    p.add_argument("--n", type=int, required=True, help="number of messages")
    p.add_argument("--events", type=int, required=True, help="number of planted events")
    p.add_argument("--dim", type=int, default=16, help="embedding dimension")
    p.add_argument("--noise", type=float, default=0.1, help="Gaussian noise scale")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--days", type=float, default=10.0, help="timestamp span in days")
    p.add_argument("--out", required=True, help="output corpus path (JSON lines)")

    p = sub.add_parser("ingest-check", help="validate a corpus file")
    p.add_argument("corpus")

    p = sub.add_parser("blocks", help="split a corpus into time blocks")
    p.add_argument("corpus")
    p.add_argument("--out", help="write the block summary as JSON")

    p = sub.add_parser("detect", help="run event detection")
    p.add_argument("corpus")
    p.add_argument("--config", help="run-configuration JSON file")
    p.add_argument("--mode", choices=["offline", "online"], default="offline")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--dump-graph", help="also write the message graph in text form")

    p = sub.add_parser("evaluate", help="score a labels file against ground truth")
    p.add_argument("labels")
    p.add_argument("corpus")
    p.add_argument("--out", help="write the metric report as JSON")

    p = sub.add_parser("export-disc", help="2-D disc coordinates from a detect run")
    p.add_argument("latents", help="latents.npz written by detect")
    p.add_argument("--out", required=True, help="output CSV path")
    return parser


def _cmd_synth(args) -> int:
    records = synth(
        n=args.n,
        k_events=args.events,
        dim=args.dim,
        noise=args.noise,
        seed=args.seed,
        out_path=args.out,
        days=args.days,
    )
    print(f"wrote {len(records)} messages, {args.events} events -> {args.out}")
    return 0


def _cmd_ingest_check(args) -> int:
    records = ingest(args.corpus)
    labeled = sum(1 for r in records if r.label is not None)
    t0 = min(r.timestamp for r in records)
    t1 = max(r.timestamp for r in records)
    print(
        f"{args.corpus}: {len(records)} messages, dimension "
        f"{records[0].embedding.size}, {labeled} labeled, "
        f"span {format_rfc3339(t0)} .. {format_rfc3339(t1)}"
    )
    return 0


def _cmd_blocks(args) -> int:
    records = ingest(args.corpus)
    blocks = split_blocks(records)
    summary = []
    for i, block in enumerate(blocks):
        summary.append(
            {
                "index": i,
                "n_messages": len(block),
                "start": format_rfc3339(min(m.timestamp for m in block)),
                "end": format_rfc3339(max(m.timestamp for m in block)),
                "ids": [m.id for m in block],
            }
        )
        print(f"block {i}: {len(block)} messages, {summary[-1]['start']} .. {summary[-1]['end']}")
    if args.out:
        Path(args.out).write_text(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def _cmd_detect(args) -> int:
    records = ingest(args.corpus)
    config = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config.train = replace(config.train, seed=args.seed)
    report = run_detect(
        records, config, mode=args.mode, out_dir=args.out, dump_graph=args.dump_graph
    )
    print(
        f"detected {report['detected_events']} events over {report['n_messages']} "
        f"messages ({args.mode}); outputs in {args.out}"
    )
    return 0


def _cmd_evaluate(args) -> int:
    records = ingest(args.corpus)
    report = evaluate(args.labels, records, out_path=args.out)
    print(f"NMI {report['nmi']:.4f}  AMI {report['ami']:.4f}  ARI {report['ari']:.4f}")
    return 0


def _cmd_export_disc(args) -> int:
    count = export_disc(args.latents, args.out)
    print(f"wrote {count} disc coordinates -> {args.out}")
    return 0


_STAGE_EXITS = [
    (ConfigFileError, EXIT_USAGE, "configuration"),
    (CorpusError, EXIT_CORPUS, "corpus"),
    (GraphError, EXIT_GRAPH, "graph construction"),
    (TrainingDivergedError, EXIT_TRAINING, "training"),
    (ConfigurationError, EXIT_TRAINING, "training"),
]

_COMMANDS = {
    "synth": _cmd_synth,
    "ingest-check": _cmd_ingest_check,
    "blocks": _cmd_blocks,
    "detect": _cmd_detect,
    "evaluate": _cmd_evaluate,
    "export-disc": _cmd_export_disc,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except tuple(exc for exc, _, _ in _STAGE_EXITS) as err:
        for exc_type, code, stage in _STAGE_EXITS:
            if isinstance(err, exc_type):
                print(f"error [{stage}]: {err}", file=sys.stderr)
                return code
        raise  # unreachable
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_EVAL if args.command in ("evaluate", "export-disc") else 1


if __name__ == "__main__":
    sys.exit(main())
