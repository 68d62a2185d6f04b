"""Command-line entry point: ``topicbias {ingest-check,run,plot,synth}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .pipeline import IngestError, StageError, emit_plots, ingest, load_config, read_profiles, run_pipeline
from .synth import PlantedSpec, generate


def _overrides(pairs: list[str]) -> dict[str, str]:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise SystemExit(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _config(args):
    overrides = _overrides(args.set)
    if getattr(args, "inputs", None):
        overrides["inputs"] = args.inputs
    if getattr(args, "out", None):
        overrides["output"] = args.out
    return load_config(args.config, overrides)


def cmd_ingest_check(args) -> int:
    config = _config(args)
    tables = ingest(config.input_paths())
    for name, count in sorted(tables.row_counts.items()):
        print(f"{name}\t{count}")
    return 0


def cmd_run(args) -> int:
    manifest = run_pipeline(_config(args))
    for w in manifest.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {len(manifest.outputs) + 1} files to {_config(args).output}")
    return 0


def cmd_plot(args) -> int:
    variants = [v for v in args.variants.split(",") if v]
    table = Path(args.results) / ("category_profiles.csv" if args.bin else "topic_profiles.csv")
    rows = read_profiles(table)
    out = emit_plots(rows, args.subject, variants, args.coverage, args.out, size_bin=args.bin)
    print(out)
    return 0


def cmd_synth(args) -> int:
    kwargs = {}
    types = {f.name: f.type for f in fields(PlantedSpec)}
    for key, value in _overrides(args.set).items():
        if key not in types:
            raise SystemExit(f"unknown synth parameter {key!r}")
        if key == "categories":
            kwargs[key] = tuple(v.strip() for v in value.split(","))
        elif key == "similarity_mode":
            kwargs[key] = value
        elif key in ("p_in", "p_out"):
            kwargs[key] = float(value)
        else:
            kwargs[key] = int(value)
    corpus = generate(PlantedSpec(**kwargs))
    for path in corpus.write(args.out).values():
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topicbias", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_like(p):
        p.add_argument("--config", help="file of 'key = value' lines")
        p.add_argument("--inputs", help="directory holding the input tables")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    p = sub.add_parser("ingest-check", help="validate input tables and print row counts")
    run_like(p)
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("run", help="run the full evaluation and write reports")
    run_like(p)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plot", help="draw a purity profile as SVG")
    p.add_argument("--results", required=True, help="output directory of a run")
    p.add_argument("--subject", required=True, help="topic code, or category id with --bin")
    p.add_argument("--variants", default="pure,mixed,similarity")
    p.add_argument("--coverage", type=float, default=0.5)
    p.add_argument("--bin", help="size bin label (plots a category profile)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("synth", help="write a planted-topic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="PlantedSpec field")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IngestError, ValueError, KeyError, FileNotFoundError) as exc:
        stage = "ingest" if isinstance(exc, IngestError) else args.command
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: [{stage}] {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
