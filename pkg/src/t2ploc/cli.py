"""Command-line entry point: ``t2ploc <command> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Errors are reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import MISSING, fields

from . import pipeline
from .config import PipelineConfig, load_config
from .errors import ConfigError, T2PError

COMMANDS = {
    "build-maps": "sample map centers and build local maps",
    "gen-queries": "sample query positions and write templated queries with PNA labels",
    "render": "render BEV images and scene graphs",
    "label": "write node-assignment labels (partial or full strategy)",
    "localize": "localize every query with the oracle or a VLM endpoint",
    "evaluate": "score predictions (Recall@K, assignment accuracy, error buckets)",
    "pipeline": "run every stage in order",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail(2, message, field=None, kind="UsageError")


def _fail(code, message, field=None, kind="Error"):
    sys.stderr.write(json.dumps({"error": message, "field": field, "type": kind}, sort_keys=True) + "\n")
    raise SystemExit(code)


def _type_for(f):
    if f.type in ("float", float):
        return float
    if f.type in ("int", int):
        return int
    if f.type in ("dict", "list", dict, list):
        return json.loads
    return str


def _add_config_options(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file ('toy' selects the bundled toy dataset)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads; outputs do not depend on it (default: 1)")
    p.add_argument("--trace", action="store_true", help="log endpoint requests and responses, token redacted")
    p.add_argument("-v", "--verbose", action="store_true")
    g = p.add_argument_group("configuration fields (override the config file)")
    for f in fields(PipelineConfig):
        default = f.default if f.default is not MISSING else None
        help_text = f"{f.metadata['help']} (default: {default if default is not None else 'see description'})"
        g.add_argument(
            "--" + f.name.replace("_", "-"),
            dest=f.name,
            type=_type_for(f),
            default=None,
            choices=f.metadata.get("choices"),
            help=help_text.replace("%", "%%"),
        )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="t2ploc", description="Text-to-point-cloud localization toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        if name == "build-maps":
            p.add_argument("--mode", dest="map_mode_flag", choices=("trajectory", "grid"))
        if name == "label":
            p.add_argument("--strategy", choices=("partial", "full"))
        if name == "localize":
            p.add_argument("--method", choices=("oracle", "vlm"))
        _add_config_options(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 2
    logging.basicConfig(level=logging.INFO if (args.verbose or args.trace) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {f.name: getattr(args, f.name) for f in fields(PipelineConfig)}
    if getattr(args, "map_mode_flag", None):
        overrides["map_mode"] = args.map_mode_flag
    jobs = max(1, args.jobs)
    try:
        cfg = load_config(args.config, overrides)
        cmd = args.command
        if cmd == "build-maps":
            pipeline.build_maps(cfg, jobs)
        elif cmd == "gen-queries":
            pipeline.gen_queries(cfg, jobs)
        elif cmd == "render":
            pipeline.render(cfg, jobs)
        elif cmd == "label":
            pipeline.label(cfg, jobs, args.strategy)
        elif cmd == "localize":
            pipeline.localize(cfg, jobs, args.method, args.trace)
        elif cmd == "evaluate":
            report = pipeline.run_evaluation(cfg, jobs)
            print(json.dumps({"n_queries": report.n_queries, "recall": report.to_dict()["recall"]}, sort_keys=True))
        elif cmd == "pipeline":
            report = pipeline.run_pipeline(cfg, jobs, args.trace)
            print(json.dumps({"n_queries": report.n_queries, "recall": report.to_dict()["recall"]}, sort_keys=True))
    except ConfigError as exc:
        _fail(2, str(exc), exc.field, type(exc).__name__)
    except T2PError as exc:
        _fail(1, str(exc), getattr(exc, "field", None), type(exc).__name__)
    except (OSError, ValueError) as exc:
        _fail(1, str(exc), None, type(exc).__name__)
    return 0


if __name__ == "__main__":
    sys.exit(main())
