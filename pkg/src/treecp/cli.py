"""Command line entry point.

    treecp <experiment> --config <path> [--seed N] [--trials N] [--out DIR] [--workers N]
    treecp plotdata --manifest <path>

Errors are printed to stderr as one JSON object and give exit status 2
(configuration) or 1 (anything else).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments
from .errors import ConfigError, TreeCPError


def _error(exc: Exception, out_dir=None) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        payload.update(field=exc.field, rule=exc.rule)
    text = json.dumps(payload)
    print(text, file=sys.stderr)
    if out_dir is not None:
        try:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return 2 if isinstance(exc, ConfigError) else 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.exit(_error(ConfigError(message, field="arguments", rule="command line syntax")))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="treecp", description="Contact-process experiments on d-ary trees.")
    p.add_argument("experiment", choices=list(experiments.KINDS) + ["plotdata"])
    p.add_argument("--config", help="TOML or JSON experiment config")
    p.add_argument("--manifest", help="manifest.json of a finished run (plotdata only)")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.experiment == "plotdata":
        if not args.manifest:
            return _error(ConfigError("plotdata needs --manifest", field="manifest", rule="required"))
        try:
            m = experiments.RunManifest.load(args.manifest)
            files = experiments.emit_plotdata(m)
        except (OSError, TreeCPError, ValueError, KeyError) as exc:
            return _error(exc)
        print(json.dumps({"written": files}))
        return 0
    if not args.config:
        return _error(ConfigError("--config is required", field="config", rule="required"), args.out)
    try:
        cfg = experiments.load_config(args.config, args.experiment)
        cfg = experiments.apply_overrides(cfg, args.seed, args.trials, args.out, args.workers)
    except TreeCPError as exc:
        return _error(exc, args.out)
    try:
        manifest = experiments.run(cfg)
    except (TreeCPError, OSError) as exc:
        return _error(exc, cfg.out)
    print(json.dumps({"out": cfg.out, "config_hash": manifest.config_hash,
                      "wall_time": manifest.wall_time}))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
