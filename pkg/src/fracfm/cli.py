"""Command-line interface.

Subcommands
-----------
``forward``      forward solve only: writes ``F_b.ffm`` and ``F.ffm``.
``invert``       noise and inversion from an archive directory (``--archive``).
``run``          forward solve, noise and inversion.
``validate``     run a validation suite; nonzero exit if any check fails.
``preset-dump``  print a preset as a config scene mapping.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

import yaml

from .pipeline import (SUITES, ConfigError, PipelineError, config_from_dict, emit_config, resolve_threads,
                       run, validate)
from .presets import dump_preset, preset, preset_names
from .wavecore import ValidationError

log = logging.getLogger("fracfm")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="YAML experiment config")
    p.add_argument("--scene", help="preset name (when no config is given)")
    p.add_argument("--seed", type=int, help="noise seed (unsigned 64-bit)")
    p.add_argument("--noise", type=float, metavar="PCT", help="target noise level in percent (F and F_b)")
    p.add_argument("--method", choices=("tikhonov", "picard"))
    p.add_argument("--tau", type=float, help="threshold fraction of the maximum indicator")
    p.add_argument("--out", type=str, help="output directory")
    p.add_argument("--threads", type=int, metavar="COUNT",
                   help="thread count (overrides the FRACFM_THREADS environment variable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracfm", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("forward", "forward solve and archive the far-field matrices"),
                      ("run", "forward solve, noise and inversion")):
        _common(sub.add_parser(name, help=hlp))
    p = sub.add_parser("invert", help="noise and inversion from archived far-field matrices")
    _common(p)
    p.add_argument("--archive", type=str, help="directory holding F.ffm and F_b.ffm")
    p = sub.add_parser("validate", help="run a validation suite")
    p.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p = sub.add_parser("preset-dump", help="print a preset as YAML")
    p.add_argument("name", choices=preset_names())
    return ap


def _config(args, command: str):
    if args.config is not None:
        d = yaml.safe_load(args.config.read_text()) or {}
        base = args.config.parent
    else:
        d = {}
        base = None
    if not isinstance(d, dict):
        raise ConfigError([("config", "expected a mapping")])
    if args.scene is not None:
        d["scene"] = args.scene
        d.pop("scene_ref", None)
    if args.seed is not None:
        d["seed"] = args.seed
    if args.noise is not None:
        d["noise"] = {**(d.get("noise") or {}), "mode": "target",
                      "delta": args.noise / 100.0, "delta_b": args.noise / 100.0}
    if args.method is not None:
        d["method"] = args.method
    if args.tau is not None:
        d["tau"] = args.tau
    if args.out is not None:
        d["out"] = args.out
    if args.threads is not None:
        d["threads"] = args.threads
    stages = dict(d.get("stages") or {})
    if command == "forward":
        stages.update(forward=True, invert=False)
    elif command == "invert":
        stages.update(forward=False, invert=True)
        if getattr(args, "archive", None) is not None:
            stages["archive_in"] = args.archive
    elif command == "run":
        stages.update(forward=True, invert=True)
    d["stages"] = stages
    cfg = config_from_dict(d, base)
    # an explicit flag beats the environment variable, which beats the config
    cfg.threads = resolve_threads(args.threads, cfg.threads)
    return cfg


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "preset-dump":
            sys.stdout.write(dump_preset(preset(args.name)))
            return 0
        if args.command == "validate":
            checks = validate(args.suite)
            for c in checks:
                print(c.line())
            return 0 if all(c.passed for c in checks) else 1
        cfg = _config(args, args.command)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.yaml").write_text(emit_config(cfg))
        res = run(cfg, log=log.info)
        print(f"{args.command}: ok, artifacts in {res.out}")
        return 0
    except ConfigError as exc:
        for path, msg in exc.errors:
            print(f"config error: {path}: {msg}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"error: {exc} (partial artifacts kept)", file=sys.stderr)
        return 1
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
