"""Command-line entry point.

Exit status: 0 on success, 2 for invalid configuration or arguments,
1 for a failure while computing or writing outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import PRESETS, SWEEPS, ConfigError, preset
from .scenarios import build_outputs
from . import io

OUT_ENV = "OPTOMEM_OUT_DIR"
DEFAULT_OUT = "optomem_out"

ALLOWED = {
    "simulate": ("storage", "omit_sweep"),
    "sweep": SWEEPS,
    "fit": ("fit",),
    "synth": ("synth",),
}


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optomem",
        description="Simulation and fitting front-end for an optomechanical memory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, help="noise seed, overriding the config")
    common.add_argument("--out", help=f"output directory (else ${OUT_ENV}, then the config)")
    for name, help_text in (("simulate", "single storage run or OMIT spectrum"),
                            ("sweep", "parameter sweep with fit"),
                            ("fit", "fit a dataset CSV"),
                            ("synth", "seeded synthetic dataset")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--config", required=True, help="JSON scenario file")
    p = sub.add_parser("preset", parents=[common], help="reproduce one figure")
    p.add_argument("name", nargs="?", choices=PRESETS)
    p.add_argument("--preset", dest="preset_flag", choices=PRESETS)
    return parser


def _out_dir(args, config: dict | None) -> Path:
    if args.out:
        return Path(args.out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    if config and "output" in config and "dir" in config["output"]:
        return Path(config["output"]["dir"])
    return Path(DEFAULT_OUT)


def _load(path: str) -> dict:
    try:
        with open(path) as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("", "config must be a JSON object")
    return config


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "preset":
            name = args.name or args.preset_flag
            if name is None:
                raise ConfigError("preset", "give a preset name")
            if args.name and args.preset_flag and args.name != args.preset_flag:
                raise ConfigError("preset", "conflicting preset names")
            configs = preset(name, seed=args.seed)
            out = _out_dir(args, None)
        else:
            config = _load(args.config)
            scenario = config.get("scenario")
            if scenario is not None and scenario not in ALLOWED[args.command]:
                raise ConfigError("scenario", f"{scenario!r} is not handled by "
                                              f"'{args.command}'; expected one of "
                                              f"{', '.join(ALLOWED[args.command])}")
            configs = [config]
            out = _out_dir(args, config)
        files: dict[str, str] = {}
        for cfg in configs:
            files.update(build_outputs(cfg, args.seed))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        for path in io.write_outputs(out, files):
            print(path)
    except OSError as exc:
        print(f"error writing outputs: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
