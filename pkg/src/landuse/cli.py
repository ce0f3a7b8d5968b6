"""Command-line driver: ``landuse [--config F] [--seed N] [--out-dir D] <command>``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .config import load_config
from .errors import LandUseError, StageError
from .synthcity import apply_overrides, generate_city, preset

log = logging.getLogger("landuse")

COMMANDS = {
    "synth": "generate a synthetic city dataset",
    "grid": "build pattern and volume rasters",
    "train": "sweep beta on the labelled samples",
    "cluster": "fuzzy c-means with cluster-count selection",
    "classify": "label clusters and write the classified raster",
    "evaluate": "compare against the truth raster",
    "pipeline": "run grid through evaluate",
}


def _global_flags(suppress):
    p = argparse.ArgumentParser(add_help=False)
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", type=Path, default=default, help="key = value config file")
    p.add_argument("--seed", type=int, default=default, help="override the config seed")
    p.add_argument("--out-dir", type=Path, default=default, help="artifact directory")
    p.add_argument("-v", "--verbose", action="store_true", default=False if not suppress else argparse.SUPPRESS)
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="landuse", parents=[_global_flags(False)],
                                     description="Land-use classification from per-tower call counts.")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    shared = _global_flags(True)
    for name, text in COMMANDS.items():
        p = sub.add_parser(name, parents=[shared], help=text, description=text)
        if name == "synth":
            p.add_argument("--preset", default=None, help="scenario preset (default: clean)")
    return parser


def _synth(cfg, preset_name):
    name = preset_name or cfg.extra.get("preset", "clean")
    sc = preset(name, seed=cfg.seed)
    sc = apply_overrides(sc, {k[len("synth."):]: v for k, v in cfg.extra.items() if k.startswith("synth.")})
    sc = replace(sc, seed=cfg.seed)
    ds = generate_city(sc)
    pipeline.write_dataset(ds, cfg.data_dir if cfg.data_dir is not None else cfg.out_dir)
    return ds


def run(args) -> int:
    overrides = {"seed": args.seed, "out_dir": args.out_dir}
    cfg = load_config(args.config, **overrides)
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    cmd = args.command
    t0 = time.perf_counter()
    if cmd == "synth":
        try:
            ds = _synth(cfg, args.preset)
        except (LandUseError, ValueError) as exc:
            raise StageError("synth", exc) from exc
        print(f"synth: {len(ds.towers)} towers, {ds.config.n_rows}x{ds.config.n_cols} cells -> {cfg.out_dir}")
    elif cmd == "pipeline":
        report = pipeline.run_pipeline(cfg)
        if report is not None:
            for k, v in report.items():
                print(f"{k} = {v}")
    else:
        stage = {
            "grid": pipeline.stage_grid,
            "train": pipeline.stage_train,
            "cluster": pipeline.stage_cluster,
            "classify": pipeline.stage_classify,
            "evaluate": pipeline.stage_evaluate,
        }[cmd]
        stage(cfg)
    log.info("%s finished in %.2f s", cmd, time.perf_counter() - t0)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc.cause}", file=sys.stderr)
        return exc.exit_code
    except LandUseError as exc:
        # config problems surface before any stage starts
        print(f"error [config]: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", 2)


if __name__ == "__main__":
    sys.exit(main())
