"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
Log events go to standard error, one JSON object per line.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import PipelineConfig
from .errors import (ConfigError, DegenerateInput, DexRetargetError, NonFiniteLoss, NotConverged)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def exit_code(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (NonFiniteLoss, NotConverged)):
        return EXIT_NUMERIC
    if isinstance(exc, (DexRetargetError, DegenerateInput, OSError, ValueError, KeyError)):
        return EXIT_DATA
    raise exc


def _setup_logging(level):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    log = logging.getLogger("dexretarget")
    log.handlers[:] = [handler]
    log.setLevel(level)
    log.propagate = False


def _config(args):
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if getattr(args, "rate", None):
        from dataclasses import replace
        cfg = replace(cfg, rate=args.rate)
    return cfg.with_convention(args.convention)


def cmd_gen_synthetic(args):
    from .evalsuite import Scenario, generate_synthetic_demo

    cfg = _config(args)
    sc = Scenario.from_dict(cfg.scenario) if cfg.scenario else Scenario()
    glove = cfg.load_model("glove")
    sd = generate_synthetic_demo(sc, seed=args.seed, glove=glove)
    sd.write(args.out)
    pipeline.log_event("stage_done", stage="gen-synthetic", out=args.out, seed=args.seed, frames=sd.demo.T)


def cmd_sync(args):
    pipeline.stage_sync(args.bundle, args.out, _config(args))


def _stage_cmd(name):
    def run(args):
        pipeline.STAGE_FUNCS[name](args.work, _config(args))
    return run


def cmd_eval_contact(args):
    report, paths = pipeline.stage_eval(args.work, _config(args), figure=not args.no_figure)
    print(json.dumps({"mean_mm": report.aggregate_mean_mm, **{k: str(v) for k, v in paths.items()}},
                     sort_keys=True))


def cmd_run(args):
    items = list(args.inputs)
    if args.config is None and items and Path(items[0]).suffix in (".toml", ".json"):
        args.config = items.pop(0)
    cfg = _config(args)
    summaries = pipeline.run_pipeline(cfg, items, args.out)
    for s in summaries:
        print(json.dumps(s, sort_keys=True))


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline configuration (TOML or JSON)")
    common.add_argument("--convention", choices=("prose", "verbatim"),
                        help="sign convention of the tactile attenuation logistic")
    common.add_argument("--log-level", default="INFO")

    p = argparse.ArgumentParser(prog="dexretarget", description="Glove-to-robot demonstration pipeline.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-synthetic", parents=[common], help="write a scripted synthetic demonstration bundle")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gen_synthetic)

    s = sub.add_parser("sync", parents=[common], help="resample a bundle onto a uniform timeline")
    s.add_argument("bundle")
    s.add_argument("--out", required=True, help="work directory")
    s.add_argument("--rate", type=float)
    s.set_defaults(func=cmd_sync)

    for name, text in (("retarget", "retarget glove states onto the dex hand"),
                       ("align", "lift hand and object trajectories into the robot base frame"),
                       ("ik", "solve arm joints for the TCP trajectory"),
                       ("package", "write the VLA training dataset")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("work", help="work directory produced by the previous stage")
        s.set_defaults(func=_stage_cmd(name))

    s = sub.add_parser("eval-contact", parents=[common], help="contact-error report (CSV, JSON, PNG)")
    s.add_argument("work")
    s.add_argument("--no-figure", action="store_true")
    s.set_defaults(func=cmd_eval_contact)

    s = sub.add_parser("run", parents=[common], help="all stages for one or more bundles")
    s.add_argument("inputs", nargs="+", metavar="[CONFIG] BUNDLE")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0, help="unused by run; accepted for symmetry")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    _setup_logging(args.log_level.upper())
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        code = exit_code(exc)
        pipeline.log_event("error", command=args.command, kind=type(exc).__name__, message=str(exc),
                           exit_code=code)
        print(f"error: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
