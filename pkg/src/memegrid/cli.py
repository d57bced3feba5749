"""Command-line surface: run / sweep / resume / replay / bench."""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .checkpoint import CheckpointError
from .config import ConfigError, GridConfig, load_config


def _parse_dims(text):
    try:
        r, c = text.lower().split("x")
        return int(r), int(c)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"dims must look like 32x32, got {text!r}"
        ) from None


def _parse_floats(text):
    return [float(t) for t in text.split(",") if t != ""]


def _parse_ints(text):
    return [int(t) for t in text.split(",") if t != ""]


def _build_run_config(args) -> GridConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = GridConfig(**harness.PROFILES[args.profile])
    if args.preset:
        cfg = harness.apply_preset(cfg, args.preset)
    if args.dims:
        cfg = cfg.replace(rows=args.dims[0], cols=args.dims[1])
    if args.steps is not None:
        cfg = cfg.replace(steps=args.steps)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="memegrid",
        description="Deterministic grid simulator of memetic evolution in "
                    "populations of recurrent neural agents.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one simulation")
    p_run.add_argument("--preset", default="baseline",
                       help=f"ablation preset ({', '.join(sorted(harness.PRESETS))})")
    p_run.add_argument("--profile", default="ci", choices=sorted(harness.PROFILES),
                       help="scale profile used when no --config is given")
    p_run.add_argument("--config", help="JSON config file (overrides profile)")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--steps", type=int)
    p_run.add_argument("--dims", type=_parse_dims, metavar="RxC")
    p_run.add_argument("--out", default="memegrid_out")
    p_run.add_argument("--backend", choices=["auto", "cython", "python"])
    p_run.add_argument("--no-log", action="store_true",
                       help="skip writing message_log.npy")
    p_run.add_argument("--no-checkpoint", action="store_true")
    p_run.add_argument("--checkpoint-every", type=int, default=0, metavar="N")
    p_run.add_argument("--progress", type=int, default=0, metavar="N",
                       help="print a status line every N steps")

    p_sweep = sub.add_parser("sweep", help="gamma_s x gamma_f x seed sweep")
    p_sweep.add_argument("--gamma-s", type=_parse_floats, required=True)
    p_sweep.add_argument("--gamma-f", type=_parse_floats, required=True)
    p_sweep.add_argument("--seeds", type=_parse_ints, required=True)
    p_sweep.add_argument("--dims", type=_parse_dims, default=(16, 16), metavar="RxC")
    p_sweep.add_argument("--steps", type=int, default=1000)
    p_sweep.add_argument("--out", default="memegrid_sweep")
    p_sweep.add_argument("--backend", choices=["auto", "cython", "python"])
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="sweep cells run in this many processes")
    p_sweep.add_argument("--progress", action="store_true")

    p_res = sub.add_parser("resume", help="continue from a checkpoint")
    p_res.add_argument("--checkpoint", required=True)
    p_res.add_argument("--steps", type=int, help="extend the horizon to N steps")
    p_res.add_argument("--out", default="memegrid_out")
    p_res.add_argument("--backend", choices=["auto", "cython", "python"])
    p_res.add_argument("--no-log", action="store_true")
    p_res.add_argument("--no-checkpoint", action="store_true")
    p_res.add_argument("--progress", type=int, default=0, metavar="N")

    p_rep = sub.add_parser("replay", help="recompute census from a message log")
    p_rep.add_argument("--log", required=True)
    p_rep.add_argument("--out", default="memegrid_replay")

    p_bench = sub.add_parser("bench", help="compare available backends")
    p_bench.add_argument("--dims", type=_parse_dims, default=(16, 16), metavar="RxC")
    p_bench.add_argument("--steps", type=int, default=100)
    p_bench.add_argument("--task", action="store_true",
                         help="include surrogate rollouts")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = _build_run_config(args)
            result = harness.run(
                cfg, args.out, backend=args.backend,
                log_messages=not args.no_log,
                write_checkpoint=not args.no_checkpoint,
                checkpoint_every=args.checkpoint_every,
                progress=args.progress or None,
            )
            print(json.dumps(result, indent=2, sort_keys=True))
        elif args.command == "sweep":
            rows = harness.sweep(
                args.gamma_s, args.gamma_f, args.seeds, args.out,
                rows=args.dims[0], cols=args.dims[1], steps=args.steps,
                backend=args.backend, jobs=args.jobs, progress=args.progress,
            )
            print(f"wrote {len(rows)} sweep rows to {args.out}/sweep.csv")
        elif args.command == "resume":
            result = harness.resume(
                args.checkpoint, args.out, steps=args.steps,
                backend=args.backend, log_messages=not args.no_log,
                write_checkpoint=not args.no_checkpoint,
                progress=args.progress or None,
            )
            print(json.dumps(result, indent=2, sort_keys=True))
        elif args.command == "replay":
            result = harness.replay(args.log, args.out)
            print(json.dumps(result, indent=2, sort_keys=True))
        elif args.command == "bench":
            from .benchmark import run_benchmark
            run_benchmark(args.dims, args.steps, task=args.task)
    except (ConfigError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
