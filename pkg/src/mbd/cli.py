"""Command-line entry point: ``mbd run | list-tasks | demo-gen | plot-data``."""

from __future__ import annotations

import argparse
import csv
import sys

from .experiment import (ExperimentError, RunConfig, downsample_trace, list_tasks,
                         resolve_task, run_experiment)


def _cmd_run(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.seed_override is not None:
        cfg.seeds = [args.seed_override]
    if args.out is not None:
        cfg.out_dir = args.out
    cfg.validate()
    status = run_experiment(cfg)
    print(f"wrote {cfg.out_dir}")
    return status


def _cmd_list(args) -> int:
    for name in list_tasks():
        print(name)
    return 0


def _cmd_demo(args) -> int:
    from .demos import NoPathFoundError, RrtConfig, path_to_demonstration, rrt_plan
    from .dynamics import TaskSpec

    task = resolve_task(args.task)
    if not isinstance(task, TaskSpec) or "rectangles" not in task.geometry:
        raise ExperimentError("CONFIG_INVALID", f"task {args.task!r} has no planar map")
    geo = task.geometry
    cfg = RrtConfig(max_step=args.max_step, max_iters=args.max_iters,
                    goal_bias=args.goal_bias, seed=args.seed, bounds=tuple(geo["workspace"]))
    try:
        path = rrt_plan(geo["start"], geo["goal"], geo["rectangles"], cfg)
    except NoPathFoundError as exc:
        print(f"demo-gen: {exc}", file=sys.stderr)
        return 1
    demo = path_to_demonstration(path, task, args.sigma)
    try:
        demo.to_csv(args.out)
    except OSError as exc:
        raise ExperimentError("IO_ERROR", f"cannot write {args.out}: {exc.strerror}") from None
    print(f"wrote {args.out} ({len(path)} path vertices)")
    return 0


def _cmd_plot(args) -> int:
    try:
        rows = downsample_trace(args.trace, args.max_rows)
    except OSError as exc:
        raise ExperimentError("IO_ERROR", f"cannot read {args.trace}: {exc.strerror}") from None
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        csv.writer(out, lineterminator="\n").writerows(rows)
    finally:
        if args.out:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mbd", description="Model-based diffusion experiments")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a JSON experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed-override", type=int, default=None)
    r.add_argument("--out", default=None, help="output directory (overrides config)")
    r.set_defaults(func=_cmd_run)

    sub.add_parser("list-tasks", help="print task names").set_defaults(func=_cmd_list)

    d = sub.add_parser("demo-gen", help="plan an RRT path and save it as a demonstration")
    d.add_argument("--task", default="car2d_umaze")
    d.add_argument("--out", required=True)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--sigma", type=float, default=0.1)
    d.add_argument("--max-step", type=float, default=0.2)
    d.add_argument("--max-iters", type=int, default=1000)
    d.add_argument("--goal-bias", type=float, default=0.05)
    d.set_defaults(func=_cmd_demo)

    q = sub.add_parser("plot-data", help="downsample a trace CSV for plotting")
    q.add_argument("--trace", required=True)
    q.add_argument("--max-rows", type=int, default=200)
    q.add_argument("--out", default=None)
    q.set_defaults(func=_cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExperimentError as exc:
        print(f"mbd: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
