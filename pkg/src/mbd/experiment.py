"""Seeded experiment runs: JSON run configs in, traces and summaries out.

A run config is a flat JSON object::

    {
      "task": "pendulum_swingup",      # see list_tasks()
      "method": "mbd",                 # mbd | cem | mppi
      "seeds": [0, 1, 2, 3, 4, 5, 6, 7],
      "out_dir": "runs/pendulum",
      "n_steps": 100, "beta_start": 1e-4, "beta_end": 1e-2,
      "n_samples": 100, "temperature": 0.1,
      "backward_kind": "MCSA", "index_convention": "EQ7",
      "constraint_mode": "HARD", "kappa": 0.0, "workers": 1,
      "cem": {"elite_mode": "TOPK", "k": null, "smoothing": 0.0, "init_std": 1.0},
      "mppi": {"noise_std": 0.3},
      "demo": {"csv": "demo.csv"}      # or {"rrt": {...}, "sigma": 0.1}
    }

Everything except ``task`` and ``seeds`` is optional. Baselines inherit
``n_steps`` as their iteration count and ``n_samples`` as their batch size,
so all methods spend the same number of evaluations.
"""

from __future__ import annotations

import json
import math
import os
import re
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import CemConfig, MppiConfig, Softmax, TopK, run_cem, run_mppi
from .core import MbdConfig, run_mbd
from .demos import Demonstration, RrtConfig, path_to_demonstration, rrt_plan
from .dynamics import TASKS, TaskSpec
from .objectives import (ackley, mlp_classification_objective, rastrigin,
                         spiral_dataset, synthetic_multimodal_1d)
from .schedule import make_linear_schedule
from .trajopt import ConstraintMode, TrajOptConfig, run_mbd_trajopt

METHODS = ("mbd", "cem", "mppi")


class ExperimentError(Exception):
    """Run failure with a one-line diagnostic; ``code`` names the failure kind."""

    exit_codes = {"TASK_UNKNOWN": 2, "CONFIG_INVALID": 2, "IO_ERROR": 3}

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code

    @property
    def exit_code(self) -> int:
        return self.exit_codes.get(self.code, 1)


def _objective(name: str):
    if name == "synthetic_1d":
        return synthetic_multimodal_1d()
    if name == "mlp_spiral":
        return mlp_classification_objective(*spiral_dataset())
    m = re.fullmatch(r"(ackley|rastrigin)(\d+)", name)
    if m and int(m.group(2)) >= 1:
        return (ackley if m.group(1) == "ackley" else rastrigin)(int(m.group(2)))
    return None


def list_tasks() -> list[str]:
    return sorted(TASKS) + ["ackley<d>", "mlp_spiral", "rastrigin<d>", "synthetic_1d"]


def resolve_task(name: str):
    """Trajectory task or objective problem for ``name``."""
    if name in TASKS:
        return TASKS[name]()
    prob = _objective(name)
    if prob is None:
        raise ExperimentError("TASK_UNKNOWN", f"unknown task {name!r}")
    return prob


@dataclass
class RunConfig:
    task: str
    seeds: list[int]
    method: str = "mbd"
    out_dir: str = "runs"
    n_steps: int = 100
    beta_start: float = 1e-4
    beta_end: float = 1e-2
    n_samples: int = 100
    temperature: float = 0.1
    backward_kind: str = "MCSA"
    index_convention: str = "EQ7"
    constraint_mode: str = "HARD"
    kappa: float = 0.0
    workers: int = 1
    cem: dict = field(default_factory=dict)
    mppi: dict = field(default_factory=dict)
    demo: dict | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(d) - known)
        if extra:
            raise ExperimentError("CONFIG_INVALID", f"unknown keys {extra}")
        for key in ("task", "seeds"):
            if key not in d:
                raise ExperimentError("CONFIG_INVALID", f"missing key {key!r}")
        try:
            cfg = cls(**d)
        except TypeError as exc:
            raise ExperimentError("CONFIG_INVALID", str(exc)) from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ExperimentError("IO_ERROR", f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ExperimentError("CONFIG_INVALID", f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ExperimentError("CONFIG_INVALID", f"{path}: top level must be an object")
        return cls.from_dict(data)

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ExperimentError("CONFIG_INVALID", f"unknown method {self.method!r}")
        if not isinstance(self.seeds, list) or not self.seeds or \
                not all(isinstance(s, int) and s >= 0 for s in self.seeds):
            raise ExperimentError("CONFIG_INVALID", "seeds must be a nonempty list of ints >= 0")
        if self.task not in TASKS and _objective(self.task) is None:
            raise ExperimentError("TASK_UNKNOWN", f"unknown task {self.task!r}")
        try:
            self.mbd_config(self.seeds[0])
            self.baseline_config()
        except ValueError as exc:
            raise ExperimentError("CONFIG_INVALID", str(exc)) from None

    def mbd_config(self, seed: int) -> MbdConfig:
        common = dict(
            schedule=make_linear_schedule(self.beta_start, self.beta_end, self.n_steps),
            n_samples=self.n_samples, temperature=self.temperature, seed=seed,
            backward_kind=self.backward_kind, index_convention=self.index_convention,
            workers=self.workers)
        if self.task in TASKS:
            mode = ConstraintMode(self.constraint_mode, self.kappa)
            return TrajOptConfig(**common, constraint_mode=mode)
        return MbdConfig(**common)

    def baseline_config(self):
        if self.method == "cem":
            c = dict(self.cem)
            kind = c.pop("elite_mode", "TOPK")
            if kind == "SOFTMAX":
                mode = Softmax(c.pop("temperature", self.temperature))
            elif kind == "TOPK":
                mode = TopK(c.pop("k", None), c.pop("smoothing", 0.0))
            else:
                raise ValueError(f"unknown elite_mode {kind!r}")
            return CemConfig(n_iters=self.n_steps, n_samples=self.n_samples,
                             elite_mode=mode, workers=self.workers, **c)
        if self.method == "mppi":
            if self.task not in TASKS:
                raise ValueError("mppi needs a trajectory task")
            return MppiConfig(n_iters=self.n_steps, n_samples=self.n_samples,
                              temperature=self.temperature, workers=self.workers,
                              **self.mppi)
        return None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def build_demo(task: TaskSpec, spec: dict) -> Demonstration:
    if "csv" in spec:
        return Demonstration.from_csv(spec["csv"])
    geo = task.geometry
    cfg = RrtConfig(**spec.get("rrt", {}))
    path = rrt_plan(geo["start"], geo["goal"], geo.get("rectangles", []), cfg)
    return path_to_demonstration(path, task, spec.get("sigma", 0.1))


def run_seed(cfg: RunConfig, seed: int, problem, demo=None) -> dict:
    """One seeded run; returns its summary together with the trace."""
    t0 = time.perf_counter()
    is_task = isinstance(problem, TaskSpec)
    if cfg.method == "mbd":
        if is_task:
            sol, trace = run_mbd_trajopt(problem, cfg.mbd_config(seed), demo=demo)
        else:
            sol, trace = run_mbd(problem, cfg.mbd_config(seed))
    elif cfg.method == "cem":
        sol, trace = run_cem(problem, cfg.baseline_config(), seed)
    else:
        sol, trace = run_mppi(problem, cfg.baseline_config(), seed)
    wall_ms = 1e3 * (time.perf_counter() - t0)
    success = None
    if is_task and problem.success is not None:
        success = bool(problem.success(sol))
    summary = {
        "task": cfg.task, "method": cfg.method, "seed": seed,
        "config": cfg.mbd_config(seed).to_dict() if cfg.method == "mbd" else cfg.to_dict(),
        "final_cost": trace.final_cost, "best_cost": trace.best_cost,
        "success": success, "wall_time_ms": wall_ms,
    }
    return {"summary": summary, "trace": trace, "solution": sol}


def aggregate(summaries: list[dict]) -> dict:
    costs = np.array([s["best_cost"] for s in summaries], dtype=np.float64)
    flags = [s["success"] for s in summaries if s["success"] is not None]
    # a seed with no feasible candidate has best_cost inf; the spread is then undefined
    with np.errstate(invalid="ignore"):
        std = float(costs.std())
    return {
        "task": summaries[0]["task"], "method": summaries[0]["method"],
        "n_seeds": len(summaries),
        "mean_cost": float(costs.mean()),
        "std_cost": std,
        "success_rate": float(np.mean(flags)) if flags else None,
        "mean_wall_time_ms": float(np.mean([s["wall_time_ms"] for s in summaries])),
        "per_seed": [{"seed": s["seed"], "best_cost": s["best_cost"],
                      "success": s["success"]} for s in summaries],
    }


def _dump(obj, path) -> None:
    def fix(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: fix(x) for k, x in v.items()}
        if isinstance(v, list):
            return [fix(x) for x in v]
        return v
    with open(path, "w") as fh:
        json.dump(fix(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(cfg: RunConfig) -> int:
    """Run every seed, write per-seed traces and summaries plus ``aggregate.json``.

    Returns 0 when every seed completed, 1 otherwise. Raises
    :class:`ExperimentError` for configuration and filesystem problems.
    """
    problem = resolve_task(cfg.task)
    demo = None
    if cfg.demo:
        if not isinstance(problem, TaskSpec):
            raise ExperimentError("CONFIG_INVALID", "demonstrations need a trajectory task")
        try:
            demo = build_demo(problem, cfg.demo)
        except OSError as exc:
            raise ExperimentError("IO_ERROR", f"cannot read demonstration: {exc}") from None
    try:
        os.makedirs(cfg.out_dir, exist_ok=True)
    except OSError as exc:
        raise ExperimentError("IO_ERROR", f"cannot create {cfg.out_dir}: {exc.strerror}") from None
    summaries, failed = [], 0
    for seed in cfg.seeds:
        try:
            res = run_seed(cfg, seed, problem, demo)
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            failed += 1
            print(f"seed {seed} failed: {exc}")
            continue
        try:
            res["trace"].to_csv(os.path.join(cfg.out_dir, f"trace_seed{seed}.csv"))
            _dump(res["summary"], os.path.join(cfg.out_dir, f"summary_seed{seed}.json"))
        except OSError as exc:
            raise ExperimentError("IO_ERROR", f"cannot write to {cfg.out_dir}: {exc.strerror}") from None
        summaries.append(res["summary"])
    if summaries:
        _dump(aggregate(summaries), os.path.join(cfg.out_dir, "aggregate.json"))
    return 1 if failed else 0


def downsample_trace(path, max_rows: int = 200) -> list[list[str]]:
    """Header plus at most ``max_rows`` evenly spaced rows (first and last kept)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n").split(",") for ln in fh if ln.strip()]
    head, body = lines[0], lines[1:]
    if len(body) > max_rows:
        keep = np.unique(np.linspace(0, len(body) - 1, max_rows).round().astype(int))
        body = [body[k] for k in keep]
    return [head] + body
