"""Cross-entropy method and MPPI on the same problem interfaces as MBD.

Both baselines draw their noise from the same addressed streams as the
diffusion sampler (iteration ``k`` uses the candidate stream of step ``k``),
so a one-iteration softmax CEM started from MBD's ``N = 1`` sampling
distribution reproduces MBD exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .core import DiffusionTrace, StepRecord, map_batch, weighted_mean
from .dynamics import TaskSpec
from .objectives import ObjectiveProblem
from .trajopt import ControlSpace, rollout, rollout_batch


@dataclass(frozen=True)
class Softmax:
    temperature: float = 0.1

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True)
class TopK:
    k: int | None = None        # None -> n_samples // 10
    smoothing: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError("smoothing must be in [0, 1)")


@dataclass(frozen=True)
class CemConfig:
    n_iters: int = 100
    n_samples: int = 100
    elite_mode: Softmax | TopK = TopK()
    init_std: float = 1.0
    init_mean: np.ndarray | None = None   # unit-box coordinates; zeros by default
    min_std: float = 1e-6
    penalty: float = 10.0                 # cost per unit constraint violation (tasks)
    workers: int = 1

    def __post_init__(self):
        if self.n_iters < 1 or self.n_samples < 1:
            raise ValueError("n_iters and n_samples must be >= 1")
        if not self.init_std > 0:
            raise ValueError("init_std must be positive")
        if isinstance(self.elite_mode, TopK) and self.elite_mode.k is not None \
                and not 1 <= self.elite_mode.k <= self.n_samples:
            raise ValueError("TOPK needs 1 <= k <= n_samples")


@dataclass(frozen=True)
class MppiConfig:
    n_iters: int = 100
    n_samples: int = 100
    temperature: float = 0.1
    noise_std: float = 0.3
    penalty: float = 10.0
    workers: int = 1

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


class _Problem:
    """Unit-box view of either an objective or a trajectory task."""

    def __init__(self, problem, penalty: float, workers: int):
        self.problem = problem
        self.workers = workers
        self.penalty = penalty
        if isinstance(problem, TaskSpec):
            self.space = ControlSpace(problem)
            self.dim = self.space.dim
        else:
            self.space = None
            self.dim = problem.dim

    def costs(self, pts: np.ndarray) -> np.ndarray:
        """Ranking cost of clamped unit points: ``J`` (+ penalty * violation for tasks)."""
        if self.space is None:
            return map_batch(self.problem.cost_unit, pts, self.workers)

        def one(y):
            b = rollout_batch(self.space.to_controls(y), self.problem)
            return b.total_costs + self.penalty * b.violations
        return map_batch(one, pts, self.workers)

    def finish(self, y_unit: np.ndarray, trace: DiffusionTrace):
        y_unit = np.clip(y_unit, -1.0, 1.0)
        if self.space is None:
            trace.final_cost = float(self.problem.cost_unit(y_unit[None])[0])
            if trace.final_cost < trace.best_cost:
                trace.best_cost, trace.best_y = trace.final_cost, y_unit.copy()
            trace.best_y = self.problem.to_box(trace.best_y)
            trace.fold_final()
            return self.problem.to_box(y_unit), trace
        final = rollout(self.space.to_controls(y_unit)[0], self.problem)
        trace.final_cost = final.total_cost
        best = final
        if trace.best_y is not None:
            cand = rollout(self.space.to_controls(trace.best_y)[0], self.problem)
            if _rank(cand, self.penalty) < _rank(final, self.penalty):
                best = cand
        # ranking cost, so the trace's j_min column and best_cost agree
        trace.best_cost = _rank(best, self.penalty)
        trace.best_y = self.space.to_unit(best.controls)[0]
        trace.meta["final"] = final
        trace.fold_final()
        return best, trace


def _rank(traj, penalty):
    return traj.total_cost + penalty * traj.constraint_violation


def _record(trace, k, y, y_new, costs, ess, pts):
    j = int(np.argmin(costs))
    if costs[j] < trace.best_cost:
        trace.best_cost = float(costs[j])
        trace.best_y = pts[j].copy()
    finite = costs[np.isfinite(costs)]
    trace.records.append(StepRecord(k, y.copy(), y_new, trace.best_cost,
                                    float(finite.mean()) if finite.size else math.inf,
                                    float(ess)))


def run_cem(problem: ObjectiveProblem | TaskSpec, cfg: CemConfig = CemConfig(),
            seed: int = 0):
    """Cross-entropy method with a diagonal Gaussian in unit-box coordinates.

    ``Softmax`` mode keeps the standard deviation fixed and moves the mean to
    the ``exp(-J / temperature)``-weighted batch mean. ``TopK`` mode refits
    mean and per-coordinate std to the ``k`` best samples, blended with the
    previous values by ``smoothing``. Returns ``(solution, trace)`` like the
    MBD front ends.
    """
    prob = _Problem(problem, cfg.penalty, cfg.workers)
    mean = np.zeros(prob.dim) if cfg.init_mean is None else \
        np.asarray(cfg.init_mean, dtype=np.float64).copy()
    std = cfg.init_std
    trace = DiffusionTrace(meta={"method": "cem"})
    mode = cfg.elite_mode
    for k in range(1, cfg.n_iters + 1):
        z = rng.stream(seed, rng.CANDIDATES, k).standard_normal((cfg.n_samples, prob.dim))
        pts = np.clip(mean + std * z, -1.0, 1.0)
        costs = np.asarray(prob.costs(pts), dtype=np.float64)
        if isinstance(mode, Softmax):
            new_mean, ess = weighted_mean(pts, -costs / mode.temperature)
        else:
            n_elite = mode.k or max(1, cfg.n_samples // 10)
            elite = pts[np.argsort(costs, kind="stable")[:n_elite]]
            s = mode.smoothing
            new_mean = s * mean + (1.0 - s) * elite.mean(axis=0)
            std = np.maximum(s * std + (1.0 - s) * elite.std(axis=0), cfg.min_std)
            ess = float(n_elite)
        _record(trace, k, mean, new_mean, costs, ess, pts)
        mean = new_mean
    return prob.finish(mean, trace)


def run_mppi(task: TaskSpec, cfg: MppiConfig = MppiConfig(), seed: int = 0):
    """Open-loop iterated MPPI on the control sequence of ``task``."""
    if not isinstance(task, TaskSpec):
        raise TypeError("MPPI needs a trajectory task")
    prob = _Problem(task, cfg.penalty, cfg.workers)
    nominal = np.zeros(prob.dim)
    trace = DiffusionTrace(meta={"method": "mppi"})
    for k in range(1, cfg.n_iters + 1):
        eps = rng.stream(seed, rng.CANDIDATES, k).standard_normal((cfg.n_samples, prob.dim))
        pts = np.clip(nominal + cfg.noise_std * eps, -1.0, 1.0)
        costs = np.asarray(prob.costs(pts), dtype=np.float64)
        new_nominal, ess = weighted_mean(pts, -costs / cfg.temperature)
        _record(trace, k, nominal, new_nominal, costs, ess, pts)
        nominal = new_nominal
    return prob.finish(nominal, trace)


def matched_budget(n_steps: int, n_samples: int) -> dict:
    """Iteration and sample counts giving a baseline MBD's evaluation budget."""
    return {"n_iters": int(n_steps), "n_samples": int(n_samples)}
