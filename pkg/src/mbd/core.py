"""Generic model-based diffusion optimizer.

The backward process never learns a score: at every step a batch of
candidates is drawn around the rescaled iterate, weighted by the known
target density ``exp(-J / temperature)``, and the weighted mean of that batch
gives a Monte Carlo estimate of the score of the smoothed density.
"""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels, rng
from .schedule import (VARIANCE_FLOOR, IndexConvention, NoiseSchedule,
                       make_linear_schedule, sampling_params)


class BackwardKind(str, enum.Enum):
    MCSA = "MCSA"
    REVERSE_SDE = "REVERSE_SDE"


class AllRejectedError(RuntimeError):
    """Every candidate in a batch has zero weight."""


@dataclass
class Candidate:
    y: np.ndarray
    log_weight: float

    def __post_init__(self):
        if math.isnan(self.log_weight):
            raise ValueError("candidate log weight is NaN")


@dataclass
class StepRecord:
    step: int
    y: np.ndarray
    y_bar: np.ndarray
    j_min: float
    j_mean_batch: float
    ess: float


@dataclass
class DiffusionTrace:
    """Per-step diagnostics plus the best point seen during a run."""

    records: list[StepRecord] = field(default_factory=list)
    best_y: np.ndarray | None = None
    best_cost: float = math.inf
    final_cost: float = math.nan
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def fold_final(self) -> None:
        """Let the last record's ``j_min`` account for the final iterate."""
        if self.records and self.best_cost < self.records[-1].j_min:
            self.records[-1].j_min = self.best_cost

    def rows(self):
        for r in self.records:
            yield (r.step, r.j_min, r.j_mean_batch, r.ess, float(np.linalg.norm(r.y)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "j_min", "j_mean_batch", "ess", "y_norm"])
            for row in self.rows():
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


@dataclass(frozen=True)
class MbdConfig:
    schedule: NoiseSchedule = field(default_factory=make_linear_schedule)
    n_samples: int = 100
    temperature: float = 0.1
    seed: int = 0
    backward_kind: BackwardKind = BackwardKind.MCSA
    index_convention: IndexConvention = IndexConvention.EQ7
    workers: int = 1

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        object.__setattr__(self, "backward_kind", BackwardKind(self.backward_kind))
        object.__setattr__(self, "index_convention",
                           IndexConvention(self.index_convention))

    def to_dict(self) -> dict:
        return {
            **self.schedule.to_dict(),
            "index_convention": self.index_convention.value,
            "n_samples": self.n_samples,
            "temperature": self.temperature,
            "seed": self.seed,
            "backward_kind": self.backward_kind.value,
        }


def sample_candidates(y_i: np.ndarray, schedule: NoiseSchedule, i: int, n: int,
                      gen: np.random.Generator,
                      index_convention=IndexConvention.EQ7) -> np.ndarray:
    """Draw ``n`` candidates from ``Normal(y_i * scale, variance * I)``."""
    y_i = np.asarray(y_i, dtype=np.float64)
    scale, var = sampling_params(schedule, i, index_convention)
    z = gen.standard_normal((n, y_i.size))
    return y_i * scale + math.sqrt(max(var, VARIANCE_FLOOR)) * z


def weighted_mean(candidates, log_weights=None) -> tuple[np.ndarray, float]:
    """Softmax-weighted mean of candidates and the batch's effective sample size.

    Accepts either a sequence of :class:`Candidate` or an ``(n, d)`` array
    together with ``log_weights``. Raises :class:`AllRejectedError` when no
    candidate has a finite weight.
    """
    if log_weights is None:
        ys = np.array([c.y for c in candidates], dtype=np.float64)
        log_w = np.array([c.log_weight for c in candidates], dtype=np.float64)
    else:
        ys = np.asarray(candidates, dtype=np.float64)
        log_w = np.asarray(log_weights, dtype=np.float64)
    if ys.ndim == 1:
        ys = ys[:, None]
    if np.isnan(log_w).any():
        raise ValueError("NaN log weight")
    top = np.max(log_w)
    if top == np.inf:
        raise ValueError("log weight of +inf")
    if top == -np.inf:
        raise AllRejectedError("all candidates rejected")
    return kernels.weighted_mean(np.ascontiguousarray(ys), np.ascontiguousarray(log_w))


def estimate_score(y_i, y_bar, schedule: NoiseSchedule, i: int) -> np.ndarray:
    abar = schedule.alpha_bar(i)
    return (-np.asarray(y_i) + math.sqrt(abar) * np.asarray(y_bar)) / (1.0 - abar)


def mcsa_step(y_i, score, schedule: NoiseSchedule, i: int) -> np.ndarray:
    return (np.asarray(y_i) + (1.0 - schedule.alpha_bar(i)) * np.asarray(score)) \
        / math.sqrt(schedule.alpha(i))


def reverse_sde_step(y_i, score, schedule: NoiseSchedule, i: int,
                     gen: np.random.Generator | None) -> np.ndarray:
    """Ancestral reverse-SDE update; ``gen=None`` forces the noise to zero."""
    y_i = np.asarray(y_i, dtype=np.float64)
    a = schedule.alpha(i)
    drift = (y_i + 0.5 * (1.0 - a) * np.asarray(score)) / math.sqrt(a)
    if gen is None:
        return drift
    return drift + math.sqrt(1.0 - a) * gen.standard_normal(y_i.shape)


def map_batch(fn: Callable[[np.ndarray], np.ndarray], batch: np.ndarray,
              workers: int = 1):
    """Apply a batch function in contiguous chunks, preserving row order."""
    if workers <= 1 or len(batch) < 2:
        return fn(batch)
    chunks = np.array_split(batch, min(workers, len(batch)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(fn, chunks))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(p) for p in zip(*parts))
    return np.concatenate(parts)


@dataclass
class BatchEval:
    """What one weighting pass returns to the diffusion driver."""

    points: np.ndarray      # rows entering the weighted mean
    log_w: np.ndarray
    costs: np.ndarray       # cost used for best-so-far tracking (inf = ineligible)


def diffuse(dim: int, evaluate: Callable[[int, np.ndarray], BatchEval],
            config: MbdConfig, on_all_rejected=None) -> tuple[np.ndarray, DiffusionTrace]:
    """Shared backward loop used by the black-box and trajectory front ends.

    ``evaluate(step, candidates)`` scores one batch. ``on_all_rejected`` may
    return a replacement ``BatchEval`` when every weight is ``-inf``.
    Returns the final iterate ``Y^0`` and the trace; ``trace.best_y`` holds
    the best-scoring evaluated row.
    """
    sched = config.schedule
    y = rng.normal_batch(config.seed, rng.INIT, 0, 1, dim)[0]
    trace = DiffusionTrace()
    for i in range(sched.n_steps, 0, -1):
        cands = sample_candidates(y, sched, i, config.n_samples,
                                  rng.stream(config.seed, rng.CANDIDATES, i),
                                  config.index_convention)
        ev = evaluate(i, cands)
        try:
            y_bar, ess = weighted_mean(ev.points, ev.log_w)
        except AllRejectedError:
            if on_all_rejected is None:
                raise
            ev = on_all_rejected(i, cands, ev)
            y_bar, ess = weighted_mean(ev.points, ev.log_w)
        k = int(np.argmin(ev.costs))
        if ev.costs[k] < trace.best_cost:
            trace.best_cost = float(ev.costs[k])
            trace.best_y = ev.points[k].copy()
        finite = ev.costs[np.isfinite(ev.costs)]
        trace.records.append(StepRecord(
            step=i, y=y.copy(), y_bar=y_bar, j_min=trace.best_cost,
            j_mean_batch=float(finite.mean()) if finite.size else math.inf,
            ess=float(ess)))
        score = estimate_score(y, y_bar, sched, i)
        if config.backward_kind is BackwardKind.MCSA:
            y = mcsa_step(y, score, sched, i)
        else:
            y = reverse_sde_step(y, score, sched, i,
                                 rng.stream(config.seed, rng.SDE_NOISE, i))
    return y, trace


def run_mbd(objective, config: MbdConfig | None = None,
            log_weight_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
            ) -> tuple[np.ndarray, DiffusionTrace]:
    """Minimize a box-bounded :class:`~mbd.objectives.ObjectiveProblem`.

    The sampler works in the unit box ``[-1, 1]^d``; candidates are clamped
    before evaluation. ``log_weight_fn(points_box, costs)`` overrides the
    default ``-J / temperature`` weighting (used for demonstration mixing).
    Returns the final iterate in problem coordinates and the trace, whose
    ``best_y``/``best_cost`` cover every evaluated candidate and the final
    iterate.
    """
    config = config or MbdConfig()
    lam = config.temperature

    def evaluate(i, cands):
        pts = np.clip(cands, -1.0, 1.0)
        costs = map_batch(lambda u: objective.cost_unit(u), pts, config.workers)
        costs = np.asarray(costs, dtype=np.float64)
        if log_weight_fn is None:
            log_w = -costs / lam
        else:
            log_w = np.asarray(log_weight_fn(objective.to_box(pts), costs), dtype=np.float64)
        return BatchEval(pts, log_w, costs)

    y0, trace = diffuse(objective.dim, evaluate, config)
    u_final = np.clip(y0, -1.0, 1.0)
    solution = objective.to_box(u_final)
    final_cost = float(objective.cost_unit(u_final[None, :])[0])
    trace.final_cost = final_cost
    if final_cost < trace.best_cost:
        trace.best_cost = final_cost
        trace.best_y = u_final.copy()
    if trace.best_y is not None:
        trace.best_y = objective.to_box(trace.best_y)
    trace.meta.update(final_y_unit=y0)
    trace.fold_final()
    return solution, trace
