"""Model-based diffusion over control sequences.

Candidates live in normalized control coordinates; every candidate is
clamped, rolled out through the model, and weighted by optimality and
constraint satisfaction. States are never diffused, so every trajectory the
sampler sees is dynamically feasible by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BatchEval, DiffusionTrace, MbdConfig, diffuse, map_batch
from .dynamics import TaskSpec


class NonFiniteStateError(FloatingPointError):
    """A rollout produced a non-finite state."""


@dataclass(frozen=True)
class ConstraintMode:
    kind: str = "HARD"
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in ("HARD", "PENALTY"):
            raise ValueError(f"unknown constraint mode {self.kind!r}")
        if self.kind == "PENALTY" and not self.kappa > 0:
            raise ValueError("PENALTY mode needs kappa > 0")

    def to_dict(self):
        return {"kind": self.kind, "kappa": self.kappa}


HARD = ConstraintMode("HARD")


def penalty(kappa: float) -> ConstraintMode:
    return ConstraintMode("PENALTY", float(kappa))


@dataclass(frozen=True)
class TrajOptConfig(MbdConfig):
    constraint_mode: ConstraintMode = HARD

    def to_dict(self) -> dict:
        return {**super().to_dict(), "constraint_mode": self.constraint_mode.to_dict()}


@dataclass
class Trajectory:
    states: np.ndarray          # (T, n_x), states after each control
    controls: np.ndarray        # (T, n_u), clipped
    stage_costs: np.ndarray     # (T,)
    terminal_cost: float
    constraints: np.ndarray     # (T, n_g); empty when unconstrained
    total_cost: float
    constraint_violation: float


@dataclass
class RolloutBatch:
    states: np.ndarray
    controls: np.ndarray
    stage_costs: np.ndarray
    terminal_costs: np.ndarray
    constraints: np.ndarray
    total_costs: np.ndarray
    violations: np.ndarray
    finite: np.ndarray

    def trajectory(self, k: int) -> Trajectory:
        return Trajectory(self.states[k], self.controls[k], self.stage_costs[k],
                          float(self.terminal_costs[k]), self.constraints[k],
                          float(self.total_costs[k]), float(self.violations[k]))


def rollout_batch(controls: np.ndarray, task: TaskSpec) -> RolloutBatch:
    """Roll out ``(B, T, n_u)`` controls; costs and violations in the same pass."""
    model = task.model
    controls = model.clip_controls(np.asarray(controls, dtype=np.float64))
    states = model.rollout_states(task.x_init, controls)
    finite = np.isfinite(states).all(axis=(1, 2))
    with np.errstate(invalid="ignore", over="ignore"):
        stage = task.stage_cost(states, controls)
        term = task.terminal_cost(states[:, -1, :])
        total = stage.sum(axis=1) + term
        if task.constraint is not None:
            g = task.constraint(states, controls)
            viol = np.maximum(g, 0.0).sum(axis=(1, 2))
        else:
            g = np.zeros(states.shape[:2] + (0,))
            viol = np.zeros(len(states))
    total = np.where(finite, total, np.inf)
    viol = np.where(finite, viol, np.inf)
    return RolloutBatch(states, controls, stage, term, g, total, viol, finite)


def rollout(controls: np.ndarray, task: TaskSpec) -> Trajectory:
    controls = np.asarray(controls, dtype=np.float64)
    if controls.shape != (task.horizon, task.model.n_u):
        raise ValueError(
            f"controls must have shape {(task.horizon, task.model.n_u)}, got {controls.shape}")
    batch = rollout_batch(controls[None], task)
    if not batch.finite[0]:
        raise NonFiniteStateError(f"{task.name}: rollout left the finite range")
    return batch.trajectory(0)


def batch_log_weights(costs, violations, temperature: float,
                      mode: ConstraintMode = HARD) -> np.ndarray:
    costs = np.asarray(costs, dtype=np.float64)
    violations = np.asarray(violations, dtype=np.float64)
    log_w = -costs / temperature
    if mode.kind == "HARD":
        log_w = np.where(violations > 0, -np.inf, log_w)
    else:
        log_w = log_w - mode.kappa * violations
    return np.where(np.isfinite(costs), log_w, -np.inf)


def traj_log_weight(traj: Trajectory, temperature: float,
                    mode: ConstraintMode = HARD) -> float:
    return float(batch_log_weights([traj.total_cost], [traj.constraint_violation],
                                   temperature, mode)[0])


class ControlSpace:
    """Affine map between flat unit-box vectors and ``(T, n_u)`` control sequences."""

    def __init__(self, task: TaskSpec):
        m = task.model
        self.horizon, self.n_u = task.horizon, m.n_u
        self.center = 0.5 * (m.u_high + m.u_low)
        self.half = 0.5 * (m.u_high - m.u_low)
        self.dim = self.horizon * self.n_u

    def to_controls(self, y: np.ndarray) -> np.ndarray:
        y = np.clip(np.atleast_2d(y), -1.0, 1.0).reshape(-1, self.horizon, self.n_u)
        return self.center + self.half * y

    def to_unit(self, controls: np.ndarray) -> np.ndarray:
        u = (np.asarray(controls) - self.center) / self.half
        return u.reshape(-1, self.dim)


def run_mbd_trajopt(task: TaskSpec, config: TrajOptConfig | None = None, demo=None
                    ) -> tuple[Trajectory, DiffusionTrace]:
    """Optimize an open-loop control sequence for ``task``.

    With ``demo`` (a :class:`~mbd.demos.Demonstration`) each candidate is
    weighted by the larger of its model weight and its demonstration weight.
    Returns the best feasible trajectory seen (the final iterate's rollout
    when no candidate was ever feasible) and the trace.
    """
    from .demos import batch_demo_log_weights

    config = config or TrajOptConfig()
    mode = config.constraint_mode
    lam = config.temperature
    space = ControlSpace(task)
    last = {}

    def evaluate(i, cands):
        pts = np.clip(cands, -1.0, 1.0)
        batch = map_batch(lambda y: _rollout_arrays(space.to_controls(y), task),
                          pts, config.workers)
        states, costs, viol = batch
        log_w = batch_log_weights(costs, viol, lam, mode)
        if demo is not None:
            log_w = np.maximum(log_w, batch_demo_log_weights(states, demo, lam, mode))
        last.update(costs=costs, viol=viol, log_w=log_w)
        eligible = np.where(viol > 0, np.inf, costs)
        return BatchEval(pts, log_w, eligible)

    def fallback(i, cands, ev):
        kappa = 10.0 / lam
        log_w = batch_log_weights(last["costs"], last["viol"], lam, penalty(kappa))
        return BatchEval(ev.points, log_w, ev.costs)

    y0, trace = diffuse(space.dim, evaluate, config, on_all_rejected=fallback)
    final = rollout(space.to_controls(y0)[0], task)
    trace.final_cost = final.total_cost
    best = final if final.constraint_violation == 0 else None
    if trace.best_y is not None:
        cand = rollout(space.to_controls(trace.best_y)[0], task)
        if best is None or cand.total_cost < best.total_cost:
            best = cand
    if best is None:
        best = final
    elif best.total_cost < trace.best_cost:
        trace.best_cost = best.total_cost
    trace.best_y = space.to_unit(best.controls)[0]
    trace.meta.update(final=final, final_y_unit=y0)
    trace.fold_final()
    return best, trace


def _rollout_arrays(controls, task):
    b = rollout_batch(controls, task)
    return b.states, b.total_costs, b.violations
