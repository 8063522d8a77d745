"""Built-in discrete-time dynamics and trajectory tasks.

Stage costs, terminal costs and constraints are vectorized over a batch of
rollouts: ``stage_cost(states, controls)`` takes ``(B, T, n_x)`` and
``(B, T, n_u)`` arrays and returns ``(B, T)``; state ``t`` is the state
reached after applying control ``t``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels_py as kpy
from . import kernels


class Integrator(str, enum.Enum):
    EULER = "EULER"
    RK4 = "RK4"

    @property
    def code(self) -> int:
        return kpy.EULER if self is Integrator.EULER else kpy.RK4


@dataclass(frozen=True)
class DynamicsModel:
    """Continuous-time model discretized with a fixed-step integrator.

    Built-in models set ``model_id`` and run through :mod:`mbd.kernels`;
    custom models supply a batched ``deriv(x, u, params)`` and optionally an
    in-place ``clamp(x, params)`` applied after each step.
    """

    name: str
    n_x: int
    n_u: int
    u_low: np.ndarray
    u_high: np.ndarray
    dt: float
    integrator: Integrator = Integrator.RK4
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))
    model_id: int | None = None
    deriv: Callable | None = None
    clamp: Callable | None = None

    def clip_controls(self, controls: np.ndarray) -> np.ndarray:
        return np.clip(controls, self.u_low, self.u_high)

    def rollout_states(self, x0: np.ndarray, controls: np.ndarray,
                       integrator: Integrator | None = None,
                       dt: float | None = None) -> np.ndarray:
        """States ``(B, T, n_x)`` reached by clipped controls ``(B, T, n_u)``."""
        controls = np.ascontiguousarray(self.clip_controls(controls), dtype=np.float64)
        integ = Integrator(integrator or self.integrator)
        dt = self.dt if dt is None else dt
        x0 = np.ascontiguousarray(x0, dtype=np.float64)
        if self.model_id is not None:
            return kernels.rollout_batch(self.model_id, self.params, x0, controls,
                                         float(dt), integ.code)
        return kpy.integrate(self.deriv, self.clamp, x0, controls, dt, integ.code,
                             self.params)

    def step(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        u = np.asarray(u, dtype=np.float64).reshape(1, 1, self.n_u)
        return self.rollout_states(x, u)[0, 0]


@dataclass(frozen=True)
class TaskSpec:
    name: str
    model: DynamicsModel
    horizon: int
    x_init: np.ndarray
    stage_cost: Callable[[np.ndarray, np.ndarray], np.ndarray]
    terminal_cost: Callable[[np.ndarray], np.ndarray]
    constraint: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    success: Callable | None = None
    geometry: dict = field(default_factory=dict)
    state_scale: np.ndarray | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


def _wrap(angle):
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


# --------------------------------------------------------------------------

DI_GOAL = np.array([1.0, 1.0])


def double_integrator_2d(horizon: int = 50, dt: float = 0.1) -> TaskSpec:
    model = DynamicsModel("double_integrator_2d", 4, 2, -np.ones(2), np.ones(2), dt,
                          Integrator.EULER, model_id=kpy.DOUBLE_INTEGRATOR)

    def stage(x, u):
        return np.sum((x[..., :2] - DI_GOAL) ** 2, axis=-1) + 0.01 * np.sum(u * u, axis=-1)

    def terminal(x):
        return 10.0 * np.sum((x[..., :2] - DI_GOAL) ** 2, axis=-1)

    def success(traj):
        return bool(np.linalg.norm(traj.states[-1, :2] - DI_GOAL) < 0.1)

    return TaskSpec("double_integrator_2d", model, horizon, np.zeros(4), stage,
                    terminal, success=success, geometry={"goal": DI_GOAL.tolist()})


def pendulum_swingup(horizon: int = 60, dt: float = 0.05) -> TaskSpec:
    """Torque-limited pendulum starting at rest hanging down.

    Angle is measured from upright; ``|u| <= 2`` is well below ``m g l``.
    """
    g, length, mass = 9.81, 1.0, 1.0
    model = DynamicsModel("pendulum", 2, 1, np.array([-2.0]), np.array([2.0]), dt,
                          Integrator.RK4, np.array([g, length, mass]), kpy.PENDULUM)

    def stage(x, u):
        return _wrap(x[..., 0]) ** 2 + 0.1 * x[..., 1] ** 2 + 0.001 * u[..., 0] ** 2

    def terminal(x):
        return _wrap(x[..., 0]) ** 2 + 0.1 * x[..., 1] ** 2

    def success(traj):
        return bool(abs(_wrap(traj.states[-1, 0])) < 0.3)

    return TaskSpec("pendulum_swingup", model, horizon, np.array([math.pi, 0.0]),
                    stage, terminal, success=success)


def cartpole_swingup(horizon: int = 60, dt: float = 0.04) -> TaskSpec:
    """Cart-pole, state ``(x, theta, x_dot, theta_dot)`` with theta from upright."""
    params = np.array([9.81, 1.0, 0.1, 0.5])
    model = DynamicsModel("cartpole", 4, 1, np.array([-10.0]), np.array([10.0]), dt,
                          Integrator.RK4, params, kpy.CARTPOLE)

    def stage(x, u):
        return (_wrap(x[..., 1]) ** 2 + 0.1 * x[..., 0] ** 2
                + 0.01 * x[..., 3] ** 2 + 0.001 * u[..., 0] ** 2)

    def terminal(x):
        return _wrap(x[..., 1]) ** 2 + 0.1 * x[..., 0] ** 2

    def success(traj):
        return bool(abs(_wrap(traj.states[-1, 1])) < 0.3)

    return TaskSpec("cartpole_swingup", model, horizon,
                    np.array([0.0, math.pi, 0.0, 0.0]), stage, terminal,
                    success=success)


# --------------------------------------------------------------------------
# Car2D U-maze

def u_rectangles(center=(2.0, 2.0), width=2.0, height=2.0, thickness=0.4):
    """Three boxes ``(xmin, ymin, xmax, ymax)`` forming a U that opens downward."""
    cx, cy = center
    x0, x1 = cx - width / 2, cx + width / 2
    y0, y1 = cy - height / 2, cy + height / 2
    return (
        (x0, y0, x0 + thickness, y1),        # left arm
        (x1 - thickness, y0, x1, y1),        # right arm
        (x0, y1 - thickness, x1, y1),        # top bar
    )


def rect_depth(px, py, rects) -> np.ndarray:
    """Signed penetration into the union of boxes: positive inside, minus distance outside."""
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    best = np.full(np.broadcast(px, py).shape, -np.inf)
    for xmin, ymin, xmax, ymax in rects:
        inside = np.minimum.reduce([px - xmin, xmax - px, py - ymin, ymax - py])
        dx = np.maximum.reduce([xmin - px, np.zeros_like(px), px - xmax])
        dy = np.maximum.reduce([ymin - py, np.zeros_like(py), py - ymax])
        outside = -np.hypot(dx, dy)
        best = np.maximum(best, np.where(inside > 0, inside, outside))
    return best


def workspace_depth(px, py, bounds):
    """Distance outside the rectangular workspace (negative when well inside)."""
    xmin, ymin, xmax, ymax = bounds
    return np.maximum.reduce([xmin - px, px - xmax, ymin - py, py - ymax])


CAR_START = (0.5, 0.5)
CAR_GOAL = (3.5, 0.5)
CAR_WORKSPACE = (0.0, 0.0, 4.0, 4.0)
# arms reach the floor, so the straight start-goal segment is blocked and the
# only way round is over the top bar
CAR_U_CENTER = (2.0, 1.0)


def car2d_umaze(horizon: int = 50, dt: float = 0.1, start=CAR_START, goal=CAR_GOAL,
                u_center=CAR_U_CENTER) -> TaskSpec:
    """Kinematic bicycle that must drive around a U-shaped obstacle.

    State ``(px, py, heading, v, steer)``, control ``(accel, steer_rate)``.
    ``state_scale`` holds the range of each state entry and is the unit in
    which demonstration noise is expressed.
    """
    wheelbase, v_max, steer_max = 0.3, 2.0, 0.6
    model = DynamicsModel("car2d", 5, 2, np.array([-1.0, -2.0]), np.array([1.0, 2.0]),
                          dt, Integrator.RK4, np.array([wheelbase, v_max, steer_max]),
                          kpy.CAR2D)
    rects = u_rectangles(u_center)
    goal_arr = np.asarray(goal, dtype=np.float64)

    def dist(x):
        return np.sqrt(np.sum((x[..., :2] - goal_arr) ** 2, axis=-1))

    def stage(x, u):
        return dist(x) + 0.05 * np.sum(u * u, axis=-1)

    def terminal(x):
        return 10.0 * dist(x)

    def constraint(x, u):
        px, py = x[..., 0], x[..., 1]
        return np.stack([rect_depth(px, py, rects),
                         workspace_depth(px, py, CAR_WORKSPACE)], axis=-1)

    def success(traj):
        return bool(traj.constraint_violation == 0 and dist(traj.states[-1]) < 0.3)

    x_init = np.array([start[0], start[1], 0.0, 0.0, 0.0])
    geometry = {"rectangles": [list(r) for r in rects], "workspace": list(CAR_WORKSPACE),
                "start": list(start), "goal": list(goal)}
    scale = np.array([4.0, 4.0, 2.0 * math.pi, 2.0 * v_max, 2.0 * steer_max])
    return TaskSpec("car2d_umaze", model, horizon, x_init, stage, terminal, constraint,
                    success, geometry, scale)


TASKS = {
    "double_integrator_2d": double_integrator_2d,
    "pendulum_swingup": pendulum_swingup,
    "cartpole_swingup": cartpole_swingup,
    "car2d_umaze": car2d_umaze,
}
