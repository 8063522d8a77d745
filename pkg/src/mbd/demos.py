"""Demonstration-guided weighting and an RRT demonstration generator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .dynamics import TaskSpec, rect_depth
from .trajopt import HARD, ConstraintMode, Trajectory, batch_log_weights, traj_log_weight


class NoPathFoundError(RuntimeError):
    pass


@dataclass(frozen=True)
class Demonstration:
    """Reference states with an observation mask.

    ``values`` and ``mask`` are ``(T, n_x)``; unobserved entries never enter a
    likelihood. ``sigma`` is the observation noise in normalized state units:
    residuals are divided by ``scale`` (one entry per state, ones by default)
    before the Gaussian is applied.
    """

    values: np.ndarray
    mask: np.ndarray
    sigma: float
    demo_cost: float
    demo_violation: float = 0.0
    scale: np.ndarray | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if values.shape != mask.shape:
            raise ValueError("values and mask must share a shape")
        scale = np.ones(values.shape[1]) if self.scale is None else \
            np.asarray(self.scale, dtype=np.float64)
        if scale.shape != (values.shape[1],) or not np.all(scale > 0):
            raise ValueError("scale needs one positive entry per state")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "scale", scale)

    def offset(self, temperature: float, mode: ConstraintMode = HARD) -> float:
        """Constant part of the demonstration weight: its own cost and feasibility."""
        base = -self.demo_cost / temperature
        if self.demo_violation > 0:
            return -math.inf if mode.kind == "HARD" else base - mode.kappa * self.demo_violation
        return base

    def to_csv(self, path) -> None:
        n_x = self.values.shape[1]
        with open(path, "w", newline="") as fh:
            fh.write(f"# sigma={self.sigma!r};demo_cost={self.demo_cost!r};"
                     f"demo_violation={self.demo_violation!r};"
                     f"scale={' '.join(repr(float(v)) for v in self.scale)}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"x{j}" for j in range(n_x)] + [f"m{j}" for j in range(n_x)])
            for t, (row, m) in enumerate(zip(self.values, self.mask)):
                w.writerow([t] + [repr(float(v)) for v in row] + [int(b) for b in m])

    @classmethod
    def from_csv(cls, path) -> "Demonstration":
        with open(path, newline="") as fh:
            head = fh.readline()
            if not head.startswith("#"):
                raise ValueError(f"{path}: missing demonstration metadata line")
            meta = dict(kv.split("=", 1) for kv in head[1:].strip().split(";"))
            rows = list(csv.reader(fh))
        n_x = (len(rows[0]) - 1) // 2
        body = np.array([[float(v) for v in r] for r in rows[1:]])
        scale = [float(v) for v in meta["scale"].split()] if "scale" in meta else None
        return cls(body[:, 1:1 + n_x], body[:, 1 + n_x:] > 0.5, float(meta["sigma"]),
                   float(meta["demo_cost"]), float(meta["demo_violation"]), scale)


def batch_demo_log_weights(states: np.ndarray, demo: Demonstration, temperature: float,
                           mode: ConstraintMode = HARD) -> np.ndarray:
    """Demonstration weight for ``(B, T, n_x)`` rollouts."""
    resid = np.where(demo.mask, (states - demo.values) / demo.scale, 0.0)
    fit = -np.sum(resid * resid, axis=(1, 2)) / (2.0 * demo.sigma ** 2)
    return fit + demo.offset(temperature, mode)


def demo_log_weight(traj: Trajectory, demo: Demonstration, temperature: float,
                    mode: ConstraintMode = HARD) -> float:
    if traj.states.shape != demo.values.shape:
        raise ValueError("trajectory and demonstration shapes differ")
    return float(batch_demo_log_weights(traj.states[None], demo, temperature, mode)[0])


def mixed_log_weight(traj: Trajectory, demo: Demonstration, temperature: float,
                     mode: ConstraintMode = HARD) -> float:
    """Per-sample max of the model weight and the demonstration weight."""
    return max(traj_log_weight(traj, temperature, mode),
               demo_log_weight(traj, demo, temperature, mode))


def objective_log_weight_fn(temperature: float, constraint=None, demo=None,
                            mode: ConstraintMode = HARD):
    """Weighting hook for :func:`mbd.core.run_mbd` on constrained black-box problems.

    ``constraint(points)`` returns per-point (or per-point, per-term) values
    that must be ``<= 0``. ``demo`` is a one-row :class:`Demonstration` in
    problem coordinates; each candidate then gets the larger of its model and
    demonstration weights.
    """
    def log_weights(points, costs):
        points = np.asarray(points, dtype=np.float64)
        viol = np.zeros(len(points))
        if constraint is not None:
            g = np.asarray(constraint(points), dtype=np.float64).reshape(len(points), -1)
            viol = np.maximum(g, 0.0).sum(axis=1)
        log_w = batch_log_weights(costs, viol, temperature, mode)
        if demo is not None:
            log_w = np.maximum(log_w, batch_demo_log_weights(points[:, None, :], demo,
                                                             temperature, mode))
        return log_w
    return log_weights


# --------------------------------------------------------------------------
# RRT over a holonomic point

@dataclass(frozen=True)
class RrtConfig:
    max_step: float = 0.2
    max_iters: int = 1000
    goal_bias: float = 0.05
    seed: int = 0
    bounds: tuple = (0.0, 0.0, 4.0, 4.0)
    shortcut: bool = True
    clearance: float | None = 0.25   # obstacle inflation; None -> max_step / 4


def segment_clear(a, b, rects, resolution: float) -> bool:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = max(1, int(math.ceil(np.linalg.norm(b - a) / resolution)))
    s = np.linspace(0.0, 1.0, n + 1)
    pts = a + s[:, None] * (b - a)
    if not rects:
        return True
    return bool(np.all(rect_depth(pts[:, 0], pts[:, 1], rects) <= 0.0))


def rrt_plan(start, goal, forbidden, cfg: RrtConfig = RrtConfig()) -> np.ndarray:
    """Goal-biased RRT with straight-line steering.

    Returns an ``(m, 2)`` polyline from ``start`` that ends within
    ``max_step`` of ``goal`` (at the goal itself when the final hop is
    clear); raises :class:`NoPathFoundError` otherwise. With
    ``cfg.shortcut`` the tree path is greedily shortened, every new segment
    being collision-checked at the same resolution. Obstacles are inflated by
    ``cfg.clearance``: shortcuts cannot graze corners between check points,
    and the path keeps about a car's turning radius away from the walls.
    """
    start = np.asarray(start, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    res = cfg.max_step / 4.0
    pad = res if cfg.clearance is None else cfg.clearance
    rects = [(r[0] - pad, r[1] - pad, r[2] + pad, r[3] + pad) for r in forbidden]
    if np.linalg.norm(goal - start) <= cfg.max_step and segment_clear(start, goal, rects, res):
        return start[None, :].copy() if np.allclose(start, goal) else np.stack([start, goal])
    gen = rng.stream(cfg.seed, rng.RRT)
    lo = np.array(cfg.bounds[:2], dtype=np.float64)
    hi = np.array(cfg.bounds[2:], dtype=np.float64)
    nodes = [start]
    parents = [-1]
    for _ in range(cfg.max_iters):
        target = goal if gen.random() < cfg.goal_bias else lo + (hi - lo) * gen.random(2)
        arr = np.asarray(nodes)
        near = int(np.argmin(np.sum((arr - target) ** 2, axis=1)))
        delta = target - arr[near]
        dist = float(np.linalg.norm(delta))
        if dist == 0.0:
            continue
        new = arr[near] + delta * min(1.0, cfg.max_step / dist)
        if not segment_clear(arr[near], new, rects, res):
            continue
        nodes.append(new)
        parents.append(near)
        if np.linalg.norm(goal - new) <= cfg.max_step:
            path = [new]
            k = near
            while k >= 0:
                path.append(nodes[k])
                k = parents[k]
            path = path[::-1]
            if segment_clear(new, goal, rects, res):
                path.append(goal)
            path = np.asarray(path)
            return shortcut_path(path, rects, res) if cfg.shortcut else path
    raise NoPathFoundError(f"no path after {cfg.max_iters} iterations")


def shortcut_path(path: np.ndarray, rects, resolution: float) -> np.ndarray:
    """Greedy line-of-sight pruning: jump to the furthest visible vertex."""
    out = [path[0]]
    i = 0
    while i < len(path) - 1:
        j = len(path) - 1
        while j > i + 1 and not segment_clear(path[i], path[j], rects, resolution):
            j -= 1
        out.append(path[j])
        i = j
    return np.asarray(out)


def resample_path(path: np.ndarray, n: int) -> np.ndarray:
    """``n`` points evenly spaced in arc length along a polyline (endpoints kept)."""
    path = np.asarray(path, dtype=np.float64)
    if len(path) == n:
        return path.copy()
    if len(path) == 1:
        return np.repeat(path, n, axis=0)
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return np.repeat(path[:1], n, axis=0)
    q = np.linspace(0.0, s[-1], n)
    return np.stack([np.interp(q, s, path[:, j]) for j in range(path.shape[1])], axis=1)


def path_to_demonstration(path: np.ndarray, task: TaskSpec, sigma: float = 0.1,
                          demo_cost: float | None = None) -> Demonstration:
    """Turn a planar polyline into a position-only demonstration for ``task``.

    The path is resampled to ``T`` waypoints by arc length; only the two
    position entries are observed. ``sigma`` is in the task's normalized
    state units (``task.state_scale``). The demonstration cost is the task cost
    with unobserved entries and controls set to zero, unless ``demo_cost``
    overrides it.
    """
    T, n_x = task.horizon, task.model.n_x
    pts = resample_path(path, T)
    values = np.zeros((T, n_x))
    mask = np.zeros((T, n_x), dtype=bool)
    values[:, :2] = pts
    mask[:, :2] = True
    if demo_cost is None:
        # unobserved entries and controls are zero, so only position terms count
        states = values[None]
        controls = np.zeros((1, T, task.model.n_u))
        demo_cost = float(task.stage_cost(states, controls).sum()
                          + task.terminal_cost(states[:, -1])[0])
    rects = task.geometry.get("rectangles", [])
    viol = 0.0
    if rects:
        viol = float(np.maximum(rect_depth(pts[:, 0], pts[:, 1], rects), 0.0).sum())
    return Demonstration(values, mask, float(sigma), float(demo_cost), viol,
                         task.state_scale)


def save_path_csv(path: np.ndarray, out) -> None:
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["px", "py"])
        for p in np.asarray(path):
            w.writerow([repr(float(p[0])), repr(float(p[1]))])
