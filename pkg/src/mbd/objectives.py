"""Black-box test problems on box domains.

Each problem evaluates batches: ``cost(Y)`` takes an ``(n, d)`` array in
problem coordinates and returns ``n`` costs. The optimizers see the box
through an affine map onto ``[-1, 1]^d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class ObjectiveProblem:
    name: str
    dim: int
    lower: np.ndarray
    upper: np.ndarray
    cost: Callable[[np.ndarray], np.ndarray]
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        lo = np.broadcast_to(np.asarray(self.lower, dtype=np.float64), (self.dim,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=np.float64), (self.dim,)).copy()
        if not np.all(lo < hi):
            raise ValueError("lower bounds must be strictly below upper bounds")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def to_box(self, u):
        return self.center + self.half_width * np.asarray(u)

    def to_unit(self, y):
        return (np.asarray(y) - self.center) / self.half_width

    def __call__(self, y) -> float:
        y = np.asarray(y, dtype=np.float64).reshape(1, self.dim)
        return float(self.cost(y)[0])

    def cost_unit(self, u: np.ndarray) -> np.ndarray:
        """Batch cost of unit-box points, clamped into the box first."""
        u = np.clip(np.atleast_2d(u), -1.0, 1.0)
        return np.asarray(self.cost(self.to_box(u)), dtype=np.float64)


def _ackley(y, a=20.0, b=0.2, c=2.0 * math.pi):
    d = y.shape[1]
    s1 = np.sqrt(np.sum(y * y, axis=1) / d)
    s2 = np.sum(np.cos(c * y), axis=1) / d
    return -a * np.exp(-b * s1) - np.exp(s2) + a + math.e


def ackley(d: int) -> ObjectiveProblem:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return ObjectiveProblem(f"ackley{d}", d, -32.768, 32.768, _ackley)


def _rastrigin(y):
    return 10.0 * y.shape[1] + np.sum(y * y - 10.0 * np.cos(2.0 * math.pi * y), axis=1)


def rastrigin(d: int) -> ObjectiveProblem:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return ObjectiveProblem(f"rastrigin{d}", d, -5.12, 5.12, _rastrigin)


# (weight, centre, width) of the three wells
MULTIMODAL_BUMPS = ((0.6, -1.2, 0.12), (1.0, 0.8, 0.08), (0.5, 1.6, 0.1))


def _multimodal(y):
    x = y[:, 0]
    total = np.zeros_like(x)
    for weight, mu, s in MULTIMODAL_BUMPS:
        total += weight * np.exp(-(x - mu) ** 2 / (2.0 * s * s))
    return 1.0 - total


def synthetic_multimodal_1d() -> ObjectiveProblem:
    """Three Gaussian wells on [-3, 3]; the deepest sits at 0.8."""
    return ObjectiveProblem("synthetic_1d", 1, -3.0, 3.0, _multimodal)


# --------------------------------------------------------------------------
# gradient-free MLP training

@dataclass(frozen=True)
class MlpLayout:
    sizes: tuple[int, ...]

    @property
    def n_params(self) -> int:
        return sum(a * b + b for a, b in zip(self.sizes[:-1], self.sizes[1:]))

    def unflatten(self, theta: np.ndarray):
        """Split a ``(n, P)`` parameter batch into per-layer ``(W, b)`` views."""
        if theta.shape[-1] != self.n_params:
            raise ValueError(
                f"expected {self.n_params} parameters, got {theta.shape[-1]}")
        out, k = [], 0
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            w = theta[:, k:k + a * b].reshape(-1, a, b)
            k += a * b
            out.append((w, theta[:, k:k + b]))
            k += b
        return out

    def logits(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Forward pass for a batch of parameter vectors -> ``(n, m, classes)``."""
        layers = self.unflatten(np.atleast_2d(theta))
        h = np.broadcast_to(x, (layers[0][0].shape[0],) + x.shape)
        for j, (w, b) in enumerate(layers):
            h = np.matmul(h, w) + b[:, None, :]
            if j < len(layers) - 1:
                h = np.maximum(h, 0.0)
        return h


def _cross_entropy(logits, labels):
    m = logits.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(logits - m).sum(axis=-1)) + m[..., 0]
    picked = np.take_along_axis(logits, labels[None, :, None], axis=-1)[..., 0]
    return (lse - picked).mean(axis=-1)


def mlp_classification_objective(features: np.ndarray, labels: np.ndarray,
                                 layer_widths: Sequence[int] = (32, 32),
                                 n_classes: int | None = None,
                                 bound: float = 4.0,
                                 chunk: int = 64) -> ObjectiveProblem:
    """Mean cross-entropy of a ReLU MLP as a function of its flat parameters.

    Parameters are ordered layer by layer as ``W`` (fan_in x fan_out,
    row-major) then ``b``. The box is ``[-bound, bound] / sqrt(fan_in)`` per
    layer so unit-box coordinates start at a sensible initialisation scale.
    The returned problem carries ``extras["accuracy"]`` and
    ``extras["layout"]``.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or len(x) == 0 or len(x) != len(y):
        raise ValueError("need a nonempty (m, features) table with m labels")
    n_classes = int(n_classes or y.max() + 1)
    layout = MlpLayout((x.shape[1], *map(int, layer_widths), n_classes))

    def cost(theta):
        theta = np.atleast_2d(theta)
        out = np.empty(len(theta))
        for s in range(0, len(theta), chunk):
            out[s:s + chunk] = _cross_entropy(layout.logits(theta[s:s + chunk], x), y)
        return out

    def accuracy(theta, xs=x, ys=y):
        pred = layout.logits(np.atleast_2d(theta), np.asarray(xs, dtype=np.float64))
        return (pred.argmax(axis=-1) == np.asarray(ys)[None, :]).mean(axis=-1)

    half = np.concatenate([
        np.full(a * b + b, bound / math.sqrt(a))
        for a, b in zip(layout.sizes[:-1], layout.sizes[1:])
    ])
    return ObjectiveProblem(
        f"mlp{'x'.join(map(str, layout.sizes))}", layout.n_params, -half, half, cost,
        extras={"accuracy": accuracy, "layout": layout})


def spiral_dataset(n_points: int = 400, turns: float = 1.25, noise: float = 0.04,
                   seed: int = 7) -> tuple[np.ndarray, np.ndarray]:
    """Two interleaved spirals, ``n_points`` total, deterministic for a seed."""
    gen = np.random.default_rng(seed)
    per = n_points // 2
    r = np.linspace(0.15, 1.0, per)
    xs, ys = [], []
    for c in (0, 1):
        theta = r * turns * 2.0 * math.pi + c * math.pi
        pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
        xs.append(pts + noise * gen.standard_normal(pts.shape))
        ys.append(np.full(per, c))
    return np.concatenate(xs), np.concatenate(ys)
