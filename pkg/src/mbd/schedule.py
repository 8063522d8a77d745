"""Linear beta schedule shared by the diffusion samplers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

VARIANCE_FLOOR = 1e-12


class IndexConvention(str, enum.Enum):
    """Which cumulative product parameterizes the candidate distribution.

    ``EQ7`` samples around ``y_i / sqrt(abar_i)``; ``ALG1`` uses ``abar_{i-1}``,
    which collapses to a point mass at ``i = 1``.
    """

    ALG1 = "ALG1"
    EQ7 = "EQ7"


@dataclass(frozen=True)
class NoiseSchedule:
    """Immutable beta/alpha/alpha-bar sequences.

    ``betas`` and ``alphas`` are indexed ``0..N-1`` for steps ``1..N``;
    ``alpha_bars`` has ``N + 1`` entries with ``alpha_bars[0] == 1``.
    """

    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    beta_start: float
    beta_end: float

    @property
    def n_steps(self) -> int:
        return len(self.betas)

    def beta(self, i: int) -> float:
        return float(self.betas[i - 1])

    def alpha(self, i: int) -> float:
        return float(self.alphas[i - 1])

    def alpha_bar(self, i: int) -> float:
        return float(self.alpha_bars[i])

    def to_dict(self) -> dict:
        return {
            "beta_start": self.beta_start,
            "beta_end": self.beta_end,
            "n_steps": self.n_steps,
        }


def make_linear_schedule(beta_start: float = 1e-4, beta_end: float = 1e-2,
                         n_steps: int = 100) -> NoiseSchedule:
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError(f"n_steps must be a positive integer, got {n_steps}")
    n_steps = int(n_steps)
    if n_steps == 1:
        betas = np.array([beta_start], dtype=np.float64)
    else:
        frac = np.arange(n_steps, dtype=np.float64) / (n_steps - 1)
        betas = beta_start + frac * (beta_end - beta_start)
        betas[-1] = beta_end
    alphas = 1.0 - betas
    alpha_bars = np.empty(n_steps + 1)
    alpha_bars[0] = 1.0
    # sequential product keeps abar_i == alpha_i * abar_{i-1} bit-exact
    for k in range(n_steps):
        alpha_bars[k + 1] = alpha_bars[k] * alphas[k]
    for arr in (betas, alphas, alpha_bars):
        arr.setflags(write=False)
    return NoiseSchedule(betas, alphas, alpha_bars, float(beta_start), float(beta_end))


def sampling_params(schedule: NoiseSchedule, i: int,
                    index_convention: IndexConvention | str = IndexConvention.EQ7
                    ) -> tuple[float, float]:
    """Return ``(scale, variance)`` of the candidate distribution at step ``i``.

    Candidates are drawn from ``Normal(y_i * scale, variance * I)``. The
    variance is exactly zero for ``ALG1`` at ``i = 1``; callers apply
    :data:`VARIANCE_FLOOR`.
    """
    if not 1 <= i <= schedule.n_steps:
        raise ValueError(f"step index {i} outside 1..{schedule.n_steps}")
    conv = IndexConvention(index_convention)
    j = i - 1 if conv is IndexConvention.ALG1 else i
    abar = schedule.alpha_bar(j)
    return 1.0 / math.sqrt(abar), 1.0 / abar - 1.0
