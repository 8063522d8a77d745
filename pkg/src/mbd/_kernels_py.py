"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable, and as the
reference the compiled version is tested against.
"""

from __future__ import annotations

import numpy as np

DOUBLE_INTEGRATOR = 0
PENDULUM = 1
CARTPOLE = 2
CAR2D = 3

EULER = 0
RK4 = 1


def weighted_mean(ys: np.ndarray, log_w: np.ndarray) -> tuple[np.ndarray, float]:
    """Softmax-weighted mean of the rows of ``ys`` and the effective sample size.

    The caller guarantees at least one finite log weight.
    """
    m = np.max(log_w)
    w = np.exp(log_w - m)
    w /= w.sum()
    return w @ ys, float(1.0 / np.dot(w, w))


def _double_integrator(x, u, p):
    return np.concatenate([x[:, 2:4], u[:, 0:2]], axis=1)


def _pendulum(x, u, p):
    g, length, mass = p[0], p[1], p[2]
    th, w = x[:, 0], x[:, 1]
    acc = (g / length) * np.sin(th) + u[:, 0] / (mass * length * length)
    return np.stack([w, acc], axis=1)


def _cartpole(x, u, p):
    g, m_cart, m_pole, half = p[0], p[1], p[2], p[3]
    total = m_cart + m_pole
    th, xd, thd = x[:, 1], x[:, 2], x[:, 3]
    s, c = np.sin(th), np.cos(th)
    temp = (u[:, 0] + m_pole * half * thd * thd * s) / total
    th_acc = (g * s - c * temp) / (half * (4.0 / 3.0 - m_pole * c * c / total))
    x_acc = temp - m_pole * half * th_acc * c / total
    return np.stack([xd, thd, x_acc, th_acc], axis=1)


def _car2d(x, u, p):
    wheelbase = p[0]
    th, v, delta = x[:, 2], x[:, 3], x[:, 4]
    return np.stack([v * np.cos(th), v * np.sin(th), v / wheelbase * np.tan(delta),
                     u[:, 0], u[:, 1]], axis=1)


def _car2d_clamp(x, p):
    x[:, 3] = np.clip(x[:, 3], -p[1], p[1])
    x[:, 4] = np.clip(x[:, 4], -p[2], p[2])


DERIVS = {
    DOUBLE_INTEGRATOR: _double_integrator,
    PENDULUM: _pendulum,
    CARTPOLE: _cartpole,
    CAR2D: _car2d,
}
CLAMPS = {CAR2D: _car2d_clamp}


def integrate(deriv, clamp, x0, controls, dt, integrator, params=None):
    """Roll ``controls`` (B, T, n_u) forward from ``x0`` (n_x,) -> states (B, T, n_x)."""
    n_batch, horizon, _ = controls.shape
    x = np.repeat(np.asarray(x0, dtype=np.float64)[None, :], n_batch, axis=0)
    out = np.empty((n_batch, horizon, x.shape[1]))
    half = 0.5 * dt
    for t in range(horizon):
        u = controls[:, t, :]
        if integrator == EULER:
            x = x + dt * deriv(x, u, params)
        else:
            k1 = deriv(x, u, params)
            k2 = deriv(x + half * k1, u, params)
            k3 = deriv(x + half * k2, u, params)
            k4 = deriv(x + dt * k3, u, params)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if clamp is not None:
            clamp(x, params)
        out[:, t, :] = x
    return out


def rollout_batch(model_id: int, params: np.ndarray, x0: np.ndarray,
                  controls: np.ndarray, dt: float, integrator: int) -> np.ndarray:
    return integrate(DERIVS[model_id], CLAMPS.get(model_id), x0, controls, dt,
                     integrator, params)
