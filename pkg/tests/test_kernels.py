import os
import subprocess
import sys

import numpy as np
import pytest

from mbd import _kernels_py as py
from mbd import kernels

cy = pytest.importorskip("mbd._kernels")

CASES = [
    (py.DOUBLE_INTEGRATOR, np.zeros(0), np.zeros(4), 2, py.EULER),
    (py.PENDULUM, np.array([9.81, 1.0, 1.0]), np.array([np.pi, 0.0]), 1, py.RK4),
    (py.CARTPOLE, np.array([9.81, 1.0, 0.1, 0.5]), np.array([0.0, np.pi, 0.0, 0.0]), 1, py.RK4),
    (py.CAR2D, np.array([0.3, 2.0, 0.6]), np.array([0.5, 0.5, 0.0, 0.0, 0.0]), 2, py.RK4),
    (py.PENDULUM, np.array([9.81, 1.0, 1.0]), np.array([0.1, 0.0]), 1, py.EULER),
]


@pytest.mark.parametrize("mid,params,x0,n_u,integ", CASES)
def test_rollout_parity(mid, params, x0, n_u, integ):
    u = np.random.default_rng(mid).uniform(-3, 3, (64, 40, n_u))
    a = py.rollout_batch(mid, params, x0, u, 0.05, integ)
    b = cy.rollout_batch(mid, params, x0, u, 0.05, integ)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_weighted_mean_parity():
    g = np.random.default_rng(0)
    ys = g.standard_normal((300, 7))
    lw = g.standard_normal(300) * 30
    lw[::7] = -np.inf
    ma, ea = py.weighted_mean(ys, lw)
    mb, eb = cy.weighted_mean(ys, lw)
    np.testing.assert_allclose(ma, mb, rtol=1e-12, atol=1e-15)
    assert ea == pytest.approx(eb, rel=1e-12)


def test_unknown_model_rejected():
    with pytest.raises(ValueError):
        cy.rollout_batch(9, np.zeros(0), np.zeros(2), np.zeros((1, 1, 1)), 0.1, 0)


def test_compiled_backend_selected():
    assert kernels.BACKEND == "cython"


def test_pure_python_switch():
    env = dict(os.environ, MBD_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import mbd.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
