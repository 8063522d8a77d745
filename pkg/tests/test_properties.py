import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mbd.core import estimate_score, mcsa_step, weighted_mean
from mbd.demos import Demonstration, demo_log_weight, mixed_log_weight
from mbd.dynamics import double_integrator_2d
from mbd.objectives import ackley
from mbd.schedule import make_linear_schedule, sampling_params
from mbd.trajopt import rollout, traj_log_weight

SCHED = make_linear_schedule()
finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (12, 3), elements=finite),
       arrays(np.float64, 12, elements=st.floats(-30, 0)),
       st.floats(-1e3, 1e3))
def test_weight_shift_invariance(ys, lw, c):
    a, ess_a = weighted_mean(ys, lw)
    b, ess_b = weighted_mean(ys, lw + c)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    assert math.isclose(ess_a, ess_b, rel_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 4, elements=finite), arrays(np.float64, 4, elements=finite),
       st.integers(1, 100))
def test_collapse(y, y_bar, i):
    out = mcsa_step(y, estimate_score(y, y_bar, SCHED, i), SCHED, i)
    ref = math.sqrt(SCHED.alpha_bar(i - 1)) * y_bar
    assert np.all(np.abs(out - ref) <= 1e-10 * max(1.0, np.max(np.abs(ref))) +
                  1e-10 * np.max(np.abs(y)))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 2), elements=st.floats(-1, 1)),
       st.floats(0.0, 200.0), st.floats(0.05, 2.0), st.floats(0.01, 1.0))
def test_mixed_dominates_both(u, demo_cost, sigma, lam):
    task = double_integrator_2d(horizon=4)
    traj = rollout(u, task)
    demo = Demonstration(np.zeros((4, 4)), np.ones((4, 4), bool), sigma, demo_cost)
    m = mixed_log_weight(traj, demo, lam)
    assert m >= traj_log_weight(traj, lam) and m >= demo_log_weight(traj, demo, lam)


@given(arrays(np.float64, 5, elements=st.floats(-32.768, 32.768)))
def test_box_round_trip(y):
    p = ackley(5)
    np.testing.assert_allclose(p.to_box(p.to_unit(y)), y, atol=1e-12)


@given(st.integers(2, 100))
def test_variance_grows(i):
    assert sampling_params(SCHED, i)[1] > sampling_params(SCHED, i - 1)[1] > 0
