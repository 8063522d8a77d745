"""Compare the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--batch 1000] [--repeat 5]

Times batched rollouts of every built-in model and the weighted mean, checks
that both backends agree, and prints one line per kernel.
"""

import argparse
import time

import numpy as np

from mbd import _kernels_py as py

try:
    from mbd import _kernels as cy
except ImportError:
    cy = None

MODELS = {
    # name: (model_id, params, x0, n_u, integrator)
    "double_integrator": (py.DOUBLE_INTEGRATOR, np.zeros(0), np.zeros(4), 2, py.EULER),
    "pendulum": (py.PENDULUM, np.array([9.81, 1.0, 1.0]), np.array([np.pi, 0.0]), 1, py.RK4),
    "cartpole": (py.CARTPOLE, np.array([9.81, 1.0, 0.1, 0.5]),
                 np.array([0.0, np.pi, 0.0, 0.0]), 1, py.RK4),
    "car2d": (py.CAR2D, np.array([0.3, 2.0, 0.6]), np.array([0.5, 0.5, 0.0, 0.0, 0.0]), 2,
              py.RK4),
}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=1000)
    ap.add_argument("--horizon", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if cy is None:
        raise SystemExit("compiled extension not built; run `pip install -e .` first")
    gen = np.random.default_rng(0)
    print(f"{'kernel':<22}{'python ms':>12}{'cython ms':>12}{'speedup':>10}{'max diff':>12}")
    for name, (mid, params, x0, n_u, integ) in MODELS.items():
        u = np.ascontiguousarray(gen.uniform(-1, 1, (args.batch, args.horizon, n_u)))
        t_py, a = best_of(lambda: py.rollout_batch(mid, params, x0, u, 0.05, integ), args.repeat)
        t_cy, b = best_of(lambda: cy.rollout_batch(mid, params, x0, u, 0.05, integ), args.repeat)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        print(f"{'rollout/' + name:<22}{1e3 * t_py:12.2f}{1e3 * t_cy:12.2f}"
              f"{t_py / t_cy:10.1f}{diff:12.1e}")
    ys = np.ascontiguousarray(gen.standard_normal((args.batch, 100)))
    lw = np.ascontiguousarray(-gen.exponential(50.0, args.batch))
    t_py, a = best_of(lambda: py.weighted_mean(ys, lw), args.repeat)
    t_cy, b = best_of(lambda: cy.weighted_mean(ys, lw), args.repeat)
    diff = float(np.max(np.abs(np.asarray(a[0]) - np.asarray(b[0]))))
    print(f"{'weighted_mean':<22}{1e3 * t_py:12.2f}{1e3 * t_cy:12.2f}"
          f"{t_py / t_cy:10.1f}{diff:12.1e}")


if __name__ == "__main__":
    main()
