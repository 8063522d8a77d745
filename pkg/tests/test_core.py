import math
from fractions import Fraction

import numpy as np
import pytest

from mbd import rng
from mbd.core import (AllRejectedError, BackwardKind, Candidate, MbdConfig, estimate_score,
                      map_batch, mcsa_step, reverse_sde_step, run_mbd, sample_candidates,
                      weighted_mean)
from mbd.objectives import ObjectiveProblem, synthetic_multimodal_1d
from mbd.schedule import make_linear_schedule, sampling_params

SCHED = make_linear_schedule()


def quadratic(d=2, half=3.0):
    return ObjectiveProblem("quad", d, -half, half, lambda y: np.sum(y * y, axis=1))


class TestSampleCandidates:
    def test_floor_keeps_draws_at_the_mean(self):
        y = np.array([0.3, -0.7])
        c = sample_candidates(y, SCHED, 1, 3, rng.stream(0, rng.CANDIDATES, 1), "ALG1")
        assert c.shape == (3, 2)
        assert np.all(np.abs(c - y) < 1e-5)

    def test_sample_mean_within_clt_bound(self):
        for i in (1, 50, 100):
            _, var = sampling_params(SCHED, i)
            c = sample_candidates(np.zeros(3), SCHED, i, 10_000, rng.stream(1, 1, i))
            assert np.all(np.abs(c.mean(axis=0)) < 4 * math.sqrt(var / 10_000))

    def test_deterministic(self):
        y = np.ones(4)
        a = sample_candidates(y, SCHED, 7, 20, rng.stream(5, rng.CANDIDATES, 7))
        b = sample_candidates(y, SCHED, 7, 20, rng.stream(5, rng.CANDIDATES, 7))
        assert np.array_equal(a, b)

    def test_prefix_stable(self):
        y = np.ones(4)
        a = sample_candidates(y, SCHED, 7, 20, rng.stream(5, rng.CANDIDATES, 7))
        b = sample_candidates(y, SCHED, 7, 50, rng.stream(5, rng.CANDIDATES, 7))
        assert np.array_equal(a, b[:20])


class TestWeightedMean:
    def test_uniform(self):
        ys = np.arange(12.0).reshape(4, 3)
        mean, ess = weighted_mean(ys, np.zeros(4))
        np.testing.assert_allclose(mean, ys.mean(axis=0), rtol=1e-15)
        assert ess == pytest.approx(4.0, rel=1e-15)

    def test_one_hot(self):
        ys = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        mean, ess = weighted_mean([Candidate(ys[0], -np.inf), Candidate(ys[1], 0.0),
                                   Candidate(ys[2], -np.inf)])
        assert np.array_equal(mean, ys[1])
        assert ess == 1.0

    def test_against_exact_rational_sum(self):
        ys = np.array([[0.5], [-1.25], [2.0], [3.5], [-0.75]])
        w = [Fraction(1), Fraction(2), Fraction(1, 4), Fraction(3), Fraction(1, 8)]
        exact = sum(Fraction(y[0]) * wk for y, wk in zip(ys, w)) / sum(w)
        mean, _ = weighted_mean(ys, np.log([float(x) for x in w]))
        assert abs(mean[0] - float(exact)) < 1e-15

    def test_no_overflow_for_huge_log_weights(self):
        ys = np.array([[1.0], [2.0]])
        mean, ess = weighted_mean(ys, np.array([-5000.0, -5000.0 - math.log(3)]))
        assert mean[0] == pytest.approx(1.25, rel=1e-14)
        assert np.isfinite(ess)

    def test_shift_invariance(self):
        g = np.random.default_rng(0)
        ys, lw = g.standard_normal((50, 4)), g.standard_normal(50) * 10
        a, _ = weighted_mean(ys, lw)
        b, _ = weighted_mean(ys, lw + 1234.5)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_all_rejected(self):
        with pytest.raises(AllRejectedError):
            weighted_mean(np.zeros((3, 2)), np.full(3, -np.inf))

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            weighted_mean(np.zeros((2, 1)), np.array([0.0, np.nan]))
        with pytest.raises(ValueError):
            Candidate(np.zeros(1), math.nan)


class TestScoreAndSteps:
    def test_score_fixed_point(self):
        y = np.array([0.4, -1.3])
        s = estimate_score(y, y / math.sqrt(SCHED.alpha_bar(30)), SCHED, 30)
        np.testing.assert_allclose(s, 0.0, atol=1e-12)

    @pytest.mark.parametrize("d", [1, 5])
    def test_gaussian_score_oracle(self, d):
        mu, sigma, i = 0.7, 0.5, 60
        ab = SCHED.alpha_bar(i)
        y = np.linspace(-0.5, 0.5, d)
        cands = sample_candidates(y, SCHED, i, 100_000, rng.stream(3, 1, i))
        log_w = -np.sum((cands - mu) ** 2, axis=1) / (2 * sigma ** 2)
        y_bar, _ = weighted_mean(cands, log_w)
        w = np.exp(log_w - log_w.max())
        w /= w.sum()
        se_bar = np.sqrt(np.sum(w[:, None] ** 2 * (cands - y_bar) ** 2, axis=0))
        est = estimate_score(y, y_bar, SCHED, i)
        exact = -(y - math.sqrt(ab) * mu) / (1 - ab + ab * sigma ** 2)
        se = math.sqrt(ab) / (1 - ab) * se_bar
        assert np.all(np.abs(est - exact) <= 3 * se)

    def test_score_matches_grid_gradient(self):
        lam, i = 0.3, 40
        ab = SCHED.alpha_bar(i)
        y0 = np.linspace(-3, 3, 20001)
        log_p0 = -synthetic_multimodal_1d().cost(y0[:, None]) / lam

        def log_pi(y):
            k = log_p0 - (y - math.sqrt(ab) * y0) ** 2 / (2 * (1 - ab))
            m = k.max()
            return m + math.log(np.exp(k - m).sum())

        for y in (-1.0, 0.2, 0.9):
            k = log_p0 - (y - math.sqrt(ab) * y0) ** 2 / (2 * (1 - ab))
            w = np.exp(k - k.max())
            y_bar = np.sum(w * y0) / w.sum()
            h = 1e-5
            fd = (log_pi(y + h) - log_pi(y - h)) / (2 * h)
            assert estimate_score(np.array([y]), np.array([y_bar]), SCHED, i)[0] == \
                pytest.approx(fd, abs=1e-2)

    def test_mcsa_collapse(self):
        g = np.random.default_rng(9)
        for _ in range(100):
            i = int(g.integers(1, 101))
            y, y_bar = g.standard_normal(3) * 3, g.standard_normal(3) * 3
            out = mcsa_step(y, estimate_score(y, y_bar, SCHED, i), SCHED, i)
            ref = math.sqrt(SCHED.alpha_bar(i - 1)) * y_bar
            assert np.max(np.abs(out - ref)) <= 1e-10 * np.max(np.abs(ref))

    def test_mcsa_zero_score(self):
        y = np.array([1.0, -2.0])
        np.testing.assert_allclose(mcsa_step(y, np.zeros(2), SCHED, 10),
                                   y / math.sqrt(SCHED.alpha(10)), rtol=1e-15)

    def test_reverse_sde(self):
        y = np.array([1.0, -2.0])
        np.testing.assert_allclose(reverse_sde_step(y, np.zeros(2), SCHED, 10, None),
                                   y / math.sqrt(SCHED.alpha(10)), rtol=1e-15)
        a = reverse_sde_step(y, y, SCHED, 10, rng.stream(0, rng.SDE_NOISE, 10))
        b = reverse_sde_step(y, y, SCHED, 10, rng.stream(0, rng.SDE_NOISE, 10))
        assert np.array_equal(a, b)

    def test_reverse_sde_variance(self):
        i = 80
        out = np.array([reverse_sde_step(np.zeros(1), np.zeros(1), SCHED, i,
                                         rng.stream(s, rng.SDE_NOISE, i))[0]
                        for s in range(10_000)])
        assert out.var() == pytest.approx(1 - SCHED.alpha(i), rel=0.1)

    def test_forward_diffused_optimum_mean(self):
        # samples of exp(-|y - y*|^2 / lam) pushed through the forward process
        y_star, lam, n = np.array([0.8, -0.4]), 0.01, 20_000
        g = np.random.default_rng(4)
        for i in (10, 50, 100):
            ab = SCHED.alpha_bar(i)
            y0 = y_star + math.sqrt(lam / 2) * g.standard_normal((n, 2))
            yi = math.sqrt(ab) * y0 + math.sqrt(1 - ab) * g.standard_normal((n, 2))
            se = yi.std(axis=0) / math.sqrt(n)
            assert np.all(np.abs(yi.mean(axis=0) - math.sqrt(ab) * y_star) < 3 * se)


class TestRunMbd:
    def test_quadratic(self):
        sol, trace = run_mbd(quadratic(), MbdConfig(seed=0))
        assert np.linalg.norm(sol) < 0.05
        assert len(trace) == 100
        assert [r.step for r in trace.records] == list(range(100, 0, -1))
        j = [r.j_min for r in trace.records]
        assert all(b <= a for a, b in zip(j, j[1:]))
        assert trace.best_cost <= trace.final_cost

    def test_best_includes_final_and_matches_trace(self):
        _, trace = run_mbd(quadratic(), MbdConfig(seed=2))
        assert trace.records[-1].j_min == trace.best_cost
        assert quadratic()(trace.best_y) == trace.best_cost

    def test_workers_do_not_change_results(self):
        p = synthetic_multimodal_1d()
        a = run_mbd(p, MbdConfig(seed=11, workers=1))
        b = run_mbd(p, MbdConfig(seed=11, workers=8))
        assert np.array_equal(a[0], b[0])
        assert list(a[1].rows()) == list(b[1].rows())

    @pytest.mark.parametrize("kind", list(BackwardKind))
    @pytest.mark.parametrize("conv", ["ALG1", "EQ7"])
    def test_variants_run(self, kind, conv):
        sol, trace = run_mbd(quadratic(1), MbdConfig(seed=1, backward_kind=kind,
                                                    index_convention=conv))
        assert np.all(np.isfinite(sol)) and len(trace) == 100

    def test_custom_log_weight_all_rejected_raises(self):
        with pytest.raises(AllRejectedError):
            run_mbd(quadratic(1), MbdConfig(), lambda pts, c: np.full(len(c), -np.inf))

    def test_trace_csv(self, tmp_path):
        _, trace = run_mbd(quadratic(), MbdConfig(seed=0, n_samples=10))
        path = tmp_path / "t.csv"
        trace.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "step,j_min,j_mean_batch,ess,y_norm"
        assert len(lines) == 101

    @pytest.mark.parametrize("kw", [dict(temperature=0.0), dict(n_samples=0), dict(workers=0)])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            MbdConfig(**kw)


def test_map_batch_keeps_order():
    batch = np.arange(17.0)[:, None]
    out = map_batch(lambda b: b[:, 0] * 2, batch, workers=4)
    assert np.array_equal(out, np.arange(17.0) * 2)
