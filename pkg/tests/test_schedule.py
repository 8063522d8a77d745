from decimal import Decimal, getcontext

import numpy as np
import pytest

from mbd.schedule import IndexConvention, make_linear_schedule, sampling_params


class TestLinearSchedule:
    def test_endpoints(self):
        s = make_linear_schedule(1e-4, 1e-2, 100)
        assert s.n_steps == 100
        assert s.beta(1) == 1e-4
        assert s.beta(100) == 1e-2
        assert s.alpha_bar(0) == 1.0

    def test_single_step(self):
        s = make_linear_schedule(0.5, 0.5, 1)
        np.testing.assert_array_equal(s.alphas, [0.5])
        np.testing.assert_array_equal(s.alpha_bars, [1.0, 0.5])

    def test_alphas_are_one_minus_betas(self):
        s = make_linear_schedule()
        assert np.all(s.alphas == 1.0 - s.betas)

    def test_recursion_and_monotonicity(self):
        s = make_linear_schedule()
        ab = s.alpha_bars
        assert np.max(np.abs(ab[1:] - s.alphas * ab[:-1])) <= 1e-12
        assert np.all(np.diff(ab) < 0)
        assert 0.0 < ab[-1] < 1.0

    def test_final_alpha_bar_against_decimal_product(self):
        getcontext().prec = 50
        s = make_linear_schedule()
        prod = Decimal(1)
        for k in range(100):
            beta = Decimal(1e-4) + Decimal(k) / Decimal(99) * (Decimal(1e-2) - Decimal(1e-4))
            prod *= 1 - beta
        assert abs(s.alpha_bar(100) - float(prod)) < 1e-13

    def test_arrays_are_read_only(self):
        s = make_linear_schedule()
        with pytest.raises(ValueError):
            s.betas[0] = 0.3

    @pytest.mark.parametrize("args", [(0.0, 1e-2, 10), (1e-2, 1e-4, 10), (1e-4, 1.0, 10),
                                      (1e-4, 1e-2, 0), (1e-4, 1e-2, 2.5)])
    def test_rejects_bad_arguments(self, args):
        with pytest.raises(ValueError):
            make_linear_schedule(*args)


class TestSamplingParams:
    def test_eq7_matches_product(self):
        s = make_linear_schedule()
        scale, var = sampling_params(s, 100, IndexConvention.EQ7)
        ab = np.prod(1.0 - s.betas)
        assert scale == pytest.approx(1.0 / np.sqrt(ab), rel=1e-14)
        assert var == pytest.approx(1.0 / ab - 1.0, rel=1e-12)

    def test_single_step_values(self):
        s = make_linear_schedule(0.5, 0.5, 1)
        scale, var = sampling_params(s, 1, "EQ7")
        assert scale == pytest.approx(np.sqrt(2.0), abs=1e-15)
        assert var == 1.0

    def test_alg1_first_step_is_degenerate(self):
        scale, var = sampling_params(make_linear_schedule(), 1, "ALG1")
        assert (scale, var) == (1.0, 0.0)

    def test_variance_strictly_increasing(self):
        s = make_linear_schedule()
        for conv, start in (("EQ7", 1), ("ALG1", 2)):
            v = [sampling_params(s, i, conv)[1] for i in range(1, 101)]
            assert all(x > 0 for x in v[start - 1:])
            assert np.all(np.diff(v) > 0)

    @pytest.mark.parametrize("i", [0, 101, -1])
    def test_index_out_of_range(self, i):
        with pytest.raises(ValueError):
            sampling_params(make_linear_schedule(), i)

    def test_unknown_convention(self):
        with pytest.raises(ValueError):
            sampling_params(make_linear_schedule(), 3, "EQ9")
