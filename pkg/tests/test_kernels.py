import math

import numpy as np
import pytest

from knlb.kernels import (
    KernelFunction,
    exp_kernel,
    poly_kernel,
    power_kernel,
    softplus_kernel,
)


def taylor_remainder_order(kernel, order):
    """Empirical order of the Taylor remainder at shrinking arguments."""
    coeffs = [kernel.taylor_coeff(ell) for ell in range(order + 1)]

    def remainder(t):
        partial = sum(c * t**ell for ell, c in enumerate(coeffs))
        return abs(float(kernel(t)) - partial)

    r1, r2 = remainder(2e-2), remainder(1e-2)
    if r2 == 0.0:  # polynomial profiles terminate exactly
        return None
    return math.log2(r1 / r2)


class TestBuiltins:
    def test_exp_table(self):
        k = exp_kernel(10)
        assert np.all(k.deriv0 == 1.0)
        assert k.f_at_1 == pytest.approx(math.e)
        assert k(0.0) == pytest.approx(1.0)

    def test_poly_table(self):
        k = poly_kernel([1.0, 0.0, 2.0])  # 1 + 2 t^2
        assert k.deriv0.tolist() == [1.0, 0.0, 4.0]
        assert k.f_at_1 == pytest.approx(3.0)
        assert float(k(2.0)) == pytest.approx(9.0)

    def test_poly_padding(self):
        k = poly_kernel([0.0, 1.0], max_order=5)
        assert k.max_order == 5
        assert k.deriv0.tolist() == [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]

    def test_power_table(self):
        k = power_kernel(1.5, 4)
        expect = [1.0, 1.5, 1.5 * 0.5, 1.5 * 0.5 * -0.5, 1.5 * 0.5 * -0.5 * -1.5]
        assert k.deriv0 == pytest.approx(expect)
        assert k.f_at_1 == pytest.approx(2.0**1.5)

    def test_softplus_normalized_at_zero(self):
        k = softplus_kernel(6)
        assert k(0.0) == pytest.approx(1.0)
        ln2 = math.log(2.0)
        assert k.deriv0[1] == pytest.approx(0.5 / ln2)
        assert k.deriv0[2] == pytest.approx(0.25 / ln2)
        assert k.deriv0[3] == pytest.approx(0.0, abs=1e-15)
        assert k.deriv0[4] == pytest.approx(-0.125 / ln2)

    @pytest.mark.parametrize(
        "kernel", [exp_kernel(8), power_kernel(1.5, 8), softplus_kernel(8)]
    )
    def test_taylor_partial_sums_match_profile(self, kernel):
        # remainder after L terms should shrink like t^(L+1)
        order = 4
        rate = taylor_remainder_order(kernel, order)
        assert rate == pytest.approx(order + 1, abs=0.8)

    def test_poly_taylor_is_exact(self):
        kernel = poly_kernel([1.0, 2.0, 3.0], max_order=4)
        assert taylor_remainder_order(kernel, 4) is None


class TestKernelFunction:
    def test_value_at_zero_validated(self):
        with pytest.raises(ValueError, match="profile"):
            KernelFunction(np.exp, np.array([2.0, 1.0]), math.e)

    def test_taylor_coeff(self):
        k = exp_kernel(6)
        assert k.taylor_coeff(3) == pytest.approx(1.0 / 6.0)

    def test_vectorized_call(self):
        k = exp_kernel(4)
        ts = np.array([[0.0, 1.0], [2.0, -1.0]])
        assert k(ts) == pytest.approx(np.exp(ts))
