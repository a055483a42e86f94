import math

import numpy as np
import pytest
from scipy import special

from d2d_assign.errors import DomainError, NumericError
from d2d_assign.special_fns import (
    QuadratureControl,
    SeriesControl,
    exp_integral_ei,
    fourier_tail,
    integrate,
    lower_incomplete_gamma,
    scaled_exp1,
    upper_incomplete_gamma,
    upper_incomplete_gamma_nonpos,
)


class TestExpIntegral:
    def test_known_values(self):
        assert exp_integral_ei(-1.0) == pytest.approx(-0.2193839, rel=1e-6)
        assert exp_integral_ei(-10.0) == pytest.approx(-4.157e-6, rel=1e-3)

    def test_zero_is_rejected(self):
        with pytest.raises(DomainError):
            exp_integral_ei(0.0)

    def test_monotone_towards_zero_for_negative_arguments(self):
        values = [exp_integral_ei(-x) for x in (1.0, 2.0, 5.0, 20.0)]
        assert all(a < b < 0 for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("x", np.linspace(0.01, 30.0, 13))
    def test_matches_e1(self, x):
        assert -exp_integral_ei(-x) == pytest.approx(float(special.exp1(x)), rel=1e-10)


class TestScaledExp1:
    def test_continuous_across_asymptotic_switch(self):
        below, above = scaled_exp1(599.999), scaled_exp1(600.001)
        assert below == pytest.approx(above, rel=1e-7)

    def test_large_argument_is_finite(self):
        assert scaled_exp1(1e6) == pytest.approx(1e-6, rel=1e-5)

    def test_vectorised(self):
        z = np.array([0.5, 1.0, 2.0])
        np.testing.assert_allclose(scaled_exp1(z), np.exp(z) * special.exp1(z), rtol=1e-14)

    def test_rejects_non_positive(self):
        with pytest.raises(DomainError):
            scaled_exp1(0.0)


class TestIncompleteGamma:
    def test_lower_values(self):
        assert lower_incomplete_gamma(1.0, 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-12)
        assert lower_incomplete_gamma(2.0, 1.0) == pytest.approx(0.2642411, rel=1e-6)
        assert lower_incomplete_gamma(3.0, 0.0) == 0.0

    @pytest.mark.parametrize("s", [1.0, 2.0, 3.0])
    @pytest.mark.parametrize("x", [0.0, 0.5, 3.0, 10.0])
    def test_lower_plus_upper_is_gamma(self, s, x):
        total = lower_incomplete_gamma(s, x) + upper_incomplete_gamma(s, x)
        assert total == pytest.approx(math.gamma(s), rel=1e-10)

    def test_domain(self):
        with pytest.raises(DomainError):
            lower_incomplete_gamma(0.0, 1.0)
        with pytest.raises(DomainError):
            upper_incomplete_gamma_nonpos(1, 0.0)

    def test_nonpositive_order_values(self):
        e1 = 0.21938393439552
        assert upper_incomplete_gamma_nonpos(0, 1.0) == pytest.approx(e1, rel=1e-8)
        assert upper_incomplete_gamma_nonpos(1, 1.0) == pytest.approx(math.exp(-1) - e1, rel=1e-6)

    @pytest.mark.parametrize("k", [0, 1, 3, 6, 10])
    @pytest.mark.parametrize("x", [0.01, 0.7, 5.0, 50.0])
    def test_nonpositive_order_matches_quadrature(self, k, x):
        # geometric pieces keep the steep t^(-k-1) head resolvable
        edges = [x * 2.0**i for i in range(12)]
        f = lambda t: t ** (-k - 1) * math.exp(-t)
        direct = sum(integrate(f, a, b) for a, b in zip(edges, edges[1:]))
        direct += integrate(f, edges[-1], math.inf)
        assert upper_incomplete_gamma_nonpos(k, x) == pytest.approx(direct, rel=1e-8)

    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_nonpositive_order_recurrence(self, k):
        x = 2.5
        lhs = upper_incomplete_gamma_nonpos(k, x)
        rhs = (math.exp(-x) * x ** (-k) - upper_incomplete_gamma_nonpos(k - 1, x)) / k
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_nonpositive_order_decreasing_in_x(self):
        values = [upper_incomplete_gamma_nonpos(0, x) for x in (0.1, 1.0, 3.0)]
        assert values == sorted(values, reverse=True)


class TestIntegrate:
    def test_semi_infinite(self):
        assert integrate(lambda t: math.exp(-t), 0.0, math.inf) == pytest.approx(1.0, abs=1e-10)

    def test_finite(self):
        assert integrate(lambda t: t, 0.0, 1.0) == pytest.approx(0.5)

    def test_reference_integral(self):
        value = integrate(lambda t: t * math.exp(-t) / (1 + t), 0.0, math.inf)
        assert value == pytest.approx(0.4036526, rel=1e-6)

    def test_empty_range(self):
        assert integrate(lambda t: 1.0, 2.0, 2.0) == 0.0

    def test_non_convergence_carries_estimate(self):
        ctrl = QuadratureControl(abs_tolerance=0.0, rel_tolerance=1e-14, max_subdivisions=1)
        with pytest.raises(NumericError) as info:
            integrate(lambda t: math.sin(50 * t) ** 2 / math.sqrt(t), 0.0, 10.0, ctrl)
        assert info.value.estimate is not None


def test_controls_validate():
    with pytest.raises(DomainError):
        SeriesControl(rel_tolerance=0.0)
    with pytest.raises(DomainError):
        QuadratureControl(abs_tolerance=0.0, rel_tolerance=0.0)


class TestFourierTail:
    @pytest.mark.parametrize("kind", ["cos", "sin"])
    def test_damped_exponential(self, kind):
        assert fourier_tail(lambda t: math.exp(-t), 0.0, kind) == pytest.approx(0.5, abs=1e-10)

    def test_slowly_decaying_tail(self):
        # ∫_π^∞ sin(t)/t dt = π/2 - Si(π)
        expected = math.pi / 2 - float(special.sici(math.pi)[0])
        assert fourier_tail(lambda t: 1.0 / t, math.pi, "sin") == pytest.approx(expected, abs=1e-9)

    def test_frequency(self):
        # ∫_0^∞ e^(-t) cos(2t) dt = 1/5
        assert fourier_tail(lambda t: math.exp(-t), 0.0, "cos", omega=2.0) == pytest.approx(0.2, abs=1e-10)

    def test_rejects_bad_arguments(self):
        with pytest.raises(DomainError):
            fourier_tail(lambda t: 1.0, 0.0, "tan")
        with pytest.raises(DomainError):
            fourier_tail(lambda t: 1.0, 0.0, "cos", omega=0.0)
