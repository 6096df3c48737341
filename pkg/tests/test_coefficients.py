import math

import numpy as np
import pytest

from bandchannel.errors import DomainError, UsageError
from bandchannel.schemas import CoefficientTrace, EnvironmentParams, Method
from bandchannel.services.coefficient_service import coefficient_service
from bandchannel.services.oracle_service import oracle_service


def env(j0=1.0, omega_lo=1.0, delta=1e-3, beta=None):
    return EnvironmentParams.finite_band(j0, omega_lo, delta, beta=beta)


def test_everything_vanishes_at_zero():
    e = env()
    for fn in (coefficient_service.gamma_quad, coefficient_service.delta_quad,
               coefficient_service.pi_quad, coefficient_service.r_quad):
        assert fn(e, 0.0) == 0.0
    for method in Method:
        assert coefficient_service.gamma_int(e, 0.0, method) == 0.0
        assert coefficient_service.delta_gamma(e, 0.0, method) == 0.0
        assert coefficient_service.secular_coeffs(e, 0.0, method) == (0.0, 0.0, 0.0, 0.0)


def test_short_time_quadrature_matches_leading_order():
    e = env()
    assert coefficient_service.gamma_quad(e, 0.1) == pytest.approx(1e-3 * 0.1 ** 3 / 3.0, rel=0.02)
    assert coefficient_service.delta_quad(e, 0.1) == pytest.approx(1e-4, rel=0.01)
    assert coefficient_service.pi_quad(e, 0.1) == pytest.approx(5e-6, rel=0.05)
    assert coefficient_service.r_quad(e, 0.1) == pytest.approx(coefficient_service.r_closed(e, 0.1), rel=0.02)


def test_gamma_quad_long_time_bound():
    e = env()
    assert abs(coefficient_service.gamma_quad(e, 10.0)) <= 1e-3 * 10.0


def test_thermal_diffusion_exceeds_low_t():
    assert coefficient_service.delta_quad(env(beta=1.0), 0.1) > coefficient_service.delta_quad(env(), 0.1)


@pytest.mark.parametrize("tau", [0.1, 0.3, 0.6, 0.9])
def test_anomalous_diffusion_below_diffusion(tau):
    e = env()
    assert coefficient_service.pi_quad(e, tau) <= coefficient_service.delta_quad(e, tau)


def test_closed_form_time_integrals():
    assert coefficient_service.gamma_int(env(), 2.0) == pytest.approx(16e-3 / 6.0, abs=1e-12)
    assert coefficient_service.gamma_int(env(omega_lo=3.0), 2.0) == pytest.approx(8e-3, abs=1e-12)
    assert coefficient_service.delta_gamma(env(), 2.0) == pytest.approx(2e-3, abs=1e-12)


def test_quadrature_delta_gamma_close_to_closed_form_at_short_time():
    # leading relative correction is -tau^2/6
    e = env()
    quad_value = coefficient_service.delta_gamma(e, 0.5, Method.QUADRATURE)
    closed_value = coefficient_service.delta_gamma(e, 0.5, Method.CLOSED)
    assert quad_value == pytest.approx(closed_value, rel=0.05)
    assert quad_value < closed_value


@pytest.mark.parametrize("omega_lo", [0.5, 1.0])
@pytest.mark.parametrize("delta", [1e-3, 1e-2])
@pytest.mark.parametrize("tau", [0.05, 0.15, 0.3])
def test_integrated_functions_short_time_window(omega_lo, delta, tau):
    e = env(omega_lo=omega_lo, delta=delta)
    assert coefficient_service.gamma_int(e, tau, Method.QUADRATURE) == pytest.approx(
        coefficient_service.gamma_int_closed(e, tau), rel=0.02)
    assert coefficient_service.delta_gamma(e, tau, Method.QUADRATURE) == pytest.approx(
        coefficient_service.delta_gamma_closed(e, tau), rel=0.02)


def test_secular_diffusion_cosine_term_short_time():
    e = env(delta=1e-4)
    d_co, d_si, p_co, p_si = coefficient_service.secular_coeffs(e, 0.1, Method.CLOSED)
    assert d_co == pytest.approx(4.98e-7, rel=1e-3)
    assert d_si == pytest.approx(1e-4 * (0.05 - math.sin(0.2) / 4.0), rel=1e-6)
    assert p_co == pytest.approx(0.5 * d_si, rel=1e-6)
    quad_co = coefficient_service.secular_coeffs(e, 0.1, Method.QUADRATURE)[0]
    assert quad_co == pytest.approx(4.98e-7, rel=0.02)


@pytest.mark.parametrize("tau", [0.5, 2.0, 5.0, 12.0])
def test_secular_magnitude_bound(tau):
    e = env()
    d_co, d_si, _, _ = coefficient_service.secular_coeffs(e, tau, Method.CLOSED)
    bound = 0.5 * 1e-3 * tau ** 2
    assert abs(d_co) <= bound
    assert abs(d_si) <= bound


def test_weighted_integrals_survive_huge_damping():
    e = env(omega_lo=10.0, delta=0.01)
    terms = coefficient_service.secular_coeffs(e, 20.0, Method.CLOSED)
    assert coefficient_service.gamma_int(e, 20.0) > 1000
    assert all(math.isfinite(t) for t in terms)
    assert all(abs(t) <= 0.5 * 0.01 * 20.0 ** 2 for t in terms)


@pytest.mark.parametrize("tau", [0.1, 1.0, 5.0, 10.0])
def test_gamma_derivative_is_twice_damping(tau):
    e = env()
    slope = oracle_service.finite_diff(lambda t: coefficient_service.gamma_int(e, t, Method.QUADRATURE), tau, h=1e-3)
    assert slope == pytest.approx(2.0 * coefficient_service.gamma_quad(e, tau), rel=1e-4)


def test_profile_gamma_matches_nested_quadrature():
    e = env()
    profile = coefficient_service.profile(e, 4.0)
    assert float(profile.gamma_int(3.0)) == pytest.approx(
        coefficient_service.gamma_int(e, 3.0, Method.QUADRATURE), rel=1e-6)


def test_trace_shapes_and_zero_row():
    grid = np.linspace(0.0, 3.0, 7)
    trace = coefficient_service.trace(env(), grid, Method.CLOSED)
    assert trace.method is Method.CLOSED
    for name in CoefficientTrace.columns():
        column = getattr(trace, name)
        assert len(column) == len(grid)
        assert column[0] == 0.0
    assert all(b >= a for a, b in zip(trace.gamma_int, trace.gamma_int[1:]))


def test_quadrature_trace_differs_only_in_values():
    grid = [0.0, 0.2, 0.3]
    closed = coefficient_service.trace(env(), grid, "closed")
    quad = coefficient_service.trace(env(), grid, "quad")
    assert closed.tau_grid == quad.tau_grid
    assert quad.method is Method.QUADRATURE
    assert quad.gamma_int[2] == pytest.approx(closed.gamma_int[2], rel=0.02)
    assert quad.gamma_int[2] != closed.gamma_int[2]


def test_snapshot_matches_trace_row():
    e = env()
    trace = coefficient_service.trace(e, [0.0, 1.5], Method.CLOSED)
    snap = coefficient_service.snapshot(e, 1.5, Method.CLOSED)
    assert trace.snapshot(1) == snap


def test_unknown_method_is_a_usage_error():
    with pytest.raises(UsageError):
        coefficient_service.gamma_int(env(), 1.0, "trapezoid")


def test_empty_grid_is_a_usage_error():
    with pytest.raises(UsageError):
        coefficient_service.trace(env(), [], Method.CLOSED)


def test_negative_time_is_rejected():
    with pytest.raises(DomainError):
        coefficient_service.delta_gamma(env(), -1.0)


@pytest.mark.parametrize("tau", [0.1, 0.3, 0.5])
def test_secular_coefficients_are_linear_in_bandwidth(tau):
    # holds while Gamma(tau) = J0 delta Omega tau^4 / 6 is negligible
    single = coefficient_service.secular_coeffs(env(delta=1e-5), tau, Method.CLOSED)
    double = coefficient_service.secular_coeffs(env(delta=2e-5), tau, Method.CLOSED)
    for one, two in zip(single, double):
        assert two == pytest.approx(2.0 * one, rel=1e-6)
