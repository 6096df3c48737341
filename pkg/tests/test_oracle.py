import math

import numpy as np
import pytest

from bandchannel.errors import ConvergenceError, DomainError, UsageError
from bandchannel.schemas import EnvironmentParams, Method, OracleReport, SweepScenario
from bandchannel.services.coefficient_service import coefficient_service
from bandchannel.services.dynamics_service import dynamics_service
from bandchannel.services.oracle_service import oracle_service
from bandchannel.services.spectral_service import spectral_service

ENV = EnvironmentParams.finite_band(1.0, 1.0, 1e-3)


def test_quad_reference_simple_integrals():
    assert oracle_service.quad_reference(lambda s: s, 0.0, 1.0) == pytest.approx(0.5, abs=1e-12)
    assert oracle_service.quad_reference(math.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-10)


def test_quad_reference_reproduces_sine_kernel():
    spectral = ENV.spectral.model_copy(update={"delta": 1.0})
    value = oracle_service.quad_reference(lambda w: math.sin(w * math.pi), 1.0, 2.0, tol=1e-13)
    assert value == pytest.approx(-2.0 / math.pi, abs=1e-12)
    assert value == pytest.approx(spectral_service.kernel_sin(spectral, math.pi), abs=1e-12)


def test_quad_reference_preconditions():
    with pytest.raises(DomainError):
        oracle_service.quad_reference(math.sin, 0.0, math.inf)
    with pytest.raises(DomainError):
        oracle_service.quad_reference(math.sin, 0.0, 1.0, tol=0.0)


def test_quad_reference_gives_up_on_singular_integrand():
    with pytest.raises(ConvergenceError):
        oracle_service.quad_reference(lambda s: 1.0 / math.sqrt(s) if s > 0 else 0.0, 0.0, 1.0,
                                      tol=1e-12, max_level=8)


def test_finite_diff():
    assert oracle_service.finite_diff(lambda t: t * t, 1.0, 1e-4) == pytest.approx(2.0, abs=1e-7)
    # forward difference near the origin
    assert oracle_service.finite_diff(lambda t: t * t, 0.0, 1e-4) == pytest.approx(1e-4)
    slope = oracle_service.finite_diff(lambda t: coefficient_service.delta_gamma_closed(ENV, t), 2.0, 1e-4)
    assert slope == pytest.approx(2e-3, rel=1e-8)
    with pytest.raises(DomainError):
        oracle_service.finite_diff(math.sin, 1.0, 0.0)


def test_noise_block_vanishes_at_zero():
    np.testing.assert_array_equal(oracle_service.propagate_w_matrix(ENV, 0.0), np.zeros((2, 2)))


def test_noise_block_trace_is_diffusion_integral():
    noise = oracle_service.propagate_w_matrix(ENV, 0.5)
    assert 2.0 * np.trace(noise) == pytest.approx(
        2.0 * coefficient_service.delta_gamma(ENV, 0.5, Method.QUADRATURE), rel=0.01)


def test_grid_must_be_dense_enough():
    with pytest.raises(UsageError):
        oracle_service.propagate_w_matrix(ENV, 1.0, grid_n=64)


def test_matrix_propagator_matches_evaluated_blocks():
    tau = 2.0
    state = dynamics_service.make_twb(1.0)
    reference = oracle_service.reconstruct_state(state, ENV, tau)
    evolved = dynamics_service.evolve_cm_full(state, ENV, tau, Method.QUADRATURE)
    np.testing.assert_allclose(evolved.cm, reference.cm, rtol=0.0, atol=1e-6)


def test_report_pass_flag():
    assert OracleReport.compare("x", 1.0, 1.0 + 1e-9, 1e-6).passed
    assert not OracleReport.compare("x", 1.0, 1.1, 1e-6).passed
    assert not OracleReport.compare("x", 1.0, 1.0, 0.0).passed
    report = OracleReport.compare("x", 2.0, 1.0, 1.5, relative=False)
    assert report.abs_dev == 1.0 and report.rel_dev == 1.0 and report.passed


def test_suite_passes_on_default_scenario():
    reports = oracle_service.run_suite(SweepScenario(tau_stop=5.0, tau_steps=11))
    assert reports
    failed = [r.quantity for r in reports if not r.passed]
    assert failed == []


def test_suite_fails_everything_with_zero_tolerance():
    reports = oracle_service.run_suite(SweepScenario(tau_stop=1.0, tau_steps=3), tolerance=0.0)
    assert reports
    assert not any(r.passed for r in reports)


def test_suite_is_deterministic():
    scenario = SweepScenario(tau_stop=1.0, tau_steps=3)
    first = oracle_service.run_suite(scenario)
    second = oracle_service.run_suite(scenario)
    assert first == second
