import math

import numpy as np
import pytest

from bandchannel.errors import DomainError, UnsupportedStateError, UsageError
from bandchannel.schemas import EnvironmentParams, Method, Mode, TwbSpec, TwoModeGaussianState
from bandchannel.services.coefficient_service import coefficient_service
from bandchannel.services.dynamics_service import dynamics_service

ENV = EnvironmentParams.finite_band(1.0, 1.0, 1e-3)


def test_twin_beam_blocks():
    state = dynamics_service.make_twb(TwbSpec(r=1.0))
    a, c = math.cosh(2.0), math.sinh(2.0)
    np.testing.assert_allclose(state.block_a, a * np.eye(2))
    np.testing.assert_allclose(state.block_b, a * np.eye(2))
    np.testing.assert_allclose(state.block_c, np.diag([c, -c]))
    assert state.purity() == pytest.approx(1.0, rel=1e-9)
    assert state.is_psd() and state.satisfies_uncertainty()


def test_twin_beam_rejects_negative_squeezing():
    with pytest.raises(DomainError):
        dynamics_service.make_twb(-0.1)


def test_unphysical_prepared_state_is_rejected():
    with pytest.raises(DomainError):
        TwoModeGaussianState(mean=np.zeros(4), cm=0.5 * np.eye(4), check_physical=True)


def test_wrong_shape_is_unsupported():
    with pytest.raises(UnsupportedStateError):
        TwoModeGaussianState(mean=np.zeros(3), cm=np.eye(3))


def test_zero_time_returns_input():
    state = dynamics_service.make_twb(0.7)
    assert dynamics_service.evolve_cm_full(state, ENV, 0.0) is state
    assert dynamics_service.evolve_cm_secular(state, ENV, 0.0) is state


def test_vacuum_secular_blocks():
    vacuum = dynamics_service.make_twb(0.0)
    evolved = dynamics_service.evolve_cm_secular(vacuum, ENV, 2.0)
    expected = math.exp(-16e-3 / 6.0) + 2e-3
    np.testing.assert_allclose(evolved.block_a, expected * np.eye(2), atol=1e-12)
    np.testing.assert_allclose(evolved.block_c, np.zeros((2, 2)), atol=1e-15)


def test_secular_blocks_for_squeezed_state():
    evolved = dynamics_service.evolve_cm_secular(dynamics_service.make_twb(0.9), ENV, 3.0)
    expected = math.cosh(1.8) * math.exp(-0.0135) + 4.5e-3
    np.testing.assert_allclose(evolved.block_a, expected * np.eye(2), rtol=1e-12)


def test_correlation_block_rotates():
    evolved = dynamics_service.evolve_cm_full(dynamics_service.make_twb(1.0), ENV, 2.0)
    scale = math.sinh(2.0) * math.exp(-16e-3 / 6.0)
    cos4, sin4 = math.cos(4.0), math.sin(4.0)
    np.testing.assert_allclose(evolved.block_c, scale * np.array([[cos4, -sin4], [-sin4, -cos4]]), rtol=1e-12)


def test_full_blocks_carry_secular_terms():
    snap = coefficient_service.snapshot(ENV, 2.0, Method.CLOSED)
    d_co, d_si, p_co, p_si = snap.secular
    evolved = dynamics_service.evolve_cm_full(dynamics_service.make_twb(0.5), ENV, 2.0, snapshot=snap)
    base = math.cosh(1.0) * math.exp(-snap.gamma_int) + snap.delta_gamma
    a = evolved.block_a
    assert a[0, 0] == pytest.approx(base + d_co - p_si, rel=1e-12)
    assert a[1, 1] == pytest.approx(base - d_co + p_si, rel=1e-12)
    assert a[0, 1] == pytest.approx(-(d_si + p_co), rel=1e-12)


def test_secular_equals_full_without_secular_terms():
    state = dynamics_service.make_twb(0.3)
    snap = coefficient_service.snapshot(ENV, 4.0, Method.CLOSED).without_secular()
    full = dynamics_service.evolve_cm_full(state, ENV, 4.0, snapshot=snap)
    secular = dynamics_service.evolve_cm_secular(state, ENV, 4.0)
    np.testing.assert_allclose(full.cm, secular.cm, rtol=1e-14)


@pytest.mark.parametrize("tau", [0.5, 3.0, 7.5, 20.0])
def test_block_structure(tau):
    r = 0.8
    evolved = dynamics_service.evolve_cm_full(dynamics_service.make_twb(r), ENV, tau)
    np.testing.assert_allclose(evolved.block_a, evolved.block_b, atol=1e-12)
    gamma = coefficient_service.gamma_int(ENV, tau)
    expected_norm = math.sinh(2 * r) * math.exp(-gamma) * math.sqrt(2.0)
    assert np.linalg.norm(evolved.block_c) == pytest.approx(expected_norm, rel=1e-12)


@pytest.mark.parametrize("r, j0_delta, omega_lo", [
    (2.0, 0.01, 1.0), (1.0, 0.01, 1.0), (0.1, 0.01, 1.0),
    (1.0, 1e-3, 1.0), (1.0, 0.1, 1.0),
    (1.0, 0.01, 10.0), (1.0, 0.01, 0.1),
])
def test_secular_channel_stays_physical(r, j0_delta, omega_lo):
    env = EnvironmentParams.finite_band(1.0, omega_lo, j0_delta)
    initial = dynamics_service.make_twb(r)
    for tau in np.linspace(0.0, 30.0, 31):
        evolved = dynamics_service.evolve_cm_secular(initial, env, float(tau))
        gamma = coefficient_service.gamma_int(env, float(tau))
        assert evolved.is_psd()
        assert np.linalg.det(evolved.cm) >= np.linalg.det(initial.cm) * math.exp(-4.0 * gamma) * (1 - 1e-9)


def test_rotated_correlations_are_rejected():
    evolved = dynamics_service.evolve_cm_full(dynamics_service.make_twb(1.0), ENV, 1.0)
    with pytest.raises(UnsupportedStateError):
        dynamics_service.evolve_cm_full(evolved, ENV, 1.0)


def test_asymmetric_state_is_rejected():
    cm = np.diag([2.0, 2.0, 1.0, 1.0])
    with pytest.raises(UnsupportedStateError):
        dynamics_service.evolve_cm_secular(TwoModeGaussianState(mean=np.zeros(4), cm=cm), ENV, 1.0)


def test_propagate_rotates_and_damps_the_mean():
    state = dynamics_service.make_twb(0.5)
    displaced = TwoModeGaussianState(mean=np.array([1.0, 0.0, 0.0, 2.0]), cm=state.cm)
    evolved = dynamics_service.propagate(displaced, ENV, 2.0, mode=Mode.SECULAR)
    damping = math.exp(-0.5 * 16e-3 / 6.0)
    expected = damping * np.array([math.cos(2.0), -math.sin(2.0), 2.0 * math.sin(2.0), 2.0 * math.cos(2.0)])
    np.testing.assert_allclose(evolved.mean, expected, rtol=1e-12)
    np.testing.assert_allclose(evolved.cm, dynamics_service.evolve_cm_secular(state, ENV, 2.0).cm)


def test_propagate_needs_a_single_mode():
    with pytest.raises(UsageError):
        dynamics_service.propagate(dynamics_service.make_twb(0.5), ENV, 1.0, mode=Mode.BOTH)
