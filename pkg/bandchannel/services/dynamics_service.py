import logging
import math

import numpy as np

from ..errors import DomainError, UnsupportedStateError, UsageError
from ..schemas import (
    ChannelSnapshot, EnvironmentParams, Method, Mode, TwbSpec, TwoModeGaussianState, build,
)
from .coefficient_service import coefficient_service

logger = logging.getLogger(__name__)


class DynamicsService:
    """
    Propagation of symmetric two-mode Gaussian states through two identical,
    independent finite-band channels.

    sigma_t = e^{-Gamma} (R + R) sigma_0 (R + R)^T + 2 (W + W), evaluated blockwise:
      A_t = a e^{-Gamma} I + [[D + (Dco - Psi), -(Dsi + Pco)], [-(Dsi + Pco), D - (Dco - Psi)]]
      C_t = c e^{-Gamma} [[cos 2t, -sin 2t], [-sin 2t, -cos 2t]]
    """

    def make_twb(self, spec: TwbSpec | float) -> TwoModeGaussianState:
        if not isinstance(spec, TwbSpec):
            spec = build(TwbSpec, r=spec)
        a = math.cosh(2.0 * spec.r)
        c = math.sinh(2.0 * spec.r)
        cm = np.zeros((4, 4))
        cm[:2, :2] = a * np.eye(2)
        cm[2:, 2:] = a * np.eye(2)
        cm[:2, 2:] = np.diag([c, -c])
        cm[2:, :2] = np.diag([c, -c])
        return TwoModeGaussianState(mean=np.zeros(4), cm=cm, check_physical=True)

    def rotation(self, tau: float) -> np.ndarray:
        cos, sin = math.cos(tau), math.sin(tau)
        return np.array([[cos, sin], [-sin, cos]])

    def evolve_mean(self, state: TwoModeGaussianState, snapshot: ChannelSnapshot) -> np.ndarray:
        if snapshot.gamma_int < -1e-12:
            raise DomainError(f"integrated damping must be >= 0, got {snapshot.gamma_int}")
        rot = self.rotation(snapshot.angle)
        both = np.block([[rot, np.zeros((2, 2))], [np.zeros((2, 2)), rot]])
        return math.exp(-0.5 * snapshot.gamma_int) * both @ state.mean

    def evolve_cm_full(self, state: TwoModeGaussianState, env: EnvironmentParams, tau: float,
                       method: Method | str = Method.CLOSED,
                       snapshot: ChannelSnapshot | None = None) -> TwoModeGaussianState:
        if snapshot is None:
            snapshot = coefficient_service.snapshot(env, tau, method)
        return self._apply(state, snapshot)

    def evolve_cm_secular(self, state: TwoModeGaussianState, env: EnvironmentParams, tau: float,
                          method: Method | str = Method.CLOSED,
                          snapshot: ChannelSnapshot | None = None) -> TwoModeGaussianState:
        if snapshot is None:
            snapshot = coefficient_service.snapshot(env, tau, method, secular=False)
        return self._apply(state, snapshot.without_secular())

    def propagate(self, state: TwoModeGaussianState, env: EnvironmentParams, tau: float,
                  method: Method | str = Method.CLOSED, mode: Mode | str = Mode.FULL,
                  snapshot: ChannelSnapshot | None = None) -> TwoModeGaussianState:
        """Mean and covariance at tau in one step."""
        mode = Mode(mode)
        if mode is Mode.BOTH:
            raise UsageError("propagate needs a single mode (secular or full)", field="mode")
        if snapshot is None:
            snapshot = coefficient_service.snapshot(env, tau, method, secular=mode is Mode.FULL)
        if mode is Mode.SECULAR:
            snapshot = snapshot.without_secular()
        evolved = self._apply(state, snapshot)
        return TwoModeGaussianState(mean=self.evolve_mean(state, snapshot), cm=evolved.cm)

    def twb_parameters(self, state: TwoModeGaussianState, tol: float = 1e-12) -> tuple[float, float]:
        """(a, c) of a state with A = B = a I and C = diag(c, -c); anything else is rejected."""
        cm = state.cm
        scale = max(1.0, float(np.max(np.abs(cm))))
        a = cm[0, 0]
        c = cm[0, 2]
        expected = np.zeros((4, 4))
        expected[:2, :2] = expected[2:, 2:] = a * np.eye(2)
        expected[:2, 2:] = expected[2:, :2] = np.diag([c, -c])
        if np.max(np.abs(cm - expected)) > tol * scale:
            raise UnsupportedStateError(
                "channel formulas need A = B = a*I and C = diag(c, -c)"
            )
        return float(a), float(c)

    def _apply(self, state: TwoModeGaussianState, snap: ChannelSnapshot) -> TwoModeGaussianState:
        a, c = self.twb_parameters(state)
        if snap.tau == 0:
            return state
        damping = math.exp(-snap.gamma_int)
        d_co, d_si, p_co, p_si = snap.secular
        diag_shift = d_co - p_si
        off = -(d_si + p_co)
        block_a = np.array([
            [a * damping + snap.delta_gamma + diag_shift, off],
            [off, a * damping + snap.delta_gamma - diag_shift],
        ])
        cos2, sin2 = math.cos(2.0 * snap.tau), math.sin(2.0 * snap.tau)
        block_c = c * damping * np.array([[cos2, -sin2], [-sin2, -cos2]])
        cm = np.block([[block_a, block_c], [block_c.T, block_a]])
        return TwoModeGaussianState(mean=state.mean, cm=cm)


dynamics_service = DynamicsService()
