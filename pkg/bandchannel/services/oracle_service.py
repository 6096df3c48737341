"""
Independent reference paths for the channel library.

Nothing here calls the adaptive QUADPACK integrator the primary path is built on:
integrals use doubling composite Simpson grids, the matrix propagator is integrated
on a fixed grid, and symplectic spectra come from eigen-decomposition.
"""
import logging
import math
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from ..errors import ConvergenceError, DomainError, NumericDomainError, UsageError
from ..schemas import EnvironmentParams, Method, OracleReport, SweepScenario, TwoModeGaussianState
from .coefficient_service import coefficient_service
from .dynamics_service import dynamics_service
from .entanglement_service import entanglement_service
from .spectral_service import spectral_service

logger = logging.getLogger(__name__)

MIN_GRID = 256

# Base tolerances of the verification suite, multiplied by tolerance_scale
KERNEL_TOL = 1e-9
PROPAGATOR_TOL = 1e-6
KAPPA_TOL = 1e-8
DERIVATIVE_TOL = 1e-4


class OracleService:
    def quad_reference(self, f: Callable[[float], float], a: float, b: float,
                       tol: float = 1e-10, max_level: int = 16) -> float:
        """Composite Simpson on 2^k intervals, doubled until the Richardson estimate is below tol."""
        if not (math.isfinite(a) and math.isfinite(b)):
            raise DomainError("quad_reference needs finite bounds")
        if not tol > 0:
            raise DomainError(f"tol must be > 0, got {tol}")
        if a == b:
            return 0.0
        values = np.vectorize(f, otypes=[float])
        previous = None
        for level in range(4, max_level + 1):
            grid = np.linspace(a, b, 2 ** level + 1)
            current = float(simpson(values(grid), x=grid))
            if previous is not None:
                error = abs(current - previous) / 15.0
                if error <= tol:
                    return current + (current - previous) / 15.0
            previous = current
        raise ConvergenceError(f"Simpson refinement did not reach tol={tol} with 2^{max_level} intervals")

    def finite_diff(self, f: Callable[[float], float], tau: float, h: float = 1e-4) -> float:
        if not h > 0:
            raise DomainError(f"h must be > 0, got {h}")
        if tau - h < 0:
            return (f(tau + h) - f(tau)) / h
        return (f(tau + h) - f(tau - h)) / (2.0 * h)

    def propagate_w_matrix(self, env: EnvironmentParams, tau: float, grid_n: int = 1024) -> np.ndarray:
        """Noise block W = e^{-Gamma} R (int e^{Gamma} R^T M R ds) R^T integrated on a fixed grid."""
        return self._propagator(env, tau, grid_n)[0]

    def reconstruct_state(self, state: TwoModeGaussianState, env: EnvironmentParams,
                          tau: float, grid_n: int = 1024) -> TwoModeGaussianState:
        """sigma_t = e^{-Gamma} (R + R) sigma_0 (R + R)^T + 2 (W + W) from the grid propagator."""
        noise, big_gamma = self._propagator(env, tau, grid_n)
        rot = dynamics_service.rotation(tau)
        both = np.kron(np.eye(2), rot)
        cm = math.exp(-big_gamma) * both @ state.cm @ both.T + 2.0 * np.kron(np.eye(2), noise)
        return TwoModeGaussianState(mean=state.mean, cm=cm)

    def _propagator(self, env: EnvironmentParams, tau: float, grid_n: int) -> tuple[np.ndarray, float]:
        if grid_n < MIN_GRID:
            raise UsageError(f"grid_n must be >= {MIN_GRID}, got {grid_n}", field="grid_n")
        if tau < 0:
            raise DomainError(f"tau must be >= 0, got {tau}")
        if tau == 0:
            return np.zeros((2, 2)), 0.0

        s = np.linspace(0.0, tau, grid_n + 1)
        k_sin = np.array([spectral_service.kernel_sin(env.spectral, x) for x in s])
        k_cos = np.array([spectral_service.kernel_cos_thermal(env.spectral, x, env.thermal_beta) for x in s])
        gamma = cumulative_simpson(np.sin(s) * k_sin, x=s, initial=0.0)
        diffusion = cumulative_simpson(np.cos(s) * k_cos, x=s, initial=0.0)
        anomalous = cumulative_simpson(np.sin(s) * k_cos, x=s, initial=0.0)
        big_gamma = 2.0 * cumulative_simpson(gamma, x=s, initial=0.0)

        # R(tau - s) M(s) R(tau - s)^T, M = [[Delta, -Pi/2], [-Pi/2, 0]]
        u = tau - s
        cos, sin = np.cos(u), np.sin(u)
        weight = np.exp(big_gamma - big_gamma[-1])
        m11, m12 = diffusion, -0.5 * anomalous
        w11 = cos * cos * m11 + 2.0 * cos * sin * m12
        w12 = -cos * sin * m11 + (cos * cos - sin * sin) * m12
        w22 = sin * sin * m11 - 2.0 * cos * sin * m12
        entries = [float(simpson(weight * w, x=s)) for w in (w11, w12, w22)]
        noise = np.array([[entries[0], entries[1]], [entries[1], entries[2]]])
        return noise, float(big_gamma[-1])

    # ---- verification suite ----

    def run_suite(self, scenario: SweepScenario, tolerance_scale: float = 1.0,
                  tolerance: Optional[float] = None) -> list[OracleReport]:
        """
        Cross-check the primary path against the reference paths for the first
        environment and squeezing value of the scenario.

        ``tolerance`` replaces every per-check tolerance when given.
        """
        env = next(iter(scenario.environments()))
        r = sorted(scenario.r_values)[0]
        checkpoints = sorted({min(scenario.tau_stop, t) for t in (0.5, 2.0)})
        tol = (lambda base: tolerance) if tolerance is not None else (lambda base: base * tolerance_scale)
        logger.info("oracle suite: %s, r=%g, checkpoints %s", env.spectral, r, checkpoints)

        reports = []
        reports += self._kernel_checks(env, tol(KERNEL_TOL))
        twb = dynamics_service.make_twb(r)
        for tau in checkpoints:
            reports += self._propagator_checks(env, twb, tau, tol(PROPAGATOR_TOL))
            reports += self._kappa_checks(env, twb, tau, tol(KAPPA_TOL))
            reports.append(self._derivative_check(env, tau, tol(DERIVATIVE_TOL)))

        failed = [report.quantity for report in reports if not report.passed]
        logger.info("oracle suite: %d checks, %d failed", len(reports), len(failed))
        for name in failed:
            logger.warning("oracle check failed: %s", name)
        return reports

    def _kernel_checks(self, env: EnvironmentParams, tol: float) -> list[OracleReport]:
        j = env.spectral
        beta = env.thermal_beta
        if beta is None:
            cos_weight = lambda w: j.j0
        else:
            cos_weight = lambda w: j.j0 / math.tanh(0.5 * beta * w)
        scale = tol * max(1.0, j.j0_delta)
        reports = []
        for s in (0.5, 1.0, 2.0):
            reference = self.quad_reference(lambda w: j.j0 * math.sin(w * s), j.omega_lo, j.omega_hi, tol=1e-13)
            reports.append(OracleReport.compare(
                f"kernel_sin(s={s:g})", spectral_service.kernel_sin(j, s), reference, scale, relative=False))
            reference = self.quad_reference(lambda w: cos_weight(w) * math.cos(w * s), j.omega_lo, j.omega_hi,
                                            tol=1e-13)
            reports.append(OracleReport.compare(
                f"kernel_cos(s={s:g})", spectral_service.kernel_cos_thermal(j, s, beta), reference, scale,
                relative=False))
        return reports

    def _propagator_checks(self, env, twb, tau, tol) -> list[OracleReport]:
        oracle = self.reconstruct_state(twb, env, tau)
        primary = dynamics_service.evolve_cm_full(twb, env, tau, Method.QUADRATURE)
        deviation = np.abs(primary.cm - oracle.cm)
        i, k = np.unravel_index(int(np.argmax(deviation)), deviation.shape)
        noise = self.propagate_w_matrix(env, tau)
        delta_gamma = coefficient_service.delta_gamma(env, tau, Method.QUADRATURE)
        return [
            OracleReport.compare(f"cm[{i},{k}](tau={tau:g})", float(primary.cm[i, k]), float(oracle.cm[i, k]),
                                 tol, relative=False),
            OracleReport.compare(f"trace_noise(tau={tau:g})", 2.0 * delta_gamma, float(2.0 * np.trace(noise)),
                                 tol),
        ]

    def _kappa_checks(self, env, twb, tau, tol) -> list[OracleReport]:
        reports = []
        evolve = {"secular": dynamics_service.evolve_cm_secular, "full": dynamics_service.evolve_cm_full}
        for label, step in evolve.items():
            state = step(twb, env, tau, Method.CLOSED)
            oracle = entanglement_service.nu_min_pt(state)
            try:
                primary = entanglement_service.kappa_symmetric(entanglement_service.invariants(state)) / math.sqrt(2.0)
            except NumericDomainError as exc:
                logger.warning("kappa from invariants failed at tau=%g (%s): %s", tau, label, exc)
                primary = float("nan")
            reports.append(OracleReport.compare(f"nu_min_{label}(tau={tau:g})", primary, oracle, tol))
        return reports

    def _derivative_check(self, env, tau, tol) -> OracleReport:
        slope = self.finite_diff(lambda t: coefficient_service.gamma_int(env, t, Method.QUADRATURE), tau, h=1e-3)
        return OracleReport.compare(f"dGamma/dtau(tau={tau:g})", slope,
                                    2.0 * coefficient_service.gamma_quad(env, tau), tol)


oracle_service = OracleService()
