import logging
import math
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson, quad
from scipy.interpolate import CubicSpline
from scipy.optimize import bisect

from ..config import get_settings
from ..errors import DomainError, UsageError
from ..schemas import ChannelSnapshot, CoefficientTrace, EnvironmentParams, Method
from .spectral_service import spectral_service

logger = logging.getLogger(__name__)

# Weights exp(Gamma(s) - Gamma(tau)) below exp(-WINDOW) are dropped from the nested integrals
WINDOW = 40.0


class CoefficientProfile:
    """
    gamma, Delta, Pi and Gamma tabulated on [0, tau_end] and interpolated with cubic splines.

    gamma, Delta and Pi are accumulated interval by interval with adaptive quadrature;
    Gamma = 2 * int gamma is then integrated with Simpson's rule on the same grid.
    """

    def __init__(self, env: EnvironmentParams, tau_end: float):
        settings = get_settings()
        self.env = env
        self.tau_end = tau_end
        self.grid = np.linspace(0.0, tau_end, settings.profile_intervals + 1)

        gamma = np.zeros_like(self.grid)
        delta = np.zeros_like(self.grid)
        pi = np.zeros_like(self.grid)
        for k in range(1, len(self.grid)):
            a, b = self.grid[k - 1], self.grid[k]
            gamma[k] = gamma[k - 1] + coefficient_service._integrate(
                lambda s: math.sin(s) * spectral_service.kernel_sin(env.spectral, s), a, b)
            delta[k] = delta[k - 1] + coefficient_service._integrate(
                lambda s: math.cos(s) * coefficient_service._kernel_cos(env, s), a, b)
            pi[k] = pi[k - 1] + coefficient_service._integrate(
                lambda s: math.sin(s) * coefficient_service._kernel_cos(env, s), a, b)
        gamma_int = 2.0 * cumulative_simpson(gamma, x=self.grid, initial=0.0)

        self.gamma = CubicSpline(self.grid, gamma)
        self.delta = CubicSpline(self.grid, delta)
        self.pi = CubicSpline(self.grid, pi)
        self.gamma_int = CubicSpline(self.grid, gamma_int)
        logger.debug("built coefficient profile up to tau=%g on %d points", tau_end, len(self.grid))

    def covers(self, tau: float) -> bool:
        return tau <= self.tau_end


class CoefficientService:
    # ---- leading-order short-time closed forms (low temperature) ----

    def gamma_closed(self, env: EnvironmentParams, tau: float) -> float:
        j = env.spectral
        return j.j0_delta * j.omega_lo * tau ** 3 / 3.0

    def delta_closed(self, env: EnvironmentParams, tau: float) -> float:
        return env.spectral.j0_delta * tau

    def pi_closed(self, env: EnvironmentParams, tau: float) -> float:
        return 0.5 * env.spectral.j0_delta * tau ** 2

    def r_closed(self, env: EnvironmentParams, tau: float) -> float:
        j = env.spectral
        return 0.5 * j.j0_delta * j.omega_lo * tau ** 2

    def gamma_int_closed(self, env: EnvironmentParams, tau: float) -> float:
        j = env.spectral
        return j.j0_delta * j.omega_lo * tau ** 4 / 6.0

    def delta_gamma_closed(self, env: EnvironmentParams, tau: float) -> float:
        return 0.5 * env.spectral.j0_delta * tau ** 2

    # ---- second-order coefficients by quadrature ----

    @lru_cache(maxsize=65536)
    def gamma_quad(self, env: EnvironmentParams, tau: float) -> float:
        self._check_tau(tau)
        return self._integrate(lambda s: math.sin(s) * spectral_service.kernel_sin(env.spectral, s), 0.0, tau)

    @lru_cache(maxsize=65536)
    def delta_quad(self, env: EnvironmentParams, tau: float) -> float:
        self._check_tau(tau)
        return self._integrate(lambda s: math.cos(s) * self._kernel_cos(env, s), 0.0, tau)

    @lru_cache(maxsize=65536)
    def pi_quad(self, env: EnvironmentParams, tau: float) -> float:
        self._check_tau(tau)
        return self._integrate(lambda s: math.sin(s) * self._kernel_cos(env, s), 0.0, tau)

    @lru_cache(maxsize=65536)
    def r_quad(self, env: EnvironmentParams, tau: float) -> float:
        """Energy shift r(tau). Diagnostic only: the propagation uses a pure rotation."""
        self._check_tau(tau)
        return self._integrate(lambda s: math.cos(s) * spectral_service.kernel_sin(env.spectral, s), 0.0, tau)

    # ---- time-integrated functions ----

    def gamma_int(self, env: EnvironmentParams, tau: float, method: Method | str = Method.CLOSED) -> float:
        method = Method.parse(method)
        self._check_tau(tau)
        if method is Method.CLOSED:
            return self.gamma_int_closed(env, tau)
        return 2.0 * self._integrate(lambda s: self.gamma_quad(env, s), 0.0, tau)

    def delta_gamma(self, env: EnvironmentParams, tau: float, method: Method | str = Method.CLOSED,
                    profile: CoefficientProfile | None = None) -> float:
        method = Method.parse(method)
        self._check_tau(tau)
        if method is Method.CLOSED:
            return self.delta_gamma_closed(env, tau)
        if tau == 0:
            return 0.0
        profile = self._profile_for(env, tau, profile)
        return self._weighted(profile.gamma_int, profile.delta, tau, lambda u: 1.0)

    def secular_coeffs(self, env: EnvironmentParams, tau: float, method: Method | str = Method.CLOSED,
                       profile: CoefficientProfile | None = None) -> tuple[float, float, float, float]:
        """(Delta_co, Delta_si, Pi_co, Pi_si) at tau."""
        method = Method.parse(method)
        self._check_tau(tau)
        if tau == 0:
            return (0.0, 0.0, 0.0, 0.0)
        if method is Method.CLOSED:
            big_gamma = lambda s: self.gamma_int_closed(env, s)
            diffusion = lambda s: self.delta_closed(env, s)
            anomalous = lambda s: self.pi_closed(env, s)
        else:
            profile = self._profile_for(env, tau, profile)
            big_gamma, diffusion, anomalous = profile.gamma_int, profile.delta, profile.pi
        cos2 = lambda u: math.cos(2.0 * u)
        sin2 = lambda u: math.sin(2.0 * u)
        return (
            self._weighted(big_gamma, diffusion, tau, cos2),
            self._weighted(big_gamma, diffusion, tau, sin2),
            self._weighted(big_gamma, anomalous, tau, cos2),
            self._weighted(big_gamma, anomalous, tau, sin2),
        )

    # ---- bundles ----

    def snapshot(self, env: EnvironmentParams, tau: float, method: Method | str = Method.CLOSED,
                 secular: bool = True, profile: CoefficientProfile | None = None) -> ChannelSnapshot:
        method = Method.parse(method)
        self._check_tau(tau)
        if tau == 0:
            return ChannelSnapshot(tau=0.0, gamma_int=0.0, delta_gamma=0.0, method=method)
        if method is Method.QUADRATURE:
            profile = self._profile_for(env, tau, profile)
            big_gamma = float(profile.gamma_int(tau))
        else:
            big_gamma = self.gamma_int_closed(env, tau)
        terms = self.secular_coeffs(env, tau, method, profile) if secular else (0.0, 0.0, 0.0, 0.0)
        return ChannelSnapshot(
            tau=tau,
            gamma_int=big_gamma,
            delta_gamma=self.delta_gamma(env, tau, method, profile),
            sec_delta_co=terms[0], sec_delta_si=terms[1], sec_pi_co=terms[2], sec_pi_si=terms[3],
            method=method,
        )

    def trace(self, env: EnvironmentParams, tau_grid: Sequence[float],
              method: Method | str = Method.CLOSED) -> CoefficientTrace:
        method = Method.parse(method)
        taus = [float(t) for t in tau_grid]
        if not taus:
            raise UsageError("tau grid is empty", field="tau_grid")
        for tau in taus:
            self._check_tau(tau)

        profile = None
        if method is Method.QUADRATURE and max(taus) > 0:
            profile = self.profile(env, max(taus))

        columns = {name: [] for name in CoefficientTrace.columns()}
        for tau in taus:
            if method is Method.CLOSED:
                local = (self.gamma_closed(env, tau), self.delta_closed(env, tau),
                         self.pi_closed(env, tau), self.r_closed(env, tau))
            else:
                local = (self.gamma_quad(env, tau), self.delta_quad(env, tau),
                         self.pi_quad(env, tau), self.r_quad(env, tau))
            snap = self.snapshot(env, tau, method, profile=profile)
            values = (*local, snap.gamma_int, snap.delta_gamma, *snap.secular)
            for name, value in zip(CoefficientTrace.columns(), values):
                columns[name].append(value)
        return CoefficientTrace(tau_grid=taus, method=method, **columns)

    @lru_cache(maxsize=64)
    def profile(self, env: EnvironmentParams, tau_end: float) -> CoefficientProfile:
        return CoefficientProfile(env, tau_end)

    # ---- helpers ----

    def _profile_for(self, env, tau, profile):
        if profile is not None and profile.env == env and profile.covers(tau):
            return profile
        return self.profile(env, tau)

    def _kernel_cos(self, env: EnvironmentParams, s: float) -> float:
        return spectral_service.kernel_cos_thermal(env.spectral, s, env.thermal_beta)

    def _weighted(self, big_gamma: Callable[[float], float], x: Callable[[float], float],
                  tau: float, trig: Callable[[float], float]) -> float:
        """exp(-Gamma(tau)) * int_0^tau exp(Gamma(s)) x(s) trig(tau - s) ds."""
        if tau == 0:
            return 0.0
        g_tau = float(big_gamma(tau))
        start = self._window_start(big_gamma, tau, g_tau)
        integrand = lambda s: math.exp(float(big_gamma(s)) - g_tau) * float(x(s)) * trig(tau - s)
        return self._integrate(integrand, start, tau)

    def _window_start(self, big_gamma, tau: float, g_tau: float) -> float:
        """Lower limit below which exp(Gamma(s) - Gamma(tau)) < exp(-WINDOW)."""
        excess = lambda s: g_tau - float(big_gamma(s)) - WINDOW
        if excess(0.0) <= 0:
            return 0.0
        return bisect(excess, 0.0, tau, xtol=1e-12 * max(1.0, tau))

    @staticmethod
    def _integrate(f: Callable[[float], float], a: float, b: float) -> float:
        if b <= a:
            return 0.0
        settings = get_settings()
        value, _ = quad(f, a, b, epsabs=settings.quad_epsabs, epsrel=settings.quad_epsrel,
                        limit=settings.quad_limit)
        return value

    @staticmethod
    def _check_tau(tau: float) -> None:
        if tau < 0:
            raise DomainError(f"tau must be >= 0, got {tau}")


coefficient_service = CoefficientService()
