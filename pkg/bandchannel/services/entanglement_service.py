import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import bisect

from ..config import get_settings
from ..errors import ConvergenceError, DomainError, NumericDomainError, UnsupportedStateError, UsageError
from ..schemas import (
    CoefficientTrace, DeathSource, EnvironmentParams, KappaSource, Method, Mode,
    SuddenDeathResult, SymplecticInvariants, TwoModeGaussianState, symplectic_form,
)
from .coefficient_service import coefficient_service
from .dynamics_service import dynamics_service

logger = logging.getLogger(__name__)

# Partial transposition: p2 -> -p2
PARTIAL_TRANSPOSE = np.diag([1.0, 1.0, 1.0, -1.0])


class EntanglementService:
    def invariants(self, state: TwoModeGaussianState, tol: float = 1e-12) -> SymplecticInvariants:
        cm = state.cm
        scale = max(1.0, float(np.max(np.abs(cm))))
        if np.max(np.abs(state.block_a - state.block_b)) > tol * scale:
            raise UnsupportedStateError("invariants need identical diagonal blocks (symmetric state)")
        return SymplecticInvariants(
            i1=float(np.linalg.det(state.block_a)),
            i3=float(np.linalg.det(state.block_c)),
            i4=float(np.linalg.det(cm)),
        )

    def kappa_symmetric(self, inv: SymplecticInvariants) -> float:
        """sqrt(2) * sqrt(I1 - I3 - sqrt((I1 - I3)^2 - I4))."""
        floor = get_settings().radicand_floor
        x = inv.i1 - inv.i3
        disc = x * x - inv.i4
        if disc < 0:
            if disc < floor * max(1.0, x * x):
                raise NumericDomainError(f"(I1 - I3)^2 - I4 = {disc:.3e} < 0: unphysical invariants")
            disc = 0.0
        root = math.sqrt(disc)
        # x - root rewritten as I4 / (x + root) when that avoids cancellation
        radicand = inv.i4 / (x + root) if x + root > 0 else x - root
        if radicand < 0:
            if radicand < floor:
                raise NumericDomainError(f"kappa radicand {radicand:.3e} < 0: unphysical invariants")
            radicand = 0.0
        return math.sqrt(2.0) * math.sqrt(radicand)

    def kappa_secular_closed(self, r: float, j0_delta: float, omega_lo: float, tau: float) -> float:
        """1/2 (tau^2 J0 delta + exp(-2 r - tau^4 J0 delta Omega / 6)), as published."""
        for name, value in (("r", r), ("j0_delta", j0_delta), ("omega_lo", omega_lo), ("tau", tau)):
            if value < 0:
                raise DomainError(f"{name} must be >= 0, got {value}")
        return 0.5 * (tau * tau * j0_delta + math.exp(-2.0 * r - tau ** 4 * j0_delta * omega_lo / 6.0))

    def nu_min_pt(self, state: TwoModeGaussianState) -> float:
        """Smallest symplectic eigenvalue of the partially transposed state (vacuum = 1)."""
        transposed = PARTIAL_TRANSPOSE @ state.cm @ PARTIAL_TRANSPOSE
        try:
            eigenvalues = np.linalg.eigvals(1j * symplectic_form() @ transposed)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"eigen-decomposition failed: {exc}") from exc
        return float(np.min(np.abs(eigenvalues)))

    def negativity(self, kappa: float) -> float:
        """E_N = max(0, -2 ln kappa)."""
        if not kappa > 0:
            raise DomainError(f"kappa must be > 0, got {kappa}")
        return max(0.0, -2.0 * math.log(kappa))

    def kappa_series(self, r: float, env: EnvironmentParams, tau_grid: Sequence[float],
                     source: KappaSource | str = KappaSource.CLOSED_FORM, mode: Mode | str = Mode.FULL,
                     method: Method | str = Method.CLOSED,
                     trace: Optional[CoefficientTrace] = None, strict: bool = True) -> np.ndarray:
        """kappa along a grid; with strict=False unphysical points become nan instead of raising."""
        source, mode = KappaSource(source), Mode(mode)
        taus = [float(t) for t in tau_grid]
        if source is KappaSource.CLOSED_FORM:
            j = env.spectral
            return np.array([self.kappa_secular_closed(r, j.j0_delta, j.omega_lo, t) for t in taus])
        if mode is Mode.BOTH:
            raise UsageError("kappa_series needs a single mode (secular or full)", field="mode")
        if trace is None:
            trace = coefficient_service.trace(env, taus, method)
        initial = dynamics_service.make_twb(r)
        values = []
        for index in range(len(taus)):
            snap = trace.snapshot(index)
            if mode is Mode.SECULAR:
                snap = snap.without_secular()
            state = dynamics_service.evolve_cm_full(initial, env, snap.tau, snapshot=snap)
            if source is not KappaSource.SYMMETRIC:
                values.append(self.nu_min_pt(state))
                continue
            try:
                values.append(self.kappa_symmetric(self.invariants(state)))
            except NumericDomainError as exc:
                if strict:
                    raise
                logger.warning("kappa undefined at tau=%g (r=%g, %s): %s", snap.tau, r, mode.value, exc)
                values.append(float("nan"))
        return np.array(values)

    def negativity_series(self, kappas: Sequence[float]) -> np.ndarray:
        """E_N per kappa; nan passes through."""
        return np.array([float("nan") if math.isnan(k) else self.negativity(k) for k in kappas])

    def revival_intervals(self, tau_grid: Sequence[float], en: Sequence[float]) -> list[tuple[float, float]]:
        """Maximal sub-intervals of the grid on which E_N strictly increases."""
        taus = np.asarray(tau_grid, dtype=float)
        rising = np.diff(np.asarray(en, dtype=float)) > 0
        intervals = []
        start = None
        for k, up in enumerate(rising):
            if up and start is None:
                start = k
            elif not up and start is not None:
                intervals.append((float(taus[start]), float(taus[k])))
                start = None
        if start is not None:
            intervals.append((float(taus[start]), float(taus[-1])))
        return intervals

    def sudden_death_time(self, r: float, j0_delta: float, omega_lo: float,
                          source: DeathSource | str = DeathSource.SECULAR,
                          tau_max: Optional[float] = None,
                          method: Method | str = Method.CLOSED,
                          scan_points: Optional[int] = None,
                          beta: Optional[float] = None) -> SuddenDeathResult:
        """
        Last time kappa crosses 1 from below while staying >= 1 up to tau_max.

        The grid scan brackets the crossing; bisection refines it to the configured xtol.
        The full and symmetric sources evolve the twin beam in a band at inverse
        temperature beta (low-T when None); the secular closed form is low-T only.
        """
        settings = get_settings()
        source = DeathSource(source)
        tau_max = settings.sudden_death_horizon if tau_max is None else tau_max
        if j0_delta < 0 or r < 0 or omega_lo < 0:
            raise DomainError("r, j0_delta and omega_lo must be >= 0")
        if j0_delta == 0:
            return SuddenDeathResult(tau_sd=None, source=source, tau_max=tau_max)

        if source is DeathSource.SECULAR:
            kappa = lambda t: self.kappa_secular_closed(r, j0_delta, omega_lo, t)
            points = scan_points or settings.sudden_death_scan_points
        else:
            env = EnvironmentParams.finite_band(1.0, omega_lo, j0_delta, beta=beta)
            initial = dynamics_service.make_twb(r)
            evolve = lambda t: dynamics_service.evolve_cm_full(initial, env, t, method)
            if source is DeathSource.FULL:
                kappa = lambda t: self.nu_min_pt(evolve(t))
            else:
                kappa = lambda t: self._kappa_or_nan(evolve(t))
            points = scan_points or settings.sudden_death_scan_points_full

        grid = np.linspace(0.0, tau_max, points)
        below = np.array([kappa(t) < 1.0 for t in grid])
        if not below.any() or below[-1]:
            return SuddenDeathResult(tau_sd=None, source=source, tau_max=tau_max)
        last = int(np.nonzero(below)[0][-1])
        if not kappa(grid[last + 1]) >= 1.0:
            raise ConvergenceError(f"kappa undefined next to the crossing at tau={grid[last + 1]:g}")
        tau_sd = bisect(lambda t: kappa(t) - 1.0, grid[last], grid[last + 1],
                        xtol=settings.sudden_death_xtol)
        logger.debug("sudden death at tau=%.6f (r=%g, J0*delta=%g, Omega=%g, %s)",
                     tau_sd, r, j0_delta, omega_lo, source.value)
        return SuddenDeathResult(tau_sd=float(tau_sd), source=source, tau_max=tau_max)

    def _kappa_or_nan(self, state: TwoModeGaussianState) -> float:
        # nan never counts as below threshold in the scan
        try:
            return self.kappa_symmetric(self.invariants(state))
        except NumericDomainError:
            return float("nan")


entanglement_service = EntanglementService()
