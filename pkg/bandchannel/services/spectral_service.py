import logging
import math
from typing import Optional

import numpy as np
from scipy.integrate import quad

from ..config import get_settings
from ..errors import DomainError
from ..schemas import SpectralDensity

logger = logging.getLogger(__name__)


class SpectralService:
    """
    Band-limited spectral densities and the inner omega-integrals of the
    master-equation coefficients.

    Closed forms use the product identities
        cos(a) - cos(b) = 2 sin((a+b)/2) sin((b-a)/2)
        sin(b) - sin(a) = 2 cos((a+b)/2) sin((b-a)/2)
    so narrow bands (delta ~ 1e-4) keep full precision.
    """

    def evaluate(self, spectral: SpectralDensity, omega):
        omega_arr = np.asarray(omega, dtype=float)
        if np.any(omega_arr < 0):
            raise DomainError(f"frequency must be >= 0, got {omega}")
        inside = (omega_arr >= spectral.omega_lo) & (omega_arr < spectral.omega_hi)
        values = np.where(inside, spectral.j0, 0.0)
        return float(values) if values.ndim == 0 else values

    def thermal_occupation(self, omega: float, beta: float) -> float:
        """Mean thermal photon number 1 / (exp(beta*omega) - 1)."""
        self._check_beta(beta)
        if omega <= 0:
            raise DomainError(f"thermal occupation needs omega > 0, got {omega}")
        return 1.0 / math.expm1(beta * omega)

    def coth_factor(self, omega: float, beta: float) -> float:
        """coth(beta*omega/2) = 2N(omega) + 1."""
        return 2.0 * self.thermal_occupation(omega, beta) + 1.0

    def kernel_sin(self, spectral: SpectralDensity, s: float) -> float:
        """Integral of J(w) sin(w s) dw over the band."""
        self._check_time(s)
        lo, width, j0 = spectral.omega_lo, spectral.delta, spectral.j0
        hi = lo + width
        if s * hi < get_settings().series_crossover:
            return j0 * (s * (lo * width + 0.5 * width * width) - s ** 3 * (hi ** 4 - lo ** 4) / 24.0)
        return 2.0 * j0 * math.sin((lo + 0.5 * width) * s) * math.sin(0.5 * width * s) / s

    def kernel_cos_thermal(self, spectral: SpectralDensity, s: float, beta: Optional[float] = None) -> float:
        """
        Integral of coth(beta w / 2) J(w) cos(w s) dw over the band.

        beta=None selects the low-temperature limit coth -> 1, which has a closed form.
        """
        self._check_time(s)
        if beta is None:
            return self._kernel_cos_low_t(spectral, s)
        self._check_beta(beta)
        if spectral.omega_lo == 0:
            raise DomainError("finite-temperature kernel diverges for a band starting at omega = 0")

        settings = get_settings()
        lo, hi, j0 = spectral.omega_lo, spectral.omega_hi, spectral.j0

        def weight(w):
            return j0 / math.tanh(0.5 * beta * w)

        options = dict(epsabs=settings.quad_epsabs, epsrel=settings.quad_epsrel, limit=settings.quad_limit)
        if spectral.delta * s > settings.oscillatory_threshold:
            value, _ = quad(weight, lo, hi, weight="cos", wvar=s, **options)
        else:
            value, _ = quad(lambda w: weight(w) * math.cos(w * s), lo, hi, **options)
        return value

    def _kernel_cos_low_t(self, spectral: SpectralDensity, s: float) -> float:
        lo, width, j0 = spectral.omega_lo, spectral.delta, spectral.j0
        hi = lo + width
        if s * hi < get_settings().series_crossover:
            return j0 * (width - s * s * (hi ** 3 - lo ** 3) / 6.0)
        return 2.0 * j0 * math.cos((lo + 0.5 * width) * s) * math.sin(0.5 * width * s) / s

    @staticmethod
    def _check_time(s: float) -> None:
        if s < 0:
            raise DomainError(f"time must be >= 0, got {s}")

    @staticmethod
    def _check_beta(beta: float) -> None:
        if beta is None or not beta > 0:
            raise DomainError(f"inverse temperature must be > 0, got {beta}")


spectral_service = SpectralService()
