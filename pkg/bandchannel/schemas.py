import logging
from dataclasses import dataclass, field, InitVar
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .config import get_settings
from .errors import DomainError, UnsupportedStateError, UsageError

logger = logging.getLogger(__name__)


class Method(str, Enum):
    CLOSED = "closed-form"
    QUADRATURE = "quadrature"

    @classmethod
    def parse(cls, value: "Method | str") -> "Method":
        """Accept the enum, its value, or the short CLI aliases ``closed`` / ``quad``."""
        if isinstance(value, cls):
            return value
        aliases = {"closed": cls.CLOSED, "quad": cls.QUADRATURE}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise UsageError(f"unknown method tag {value!r}", field="method") from None


class Mode(str, Enum):
    SECULAR = "secular"
    FULL = "full"
    BOTH = "both"


class KappaSource(str, Enum):
    SYMMETRIC = "symmetric"
    CLOSED_FORM = "closed-form"
    ORACLE = "oracle"

    @classmethod
    def _missing_(cls, value):
        # legacy CLI tag for the secular closed form
        if value == "paper":
            return cls.CLOSED_FORM
        return None


class DeathSource(str, Enum):
    SECULAR = "secular-closed-form"
    FULL = "full"
    SYMMETRIC = "symmetric"


def build(model: type[BaseModel], error: type = DomainError, **data):
    """Construct a pydantic model, re-raising validation failures as a bandchannel error."""
    try:
        return model(**data)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or model.__name__
        if issubclass(error, UsageError):
            raise error(first["msg"], field=where) from None
        raise error(f"{where}: {first['msg']}") from None


class SpectralDensity(BaseModel):
    """Rectangular band J(w) = j0 on [omega_lo, omega_lo + delta), zero elsewhere."""

    model_config = ConfigDict(frozen=True)

    j0: float = Field(gt=0)
    omega_lo: float = Field(ge=0)
    delta: float = Field(gt=0)

    @property
    def omega_hi(self) -> float:
        return self.omega_lo + self.delta

    @property
    def j0_delta(self) -> float:
        return self.j0 * self.delta


class EnvironmentParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    spectral: SpectralDensity
    beta: Optional[float] = Field(default=None, gt=0)
    low_t: bool = False

    @model_validator(mode="after")
    def _check_temperature(self):
        if self.beta is None and not self.low_t:
            raise ValueError("either beta or the low-T flag is required")
        if self.low_t and self.beta is not None:
            product = self.spectral.omega_lo * self.beta
            if product < get_settings().low_t_warning_product:
                logger.warning(
                    "low-T approximation used with Omega*beta = %.3g; the coth(beta*w/2) ~ 1 "
                    "regime needs Omega*beta >> 1", product
                )
        return self

    @property
    def thermal_beta(self) -> Optional[float]:
        """Inverse temperature used by the kernels; None means coth -> 1."""
        return None if self.low_t else self.beta

    @classmethod
    def finite_band(
        cls, j0: float, omega_lo: float, delta: float,
        beta: Optional[float] = None, low_t: Optional[bool] = None,
    ) -> "EnvironmentParams":
        spectral = build(SpectralDensity, j0=j0, omega_lo=omega_lo, delta=delta)
        if low_t is None:
            low_t = beta is None
        return build(cls, spectral=spectral, beta=beta, low_t=low_t)


class ChannelSnapshot(BaseModel):
    """Time-integrated channel quantities at one tau."""

    model_config = ConfigDict(frozen=True)

    tau: float
    gamma_int: float
    delta_gamma: float
    sec_delta_co: float = 0.0
    sec_delta_si: float = 0.0
    sec_pi_co: float = 0.0
    sec_pi_si: float = 0.0
    method: Method = Method.CLOSED

    @property
    def angle(self) -> float:
        return self.tau

    @property
    def secular(self) -> tuple[float, float, float, float]:
        return (self.sec_delta_co, self.sec_delta_si, self.sec_pi_co, self.sec_pi_si)

    def without_secular(self) -> "ChannelSnapshot":
        return self.model_copy(update={
            "sec_delta_co": 0.0, "sec_delta_si": 0.0, "sec_pi_co": 0.0, "sec_pi_si": 0.0,
        })


class CoefficientTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau_grid: List[float]
    gamma: List[float]
    delta_coef: List[float]
    pi_coef: List[float]
    r_shift: List[float]
    gamma_int: List[float]
    delta_gamma: List[float]
    sec_delta_co: List[float]
    sec_delta_si: List[float]
    sec_pi_co: List[float]
    sec_pi_si: List[float]
    method: Method

    @model_validator(mode="after")
    def _same_length(self):
        n = len(self.tau_grid)
        for name in self.columns():
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} values, grid has {n}")
        if any(b < a for a, b in zip(self.tau_grid, self.tau_grid[1:])):
            raise ValueError("tau_grid must be ascending")
        return self

    @staticmethod
    def columns() -> list[str]:
        return [
            "gamma", "delta_coef", "pi_coef", "r_shift", "gamma_int", "delta_gamma",
            "sec_delta_co", "sec_delta_si", "sec_pi_co", "sec_pi_si",
        ]

    def snapshot(self, index: int) -> ChannelSnapshot:
        return ChannelSnapshot(
            tau=self.tau_grid[index],
            gamma_int=self.gamma_int[index],
            delta_gamma=self.delta_gamma[index],
            sec_delta_co=self.sec_delta_co[index],
            sec_delta_si=self.sec_delta_si[index],
            sec_pi_co=self.sec_pi_co[index],
            sec_pi_si=self.sec_pi_si[index],
            method=self.method,
        )


class TwbSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    r: float = Field(ge=0)


class SymplecticInvariants(BaseModel):
    model_config = ConfigDict(frozen=True)

    i1: float
    i3: float
    i4: float


class SuddenDeathResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau_sd: Optional[float]
    source: DeathSource
    tau_max: float

    @property
    def found(self) -> bool:
        return self.tau_sd is not None


class OracleReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    quantity: str
    primary: float
    oracle: float
    abs_dev: float
    rel_dev: float
    tolerance: float
    relative: bool = True
    passed: bool

    @classmethod
    def compare(cls, quantity: str, primary: float, oracle: float,
                tolerance: float, relative: bool = True) -> "OracleReport":
        abs_dev = abs(primary - oracle)
        scale = abs(oracle)
        rel_dev = abs_dev / scale if scale > 0 else (0.0 if abs_dev == 0 else float("inf"))
        deviation = rel_dev if relative else abs_dev
        return cls(
            quantity=quantity, primary=primary, oracle=oracle, abs_dev=abs_dev,
            rel_dev=rel_dev, tolerance=tolerance, relative=relative,
            passed=bool(deviation < tolerance),
        )


class SweepScenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tau_start: float = Field(default=0.0, ge=0)
    tau_stop: float = 30.0
    tau_steps: int = Field(default=600, ge=2)
    r_values: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    j0_values: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    delta_values: List[float] = Field(default_factory=lambda: [1e-3], min_length=1)
    omega_values: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    beta: Optional[float] = Field(default=None, gt=0)
    low_t: bool = True
    mode: Mode = Mode.BOTH
    method: Method = Method.CLOSED
    kappa: KappaSource = KappaSource.CLOSED_FORM
    out: Optional[str] = None
    jobs: int = Field(default=1, ge=1)

    @field_validator("kappa", mode="before")
    @classmethod
    def _kappa_alias(cls, value):
        return KappaSource(value) if isinstance(value, str) else value

    @model_validator(mode="after")
    def _check_range(self):
        if not self.tau_stop > self.tau_start:
            raise ValueError("tau_stop must exceed tau_start")
        if any(r < 0 for r in self.r_values):
            raise ValueError("r_values must be >= 0")
        return self

    def tau_grid(self) -> np.ndarray:
        return np.linspace(self.tau_start, self.tau_stop, self.tau_steps)

    def environments(self):
        """Every (j0, delta, omega_lo) combination, in sorted order."""
        for j0 in sorted(self.j0_values):
            for delta in sorted(self.delta_values):
                for omega_lo in sorted(self.omega_values):
                    yield EnvironmentParams.finite_band(
                        j0, omega_lo, delta,
                        beta=None if self.low_t else self.beta, low_t=self.low_t,
                    )


def symplectic_form(modes: int = 2) -> np.ndarray:
    """Direct sum of [[0, 1], [-1, 0]] blocks."""
    return np.kron(np.eye(modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True, eq=False)
class TwoModeGaussianState:
    """Mean vector (x1, p1, x2, p2) and 4x4 covariance matrix (vacuum = identity)."""

    mean: np.ndarray
    cm: np.ndarray
    check_physical: InitVar[bool] = False
    symmetry_tol: float = field(default=1e-12, repr=False)

    def __post_init__(self, check_physical: bool):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cm = np.array(self.cm, dtype=float)
        if mean.shape != (4,) or cm.shape != (4, 4):
            raise UnsupportedStateError(f"expected a 4-vector and a 4x4 matrix, got {mean.shape} and {cm.shape}")
        if np.max(np.abs(cm - cm.T)) > self.symmetry_tol * max(1.0, np.max(np.abs(cm))):
            raise DomainError("covariance matrix is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cm", cm)
        if check_physical:
            if not self.is_psd():
                raise DomainError("covariance matrix is not positive semidefinite")
            if not self.satisfies_uncertainty():
                raise DomainError("covariance matrix violates the uncertainty relation")

    @property
    def block_a(self) -> np.ndarray:
        return self.cm[:2, :2]

    @property
    def block_b(self) -> np.ndarray:
        return self.cm[2:, 2:]

    @property
    def block_c(self) -> np.ndarray:
        return self.cm[:2, 2:]

    def _scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.cm))))

    def is_psd(self, tol: float = 1e-10) -> bool:
        return bool(np.linalg.eigvalsh(self.cm).min() >= -tol * self._scale())

    def satisfies_uncertainty(self, tol: float = 1e-8) -> bool:
        hermitian = self.cm + 1j * symplectic_form()
        return bool(np.linalg.eigvalsh(hermitian).min() >= -tol * self._scale())

    def purity(self) -> float:
        return float(1.0 / np.sqrt(np.linalg.det(self.cm)))
