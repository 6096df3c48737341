import os
from functools import lru_cache

from pydantic import BaseModel, ConfigDict


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True)

    database_url: str = "sqlite:///./bandchannel.db"
    log_level: str = "INFO"

    # Quadrature (outer s-integrals and finite-beta kernels)
    quad_epsabs: float = 1e-12
    quad_epsrel: float = 1e-9
    quad_limit: int = 200
    # s * (Omega + delta) below this switches the closed-form kernels to their Taylor series
    series_crossover: float = 1e-4
    # delta * s above this uses QUADPACK's cosine-weighted rule for the thermal kernel
    oscillatory_threshold: float = 20.0
    # Dense Gamma profile used inside the nested integrals
    profile_intervals: int = 2048

    sudden_death_horizon: float = 100.0
    sudden_death_scan_points: int = 4001
    # the full source rebuilds the covariance matrix at every scan point
    sudden_death_scan_points_full: int = 401
    sudden_death_xtol: float = 1e-6

    figure_tau_max: float = 30.0
    figure_tau_steps: int = 600

    csv_precision: int = 17
    low_t_warning_product: float = 100.0
    radicand_floor: float = -1e-12


@lru_cache
def get_settings() -> Settings:
    overrides = {}
    if os.environ.get("BANDCHANNEL_DATABASE_URL"):
        overrides["database_url"] = os.environ["BANDCHANNEL_DATABASE_URL"]
    if os.environ.get("BANDCHANNEL_LOG_LEVEL"):
        overrides["log_level"] = os.environ["BANDCHANNEL_LOG_LEVEL"].upper()
    return Settings(**overrides)
