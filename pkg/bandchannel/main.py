import math
from typing import List, Optional

from fastapi import Depends, FastAPI, HTTPException
from pydantic import BaseModel
from sqlalchemy.orm import Session

from . import __version__, database, models
from .errors import ChannelError
from .schemas import DeathSource, EnvironmentParams, KappaSource, Method, Mode
from .services.coefficient_service import coefficient_service
from .services.dynamics_service import dynamics_service
from .services.entanglement_service import entanglement_service
from .services.registry_service import registry_service

models.Base.metadata.create_all(bind=database.engine)

app = FastAPI(title="Finite-Band Gaussian Channel API", version=__version__)

class EnvRequest(BaseModel):
    j0: float
    omega_lo: float
    delta: float
    beta: Optional[float] = None
    low_t: Optional[bool] = None

    def build(self) -> EnvironmentParams:
        return EnvironmentParams.finite_band(self.j0, self.omega_lo, self.delta, beta=self.beta, low_t=self.low_t)

class CoefficientsRequest(BaseModel):
    env: EnvRequest
    tau_grid: List[float]
    method: str = Method.CLOSED.value

class EvolveRequest(BaseModel):
    r: float
    env: EnvRequest
    tau: float
    method: str = Method.CLOSED.value
    mode: Mode = Mode.FULL

class KappaRequest(BaseModel):
    r: float
    env: EnvRequest
    tau_grid: List[float]
    source: KappaSource = KappaSource.CLOSED_FORM
    mode: Mode = Mode.FULL
    method: str = Method.CLOSED.value

class SuddenDeathRequest(BaseModel):
    r: float
    j0_delta: float
    omega_lo: float
    source: DeathSource = DeathSource.SECULAR
    tau_max: Optional[float] = None
    beta: Optional[float] = None

def _unprocessable(exc: ChannelError) -> HTTPException:
    return HTTPException(status_code=422, detail=str(exc))

def _finite(values) -> list:
    # JSON has no nan
    return [None if math.isnan(v) else float(v) for v in values]

@app.get("/")
def read_root():
    return {"status": "Finite-band Gaussian channel API is running", "version": __version__}

@app.post("/api/coefficients")
def coefficients(request: CoefficientsRequest):
    try:
        trace = coefficient_service.trace(request.env.build(), request.tau_grid, request.method)
    except ChannelError as exc:
        raise _unprocessable(exc)
    return trace.model_dump(mode="json")

@app.post("/api/evolve")
def evolve(request: EvolveRequest):
    try:
        env = request.env.build()
        state = dynamics_service.propagate(dynamics_service.make_twb(request.r), env, request.tau,
                                           request.method, request.mode)
        invariants = entanglement_service.invariants(state)
    except ChannelError as exc:
        raise _unprocessable(exc)
    return {
        "tau": request.tau,
        "mode": request.mode.value,
        "mean": state.mean.tolist(),
        "cm": state.cm.tolist(),
        "invariants": invariants.model_dump(),
        "nu_min_pt": entanglement_service.nu_min_pt(state),
        "physical": state.is_psd() and state.satisfies_uncertainty(),
    }

@app.post("/api/kappa")
def kappa(request: KappaRequest):
    try:
        env = request.env.build()
        values = entanglement_service.kappa_series(request.r, env, request.tau_grid, request.source,
                                                   request.mode, request.method, strict=False)
        negativity = entanglement_service.negativity_series(values)
    except ChannelError as exc:
        raise _unprocessable(exc)
    return {
        "tau": request.tau_grid,
        "source": request.source.value,
        "kappa": _finite(values),
        "e_n": _finite(negativity),
    }

@app.post("/api/sudden_death")
def sudden_death(request: SuddenDeathRequest):
    try:
        result = entanglement_service.sudden_death_time(request.r, request.j0_delta, request.omega_lo,
                                                        request.source, request.tau_max,
                                                        beta=request.beta)
    except ChannelError as exc:
        raise _unprocessable(exc)
    return result.model_dump(mode="json")

@app.get("/api/runs")
def list_runs(limit: int = 50, db: Session = Depends(database.get_db)):
    return registry_service.list_runs(db, limit=limit)
