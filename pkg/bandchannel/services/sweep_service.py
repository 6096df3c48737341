import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Optional

import numpy as np

from .. import __version__
from ..config import get_settings
from ..errors import ConfigConflictError, UsageError
from ..schemas import (
    CoefficientTrace, DeathSource, EnvironmentParams, KappaSource, Method, Mode, SweepScenario, build,
)
from .coefficient_service import coefficient_service
from .dynamics_service import dynamics_service
from .entanglement_service import entanglement_service

logger = logging.getLogger(__name__)

PANELS = ("a", "b", "c")

FIG1_R = [0.01, 0.1, 0.3, 0.5, 0.9]
FIG1_PANELS = {
    "a": {"delta_values": [1e-4], "omega_values": [1.0]},
    "b": {"delta_values": [1e-3], "omega_values": [1.0]},
    "c": {"delta_values": [1e-3], "omega_values": [3.0]},
}

# J0 is held at 1 so delta_values carry the product J0 * delta
FIG2_PANELS = {
    "a": ("r", {"r_values": [10.0, 2.0, 1.0, 0.5, 0.1], "delta_values": [0.01], "omega_values": [1.0]}),
    "b": ("j0_delta", {"r_values": [1.0], "delta_values": [1e-3, 10 ** -2.5, 1e-2, 10 ** -1.5, 1e-1],
                       "omega_values": [1.0]}),
    "c": ("omega_lo", {"r_values": [1.0], "delta_values": [0.01], "omega_values": [10.0, 2.0, 1.0, 0.5, 0.1]}),
}

COEFFICIENT_HEADER = ["tau", "j0", "delta", "omega_lo", "beta", "method", *CoefficientTrace.columns()]
EVOLVE_HEADER = [
    "tau", "r", "j0", "delta", "omega_lo", "mode", "method",
    "a11", "a12", "a22", "c11", "c12", "c21", "c22", "i1", "i3", "i4", "purity", "nu_min_pt",
]
SWEEP_HEADER = ["tau", "r", "j0", "delta", "omega_lo", "mode", "method", "kappa_source", "kappa", "e_n"]
# the last two columns are named after the kappa source, e.g. kappa_symmetric_secular
FIG1_HEADER = ["tau", "r", "j0", "delta", "omega_lo", "method", "kappa_source", "kappa_closed_form"]
FIG2_HEADER = ["row_type", "varied", "value", "tau", "r", "j0_delta", "omega_lo", "method", "kappa_source",
               "kappa", "e_n"]

# tau_sd rows cross the same kappa as the curves
DEATH_SOURCES = {
    KappaSource.CLOSED_FORM: DeathSource.SECULAR,
    KappaSource.SYMMETRIC: DeathSource.SYMMETRIC,
    KappaSource.ORACLE: DeathSource.FULL,
}

Rows = list[list[Any]]


class SweepService:
    # ---- scenarios ----

    def load_scenario(self, path: Optional[str] = None, overrides: Optional[dict] = None) -> SweepScenario:
        """Scenario from a JSON file (optional) with CLI overrides applied on top."""
        data: dict = {}
        if path is not None:
            try:
                with open(path, mode="r", encoding="utf-8") as f:
                    data = json.load(f)
            except FileNotFoundError:
                raise UsageError(f"scenario file {path} not found", field="config") from None
            except json.JSONDecodeError as exc:
                raise UsageError(f"scenario file {path} is not valid JSON: {exc}", field="config") from None
            if not isinstance(data, dict):
                raise UsageError("scenario file must hold a JSON object", field="config")
        return self.scenario_from(data, overrides)

    def scenario_from(self, data: dict, overrides: Optional[dict] = None) -> SweepScenario:
        merged = dict(data)
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
        if merged.get("beta") is not None:
            if merged.get("low_t") is True:
                raise ConfigConflictError("low-T flag and beta are mutually exclusive", field="beta")
            merged["low_t"] = False
        return build(SweepScenario, error=UsageError, **merged)

    def figure_scenario(self, figure: str, panel: str, overrides: Optional[dict] = None) -> SweepScenario:
        if panel not in PANELS:
            raise UsageError(f"unknown panel {panel!r}, expected one of a, b, c", field="panel")
        settings = get_settings()
        data = {"tau_stop": settings.figure_tau_max, "tau_steps": settings.figure_tau_steps, "j0_values": [1.0]}
        if figure == "fig1":
            data.update(FIG1_PANELS[panel], r_values=FIG1_R, mode=Mode.BOTH, kappa=KappaSource.SYMMETRIC)
        elif figure == "fig2":
            data.update(FIG2_PANELS[panel][1], mode=Mode.FULL, kappa=KappaSource.CLOSED_FORM)
        else:
            raise UsageError(f"unknown figure {figure!r}", field="figure")
        return self.scenario_from(data, overrides)

    # ---- row builders ----

    def coefficient_rows(self, scenario: SweepScenario) -> tuple[list[str], Rows]:
        grid = scenario.tau_grid()

        def job(env: EnvironmentParams) -> Rows:
            trace = coefficient_service.trace(env, grid, scenario.method)
            j = env.spectral
            columns = [getattr(trace, name) for name in CoefficientTrace.columns()]
            return [
                [tau, j.j0, j.delta, j.omega_lo, env.beta, trace.method, *(column[i] for column in columns)]
                for i, tau in enumerate(trace.tau_grid)
            ]

        return COEFFICIENT_HEADER, self._collect(scenario, job)

    def evolve_rows(self, scenario: SweepScenario) -> tuple[list[str], Rows]:
        grid = scenario.tau_grid()

        def job(env: EnvironmentParams) -> Rows:
            trace = coefficient_service.trace(env, grid, scenario.method)
            j = env.spectral
            rows = []
            for r in sorted(scenario.r_values):
                initial = dynamics_service.make_twb(r)
                for mode in self._modes(scenario.mode):
                    for i, tau in enumerate(trace.tau_grid):
                        snap = trace.snapshot(i)
                        if mode is Mode.SECULAR:
                            snap = snap.without_secular()
                        state = dynamics_service.evolve_cm_full(initial, env, tau, snapshot=snap)
                        inv = entanglement_service.invariants(state)
                        a, c = state.block_a, state.block_c
                        rows.append([
                            tau, r, j.j0, j.delta, j.omega_lo, mode, trace.method,
                            a[0, 0], a[0, 1], a[1, 1], c[0, 0], c[0, 1], c[1, 0], c[1, 1],
                            inv.i1, inv.i3, inv.i4, state.purity(), entanglement_service.nu_min_pt(state),
                        ])
            return rows

        return EVOLVE_HEADER, self._collect(scenario, job)

    def sweep_rows(self, scenario: SweepScenario) -> tuple[list[str], Rows]:
        grid = scenario.tau_grid()
        source = scenario.kappa

        def job(env: EnvironmentParams) -> Rows:
            j = env.spectral
            # the printed formula is the secular closed form and needs no trace
            modes = [Mode.SECULAR] if source is KappaSource.CLOSED_FORM else self._modes(scenario.mode)
            trace = None if source is KappaSource.CLOSED_FORM else coefficient_service.trace(env, grid, scenario.method)
            rows = []
            for r in sorted(scenario.r_values):
                for mode in modes:
                    kappa = entanglement_service.kappa_series(
                        r, env, grid, source, mode, scenario.method, trace=trace, strict=False)
                    e_n = entanglement_service.negativity_series(kappa)
                    rows += [
                        [tau, r, j.j0, j.delta, j.omega_lo, mode, scenario.method, source, k, e]
                        for tau, k, e in zip(grid, kappa, e_n)
                    ]
            return rows

        return SWEEP_HEADER, self._collect(scenario, job)

    def fig1_rows(self, scenario: SweepScenario) -> tuple[list[str], Rows]:
        """Printed secular formula next to the symmetric-invariant kappa with and without secular terms."""
        grid = scenario.tau_grid()

        def job(env: EnvironmentParams) -> Rows:
            j = env.spectral
            trace = coefficient_service.trace(env, grid, scenario.method)
            rows = []
            for r in sorted(scenario.r_values):
                series = [
                    entanglement_service.kappa_series(r, env, grid, KappaSource.CLOSED_FORM),
                    entanglement_service.kappa_series(r, env, grid, scenario.kappa, Mode.SECULAR,
                                                      scenario.method, trace=trace, strict=False),
                    entanglement_service.kappa_series(r, env, grid, scenario.kappa, Mode.FULL,
                                                      scenario.method, trace=trace, strict=False),
                ]
                tag = f"{KappaSource.CLOSED_FORM.value}|{scenario.kappa.value}"
                rows += [
                    [tau, r, j.j0, j.delta, j.omega_lo, scenario.method, tag, *values]
                    for tau, *values in zip(grid, *series)
                ]
            return rows

        header = FIG1_HEADER + [f"kappa_{scenario.kappa.value}_{mode.value}" for mode in (Mode.SECULAR, Mode.FULL)]
        return header, self._collect(scenario, job)

    def fig2_rows(self, scenario: SweepScenario, varied: str) -> tuple[list[str], Rows]:
        """E_N curves for the varied parameter followed by one sudden-death row per curve."""
        grid = scenario.tau_grid()
        source = scenario.kappa
        death_source = DEATH_SOURCES[source]

        def job(env: EnvironmentParams) -> tuple[Rows, Rows]:
            j = env.spectral
            trace = None if source is KappaSource.CLOSED_FORM else coefficient_service.trace(env, grid, scenario.method)
            curves, deaths = [], []
            for r in sorted(scenario.r_values):
                value = {"r": r, "j0_delta": j.j0_delta, "omega_lo": j.omega_lo}[varied]
                kappa = entanglement_service.kappa_series(
                    r, env, grid, source, Mode.FULL, scenario.method, trace=trace, strict=False)
                e_n = entanglement_service.negativity_series(kappa)
                curves += [
                    ["curve", varied, value, tau, r, j.j0_delta, j.omega_lo, scenario.method, source, k, e]
                    for tau, k, e in zip(grid, kappa, e_n)
                ]
                death = entanglement_service.sudden_death_time(
                    r, j.j0_delta, j.omega_lo, death_source, method=scenario.method, beta=env.thermal_beta)
                deaths.append(["tau_sd", varied, value, death.tau_sd, r, j.j0_delta, j.omega_lo,
                               scenario.method, death.source, None, None])
            return curves, deaths

        results = self._map(scenario, job)
        key = lambda row: (row[2], row[4], row[5], row[6], row[3])
        curves = sorted((row for part, _ in results for row in part), key=key)
        deaths = sorted((row for _, part in results for row in part), key=lambda row: row[2])
        return FIG2_HEADER, curves + deaths

    # ---- output ----

    def render_csv(self, header: list[str], rows: Iterable[list[Any]]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([self._cell(value) for value in row])
        return buffer.getvalue()

    def metadata(self, command: str, scenario: SweepScenario, header: list[str]) -> dict:
        return {
            "command": command,
            "version": __version__,
            "log_base": "natural",
            "scenario": scenario.model_dump(mode="json"),
            "tau_grid": {"start": scenario.tau_start, "stop": scenario.tau_stop, "points": scenario.tau_steps},
            "columns": header,
        }

    def write_outputs(self, path: str | Path, text: str, meta: dict) -> str:
        """Write the CSV and its .meta sidecar; returns the CSV sha256."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        path.write_bytes(data)
        path.with_suffix(".meta").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info("wrote %s (%d rows)", path, text.count("\n") - 1)
        return hashlib.sha256(data).hexdigest()

    # ---- helpers ----

    @staticmethod
    def _modes(mode: Mode) -> list[Mode]:
        return [Mode.SECULAR, Mode.FULL] if mode is Mode.BOTH else [mode]

    def _map(self, scenario: SweepScenario, job: Callable[[EnvironmentParams], Any]) -> list[Any]:
        """Run job per environment; results come back in the scenario's sorted order."""
        environments = list(scenario.environments())
        logger.debug("evaluating %d parameter combinations with %d worker(s)", len(environments), scenario.jobs)
        if scenario.jobs == 1:
            return [job(env) for env in environments]
        with ThreadPoolExecutor(max_workers=scenario.jobs) as pool:
            return list(pool.map(job, environments))

    def _collect(self, scenario: SweepScenario, job: Callable[[EnvironmentParams], Rows]) -> Rows:
        return [row for part in self._map(scenario, job) for row in part]

    @staticmethod
    def _cell(value: Any) -> str:
        if value is None:
            return ""
        if isinstance(value, Enum):
            return str(value.value)
        if isinstance(value, (float, np.floating)):
            value = float(value)
            if math.isnan(value):
                return "nan"
            return format(value, f".{get_settings().csv_precision}g")
        return str(value)


sweep_service = SweepService()
