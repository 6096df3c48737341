"""Write every figure panel (CSV + .meta sidecar) into results/."""
import logging
from pathlib import Path

from bandchannel.logging_setup import configure_logging
from bandchannel.services.sweep_service import FIG2_PANELS, PANELS, sweep_service

RESULTS = Path(__file__).resolve().parent / "results"

configure_logging("INFO")
logger = logging.getLogger("reproduce_figures")

for panel in PANELS:
    scenario = sweep_service.figure_scenario("fig1", panel)
    header, rows = sweep_service.fig1_rows(scenario)
    sweep_service.write_outputs(RESULTS / f"fig1_{panel}.csv", sweep_service.render_csv(header, rows),
                                sweep_service.metadata("fig1", scenario, header))

for panel in PANELS:
    scenario = sweep_service.figure_scenario("fig2", panel)
    header, rows = sweep_service.fig2_rows(scenario, FIG2_PANELS[panel][0])
    sweep_service.write_outputs(RESULTS / f"fig2_{panel}.csv", sweep_service.render_csv(header, rows),
                                sweep_service.metadata("fig2", scenario, header))

logger.info("all figure panels written to %s", RESULTS)
