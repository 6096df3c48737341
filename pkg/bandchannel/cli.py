"""
Command-line front end.

    python -m bandchannel.cli fig1 --panel a --out results/fig1_a.csv
    python -m bandchannel.cli verify --config scenarios/verify_default.json

Exit status: 0 success, 1 failed oracle checks, 2 usage or configuration error, 3 numeric failure.
"""
import argparse
import logging
import sys
from typing import Optional

from .config import get_settings
from .errors import ConvergenceError, DomainError, NumericDomainError, UnsupportedStateError, UsageError
from .logging_setup import configure_logging
from .schemas import KappaSource, Method, Mode, OracleReport, SweepScenario
from .services.oracle_service import oracle_service
from .services.registry_service import registry_service
from .services.sweep_service import FIG2_PANELS, sweep_service

logger = logging.getLogger("bandchannel.cli")

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

REPORT_HEADER = ["quantity", "primary", "oracle", "abs_dev", "rel_dev", "tolerance", "relative", "passed"]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON scenario file")
    common.add_argument("--out", help="CSV output path (a .meta sidecar is written next to it); stdout if omitted")
    common.add_argument("--mode", choices=[m.value for m in Mode])
    common.add_argument("--method", choices=["closed", "quad"])
    common.add_argument("--kappa", choices=[k.value for k in KappaSource] + ["paper"],
                        help="kappa source; paper is an alias of closed-form")
    common.add_argument("--tau-max", type=float)
    common.add_argument("--tau-steps", type=int)
    common.add_argument("--low-t", action="store_true", default=None, help="zero-temperature kernel, coth -> 1")
    common.add_argument("--beta", type=float, help="inverse temperature in units of 1/omega0")
    common.add_argument("--jobs", type=int)
    common.add_argument("--record", action="store_true", help="store the run in the registry database")
    common.add_argument("--verbose", "-v", action="store_true")

    parser = argparse.ArgumentParser(prog="bandchannel", description="Gaussian states in finite-band environments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("coefficients", parents=[common], help="master-equation coefficients on a tau grid")
    sub.add_parser("evolve", parents=[common], help="covariance matrices of an evolved twin beam")
    sub.add_parser("sweep", parents=[common], help="kappa and negativity over a parameter grid")
    for figure in ("fig1", "fig2"):
        fig = sub.add_parser(figure, parents=[common], help=f"{figure} panel recipe")
        fig.add_argument("--panel", choices=["a", "b", "c"], required=True)
    verify = sub.add_parser("verify", parents=[common], help="run the oracle suite")
    verify.add_argument("--tolerance", type=float, help="replace every check tolerance")
    return parser


def overrides_from(args: argparse.Namespace) -> dict:
    return {
        "tau_stop": args.tau_max,
        "tau_steps": args.tau_steps,
        "mode": args.mode,
        "method": Method.parse(args.method) if args.method else None,
        "kappa": args.kappa,
        "low_t": args.low_t,
        "beta": args.beta,
        "jobs": args.jobs,
    }


def scenario_for(args: argparse.Namespace) -> SweepScenario:
    overrides = overrides_from(args)
    if args.command in ("fig1", "fig2"):
        if args.config:
            raise UsageError("figure recipes take flags, not a scenario file", field="config")
        return sweep_service.figure_scenario(args.command, args.panel, overrides)
    return sweep_service.load_scenario(args.config, overrides)


def run(args: argparse.Namespace) -> int:
    scenario = scenario_for(args)
    logger.info("%s: %d parameter combination(s), %d tau points", args.command,
                len(list(scenario.environments())) * len(scenario.r_values), scenario.tau_steps)

    reports: list[OracleReport] = []
    if args.command == "verify":
        reports = oracle_service.run_suite(scenario, tolerance=args.tolerance)
        header = REPORT_HEADER
        rows = [[getattr(report, name) for name in REPORT_HEADER] for report in reports]
    elif args.command == "coefficients":
        header, rows = sweep_service.coefficient_rows(scenario)
    elif args.command == "evolve":
        header, rows = sweep_service.evolve_rows(scenario)
    elif args.command == "sweep":
        header, rows = sweep_service.sweep_rows(scenario)
    elif args.command == "fig1":
        header, rows = sweep_service.fig1_rows(scenario)
    else:
        header, rows = sweep_service.fig2_rows(scenario, FIG2_PANELS[args.panel][0])

    text = sweep_service.render_csv(header, rows)
    digest = None
    if args.out:
        digest = sweep_service.write_outputs(args.out, text, sweep_service.metadata(args.command, scenario, header))
    else:
        sys.stdout.write(text)

    if args.record:
        registry_service.record_run(args.command, scenario, args.out, digest, len(rows), reports)

    if any(not report.passed for report in reports):
        logger.error("%d of %d oracle checks failed", sum(not r.passed for r in reports), len(reports))
        return EXIT_VERIFY_FAILED
    logger.info("%s finished", args.command)
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging("DEBUG" if args.verbose else get_settings().log_level)
    try:
        return run(args)
    except (UsageError, DomainError) as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except (NumericDomainError, ConvergenceError, UnsupportedStateError) as exc:
        logger.error("numeric failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
