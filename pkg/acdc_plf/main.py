"""
Command-line entry point: case ingestion, pipeline execution and report emission
"""
import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from acdc_plf.config import settings
from acdc_plf.exceptions import AcDcPlfError, CaseValidationError, Violation
from acdc_plf.models.options import RunConfig
from acdc_plf.routers import compare, flow, mcs, plf, studies
from acdc_plf.services.case_service import CaseService
from acdc_plf.services.report_service import ReportService

# Workbook export is optional - only available if openpyxl is installed
try:
    from acdc_plf.services.workbook_service import write_workbook
except ImportError:
    write_workbook = None

logger = logging.getLogger("acdc_plf")

HANDLERS = {
    "flow": flow.run,
    "cm": plf.run,
    "mcs": mcs.run,
    "compare": compare.run,
    "correlation": studies.run_correlation,
    "penetration": studies.run_penetration,
}

case_service = CaseService()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.app_name,
        description="Hybrid AC/VSC-MTDC power flow and cumulant probabilistic load flow",
    )
    parser.add_argument("--case", default=settings.default_case, help="Case file path or bundled case name")
    parser.add_argument("--scenario", default=None, help="Scenario of the case (default: the case's default)")
    parser.add_argument("--method", default="compare", choices=sorted(HANDLERS))
    parser.add_argument("--samples", type=int, default=settings.mcs_samples, help="Monte Carlo sample count")
    parser.add_argument("--seed", type=int, default=settings.default_seed)
    parser.add_argument("--order", type=int, default=settings.cumulant_order, help="Highest cumulant order (2-8)")
    parser.add_argument("--grid-points", type=int, default=settings.grid_points)
    parser.add_argument("--monitor", action="append", default=None,
                        help="Glob pattern of monitored variables, e.g. 'U:*' (repeatable)")
    parser.add_argument("--out", type=Path, default=Path("out"), help="Output directory")
    parser.add_argument("--workers", type=int, default=1, help="Monte Carlo worker threads")
    parser.add_argument("--xlsx", action="store_true", help="Also write a styled report.xlsx")
    parser.add_argument("--rho", type=float, action="append", default=None,
                        help="Correlation level of the correlation study (repeatable)")
    parser.add_argument("--scale", type=float, action="append", default=None,
                        help="PV capacity factor of the penetration study (repeatable)")
    parser.add_argument("--list-scenarios", action="store_true", help="Print the case's scenarios and exit")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def emit_diagnostic(error: AcDcPlfError) -> None:
    print(json.dumps(error.to_diagnostic(), default=str, sort_keys=True), file=sys.stderr)


def option_error(e: ValidationError) -> CaseValidationError:
    """Every rejected command-line option as one validation error"""
    violations = []
    for err in e.errors():
        field = ".".join(str(p) for p in err["loc"])
        violations.append(Violation("invalid option", "option", field, f"{field}: {err['msg']}"))
    error = CaseValidationError(violations)
    error.details["field"] = violations[0].element_id
    return error


def run_pipeline(config: RunConfig) -> int:
    """Run one method end to end; returns the process exit status"""
    timings: Dict[str, float] = {}
    report = ReportService(config.out, {
        "case": config.case,
        "scenario": config.scenario,
        "seed": config.seed,
        "options": config.model_dump(mode="json"),
    })
    start = time.perf_counter()
    try:
        case, spec = case_service.load_case(config.case, config.scenario)
        report.header.update(case=case.name, scenario=case.scenario)
        timings["load"] = time.perf_counter() - start
        HANDLERS[config.method](config, case, spec, report, timings)
        if config.xlsx:
            if write_workbook is None:
                print("ℹ Workbook export disabled (openpyxl not installed), CSV files only")
            else:
                path = write_workbook(report.tables, report.out_dir / "report.xlsx")
                report.written.append(path)
                print(f"✓ Workbook written: {path}")
    except AcDcPlfError as e:
        emit_diagnostic(e)
        print(f"⚠ {config.method} failed ({e.code}): {e.message}")
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected failure")
        emit_diagnostic(AcDcPlfError(f"{type(e).__name__}: {e}"))
        return AcDcPlfError.exit_code
    finally:
        timings["total"] = time.perf_counter() - start
        report.write_timings(timings)

    print(f"✓ {config.method} on {case.name} finished in {timings['total']:.2f} s")
    print(f"✓ {len(report.written)} files written to {report.out_dir}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    if args.list_scenarios:
        try:
            scenarios = case_service.list_scenarios(args.case)
        except AcDcPlfError as e:
            emit_diagnostic(e)
            return e.exit_code
        if not scenarios:
            print(f"ℹ {args.case} defines no scenarios")
        for name, description in scenarios:
            print(f"{name}\t{description}")
        return 0

    fields = dict(
        case=args.case, scenario=args.scenario, method=args.method, samples=args.samples, seed=args.seed,
        order=args.order, grid_points=args.grid_points, monitor=args.monitor, out=args.out,
        workers=args.workers, xlsx=args.xlsx,
    )
    if args.rho is not None:
        fields["rhos"] = args.rho
    if args.scale is not None:
        fields["scales"] = args.scale
    try:
        config = RunConfig(**fields)
    except ValidationError as e:
        error = option_error(e)
        emit_diagnostic(error)
        return error.exit_code

    print(f"ℹ {settings.app_name} v{settings.app_version}: {config.method} on {config.case}")
    return run_pipeline(config)


if __name__ == "__main__":
    sys.exit(main())
