"""
Command-line interface for the Grid Carbon Atlas.

Exit codes: 0 on success, 1 on input errors, 2 when dispatch fails.
"""

import argparse
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from carbon_atlas.atlas import CarbonAtlas
from carbon_atlas.data import load_case, load_timeseries, resolve_case_path
from carbon_atlas.dcopf import DispatchError
from carbon_atlas.grid import ScenarioSeries
from carbon_atlas.intensity import Metric
from carbon_atlas.plotting import histogram_svg, network_svg
from carbon_atlas.report import (
    read_study_json,
    to_json,
    write_cross_metric,
    write_metrics_outputs,
    write_study_json,
    write_study_tables,
    write_text,
)
from carbon_atlas.shifting import ShiftConfig
from carbon_atlas.workflow import (
    ALL_METRICS,
    cross_metric_matrix,
    daily_delta_distribution,
    run_accounting_study,
    run_shifting_study,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVE = 2
FORMATS = ("json", "csv", "svg")
METRIC_CHOICES = [metric.value for metric in ALL_METRICS] + ["all"]


def _parse_metrics(value: Optional[str]) -> Tuple[Metric, ...]:
    if value is None or value.strip().lower() == "all":
        return ALL_METRICS
    return (Metric.parse(value),)


def _parse_buses(value: Optional[str]) -> Tuple[int, ...]:
    if not value:
        return ()
    try:
        return tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError:
        raise ValueError(f"--dc-buses must be comma-separated bus ids, got '{value}'") from None


def _parse_formats(value: Optional[str]) -> Tuple[str, ...]:
    formats = tuple(part.strip().lower() for part in (value or "").split(",") if part.strip())
    unknown = [f for f in formats if f not in FORMATS]
    if unknown:
        raise ValueError(f"Unknown output format(s) {unknown}. Choose from: {', '.join(FORMATS)}")
    return formats


@dataclass(frozen=True)
class CliConfig:
    """Validated command-line settings shared by every subcommand."""

    command: str
    case: Optional[Path] = None
    series: Optional[Path] = None
    metrics: Tuple[Metric, ...] = ALL_METRICS
    datacenter_buses: Tuple[int, ...] = ()
    nominal_load: float = 250.0
    flexibility: float = 0.2
    horizon: int = 24
    shift_metrics: Tuple[Metric, ...] = ALL_METRICS
    account_metric: Optional[Metric] = None
    out: Path = Path("output")
    formats: Tuple[str, ...] = ("json", "csv")
    jobs: int = 1
    progress: bool = False
    json: bool = False

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "CliConfig":
        """Build a config from parsed arguments.

        Raises:
            FileNotFoundError: If the case or series file does not exist
            ValueError: On an invalid metric, format, flexibility or bus list
        """
        case = getattr(args, "case", None)
        series = getattr(args, "series", None)
        if series is not None and not Path(series).is_file():
            raise FileNotFoundError(f"Series file not found: {series}")

        flexibility = getattr(args, "eps", 0.2)
        if not 0 <= flexibility < 1:
            raise ValueError(f"--eps must lie in [0, 1), got {flexibility}")
        jobs = getattr(args, "jobs", 1)
        if jobs < 1:
            raise ValueError(f"--jobs must be at least 1, got {jobs}")

        account_metric = getattr(args, "account_metric", None)
        return cls(
            command=args.command,
            case=resolve_case_path(case) if case else None,
            series=Path(series) if series else None,
            metrics=_parse_metrics(getattr(args, "metric", None)),
            datacenter_buses=_parse_buses(getattr(args, "dc_buses", None)),
            nominal_load=getattr(args, "dnom", 250.0),
            flexibility=flexibility,
            horizon=getattr(args, "horizon", 24),
            shift_metrics=_parse_metrics(getattr(args, "shift_metric", None)),
            account_metric=Metric.parse(account_metric) if account_metric else None,
            out=Path(getattr(args, "out", "output")),
            formats=_parse_formats(getattr(args, "format", "json,csv")),
            jobs=jobs,
            progress=getattr(args, "progress", False),
            json=getattr(args, "json", False),
        )


def _load_inputs(config: CliConfig):
    network = load_case(config.case)
    series = load_timeseries(config.series, network) if config.series else None
    return network, series


def _int_keys(values: Dict[str, Optional[float]]) -> Dict[int, float]:
    return {int(bus): (math.nan if v is None else float(v)) for bus, v in values.items()}


# ---- Commands ----


def cmd_info(config: CliConfig) -> int:
    """Show the case, its dispatch and all four metrics per bus."""
    atlas = CarbonAtlas(config.case)
    stats = atlas.get_stats()
    if config.json:
        info = {
            "case": str(config.case),
            "stats": stats,
            "dispatch": {str(gen): p for gen, p in atlas.dispatch.p_g.items()},
            "metrics": {
                metric.value: atlas.metrics()[metric].to_dict() for metric in config.metrics
            },
        }
        print(to_json(info), end="")
        return EXIT_OK

    print(f"Case: {config.case}")
    print(
        f"  Buses: {stats['buses']}, lines: {stats['lines']} ({stats['limited_lines']} limited), "
        f"generators: {stats['generators']}, loads: {stats['loads']}"
    )
    print(f"  Total load: {stats['total_load']:.3f} MW")
    print(f"  Dispatch cost: {stats['total_cost']:.3f} $/h")
    print(f"  System emissions: {stats['system_emissions']:.6f} tCO2/h")
    if atlas.dispatch.degenerate:
        print("  Dispatch is degenerate; LMCE from finite differences.")
    print("\nGenerator set-points (MW):")
    for gen_id, p in atlas.dispatch.p_g.items():
        print(f"  gen {gen_id}: {p:.3f}")

    header = "bus".rjust(6) + "".join(m.value.upper().rjust(12) for m in config.metrics)
    print("\nIntensity (tCO2/MWh):")
    print(header)
    for bus in atlas.network.bus_ids:
        row = str(bus).rjust(6)
        for metric in config.metrics:
            value = atlas.metrics()[metric][bus]
            row += ("n/a" if math.isnan(value) else f"{value:.6f}").rjust(12)
        print(row)
    return EXIT_OK


def cmd_metrics(config: CliConfig) -> int:
    """Compute per-timestep intensities and accounting, write CSV/JSON/SVG."""
    network, series = _load_inputs(config)
    if config.datacenter_buses:
        network = network.with_datacenter_loads(config.datacenter_buses, config.nominal_load)
    study = run_accounting_study(network, series, jobs=config.jobs, progress=config.progress)
    if not study.timesteps:
        print(f"Error: all {len(study.failures)} timestep(s) failed to dispatch.", file=sys.stderr)
        return EXIT_SOLVE

    written = write_metrics_outputs(
        study, config.out, config.metrics, config.formats, overwrite=True
    )
    if "svg" in config.formats:
        means = study.bus_means()
        panels = {metric.value: means[metric] for metric in config.metrics}
        written.append(
            write_text(
                config.out / "network_metrics.svg",
                network_svg(network, panels, title="Mean nodal carbon intensity"),
                overwrite=True,
            )
        )

    print(f"Accounted {len(study.timesteps)} timestep(s); {len(study.failures)} failed.")
    print(f"True system emissions: {study.true_system_total:.6f} tCO2")
    for metric in config.metrics:
        print(f"  {metric.value.upper()}-accounted: {study.accounted_total(metric):.6f} tCO2")
    for path in written:
        print(f"Wrote {path}")
    return EXIT_OK


def cmd_study(config: CliConfig) -> int:
    """Run shifting studies and write their JSON, tables and plots."""
    if not config.datacenter_buses:
        raise ValueError("--dc-buses is required for a shifting study.")
    network, series = _load_inputs(config)
    shift_config = ShiftConfig(
        datacenter_buses=config.datacenter_buses,
        nominal_load=config.nominal_load,
        flexibility=config.flexibility,
        horizon=config.horizon,
    )
    if series is None:
        series = ScenarioSeries.identity(network, config.horizon)

    studies = {}
    for metric in config.shift_metrics:
        studies[metric] = run_shifting_study(
            network, series, metric, shift_config, jobs=config.jobs, progress=config.progress
        )
    if not any(study.days for study in studies.values()):
        print("Error: no day could be dispatched before and after shifting.", file=sys.stderr)
        return EXIT_SOLVE

    written: List[Path] = []
    for metric, study in studies.items():
        if "json" in config.formats:
            written.append(
                write_study_json(study, config.out / f"study_{metric.value}.json", overwrite=True)
            )
        if "csv" in config.formats:
            written.extend(write_study_tables(study, config.out, overwrite=True))
        if "svg" in config.formats and study.days:
            written.append(
                write_text(
                    config.out / f"histogram_{metric.value}.svg",
                    histogram_svg(
                        daily_delta_distribution(study).to_dict(),
                        title=f"Daily change in emissions, {metric.value.upper()} shifting",
                    ),
                    overwrite=True,
                )
            )
    if "csv" in config.formats and len(studies) > 1:
        written.append(
            write_cross_metric(
                cross_metric_matrix(studies), config.out / "cross_metric.csv", overwrite=True
            )
        )
    if "svg" in config.formats:
        means = next(iter(studies.values())).bus_means()
        written.append(
            write_text(
                config.out / "network.svg",
                network_svg(
                    network.with_datacenter_loads(config.datacenter_buses, config.nominal_load),
                    {metric.value: means[metric] for metric in ALL_METRICS},
                    title="Mean pre-shift nodal carbon intensity",
                ),
                overwrite=True,
            )
        )

    for metric, study in studies.items():
        summary = study.summary()
        print(
            f"{metric.value.upper()} shifting: {summary['valid_days']} day(s), "
            f"DC {summary['pre_shift_dc']:.6f} -> {summary['realized_dc']:.6f} tCO2 "
            f"(estimated {summary['estimated_dc']:.6f}), true system "
            f"{summary['true_system_pre']:.6f} -> {summary['true_system_post']:.6f} tCO2"
        )
        if config.account_metric is not None:
            delta = study.dc_delta(config.account_metric)
            print(
                f"  shift {metric.value}, account {config.account_metric.value}: "
                f"{delta:+.6f} tCO2"
            )
    for path in written:
        print(f"Wrote {path}")
    return EXIT_OK


def cmd_export_plot(config: CliConfig) -> int:
    """Render SVGs from study JSON files written by ``study``."""
    paths = [config.out / f"study_{metric.value}.json" for metric in config.shift_metrics]
    paths = [path for path in paths if path.exists()]
    if not paths:
        raise FileNotFoundError(f"No study_<metric>.json files found in {config.out}")

    network = load_case(config.case) if config.case else None
    if network is None:
        logger.warning("No --case given; skipping the network diagram")

    written: List[Path] = []
    for path in paths:
        document = read_study_json(path)
        name = document["shift_metric"]
        if document.get("histogram"):
            written.append(
                write_text(
                    config.out / f"histogram_{name}.svg",
                    histogram_svg(
                        document["histogram"],
                        title=f"Daily change in emissions, {name.upper()} shifting",
                    ),
                    overwrite=True,
                )
            )
        else:
            logger.warning("%s has no valid days; no histogram", path)

    if network is not None:
        document = read_study_json(paths[0])
        dc_buses = document["config"]["datacenter_buses"]
        panels = {
            metric.value: _int_keys(document["bus_means"][metric.value])
            for metric in config.metrics
        }
        written.append(
            write_text(
                config.out / "network.svg",
                network_svg(
                    network.with_datacenter_loads(dc_buses, document["config"]["nominal_load"]),
                    panels,
                    title="Mean pre-shift nodal carbon intensity",
                ),
                overwrite=True,
            )
        )
    for path in written:
        print(f"Wrote {path}")
    return EXIT_OK


def _run(command: Callable[[CliConfig], int], args: argparse.Namespace) -> int:
    """Build the config, run ``command`` and map exceptions to exit codes."""
    try:
        return command(CliConfig.from_args(args))
    except DispatchError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_SOLVE
    except (ValueError, KeyError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INPUT


# ---- Parser ----


def setup_common_args(parser: argparse.ArgumentParser, case_required: bool = True) -> None:
    """Add --case, --out and the logging/progress flags to a parser."""
    parser.add_argument(
        "--case",
        required=case_required,
        help="Case file (MATPOWER-style .m) or the name of a bundled case",
    )
    parser.add_argument("--out", default="output", help="Output directory (default: output)")
    parser.add_argument(
        "--verbose", action="store_true", help="Log progress messages at INFO level."
    )


def setup_run_args(parser: argparse.ArgumentParser) -> None:
    """Add series, data-center, format and parallelism flags."""
    parser.add_argument("--series", help="Scenario CSV with load multipliers and p_max overrides")
    parser.add_argument(
        "--dc-buses", help="Comma-separated data-center bus ids (e.g. 103,107,204,322)"
    )
    parser.add_argument(
        "--dnom", type=float, default=250.0, help="Nominal data-center load in MW (default: 250)"
    )
    parser.add_argument(
        "--format",
        default="json,csv",
        help="Comma-separated output formats from json, csv, svg (default: json,csv)",
    )
    parser.add_argument(
        "--jobs", type=int, default=1, help="Worker processes for timesteps or days (default: 1)"
    )
    parser.add_argument(
        "--progress", action="store_true", help="Show a progress bar on standard error."
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Nodal carbon metrics, emissions accounting and load-shifting studies "
        "on DC optimal power flow dispatches."
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands", required=True)

    # Info command
    parser_info = subparsers.add_parser(
        "info", help="Show a case, its dispatch and all carbon metrics per bus."
    )
    setup_common_args(parser_info)
    parser_info.add_argument(
        "--metric", choices=METRIC_CHOICES, default="all", help="Metric to show (default: all)"
    )
    parser_info.add_argument(
        "--json", action="store_true", help="Output information in JSON format."
    )
    parser_info.set_defaults(func=cmd_info)

    # Metrics command
    parser_metrics = subparsers.add_parser(
        "metrics", help="Compute intensities and accounting for every timestep."
    )
    setup_common_args(parser_metrics)
    setup_run_args(parser_metrics)
    parser_metrics.add_argument(
        "--metric", choices=METRIC_CHOICES, default="all", help="Metric to write (default: all)"
    )
    parser_metrics.set_defaults(func=cmd_metrics)

    # Study command
    parser_study = subparsers.add_parser(
        "study", help="Shift data-center load day by day, re-dispatch and re-account."
    )
    setup_common_args(parser_study)
    setup_run_args(parser_study)
    parser_study.add_argument(
        "--eps", type=float, default=0.2, help="Data-center flexibility in [0, 1) (default: 0.2)"
    )
    parser_study.add_argument(
        "--horizon", type=int, default=24, help="Timesteps per shifting day (default: 24)"
    )
    parser_study.add_argument(
        "--shift-metric",
        choices=METRIC_CHOICES,
        default="all",
        help="Metric that guides shifting; 'all' also writes the cross-metric matrix",
    )
    parser_study.add_argument(
        "--account-metric",
        choices=[metric.value for metric in ALL_METRICS],
        help="Also print the DC emission change accounted with this metric",
    )
    parser_study.set_defaults(func=cmd_study)

    # Export-plot command
    parser_plot = subparsers.add_parser(
        "export-plot", help="Render histogram and network SVGs from study outputs in --out."
    )
    setup_common_args(parser_plot, case_required=False)
    parser_plot.add_argument(
        "--shift-metric",
        choices=METRIC_CHOICES,
        default="all",
        help="Studies to plot (default: all found)",
    )
    parser_plot.add_argument(
        "--metric",
        choices=METRIC_CHOICES,
        default="all",
        help="Network panels to draw (default: all)",
    )
    parser_plot.set_defaults(func=cmd_export_plot)
    return parser


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        format="%(levelname)s: %(message)s",
        level=logging.INFO if verbose else logging.WARNING,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the CLI."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # usage errors are input errors; --help exits cleanly
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT
    configure_logging(getattr(args, "verbose", False))
    return _run(args.func, args)


if __name__ == "__main__":
    sys.exit(main())
