import sys
import typing as t
from argparse import ArgumentParser, ArgumentTypeError, Namespace
from pathlib import Path

from skylink.base import (
    ContractViolation,
    DataError,
    StatisticError,
    ValidationError,
)
from skylink.config import Config, ConfigError
from skylink.harness import traces
from skylink.harness.models import Scenario, StageError
from skylink.harness.runner import (
    is_non_increasing,
    run_scenario_artifacts,
    run_tracking,
    sweep,
)
from skylink.harness.scenarios import (
    find_scenario,
    lint_scenario,
    load_scenario,
    read_raw,
)
from skylink.keyrate.keyrate import key_report
from skylink.keyrate.models import FiniteKeyParams
from skylink.protocol.models import SiftedTally, SourceConfig
from skylink.tools.journal import Journal
from skylink.tools.typer import Typer
from skylink.tracking.models import Mode
from skylink.utils import date_utils

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_BOUND_FAILURE = 3


def make_parser() -> ArgumentParser:
    def is_debug(argument):
        if argument.lower() == "false":
            return False
        elif argument.lower() == "true":
            return True
        raise ArgumentTypeError("True or false expected.")

    def values_list(argument):
        try:
            return [float(value) for value in argument.split(",")]
        except ValueError:
            raise ArgumentTypeError(
                f"Comma separated numbers expected, got {argument!r}."
            )

    parser = ArgumentParser(prog="skylink")
    parser.add_argument("-debug", dest="debug", type=is_debug, default=True)
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate")
    simulate.add_argument("scenario")
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--blocks", type=int, default=None)
    simulate.add_argument("--duration-s", type=float, default=None)
    simulate.add_argument("--out", type=Path, default=None)
    simulate.add_argument("--events", action="store_true")

    sweep_ = commands.add_parser("sweep")
    sweep_.add_argument("scenario")
    sweep_.add_argument("--axis", required=True)
    sweep_.add_argument("--values", type=values_list, required=True)
    sweep_.add_argument("--out", type=Path, default=None)

    turbulence = commands.add_parser("turbulence")
    turbulence_commands = turbulence.add_subparsers(
        dest="turbulence_command", required=True
    )
    analyze = turbulence_commands.add_parser("analyze")
    analyze.add_argument("trace", type=Path)
    analyze.add_argument("--wavelength-nm", type=float, required=True)
    analyze.add_argument("--length-m", type=float, required=True)
    analyze.add_argument("--quoted-cn2", type=float, default=None)

    track = commands.add_parser("track")
    track.add_argument("scenario")
    track.add_argument(
        "--mode", type=Mode, choices=list(Mode), default=Mode.CLOSED
    )
    track.add_argument("--out", type=Path, default=None)

    keyrate = commands.add_parser("keyrate")
    keyrate.add_argument("--tally", type=Path, required=True)
    keyrate.add_argument("--scenario", default=None)
    keyrate.add_argument("--no-extrapolation", action="store_true")

    lint = commands.add_parser("lint")
    lint.add_argument("scenario")
    return parser


def _output_directory(
    out: t.Optional[Path], scenario: Scenario, label: str
) -> Path:
    if out:
        out.mkdir(parents=True, exist_ok=True)
        return out
    stamp = date_utils.now().strftime("%Y%m%dT%H%M%S")
    directory = (
        Config.router.runs_directory
        / f"{scenario.name}-{label}-{scenario.seed}-{stamp}"
    )
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def simulate(namespace: Namespace) -> int:
    scenario = load_scenario(namespace.scenario)
    overrides = {
        "seed": namespace.seed,
        "blocks": namespace.blocks,
        "duration_s": namespace.duration_s,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        scenario = Scenario.model_validate(
            {**scenario.model_dump(), **overrides}
        )
    link_time = date_utils.duration_str(
        scenario.duration_s * scenario.blocks
    )
    Typer.header(
        f"Simulating {link_time} of {scenario.name} (seed {scenario.seed})"
    )
    artifacts = run_scenario_artifacts(
        scenario, keep_events=namespace.events
    )
    report = artifacts.report

    directory = _output_directory(namespace.out, scenario, "simulate")
    (directory / "report.json").write_text(report.model_dump_json(indent=2))
    for index, block in enumerate(artifacts.blocks):
        traces.write_channel_trace(
            directory / f"channel_trace_{index}.csv", block.series
        )
        traces.write_tracking_trace(
            directory / f"tracking_trace_{index}.csv", block.loop
        )
        (directory / f"tally_{index}.json").write_text(
            block.tally.model_dump_json(indent=2)
        )
        if block.events is not None:
            traces.write_events(
                directory / f"events_{index}.csv", block.events
            )

    Typer.table(
        [
            (
                index,
                block.skr_bps / 1e3,
                block.qber_z,
                block.qber_x,
                block.key_length_bits,
                block.bound_failed,
            )
            for index, block in enumerate(report.blocks)
        ],
        headers=["block", "skr_kbps", "qber_z", "qber_x", "bits", "failed"],
        title="Blocks",
    )
    Typer.body(f"Mean SKR: {report.mean_skr_bps / 1e3:.2f} kbps")
    if report.mean_visibility is not None:
        Typer.body(f"Mean visibility: {report.mean_visibility:.4f}")
    Typer.body(f"Report written to {directory.as_posix()}")
    return EXIT_BOUND_FAILURE if report.bound_failed else EXIT_OK


def sweep_command(namespace: Namespace) -> int:
    scenario = load_scenario(namespace.scenario)
    Typer.header(f"Sweeping {namespace.axis} for {scenario.name}")
    rows = sweep(scenario, namespace.axis, namespace.values)
    directory = _output_directory(namespace.out, scenario, "sweep")
    traces.write_sweep(directory / "sweep.csv", rows)
    Typer.table(
        [
            (
                row.value,
                row.mean_skr_bps / 1e3,
                row.mean_qber_z,
                row.mean_qber_x,
            )
            for row in rows
        ],
        headers=[namespace.axis, "skr_kbps", "qber_z", "qber_x"],
    )
    if not is_non_increasing(rows):
        Typer.body("Key rate is not monotone along the axis.")
    return EXIT_OK


def turbulence_command(namespace: Namespace) -> int:
    statistics = traces.analyze_trace(
        namespace.trace,
        wavelength_m=namespace.wavelength_nm * 1e-9,
        link_length_m=namespace.length_m,
        quoted_cn2=namespace.quoted_cn2,
    )
    fried = (
        "unbounded (turbulence-free)"
        if statistics.infinite_resolution
        else f"{statistics.fried_parameter_m:.4g} m"
    )
    Typer.list(
        [
            f"Samples: {statistics.samples}",
            f"Scintillation index: {statistics.scintillation_index:.4g}",
            "Log-intensity variance:"
            f" {statistics.log_intensity_variance:.4g}",
            f"Cn2: {statistics.cn2:.4g} m^-2/3",
            f"Fried parameter: {fried}",
            f"Regime: {statistics.regime.value}",
        ],
        enumerated=False,
        title=f"Turbulence of {namespace.trace.name}",
    )
    if statistics.discrepancy:
        Typer.body(
            "Computed Cn2 differs from the quoted"
            f" {statistics.quoted_cn2:.4g}"
            f" by {statistics.cn2_discrepancy:.1%}."
        )
    return EXIT_OK


def track(namespace: Namespace) -> int:
    scenario = load_scenario(namespace.scenario)
    series, loop = run_tracking(scenario, mode=namespace.mode)
    directory = _output_directory(namespace.out, scenario, "track")
    traces.write_tracking_trace(directory / "tracking_trace.csv", loop)
    summary = loop.summary()
    Typer.list(
        [
            f"Mode: {summary.mode.value}",
            f"Mean error: {summary.mean_error_m * 1e6:.1f} µm",
            f"Standard deviation: {summary.std_error_m * 1e6:.1f} µm",
            f"Saturated readings: {summary.saturations}",
            f"Unstable: {summary.unstable}",
        ],
        enumerated=False,
        title=f"Tracking {scenario.name}",
    )
    return EXIT_OK


def keyrate(namespace: Namespace) -> int:
    if not namespace.tally.is_file():
        raise DataError(
            f"DataError: tally {namespace.tally.as_posix()!r} not found."
        )
    try:
        tally = SiftedTally.model_validate_json(namespace.tally.read_text())
    except ValidationError as error:
        raise DataError(f"DataError: malformed tally. {error}")
    if namespace.scenario:
        scenario = load_scenario(namespace.scenario)
        source, params = scenario.source, scenario.finite_key
    else:
        source, params = SourceConfig(), FiniteKeyParams()
    report = key_report(
        tally,
        source.mu_signal,
        source.mu_decoy,
        source.p_signal,
        params,
        extrapolate=not namespace.no_extrapolation,
    )
    Typer.print_(report.model_dump_json(indent=2))
    return EXIT_BOUND_FAILURE if report.bound_failed else EXIT_OK


def lint(namespace: Namespace) -> int:
    path = find_scenario(namespace.scenario)
    problems = lint_scenario(read_raw(path))
    if problems:
        Typer.list(problems, title=f"{path.name}: unlabelled values")
        return EXIT_CONFIG
    Typer.header(f"{path.name}: every value is labelled.")
    return EXIT_OK


COMMANDS: t.Dict[str, t.Callable[[Namespace], int]] = {
    "simulate": simulate,
    "sweep": sweep_command,
    "turbulence": turbulence_command,
    "track": track,
    "keyrate": keyrate,
    "lint": lint,
}


def exit_code(error: Exception) -> int:
    if isinstance(error, StageError):
        return exit_code(error.error)
    if isinstance(error, (ConfigError, ValidationError)):
        return EXIT_CONFIG
    if isinstance(error, (DataError, StatisticError, ContractViolation)):
        return EXIT_DATA
    raise error


def start(namespace: Namespace) -> int:
    Config.make(debug=namespace.debug)
    error = None
    try:
        code = COMMANDS[namespace.command](namespace)
    except Exception as e:
        error = e
        code = exit_code(e)
        Typer.header(str(e))
    finally:
        subject = getattr(namespace, "scenario", None) or ""
        Journal.record(
            Config.router.run_log,
            f"{namespace.command} {subject}".strip(),
            error,
        )
    return code


if __name__ == "__main__":
    arguments_parser = make_parser()
    sys.exit(start(namespace=arguments_parser.parse_args()))
