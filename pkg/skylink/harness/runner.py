import math
import typing as t
from dataclasses import dataclass

import numpy as np

from skylink.base import Error
from skylink.channel.models import TransmittanceSeries
from skylink.channel.turbulence import (
    channel_statistics,
    synthesize_turbulence,
)
from skylink.detection.detection import (
    detect,
    sample_occupied_train,
    two_detector_visibility,
    visibility,
)
from skylink.detection.models import DetectionDiagnostics, DetectionEvents
from skylink.harness.models import (
    RunDiagnostics,
    RunReport,
    Scenario,
    StageError,
    SweepRow,
    VisibilityMode,
)
from skylink.harness.scenarios import with_value
from skylink.keyrate.keyrate import key_report
from skylink.protocol.models import Basis, SiftedTally
from skylink.protocol.protocol import generate_pulse_train, sift
from skylink.tracking.models import LoopReport, Mode
from skylink.tracking.tracking import coupling_efficiency, run_loop
from skylink.utils.hash_utils import derive_seed, make_rng
from skylink.utils.math_utils import exact_mean

# Slots used by the phase-scan visibility acquisition.
SCAN_SLOTS = 2_000_000


@dataclass
class BlockArtifacts:
    series: TransmittanceSeries
    loop: LoopReport
    link_transmittance: np.ndarray
    tally: SiftedTally
    diagnostics: DetectionDiagnostics
    occupied_slots: int
    visibility: t.Optional[float]
    events: t.Optional[DetectionEvents] = None


@dataclass
class RunArtifacts:
    report: RunReport
    blocks: t.List[BlockArtifacts]


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, traceback):
        if isinstance(exc, Error) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def run_tracking(
    scenario: Scenario, mode: t.Optional[Mode] = None, block: int = 0
) -> t.Tuple[TransmittanceSeries, LoopReport]:
    with _Stage("turbulence"):
        series = synthesize_turbulence(
            scenario.turbulence,
            scenario.duration_s,
            scenario.dt_s,
            make_rng(scenario.seed, "turbulence", block),
            base_transmittance=scenario.budget.transmittance,
        )
    with _Stage("tracking"):
        loop = run_loop(
            series,
            scenario.tracking,
            make_rng(scenario.seed, "tracking", block),
            mode=mode,
        )
    return series, loop


def link_transmittance(
    scenario: Scenario, series: TransmittanceSeries, loop: LoopReport
) -> np.ndarray:
    """Budget times coupling relative to the nominal offset times
    scintillation, per time step. Steps after a loop divergence carry no
    light."""
    tracking = scenario.tracking
    reference = coupling_efficiency(
        (tracking.nominal_offset_m, 0.0), tracking.mode_radius_m
    )
    coupling = np.zeros(len(series))
    coupling[: loop.eta.size] = loop.eta / reference
    return np.clip(series.transmittance * coupling, 0.0, 1.0)


def _tally_visibility(tally: SiftedTally) -> t.Optional[float]:
    errors = tally.total_errors(Basis.X)
    matches = tally.total(Basis.X) - errors
    if not matches + errors:
        return None
    return visibility(max(matches, errors), min(matches, errors))


def run_block(
    scenario: Scenario, block: int, keep_events: bool = False
) -> BlockArtifacts:
    series, loop = run_tracking(scenario, block=block)
    transmittance = link_transmittance(scenario, series, loop)

    source = scenario.source
    bin_slots = int(round(scenario.dt_s / source.slot_period_s))
    chunk_bins = max(1, int(round(scenario.chunk_s / scenario.dt_s)))
    rng = make_rng(scenario.seed, "detection", block)
    tally = None
    diagnostics = DetectionDiagnostics()
    last_clicks = None
    occupied = 0
    kept_events = []
    for first_bin in range(0, transmittance.size, chunk_bins):
        chunk = transmittance[first_bin : first_bin + chunk_bins]
        with _Stage("pulse train"):
            train = sample_occupied_train(
                source,
                scenario.detectors,
                scenario.receiver,
                chunk,
                bin_slots,
                rng,
                start=first_bin * bin_slots,
            )
        with _Stage("detection"):
            events = detect(
                train,
                None,
                scenario.detectors,
                scenario.imzi,
                rng,
                scenario.receiver,
                last_clicks,
            )
        with _Stage("sifting"):
            chunk_tally = sift(train, events)
        if keep_events:
            kept_events.append(events)
        last_clicks = events.last_clicks
        diagnostics = diagnostics.merge(events.diagnostics)
        occupied += len(train)
        tally = chunk_tally if tally is None else tally.merge(chunk_tally)

    with _Stage("visibility"):
        if scenario.visibility_mode is VisibilityMode.PHASE_SCAN:
            scan = generate_pulse_train(
                SCAN_SLOTS,
                source,
                make_rng(scenario.seed, "phase scan", block),
            )
            block_visibility = two_detector_visibility(
                scan,
                float(transmittance.mean()),
                scenario.detectors,
                scenario.imzi,
                make_rng(scenario.seed, "phase scan detection", block),
                scenario.receiver,
            )
        else:
            block_visibility = _tally_visibility(tally)
    return BlockArtifacts(
        series=series,
        loop=loop,
        link_transmittance=transmittance,
        tally=tally,
        diagnostics=diagnostics,
        occupied_slots=occupied,
        visibility=block_visibility,
        events=concatenate_events(kept_events) if keep_events else None,
    )


def run_scenario_artifacts(
    scenario: Scenario, keep_events: bool = False
) -> RunArtifacts:
    blocks = [
        run_block(scenario, block, keep_events)
        for block in range(scenario.blocks)
    ]
    source = scenario.source
    with _Stage("key rate"):
        reports = [
            key_report(
                block.tally,
                source.mu_signal,
                source.mu_decoy,
                source.p_signal,
                scenario.finite_key,
            )
            for block in blocks
        ]
    with _Stage("channel statistics"):
        channel = channel_statistics(
            np.concatenate([block.series.intensity for block in blocks]),
            scenario.beacon_wavelength_m,
            scenario.beam.link_length_m,
            quoted_cn2=scenario.quoted.cn2,
        )
    visibilities = [block.visibility for block in blocks]
    measured = [value for value in visibilities if value is not None]
    diagnostics = RunDiagnostics(
        multi_click_discards=sum(
            block.tally.multi_click_discards for block in blocks
        ),
        gated_out=sum(block.diagnostics.gated_out for block in blocks),
        dead_time_suppressed=sum(
            block.diagnostics.dead_time_suppressed for block in blocks
        ),
        dark_clicks=sum(block.diagnostics.dark_clicks for block in blocks),
        occupied_slots=sum(block.occupied_slots for block in blocks),
    )
    report = RunReport(
        scenario=scenario,
        blocks=reports,
        tallies=[block.tally for block in blocks],
        mean_skr_bps=exact_mean(report.skr_bps for report in reports),
        visibilities=visibilities,
        mean_visibility=exact_mean(measured) if measured else None,
        tracking=[block.loop.summary() for block in blocks],
        channel=channel,
        diagnostics=diagnostics,
    )
    return RunArtifacts(report=report, blocks=blocks)


def run_scenario(scenario: Scenario) -> RunReport:
    """Turbulence, tracking, pulse train, detection, sifting, bounds and
    key length for every block of the scenario."""
    return run_scenario_artifacts(scenario).report


def _mean_or_none(values: t.Iterable[t.Optional[float]]):
    present = [value for value in values if value is not None]
    return exact_mean(present) if present else None


def sweep(
    base: Scenario, axis: str, values: t.Sequence[float]
) -> t.List[SweepRow]:
    rows = []
    for index, value in enumerate(values):
        scenario = with_value(base, axis, value).model_copy(
            update={"seed": derive_seed(base.seed, "sweep", index)}
        )
        report = run_scenario(scenario)
        rows.append(
            SweepRow(
                value=value,
                mean_skr_bps=report.mean_skr_bps,
                mean_qber_z=_mean_or_none(b.qber_z for b in report.blocks),
                mean_qber_x=_mean_or_none(b.qber_x for b in report.blocks),
            )
        )
    return rows


def is_non_increasing(rows: t.Sequence[SweepRow]) -> bool:
    skr = [row.mean_skr_bps for row in rows]
    return all(
        later <= earlier or math.isclose(later, earlier)
        for earlier, later in zip(skr, skr[1:])
    )


def concatenate_events(
    chunks: t.Sequence[DetectionEvents],
) -> DetectionEvents:
    if not chunks:
        return DetectionEvents.empty()
    diagnostics = DetectionDiagnostics()
    for chunk in chunks:
        diagnostics = diagnostics.merge(chunk.diagnostics)
    return DetectionEvents(
        slot=np.concatenate([chunk.slot for chunk in chunks]),
        detector=np.concatenate([chunk.detector for chunk in chunks]),
        bin=np.concatenate([chunk.bin for chunk in chunks]),
        time_s=np.concatenate([chunk.time_s for chunk in chunks]),
        diagnostics=diagnostics,
        last_clicks=chunks[-1].last_clicks,
    )
