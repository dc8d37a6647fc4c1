import math
import typing as t

import numpy as np
from scipy.stats import poisson

from skylink.base import ContractViolation, StatisticError
from skylink.detection.models import (
    Bin,
    DetectionDiagnostics,
    DetectionEvents,
    Detector,
    DetectorSet,
    ImziConfig,
    ReceiverConfig,
)
from skylink.protocol.models import (
    BinAmplitudes,
    PulseTrain,
    SourceConfig,
    TimeBinState,
)
from skylink.protocol.protocol import draw_states, state_amplitudes
from skylink.utils.math_utils import db_to_linear

X_PORTS = (Detector.X_OUT1, Detector.X_OUT2)
NORM_TOLERANCE = 1e-9


def imzi_table(
    early: np.ndarray,
    late: np.ndarray,
    phase: np.ndarray,
    visibility: float,
) -> np.ndarray:
    """Click probabilities of the delay interferometer, lossless.

    Returns an array of shape (..., 2, 3) indexed by output port
    (out1, out2) and bin (Early, Central, Late). The central bin mixes the
    short-arm late amplitude with the long-arm early amplitude; partial
    coherence weights their interference term by `visibility`.
    """
    early = np.asarray(early, dtype=complex)
    late = np.asarray(late, dtype=complex)
    rotation = np.exp(1j * np.asarray(phase, dtype=float))
    side_early = np.abs(early) ** 2 / 4
    side_late = np.abs(late) ** 2 / 4

    def central(short, long_):
        return (
            np.abs(short) ** 2
            + np.abs(long_) ** 2
            + 2 * visibility * np.real(short * np.conj(long_))
        )

    # out1: i*l/2 + i*e^{iφ}*e/2, out2: l/2 - e^{iφ}*e/2
    central_out1 = central(1j * late / 2, 1j * rotation * early / 2)
    central_out2 = central(late / 2, -rotation * early / 2)
    out1 = np.stack([side_early, central_out1, side_late], axis=-1)
    out2 = np.stack([side_early, central_out2, side_late], axis=-1)
    return np.stack([out1, out2], axis=-2)


def imzi_response(
    amps: BinAmplitudes,
    cfg: ImziConfig,
    phase: t.Optional[float] = None,
) -> t.Dict[t.Tuple[Detector, Bin], float]:
    if abs(amps.norm - 1) > NORM_TOLERANCE:
        raise ContractViolation(
            f"ContractViolation: amplitudes must be normalized, got norm"
            f" {amps.norm!r}."
        )
    table = imzi_table(
        amps.early,
        amps.late,
        cfg.phase_rad if phase is None else phase,
        cfg.intrinsic_visibility,
    ) * db_to_linear(cfg.insertion_loss_db)
    return {
        (port, bin_): float(table[port_index, bin_])
        for port_index, port in enumerate(X_PORTS)
        for bin_ in Bin
    }


def sample_occupied_train(
    source: SourceConfig,
    detectors: DetectorSet,
    receiver: ReceiverConfig,
    transmittance: np.ndarray,
    bin_slots: int,
    rng: np.random.Generator,
    start: int = 0,
) -> PulseTrain:
    """Sparse pulse train holding only slots that can produce a click.

    `transmittance` is piecewise constant over bins of `bin_slots` slots.
    A slot is occupied when at least one photon reaches the receiver or a
    detector draws a dark count. Occupied slots are placed as a Poisson
    process in cumulative hazard, then their intensity, photon numbers and
    dark candidates are drawn conditioned on being occupied. The marginal
    statistics equal those of the dense train.
    """
    transmittance = np.asarray(transmittance, dtype=float)
    n_bins = transmittance.size
    eta = transmittance * db_to_linear(receiver.internal_loss_db)
    mus = np.asarray(source.mus)
    weights = np.asarray(source.intensity_probabilities)
    dark = detectors.dark_probabilities(source.slot_period_s)
    no_dark = float(np.prod(1 - dark))

    arriving = np.outer(mus, eta)
    quiet = np.exp(-arriving) * no_dark
    p_occupied = 1 - weights @ quiet
    hazard = -np.log1p(-np.minimum(p_occupied, 1 - 1e-15))
    boundaries = np.concatenate(([0.0], np.cumsum(hazard * bin_slots)))

    n_points = rng.poisson(boundaries[-1])
    points = np.sort(rng.random(n_points) * boundaries[-1])
    bins = np.clip(
        np.searchsorted(boundaries, points, side="right") - 1, 0, n_bins - 1
    )
    offsets = np.floor(
        np.divide(
            points - boundaries[bins],
            hazard[bins],
            out=np.zeros_like(points),
            where=hazard[bins] > 0,
        )
    ).astype(np.int64)
    slots = np.unique(
        bins.astype(np.int64) * bin_slots
        + np.clip(offsets, 0, bin_slots - 1)
    )
    bins = slots // bin_slots
    m = slots.size

    a = arriving[:, bins]
    busy = 1 - quiet[:, bins]
    p_signal = weights[0] * busy[0] / (weights @ busy)
    intensity = (rng.random(m) >= p_signal).astype(np.int8)
    a_k = a[intensity, np.arange(m)]
    p_photon = -np.expm1(-a_k) / busy[intensity, np.arange(m)]
    has_photon = rng.random(m) < p_photon

    arrived = np.zeros(m, dtype=np.int64)
    arrived[has_photon] = zero_truncated_poisson(a_k[has_photon], rng)

    candidates = rng.random((m, len(Detector))) < dark
    dark_only = ~has_photon
    if dark_only.any() and dark.sum() > 0:
        survive = np.concatenate(([1.0], np.cumprod(1 - dark)[:-1]))
        first_weights = survive * dark
        cumulative = np.cumsum(first_weights) / first_weights.sum()
        first = np.searchsorted(
            cumulative, rng.random(int(dark_only.sum())), side="right"
        )
        first = np.minimum(first, len(Detector) - 1)
        columns = np.arange(len(Detector))
        forced = candidates[dark_only]
        forced = (forced & (columns > first[:, None])) | (
            columns == first[:, None]
        )
        candidates[dark_only] = forced

    mean_photons = mus[intensity]
    lost = rng.poisson(mean_photons * (1 - eta[bins]))
    return PulseTrain(
        index=start + slots,
        state=draw_states(m, source, rng),
        intensity=intensity,
        mean_photons=mean_photons,
        photons=arrived + lost,
        slot_period_s=source.slot_period_s,
        bin_delay_s=source.bin_delay_s,
        leakage=source.leakage,
        n_slots=n_bins * bin_slots,
        start=start,
        arrived=arrived,
        dark=candidates,
    )


def zero_truncated_poisson(
    mean: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Poisson draws conditioned on at least one event, by inversion."""
    mean = np.asarray(mean, dtype=float)
    empty = np.exp(-mean)
    target = empty + rng.random(mean.size) * -np.expm1(-mean)
    target = np.minimum(target, np.nextafter(1.0, 0.0))
    return np.maximum(poisson.ppf(target, mean), 1).astype(np.int64)


def apply_dead_time(
    times: np.ndarray, dead_time: float, last_click: float = -np.inf
) -> np.ndarray:
    """Mask of clicks registered by a non-paralyzable detector.

    `times` must be sorted. A click is registered iff no registered click
    happened within the preceding `dead_time`. Decided in passes: a click
    is resolved once every earlier click inside its window is resolved.
    """
    n = times.size
    kept = np.zeros(n, dtype=bool)
    if n == 0:
        return kept
    if dead_time <= 0:
        kept[:] = True
        return kept
    blocked = times - last_click < dead_time
    decided = blocked.copy()
    starts = np.searchsorted(times, times - dead_time, side="right")
    positions = np.arange(n)
    while not decided.all():
        undecided = np.concatenate(([0], np.cumsum(~decided)))
        registered = np.concatenate(([0], np.cumsum(kept)))
        open_ = undecided[positions] - undecided[starts]
        ready = ~decided & (open_ == 0)
        clicks = registered[positions] - registered[starts]
        kept[ready] = clicks[ready] == 0
        decided |= ready
    return kept


def detect(
    train: PulseTrain,
    transmittance: t.Union[float, np.ndarray, None],
    detectors: DetectorSet,
    imzi: ImziConfig,
    rng: np.random.Generator,
    receiver: t.Optional[ReceiverConfig] = None,
    last_clicks: t.Optional[t.Dict[Detector, float]] = None,
) -> DetectionEvents:
    """Receiver chain for one stretch of slots.

    Stage order: channel thinning, dark candidates, 50:50 basis split,
    Z-bin leakage or interferometer outcome, detector efficiency, earliest
    click per detector and slot, jitter, dead time, gating. Sparse trains
    already carry the channel and dark draws.
    """
    receiver = receiver or ReceiverConfig()
    n = len(train)
    period = train.slot_period_s
    tau = train.bin_delay_s
    if not math.isclose(imzi.delay_s, tau, rel_tol=1e-6):
        raise ContractViolation(
            f"ContractViolation: interferometer delay {imzi.delay_s!r} s"
            f" differs from the bin separation {tau!r} s."
        )

    if train.arrived is None:
        eta = np.broadcast_to(
            np.asarray(transmittance, dtype=float), (n,)
        ) * db_to_linear(receiver.internal_loss_db)
        if n and (eta.min() < 0 or eta.max() > 1):
            raise ContractViolation(
                "ContractViolation: transmittance must lie in [0, 1]."
            )
        arrived = rng.binomial(train.photons, eta)
    else:
        arrived = train.arrived
    if train.dark is None:
        dark = rng.random((n, len(Detector))) < (
            detectors.dark_probabilities(period)
        )
    else:
        dark = train.dark

    rows = np.repeat(np.arange(n), arrived)
    state = train.state[rows]
    to_z = rng.random(rows.size) < receiver.split_z

    # Z path
    z_rows, z_state = rows[to_z], state[to_z]
    u = rng.random(z_rows.size)
    late = np.where(
        z_state == TimeBinState.EARLY,
        u < train.leakage,
        np.where(z_state == TimeBinState.LATE, u >= train.leakage, u < 0.5),
    )
    z_hit = rng.random(z_rows.size) < detectors[Detector.Z].efficiency
    z_rows = z_rows[z_hit]
    z_offset = tau * late[z_hit].astype(float)

    # X path
    x_rows, x_state = rows[~to_z], state[~to_z]
    early = np.empty(x_rows.size, dtype=complex)
    late_amp = np.empty(x_rows.size, dtype=complex)
    for code in TimeBinState:
        amplitudes = state_amplitudes(code)
        early[x_state == code] = amplitudes.early
        late_amp[x_state == code] = amplitudes.late
    phase = imzi.phase_at(train.index[x_rows] * period)
    table = imzi_table(
        early, late_amp, phase, imzi.intrinsic_visibility
    ).reshape(x_rows.size, 2 * len(Bin))
    table *= db_to_linear(imzi.insertion_loss_db)
    outcome = (
        rng.random(x_rows.size)[:, None] >= np.cumsum(table, axis=1)
    ).sum(axis=1)
    seen = outcome < table.shape[1]
    x_port = np.asarray(X_PORTS)[np.minimum(outcome, 5) // len(Bin)]
    x_bin = np.minimum(outcome, 5) % len(Bin)
    efficiency = np.array([detectors[d].efficiency for d in Detector])
    x_hit = seen & (rng.random(x_rows.size) < efficiency[x_port])
    x_rows, x_port, x_bin = x_rows[x_hit], x_port[x_hit], x_bin[x_hit]

    # Dark candidates, uniform over the slot
    dark_rows, dark_detector = np.nonzero(dark)
    dark_offset = rng.random(dark_rows.size) * period

    gate = receiver.gate_fraction * tau
    click_rows = np.concatenate([z_rows, x_rows, dark_rows])
    click_detector = np.concatenate(
        [
            np.full(z_rows.size, Detector.Z),
            x_port,
            dark_detector,
        ]
    ).astype(np.int8)
    jitter_std = np.sqrt(
        np.array([detectors[d].jitter_std_s for d in Detector]) ** 2
        + receiver.sync_jitter_s**2
    )
    photon_offset = gate + np.concatenate([z_offset, tau * x_bin])
    photon_offset = photon_offset + rng.normal(
        0.0, 1.0, photon_offset.size
    ) * jitter_std[click_detector[: photon_offset.size]]
    click_offset = np.concatenate([photon_offset, dark_offset])

    # Earliest click per detector and slot
    key = click_rows * len(Detector) + click_detector
    order = np.lexsort((click_offset, key))
    key = key[order]
    first = np.concatenate(([True], key[1:] != key[:-1]))
    order = order[first]
    click_rows = click_rows[order]
    click_detector = click_detector[order]
    click_offset = click_offset[order]
    click_time = train.index[click_rows] * period + click_offset

    last_clicks = dict(last_clicks or {d: -np.inf for d in Detector})
    registered = np.zeros(click_rows.size, dtype=bool)
    for detector in Detector:
        mine = np.flatnonzero(click_detector == detector)
        mine = mine[np.argsort(click_time[mine], kind="stable")]
        kept = apply_dead_time(
            click_time[mine],
            detectors[detector].dead_time_s,
            last_clicks[detector],
        )
        registered[mine[kept]] = True
        if kept.any():
            last_clicks[detector] = float(click_time[mine[kept]].max())
    suppressed = int(np.count_nonzero(~registered))

    click_rows = click_rows[registered]
    click_detector = click_detector[registered]
    click_offset = click_offset[registered]
    click_time = click_time[registered]

    # Gating windows of +-gate around the bin centres. Three X bins plus
    # their windows span 2.5 tau, longer than the slot, so the X Late
    # side bin ends past the slot boundary. Its clicks keep the emitting
    # slot index and an absolute time inside the next slot.
    label = np.rint((click_offset - gate) / tau).astype(np.int64)
    last_bin = np.where(click_detector == Detector.Z, 1, 2)
    inside = (
        (label >= 0)
        & (label <= last_bin)
        & (np.abs(click_offset - gate - label * tau) <= gate)
    )
    # Z detector only has Early and Late bins
    label = np.where(
        (click_detector == Detector.Z) & (label == 1), Bin.LATE, label
    )
    gated_out = int(np.count_nonzero(~inside))

    slot = train.index[click_rows[inside]]
    detector = click_detector[inside]
    order = np.lexsort((detector, slot))
    return DetectionEvents(
        slot=slot[order],
        detector=detector[order],
        bin=label[inside][order].astype(np.int8),
        time_s=click_time[inside][order],
        diagnostics=DetectionDiagnostics(
            gated_out=gated_out,
            dead_time_suppressed=suppressed,
            dark_clicks=int(dark_rows.size),
        ),
        last_clicks=last_clicks,
    )


def visibility(max_counts: int, min_counts: int) -> float:
    if max_counts < min_counts:
        raise ContractViolation(
            f"ContractViolation: maximum {max_counts!r} is below minimum"
            f" {min_counts!r}."
        )
    if max_counts + min_counts <= 0:
        raise StatisticError(
            "StatisticError: visibility undefined without counts."
        )
    return (max_counts - min_counts) / (max_counts + min_counts)


def qber_x_from_visibility(visibility_: float) -> float:
    if not 0 <= visibility_ <= 1 or math.isnan(visibility_):
        raise ContractViolation(
            f"ContractViolation: visibility {visibility_!r} outside [0, 1]."
        )
    return (1 - visibility_) / 2


def two_detector_visibility(
    train: PulseTrain,
    transmittance: t.Union[float, np.ndarray, None],
    detectors: DetectorSet,
    imzi: ImziConfig,
    rng: np.random.Generator,
    receiver: t.Optional[ReceiverConfig] = None,
) -> float:
    """Visibility from one port only, acquired at phase φ and φ + π."""
    counts = []
    for shift in (0.0, math.pi):
        shifted = imzi.model_copy(
            update={"phase_rad": imzi.phase_rad + shift}
        )
        events = detect(
            train, transmittance, detectors, shifted, rng, receiver
        )
        rows = np.searchsorted(train.index, events.slot)
        central = (
            (train.state[rows] == TimeBinState.PLUS)
            & (events.detector == Detector.X_OUT1)
            & (events.bin == Bin.CENTRAL)
        )
        counts.append(int(np.count_nonzero(central)))
    return visibility(max(counts), min(counts))
