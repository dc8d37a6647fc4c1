import math
import typing as t

import numpy as np
from scipy import constants

from skylink.base import ContractViolation, DataError, StatisticError
from skylink.detection.models import Bin, DetectionEvents, Detector
from skylink.protocol.models import (
    Basis,
    BinAmplitudes,
    Intensity,
    PulseSlot,
    PulseTrain,
    SiftedTally,
    SourceConfig,
    TimeBinState,
)

SQRT_HALF = 1 / math.sqrt(2)

AMPLITUDES = {
    TimeBinState.EARLY: BinAmplitudes(early=1 + 0j, late=0j),
    TimeBinState.LATE: BinAmplitudes(early=0j, late=1 + 0j),
    TimeBinState.PLUS: BinAmplitudes(
        early=SQRT_HALF + 0j, late=SQRT_HALF + 0j
    ),
}


def draw_states(
    n: int, source: SourceConfig, rng: np.random.Generator
) -> np.ndarray:
    is_z = rng.random(n) < source.p_z
    late = rng.random(n) < 0.5
    return np.where(
        is_z,
        np.where(late, TimeBinState.LATE, TimeBinState.EARLY),
        TimeBinState.PLUS,
    ).astype(np.int8)


def draw_intensities(
    n: int, source: SourceConfig, rng: np.random.Generator
) -> np.ndarray:
    decoy = rng.random(n) >= source.p_signal
    return decoy.astype(np.int8)


def generate_pulse_train(
    n: int,
    source: SourceConfig,
    rng: np.random.Generator,
    start: int = 0,
) -> PulseTrain:
    """Dense train of `n` consecutive slots starting at slot `start`.

    Draw order is fixed: basis and state, then intensity, then the
    emitted photon numbers.
    """
    if n <= 0:
        raise ContractViolation(
            f"ContractViolation: pulse train length must be positive, got"
            f" {n!r}."
        )
    state = draw_states(n, source, rng)
    intensity = draw_intensities(n, source, rng)
    mean_photons = np.asarray(source.mus)[intensity]
    photons = rng.poisson(mean_photons)
    return PulseTrain(
        index=np.arange(start, start + n, dtype=np.int64),
        state=state,
        intensity=intensity,
        mean_photons=mean_photons,
        photons=photons,
        slot_period_s=source.slot_period_s,
        bin_delay_s=source.bin_delay_s,
        leakage=source.leakage,
        n_slots=n,
        start=start,
    )


def state_amplitudes(state: TimeBinState) -> BinAmplitudes:
    return AMPLITUDES[TimeBinState(state)]


def encode_amplitudes(slot: PulseSlot) -> BinAmplitudes:
    return state_amplitudes(slot.state)


def photons_per_pulse(
    power_w: float,
    wavelength_m: float,
    rate_hz: float,
    attenuation_db: float,
) -> float:
    """Mean photon number per pulse after the attenuation chain."""
    if min(power_w, wavelength_m, rate_hz) <= 0 or attenuation_db < 0:
        raise ContractViolation(
            "ContractViolation: power, wavelength and rate must be positive"
            " and attenuation non-negative."
        )
    photon_energy = constants.h * constants.c / wavelength_m
    transmitted_w = power_w * 10 ** (-attenuation_db / 10)
    return transmitted_w / (rate_hz * photon_energy)


def _per_intensity(intensity: np.ndarray) -> t.Dict[Intensity, int]:
    counts = np.bincount(intensity, minlength=len(Intensity))
    return {k: int(counts[k.code]) for k in Intensity}


def sift(train: PulseTrain, events: DetectionEvents) -> SiftedTally:
    """Tallies Z and X counts per intensity.

    Slots where more than one detector fired are dropped. A Z error is a
    click in the bin opposite to the prepared one, an X error is a central
    click on the port that is dark for phase 0.
    """
    elapsed_s = train.duration_s
    if events.size == 0:
        return SiftedTally(
            elapsed_s=elapsed_s,
            true_z_vacuum=0,
            true_z_single=0,
        )

    rows = np.searchsorted(train.index, events.slot)
    inside = rows < len(train)
    inside[inside] = train.index[rows[inside]] == events.slot[inside]
    if not inside.all():
        bad = int(events.slot[~inside][0])
        raise DataError(
            f"DataError: event references slot {bad!r} outside the"
            " transmitted train."
        )

    _, inverse, clicks = np.unique(
        events.slot, return_inverse=True, return_counts=True
    )
    single = clicks[inverse] == 1
    rows = rows[single]
    detector = events.detector[single]
    bin_ = events.bin[single]
    state = train.state[rows]
    intensity = train.intensity[rows]

    z = (
        (state != TimeBinState.PLUS)
        & (detector == Detector.Z)
        & ((bin_ == Bin.EARLY) | (bin_ == Bin.LATE))
    )
    expected = np.where(state == TimeBinState.EARLY, Bin.EARLY, Bin.LATE)
    z_error = z & (bin_ != expected)
    x = (
        (state == TimeBinState.PLUS)
        & (detector != Detector.Z)
        & (bin_ == Bin.CENTRAL)
    )
    x_error = x & (detector == Detector.X_OUT2)

    photons = train.photons[rows][z]
    return SiftedTally(
        n_z=_per_intensity(intensity[z]),
        m_z=_per_intensity(intensity[z_error]),
        n_x=_per_intensity(intensity[x]),
        m_x=_per_intensity(intensity[x_error]),
        elapsed_s=elapsed_s,
        multi_click_discards=int(np.count_nonzero(clicks > 1)),
        true_z_vacuum=int(np.count_nonzero(photons == 0)),
        true_z_single=int(np.count_nonzero(photons == 1)),
    )


def qber(tally: SiftedTally, basis: Basis) -> float:
    if not (total := tally.total(basis)):
        raise StatisticError(
            f"StatisticError: QBER undefined for the {basis.value} basis,"
            " no sifted counts."
        )
    return tally.total_errors(basis) / total
