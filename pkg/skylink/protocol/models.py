import math
import typing as t
from dataclasses import dataclass
from enum import Enum, IntEnum, unique

import numpy as np

from skylink.base import ContractViolation, Field, Model, model_validator

QUBIT_RATE_HZ = 595e6
BIN_DELAY_S = 800e-12


@unique
class TimeBinState(IntEnum):
    EARLY = 0
    LATE = 1
    # The only X state that is prepared, Minus is only ever measured.
    PLUS = 2

    @property
    def basis(self) -> "Basis":
        return Basis.X if self is TimeBinState.PLUS else Basis.Z


@unique
class Basis(str, Enum):
    Z = "Z"
    X = "X"


@unique
class Intensity(str, Enum):
    SIGNAL = "signal"
    DECOY = "decoy"

    @property
    def code(self) -> int:
        return list(Intensity).index(self)

    @classmethod
    def from_code(cls, code: int) -> "Intensity":
        try:
            return list(Intensity)[code]
        except IndexError:
            raise ContractViolation(
                f"ContractViolation: invalid intensity code {code!r}."
            )


class SourceConfig(Model):
    mu_signal: float = Field(default=0.5, gt=0)
    mu_decoy: float = Field(default=0.2, gt=0)
    p_signal: float = Field(default=0.7, gt=0, lt=1)
    p_z: float = Field(default=0.5, gt=0, lt=1)
    slot_period_s: float = Field(default=1 / QUBIT_RATE_HZ, gt=0)
    bin_delay_s: float = Field(default=BIN_DELAY_S, gt=0)
    extinction_ratio_db: float = Field(default=20.0, ge=0)

    @model_validator(mode="after")
    def validate_source(self) -> "SourceConfig":
        if self.mu_decoy >= self.mu_signal:
            raise ValueError(
                f"Decoy intensity {self.mu_decoy!r} must be below the"
                f" signal intensity {self.mu_signal!r}."
            )
        if self.slot_period_s <= 2 * self.bin_delay_s:
            raise ValueError(
                "Slot period must fit both time bins plus a guard."
            )
        return self

    @property
    def mus(self) -> t.Tuple[float, float]:
        return self.mu_signal, self.mu_decoy

    @property
    def intensity_probabilities(self) -> t.Tuple[float, float]:
        return self.p_signal, 1 - self.p_signal

    @property
    def leakage(self) -> float:
        """Probability of a Z pulse showing up in the opposite bin."""
        if math.isinf(self.extinction_ratio_db):
            return 0.0
        return 1 / (1 + 10 ** (self.extinction_ratio_db / 10))

    def mean_photons(self, intensity: Intensity) -> float:
        return self.mus[intensity.code]


class PulseSlot(Model):
    index: int = Field(ge=0)
    state: TimeBinState
    intensity: Intensity
    mean_photons: float = Field(ge=0)
    slot_period_s: float = Field(default=1 / QUBIT_RATE_HZ, gt=0)

    @property
    def basis(self) -> Basis:
        return self.state.basis


@dataclass(frozen=True)
class BinAmplitudes:
    early: complex
    late: complex

    @property
    def norm(self) -> float:
        return abs(self.early) ** 2 + abs(self.late) ** 2


@dataclass
class PulseTrain:
    """Columnar sequence of pulse slots.

    A sparse train only holds the slots that can produce a click and then
    also carries the channel outcomes already drawn for them: `arrived`
    photons at the receiver and `dark` candidates per detector.
    `photons` is the emitted photon number, kept as ground truth.
    """

    index: np.ndarray
    state: np.ndarray
    intensity: np.ndarray
    mean_photons: np.ndarray
    photons: np.ndarray
    slot_period_s: float
    bin_delay_s: float
    leakage: float
    n_slots: int
    start: int = 0
    arrived: t.Optional[np.ndarray] = None
    dark: t.Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.index.size

    @property
    def is_sparse(self) -> bool:
        return self.arrived is not None

    @property
    def duration_s(self) -> float:
        return self.n_slots * self.slot_period_s

    @property
    def is_z(self) -> np.ndarray:
        return self.state != TimeBinState.PLUS

    def slot(self, position: int) -> PulseSlot:
        return PulseSlot(
            index=int(self.index[position]),
            state=TimeBinState(int(self.state[position])),
            intensity=Intensity.from_code(int(self.intensity[position])),
            mean_photons=float(self.mean_photons[position]),
            slot_period_s=self.slot_period_s,
        )

    def slots(self) -> t.Iterator[PulseSlot]:
        for position in range(len(self)):
            yield self.slot(position)


def _zero_counts() -> t.Dict[Intensity, int]:
    return {intensity: 0 for intensity in Intensity}


class SiftedTally(Model):
    n_z: t.Dict[Intensity, int] = Field(default_factory=_zero_counts)
    n_x: t.Dict[Intensity, int] = Field(default_factory=_zero_counts)
    m_z: t.Dict[Intensity, int] = Field(default_factory=_zero_counts)
    m_x: t.Dict[Intensity, int] = Field(default_factory=_zero_counts)
    elapsed_s: float = Field(default=0.0, ge=0)
    multi_click_discards: int = Field(default=0, ge=0)
    true_z_vacuum: t.Optional[int] = None
    true_z_single: t.Optional[int] = None

    @model_validator(mode="after")
    def validate_counts(self) -> "SiftedTally":
        for counts in (self.n_z, self.n_x, self.m_z, self.m_x):
            for intensity in Intensity:
                counts.setdefault(intensity, 0)
        for basis in Basis:
            for intensity in Intensity:
                n = self.counts(basis)[intensity]
                m = self.errors(basis)[intensity]
                if not 0 <= m <= n:
                    raise ValueError(
                        f"Invalid {basis.value} tally for"
                        f" {intensity.value}: {m} errors over {n} counts."
                    )
        return self

    def counts(self, basis: Basis) -> t.Dict[Intensity, int]:
        return self.n_z if basis is Basis.Z else self.n_x

    def errors(self, basis: Basis) -> t.Dict[Intensity, int]:
        return self.m_z if basis is Basis.Z else self.m_x

    def total(self, basis: Basis) -> int:
        return sum(self.counts(basis).values())

    def total_errors(self, basis: Basis) -> int:
        return sum(self.errors(basis).values())

    def merge(self, other: "SiftedTally") -> "SiftedTally":
        def add(left, right):
            return {k: left[k] + right[k] for k in Intensity}

        def add_truth(left, right):
            if left is None or right is None:
                return None
            return left + right

        return SiftedTally(
            n_z=add(self.n_z, other.n_z),
            n_x=add(self.n_x, other.n_x),
            m_z=add(self.m_z, other.m_z),
            m_x=add(self.m_x, other.m_x),
            elapsed_s=self.elapsed_s + other.elapsed_s,
            multi_click_discards=(
                self.multi_click_discards + other.multi_click_discards
            ),
            true_z_vacuum=add_truth(
                self.true_z_vacuum, other.true_z_vacuum
            ),
            true_z_single=add_truth(
                self.true_z_single, other.true_z_single
            ),
        )
