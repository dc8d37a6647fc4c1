import typing as t
from dataclasses import dataclass, field
from enum import IntEnum, unique

import numpy as np

from skylink.base import Field, Model, model_validator
from skylink.protocol.models import BIN_DELAY_S


@unique
class Detector(IntEnum):
    Z = 0
    X_OUT1 = 1
    # Minimum-interference monitor port.
    X_OUT2 = 2


@unique
class Bin(IntEnum):
    EARLY = 0
    CENTRAL = 1
    LATE = 2


class DetectorConfig(Model):
    efficiency: float = Field(default=0.85, ge=0, le=1)
    dark_rate_hz: float = Field(default=100.0, ge=0)
    dead_time_s: float = Field(default=20e-9, ge=0)
    jitter_std_s: float = Field(default=50e-12, ge=0)


class DetectorSet(Model):
    z: DetectorConfig = Field(default_factory=DetectorConfig)
    x_out1: DetectorConfig = Field(default_factory=DetectorConfig)
    x_out2: DetectorConfig = Field(default_factory=DetectorConfig)

    def __getitem__(self, detector: Detector) -> DetectorConfig:
        return getattr(self, detector.name.lower())

    def dark_probabilities(self, slot_period_s: float) -> np.ndarray:
        rates = np.array([self[d].dark_rate_hz for d in Detector])
        return -np.expm1(-rates * slot_period_s)


class ImziConfig(Model):
    delay_s: float = Field(default=BIN_DELAY_S, gt=0)
    intrinsic_visibility: float = Field(default=1.0, ge=0, le=1)
    phase_rad: float = 0.0
    insertion_loss_db: float = Field(default=0.0, ge=0)
    drift_rate_rad_per_s: float = 0.0

    def phase_at(self, time_s):
        return self.phase_rad + self.drift_rate_rad_per_s * time_s


class ReceiverConfig(Model):
    split_z: float = Field(default=0.5, ge=0, le=1)
    internal_loss_db: float = Field(default=0.0, ge=0)
    gate_fraction: float = Field(default=0.25, gt=0, le=0.5)
    sync_jitter_s: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def validate_split(self) -> "ReceiverConfig":
        if self.split_z in (0.0, 1.0):
            raise ValueError("Both receiver bases must receive light.")
        return self


class DetectionEvent(Model):
    slot_index: int = Field(ge=0)
    detector: Detector
    bin: Bin
    timestamp_s: float


@dataclass
class DetectionDiagnostics:
    gated_out: int = 0
    dead_time_suppressed: int = 0
    dark_clicks: int = 0

    def merge(
        self, other: "DetectionDiagnostics"
    ) -> "DetectionDiagnostics":
        return DetectionDiagnostics(
            gated_out=self.gated_out + other.gated_out,
            dead_time_suppressed=(
                self.dead_time_suppressed + other.dead_time_suppressed
            ),
            dark_clicks=self.dark_clicks + other.dark_clicks,
        )


def _no_clicks() -> t.Dict[Detector, float]:
    return {detector: -np.inf for detector in Detector}


@dataclass
class DetectionEvents:
    """Columnar events sorted by slot then detector."""

    slot: np.ndarray
    detector: np.ndarray
    bin: np.ndarray
    time_s: np.ndarray
    diagnostics: DetectionDiagnostics = field(
        default_factory=DetectionDiagnostics
    )
    # Time of the last registered click per detector, for dead time
    # continuity across chunks.
    last_clicks: t.Dict[Detector, float] = field(default_factory=_no_clicks)

    @property
    def size(self) -> int:
        return self.slot.size

    @classmethod
    def empty(cls) -> "DetectionEvents":
        return cls(
            slot=np.empty(0, dtype=np.int64),
            detector=np.empty(0, dtype=np.int8),
            bin=np.empty(0, dtype=np.int8),
            time_s=np.empty(0, dtype=float),
        )

    def events(self) -> t.Iterator[DetectionEvent]:
        for position in range(self.size):
            yield DetectionEvent(
                slot_index=int(self.slot[position]),
                detector=Detector(int(self.detector[position])),
                bin=Bin(int(self.bin[position])),
                timestamp_s=float(self.time_s[position]),
            )
