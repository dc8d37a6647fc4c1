import math
import typing as t
from enum import Enum, unique

from skylink.base import Error, Field, Model, model_validator
from skylink.channel.models import (
    BEACON_WAVELENGTH_M,
    BeamParams,
    ChannelStatistics,
    LinkBudget,
    TurbulenceParams,
)
from skylink.detection.models import DetectorSet, ImziConfig, ReceiverConfig
from skylink.keyrate.models import FiniteKeyParams, KeyReport
from skylink.protocol.models import SiftedTally, SourceConfig
from skylink.tracking.models import LoopSummary, TrackingConfig


@unique
class Provenance(str, Enum):
    PAPER = "paper"
    CALIBRATION = "calibration"
    SIMULATION = "simulation"


@unique
class VisibilityMode(str, Enum):
    # Both interferometer ports recorded at once.
    BOTH_PORTS = "both_ports"
    # One port, phase stepped by pi between two acquisitions.
    PHASE_SCAN = "phase_scan"


class QuotedChannel(Model):
    scintillation_index: t.Optional[float] = None
    cn2: t.Optional[float] = None
    fried_parameter_m: t.Optional[float] = None


class Scenario(Model):
    name: str
    description: str = ""
    seed: int = Field(default=0, ge=0, lt=2**64)
    duration_s: float = Field(default=2.0, gt=0)
    blocks: int = Field(default=1, ge=1)
    dt_s: float = Field(default=1e-3, gt=0)
    chunk_s: float = Field(default=0.05, gt=0)
    beacon_wavelength_m: float = Field(default=BEACON_WAVELENGTH_M, gt=0)
    beam: BeamParams
    budget: LinkBudget
    turbulence: TurbulenceParams = Field(default_factory=TurbulenceParams)
    source: SourceConfig = Field(default_factory=SourceConfig)
    detectors: DetectorSet = Field(default_factory=DetectorSet)
    receiver: ReceiverConfig = Field(default_factory=ReceiverConfig)
    imzi: ImziConfig = Field(default_factory=ImziConfig)
    tracking: TrackingConfig = Field(default_factory=TrackingConfig)
    finite_key: FiniteKeyParams = Field(default_factory=FiniteKeyParams)
    visibility_mode: VisibilityMode = VisibilityMode.BOTH_PORTS
    quoted: QuotedChannel = Field(default_factory=QuotedChannel)
    provenance: t.Dict[str, Provenance] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_delay(self) -> "Scenario":
        if not math.isclose(
            self.imzi.delay_s, self.source.bin_delay_s, rel_tol=1e-6
        ):
            raise ValueError(
                f"Interferometer delay {self.imzi.delay_s!r} s must equal"
                f" the bin separation {self.source.bin_delay_s!r} s."
            )
        return self


class RunDiagnostics(Model):
    multi_click_discards: int = 0
    gated_out: int = 0
    dead_time_suppressed: int = 0
    dark_clicks: int = 0
    occupied_slots: int = 0


class RunReport(Model):
    scenario: Scenario
    blocks: t.List[KeyReport]
    tallies: t.List[SiftedTally]
    mean_skr_bps: float
    visibilities: t.List[t.Optional[float]]
    mean_visibility: t.Optional[float] = None
    tracking: t.List[LoopSummary]
    channel: ChannelStatistics
    diagnostics: RunDiagnostics

    @property
    def bound_failed(self) -> bool:
        return any(block.bound_failed for block in self.blocks)


class SweepRow(Model):
    value: float
    mean_skr_bps: float
    mean_qber_z: t.Optional[float] = None
    mean_qber_x: t.Optional[float] = None


class StageError(Error):
    def __init__(self, stage: str, error: Exception):
        self.stage = stage
        self.error = error
        super().__init__(f"StageError: {stage} failed. {error}")
