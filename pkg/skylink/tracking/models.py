import math
import typing as t
from dataclasses import dataclass
from enum import Enum, unique

import numpy as np

from skylink.base import Field, Model

FQD_RESOLUTION_M = 0.75e-6
FQD_RANGE_M = 3.05e-3


@unique
class Mode(str, Enum):
    OPEN = "open"
    CLOSED = "closed"


@unique
class DerivativeMode(str, Enum):
    # e_D(t) = e_I(t) - e_I(t-1)
    LITERAL = "literal"
    # e_D(t) = e_P(t) - e_P(t-1)
    CONVENTIONAL = "conventional"


class PidGains(Model):
    kp: float = Field(default=0.0, allow_inf_nan=False)
    ki: float = Field(default=0.0, allow_inf_nan=False)
    kd: float = Field(default=0.0, allow_inf_nan=False)

    @property
    def is_open(self) -> bool:
        return self.kp == self.ki == self.kd == 0


class MirrorModel(Model):
    time_constant_s: float = Field(default=5e-3, ge=0)
    slew_rate_m_per_s: float = Field(default=0.1, gt=0)

    def step_fraction(self, dt: float) -> float:
        if not self.time_constant_s:
            return 1.0
        return -math.expm1(-dt / self.time_constant_s)


class FqdConfig(Model):
    resolution_m: float = Field(default=FQD_RESOLUTION_M, gt=0)
    range_m: float = Field(default=FQD_RANGE_M, gt=0)
    read_noise_m: float = Field(default=0.0, ge=0)


class TrackingConfig(Model):
    mode: Mode = Mode.CLOSED
    gains: PidGains = Field(default_factory=PidGains)
    mirror: MirrorModel = Field(default_factory=MirrorModel)
    fqd: FqdConfig = Field(default_factory=FqdConfig)
    derivative: DerivativeMode = DerivativeMode.LITERAL
    act_on_quantized: bool = True
    mode_radius_m: float = Field(default=150e-6, gt=0)
    # Closed-loop mean offset the link budget coupling term refers to.
    nominal_offset_m: float = Field(default=65e-6, ge=0)


@dataclass(frozen=True)
class FqdReading:
    ex: float
    ey: float
    saturated: bool = False
    raw_x: float = 0.0
    raw_y: float = 0.0
    resolution: float = FQD_RESOLUTION_M
    range: float = FQD_RANGE_M


@dataclass(frozen=True)
class PidState:
    e_p: t.Tuple[float, float] = (0.0, 0.0)
    e_i: t.Tuple[float, float] = (0.0, 0.0)
    e_d: t.Tuple[float, float] = (0.0, 0.0)
    iteration: int = 0


@dataclass
class LoopReport:
    mode: Mode
    mean_error: float
    std_error: float
    dt: float
    ex: np.ndarray
    ey: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    residual_x: np.ndarray
    residual_y: np.ndarray
    eta: np.ndarray
    saturations: int = 0
    unstable_step: t.Optional[int] = None

    @property
    def unstable(self) -> bool:
        return self.unstable_step is not None

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.ex.size) * self.dt

    @property
    def trace(self) -> t.List[FqdReading]:
        return [
            FqdReading(ex=float(x), ey=float(y))
            for x, y in zip(self.ex, self.ey)
        ]

    def summary(self) -> "LoopSummary":
        return LoopSummary(
            mode=self.mode,
            mean_error_m=self.mean_error,
            std_error_m=self.std_error,
            samples=int(self.ex.size),
            saturations=self.saturations,
            unstable=self.unstable,
            unstable_step=self.unstable_step,
        )


class LoopSummary(Model):
    mode: Mode
    mean_error_m: float
    std_error_m: float
    samples: int
    saturations: int
    unstable: bool
    unstable_step: t.Optional[int] = None
