import math
import typing as t
from dataclasses import dataclass
from enum import Enum, unique

import numpy as np

from skylink.base import ContractViolation, Field, Model, field_validator
from skylink.utils.math_utils import db_to_linear

BEACON_WAVELENGTH_M = 1310.10e-9
QUANTUM_WAVELENGTH_M = 1558.98e-9


@unique
class Regime(str, Enum):
    WEAK = "weak"
    MODERATE_TO_STRONG = "moderate_to_strong"


class BeamParams(Model):
    waist_radius_m: float = Field(default=7e-3, gt=0)
    wavelength_m: float = Field(default=QUANTUM_WAVELENGTH_M, gt=0)
    link_length_m: float = Field(gt=0)
    aperture_diameter_m: float = Field(default=35e-3, gt=0)


class TurbulenceParams(Model):
    cn2: float = Field(default=0.0, ge=0)
    target_scintillation: float = Field(default=0.0, ge=0)
    scintillation_corr_time_s: float = Field(default=2e-3, gt=0)
    wander_std_m: float = Field(default=0.0, ge=0)
    wander_corr_time_s: float = Field(default=10e-3, gt=0)


class LinkBudget(Model):
    components: t.Dict[str, float] = Field(default_factory=dict)

    @field_validator("components")
    def validate_components(cls, value: t.Dict[str, float]):
        for label, loss_db in value.items():
            if loss_db < 0 or math.isnan(loss_db):
                raise ValueError(
                    f"Loss component {label!r} must be non-negative, got"
                    f" {loss_db!r}."
                )
        return value

    @property
    def total_db(self) -> float:
        return math.fsum(self.components.values())

    @property
    def transmittance(self) -> float:
        return db_to_linear(self.total_db)

    def scaled_to(self, total_db: float) -> "LinkBudget":
        if total_db < 0:
            raise ContractViolation(
                f"ContractViolation: invalid total loss {total_db!r}."
            )
        if not self.total_db:
            return LinkBudget(components={"total": total_db})
        factor = total_db / self.total_db
        return LinkBudget(
            components={
                label: loss_db * factor
                for label, loss_db in self.components.items()
            }
        )


@dataclass(frozen=True)
class TransmittanceSeries:
    """Channel realization on a regular time grid.

    `intensity` is the unit-mean scintillation factor, `transmittance` the
    clipped product with the budget.
    """

    dt: float
    intensity: np.ndarray
    transmittance: np.ndarray
    offset_x: np.ndarray
    offset_y: np.ndarray

    def __post_init__(self):
        lengths = {
            self.intensity.size,
            self.transmittance.size,
            self.offset_x.size,
            self.offset_y.size,
        }
        if len(lengths) != 1:
            raise ContractViolation(
                "ContractViolation: series components must have equal"
                " length."
            )
        if self.transmittance.size and (
            self.transmittance.min() < 0 or self.transmittance.max() > 1
        ):
            raise ContractViolation(
                "ContractViolation: transmittance samples must lie in"
                " [0, 1]."
            )

    def __len__(self) -> int:
        return self.transmittance.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.dt

    @property
    def offsets(self) -> np.ndarray:
        return np.stack([self.offset_x, self.offset_y], axis=-1)


class ChannelStatistics(Model):
    samples: int
    scintillation_index: float
    log_intensity_variance: float
    cn2: float
    fried_parameter_m: t.Optional[float] = None
    infinite_resolution: bool = False
    regime: Regime
    wavelength_m: float
    link_length_m: float
    quoted_cn2: t.Optional[float] = None
    cn2_discrepancy: t.Optional[float] = None
    discrepancy: bool = False
