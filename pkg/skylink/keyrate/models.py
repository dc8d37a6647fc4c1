import typing as t
from enum import Enum, unique

from skylink.base import Field, Model


@unique
class LeakageMode(str, Enum):
    # s_Z1 * f * H2(QBER_Z), as printed
    PAPER_LITERAL = "paper_literal"
    # n_Z * f * H2(QBER_Z)
    SIFTED_BLOCK = "sifted_block"


class FiniteKeyParams(Model):
    eps_sec: float = Field(default=1e-9, gt=0, lt=1)
    eps_corr: float = Field(default=1e-9, gt=0, lt=1)
    f_eff: float = Field(default=1.16, ge=1)
    block_nz: int = Field(default=10**7, ge=1)
    leakage_mode: LeakageMode = LeakageMode.SIFTED_BLOCK
    asymptotic: bool = False


class DecoyBounds(Model):
    s_z0_lower: float = Field(default=0.0, ge=0)
    s_z1_lower: float = Field(default=0.0, ge=0)
    phi_z_upper: float = Field(default=0.5, ge=0, le=0.5)
    s_x1_lower: float = Field(default=0.0, ge=0)
    v_x1_upper: float = Field(default=0.0, ge=0)
    failed: bool = False
    reason: t.Optional[str] = None


class KeyReport(Model):
    key_length_bits: int = Field(ge=0)
    skr_bps: float = Field(ge=0)
    qber_z: t.Optional[float] = None
    qber_x: t.Optional[float] = None
    s_z0_lower: float
    s_z1_lower: float
    phi_z_upper: float
    lambda_ec_bits: float
    elapsed_s: float
    epsilon_sec: float
    epsilon_corr: float
    n_z: int
    leakage_mode: LeakageMode
    asymptotic: bool
    bound_failed: bool
    extrapolated: bool = False
    extrapolation_factor: float = 1.0

    @property
    def bounds(self) -> DecoyBounds:
        return DecoyBounds(
            s_z0_lower=self.s_z0_lower,
            s_z1_lower=self.s_z1_lower,
            phi_z_upper=self.phi_z_upper,
            failed=self.bound_failed,
        )
