import math
import typing as t

import numpy as np
from scipy.signal import lfilter

from skylink.base import ContractViolation, Error, StatisticError
from skylink.channel.models import (
    ChannelStatistics,
    Regime,
    TransmittanceSeries,
    TurbulenceParams,
)
from skylink.config import ConfigError
from skylink.utils.math_utils import exact_moments

# Rytov coefficient of a plane wave on a horizontal path.
RYTOV_COEFFICIENT = 0.496
FRIED_COEFFICIENT = 1.46
DISCREPANCY_TOLERANCE = 0.1


class InfiniteResolution(Error): ...


def _validated(samples: t.Sequence[float]) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise StatisticError(
            "StatisticError: at least two intensity samples required."
        )
    if not np.isfinite(samples).all():
        raise StatisticError(
            "StatisticError: intensity samples must be finite."
        )
    return samples


def scintillation_index(intensity_samples: t.Sequence[float]) -> float:
    samples = _validated(intensity_samples)
    mean, variance = exact_moments(samples)
    if mean <= 0:
        raise StatisticError(
            f"StatisticError: intensity mean must be positive, got"
            f" {mean!r}."
        )
    return variance / mean**2


def log_intensity_variance(intensity_samples: t.Sequence[float]) -> float:
    return math.log1p(scintillation_index(intensity_samples))


def wavenumber(wavelength_m: float) -> float:
    return 2 * math.pi / wavelength_m


def cn2_from_log_variance(
    log_variance: float, wavelength_m: float, link_length_m: float
) -> float:
    if wavelength_m <= 0 or link_length_m <= 0:
        raise ContractViolation(
            "ContractViolation: wavelength and link length must be"
            " positive."
        )
    return log_variance / (
        RYTOV_COEFFICIENT
        * wavenumber(wavelength_m) ** (7 / 6)
        * link_length_m ** (11 / 6)
    )


def cn2_from_samples(
    intensity_samples: t.Sequence[float],
    wavelength_m: float,
    link_length_m: float,
) -> float:
    return cn2_from_log_variance(
        log_intensity_variance(intensity_samples),
        wavelength_m,
        link_length_m,
    )


def fried_parameter(
    cn2: float, wavelength_m: float, link_length_m: float
) -> float:
    if wavelength_m <= 0 or link_length_m <= 0 or cn2 < 0:
        raise ContractViolation(
            "ContractViolation: invalid turbulence or geometry parameters."
        )
    if cn2 == 0:
        raise InfiniteResolution(
            "InfiniteResolution: the Fried parameter of a turbulence-free"
            " path is unbounded."
        )
    k = wavenumber(wavelength_m)
    return (FRIED_COEFFICIENT * k**2 * cn2 * link_length_m) ** (-3 / 5)


def classify_regime(sigma_i2: float) -> Regime:
    if sigma_i2 < 0:
        raise ContractViolation(
            f"ContractViolation: invalid scintillation index {sigma_i2!r}."
        )
    return Regime.WEAK if sigma_i2 < 1 else Regime.MODERATE_TO_STRONG


def channel_statistics(
    intensity_samples: t.Sequence[float],
    wavelength_m: float,
    link_length_m: float,
    quoted_cn2: t.Optional[float] = None,
) -> ChannelStatistics:
    scintillation = scintillation_index(intensity_samples)
    log_variance = math.log1p(scintillation)
    cn2 = cn2_from_log_variance(log_variance, wavelength_m, link_length_m)
    try:
        fried = fried_parameter(cn2, wavelength_m, link_length_m)
    except InfiniteResolution:
        fried = None
    discrepancy = None
    if quoted_cn2:
        discrepancy = abs(cn2 - quoted_cn2) / quoted_cn2
    return ChannelStatistics(
        samples=len(intensity_samples),
        scintillation_index=scintillation,
        log_intensity_variance=log_variance,
        cn2=cn2,
        fried_parameter_m=fried,
        infinite_resolution=fried is None,
        regime=classify_regime(scintillation),
        wavelength_m=wavelength_m,
        link_length_m=link_length_m,
        quoted_cn2=quoted_cn2,
        cn2_discrepancy=discrepancy,
        discrepancy=(
            discrepancy is not None and discrepancy > DISCREPANCY_TOLERANCE
        ),
    )


def _ar1(
    n: int, std: float, correlation: float, rng: np.random.Generator
) -> np.ndarray:
    """Stationary Gaussian AR(1) path, started from its stationary law."""
    noise = rng.standard_normal(n + 1) * std
    initial = noise[0]
    innovations = noise[1:] * math.sqrt(max(0.0, 1 - correlation**2))
    path, _ = lfilter(
        [1.0], [1.0, -correlation], innovations, zi=[correlation * initial]
    )
    return path


def synthesize_turbulence(
    params: TurbulenceParams,
    duration: float,
    dt: float,
    rng: np.random.Generator,
    base_transmittance: float = 1.0,
) -> TransmittanceSeries:
    """Log-normal scintillation with Ornstein-Uhlenbeck beam wander."""
    if not duration > dt > 0:
        raise ConfigError(
            f"ConfigError: duration {duration!r} must exceed the time step"
            f" {dt!r} > 0."
        )
    if not 0 <= base_transmittance <= 1:
        raise ConfigError(
            f"ConfigError: base transmittance {base_transmittance!r}"
            " outside [0, 1]."
        )
    log_variance = math.log1p(params.target_scintillation)
    if not math.isfinite(log_variance):
        raise ConfigError(
            "ConfigError: scintillation target implies an undefined"
            " log-intensity variance."
        )
    n = int(round(duration / dt))

    log_intensity = _ar1(
        n,
        math.sqrt(log_variance),
        math.exp(-dt / params.scintillation_corr_time_s),
        rng,
    )
    intensity = np.exp(log_intensity - log_variance / 2)
    wander_correlation = math.exp(-dt / params.wander_corr_time_s)
    offset_x = _ar1(n, params.wander_std_m, wander_correlation, rng)
    offset_y = _ar1(n, params.wander_std_m, wander_correlation, rng)
    return TransmittanceSeries(
        dt=dt,
        intensity=intensity,
        transmittance=np.clip(base_transmittance * intensity, 0.0, 1.0),
        offset_x=offset_x,
        offset_y=offset_y,
    )
