import math
import typing as t

import numpy as np

from skylink.base import ContractViolation, Error
from skylink.channel.models import TransmittanceSeries
from skylink.tracking.models import (
    DerivativeMode,
    FqdConfig,
    FqdReading,
    LoopReport,
    Mode,
    PidGains,
    PidState,
    TrackingConfig,
)
from skylink.utils.math_utils import exact_moments

# Loop is declared unstable past this multiple of the sensor range.
DIVERGENCE_FACTOR = 10


class ControllerFault(Error): ...


def fqd_measure(
    true_offset: t.Sequence[float],
    rng: np.random.Generator,
    fqd: t.Optional[FqdConfig] = None,
) -> FqdReading:
    fqd = fqd or FqdConfig()
    raw = np.asarray(true_offset, dtype=float)
    if fqd.read_noise_m:
        raw = raw + rng.normal(0.0, fqd.read_noise_m, 2)
    quantized = np.rint(raw / fqd.resolution_m) * fqd.resolution_m
    clamped = np.clip(quantized, -fqd.range_m, fqd.range_m)
    return FqdReading(
        ex=float(clamped[0]),
        ey=float(clamped[1]),
        saturated=bool((np.abs(raw) > fqd.range_m).any()),
        raw_x=float(raw[0]),
        raw_y=float(raw[1]),
        resolution=fqd.resolution_m,
        range=fqd.range_m,
    )


def pid_step(
    state: PidState,
    gains: PidGains,
    reading: FqdReading,
    derivative: DerivativeMode = DerivativeMode.LITERAL,
    use_raw: bool = False,
) -> t.Tuple[t.Tuple[float, float], PidState]:
    if use_raw:
        error = (reading.raw_x, reading.raw_y)
    else:
        error = (reading.ex, reading.ey)
    if not all(math.isfinite(value) for value in error):
        raise ControllerFault(
            f"ControllerFault: non-finite FQD reading {error!r}."
        )
    e_i = (state.e_i[0] + error[0], state.e_i[1] + error[1])
    if derivative is DerivativeMode.LITERAL:
        e_d = (e_i[0] - state.e_i[0], e_i[1] - state.e_i[1])
    else:
        e_d = (error[0] - state.e_p[0], error[1] - state.e_p[1])
    actuation = tuple(
        -(gains.kp * p + gains.ki * i + gains.kd * d)
        for p, i, d in zip(error, e_i, e_d)
    )
    return actuation, PidState(
        e_p=error, e_i=e_i, e_d=e_d, iteration=state.iteration + 1
    )


def coupling_efficiency(offset, mode_radius: float):
    """Gaussian mode overlap with the fibre mode, exp(-r^2 / w^2)."""
    if mode_radius <= 0:
        raise ContractViolation(
            f"ContractViolation: invalid mode radius {mode_radius!r}."
        )
    offset = np.asarray(offset, dtype=float)
    radius2 = np.sum(offset**2, axis=-1)
    efficiency = np.exp(-radius2 / mode_radius**2)
    return float(efficiency) if efficiency.ndim == 0 else efficiency


def run_loop(
    series: TransmittanceSeries,
    config: TrackingConfig,
    rng: np.random.Generator,
    mode: t.Optional[Mode] = None,
) -> LoopReport:
    """Fine-pointing loop over the wander of `series`.

    The residual seen by the FQD is wander plus mirror position. In open
    mode the actuation is computed but never applied, so both modes draw
    the same random numbers.
    """
    mode = mode or config.mode
    n = len(series)
    if not n:
        raise ContractViolation(
            "ContractViolation: tracking needs a non-empty series."
        )
    alpha = config.mirror.step_fraction(series.dt)
    max_step = config.mirror.slew_rate_m_per_s * series.dt
    limit = DIVERGENCE_FACTOR * config.fqd.range_m
    use_raw = not config.act_on_quantized

    columns = np.zeros((7, n))
    state = PidState()
    mirror = np.zeros(2)
    saturations = 0
    unstable_step = None
    steps = n
    for step in range(n):
        residual = np.array(
            [series.offset_x[step], series.offset_y[step]]
        ) + mirror
        if np.abs(residual).max() > limit:
            unstable_step = step
            steps = step
            break
        reading = fqd_measure(residual, rng, config.fqd)
        saturations += reading.saturated
        actuation, state = pid_step(
            state, config.gains, reading, config.derivative, use_raw
        )
        if mode is Mode.CLOSED:
            move = alpha * (np.asarray(actuation) - mirror)
            mirror = mirror + np.clip(move, -max_step, max_step)
        columns[:, step] = (
            reading.ex,
            reading.ey,
            actuation[0],
            actuation[1],
            residual[0],
            residual[1],
            coupling_efficiency(residual, config.mode_radius_m),
        )

    columns = columns[:, :steps]
    radial = np.hypot(columns[0], columns[1])
    mean, variance = (
        exact_moments(radial) if radial.size else (float("nan"),) * 2
    )
    return LoopReport(
        mode=mode,
        mean_error=mean,
        std_error=math.sqrt(variance),
        dt=series.dt,
        ex=columns[0],
        ey=columns[1],
        ax=columns[2],
        ay=columns[3],
        residual_x=columns[4],
        residual_y=columns[5],
        eta=columns[6],
        saturations=saturations,
        unstable_step=unstable_step,
    )
