import math
import typing as t

import numpy as np

from skylink.base import ContractViolation


def db_to_linear(loss_db: float) -> float:
    return 10 ** (-loss_db / 10)


def linear_to_db(transmittance: float) -> float:
    if transmittance <= 0:
        raise ContractViolation(
            f"ContractViolation: invalid transmittance {transmittance!r}."
        )
    return -10 * math.log10(transmittance)


def exact_mean(values: t.Iterable[float]) -> float:
    values = [float(value) for value in values]
    if not values:
        raise ContractViolation(
            "ContractViolation: mean of an empty sequence."
        )
    return math.fsum(values) / len(values)


def exact_moments(samples: np.ndarray) -> t.Tuple[float, float]:
    """Mean and population variance with correctly rounded sums."""
    samples = np.asarray(samples, dtype=float)
    mean = math.fsum(samples) / samples.size
    variance = math.fsum((samples - mean) ** 2) / samples.size
    return mean, variance
