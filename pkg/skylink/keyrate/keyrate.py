"""Finite-key analysis of the one-decoy three-state protocol.

Bounds follow the standard one-decoy method: per-intensity counts are
widened by Hoeffding deviations, the vacuum and single-photon yields are
bounded from two intensities, and the phase error of the single-photon
Z events is bounded by the X-basis single-photon error rate plus a
sampling correction. The secrecy parameter is split into 19 equal parts.
"""

import math
import typing as t

from skylink.base import ContractViolation
from skylink.keyrate.models import (
    DecoyBounds,
    FiniteKeyParams,
    KeyReport,
    LeakageMode,
)
from skylink.protocol.models import Basis, Intensity, SiftedTally
from skylink.protocol.protocol import qber

SECRECY_TERMS = 19
MAX_PHASE_ERROR = 0.5


def binary_entropy(p: float) -> float:
    if not 0 <= p <= 1:
        raise ContractViolation(
            f"ContractViolation: probability {p!r} outside [0, 1]."
        )
    if p in (0, 1):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def hoeffding_deviation(n: float, eps: float) -> float:
    return math.sqrt(n / 2 * math.log(1 / eps))


def photon_number_weight(
    m: int, mus: t.Sequence[float], weights: t.Sequence[float]
) -> float:
    """Probability of an m-photon pulse, averaged over intensities."""
    return math.fsum(
        p * math.exp(-mu) * mu**m / math.factorial(m)
        for mu, p in zip(mus, weights)
    )


def sampling_correction(
    eps: float, rate: float, z_count: float, x_count: float
) -> float:
    if rate <= 0 or rate >= 1 or z_count <= 0 or x_count <= 0:
        return 0.0
    total = z_count + x_count
    product = z_count * x_count
    spread = (1 - rate) * rate
    argument = total / (product * spread * eps**2)
    if argument <= 1:
        return 0.0
    return math.sqrt(
        total * spread / (product * math.log(2)) * math.log2(argument)
    )


class _Scaled:
    """Counts rescaled to per-intensity yields, e^mu / p * (n +- delta)."""

    def __init__(
        self,
        counts: t.Dict[Intensity, int],
        mus: t.Sequence[float],
        weights: t.Sequence[float],
        eps: float,
        asymptotic: bool,
    ):
        total = sum(counts.values())
        self.delta = 0.0 if asymptotic else hoeffding_deviation(total, eps)
        self.factors = [math.exp(mu) / p for mu, p in zip(mus, weights)]
        self.counts = [counts[k] for k in Intensity]

    def upper(self, code: int) -> float:
        return self.factors[code] * (self.counts[code] + self.delta)

    def lower(self, code: int) -> float:
        return self.factors[code] * (self.counts[code] - self.delta)


def _vacuum_upper(
    errors: _Scaled, tau0: float, eps_delta: float
) -> float:
    return min(
        2 * (tau0 * errors.upper(code) + eps_delta) for code in (0, 1)
    )


def _single_photon_lower(
    counts: _Scaled,
    vacuum_upper: float,
    mu1: float,
    mu2: float,
    tau0: float,
    tau1: float,
) -> float:
    return (
        mu1
        * tau1
        / (mu2 * (mu1 - mu2))
        * (
            counts.lower(1)
            - (mu2 / mu1) ** 2 * counts.upper(0)
            - (mu1**2 - mu2**2) / mu1**2 * vacuum_upper / tau0
        )
    )


def decoy_bounds(
    tally: SiftedTally,
    mu1: float,
    mu2: float,
    p_mu1: float,
    eps: float,
    asymptotic: bool = False,
) -> DecoyBounds:
    if not mu1 > mu2 > 0:
        raise ContractViolation(
            f"ContractViolation: intensities must satisfy mu1 > mu2 > 0,"
            f" got {mu1!r} and {mu2!r}."
        )
    if not 0 < p_mu1 < 1:
        raise ContractViolation(
            f"ContractViolation: signal probability {p_mu1!r} outside"
            " (0, 1)."
        )
    for basis in Basis:
        if not all(tally.counts(basis).values()):
            return DecoyBounds(
                failed=True,
                reason=f"no {basis.value} counts for one intensity",
            )

    mus = (mu1, mu2)
    weights = (p_mu1, 1 - p_mu1)
    eps_term = eps / SECRECY_TERMS
    tau0 = photon_number_weight(0, mus, weights)
    tau1 = photon_number_weight(1, mus, weights)

    def scaled(counts):
        return _Scaled(counts, mus, weights, eps_term, asymptotic)

    n_z, m_z = scaled(tally.n_z), scaled(tally.m_z)
    n_x, m_x = scaled(tally.n_x), scaled(tally.m_x)

    s_z0 = tau0 / (mu1 - mu2) * (mu1 * n_z.lower(1) - mu2 * n_z.upper(0))
    s_z0_upper = _vacuum_upper(m_z, tau0, m_z.delta)
    s_z1 = _single_photon_lower(n_z, s_z0_upper, mu1, mu2, tau0, tau1)
    s_x0_upper = _vacuum_upper(m_x, tau0, m_x.delta)
    s_x1 = _single_photon_lower(n_x, s_x0_upper, mu1, mu2, tau0, tau1)
    v_x1 = tau1 / (mu1 - mu2) * (m_x.upper(0) - m_x.lower(1))

    total_z = tally.total(Basis.Z)
    s_z0 = min(max(s_z0, 0.0), total_z)
    if s_z1 <= 0 or s_x1 <= 0:
        return DecoyBounds(
            s_z0_lower=s_z0,
            failed=True,
            reason="single-photon bound is not positive",
        )
    s_z1 = min(s_z1, total_z - s_z0)
    v_x1 = max(v_x1, 0.0)
    rate = min(v_x1 / s_x1, MAX_PHASE_ERROR)
    correction = (
        0.0
        if asymptotic
        else sampling_correction(eps_term, rate, s_z1, s_x1)
    )
    return DecoyBounds(
        s_z0_lower=s_z0,
        s_z1_lower=s_z1,
        phi_z_upper=min(rate + correction, MAX_PHASE_ERROR),
        s_x1_lower=s_x1,
        v_x1_upper=v_x1,
    )


def ec_leakage(
    tally: SiftedTally,
    bounds: DecoyBounds,
    f_eff: float,
    mode: LeakageMode = LeakageMode.SIFTED_BLOCK,
) -> float:
    if f_eff < 1:
        raise ContractViolation(
            f"ContractViolation: efficiency factor {f_eff!r} below 1."
        )
    if not tally.total(Basis.Z):
        return 0.0
    entropy = binary_entropy(qber(tally, Basis.Z))
    if mode is LeakageMode.PAPER_LITERAL:
        return bounds.s_z1_lower * f_eff * entropy
    return tally.total(Basis.Z) * f_eff * entropy


def security_penalty(eps_sec: float, eps_corr: float) -> float:
    return 6 * math.log2(SECRECY_TERMS / eps_sec) + math.log2(2 / eps_corr)


def key_length(
    bounds: DecoyBounds, lambda_ec: float, params: FiniteKeyParams
) -> int:
    if bounds.failed:
        return 0
    length = (
        bounds.s_z0_lower
        + bounds.s_z1_lower * (1 - binary_entropy(bounds.phi_z_upper))
        - lambda_ec
        - security_penalty(params.eps_sec, params.eps_corr)
    )
    return int(min(max(math.floor(length), 0), params.block_nz))


def secure_key_rate(key_length_bits: float, elapsed: float) -> float:
    if elapsed <= 0:
        raise ContractViolation(
            f"ContractViolation: elapsed time {elapsed!r} must be positive."
        )
    return key_length_bits / elapsed


def scale_tally(
    tally: SiftedTally, block_nz: int
) -> t.Tuple[SiftedTally, float]:
    """Rescales a tally so that its Z total matches the block size.

    Rates are preserved: every count and the elapsed time move by the same
    factor.
    """
    total_z = tally.total(Basis.Z)
    if not total_z:
        return tally, 1.0
    factor = block_nz / total_z

    def scale(counts):
        return {k: int(round(counts[k] * factor)) for k in Intensity}

    def scale_truth(value):
        return None if value is None else int(round(value * factor))

    return (
        SiftedTally(
            n_z=scale(tally.n_z),
            n_x=scale(tally.n_x),
            m_z=scale(tally.m_z),
            m_x=scale(tally.m_x),
            elapsed_s=tally.elapsed_s * factor,
            multi_click_discards=tally.multi_click_discards,
            true_z_vacuum=scale_truth(tally.true_z_vacuum),
            true_z_single=scale_truth(tally.true_z_single),
        ),
        factor,
    )


def _optional_qber(tally: SiftedTally, basis: Basis) -> t.Optional[float]:
    return qber(tally, basis) if tally.total(basis) else None


def key_report(
    tally: SiftedTally,
    mu1: float,
    mu2: float,
    p_mu1: float,
    params: FiniteKeyParams,
    extrapolate: bool = True,
) -> KeyReport:
    """Secure key of one block, the tally scaled up to the block size."""
    block, factor = (
        scale_tally(tally, params.block_nz) if extrapolate else (tally, 1.0)
    )
    bounds = decoy_bounds(
        block, mu1, mu2, p_mu1, params.eps_sec, params.asymptotic
    )
    leakage = ec_leakage(block, bounds, params.f_eff, params.leakage_mode)
    length = key_length(bounds, leakage, params)
    elapsed = block.elapsed_s
    return KeyReport(
        key_length_bits=length,
        skr_bps=secure_key_rate(length, elapsed) if elapsed > 0 else 0.0,
        qber_z=_optional_qber(tally, Basis.Z),
        qber_x=_optional_qber(tally, Basis.X),
        s_z0_lower=bounds.s_z0_lower,
        s_z1_lower=bounds.s_z1_lower,
        phi_z_upper=bounds.phi_z_upper,
        lambda_ec_bits=leakage,
        elapsed_s=elapsed,
        epsilon_sec=params.eps_sec,
        epsilon_corr=params.eps_corr,
        n_z=block.total(Basis.Z),
        leakage_mode=params.leakage_mode,
        asymptotic=params.asymptotic,
        bound_failed=bounds.failed,
        extrapolated=factor != 1.0,
        extrapolation_factor=factor,
    )
