import math

from skylink.base import ContractViolation
from skylink.channel.models import BeamParams
from skylink.utils.math_utils import linear_to_db


def rayleigh_range(beam: BeamParams) -> float:
    return math.pi * beam.waist_radius_m**2 / beam.wavelength_m


def beam_radius(z: float, beam: BeamParams) -> float:
    if z < 0:
        raise ContractViolation(
            f"ContractViolation: propagation distance {z!r} must be >= 0."
        )
    return beam.waist_radius_m * math.hypot(1, z / rayleigh_range(beam))


def aperture_transmission(
    beam_radius_m: float, aperture_diameter_m: float
) -> float:
    """Power of a centred Gaussian beam passing a circular aperture."""
    if beam_radius_m <= 0 or aperture_diameter_m <= 0:
        raise ContractViolation(
            "ContractViolation: beam radius and aperture must be positive."
        )
    return -math.expm1(-(aperture_diameter_m**2) / (2 * beam_radius_m**2))


def geometric_loss_db(beam: BeamParams) -> float:
    radius = beam_radius(beam.link_length_m, beam)
    return linear_to_db(
        aperture_transmission(radius, beam.aperture_diameter_m)
    )
