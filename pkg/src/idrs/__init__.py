"""Certified radii for Gaussian smoothing with an input-dependent scale."""

from .certify import RadiusSearchConfig, certify_point, idrs_certified_radius
from .sigma import SigmaField, calibrate_m, sigma_at
from .smoothing import CertificationResult, SmoothingConfig, certify_constant, cohen_radius
from .special import NcChiSq, UnstableRegimeError
from .worst_case import AdversaryPair, WorstCaseBall, worst_case_ball, xi

__version__ = "0.1.0"

__all__ = [
    "AdversaryPair",
    "CertificationResult",
    "NcChiSq",
    "RadiusSearchConfig",
    "SigmaField",
    "SmoothingConfig",
    "UnstableRegimeError",
    "WorstCaseBall",
    "calibrate_m",
    "certify_constant",
    "certify_point",
    "cohen_radius",
    "idrs_certified_radius",
    "sigma_at",
    "worst_case_ball",
    "xi",
]
