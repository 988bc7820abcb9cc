"""Certified radius for input-dependent smoothing.

A radius ``R`` is certified at ``x0`` when both worst-case adversaries at
distance ``R`` fail to overturn the prediction. One adversary has the
smallest admissible scale ``sigma0 exp(-rate R)`` and the other the
largest, ``sigma0 exp(rate R)``. The largest certified point of a radius
grid is found with a square-stride scan followed by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .sigma import SigmaField, sigma_at
from .smoothing import (
    ABSTAIN,
    CertificationResult,
    SmoothingConfig,
    _certifiable,
    cohen_radius,
    estimate_pa,
)
from .special import UnstableRegimeError
from .worst_case import AdversaryPair, xi, xi_greater, xi_less

__all__ = [
    "Clamp",
    "DEFAULT_CLAMP",
    "RadiusSearchConfig",
    "RadiusResult",
    "radius_grid",
    "stride_search",
    "envelope",
    "certifiable_at",
    "idrs_certified_radius",
    "certify_point",
    "stability_scan",
]

_MNIST_DOF, _CIFAR_DOF = 784, 3072
_MNIST_ICPT, _CIFAR_ICPT = 0.9988, 0.9993


@dataclass(frozen=True)
class Clamp:
    """Floor on how far the adversary scale ratio may move from 1.

    ``lower(dof, pB)`` is ``sigma_t``. The adversary's smaller scale is at
    most ``sigma_t * sigma0`` and its larger scale at least
    ``sigma0 / sigma_t``. The default intercept is
    ``0.9988 + 0.001 log10(pB)`` at N=784 and ``0.9993 + ...`` at N=3072.
    It is interpolated linearly in ``log N`` elsewhere.
    """

    slope: float = 0.001
    floor: float = 1e-3
    ceiling: float = 1.0 - 1e-9

    @staticmethod
    def intercept(dof: int) -> float:
        w = (math.log(dof) - math.log(_MNIST_DOF)) / (math.log(_CIFAR_DOF) - math.log(_MNIST_DOF))
        return _MNIST_ICPT + w * (_CIFAR_ICPT - _MNIST_ICPT)

    def lower(self, dof: int, pB: float) -> float:
        t = self.intercept(dof) + self.slope * math.log10(pB)
        return min(self.ceiling, max(self.floor, t))

    def upper(self, dof: int, pB: float) -> float:
        return 1.0 / self.lower(dof, pB)


DEFAULT_CLAMP = Clamp()


@dataclass(frozen=True)
class RadiusSearchConfig:
    num_steps: int = 2000
    max_radius_factor: float = 1.0
    clamp: Clamp | None = DEFAULT_CLAMP

    def __post_init__(self):
        if self.num_steps < 1 or self.max_radius_factor <= 0:
            raise ValueError("num_steps and max_radius_factor must be positive")


@dataclass
class RadiusResult:
    radius: float
    diagnostics: dict = field(default_factory=dict)


def radius_grid(upper: float, num_steps: int) -> np.ndarray:
    return np.linspace(0.0, upper, num_steps + 1)


def stride_search(evaluator: Callable[[float], bool], grid) -> float:
    """Largest grid value ``R`` such that ``evaluator`` holds up to ``R``.

    Assumes the certifiable set is an initial segment of the grid. Probes
    indices 0, 1, 4, 9, ... and bisects the first failing stride. Returns
    0.0 when even ``grid[0]`` fails.
    """
    grid = np.asarray(grid, dtype=float)
    last = len(grid) - 1
    if not evaluator(float(grid[0])):
        return 0.0
    good, i = 0, 1
    while True:
        idx = min(i * i, last)
        if evaluator(float(grid[idx])):
            good = idx
            if idx == last:
                return float(grid[last])
            i += 1
        else:
            bad = idx
            break
    while bad - good > 1:
        mid = (good + bad) // 2
        if evaluator(float(grid[mid])):
            good = mid
        else:
            bad = mid
    return float(grid[good])


def envelope(sigma0: float, rate: float, radius: float, dof: int, pB: float, clamp: Clamp | None):
    """Extreme adversary scales ``(low, high)`` at ``radius``, with clamps."""
    low = sigma0 * math.exp(-rate * radius)
    high = sigma0 * math.exp(rate * radius)
    clamped = False
    if clamp is not None:
        t_low, t_high = sigma0 * clamp.lower(dof, pB), sigma0 * clamp.upper(dof, pB)
        if t_low < low:
            low, clamped = t_low, True
        if t_high > high:
            high, clamped = t_high, True
    return low, high, clamped


def _overturn_mass(sigma0, sigma1, radius, dof, pA, pB) -> float:
    """Worst-case B mass plus worst-case loss of A mass at the adversary.

    With ``pB = 1 - pA`` both terms coincide and the test ``< 1`` reduces
    to ``xi < 1/2``.
    """
    b = xi(AdversaryPair(sigma0, sigma1, radius, dof, pA, pB))
    if pB == 1.0 - pA:
        return 2.0 * b
    not_a = xi(AdversaryPair(sigma0, sigma1, radius, dof, pA, 1.0 - pA))
    return b + not_a


def certifiable_at(
    radius: float,
    sigma0: float,
    rate: float,
    dof: int,
    pA: float,
    pB: float,
    clamp: Clamp | None = DEFAULT_CLAMP,
    notes: dict | None = None,
) -> bool:
    """Whether both envelope adversaries at ``radius`` leave the prediction intact.

    Numerical failure counts as not certifiable.
    """
    low, high, clamped = envelope(sigma0, rate, radius, dof, pB, clamp)
    if notes is not None:
        notes["evaluations"] = notes.get("evaluations", 0) + 1
        notes["clamp_hits"] = notes.get("clamp_hits", 0) + int(clamped)
    try:
        for s1 in (low, high):
            if _overturn_mass(sigma0, s1, radius, dof, pA, pB) >= 1.0:
                return False
    except (UnstableRegimeError, FloatingPointError, OverflowError) as exc:
        if notes is not None:
            notes.setdefault("unstable", []).append({"radius": radius, "error": str(exc)})
        return False
    return True


def idrs_certified_radius(
    sigma0: float,
    rate: float,
    dof: int,
    pA_lower: float,
    pB_upper: float | None = None,
    search: RadiusSearchConfig = RadiusSearchConfig(),
) -> RadiusResult:
    """Certified radius for a field with semi-elasticity ``rate``.

    ``pB_upper=None`` means ``1 - pA_lower``. The search runs over a grid on
    ``[0, max_radius_factor * cohen_radius]``, since the constant-scale
    radius at ``sigma0`` is never exceeded.
    """
    if not 0.0 < pA_lower < 1.0:
        raise ValueError("pA_lower must lie in (0, 1)")
    separate = pB_upper is not None
    pB = 1.0 - pA_lower if pB_upper is None else float(pB_upper)
    if (not separate and pA_lower <= 0.5) or pA_lower <= pB:
        return RadiusResult(0.0, {"reason": "pA not above runner-up bound"})
    cohen = cohen_radius(pA_lower, pB, sigma0)
    if rate == 0.0:
        return RadiusResult(cohen, {"reason": "constant scale"})
    grid = radius_grid(search.max_radius_factor * cohen, search.num_steps)
    notes: dict = {"grid_step": float(grid[1] - grid[0]), "cohen_radius": cohen}
    radius = stride_search(
        lambda r: certifiable_at(r, sigma0, rate, dof, pA_lower, pB, search.clamp, notes), grid
    )
    return RadiusResult(radius, notes)


def certify_point(
    f,
    field: SigmaField,
    x0,
    cfg: SmoothingConfig,
    search: RadiusSearchConfig = RadiusSearchConfig(),
    sample_index: int = 0,
) -> CertificationResult:
    """End-to-end certificate: scale at ``x0``, sampling, radius search."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    sigma0 = sigma_at(field, x0)
    est = estimate_pa(f, sigma0, x0, cfg, sample_index)
    if not _certifiable(est, cfg):
        return CertificationResult(ABSTAIN, est.pA_lower, est.pB_upper, sigma0, 0.0, "idrs")
    pb = None if cfg.pB_mode == "complement" else est.pB_upper
    res = idrs_certified_radius(sigma0, field.rate, x0.size, est.pA_lower, pb, search)
    return CertificationResult(
        est.top, est.pA_lower, est.pB_upper, sigma0, res.radius, "idrs", res.diagnostics
    )


def stability_scan(sigma0: float, sigma1: float, dof: int, pA: float, distances, tol: float = 1e-9):
    """Evaluate one adversary curve and flag NaNs, failures or decreases.

    Returns ``(values, issues)``. ``values`` holds NaN wherever evaluation
    failed.
    """
    fn = xi_greater if sigma0 > sigma1 else xi_less
    values, issues = [], []
    for a in distances:
        try:
            v = fn(AdversaryPair(sigma0, sigma1, float(a), dof, pA))
        except (UnstableRegimeError, FloatingPointError, OverflowError) as exc:
            issues.append({"distance": float(a), "issue": f"unstable: {exc}"})
            v = math.nan
        if math.isnan(v):
            issues.append({"distance": float(a), "issue": "nan"})
        elif values and not math.isnan(values[-1]) and v < values[-1] - tol:
            issues.append({"distance": float(a), "issue": "decrease"})
        values.append(v)
    return values, issues
