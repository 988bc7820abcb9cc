"""Worst-case decision regions between two isotropic Gaussians.

When the smoothing variances at ``x0`` and ``x1`` differ, the region that
maximises the class-B mass under ``N(x1, sigma1^2 I)`` subject to a mass
budget under ``N(x0, sigma0^2 I)`` is a ball (``sigma0 > sigma1``) or the
complement of a ball (``sigma0 < sigma1``). The adversary functions
``xi_greater`` and ``xi_less`` give that maximal mass in closed form through
noncentral chi-squared CDFs and quantiles.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .special import NcChiSq, UnstableRegimeError, normal_cdf, normal_quantile

__all__ = [
    "UNDERFLOW",
    "Orientation",
    "WorstCaseBall",
    "AdversaryPair",
    "DegenerateGeometryError",
    "worst_case_ball",
    "likelihood_region_contains",
    "ball_probability_exact",
    "xi_greater",
    "xi_less",
    "xi_halfspace",
    "xi",
    "smoothed_ball_indicator_exact",
    "flush_underflow",
]

UNDERFLOW = 1e-300


class DegenerateGeometryError(ValueError):
    """Equal variances: the worst case is a half-space, not a ball."""


class Orientation(enum.Enum):
    BALL = "ball"
    COMPLEMENT = "complement-of-ball"


def flush_underflow(p: float) -> tuple[float, bool]:
    """Map probabilities below ``UNDERFLOW`` to exact zero, with a flag."""
    if 0.0 < p < UNDERFLOW:
        return 0.0, True
    return p, False


@dataclass(frozen=True)
class WorstCaseBall:
    center: np.ndarray
    radius: float
    orientation: Orientation

    def contains(self, points) -> np.ndarray:
        """Membership of ``points`` (rows) in the region, ball or complement."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.sum((pts - self.center) ** 2, axis=1) <= self.radius**2
        return inside if self.orientation is Orientation.BALL else ~inside


@dataclass(frozen=True)
class AdversaryPair:
    """Variances at the certified point and the adversary, plus class masses.

    ``pB`` defaults to ``1 - pA``. A separately estimated upper bound on the
    runner-up class can be passed instead.
    """

    sigma0: float
    sigma1: float
    distance: float
    dof: int
    pA: float
    pB: float | None = None

    def __post_init__(self):
        if self.sigma0 <= 0 or self.sigma1 <= 0:
            raise ValueError("standard deviations must be positive")
        if self.distance < 0:
            raise ValueError("distance must be non-negative")
        if not 0.0 < self.pA < 1.0:
            raise ValueError(f"pA must lie in (0, 1), got {self.pA!r}")
        if self.pB is not None and not (0.0 < self.pB < 1.0 and self.pA + self.pB <= 1.0 + 1e-15):
            raise ValueError(f"pB must lie in (0, 1 - pA], got {self.pB!r}")

    @property
    def p_b(self) -> float:
        return 1.0 - self.pA if self.pB is None else self.pB


def worst_case_ball(
    x0,
    x1,
    sigma0: float,
    sigma1: float,
    likelihood_level: float | None = None,
    *,
    log_likelihood_level: float | None = None,
) -> WorstCaseBall:
    """Region where ``q1 / q0 >= 1 / likelihood_level``.

    ``q0`` and ``q1`` are the densities of ``N(x0, sigma0^2 I)`` and
    ``N(x1, sigma1^2 I)``. Pass ``log_likelihood_level`` directly when the
    level itself would overflow. A negative squared radius raises
    ``ValueError`` for a ball (empty region) and yields radius 0 for a
    complement (all of space).
    """
    x0 = np.asarray(x0, dtype=float)
    delta = np.asarray(x1, dtype=float) - x0
    if sigma0 == sigma1:
        raise DegenerateGeometryError("sigma0 == sigma1 gives a half-space")
    if log_likelihood_level is None:
        if likelihood_level is None or likelihood_level <= 0:
            raise ValueError("likelihood_level must be positive")
        log_likelihood_level = math.log(likelihood_level)
    n = x0.size
    a2 = float(delta @ delta)
    s0, s1 = sigma0**2, sigma1**2
    if sigma0 > sigma1:
        d = s0 - s1
        center = x0 + (s0 / d) * delta
        r2 = (
            s0 * s1 / d**2 * a2
            + 2.0 * n * s0 * s1 / d * math.log(sigma0 / sigma1)
            + 2.0 * s0 * s1 / d * log_likelihood_level
        )
        orientation = Orientation.BALL
    else:
        d = s1 - s0
        center = x0 - (s0 / d) * delta
        r2 = (
            s0 * s1 / d**2 * a2
            + 2.0 * n * s0 * s1 / d * math.log(sigma1 / sigma0)
            - 2.0 * s0 * s1 / d * log_likelihood_level
        )
        orientation = Orientation.COMPLEMENT
    if r2 < 0:
        if orientation is Orientation.BALL:
            raise ValueError("likelihood level leaves an empty region")
        # the whole space, up to the single centre point
        r2 = 0.0
    return WorstCaseBall(center, math.sqrt(r2), orientation)


def likelihood_region_contains(points, x0, x1, sigma0, sigma1, log_likelihood_level) -> np.ndarray:
    """Direct test of ``q0(x) <= level * q1(x)`` for rows of ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    n = x0.size
    log_q0 = -n * math.log(sigma0) - np.sum((pts - x0) ** 2, axis=1) / (2 * sigma0**2)
    log_q1 = -n * math.log(sigma1) - np.sum((pts - x1) ** 2, axis=1) / (2 * sigma1**2)
    return log_q0 <= log_likelihood_level + log_q1


def ball_probability_exact(mean, sigma: float, ball: WorstCaseBall) -> float:
    """Mass of ``ball`` under ``N(mean, sigma^2 I)``."""
    mean = np.asarray(mean, dtype=float)
    off = mean - ball.center
    dist = NcChiSq(mean.size, float(off @ off) / sigma**2)
    x = ball.radius**2 / sigma**2
    if ball.orientation is Orientation.BALL:
        return flush_underflow(dist.cdf(x))[0]
    return flush_underflow(dist.sf(x))[0]


def smoothed_ball_indicator_exact(x, sigma: float, center, radius: float) -> float:
    """Probability that ``x + sigma * Z`` falls inside the ball ``(center, radius)``."""
    x = np.asarray(x, dtype=float)
    ball = WorstCaseBall(np.asarray(center, dtype=float), float(radius), Orientation.BALL)
    return ball_probability_exact(x, sigma, ball)


def _noncentralities(pair: AdversaryPair) -> tuple[float, float]:
    # squared offsets of x0 and x1 from the worst-case center, in their own units
    s0, s1 = pair.sigma0**2, pair.sigma1**2
    # (s0 - s1) via a product keeps relative precision when sigma1 ~ sigma0
    d = (pair.sigma0 - pair.sigma1) * (pair.sigma0 + pair.sigma1)
    a2 = pair.distance**2
    return s0 * a2 / d**2, s1 * a2 / d**2


def _finite(p: float, what: str) -> float:
    if not math.isfinite(p):
        raise UnstableRegimeError(f"{what} evaluated to {p!r}")
    return p


def xi_greater(pair: AdversaryPair) -> float:
    """Worst-case class-B mass at the adversary when ``sigma0 > sigma1``."""
    if not pair.sigma0 > pair.sigma1:
        raise ValueError("xi_greater needs sigma0 > sigma1")
    lam0, lam1 = _noncentralities(pair)
    q = NcChiSq(pair.dof, lam0).ppf(pair.p_b)
    scale = (pair.sigma0 / pair.sigma1) ** 2
    val = NcChiSq(pair.dof, lam1).cdf(scale * q)
    return flush_underflow(_finite(val, "xi_greater"))[0]


def xi_less(pair: AdversaryPair) -> float:
    """Worst-case class-B mass at the adversary when ``sigma0 < sigma1``."""
    if not pair.sigma0 < pair.sigma1:
        raise ValueError("xi_less needs sigma0 < sigma1")
    lam0, lam1 = _noncentralities(pair)
    q = NcChiSq(pair.dof, lam0).isf(pair.p_b)
    scale = (pair.sigma0 / pair.sigma1) ** 2
    val = NcChiSq(pair.dof, lam1).sf(scale * q)
    return flush_underflow(_finite(val, "xi_less"))[0]


def xi_halfspace(pair: AdversaryPair) -> float:
    """Worst-case class-B mass for equal variances (a half-space)."""
    sigma = pair.sigma0
    return float(normal_cdf(normal_quantile(pair.p_b) + pair.distance / sigma))


def xi(pair: AdversaryPair) -> float:
    """Dispatch to the branch matching the variance ordering."""
    if pair.sigma0 > pair.sigma1:
        return xi_greater(pair)
    if pair.sigma0 < pair.sigma1:
        return xi_less(pair)
    return xi_halfspace(pair)
