"""Dimension-dependent limits on how fast the smoothing variance may change.

For a point certified with class probability ``pA``, an adversary whose
standard deviation ratio ``t = sigma1 / sigma0`` strays too far from 1 is
never certifiable, whatever its distance. The admissible band narrows
like ``1 / sqrt(N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import optimize

from .special import NcChiSq
from .worst_case import AdversaryPair, xi_greater

__all__ = [
    "ThresholdQuery",
    "RootNotBracketedError",
    "is_hopeless_greater",
    "is_hopeless_less",
    "corollary_bound",
    "theoretical_threshold",
    "theoretical_threshold_less",
    "practical_threshold",
    "practical_threshold_closed_form",
    "max_ratio_variation_scaling",
    "threshold_rows",
]

_T_LO = 1e-6
_T_HI = 1.0 - 1e-9
_XTOL = 1e-9


class RootNotBracketedError(RuntimeError):
    """The target function does not change sign on the search interval."""


@dataclass(frozen=True)
class ThresholdQuery:
    dof: int
    pA: float

    def __post_init__(self):
        if self.dof < 1:
            raise ValueError("dof must be positive")
        if not 0.5 < self.pA < 1.0:
            raise ValueError(f"pA must lie in (0.5, 1), got {self.pA!r}")

    @property
    def budget(self) -> float:
        """Right-hand side ``2 log(1 - pA) / N`` of the feasibility test."""
        return 2.0 * math.log1p(-self.pA) / self.dof


def _gap(u: float) -> float:
    # log u + 1 - u, which is <= 0 with equality only at u = 1
    return math.log(u) + 1.0 - u


def is_hopeless_greater(ratio: float, query: ThresholdQuery) -> bool:
    """True when no adversary with ``sigma1/sigma0 = ratio < 1`` can be certified."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    return _gap(ratio**2) < query.budget


def is_hopeless_less(ratio: float, query: ThresholdQuery) -> bool:
    """True when no adversary with ``sigma1/sigma0 = ratio > 1`` can be certified."""
    if ratio <= 1.0:
        raise ValueError("ratio must exceed 1")
    if query.dof < 2:
        raise ValueError("the test needs dof >= 2")
    n = query.dof
    return _gap(ratio**2 * (n - 1) / n) < query.budget


def corollary_bound(query: ThresholdQuery) -> float | None:
    """Closed-form ratio below which every adversary is hopeless.

    Returns ``None`` when ``4 * (-log(1 - pA)) >= N``. The bound gives no
    information there.
    """
    inner = 1.0 - 2.0 * math.sqrt(-math.log1p(-query.pA) / query.dof)
    if inner <= 0.0:
        return None
    return math.sqrt(inner)


def _bisect(fn, lo: float, hi: float, xtol: float = _XTOL) -> float:
    flo, fhi = fn(lo), fn(hi)
    if flo * fhi > 0:
        raise RootNotBracketedError(f"no sign change on [{lo}, {hi}]")
    return optimize.bisect(fn, lo, hi, xtol=xtol, rtol=1e-12, maxiter=200)


def theoretical_threshold(query: ThresholdQuery) -> float:
    """Largest ``t < 1`` with ``log t^2 + 1 - t^2 = 2 log(1 - pA) / N``."""
    return _bisect(lambda t: _gap(t * t) - query.budget, _T_LO, _T_HI)


def theoretical_threshold_less(query: ThresholdQuery) -> float:
    """Smallest ratio ``> 1`` flagged by :func:`is_hopeless_less`."""
    n = query.dof

    def fn(t):
        return _gap(t * t * (n - 1) / n) - query.budget

    lo = math.sqrt(n / (n - 1))
    hi = lo * 2.0
    while fn(hi) > 0:
        hi *= 2.0
    return _bisect(fn, lo, hi)


def _xi_at_zero(ratio: float, query: ThresholdQuery) -> float:
    return xi_greater(AdversaryPair(1.0, ratio, 0.0, query.dof, query.pA))


def practical_threshold(query: ThresholdQuery) -> float:
    """Root in ``t`` of ``xi_greater(a=0) = 0.5``.

    Every ratio below the returned value has worst-case class-B mass above
    one half, even for an adversary sitting on the certified point.
    """
    return _bisect(lambda t: 0.5 - _xi_at_zero(t, query), _T_LO, _T_HI, xtol=1e-15)  # roots get tiny at low dimension


def practical_threshold_closed_form(query: ThresholdQuery) -> float:
    """Same root via central quantiles: ``sqrt(q(1 - pA) / median)``."""
    dist = NcChiSq(query.dof)
    return math.sqrt(dist.ppf(1.0 - query.pA) / dist.ppf(0.5))


def max_ratio_variation_scaling(dims, pB: float, c: float, spread: float = 1.0) -> list[float]:
    """Typical admissible ``|sigma(x0)/sigma(x1) - 1|`` per dimension.

    Evaluates ``spread * sqrt(-log pB) / (c sqrt(N))``. The certified radius
    targeted is ``c sqrt(N)`` and the typical distance between two inputs is
    ``spread * sqrt(N)``.
    """
    dims = list(dims)
    if not dims:
        raise ValueError("dims must be non-empty")
    if not 0.0 < pB <= 1.0 or c <= 0 or spread <= 0:
        raise ValueError("need pB in (0, 1], c > 0 and spread > 0")
    return [spread * math.sqrt(-math.log(pB)) / (c * math.sqrt(n)) for n in dims]


def threshold_rows(dims, pas, practical: bool = True) -> list[dict]:
    """Rows with columns ``N, pA, theoretical, practical, corollary``."""
    rows = []
    for n in dims:
        for pa in pas:
            q = ThresholdQuery(int(n), float(pa))
            rows.append(
                {
                    "N": q.dof,
                    "pA": q.pA,
                    "theoretical": theoretical_threshold(q),
                    "practical": practical_threshold(q) if practical else None,
                    "corollary": corollary_bound(q),
                }
            )
    return rows
