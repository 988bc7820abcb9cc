"""Alternative certificate through Renyi divergences between Gaussians.

For two isotropic Gaussians with different scales the order-``alpha``
divergence has a closed form. A radius is certified when the divergence
stays below the budget ``-log(1 - 2 M_1 + 2 M_{1-alpha})`` built from
power means of ``(pA, pB)``. The divergence carries a dimension-dependent
offset whenever ``sigma0 != sigma1``, so this certificate collapses as N
grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "RenyiQuery",
    "InadmissibleOrderError",
    "admissible_upper",
    "renyi_divergence_isotropic",
    "li_condition_rhs",
    "default_alpha_grid",
    "renyi_objective",
    "renyi_certified_radius",
]

_GUARD = 1e-6
_GRID_SIZE = 512


class InadmissibleOrderError(ValueError):
    """The divergence order lies outside the admissible set."""


@dataclass(frozen=True)
class RenyiQuery:
    sigma0: float
    sigma1: float
    dof: int
    pA: float
    pB: float
    alpha_grid: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.sigma0 <= 0 or self.sigma1 <= 0 or self.dof < 1:
            raise ValueError("need positive scales and dof")
        if not (0.0 <= self.pB <= self.pA <= 1.0 and self.pA + self.pB <= 1.0 + 1e-15):
            raise ValueError("need 0 <= pB <= pA and pA + pB <= 1")


def admissible_upper(sigma0: float, sigma1: float) -> float:
    """Supremum of admissible orders: ``inf`` unless ``sigma0 < sigma1``."""
    if sigma0 >= sigma1:
        return math.inf
    return sigma1**2 / (sigma1**2 - sigma0**2)


def _check_alpha(alpha: float, sigma0: float, sigma1: float) -> None:
    if not alpha > 0 or alpha == 1.0:
        raise InadmissibleOrderError(f"order must be positive and != 1, got {alpha!r}")
    if alpha >= admissible_upper(sigma0, sigma1):
        raise InadmissibleOrderError(
            f"order {alpha!r} makes the mixed variance non-positive"
        )


def _mixed_var(alpha: float, sigma0: float, sigma1: float) -> float:
    return (1.0 - alpha) * sigma1**2 + alpha * sigma0**2


def renyi_divergence_isotropic(q: RenyiQuery, distance: float, alpha: float) -> float:
    """Order-``alpha`` divergence between ``N(x1, sigma1^2 I)`` and ``N(x0, sigma0^2 I)``."""
    _check_alpha(alpha, q.sigma0, q.sigma1)
    var = _mixed_var(alpha, q.sigma0, q.sigma1)
    n = q.dof
    shift = alpha * distance**2 / (2.0 * var)
    return shift + _scale_term(alpha, var, q.sigma0, q.sigma1, n)


def _scale_term(alpha, var, sigma0, sigma1, n) -> float:
    # N log(sigma_a/sigma1)/(1-a) - N a/(1-a) log(sigma0/sigma1)
    return n * (0.5 * math.log(var / sigma1**2) - alpha * math.log(sigma0 / sigma1)) / (1.0 - alpha)


def li_condition_rhs(pA: float, pB: float, alpha: float) -> float:
    """Divergence budget ``-log(1 - 2 M_1 + 2 M_{1-alpha})``.

    ``M_1`` is the arithmetic and ``M_{1-alpha}`` the power mean of order
    ``1 - alpha`` of ``(pA, pB)``.
    """
    if not alpha > 0 or alpha == 1.0:
        raise InadmissibleOrderError(f"order must be positive and != 1, got {alpha!r}")
    m1 = 0.5 * (pA + pB)
    e = 1.0 - alpha
    with np.errstate(divide="ignore"):
        logs = np.log([pA, pB])
    if e < 0 and np.any(np.isneginf(logs)):
        m_pow = 0.0
    else:
        finite = logs[np.isfinite(logs)]
        if finite.size == 0:
            m_pow = 0.0
        else:
            log_mean = logsumexp(e * finite) - math.log(2.0)
            m_pow = math.exp(log_mean / e)
    inner = 1.0 - 2.0 * m1 + 2.0 * m_pow
    if inner <= 0.0:
        return math.inf
    return -math.log(inner)


def default_alpha_grid(sigma0: float, sigma1: float, size: int = _GRID_SIZE) -> np.ndarray:
    """Log-spaced orders over the admissible set, avoiding ``1 +- 1e-6``."""
    top = admissible_upper(sigma0, sigma1)
    hi = 1e4 if math.isinf(top) else top * (1.0 - 1e-9)
    grid = np.geomspace(1e-4, hi, size)
    return grid[np.abs(grid - 1.0) > _GUARD]


def renyi_objective(q: RenyiQuery, alpha: float) -> float:
    """Squared radius certified at order ``alpha`` (may be negative)."""
    _check_alpha(alpha, q.sigma0, q.sigma1)
    var = _mixed_var(alpha, q.sigma0, q.sigma1)
    budget = li_condition_rhs(q.pA, q.pB, alpha) - _scale_term(alpha, var, q.sigma0, q.sigma1, q.dof)
    return 2.0 * var / alpha * budget


def _golden_max(fn, lo: float, hi: float, iters: int = 80) -> tuple[float, float]:
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def renyi_certified_radius(q: RenyiQuery) -> float:
    """Best radius over the order grid, refined by golden-section search."""
    if q.pA <= q.pB:
        return 0.0
    grid = np.asarray(q.alpha_grid if q.alpha_grid is not None else default_alpha_grid(q.sigma0, q.sigma1))
    top = admissible_upper(q.sigma0, q.sigma1)
    grid = grid[(grid > 0) & (grid < top) & (np.abs(grid - 1.0) > _GUARD)]
    if grid.size == 0:
        raise InadmissibleOrderError("no admissible orders on the grid")
    vals = np.array([renyi_objective(q, a) for a in grid])
    i = int(np.nanargmax(vals))
    best = float(vals[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    if hi > lo:

        def f(log_a):
            a = math.exp(log_a)
            if abs(a - 1.0) <= _GUARD:
                return -math.inf
            return renyi_objective(q, a)

        _, refined = _golden_max(f, math.log(lo), math.log(hi))
        best = max(best, refined)
    if not math.isfinite(best):
        raise ArithmeticError("non-finite Renyi objective")
    return math.sqrt(best) if best > 0 else 0.0
