"""Scalar special functions behind every probability in the package.

The noncentral chi-squared distribution is evaluated as a Poisson mixture
of central chi-squared terms summed outward from the modal Poisson index.
The central case is the ``noncentrality == 0`` instance of the same code.
Clopper-Pearson bounds invert a continued-fraction incomplete beta function
by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy import special as sc

__all__ = [
    "STABILITY_CEILING",
    "UnstableRegimeError",
    "NcChiSq",
    "BinomialEstimate",
    "normal_cdf",
    "normal_quantile",
    "ncchsq_cdf",
    "ncchsq_sf",
    "ncchsq_pdf",
    "ncchsq_quantile",
    "ncchsq_isf",
    "chernoff_central_bound",
    "betainc",
    "clopper_pearson_lower",
    "clopper_pearson_upper",
    "binomial_two_sided_pvalue",
]

STABILITY_CEILING = 1e8
SERIES_RTOL = 1e-12
_HARD_LIMIT = 1e15
_QUANTILE_RTOL = 1e-10


class UnstableRegimeError(ArithmeticError):
    """Raised when a value cannot be computed reliably."""


def normal_cdf(x):
    """Standard normal CDF."""
    return sc.ndtr(x)


def normal_quantile(p):
    """Inverse of :func:`normal_cdf`.

    Raises ``ValueError`` outside the open unit interval.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError(f"normal_quantile needs p in (0, 1), got {p!r}")
    return sc.ndtri(p)


@dataclass(frozen=True)
class NcChiSq:
    """Noncentral chi-squared law with ``dof`` degrees of freedom.

    ``noncentrality`` is the squared norm of the mean offset. Above
    ``ceiling`` (on ``dof + noncentrality``) a normal-type approximation
    replaces the series; ``strict`` turns that switch into an error.
    """

    dof: int
    noncentrality: float = 0.0
    ceiling: float = STABILITY_CEILING
    strict: bool = False

    def __post_init__(self):
        if int(self.dof) != self.dof or self.dof < 1:
            raise ValueError(f"dof must be a positive integer, got {self.dof!r}")
        lam = float(self.noncentrality)
        if not math.isfinite(lam):
            raise UnstableRegimeError(f"non-finite noncentrality {lam!r}")
        if lam < 0:
            raise ValueError(f"noncentrality must be >= 0, got {lam!r}")
        if self.dof + lam > _HARD_LIMIT:
            raise UnstableRegimeError(
                f"dof + noncentrality = {self.dof + lam:.3g} exceeds {_HARD_LIMIT:.0e}"
            )
        if self.strict and self.dof + lam > self.ceiling:
            raise UnstableRegimeError(
                f"dof + noncentrality = {self.dof + lam:.3g} above series ceiling"
            )

    @property
    def path(self) -> str:
        """Evaluation path: ``"series"`` or ``"normal-approx"``."""
        if self.dof + self.noncentrality > self.ceiling:
            return "normal-approx"
        return "series"

    @property
    def mean(self) -> float:
        return self.dof + self.noncentrality

    @property
    def std(self) -> float:
        return math.sqrt(2.0 * (self.dof + 2.0 * self.noncentrality))

    def cdf(self, x: float) -> float:
        return ncchsq_cdf(self, x)

    def sf(self, x: float) -> float:
        return ncchsq_sf(self, x)

    def pdf(self, x: float) -> float:
        return ncchsq_pdf(self, x)

    def ppf(self, p: float) -> float:
        return ncchsq_quantile(self, p)

    def isf(self, q: float) -> float:
        return ncchsq_isf(self, q)


_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _stirling_error(n: np.ndarray) -> np.ndarray:
    """``lgamma(n + 1) - (n + 1/2) log n + n - log(2 pi)/2`` for ``n >= 1``."""
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n < 16.0
    ns = n[small]
    out[small] = sc.gammaln(ns + 1.0) - (ns + 0.5) * np.log(ns) + ns - _HALF_LOG_2PI
    nl = n[~small]
    inv2 = 1.0 / (nl * nl)
    out[~small] = (
        1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0))
    ) / nl
    return out


def _poisson_logweights(mu: float, j: np.ndarray) -> np.ndarray:
    """Log Poisson pmf, in saddle-point form when ``mu`` is large."""
    j = np.atleast_1d(np.asarray(j, dtype=float))
    if mu < 500.0:
        return -mu + j * math.log(mu) - sc.gammaln(j + 1.0)
    out = np.full_like(j, -mu)
    pos = j > 0
    jp = j[pos]
    t = (jp - mu) / mu
    # j log(j/mu) + mu - j, written to avoid cancellation near the mode
    dev = mu * ((1.0 + t) * np.log1p(t) - t)
    out[pos] = -0.5 * np.log(2.0 * np.pi * jp) - _stirling_error(jp) - dev
    return out


def _mixture(dist: NcChiSq, x: float, kernel) -> float:
    """Sum ``w_j * kernel(dof/2 + j, x)`` over Poisson(lambda/2) weights ``w_j``.

    The window starts around the Poisson mode and grows in each direction
    until a geometric bound on the remaining weight falls below
    ``SERIES_RTOL`` times the running total (kernels are bounded by 1).
    """
    mu = 0.5 * float(dist.noncentrality)
    half = dist.dof / 2.0
    if mu == 0.0:
        return float(kernel(np.array([half]), x)[0])
    mode = math.floor(mu)
    width = int(7.0 * math.sqrt(mu) + 12)
    step = max(8, width // 2)

    def block(lo: int, hi: int) -> np.ndarray:
        j = np.arange(lo, hi, dtype=float)
        w = np.exp(_poisson_logweights(mu, j))
        return w * kernel(half + j, x)

    log_mu = math.log(mu)

    def weight(j: int) -> float:
        if mu < 500.0:
            return math.exp(-mu + j * log_mu - math.lgamma(j + 1.0))
        return math.exp(_poisson_logweights(mu, j)[0])

    lo, hi = max(0, mode - width), mode + width + 1
    total = float(block(lo, hi).sum())
    # upward: w_{j+1}/w_j = mu/(j+1) < 1 beyond the mode
    while True:
        ratio = mu / (hi + 1.0)
        if weight(hi) / (1.0 - ratio) <= SERIES_RTOL * total:
            break
        total += float(block(hi, hi + step).sum())
        hi += step
        if hi > mode + 1000 * (width + 1):
            raise UnstableRegimeError("Poisson mixture failed to converge")
    # downward: w_{j-1}/w_j = j/mu < 1 below the mode
    while lo > 0:
        ratio = lo / mu
        if weight(lo - 1) / (1.0 - ratio) <= SERIES_RTOL * total:
            break
        new_lo = max(0, lo - step)
        total += float(block(new_lo, lo).sum())
        lo = new_lo
    return total


def _sankaran_z(dist: NcChiSq, x: float) -> float:
    n, lam = float(dist.dof), float(dist.noncentrality)
    h = 1.0 - 2.0 * (n + lam) * (n + 3.0 * lam) / (3.0 * (n + 2.0 * lam) ** 2)
    p = (n + 2.0 * lam) / (n + lam) ** 2
    m = (h - 1.0) * (1.0 - 3.0 * h)
    num = (x / (n + lam)) ** h - (1.0 + h * p * (h - 1.0 - 0.5 * (2.0 - h) * m * p))
    return num / (h * math.sqrt(2.0 * p) * (1.0 + 0.5 * m * p))


def _check_x(x: float) -> float:
    x = float(x)
    if math.isnan(x) or x < 0:
        raise ValueError(f"argument must be a non-negative number, got {x!r}")
    return x


def _gammainc_lower(a: np.ndarray, x: float) -> np.ndarray:
    """Regularised lower incomplete gamma ``P(a, x)``, accurate for huge ``a``.

    Below ``a(1 - 4.5/sqrt(a))`` scipy falls back to a power series that
    stops after a fixed number of terms and loses most digits once ``a``
    reaches about 1e6. There the uniform asymptotic expansion with its first
    two coefficients is used instead (relative error below 1e-11 for
    ``a >= 1e5``).
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    out = sc.gammainc(a, x)
    far = (a >= 1e5) & (x < a * (1.0 - 4.5 / np.sqrt(a)))
    if np.any(far):
        af = a[far]
        lm1 = x / af - 1.0
        eta = -np.sqrt(2.0 * (lm1 - np.log1p(lm1)))
        c0 = 1.0 / lm1 - 1.0 / eta
        c1 = 1.0 / eta**3 - 1.0 / lm1**3 - 1.0 / lm1**2 - 1.0 / (12.0 * lm1)
        rem = np.exp(-0.5 * af * eta * eta) / np.sqrt(2.0 * np.pi * af) * (c0 + c1 / af)
        out[far] = 0.5 * sc.erfc(-eta * np.sqrt(0.5 * af)) - rem
    return out


# Each tail is summed directly only on its own side of the mean and taken
# as a complement on the other, so the small tail keeps relative accuracy
# and cdf + sf == 1 exactly.
def _lower_series(dist: NcChiSq, x: float) -> float:
    val = _mixture(dist, x, lambda a, xx: _gammainc_lower(a, 0.5 * xx))
    return min(1.0, max(0.0, val))


def _upper_series(dist: NcChiSq, x: float) -> float:
    val = _mixture(dist, x, lambda a, xx: sc.gammaincc(a, 0.5 * xx))
    return min(1.0, max(0.0, val))


def ncchsq_cdf(dist: NcChiSq, x: float) -> float:
    """``P(X <= x)`` for ``X ~ dist``."""
    x = _check_x(x)
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if dist.path == "normal-approx":
        return float(sc.ndtr(_sankaran_z(dist, x)))
    if x > dist.mean:
        return 1.0 - _upper_series(dist, x)
    return _lower_series(dist, x)


def ncchsq_sf(dist: NcChiSq, x: float) -> float:
    """``P(X > x)``, accurate in the upper tail."""
    x = _check_x(x)
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if dist.path == "normal-approx":
        return float(sc.ndtr(-_sankaran_z(dist, x)))
    if x > dist.mean:
        return _upper_series(dist, x)
    return 1.0 - _lower_series(dist, x)


def _central_pdf(a: np.ndarray, x: float) -> np.ndarray:
    # density of chi-squared with 2a dof
    return np.exp((a - 1.0) * math.log(0.5 * x) - 0.5 * x - sc.gammaln(a)) * 0.5


def ncchsq_pdf(dist: NcChiSq, x: float) -> float:
    """Density of ``dist`` at ``x > 0``."""
    x = _check_x(x)
    if x == 0.0 or math.isinf(x):
        return 0.0
    if dist.path == "normal-approx":
        # derivative of the approximation by central difference
        h = 1e-6 * max(x, 1.0)
        return (ncchsq_cdf(dist, x + h) - ncchsq_cdf(dist, max(x - h, 0.0))) / (
            x + h - max(x - h, 0.0)
        )
    return _mixture(dist, x, _central_pdf)


def _check_prob(p: float, name: str = "p") -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {p!r}")
    return p


def _invert(dist: NcChiSq, target: float, upper: bool) -> float:
    """Solve ``cdf(x) = target`` (or ``sf(x) = target`` if ``upper``).

    The bracket starts one sd either side of a normal guess and widens
    until it holds the root.
    Brent's method then shrinks it to 1e-10 relative width, falling back to
    bisection steps whenever interpolation misbehaves. One Newton step
    polishes the result.
    """
    fn = (lambda x: ncchsq_sf(dist, x)) if upper else (lambda x: ncchsq_cdf(dist, x))

    def below(x):
        # True when x lies left of the root
        v = fn(x)
        return v > target if upper else v < target

    # start from a normal guess; the loops below widen it if skew misplaces it
    z = float(sc.ndtri(1.0 - target if upper else target))
    lo = max(0.0, dist.mean + (z - 1.0) * dist.std)
    hi = dist.mean + (z + 1.0) * dist.std
    if hi <= lo:
        hi = dist.mean
    while lo > 0.0 and not below(lo):
        lo = 0.0 if lo < 1e-300 else lo * 0.25
    while below(hi):
        hi = 2.0 * hi + 1.0
        if hi > 1e300:
            raise UnstableRegimeError("quantile bracket diverged")
    if hi - lo > _QUANTILE_RTOL * hi:
        x = optimize.brentq(
            lambda t: fn(t) - target, lo, hi, xtol=1e-300, rtol=_QUANTILE_RTOL, full_output=False
        )
        # root lies within Brent's tolerance of x
        lo, hi = max(lo, x * (1.0 - 4 * _QUANTILE_RTOL)), min(hi, x * (1.0 + 4 * _QUANTILE_RTOL))
    x = 0.5 * (lo + hi)
    dens = ncchsq_pdf(dist, x)
    if dens > 0.0 and math.isfinite(dens):
        step = (fn(x) - target) / dens
        cand = x + step if upper else x - step
        if lo <= cand <= hi:
            x = cand
    return x


def ncchsq_quantile(dist: NcChiSq, p: float) -> float:
    """Inverse CDF of ``dist``.

    For ``p > 0.5`` the survival function is inverted instead, which keeps
    full relative precision in the upper tail.
    """
    p = _check_prob(p)
    if p > 0.5:
        return _invert(dist, 1.0 - p, upper=True)
    return _invert(dist, p, upper=False)


def ncchsq_isf(dist: NcChiSq, q: float) -> float:
    """Inverse survival function: ``x`` with ``P(X > x) = q``."""
    q = _check_prob(q, "q")
    if q > 0.5:
        return _invert(dist, 1.0 - q, upper=False)
    return _invert(dist, q, upper=True)


def chernoff_central_bound(dof: int, z: float) -> float:
    """Chernoff tail bound ``(z e^{1-z})^{N/2}`` for central chi-squared.

    Bounds ``P(X <= zN)`` when ``z < 1`` and ``P(X >= zN)`` when ``z > 1``.
    """
    z = float(z)
    if z <= 0.0 or z == 1.0:
        raise ValueError(f"z must be positive and different from 1, got {z!r}")
    return math.exp(0.5 * dof * (math.log(z) + 1.0 - z))


# incomplete beta by Lentz's continued fraction
_FPMIN = 1e-300
_CF_EPS = 1e-15
_CF_MAXIT = 100_000


def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise UnstableRegimeError(f"incomplete beta continued fraction stalled at a={a}, b={b}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbeta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    front = math.exp(a * math.log(x) + b * math.log1p(-x) - lbeta)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _beta_quantile(a: float, b: float, target: float, lo: float, hi: float) -> float:
    # I_x(a, b) is increasing in x; bisect to machine resolution
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if betainc(a, b, mid) < target:
            lo = mid
        else:
            hi = mid
    return lo


def _validate_binomial(successes: int, trials: int, confidence_level: float) -> None:
    if trials < 1 or successes < 0 or successes > trials:
        raise ValueError(f"need 0 <= successes <= trials, trials >= 1; got {successes}/{trials}")
    if not 0.0 < confidence_level < 1.0:
        raise ValueError(f"confidence_level must lie in (0, 1), got {confidence_level!r}")


def clopper_pearson_lower(successes: int, trials: int, confidence_level: float) -> float:
    """One-sided exact lower confidence bound on a binomial proportion."""
    _validate_binomial(successes, trials, confidence_level)
    alpha = 1.0 - confidence_level
    if successes == 0:
        return 0.0
    if successes == trials:
        return alpha ** (1.0 / trials)
    return _beta_quantile(successes, trials - successes + 1, alpha, 0.0, successes / trials)


def clopper_pearson_upper(successes: int, trials: int, confidence_level: float) -> float:
    """One-sided exact upper confidence bound on a binomial proportion."""
    _validate_binomial(successes, trials, confidence_level)
    alpha = 1.0 - confidence_level
    if successes == trials:
        return 1.0
    if successes == 0:
        return 1.0 - alpha ** (1.0 / trials)
    return _beta_quantile(successes + 1, trials - successes, 1.0 - alpha, successes / trials, 1.0)


@dataclass(frozen=True)
class BinomialEstimate:
    """Observed successes out of ``trials`` at a target confidence level."""

    successes: int
    trials: int
    confidence_level: float

    def __post_init__(self):
        _validate_binomial(self.successes, self.trials, self.confidence_level)

    @property
    def lower(self) -> float:
        return clopper_pearson_lower(self.successes, self.trials, self.confidence_level)

    @property
    def upper(self) -> float:
        return clopper_pearson_upper(self.successes, self.trials, self.confidence_level)


def _binom_logpmf(k: np.ndarray, n: int, p: float) -> np.ndarray:
    return (
        sc.gammaln(n + 1.0)
        - sc.gammaln(k + 1.0)
        - sc.gammaln(n - k + 1.0)
        + sc.xlogy(k, p)
        + sc.xlog1py(n - k, -p)
    )


def binomial_two_sided_pvalue(successes: int, trials: int, p0: float = 0.5) -> float:
    """Exact two-sided binomial test p-value.

    Sums the probability of every outcome no more likely than the observed
    one under ``Binomial(trials, p0)``.
    """
    if trials < 0 or successes < 0 or successes > trials:
        raise ValueError(f"need 0 <= successes <= trials, got {successes}/{trials}")
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0 must lie in [0, 1], got {p0!r}")
    if trials == 0:
        return 1.0
    k = np.arange(trials + 1, dtype=float)
    logpmf = _binom_logpmf(k, trials, p0)
    # relative slack absorbs rounding in exactly tied outcomes
    thresh = logpmf[successes] + math.log1p(1e-7)
    mass = np.exp(logpmf[logpmf <= thresh]).sum()
    return float(min(1.0, mass))
