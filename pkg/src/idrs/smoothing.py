"""Monte-Carlo Gaussian smoothing of a base classifier.

Sampling uses a counter-based generator (Philox) keyed by
``(seed, sample_index, purpose, batch_index)``. Results for one input
therefore do not depend on how inputs are scheduled across workers.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .special import (
    binomial_two_sided_pvalue,
    clopper_pearson_lower,
    clopper_pearson_upper,
    normal_cdf,
    normal_quantile,
)

__all__ = [
    "ABSTAIN",
    "SmoothingConfig",
    "CertificationResult",
    "PaEstimate",
    "noise_generator",
    "sample_counts",
    "predict",
    "estimate_pa",
    "cohen_radius",
    "certify_constant",
    "linear_truncation_curve",
    "undercertification_ratio",
    "theoretical_ceiling",
]

ABSTAIN = -1

# purposes of independent noise streams
_SELECT, _ESTIMATE, _PREDICT = 0, 1, 2


@dataclass(frozen=True)
class SmoothingConfig:
    """Sampling budget and confidence settings.

    ``pB_mode="complement"`` uses ``1 - pA_lower`` as the runner-up bound.
    ``"estimated"`` bounds the runner-up classes from the same draws and
    splits ``alpha`` evenly between the two bounds.
    """

    n0: int = 100
    n: int = 100_000
    alpha: float = 0.001
    mc_batch: int = 10_000
    seed: int = 0
    pB_mode: str = "complement"

    def __post_init__(self):
        if self.n0 < 1 or self.n < 1 or self.mc_batch < 1:
            raise ValueError("n0, n and mc_batch must be positive")
        if not 0.0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 0.5)")
        if self.pB_mode not in ("complement", "estimated"):
            raise ValueError(f"unknown pB_mode {self.pB_mode!r}")


@dataclass
class CertificationResult:
    predicted: int
    pA_lower: float
    pB_upper: float
    sigma0: float
    radius: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def abstained(self) -> bool:
        return self.predicted == ABSTAIN

    def to_dict(self) -> dict:
        return asdict(self)


class PaEstimate(NamedTuple):
    top: int
    pA_lower: float
    pB_upper: float
    counts: np.ndarray


def noise_generator(seed: int, sample_index: int, purpose: int, batch: int) -> np.random.Generator:
    """Independent Philox stream for one batch of one input."""
    ss = np.random.SeedSequence(seed, spawn_key=(sample_index, purpose, batch))
    return np.random.Generator(np.random.Philox(ss))


def sample_counts(
    f, x0, sigma: float, num: int, cfg: SmoothingConfig, sample_index: int = 0, purpose: int = 0
) -> np.ndarray:
    """Class histogram of ``f(x0 + sigma * Z)`` over ``num`` draws."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    counts = np.zeros(f.num_classes, dtype=np.int64)
    for b, start in enumerate(range(0, num, cfg.mc_batch)):
        size = min(cfg.mc_batch, num - start)
        rng = noise_generator(cfg.seed, sample_index, purpose, b)
        batch = x0 + sigma * rng.standard_normal((size, x0.size))
        counts += np.bincount(f.predict(batch), minlength=f.num_classes)[: f.num_classes]
    return counts


def _top_two(counts: np.ndarray) -> tuple[int, int]:
    # stable ordering: ties resolved toward the smaller class index
    order = np.argsort(-counts, kind="stable")
    return int(order[0]), int(order[1]) if counts.size > 1 else -1


def predict(f, sigma0: float, x0, cfg: SmoothingConfig, sample_index: int = 0) -> int:
    """Smoothed prediction, or ``ABSTAIN`` if the top two are not separated."""
    counts = sample_counts(f, x0, sigma0, cfg.n, cfg, sample_index, _PREDICT)
    a, b = _top_two(counts)
    n_a, n_b = int(counts[a]), int(counts[b]) if b >= 0 else 0
    if binomial_two_sided_pvalue(n_a, n_a + n_b, 0.5) <= cfg.alpha:
        return a
    return ABSTAIN


def estimate_pa(f, sigma0: float, x0, cfg: SmoothingConfig, sample_index: int = 0) -> PaEstimate:
    """Select the top class on ``n0`` draws and bound its mass on ``n`` draws."""
    sel = sample_counts(f, x0, sigma0, cfg.n0, cfg, sample_index, _SELECT)
    top = int(np.argmax(sel))
    counts = sample_counts(f, x0, sigma0, cfg.n, cfg, sample_index, _ESTIMATE)
    n_a = int(counts[top])
    if cfg.pB_mode == "complement":
        lower = clopper_pearson_lower(n_a, cfg.n, 1.0 - cfg.alpha)
        return PaEstimate(top, lower, 1.0 - lower, counts)
    half = cfg.alpha / 2.0
    lower = clopper_pearson_lower(n_a, cfg.n, 1.0 - half)
    others = np.delete(counts, top)
    # Bonferroni over the runner-up candidates
    level = 1.0 - half / max(1, others.size)
    upper = max(clopper_pearson_upper(int(c), cfg.n, level) for c in np.unique(others))
    return PaEstimate(top, lower, min(upper, 1.0 - lower), counts)


def cohen_radius(pA_lower: float, pB_upper: float, sigma: float) -> float:
    """Constant-scale radius ``sigma/2 (Phi^-1(pA) - Phi^-1(pB))``, floored at 0."""
    if pA_lower <= pB_upper:
        return 0.0
    r = 0.5 * sigma * (float(normal_quantile(pA_lower)) - float(normal_quantile(pB_upper)))
    return max(0.0, r)


def _certifiable(est: PaEstimate, cfg: SmoothingConfig) -> bool:
    if cfg.pB_mode == "complement":
        return est.pA_lower > 0.5
    return est.pA_lower > est.pB_upper


def certify_constant(f, sigma: float, x0, cfg: SmoothingConfig, sample_index: int = 0):
    """Constant-scale certificate for one input."""
    est = estimate_pa(f, sigma, x0, cfg, sample_index)
    if not _certifiable(est, cfg):
        return CertificationResult(ABSTAIN, est.pA_lower, est.pB_upper, sigma, 0.0, "cohen-constant")
    radius = cohen_radius(est.pA_lower, est.pB_upper, sigma)
    return CertificationResult(est.top, est.pA_lower, est.pB_upper, sigma, radius, "cohen-constant")


def linear_truncation_curve(sigma: float, distances, cfg: SmoothingConfig) -> list[tuple[float, float]]:
    """Radius certified at distance ``d`` from a linear decision boundary.

    Uses the exact ``pA = Phi(d / sigma)`` and the typical count
    ``round(n pA)``. For large ``d`` the curve saturates at
    ``sigma * Phi^-1(alpha^(1/n))``.
    """
    out = []
    for d in distances:
        pa = float(normal_cdf(d / sigma))
        k = int(round(cfg.n * pa))
        lower = clopper_pearson_lower(k, cfg.n, 1.0 - cfg.alpha)
        radius = sigma * float(normal_quantile(lower)) if lower > 0.5 else 0.0
        out.append((float(d), radius))
    return out


def undercertification_ratio(pA: float, n: int, alpha: float) -> float:
    """``Phi^-1(LCB) / Phi^-1(pA)`` at the typical count ``round(n pA)``."""
    if not 0.5 < pA < 1.0:
        raise ValueError("pA must lie in (0.5, 1)")
    lower = clopper_pearson_lower(int(round(n * pA)), n, 1.0 - alpha)
    if lower <= 0.5:
        return 0.0
    return float(normal_quantile(lower)) / float(normal_quantile(pA))


def theoretical_ceiling(sigma: float, n: int, alpha: float) -> float:
    """Largest certifiable radius with ``n`` samples: ``sigma Phi^-1(alpha^(1/n))``."""
    return sigma * float(normal_quantile(math.exp(math.log(alpha) / n)))
