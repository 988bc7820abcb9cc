"""Input-dependent smoothing scale from k-nearest-neighbour distances.

``sigma(x) = sigma_b * exp(rate * (mean_knn_distance(x) - m))``, optionally
capped from above. The mean distance to the k nearest reference points is
1-Lipschitz, so ``log sigma`` is ``rate``-Lipschitz and the field is
``rate``-semi-elastic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SigmaField",
    "ElasticityReport",
    "pairwise_distances",
    "knn_mean_distances",
    "sigma_at",
    "mean_knn_distance",
    "verify_semi_elasticity",
    "calibrate_m",
]


def pairwise_distances(x: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Euclidean distances between rows of ``x`` and rows of ``refs``.

    Differences are formed explicitly (no Gram-matrix shortcut) so small
    distances keep full relative precision.
    """
    x = np.atleast_2d(x)
    out = np.empty((x.shape[0], refs.shape[0]))
    chunk = max(1, 2_000_000 // max(1, refs.size))
    for i in range(0, x.shape[0], chunk):
        diff = x[i : i + chunk, None, :] - refs[None, :, :]
        out[i : i + chunk] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def knn_mean_distances(
    x: np.ndarray,
    refs: np.ndarray,
    k: int,
    exclude: np.ndarray | None = None,
    exclude_coincident: bool = False,
) -> np.ndarray:
    """Mean of the ``k`` smallest distances from each row of ``x`` to ``refs``.

    ``exclude`` optionally gives, per row, a reference index left out of the
    neighbour set (leave-self-out). With ``exclude_coincident`` the first
    reference point equal to the query is dropped instead.
    """
    d = pairwise_distances(x, refs)
    if exclude is not None:
        d[np.arange(d.shape[0]), exclude] = np.inf
    if exclude_coincident:
        first = np.argmin(d, axis=1)
        rows = np.flatnonzero(d[np.arange(d.shape[0]), first] == 0.0)
        d[rows, first[rows]] = np.inf
    # stable sort breaks ties by reference index
    idx = np.argsort(d, axis=1, kind="stable")[:, :k]
    return np.take_along_axis(d, idx, axis=1).mean(axis=1)


@dataclass(frozen=True)
class SigmaField:
    """Semi-elastic standard deviation field anchored on reference points.

    By default a query equal to a reference point keeps that point in its
    neighbour set (distance 0 counts). ``exclude_self=True`` drops it, which
    makes the field discontinuous at reference points.
    """

    reference_points: np.ndarray
    sigma_b: float
    rate: float = 0.0
    k: int = 1
    m: float = 0.0
    sigma_cap: float | None = None
    exclude_self: bool = False
    dim: int = field(init=False)

    def __post_init__(self):
        refs = np.atleast_2d(np.asarray(self.reference_points, dtype=float))
        object.__setattr__(self, "reference_points", refs)
        object.__setattr__(self, "dim", refs.shape[1])
        if refs.shape[0] == 0:
            raise ValueError("reference set is empty")
        if not 1 <= self.k <= refs.shape[0] - int(self.exclude_self):
            raise ValueError(f"k={self.k} must lie in [1, {refs.shape[0]}]")
        if self.sigma_b <= 0 or self.rate < 0:
            raise ValueError("need sigma_b > 0 and rate >= 0")
        if self.sigma_cap is not None and self.sigma_cap <= 0:
            raise ValueError("sigma_cap must be positive")

    @classmethod
    def constant(cls, sigma: float, dim: int) -> SigmaField:
        """Field equal to ``sigma`` everywhere."""
        return cls(np.zeros((1, dim)), sigma, 0.0, 1, 0.0)

    def _points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.dim:
            raise ValueError(f"expected dimension {self.dim}, got {pts.shape[1]}")
        return pts

    def _knn(self, pts: np.ndarray) -> np.ndarray:
        return knn_mean_distances(
            pts, self.reference_points, self.k, exclude_coincident=self.exclude_self
        )

    def mean_knn_distance(self, x) -> np.ndarray | float:
        out = self._knn(self._points(x))
        return float(out[0]) if np.ndim(x) == 1 else out

    def log_sigma(self, x) -> np.ndarray | float:
        pts = self._points(x)
        if self.rate == 0.0:
            out = np.full(pts.shape[0], math.log(self.sigma_b))
        else:
            out = math.log(self.sigma_b) + self.rate * (self._knn(pts) - self.m)
        if self.sigma_cap is not None:
            out = np.minimum(out, math.log(self.sigma_cap))
        return float(out[0]) if np.ndim(x) == 1 else out

    def sigma(self, x) -> np.ndarray | float:
        pts = self._points(x)
        if self.rate == 0.0:
            out = np.full(pts.shape[0], float(self.sigma_b))
            if self.sigma_cap is not None:
                out = np.minimum(out, self.sigma_cap)
        else:
            out = self.sigma_b * np.exp(self.rate * (self._knn(pts) - self.m))
            if self.sigma_cap is not None:
                out = np.minimum(out, self.sigma_cap)
        return float(out[0]) if np.ndim(x) == 1 else out


def sigma_at(field: SigmaField, x) -> float:
    """Smoothing standard deviation at a single point."""
    return float(field.sigma(np.asarray(x, dtype=float).reshape(-1)))


def mean_knn_distance(field: SigmaField, x) -> float:
    return float(field.mean_knn_distance(np.asarray(x, dtype=float).reshape(-1)))


@dataclass(frozen=True)
class ElasticityReport:
    max_observed_rate: float
    violations: list[int]


def verify_semi_elasticity(field: SigmaField, x0, x1, tol: float = 1e-12) -> ElasticityReport:
    """Largest ``|log sigma(x0) - log sigma(x1)| / |x0 - x1|`` over row pairs.

    Pairs whose observed rate exceeds ``field.rate + tol`` are listed by
    index in ``violations``. Coincident pairs are skipped.
    """
    a = np.atleast_2d(np.asarray(x0, dtype=float))
    b = np.atleast_2d(np.asarray(x1, dtype=float))
    if a.shape != b.shape or a.shape[0] == 0:
        raise ValueError("need two non-empty arrays of matching shape")
    dist = np.sqrt(np.sum((a - b) ** 2, axis=1))
    diff = np.abs(field.log_sigma(a) - field.log_sigma(b))
    ok = dist > 0
    rates = np.zeros_like(dist)
    rates[ok] = diff[ok] / dist[ok]
    bad = np.flatnonzero(rates > field.rate + tol).tolist()
    return ElasticityReport(float(rates.max()), bad)


def calibrate_m(reference_points, k: int, mode: str = "min") -> float:
    """Normalising constant from leave-self-out mean kNN distances.

    ``mode="min"`` returns their minimum, ``mode="mean"`` their average.
    """
    refs = np.atleast_2d(np.asarray(reference_points, dtype=float))
    if refs.shape[0] <= k:
        raise ValueError("need more reference points than k")
    dists = knn_mean_distances(refs, refs, k, exclude=np.arange(refs.shape[0]))
    if mode == "min":
        return float(dists.min())
    if mode == "mean":
        return float(dists.mean())
    raise ValueError(f"unknown mode {mode!r}; use 'min' or 'mean'")
