"""Synthetic labelled point sets and a small CSV format for them.

Two generators are provided. The planar sector set has two complementary
angular sectors, one of them very narrow. The cone set places one class in
a narrow cone around the first axis and draws the other class from a
spherically symmetric law with the cone carved out. In both sets label 1
is the narrow class and label 0 the rest.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import betainc, betaincinv

__all__ = [
    "DatasetError",
    "LabeledPoints",
    "SectorDatasetSpec",
    "ConeDatasetSpec",
    "generate_sector",
    "generate_cone",
    "in_sector",
    "in_cone",
    "load_dataset",
    "save_dataset",
]


class DatasetError(ValueError):
    """Malformed or empty dataset file."""


@dataclass
class LabeledPoints:
    points: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.points.shape[0] != self.labels.size:
            raise ValueError("points and labels differ in length")

    def __len__(self) -> int:
        return self.labels.size

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, idx) -> LabeledPoints:
        return LabeledPoints(self.points[idx], self.labels[idx], dict(self.meta))


@dataclass(frozen=True)
class SectorDatasetSpec:
    """Planar two-sector set.

    Angles are uniform within each class's sector. The distance from the
    origin is ``radial_scale * sqrt(X)`` with ``X ~ chi2(radial_dof)``.
    The narrow sector is ``[0, sector_angle)``.
    """

    n_per_class: int = 500
    sector_angle: float = 0.25
    radial_dof: int = 4
    radial_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_per_class < 1 or self.radial_dof < 1 or self.radial_scale <= 0:
            raise ValueError("n_per_class, radial_dof and radial_scale must be positive")
        if not 0.0 < self.sector_angle < 2.0 * math.pi:
            raise ValueError("sector_angle must lie in (0, 2 pi)")


@dataclass(frozen=True)
class ConeDatasetSpec:
    """Narrow cone around ``e_1`` versus a radially symmetric background.

    Distances from the vertex are ``radial_scale * sqrt(dim) * G`` with
    ``G ~ Gamma(1/c, c)``, ``c = density_concentration``. ``G`` has mean 1
    and variance ``c``, so larger ``c`` piles more points near the vertex
    and leaves a longer tail of isolated points.
    """

    dim: int = 2
    n_per_class: int = 500
    cone_half_angle: float = math.pi / 6
    density_concentration: float = 1.0
    radial_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be at least 2")
        if self.n_per_class < 1 or self.density_concentration <= 0 or self.radial_scale <= 0:
            raise ValueError("n_per_class, density_concentration and radial_scale must be positive")
        if not 0.0 < self.cone_half_angle < math.pi / 2:
            raise ValueError("cone_half_angle must lie in (0, pi/2)")


def in_sector(points, sector_angle: float) -> np.ndarray:
    """Whether the polar angle in ``[0, 2 pi)`` falls below ``sector_angle``."""
    pts = np.atleast_2d(points)
    ang = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * math.pi)
    return ang < sector_angle


def in_cone(points, half_angle: float) -> np.ndarray:
    """Whether the angle to ``e_1`` is at most ``half_angle``. The vertex counts."""
    pts = np.atleast_2d(points)
    norms = np.sqrt(np.einsum("ij,ij->i", pts, pts))
    return pts[:, 0] >= norms * math.cos(half_angle)


def generate_sector(spec: SectorDatasetSpec) -> LabeledPoints:
    rng = np.random.default_rng(spec.seed)
    n = spec.n_per_class
    theta1 = rng.uniform(0.0, spec.sector_angle, n)
    theta0 = rng.uniform(spec.sector_angle, 2.0 * math.pi, n)
    rho = spec.radial_scale * np.sqrt(rng.chisquare(spec.radial_dof, 2 * n))
    theta = np.concatenate([theta0, theta1])
    pts = np.column_stack([rho * np.cos(theta), rho * np.sin(theta)])
    # cos/sin rounding can push a point across a sector edge
    labels = in_sector(pts, spec.sector_angle).astype(np.int64)
    return LabeledPoints(pts, labels, {"generator": "sector"})


def _radii(spec: ConeDatasetSpec, rng, size: int) -> np.ndarray:
    c = spec.density_concentration
    return spec.radial_scale * math.sqrt(spec.dim) * rng.gamma(1.0 / c, c, size)


def _cap_directions(dim: int, half_angle: float, rng, size: int) -> np.ndarray:
    # sin^2 of the angle to e_1 is Beta((dim-1)/2, 1/2) on the sphere;
    # truncate it to the cap by inverting the regularised incomplete beta
    a, b = 0.5 * (dim - 1), 0.5
    top = betainc(a, b, math.sin(half_angle) ** 2)
    s2 = betaincinv(a, b, rng.uniform(0.0, 1.0, size) * top)
    cos_phi = np.sqrt(1.0 - s2)
    sin_phi = np.sqrt(s2)
    ortho = rng.standard_normal((size, dim - 1))
    ortho /= np.linalg.norm(ortho, axis=1, keepdims=True)
    out = np.empty((size, dim))
    out[:, 0] = cos_phi
    out[:, 1:] = sin_phi[:, None] * ortho
    return out


def generate_cone(spec: ConeDatasetSpec) -> LabeledPoints:
    """Cone class by exact cap sampling, background class by rejection.

    ``meta["rejection_rate"]`` is the fraction of background proposals that
    landed in the cone and were discarded.
    """
    rng = np.random.default_rng(spec.seed)
    n, d = spec.n_per_class, spec.dim
    dirs = _cap_directions(d, spec.cone_half_angle, rng, n)
    # rounding can leave a cap draw just outside the edge; redraw those
    cone = dirs * _radii(spec, rng, n)[:, None]
    ok = in_cone(cone, spec.cone_half_angle)
    cone = cone[ok]
    while cone.shape[0] < n:
        extra = _cap_directions(d, spec.cone_half_angle, rng, n) * _radii(spec, rng, n)[:, None]
        cone = np.vstack([cone, extra[in_cone(extra, spec.cone_half_angle)]])
    cone = cone[:n]

    kept, proposed, count = [], 0, 0
    while count < n:
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        prop = g * _radii(spec, rng, n)[:, None]
        proposed += n
        good = prop[~in_cone(prop, spec.cone_half_angle)]
        kept.append(good)
        count += good.shape[0]
    rest = np.vstack(kept)[:n]
    rejected = proposed - count
    pts = np.vstack([rest, cone])
    labels = np.repeat(np.array([0, 1]), n)
    meta = {"generator": "cone", "rejection_rate": rejected / proposed}
    return LabeledPoints(pts, labels, meta)


def save_dataset(path, data: LabeledPoints) -> None:
    """Write ``x_1, ..., x_N, label`` rows with 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(data.dim)] + ["label"])
        for row, lab in zip(data.points, data.labels):
            w.writerow([f"{v:.17g}" for v in row] + [int(lab)])


def load_dataset(path) -> LabeledPoints:
    """Read a file written by :func:`save_dataset`.

    A header row is optional. Raises :class:`DatasetError` naming the line
    of the first malformed row, or when there are no data rows.
    """
    path = Path(path)
    rows, labels = [], []
    width = None
    with path.open(newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if lineno == 1 and rec[-1].strip() == "label":
                continue
            try:
                vals = [float(c) for c in rec[:-1]]
                lab_f = float(rec[-1])
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: cannot parse row ({exc})") from None
            if not vals or lab_f != int(lab_f) or lab_f < 0:
                raise DatasetError(f"{path}:{lineno}: need coordinates and a non-negative integer label")
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DatasetError(f"{path}:{lineno}: expected {width} coordinates, got {len(vals)}")
            rows.append(vals)
            labels.append(int(lab_f))
    if not rows:
        raise DatasetError(f"{path}: dataset is empty")
    return LabeledPoints(np.array(rows), np.array(labels), {"source": str(path)})
