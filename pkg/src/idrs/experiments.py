"""Certification pipelines over datasets and the summary statistics they feed.

Each input is certified independently, keyed by its index in the dataset,
so results do not depend on how the work is split across processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .certify import RadiusSearchConfig, certify_point, idrs_certified_radius
from .datasets import (
    ConeDatasetSpec,
    LabeledPoints,
    SectorDatasetSpec,
    generate_cone,
    generate_sector,
)
from .models import TrainingConfig, train_mlp
from .sigma import SigmaField, calibrate_m, sigma_at
from .smoothing import (
    ABSTAIN,
    CertificationResult,
    SmoothingConfig,
    certify_constant,
    cohen_radius,
    linear_truncation_curve,
    noise_generator,
    theoretical_ceiling,
    undercertification_ratio,
)
from .special import clopper_pearson_lower
from .worst_case import AdversaryPair, smoothed_ball_indicator_exact, xi, xi_halfspace

__all__ = [
    "ExperimentRun",
    "certified_accuracy_curve",
    "summarize",
    "certify_dataset",
    "ToyConfig",
    "ToyOutcome",
    "run_toy",
    "sector_data",
    "cone_data",
    "probe_grid",
    "xi_curve_rows",
    "truncation_rows",
    "counterexample_report",
    "CONE_SETUPS",
    "cone_config",
]


def certified_accuracy_curve(results, labels, radii) -> np.ndarray:
    """Fraction of inputs predicted correctly with radius at least ``r``."""
    labels = np.asarray(labels)
    pred = np.array([r.predicted for r in results])
    rad = np.array([r.radius for r in results])
    ok = pred == labels
    return np.array([float(np.mean(ok & (rad >= r))) for r in radii])


def summarize(results, labels, radii) -> dict:
    """Clean accuracy, abstention and error rates, class spread and curve.

    Clean accuracy, abstention and misclassification partition the inputs,
    so the three rates sum to one.
    """
    labels = np.asarray(labels)
    n = labels.size
    if n == 0:
        raise ValueError("no results to summarize")
    pred = np.array([r.predicted for r in results])
    correct = int(np.sum(pred == labels))
    abstain = int(np.sum(pred == ABSTAIN))
    wrong = n - correct - abstain
    per_class = [float(np.mean(pred[labels == c] == c)) for c in np.unique(labels)]
    return {
        "n": n,
        "clean_accuracy": correct / n,
        "abstention_rate": abstain / n,
        "misclassification_rate": wrong / n,
        "classwise_accuracy": per_class,
        "classwise_accuracy_std": float(np.std(per_class)),
        "mean_sigma": float(np.mean([r.sigma0 for r in results])),
        "radii": [float(r) for r in radii],
        "certified_accuracy": certified_accuracy_curve(results, labels, radii).tolist(),
    }


@dataclass
class ExperimentRun:
    """Configuration, per-input results and their summary."""

    config: dict
    results: list[CertificationResult]
    labels: np.ndarray
    radii: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 5.0, 101))

    @property
    def summary(self) -> dict:
        return summarize(self.results, self.labels, self.radii)

    def records(self):
        for i, (res, lab) in enumerate(zip(self.results, self.labels)):
            row = res.to_dict()
            row.update(index=i, label=int(lab), correct=bool(res.predicted == lab))
            yield row


def _certify_one(args):
    model, x, i, method, sigma, fld, cfg, search = args
    if method == "constant":
        return certify_constant(model, sigma, x, cfg, i)
    return certify_point(model, fld, x, cfg, search, i)


def certify_dataset(
    model,
    data: LabeledPoints,
    method: str,
    cfg: SmoothingConfig,
    *,
    sigma: float | None = None,
    field: SigmaField | None = None,
    search: RadiusSearchConfig = RadiusSearchConfig(),
    jobs: int = 1,
    offset: int = 0,
) -> list[CertificationResult]:
    """Certify every row of ``data`` with ``"constant"`` or ``"idrs"`` smoothing.

    Input ``i`` uses noise streams keyed by ``offset + i`` whatever ``jobs`` is.
    """
    if len(data) == 0:
        raise ValueError("dataset is empty")
    if method == "constant" and sigma is None:
        raise ValueError("constant smoothing needs sigma")
    if method == "idrs" and field is None:
        raise ValueError("idrs smoothing needs a sigma field")
    if method not in ("constant", "idrs"):
        raise ValueError(f"unknown method {method!r}")
    tasks = [
        (model, x, offset + i, method, sigma, field, cfg, search) for i, x in enumerate(data.points)
    ]
    if jobs <= 1:
        return [_certify_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_certify_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


@dataclass(frozen=True)
class ToyConfig:
    """Constant versus input-dependent smoothing on one synthetic problem.

    ``dataset`` is ``"sector"`` (2D) or ``"cone"``. The field uses ``k``
    neighbours among the training points, ``m`` from ``m_mode`` and an
    optional cap of ``cap_factor * sigma_b``.
    """

    dataset: str = "sector"
    dim: int = 2
    n_train_per_class: int = 500
    n_test_per_class: int = 100
    sector_angle: float = 0.1
    radial_dof: int = 4
    radial_scale: float = 4.0
    cone_half_angle: float = math.pi / 6
    density_concentration: float = 1.0
    sigma: float = 0.5
    sigma_b: float = 0.4
    rate: float = 0.2
    k: int = 20
    m_mode: str = "min"
    cap_factor: float | None = None
    train_noise: float = 0.0
    epochs: int = 200
    seed: int = 0
    smoothing: SmoothingConfig = SmoothingConfig()
    search: RadiusSearchConfig = RadiusSearchConfig(num_steps=400)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["search"] = {"num_steps": self.search.num_steps, "max_radius_factor": self.search.max_radius_factor}
        return d


def sector_data(cfg: ToyConfig, seed: int) -> tuple[LabeledPoints, LabeledPoints]:
    common = dict(sector_angle=cfg.sector_angle, radial_dof=cfg.radial_dof, radial_scale=cfg.radial_scale)
    train = generate_sector(SectorDatasetSpec(cfg.n_train_per_class, seed=2 * seed, **common))
    test = generate_sector(SectorDatasetSpec(cfg.n_test_per_class, seed=2 * seed + 1, **common))
    return train, test


def cone_data(cfg: ToyConfig, seed: int) -> tuple[LabeledPoints, LabeledPoints]:
    common = dict(
        dim=cfg.dim,
        cone_half_angle=cfg.cone_half_angle,
        density_concentration=cfg.density_concentration,
        radial_scale=cfg.radial_scale,
    )
    train = generate_cone(ConeDatasetSpec(n_per_class=cfg.n_train_per_class, seed=2 * seed, **common))
    test = generate_cone(ConeDatasetSpec(n_per_class=cfg.n_test_per_class, seed=2 * seed + 1, **common))
    return train, test


# dimension -> (constant sigma, sigma_b, rate)
CONE_SETUPS = {
    2: (0.5, 0.4, 0.2),
    6: (0.5, 0.4, 0.1),
    18: (1.0, 0.8, 0.05),
    60: (1.0, 0.8, 0.03),
    180: (2.0, 1.9, 0.01),
    400: (2.0, 1.95, 0.005),
}


def cone_config(dim: int, **overrides) -> ToyConfig:
    """Cone-set comparison with the per-dimension scales of ``CONE_SETUPS``.

    The field is capped at five times ``sigma_b``.
    """
    sigma, sigma_b, rate = CONE_SETUPS[dim]
    base = dict(
        dataset="cone", dim=dim, radial_scale=2.0, sigma=sigma, sigma_b=sigma_b, rate=rate,
        cap_factor=5.0, search=RadiusSearchConfig(num_steps=200),
    )
    base.update(overrides)
    return ToyConfig(**base)


def build_field(cfg: ToyConfig, train: LabeledPoints) -> SigmaField:
    m = calibrate_m(train.points, cfg.k, cfg.m_mode)
    cap = None if cfg.cap_factor is None else cfg.cap_factor * cfg.sigma_b
    return SigmaField(train.points, cfg.sigma_b, cfg.rate, cfg.k, m, cap)


@dataclass
class ToyOutcome:
    config: dict
    constant: ExperimentRun
    idrs: ExperimentRun
    meta: dict = field(default_factory=dict)

    def comparison(self) -> dict:
        c, i = self.constant.summary, self.idrs.summary
        return {
            "constant_clean_accuracy": c["clean_accuracy"],
            "idrs_clean_accuracy": i["clean_accuracy"],
            "constant_mean_sigma": c["mean_sigma"],
            "idrs_mean_sigma": i["mean_sigma"],
            "constant_max_radius": max(r.radius for r in self.constant.results),
            "idrs_max_radius": max(r.radius for r in self.idrs.results),
        }


def run_toy(cfg: ToyConfig, seed: int | None = None, jobs: int = 1, radii=None) -> ToyOutcome:
    """Train a small network and certify the test split both ways."""
    seed = cfg.seed if seed is None else seed
    train, test = (sector_data if cfg.dataset == "sector" else cone_data)(cfg, seed)
    tcfg = TrainingConfig(epochs=cfg.epochs, noise_sigma=cfg.train_noise, seed=seed)
    model = train_mlp(train.points, train.labels, tcfg, num_classes=2)
    fld = build_field(cfg, train)
    smooth = replace(cfg.smoothing, seed=seed)
    const = certify_dataset(model, test, "constant", smooth, sigma=cfg.sigma, jobs=jobs)
    idrs = certify_dataset(model, test, "idrs", smooth, field=fld, search=cfg.search, jobs=jobs)
    if radii is None:
        top = max(r.radius for r in const + idrs)
        radii = np.linspace(0.0, top * 1.05 + 1e-9, 101)
    snapshot = cfg.to_dict() | {"seed": seed, "m": fld.m}
    return ToyOutcome(
        snapshot,
        ExperimentRun(snapshot | {"method": "constant"}, const, test.labels, np.asarray(radii)),
        ExperimentRun(snapshot | {"method": "idrs"}, idrs, test.labels, np.asarray(radii)),
        {"train_accuracy": float(np.mean(model.predict(train.points) == train.labels)), "model": model,
         "field": fld, "test": test},
    )


def probe_grid(model, fld: SigmaField | None, sigma: float | None, bounds, size: int = 41,
               num: int = 1000, seed: int = 0) -> list[dict]:
    """Majority-vote smoothed labels on a regular planar grid.

    Rows hold ``x``, ``y``, ``sigma`` and ``label``. Uses ``num`` draws per
    grid point, keyed by the grid index.
    """
    (x_lo, x_hi), (y_lo, y_hi) = bounds
    rows = []
    idx = 0
    for y in np.linspace(y_lo, y_hi, size):
        for x in np.linspace(x_lo, x_hi, size):
            pt = np.array([x, y])
            s = sigma if fld is None else sigma_at(fld, pt)
            rng = noise_generator(seed, idx, 3, 0)
            votes = np.bincount(model.predict(pt + s * rng.standard_normal((num, 2))), minlength=2)
            rows.append({"x": float(x), "y": float(y), "sigma": float(s), "label": int(np.argmax(votes))})
            idx += 1
    return rows


def xi_curve_rows(sigma0: float, sigma1: float, dof: int, pA: float, distances) -> list[dict]:
    """Worst-case class-B mass against adversary distance, with the half-space baseline.

    The baseline is what an adversary with ``sigma1 = sigma0`` could reach.
    """
    rows = []
    for a in distances:
        pair = AdversaryPair(sigma0, sigma1, float(a), dof, pA)
        rows.append({
            "a": float(a),
            "xi": xi(pair),
            "halfspace": xi_halfspace(AdversaryPair(sigma0, sigma0, float(a), dof, pA)),
        })
    return rows


def truncation_rows(sigma: float, n: int, alpha: float, distances) -> list[dict]:
    """Certified radius and under-certification ratio next to a linear boundary."""
    cfg = SmoothingConfig(n=n, alpha=alpha)
    ceiling = theoretical_ceiling(sigma, n, alpha)
    rows = []
    for d, radius in linear_truncation_curve(sigma, distances, cfg):
        pa = float(0.5 * math.erfc(-d / sigma / math.sqrt(2.0)))
        ratio = undercertification_ratio(pa, n, alpha) if 0.5 < pa < 1.0 else float("nan")
        rows.append({"distance": d, "radius": radius, "pA": pa, "ratio": ratio, "ceiling": ceiling})
    return rows


def _naive_radius(x0, sigma: float, ball_radius: float, cap: float) -> tuple[int, float]:
    """Label and constant-scale radius at one fixed sigma, using exact probabilities."""
    p_in = smoothed_ball_indicator_exact(x0, sigma, np.zeros_like(x0), ball_radius)
    label = int(p_in > 0.5)
    pa = min(max(p_in, 1.0 - p_in), cap)
    return label, cohen_radius(pa, 1.0 - pa, sigma)


def _naive_certificate(x0, sigmas, ball_radius: float, cap: float) -> tuple[int, float, float]:
    # greedy ascent along the sigma grid, as a per-point optimiser would do
    label, best = _naive_radius(x0, sigmas[0], ball_radius, cap)
    best_sigma = sigmas[0]
    for s in sigmas[1:]:
        lab, r = _naive_radius(x0, s, ball_radius, cap)
        if lab != label or r < best:
            break
        best, best_sigma = r, s
    return label, best, best_sigma


def counterexample_report(
    x0=(50.0, 0.0),
    ball_radius: float = 1.0,
    sigma_min: float = 0.25,
    sigma_max: float = 100.0,
    rates=(0.02, 0.05, 0.1, 0.2),
    n: int = 100_000,
    alpha: float = 0.001,
    probes: int = 1000,
) -> dict:
    """Per-point sigma optimisation against the semi-elastic certificate.

    The base classifier is the indicator of a ball around the origin. Both
    certificates use exact smoothed probabilities, with ``pA`` capped at
    the best value ``n`` Monte-Carlo draws could support. Probes lie on the
    segment from ``x0`` towards the origin, inside the claimed radius. A
    probe whose exact smoothed label (under its own sigma) differs from the
    label at ``x0`` is a violation.
    """
    x0 = np.asarray(x0, dtype=float)
    cap = clopper_pearson_lower(n, n, 1.0 - alpha)
    sigmas = np.geomspace(sigma_min, sigma_max, 400)
    unit = -x0 / np.linalg.norm(x0) if np.any(x0) else np.eye(x0.size)[0]

    label, radius, sig = _naive_certificate(x0, sigmas, ball_radius, cap)
    naive_bad = []
    ts = np.linspace(0.0, radius, probes, endpoint=False)[1:]
    centre = float(np.linalg.norm(x0))
    if 0.0 < centre < radius:
        # the ball centre itself is the natural witness
        ts = np.sort(np.append(ts, centre))
    for t in ts:
        p = x0 + t * unit
        # the ascent never changes the label it starts from
        lab, _ = _naive_radius(p, sigmas[0], ball_radius, cap)
        if lab != label:
            naive_bad.append(float(t))
    report = {
        "x0": x0.tolist(),
        "ball_radius": ball_radius,
        "pA_cap": cap,
        "naive": {
            "label": label,
            "sigma": float(sig),
            "radius": float(radius),
            "violations": len(naive_bad),
            "first_violation_distance": naive_bad[0] if naive_bad else None,
            "valid": not naive_bad,
        },
        "semi_elastic": [],
    }
    search = RadiusSearchConfig(num_steps=2000)
    for rate in rates:
        fld = SigmaField(np.zeros((1, x0.size)), sigma_min, rate, 1, 0.0)
        s0 = sigma_at(fld, x0)
        p_in = smoothed_ball_indicator_exact(x0, s0, np.zeros_like(x0), ball_radius)
        lab0 = int(p_in > 0.5)
        pa = min(max(p_in, 1.0 - p_in), cap)
        res = idrs_certified_radius(s0, rate, x0.size, pa, None, search) if pa > 0.5 else None
        r = 0.0 if res is None else res.radius
        bad = []
        for t in np.linspace(0.0, r, probes)[1:]:
            p = x0 + t * unit
            q = smoothed_ball_indicator_exact(p, sigma_at(fld, p), np.zeros_like(x0), ball_radius)
            if int(q > 0.5) != lab0:
                bad.append(float(t))
        report["semi_elastic"].append({
            "rate": rate,
            "sigma0": s0,
            "label": lab0,
            "radius": r,
            "violations": len(bad),
            "valid": not bad,
        })
    return report
