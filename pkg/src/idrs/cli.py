"""Command-line front end.

Every subcommand accepts ``--config FILE`` (a JSON object keyed by option
names). Values are resolved from lowest to highest precedence: built-in
defaults, the config file, the ``IDRS_SEED``/``IDRS_JOBS`` environment
variables, explicit flags. Outputs carry a schema version and the
effective configuration.

Exit status is 0 on success, 1 on bad usage or input, 2 when a
computation ran into a numerically unstable regime.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import threshold_rows
from .certify import DEFAULT_CLAMP, RadiusSearchConfig
from .datasets import (
    ConeDatasetSpec,
    DatasetError,
    SectorDatasetSpec,
    generate_cone,
    generate_sector,
    load_dataset,
    save_dataset,
)
from .experiments import (
    ToyConfig,
    certify_dataset,
    counterexample_report,
    probe_grid,
    run_toy,
    summarize,
    truncation_rows,
    xi_curve_rows,
)
from .models import BallIndicator, KnnVote, LinearHalfSpace, TinyMlp, TrainingConfig, train_mlp
from .sigma import SigmaField, calibrate_m
from .smoothing import SmoothingConfig
from .special import UnstableRegimeError

SCHEMA_VERSION = 1

EXIT_OK, EXIT_USAGE, EXIT_UNSTABLE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments or unusable input."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    return [float(t) for t in str(text).split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "__dataclass_fields__"):
        return {k: getattr(obj, k) for k in obj.__dataclass_fields__}
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, default=_json_default, sort_keys=True)


def _snapshot(args) -> dict:
    skip = {"func", "config", "command"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _open_out(path):
    if path in (None, "-"):
        return _Stdout()
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p.open("w", newline="")


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()
        return False


def _write_csv(path, rows: list[dict], args) -> None:
    """CSV with two ``#`` comment lines: schema version and config snapshot."""
    with _open_out(path) as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        fh.write(f"# config={_dump(_snapshot(args))}\n")
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else v) for k, v in row.items()})


def _write_json(path, payload: dict, args) -> None:
    payload = {"schema_version": SCHEMA_VERSION, "config": _snapshot(args), **payload}
    with _open_out(path) as fh:
        fh.write(json.dumps(payload, default=_json_default, indent=2, sort_keys=True) + "\n")


def _smoothing(args) -> SmoothingConfig:
    return SmoothingConfig(
        n0=args.n0, n=args.n, alpha=args.alpha, mc_batch=args.mc_batch, seed=args.seed, pB_mode=args.pb_mode
    )


def _add_smoothing(p) -> None:
    g = p.add_argument_group("smoothing")
    g.add_argument("--n0", type=int, default=100, help="draws used to pick the top class")
    g.add_argument("--n", type=int, default=100_000, help="draws used to bound its probability")
    g.add_argument("--alpha", type=float, default=0.001, help="failure probability")
    g.add_argument("--mc-batch", type=int, default=10_000)
    g.add_argument("--pb-mode", choices=("complement", "estimated"), default="complement")
    g.add_argument("--num-steps", type=int, default=2000, help="radius grid resolution")


def _add_common(p) -> None:
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for per-input work")
    p.add_argument("--output", "-o", default="-", help="output path, '-' for stdout")


# subcommands


def cmd_thresholds(args) -> int:
    rows = threshold_rows(_ints(args.dims), _floats(args.pas), practical=not args.no_practical)
    _write_csv(args.output, rows, args)
    return EXIT_OK


def cmd_xi_curves(args) -> int:
    distances = np.linspace(0.0, args.a_max, args.points)
    rows = xi_curve_rows(args.sigma0, args.sigma1, args.dof, args.pa, distances)
    _write_csv(args.output, rows, args)
    return EXIT_OK


def _load_model(path, num_classes=None):
    spec = json.loads(Path(path).read_text())
    kind = spec.get("type", "mlp")
    if kind == "mlp":
        return TinyMlp.from_dict(spec)
    if kind == "linear":
        return LinearHalfSpace(np.asarray(spec["normal"], dtype=float), float(spec.get("offset", 0.0)))
    if kind == "ball":
        return BallIndicator(np.asarray(spec["center"], dtype=float), float(spec.get("radius", 1.0)))
    if kind == "knn":
        ref = load_dataset(spec["data"])
        k = int(spec.get("k", 5))
        return KnnVote(ref.points, ref.labels, k, int(spec.get("num_classes", ref.labels.max() + 1)))
    raise UsageError(f"unknown model type {kind!r} in {path}")


def cmd_certify(args) -> int:
    data = load_dataset(args.data)
    model = _load_model(args.model)
    cfg = _smoothing(args)
    search = RadiusSearchConfig(num_steps=args.num_steps, clamp=None if args.no_clamp else DEFAULT_CLAMP)
    if args.method == "constant":
        results = certify_dataset(model, data, "constant", cfg, sigma=args.sigma, jobs=args.jobs)
    else:
        refs = load_dataset(args.reference).points if args.reference else data.points
        if args.m in ("min", "mean"):
            m = calibrate_m(refs, args.k, args.m)
        else:
            m = float(args.m)
        fld = SigmaField(refs, args.sigma_b, args.rate, args.k, m, args.sigma_cap)
        results = certify_dataset(model, data, "idrs", cfg, field=fld, search=search, jobs=args.jobs)
    radii = np.linspace(0.0, max([r.radius for r in results] + [0.0]) * 1.05 + 1e-9, 101)
    summary = summarize(results, data.labels, radii)
    unstable = sum(len(r.diagnostics.get("unstable", [])) for r in results)
    with _open_out(args.output) as fh:
        fh.write(_dump({"type": "header", "schema_version": SCHEMA_VERSION, "config": _snapshot(args)}) + "\n")
        for i, (res, lab) in enumerate(zip(results, data.labels)):
            row = {"type": "result", "schema_version": SCHEMA_VERSION, "index": i, "label": int(lab)}
            row.update(res.to_dict())
            fh.write(_dump(row) + "\n")
        fh.write(_dump({"type": "summary", "schema_version": SCHEMA_VERSION, "unstable_evaluations": unstable,
                        **summary}) + "\n")
    if unstable and args.strict:
        print(f"idrs certify: {unstable} unstable evaluations", file=sys.stderr)
        return EXIT_UNSTABLE
    return EXIT_OK


def _toy_config(args) -> ToyConfig:
    return ToyConfig(
        dataset=args.dataset,
        dim=args.dim,
        n_train_per_class=args.n_train,
        n_test_per_class=args.n_test,
        sector_angle=args.sector_angle,
        radial_dof=args.radial_dof,
        radial_scale=args.radial_scale,
        cone_half_angle=args.cone_half_angle,
        density_concentration=args.density_concentration,
        sigma=args.sigma,
        sigma_b=args.sigma_b,
        rate=args.rate,
        k=args.k,
        m_mode=args.m_mode,
        cap_factor=args.cap_factor,
        train_noise=args.train_noise,
        epochs=args.epochs,
        seed=args.seed,
        smoothing=_smoothing(args),
        search=RadiusSearchConfig(num_steps=args.num_steps),
    )


def cmd_toy(args) -> int:
    cfg = _toy_config(args)
    runs = []
    for seed in range(cfg.seed, cfg.seed + args.seeds):
        out = run_toy(cfg, seed, jobs=args.jobs)
        test = out.meta["test"]
        points = [
            {"x": p.tolist(), "label": int(lab), "constant_radius": c.radius, "constant_predicted": c.predicted,
             "idrs_radius": i.radius, "idrs_predicted": i.predicted, "idrs_sigma": i.sigma0}
            for p, lab, c, i in zip(test.points, test.labels, out.constant.results, out.idrs.results)
        ]
        entry = {
            "seed": seed,
            "train_accuracy": out.meta["train_accuracy"],
            "constant": out.constant.summary,
            "idrs": out.idrs.summary,
            "comparison": out.comparison(),
            "points": points,
        }
        if cfg.dim == 2 and args.probe_size > 0:
            lim = float(np.abs(test.points).max()) * 1.05
            bounds = ((-lim, lim), (-lim, lim))
            entry["probe_grid"] = {
                "constant": probe_grid(out.meta["model"], None, cfg.sigma, bounds, args.probe_size, seed=seed),
                "idrs": probe_grid(out.meta["model"], out.meta["field"], None, bounds, args.probe_size, seed=seed),
            }
        runs.append(entry)
    _write_json(args.output, {"runs": runs}, args)
    return EXIT_OK


def cmd_counterexample(args) -> int:
    report = counterexample_report(
        x0=tuple(_floats(args.x0)),
        ball_radius=args.ball_radius,
        sigma_min=args.sigma_min,
        sigma_max=args.sigma_max,
        rates=tuple(_floats(args.rates)),
        n=args.n,
        alpha=args.alpha,
        probes=args.probes,
    )
    _write_json(args.output, {"report": report}, args)
    return EXIT_OK


def cmd_truncation(args) -> int:
    distances = np.linspace(0.0, args.max_distance, args.points)
    _write_csv(args.output, truncation_rows(args.sigma, args.n, args.alpha, distances), args)
    return EXIT_OK


def cmd_train_toy(args) -> int:
    data = load_dataset(args.data)
    cfg = TrainingConfig(
        hidden=tuple(_ints(args.hidden)),
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        lr_decay=args.lr_decay,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    net = train_mlp(data.points, data.labels, cfg)
    acc = float(np.mean(net.predict(data.points) == data.labels))
    payload = {"type": "mlp", "train_accuracy": acc, **net.to_dict()}
    _write_json(args.output, payload, args)
    return EXIT_OK


def cmd_generate_data(args) -> int:
    if args.kind == "sector":
        data = generate_sector(
            SectorDatasetSpec(args.n_per_class, args.sector_angle, args.radial_dof, args.radial_scale, args.seed)
        )
    else:
        data = generate_cone(
            ConeDatasetSpec(args.dim, args.n_per_class, args.cone_half_angle, args.density_concentration,
                            args.radial_scale, args.seed)
        )
    if args.output in (None, "-"):
        raise UsageError("generate-data needs --output FILE")
    save_dataset(args.output, data)
    return EXIT_OK


def build_parser() -> tuple[_Parser, dict]:
    parser = _Parser(prog="idrs", description="Certified radii for input-dependent Gaussian smoothing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}

    p = sub.add_parser("thresholds", help="largest admissible sigma ratio per dimension")
    _add_common(p)
    p.add_argument("--dims", default="784,3072,196608")
    p.add_argument("--pas", default="0.9,0.99,0.999,0.99993")
    p.add_argument("--no-practical", action="store_true", help="skip the practical column")
    p.set_defaults(func=cmd_thresholds)
    subs["thresholds"] = p

    p = sub.add_parser("xi-curves", help="worst-case class-B mass against distance")
    _add_common(p)
    p.add_argument("--sigma0", type=float, default=1.0)
    p.add_argument("--sigma1", type=float, default=0.9)
    p.add_argument("--dof", type=int, default=2)
    p.add_argument("--pa", type=float, default=0.99)
    p.add_argument("--a-max", type=float, default=3.0)
    p.add_argument("--points", type=int, default=61)
    p.set_defaults(func=cmd_xi_curves)
    subs["xi-curves"] = p

    p = sub.add_parser("certify", help="certify every row of a dataset")
    _add_common(p)
    _add_smoothing(p)
    p.add_argument("--data", required=True, help="CSV dataset to certify")
    p.add_argument("--model", required=True, help="JSON model description")
    p.add_argument("--method", choices=("idrs", "constant"), default="idrs")
    p.add_argument("--sigma", type=float, default=0.5, help="scale for --method constant")
    p.add_argument("--reference", help="CSV of reference points for the field (default: --data)")
    p.add_argument("--sigma-b", type=float, default=0.5)
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--m", default="min", help="number, or 'min'/'mean' to calibrate")
    p.add_argument("--sigma-cap", type=float, default=None)
    p.add_argument("--no-clamp", action="store_true", help="check the raw envelope scales without clamping")
    p.add_argument("--strict", action="store_true", help="exit 2 if any evaluation was unstable")
    p.set_defaults(func=cmd_certify)
    subs["certify"] = p

    p = sub.add_parser("toy", help="constant versus input-dependent smoothing on synthetic data")
    _add_common(p)
    _add_smoothing(p)
    d = ToyConfig()
    p.add_argument("--dataset", choices=("sector", "cone"), default=d.dataset)
    p.add_argument("--dim", type=int, default=d.dim)
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    p.add_argument("--n-train", type=int, default=d.n_train_per_class)
    p.add_argument("--n-test", type=int, default=d.n_test_per_class)
    p.add_argument("--sector-angle", type=float, default=d.sector_angle)
    p.add_argument("--radial-dof", type=int, default=d.radial_dof)
    p.add_argument("--radial-scale", type=float, default=d.radial_scale)
    p.add_argument("--cone-half-angle", type=float, default=d.cone_half_angle)
    p.add_argument("--density-concentration", type=float, default=d.density_concentration)
    p.add_argument("--sigma", type=float, default=d.sigma)
    p.add_argument("--sigma-b", type=float, default=d.sigma_b)
    p.add_argument("--rate", type=float, default=d.rate)
    p.add_argument("--k", type=int, default=d.k)
    p.add_argument("--m-mode", choices=("min", "mean"), default=d.m_mode)
    p.add_argument("--cap-factor", type=float, default=d.cap_factor)
    p.add_argument("--train-noise", type=float, default=d.train_noise)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--probe-size", type=int, default=0, help="probe grid side length (2D only)")
    p.set_defaults(func=cmd_toy, num_steps=d.search.num_steps)
    subs["toy"] = p

    p = sub.add_parser("counterexample", help="per-point sigma optimisation against a ball classifier")
    _add_common(p)
    p.add_argument("--x0", default="50,0")
    p.add_argument("--ball-radius", type=float, default=1.0)
    p.add_argument("--sigma-min", type=float, default=0.25)
    p.add_argument("--sigma-max", type=float, default=100.0)
    p.add_argument("--rates", default="0.02,0.05,0.1,0.2")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--probes", type=int, default=1000)
    p.set_defaults(func=cmd_counterexample)
    subs["counterexample"] = p

    p = sub.add_parser("truncation", help="certified radius next to a linear boundary")
    _add_common(p)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--max-distance", type=float, default=8.0)
    p.add_argument("--points", type=int, default=161)
    p.set_defaults(func=cmd_truncation)
    subs["truncation"] = p

    p = sub.add_parser("train-toy", help="train the small ReLU network on a CSV dataset")
    _add_common(p)
    t = TrainingConfig()
    p.add_argument("--data", required=True)
    p.add_argument("--hidden", default=",".join(map(str, t.hidden)))
    p.add_argument("--epochs", type=int, default=t.epochs)
    p.add_argument("--batch-size", type=int, default=t.batch_size)
    p.add_argument("--learning-rate", type=float, default=t.learning_rate)
    p.add_argument("--lr-decay", type=float, default=t.lr_decay)
    p.add_argument("--noise-sigma", type=float, default=t.noise_sigma)
    p.set_defaults(func=cmd_train_toy)
    subs["train-toy"] = p

    p = sub.add_parser("generate-data", help="write a synthetic dataset to CSV")
    _add_common(p)
    p.add_argument("kind", choices=("sector", "cone"))
    s, c = SectorDatasetSpec(), ConeDatasetSpec()
    p.add_argument("--n-per-class", type=int, default=s.n_per_class)
    p.add_argument("--sector-angle", type=float, default=s.sector_angle)
    p.add_argument("--radial-dof", type=int, default=s.radial_dof)
    p.add_argument("--radial-scale", type=float, default=s.radial_scale)
    p.add_argument("--dim", type=int, default=c.dim)
    p.add_argument("--cone-half-angle", type=float, default=c.cone_half_angle)
    p.add_argument("--density-concentration", type=float, default=c.density_concentration)
    p.set_defaults(func=cmd_generate_data)
    subs["generate-data"] = p
    return parser, subs


def _apply_overrides(argv, parser, subs):
    args = parser.parse_args(argv)
    sp = subs[args.command]
    known = {a.dest for a in sp._actions}
    defaults = {}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        for key, val in loaded.items():
            dest = key.replace("-", "_")
            if dest not in known or dest in ("config", "help"):
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            defaults[dest] = val
    for env, dest in (("IDRS_SEED", "seed"), ("IDRS_JOBS", "jobs")):
        if env in os.environ and dest in known:
            try:
                defaults[dest] = int(os.environ[env])
            except ValueError:
                raise UsageError(f"{env} must be an integer") from None
    if defaults:
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    parser, subs = build_parser()
    try:
        args = _apply_overrides(argv, parser, subs)
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except UnstableRegimeError as exc:
        print(f"idrs: numerically unstable regime: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (DatasetError, ValueError, OSError, KeyError) as exc:
        print(f"idrs: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
