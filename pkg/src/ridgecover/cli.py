"""Command-line front end: gen | ridge | select | compare.

Each subcommand reads/writes plot-ready CSV files plus one JSON metadata
file echoing the fully resolved configuration, so a run can be
reproduced exactly from its outputs.  Diagnostics go to stderr; the exit
code is 0 iff the outputs were written.

Options may also be supplied through a ``key=value`` config file via
``--config``; explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .coverage import Manifold, coverage_cdf, hausdorff, loss_pair
from .datasets import KINDS, SyntheticSpec, generate, load_csv
from .kde import PointCloud, normal_reference_bandwidth
from .risk import select_bandwidth
from .scms import RidgeSet, ScmsConfig, extract_ridge

try:
    _VERSION = version("ridgecover")
except PackageNotFoundError:  # running from a source tree
    _VERSION = "0.1.0"


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _parse_span(text: str, what: str):
    """Parse 'min:max:count[:geom|lin]' into a numpy grid."""
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise ValueError(f"{what} must look like min:max:count[:geom|lin], got {text!r}")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    scale = parts[3] if len(parts) == 4 else "geom"
    if count < 1:
        raise ValueError(f"{what}: count must be >= 1")
    if hi < lo:
        raise ValueError(f"{what}: max must be >= min")
    if scale == "geom":
        if lo <= 0.0:
            raise ValueError(f"{what}: geometric spacing needs min > 0")
        return np.geomspace(lo, hi, count)
    if scale == "lin":
        return np.linspace(lo, hi, count)
    raise ValueError(f"{what}: spacing must be 'geom' or 'lin', got {scale!r}")


def _parse_mesh(text: str):
    if text == "data":
        return "data", None
    if text.startswith("grid:"):
        return "grid", float(text.split(":", 1)[1])
    raise ValueError(f"--mesh must be 'data' or 'grid:<res>', got {text!r}")


def _parse_columns(text: str | None):
    if text is None:
        return None
    cols = [c.strip() for c in text.split(",") if c.strip()]
    if not cols:
        raise ValueError("--columns must name at least one column")
    return cols


def _parse_params(items):
    params = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"--param expects name=value, got {item!r}")
        key, val = item.split("=", 1)
        params[key.strip()] = float(val)
    return params or None


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, val = line.split("=", 1)
        cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


_TRUE = {"1", "true", "yes", "on"}


def _resolve(args: argparse.Namespace, file_cfg: dict, defaults: dict) -> dict:
    """Merge flag values, config-file values and defaults (flags win)."""
    out = {}
    for key, default in defaults.items():
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            out[key] = cli_val
        elif key in file_cfg:
            raw = file_cfg[key]
            if isinstance(default, bool):
                out[key] = raw.lower() in _TRUE
            elif isinstance(default, int) and not isinstance(default, bool):
                out[key] = int(raw)
            elif isinstance(default, float):
                out[key] = float(raw)
            else:
                out[key] = raw
        else:
            out[key] = default
    return out


def _scms_config(opts: dict) -> ScmsConfig:
    mesh, res = _parse_mesh(opts["mesh"])
    return ScmsConfig(
        max_iterations=opts["max_iters"],
        tolerance=opts["tolerance"],
        mesh=mesh,
        grid_resolution=res,
        density_threshold_fraction=opts["threshold_frac"],
    )


def _write_json(path: Path, payload: dict) -> None:
    payload = dict(payload)
    payload["version"] = _VERSION
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_cloud(path: str, columns) -> PointCloud:
    return load_csv(path, columns=_parse_columns(columns))


def _add_scms_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tolerance", type=float, help="SCMS stop tolerance (default 1e-6*h)")
    p.add_argument("--max-iters", dest="max_iters", type=int, help="SCMS iteration cap")
    p.add_argument("--mesh", help="SCMS mesh: data | grid:<res>")
    p.add_argument("--threshold-frac", dest="threshold_frac", type=float,
                   help="density filter as a fraction of the peak")


_SCMS_DEFAULTS = {
    "tolerance": None,
    "max_iters": 500,
    "mesh": "data",
    "threshold_frac": 0.05,
}


def cmd_gen(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    defaults = {"kind": None, "n": 1000, "noise_sigma": None, "seed": 0,
                "output_dir": "."}
    opts = _resolve(args, file_cfg, defaults)
    if opts["kind"] is None:
        raise ValueError(f"gen requires --kind; valid kinds: {', '.join(KINDS)}")
    spec = SyntheticSpec(
        kind=opts["kind"],
        n=opts["n"],
        noise_sigma=opts["noise_sigma"],
        params=_parse_params(args.param),
        seed=opts["seed"],
    )
    cloud, truth = generate(spec)
    out = Path(opts["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    cloud.save_csv(out / "sample.csv")
    PointCloud(truth.points).save_csv(out / "truth.csv")
    _write_json(out / "gen.json", {"command": "gen", "spec": spec.to_dict()})
    _log(f"wrote {out / 'sample.csv'} ({cloud.n} rows), "
         f"{out / 'truth.csv'} ({truth.m} rows)")
    return 0


def cmd_ridge(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    defaults = {"input": None, "h": None, "columns": None, "output_dir": ".",
                **_SCMS_DEFAULTS}
    opts = _resolve(args, file_cfg, defaults)
    if opts["input"] is None:
        raise ValueError("ridge requires --input")
    if opts["h"] is None or opts["h"] <= 0.0:
        raise ValueError("ridge requires a positive --h")
    cloud = _load_cloud(opts["input"], opts["columns"])
    cfg = _scms_config(opts)
    ridge = extract_ridge(cloud, opts["h"], cfg)
    out = Path(opts["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    ridge.save_csv(out / "ridge.csv", d=cloud.d)
    _write_json(out / "ridge.json", {
        "command": "ridge",
        "input": str(opts["input"]),
        "h": opts["h"],
        **ridge.metadata(cfg),
    })
    if len(ridge) == 0:
        _log("warning: ridge is empty (all trajectories diverged or were filtered)")
    _log(f"wrote {out / 'ridge.csv'} ({len(ridge)} points)")
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    defaults = {"input": None, "grid": None, "method": "split", "objective": "l1",
                "replicates": 10, "seed": 0, "columns": None, "output_dir": ".",
                "emit_ridge": False, "workers": None, **_SCMS_DEFAULTS}
    opts = _resolve(args, file_cfg, defaults)
    if opts["input"] is None:
        raise ValueError("select requires --input")
    cloud = _load_cloud(opts["input"], opts["columns"])
    if opts["grid"] is None:
        h_bar = normal_reference_bandwidth(cloud)
        grid = np.geomspace(h_bar / 20.0, h_bar, 12)
    else:
        grid = _parse_span(opts["grid"], "--grid")
    cfg = _scms_config(opts)
    rng = np.random.default_rng(opts["seed"])
    workers = int(opts["workers"]) if opts["workers"] is not None else None
    curve = select_bandwidth(cloud, grid, method=opts["method"],
                             objective=opts["objective"], cfg=cfg, rng=rng,
                             replicates=opts["replicates"], workers=workers)
    out = Path(opts["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    curve.save_csv(out / "risk_curve.csv")
    curve.save_json(out / "select.json", extra={
        "command": "select",
        "input": str(opts["input"]),
        "seed": opts["seed"],
        "config": cfg.to_dict(),
        "version": _VERSION,
    })
    _log(f"selected h_star={curve.h_star} (cap h_bar={curve.h_bar})")
    if opts["emit_ridge"]:
        ridge = extract_ridge(cloud, curve.h_star, cfg)
        ridge.save_csv(out / "ridge.csv", d=cloud.d)
        _write_json(out / "ridge.json", {
            "command": "select --emit-ridge",
            "h": curve.h_star,
            **ridge.metadata(cfg),
        })
        _log(f"wrote {out / 'ridge.csv'} ({len(ridge)} points)")
    _log(f"wrote {out / 'risk_curve.csv'} ({len(curve.entries)} bandwidths)")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    defaults = {"radii": None, "columns": None, "output_dir": "."}
    opts = _resolve(args, file_cfg, defaults)
    cols = _parse_columns(opts["columns"])
    a = Manifold(load_csv(args.manifold_a, columns=cols).points)
    b = Manifold(load_csv(args.manifold_b, columns=cols).points)
    haus = hausdorff(a, b)
    if opts["radii"] is None:
        radii = np.linspace(0.0, haus, 64)
    else:
        radii = _parse_span(opts["radii"], "--radii")
    diagram = coverage_cdf(a, b, radii)
    losses = loss_pair(a, b)
    out = Path(opts["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    diagram.save_csv(out / "coverage.csv")
    _write_json(out / "compare.json", {
        "command": "compare",
        "manifold_a": str(args.manifold_a),
        "manifold_b": str(args.manifold_b),
        "loss1": losses.loss1,
        "loss2": losses.loss2,
        "hausdorff": haus,
    })
    _log(f"wrote {out / 'coverage.csv'} ({len(radii)} radii)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ridgecover",
        description="Density ridge extraction with coverage-risk bandwidth selection",
    )
    parser.add_argument("--version", action="version", version=_VERSION)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset with ground truth")
    p.add_argument("--kind", help=f"dataset kind: {' | '.join(KINDS)}")
    p.add_argument("--n", type=int, help="sample size")
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float,
                   help="noise standard deviation (default: 5%% of curve extent)")
    p.add_argument("--param", action="append",
                   help="curve parameter override, name=value (repeatable)")
    p.add_argument("--seed", type=int, help="RNG seed")
    p.add_argument("--output-dir", dest="output_dir", help="output directory")
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ridge", help="extract the density ridge at a fixed bandwidth")
    p.add_argument("--input", help="point cloud CSV")
    p.add_argument("--h", type=float, help="bandwidth")
    p.add_argument("--columns", help="comma-separated column names to use")
    _add_scms_flags(p)
    p.add_argument("--output-dir", dest="output_dir", help="output directory")
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_ridge)

    p = sub.add_parser("select", help="select the bandwidth by estimated coverage risk")
    p.add_argument("--input", help="point cloud CSV")
    p.add_argument("--grid", help="bandwidth grid min:max:count[:geom|lin] "
                                  "(default: 12 geometric points up to the normal "
                                  "reference cap)")
    p.add_argument("--method", choices=["split", "bootstrap"], help="risk estimator")
    p.add_argument("--replicates", type=int, help="bootstrap replicates")
    p.add_argument("--objective", choices=["l1", "l2"], help="risk objective")
    p.add_argument("--seed", type=int, help="RNG seed")
    p.add_argument("--workers", type=int,
                   help="parallel workers for grid evaluation (default: all cores); "
                        "results are identical for any setting")
    p.add_argument("--columns", help="comma-separated column names to use")
    p.add_argument("--emit-ridge", dest="emit_ridge", action="store_const", const=True,
                   help="also extract and write the ridge at the selected bandwidth")
    _add_scms_flags(p)
    p.add_argument("--output-dir", dest="output_dir", help="output directory")
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("compare", help="coverage diagram and losses for two manifolds")
    p.add_argument("manifold_a", help="first point mesh CSV")
    p.add_argument("manifold_b", help="second point mesh CSV")
    p.add_argument("--radii", help="radius grid min:max:count[:geom|lin] "
                                   "(default: 64 linear points up to the Hausdorff "
                                   "distance)")
    p.add_argument("--columns", help="comma-separated column names to use")
    p.add_argument("--output-dir", dest="output_dir", help="output directory")
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        _log(f"error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
