"""Command-line front end.

Every subcommand takes ``--config`` (a JSON file path, or an inline JSON
object starting with ``{``) plus ``--seed`` where randomness exists, and
reads/writes the documented point-cloud formats. Exit code 0 means the
requested checks passed; 1 means a configured ceiling failed; 2 means bad
input.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import beta as beta_mod
from . import reifenberg as reif
from .content import ChoquetConfig, hausdorff_content
from .cubes import build_cubes, build_nets
from .dorronsoro import SampledFunction, omega_sum
from .experiment import (DatasetSpec, ExperimentConfig, run_experiment,
                         write_report_tables)
from .geometry import Ball, GeometryError, PointCloud
from .io import load_points, save_points
from .util import dump_json, jsonable


def _load_config(value: str | None) -> dict:
    if value is None:
        return {}
    text = value.strip()
    if not text.startswith("{"):
        with open(value, "r") as fh:
            text = fh.read()
    data = json.loads(text)
    if not isinstance(data, dict):
        raise GeometryError("config must be a JSON object")
    return data


def _ball_from(config: dict, key: str = "ball") -> Ball:
    if key not in config:
        raise GeometryError(f"config needs a {key!r} entry with center and radius")
    entry = config[key]
    return Ball(np.asarray(entry["center"], dtype=float), float(entry["radius"]))


def _cmd_generate(args) -> int:
    config = _load_config(args.config)
    seed = args.seed if args.seed is not None else config.pop("seed", 0)
    spec = DatasetSpec.from_dict({**config, "seed": seed})
    points = spec.build()
    save_points(points, args.out)
    return 0


def _tree_from_config(points, config):
    cloud = PointCloud(points)
    nets = build_nets(cloud, rho=float(config.get("rho", 0.5)),
                      k_max=int(config.get("k_max", 6)),
                      scale_0=config.get("scale_0"))
    return build_cubes(nets, c0=float(config.get("c0", 1.0 / 30.0)))


def _cmd_cubes(args) -> int:
    config = _load_config(args.config)
    tree = _tree_from_config(load_points(args.infile), config)
    tree.save(args.out)
    return 0


def _cmd_content(args) -> int:
    config = _load_config(args.config)
    points = load_points(args.infile)
    ball = _ball_from(config) if "ball" in config else None
    estimate = hausdorff_content(
        PointCloud(points), int(config.get("dimension", 1)), ball,
        rho=float(config.get("rho", 0.5)),
        resolution=config.get("resolution"))
    dump_json(estimate.to_dict(), args.out)
    return 0


def _cmd_beta(args) -> int:
    config = _load_config(args.config)
    points = load_points(args.infile)
    cloud = PointCloud(points)
    ball = _ball_from(config)
    kind = config.get("kind", "beta_dp")
    dimension = int(config.get("dimension", 1))
    if kind == "beta_inf":
        result = beta_mod.beta_inf(cloud, ball, dimension)
    elif kind == "beta_dp":
        result = beta_mod.beta_dp(cloud, ball, dimension,
                                  float(config.get("p", 2.0)))
    elif kind == "bbeta":
        result = beta_mod.bbeta(cloud, ball, dimension)
    elif kind == "eta_inf":
        result = beta_mod.eta_inf(cloud, ball, dimension)
    else:
        raise GeometryError(f"unknown flatness kind {kind!r}")
    dump_json(result.to_dict(), args.out)
    return 0


def _experiment_from_args(args):
    config = _load_config(args.config)
    if args.seed is not None and "dataset" in config:
        config["dataset"] = {**config["dataset"], "seed": args.seed}
    cfg = ExperimentConfig.from_dict(config)
    points = load_points(args.infile) if args.infile else None
    return run_experiment(cfg, points=points)


def _cmd_tst(args) -> int:
    result = _experiment_from_args(args)
    if args.out_dir:
        result.write_bundle(args.out_dir)
    else:
        dump_json(result.summary(), args.out)
        if args.csv:
            result.report.write_csv(args.csv)
    return 0 if result.passed else 1


def _cmd_bwgl(args) -> int:
    config = _load_config(args.config)
    points = load_points(args.infile)
    tree = _tree_from_config(points, config)
    cloud = tree.cloud
    rows = beta_mod.bwgl_classify(
        cloud, tree.descendants(tree.roots()[0]),
        dimension=int(config.get("dimension", 1)),
        a_factor=float(config.get("a_factor", 3.0)),
        epsilon=float(config.get("epsilon", 0.05)))
    flagged_sum = sum(cube.side ** int(config.get("dimension", 1))
                      for cube, _, flag in rows if flag)
    payload = {
        "a_factor": float(config.get("a_factor", 3.0)),
        "epsilon": float(config.get("epsilon", 0.05)),
        "flagged_sum": flagged_sum,
        "n_cubes": len(rows),
        "n_flagged": sum(1 for _, _, flag in rows if flag),
        "rows": [
            {"level": cube.level, "index": cube.index, "value": value,
             "flagged": flag}
            for cube, value, flag in rows
        ],
    }
    dump_json(jsonable(payload), args.out)
    return 0


def _cmd_reifenberg(args) -> int:
    config = _load_config(args.config)
    with open(args.infile, "r") as fh:
        ccbp = reif.ccbp_from_dict(json.load(fh))
    epsilon = float(config.get("epsilon", 0.01))
    profile = reif.validate_ccbp(ccbp, epsilon)
    surface = reif.iterate(ccbp, pitch=float(config.get("pitch", 0.05)),
                           k_max=config.get("k_max"),
                           extent=config.get("extent"))
    cert = reif.certify(surface, ccbp, epsilon,
                        ceilings=config.get("ceilings"),
                        seed=int(config.get("seed", 0)))
    bilip = reif.bilip_certificate(surface, ccbp)
    payload = {
        "profile": profile.to_dict(),
        "certificates": cert.to_dict(),
        "bilipschitz": bilip.to_dict(),
        "n_grid": int(surface.tangent.shape[0]),
        "n_steps": surface.n_steps,
        "displacements": surface.displacements,
    }
    if args.out_dir:
        surface.save_csv(args.out_dir)
    dump_json(jsonable(payload), args.out)
    if args.mesh:
        surface.export_off(args.mesh)
    return 0 if (profile.passed and cert.passed) else 1


def _cmd_dorronsoro(args) -> int:
    config = _load_config(args.config)
    table = load_points(args.infile)
    d = int(config.get("domain_dim", 1))
    m = int(config.get("codomain_dim", max(table.shape[1] - d, 1)))
    if table.shape[1] != d + m:
        raise GeometryError(
            f"sample table has {table.shape[1]} columns, expected {d + m}")
    func = SampledFunction(table[:, :d], table[:, d:],
                           lipschitz=config.get("lipschitz"),
                           bilipschitz=config.get("bilipschitz"))
    p = config.get("p", 2.0)
    p = math.inf if p in ("inf", None) else float(p)
    report = omega_sum(func, p, int(config.get("depth", 6)))
    dump_json(jsonable(report.to_dict()), args.out)
    return 0


def _cmd_report(args) -> int:
    config = _load_config(args.config)
    write_report_tables(args.infile, args.out_dir,
                        bins=int(config.get("bins", 16)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tstlab",
        description="Multiscale flatness toolbox: nets, cubes, content, "
                    "beta numbers, two-sided traveling-salesman checks, and "
                    "Reifenberg-style parametrizations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", help="JSON file path or inline JSON object")
        p.add_argument("--seed", type=int, default=None,
                       help="u64 seed overriding the config's")
        p.set_defaults(fn=fn)
        return p

    p = add("generate", _cmd_generate, help="build a synthetic point cloud")
    p.add_argument("--out", required=True)

    p = add("cubes", _cmd_cubes, help="build the cube tree of a cloud")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)

    p = add("content", _cmd_content, help="Hausdorff-content estimate")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)

    p = add("beta", _cmd_beta, help="flatness number over one ball")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)

    p = add("tst", _cmd_tst, help="two-sided multiscale comparison")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--out", default="summary.json")
    p.add_argument("--csv", default=None, help="optional per-cube CSV path")
    p.add_argument("--out-dir", default=None, help="write a bundle directory")

    p = add("bwgl", _cmd_bwgl, help="bilateral non-flatness classification")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)

    p = add("reifenberg", _cmd_reifenberg,
            help="validate, iterate, and certify a layered ball/plane system")
    p.add_argument("--in", dest="infile", required=True,
                   help="layered system as JSON")
    p.add_argument("--out", required=True, help="certificate report JSON")
    p.add_argument("--out-dir", default=None, help="per-level CSV directory")
    p.add_argument("--mesh", default=None, help="OFF mesh path (2-d lattices)")

    p = add("dorronsoro", _cmd_dorronsoro,
            help="affine-approximation numbers of a sampled map")
    p.add_argument("--in", dest="infile", required=True,
                   help="CSV with domain then value columns")
    p.add_argument("--out", required=True)

    p = add("report", _cmd_report, help="plot-data tables from a run bundle")
    p.add_argument("--in", dest="infile", required=True,
                   help="bundle directory from tst --out-dir")
    p.add_argument("--out-dir", required=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (GeometryError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"tstlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
