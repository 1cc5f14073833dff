"""Experiment orchestration: dataset spec -> cube tree -> two-sided
traveling-salesman report, plus the plot-data tables derived from a report.

A run bundle is a directory with ``summary.json`` (config echo, aggregate
sums, the forward/reverse/two-sided ratios, pass flag) and ``cubes.csv``
(per-cube measurements). Bundles are byte-deterministic given config + seed.

The theory asks for a huge ball-inflation floor on the non-flatness side;
measuring at desk scale uses small factors instead, and the run warns when
the configured factor sits below that floor.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .beta import TSTReport, critical_exponent, tst_report
from .cubes import build_cubes, build_nets
from .datasets import FAMILIES, make_dataset
from .geometry import GeometryError, PointCloud
from .util import dump_json, format_float

A_FLOOR = 1e5   # the stated hypothesis floor for the non-flatness inflation


@dataclass(frozen=True)
class DatasetSpec:
    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GeometryError(
                f"unknown dataset family {self.family!r}; "
                f"choose from {sorted(FAMILIES)}")

    def build(self) -> np.ndarray:
        return make_dataset(self.family, seed=self.seed, **dict(self.params))

    def to_dict(self):
        return {"family": self.family, "params": dict(self.params),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSpec":
        known = {"family", "params", "seed"}
        extra = {k: v for k, v in data.items() if k not in known}
        params = dict(data.get("params", {}))
        params.update(extra)
        return cls(family=data["family"], params=params,
                   seed=int(data.get("seed", 0)))


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec | None = None
    dimension: int = 1
    p: float = 2.0
    rho: float = 0.5
    c0: float = 1.0 / 30.0
    k_max: int = 6
    c0_factor: float = 5.0     # flatness-side ball inflation, > 1
    a_factor: float = 3.0      # non-flatness-side ball inflation, > 1
    epsilon: float = 0.05
    ratio_ceiling: float = 10.0

    def __post_init__(self):
        if not 1.0 <= self.p < critical_exponent(self.dimension):
            raise GeometryError(
                f"p must lie in [1, {critical_exponent(self.dimension)}) "
                f"for dimension {self.dimension}, got {self.p}")
        if self.c0_factor <= 1.0:
            raise GeometryError("flatness inflation factor must exceed 1")
        if self.a_factor <= 1.0:
            raise GeometryError("non-flatness inflation factor must exceed 1")
        if self.k_max < 1:
            raise GeometryError("k_max must be at least 1")

    def to_dict(self):
        return {
            "dataset": None if self.dataset is None else self.dataset.to_dict(),
            "dimension": self.dimension,
            "p": self.p,
            "rho": self.rho,
            "c0": self.c0,
            "k_max": self.k_max,
            "c0_factor": self.c0_factor,
            "a_factor": self.a_factor,
            "epsilon": self.epsilon,
            "ratio_ceiling": self.ratio_ceiling,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        dataset = data.pop("dataset", None)
        if dataset is not None:
            dataset = DatasetSpec.from_dict(dataset)
        fields = {k: data[k] for k in (
            "dimension", "p", "rho", "c0", "k_max", "c0_factor", "a_factor",
            "epsilon", "ratio_ceiling") if k in data}
        return cls(dataset=dataset, **fields)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    points: np.ndarray
    report: TSTReport

    @property
    def passed(self) -> bool:
        ceiling = self.config.ratio_ceiling
        ratio = self.report.two_sided_ratio()
        return bool(np.isfinite(ratio)) and 1.0 / ceiling <= ratio <= ceiling

    def summary(self) -> dict:
        return {
            "schema": "tstlab-summary-1",
            "config": self.config.to_dict(),
            "n_points": int(self.points.shape[0]),
            "ambient_dim": int(self.points.shape[1]),
            "report": self.report.to_dict(),
            "forward_ratio": self.report.upper_ratio(),
            "reverse_ratio": self.report.lower_ratio(),
            "two_sided_ratio": self.report.two_sided_ratio(),
            "passed": self.passed,
        }

    def write_bundle(self, directory) -> dict:
        os.makedirs(directory, exist_ok=True)
        summary_path = os.path.join(directory, "summary.json")
        cubes_path = os.path.join(directory, "cubes.csv")
        dump_json(self.summary(), summary_path)
        self.report.write_csv(cubes_path)
        return {"summary": summary_path, "cubes": cubes_path}


def run_experiment(config: ExperimentConfig,
                   points: np.ndarray | None = None) -> ExperimentResult:
    """Generate (unless given), build the tree, and measure both sides."""
    if points is None:
        if config.dataset is None:
            raise GeometryError("config has no dataset and no points were given")
        points = config.dataset.build()
    if config.a_factor < A_FLOOR:
        warnings.warn(
            f"non-flatness inflation {config.a_factor:g} sits far below the "
            f"theory's {A_FLOOR:g} floor; measured constants are empirical",
            stacklevel=2)
    cloud = PointCloud(points)
    nets = build_nets(cloud, rho=config.rho, k_max=config.k_max)
    tree = build_cubes(nets, c0=config.c0)
    report = tst_report(tree, dimension=config.dimension, p=config.p,
                        c0_factor=config.c0_factor, a_factor=config.a_factor,
                        epsilon=config.epsilon)
    return ExperimentResult(config=config, points=points, report=report)


def beta_histogram_lines(rows, bins: int = 16) -> list:
    """Per-level histogram of the flatness values as CSV lines."""
    lines = ["level,bin_lo,bin_hi,count"]
    if not rows:
        return lines
    top = max(row["beta"] for row in rows)
    top = top if top > 0 else 1.0
    edges = np.linspace(0.0, top, bins + 1)
    levels = sorted({row["level"] for row in rows})
    for level in levels:
        values = np.asarray([row["beta"] for row in rows
                             if row["level"] == level])
        counts, _ = np.histogram(values, bins=edges)
        for b in range(bins):
            lines.append(",".join([
                str(level), format_float(edges[b]), format_float(edges[b + 1]),
                str(int(counts[b])),
            ]))
    return lines


def ratio_depth_lines(summary: dict) -> list:
    """Cumulative two-sided ratios per depth as CSV lines."""
    lines = ["depth,beta_partial,bwgl_partial,measure_at_depth,two_sided_ratio"]
    report = summary["report"]
    side = report["side_term"]
    rows = summary.get("rows", [])
    if not rows:
        return lines
    depth = max(row["level"] for row in rows)
    for m in range(depth + 1):
        upto = [row for row in rows if row["level"] <= m]
        beta_partial = sum(row["beta_sq_ell_d"] for row in upto)
        bwgl_partial = sum(row["ell_d"] for row in upto if row["bwgl"])
        measure = sum(row["ell_d"] for row in rows if row["level"] == m)
        rhs = measure + bwgl_partial
        ratio = (side + beta_partial + bwgl_partial) / rhs if rhs > 0 else math.inf
        lines.append(",".join([
            str(m), format_float(beta_partial), format_float(bwgl_partial),
            format_float(measure), format_float(ratio),
        ]))
    return lines


def _read_cube_rows(path) -> list:
    rows = []
    with open(path, "r") as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            values = line.split(",")
            row = dict(zip(header, values))
            rows.append({
                "level": int(row["level"]),
                "index": int(row["index"]),
                "side": float(row["side"]),
                "members": int(row["members"]),
                "beta": float(row["beta"]),
                "bbeta": float(row["bbeta"]),
                "bwgl": bool(int(row["bwgl"])),
                "ell_d": float(row["ell_d"]),
                "beta_sq_ell_d": float(row["beta_sq_ell_d"]),
            })
    return rows


def write_report_tables(bundle_dir, out_dir, bins: int = 16) -> dict:
    """Derive the plot-data CSVs (histograms, ratio-vs-depth) from a bundle."""
    import json
    summary_path = os.path.join(bundle_dir, "summary.json")
    cubes_path = os.path.join(bundle_dir, "cubes.csv")
    if not os.path.exists(summary_path) or not os.path.exists(cubes_path):
        raise GeometryError(f"bundle at {bundle_dir} is missing summary or cubes")
    with open(summary_path, "r") as fh:
        summary = json.load(fh)
    rows = _read_cube_rows(cubes_path)
    summary["rows"] = rows
    os.makedirs(out_dir, exist_ok=True)
    hist_path = os.path.join(out_dir, "beta_histogram.csv")
    ratio_path = os.path.join(out_dir, "ratio_by_depth.csv")
    with open(hist_path, "w", newline="\n") as fh:
        fh.write("\n".join(beta_histogram_lines(rows, bins)) + "\n")
    with open(ratio_path, "w", newline="\n") as fh:
        fh.write("\n".join(ratio_depth_lines(summary)) + "\n")
    return {"histogram": hist_path, "ratio": ratio_path}
