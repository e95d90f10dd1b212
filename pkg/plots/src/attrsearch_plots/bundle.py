"""Bundle parsing and validation.

A bundle directory holds a manifest.json naming figures plus the delimited
tables they reference: series.csv (sampler, budget, metric, mean, ci_low,
ci_high), an optional heatmap matrix, and optional ablation tables.  The
renderer never touches anything but these files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

FIGURE_KINDS = ("curves", "heatmap", "ablation")

SERIES_HEADER = ["sampler", "budget", "metric", "mean", "ci_low", "ci_high"]


class BundleError(Exception):
    pass


@dataclass
class SeriesRow:
    sampler: str
    budget: int
    metric: str
    mean: float
    ci_low: float
    ci_high: float


@dataclass
class PlotBundle:
    root: Path
    manifest: dict
    figures: list = field(default_factory=list)

    @property
    def seed(self):
        return self.manifest.get("seed")

    @property
    def config_hash(self):
        return self.manifest.get("config_hash")


def load_bundle(bundle_dir) -> PlotBundle:
    root = Path(bundle_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise BundleError(f"{root}: no manifest.json")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as e:
        raise BundleError(f"{manifest_path}: invalid JSON ({e})") from None
    figures = manifest.get("figures")
    if figures is None or not isinstance(figures, list):
        raise BundleError(f"{manifest_path}: manifest needs a 'figures' list")
    bundle = PlotBundle(root=root, manifest=manifest, figures=figures)
    for k, fig in enumerate(figures):
        _validate_figure(bundle, k, fig)
    return bundle


def _validate_figure(bundle: PlotBundle, k: int, fig: dict) -> None:
    kind = fig.get("kind")
    if kind not in FIGURE_KINDS:
        raise BundleError(f"figure[{k}]: unknown kind {kind!r}")
    file_key = {"curves": "series", "heatmap": "matrix", "ablation": "table"}[kind]
    name = fig.get(file_key)
    if not name:
        raise BundleError(f"figure[{k}]: missing {file_key!r} file reference")
    path = bundle.root / name
    if not path.exists():
        raise BundleError(f"figure[{k}]: referenced file {name!r} does not exist")
    if kind == "curves" and not fig.get("metric"):
        raise BundleError(f"figure[{k}]: curves figure needs a 'metric'")


def read_series(path, metric: Optional[str] = None) -> list[SeriesRow]:
    """Parse and validate a series table; rows must be sorted by
    (sampler, budget) and every confidence band must have positive width."""
    rows: list[SeriesRow] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != SERIES_HEADER:
            raise BundleError(f"{path}: unexpected header {header}")
        for line_no, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 6:
                raise BundleError(f"{path}:{line_no}: expected 6 cells")
            sampler, budget, row_metric, mean, lo, hi = parts
            try:
                row = SeriesRow(sampler, int(budget), row_metric,
                                float(mean), float(lo), float(hi))
            except ValueError:
                raise BundleError(f"{path}:{line_no}: unparsable numeric cell") from None
            if metric is not None and row.metric != metric:
                continue
            for v in (row.mean, row.ci_low, row.ci_high):
                if math.isnan(v) or math.isinf(v):
                    raise BundleError(f"{path}:{line_no}: non-finite value")
            if row.ci_high - row.ci_low <= 0:
                raise BundleError(
                    f"{path}:{line_no}: nonpositive confidence-interval width"
                )
            if not row.ci_low <= row.mean <= row.ci_high:
                raise BundleError(f"{path}:{line_no}: interval does not bracket the mean")
            rows.append(row)
    keys = [(r.sampler, r.budget) for r in rows]
    if keys != sorted(keys):
        raise BundleError(f"{path}: rows not sorted by (sampler, budget)")
    if metric is not None and not rows:
        raise BundleError(f"{path}: no rows for metric {metric!r}")
    return rows


def read_heatmap(path) -> tuple[str, str, list[str], list[str], list[list[float]]]:
    """Parse a labeled matrix: header '<row_attr>\\<col_attr>,v1,v2,...'."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if not header or "\\" not in header[0]:
            raise BundleError(f"{path}: malformed heatmap header")
        row_attr, col_attr = header[0].split("\\", 1)
        col_labels = header[1:]
        if not col_labels:
            raise BundleError(f"{path}: heatmap has no columns")
        row_labels, matrix = [], []
        for line_no, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(col_labels) + 1:
                raise BundleError(f"{path}:{line_no}: ragged heatmap row")
            row_labels.append(parts[0])
            try:
                matrix.append([float(v) for v in parts[1:]])
            except ValueError:
                raise BundleError(f"{path}:{line_no}: unparsable heatmap cell") from None
    if not matrix:
        raise BundleError(f"{path}: empty heatmap")
    return row_attr, col_attr, row_labels, col_labels, matrix


def read_table(path) -> tuple[list[str], list[dict]]:
    """Generic delimited table (ablation combined.csv)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if len(header) < 2:
            raise BundleError(f"{path}: malformed table header")
        rows = []
        for line_no, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(header):
                raise BundleError(f"{path}:{line_no}: ragged table row")
            rows.append(dict(zip(header, parts)))
    if not rows:
        raise BundleError(f"{path}: empty table")
    return header, rows
