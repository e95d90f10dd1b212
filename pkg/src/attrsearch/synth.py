"""Planted-correlation synthetic datasets for desk-scale experiments.

The default construction plants one "hot" fully-bound query cell whose target
probability is raised above the base rate, with the overall target fraction
held exactly at the requested value.  An alternative clustered construction
fixes a precision level per value of the first attribute (plus an optional
bonus on the hot cell), which yields tight per-branch precision clusters.
Generation is deterministic per seed, both in memory and on disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .dataset import AttributeSchema, Dataset, EntityRecord, HiddenPropertySpec

TARGET_FIELD = "is_target"
TARGET_PREDICATE = {"op": "=", "field": TARGET_FIELD, "value": 1}


class SynthError(Exception):
    pass


@dataclass(frozen=True)
class SynthSpec:
    cardinalities: tuple[int, ...]
    records: int
    target_fraction: float = 0.2
    correlation: float = 0.0
    seed: int = 0
    cluster_precisions: Optional[tuple[float, ...]] = None
    hot_bonus: float = 0.0

    def __post_init__(self):
        if not self.cardinalities or any(c < 1 for c in self.cardinalities):
            raise SynthError("cardinalities must be positive")
        if self.records < 1:
            raise SynthError("records must be >= 1")
        if not 0.0 <= self.target_fraction <= 1.0:
            raise SynthError("target_fraction must be in [0, 1]")
        if not 0.0 <= self.correlation <= 1.0:
            raise SynthError("correlation must be in [0, 1]")
        if self.cluster_precisions is not None:
            if len(self.cluster_precisions) != self.cardinalities[0]:
                raise SynthError(
                    "cluster_precisions needs one level per value of the first attribute"
                )
            if any(not 0.0 <= p <= 1.0 for p in self.cluster_precisions):
                raise SynthError("cluster precisions must be in [0, 1]")
            if not 0.0 <= self.cluster_precisions[0] + self.hot_bonus <= 1.0:
                raise SynthError("hot-cell precision out of [0, 1]")

    @property
    def arity(self) -> int:
        return len(self.cardinalities)

    @staticmethod
    def from_dict(d: dict) -> "SynthSpec":
        known = {"cardinalities", "records", "target_fraction", "correlation",
                 "seed", "cluster_precisions", "hot_bonus"}
        extra = set(d) - known
        if extra:
            raise SynthError(f"unknown synth keys: {sorted(extra)}")
        if "cardinalities" not in d or "records" not in d:
            raise SynthError("synth spec needs 'cardinalities' and 'records'")
        kwargs = dict(d)
        kwargs["cardinalities"] = tuple(int(c) for c in d["cardinalities"])
        if d.get("cluster_precisions") is not None:
            kwargs["cluster_precisions"] = tuple(float(p) for p in d["cluster_precisions"])
        return SynthSpec(**kwargs)

    def to_dict(self) -> dict:
        out = {
            "cardinalities": list(self.cardinalities),
            "records": self.records,
            "target_fraction": self.target_fraction,
            "correlation": self.correlation,
            "seed": self.seed,
        }
        if self.cluster_precisions is not None:
            out["cluster_precisions"] = list(self.cluster_precisions)
            out["hot_bonus"] = self.hot_bonus
        return out


def _schema_for(spec: SynthSpec) -> AttributeSchema:
    names = tuple(f"attr{i + 1}" for i in range(spec.arity))
    domains = tuple(
        tuple(f"v{j + 1}" for j in range(card)) for card in spec.cardinalities
    )
    return AttributeSchema(names, domains)


def generate(spec: SynthSpec) -> Dataset:
    """Materialize the synthetic dataset in memory."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    schema = _schema_for(spec)
    n = spec.records

    columns = [rng.integers(0, card, size=n) for card in spec.cardinalities]
    values = [
        tuple(schema.domains[i][columns[i][row]] for i in range(spec.arity))
        for row in range(n)
    ]

    targets = np.zeros(n, dtype=bool)
    if spec.cluster_precisions is not None:
        _plant_clusters(spec, columns, targets, rng)
    else:
        _plant_hot_cell(spec, columns, targets, rng)

    records = [
        EntityRecord(row + 1, values[row], {TARGET_FIELD: 1.0 if targets[row] else 0.0})
        for row in range(n)
    ]
    return Dataset(schema, records, HiddenPropertySpec(TARGET_PREDICATE))


def _plant_hot_cell(spec, columns, targets, rng) -> None:
    n = spec.records
    want = int(round(spec.target_fraction * n))
    hot = tuple(int(rng.integers(0, card)) for card in spec.cardinalities)
    in_hot = np.ones(n, dtype=bool)
    for i, col in enumerate(columns):
        in_hot &= col == hot[i]
    hot_rows = np.flatnonzero(in_hot)
    cold_rows = np.flatnonzero(~in_hot)

    p_hot = spec.target_fraction + spec.correlation * (1.0 - spec.target_fraction)
    t_hot = min(len(hot_rows), int(round(p_hot * len(hot_rows))), want)
    t_cold = want - t_hot
    if t_cold > len(cold_rows):
        raise SynthError(
            f"infeasible target fraction {spec.target_fraction}: needs {t_cold} targets "
            f"among {len(cold_rows)} non-hot records"
        )
    if t_hot:
        targets[rng.choice(hot_rows, size=t_hot, replace=False)] = True
    if t_cold:
        targets[rng.choice(cold_rows, size=t_cold, replace=False)] = True


def _plant_clusters(spec, columns, targets, rng) -> None:
    # Exact per-cell target counts keep every branch precision deterministic,
    # so the best fully-bound cell is unambiguous.
    arity = spec.arity
    cells: dict[tuple, list[int]] = {}
    for row in range(spec.records):
        cells.setdefault(tuple(int(columns[i][row]) for i in range(arity)), []).append(row)
    hot = (0,) * arity
    for cell, rows in sorted(cells.items()):
        p = spec.cluster_precisions[cell[0]]
        if cell == hot:
            p += spec.hot_bonus
        count = int(round(p * len(rows)))
        if count:
            chosen = rng.choice(len(rows), size=count, replace=False)
            for idx in chosen:
                targets[rows[idx]] = True


def declaration_for(spec: SynthSpec) -> dict:
    schema = _schema_for(spec)
    return {
        "delimiter": ",",
        "id_column": "id",
        "queryable": [
            {"name": name, "domain": list(domain)}
            for name, domain in zip(schema.names, schema.domains)
        ],
        "hidden": [TARGET_FIELD],
        "target": TARGET_PREDICATE,
    }


def write_files(spec: SynthSpec, out_dir, stem: str = "synth") -> tuple[Path, Path]:
    """Emit the dataset as delimited text plus its sidecar declaration."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = generate(spec)
    csv_path = out / f"{stem}.csv"
    decl_path = out / f"{stem}.decl.json"
    names = dataset.schema.names
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("id," + ",".join(names) + f",{TARGET_FIELD}\n")
        for r in dataset.records:
            flag = int(r.hidden[TARGET_FIELD])
            fh.write(f"{r.id}," + ",".join(r.values) + f",{flag}\n")
    with open(decl_path, "w", encoding="utf-8") as fh:
        json.dump(declaration_for(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, decl_path
