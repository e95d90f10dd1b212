"""Experiment orchestration: replicated runs, metrics, aggregates, ablations.

One experiment fans out over (sampler, replicate) pairs; every replicate owns
independent RNG streams derived from (master seed, replicate index), so runs
parallelize freely and rerunning a spec reproduces results byte for byte.
Budgets share work: each pair runs once at the largest budget and smaller
budgets are read off the per-call series, which is exact because a run's
random stream does not depend on the budget bound.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .dataset import Dataset, TransformSpec, apply_transform, load_dataset
from .query import Query
from .samplers import SamplerConfig, run
from .simapi import ApiConfig, BudgetLedger, QueryIndex, SimulatedApi, build_index
from .synth import SynthSpec, generate

Z_95 = 1.96  # two-sided normal 95%

METRICS = ("recall", "normalized_recall", "throughput_rate")


class HarnessError(Exception):
    pass


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def recall(targets_sampled: int, targets_total: int) -> float:
    """Distinct targets sampled over targets in the dataset."""
    if targets_total < 1:
        raise HarnessError("recall undefined: dataset has no target entities")
    if not 0 <= targets_sampled <= targets_total:
        raise HarnessError(f"invalid target counts ({targets_sampled}/{targets_total})")
    return targets_sampled / targets_total


def normalized_recall(targets_sampled: int, budget: int, page_size: int) -> float:
    """Distinct targets sampled over the theoretical maximum budget * page_size."""
    if budget * page_size < 1:
        raise HarnessError("normalized recall undefined for zero budget*page_size")
    return targets_sampled / (budget * page_size)


def throughput_rate(distinct_targets: int, budget: int, page_size: int) -> float:
    """Distinct targets per returned-result slot; short pages are penalized."""
    if budget * page_size < 1:
        raise HarnessError("throughput rate undefined for zero budget*page_size")
    return distinct_targets / (budget * page_size)


def true_precision_map(
    index: QueryIndex, queries: Sequence[Query], target_mask: Optional[np.ndarray] = None
) -> dict[Query, float]:
    """Exact per-query precision (targets matching / matches); empty-match
    queries are undefined and omitted."""
    mask = index.dataset.target_mask if target_mask is None else target_mask
    out: dict[Query, float] = {}
    for q in queries:
        positions = index.match_positions(q)
        if len(positions) == 0:
            continue
        out[q] = float(mask[positions].sum()) / len(positions)
    return out


# ---------------------------------------------------------------------------
# experiment specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FileSource:
    path: str
    declaration: str
    rank_seed: Optional[int] = None


DatasetSource = Union[Dataset, SynthSpec, FileSource]


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: DatasetSource
    samplers: tuple[SamplerConfig, ...]
    budgets: tuple[int, ...]
    api: ApiConfig
    replicates: int = 100
    seed: int = 0
    transforms: tuple[TransformSpec, ...] = ()
    metrics: tuple[str, ...] = METRICS
    heatmap: Optional[tuple[str, str]] = None

    def __post_init__(self):
        if not self.samplers:
            raise HarnessError("at least one sampler is required")
        labels = [s.display_name for s in self.samplers]
        if len(set(labels)) != len(labels):
            raise HarnessError(f"duplicate sampler labels: {labels}")
        if not self.budgets or any(b < 1 for b in self.budgets):
            raise HarnessError("budgets must be positive")
        if list(self.budgets) != sorted(self.budgets):
            raise HarnessError("budgets must be sorted ascending")
        if self.replicates < 1:
            raise HarnessError("replicates must be >= 1")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise HarnessError(f"unknown metrics: {sorted(unknown)}")

    @property
    def max_budget(self) -> int:
        return max(self.budgets)


def _materialize(source: DatasetSource) -> Dataset:
    if isinstance(source, Dataset):
        return source
    if isinstance(source, SynthSpec):
        return generate(source)
    if isinstance(source, FileSource):
        ds = load_dataset(source.path, source.declaration)
        if source.rank_seed is not None:
            ds = ds.with_random_rank(source.rank_seed)
        return ds
    raise HarnessError(f"unknown dataset source {type(source).__name__}")


_PER_REPLICATE_KINDS = {"shuffle"}


def _split_transforms(transforms: Sequence[TransformSpec]):
    """Leading transforms that are identical across replicates are applied
    once; from the first per-replicate transform (a seedless shuffle) on,
    everything is reapplied per replicate."""
    for k, t in enumerate(transforms):
        if t.kind in _PER_REPLICATE_KINDS and t.seed is None:
            return tuple(transforms[:k]), tuple(transforms[k:])
    return tuple(transforms), ()


# ---------------------------------------------------------------------------
# single runs
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    sampler: str
    replicate: int
    budget: int
    series: list[int]  # cumulative distinct targets, one entry per call
    distinct_sampled: int
    calls_made: int
    metrics_by_budget: dict[int, dict[str, float]]

    def to_json_line(self) -> str:
        payload = {
            "sampler": self.sampler,
            "replicate": self.replicate,
            "budget": self.budget,
            "series": self.series,
            "distinct_sampled": self.distinct_sampled,
            "calls_made": self.calls_made,
            "metrics_by_budget": {str(b): m for b, m in sorted(self.metrics_by_budget.items())},
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _replicate_dataset(base: Dataset, suffix: Sequence[TransformSpec],
                       master_seed: int, replicate: int) -> Dataset:
    ds = base
    for pos, t in enumerate(suffix):
        seed = int(np.random.SeedSequence(master_seed, spawn_key=(replicate, 2, pos))
                   .generate_state(1)[0])
        ds = apply_transform(ds, t, rng_seed=seed)
    return ds


def _run_single(
    base: Dataset,
    base_index: Optional[QueryIndex],
    suffix: Sequence[TransformSpec],
    sampler: SamplerConfig,
    api_config: ApiConfig,
    budgets: Sequence[int],
    metrics: Sequence[str],
    master_seed: int,
    replicate: int,
) -> RunResult:
    dataset = _replicate_dataset(base, suffix, master_seed, replicate)
    index = base_index if base_index is not None and dataset.schema == base.schema else None
    api_rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(replicate, 1)))
    sampler_rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(replicate, 0)))
    api = SimulatedApi(dataset, api_config, index=index, rng=api_rng)
    budget = max(budgets)
    ledger = BudgetLedger(budget)
    log = run(sampler, api, ledger, rng=sampler_rng)

    series = list(log.target_series)
    metrics_by_budget = {}
    m = api_config.page_size
    for b in budgets:
        n_targets = series[b - 1] if b <= len(series) else (series[-1] if series else 0)
        values = {}
        for name in metrics:
            if name == "recall":
                values[name] = recall(n_targets, dataset.target_count)
            elif name == "normalized_recall":
                values[name] = normalized_recall(n_targets, b, m)
            elif name == "throughput_rate":
                values[name] = throughput_rate(n_targets, b, m)
        metrics_by_budget[b] = values
    return RunResult(
        sampler=sampler.display_name,
        replicate=replicate,
        budget=budget,
        series=series,
        distinct_sampled=log.distinct_sampled,
        calls_made=ledger.calls_made,
        metrics_by_budget=metrics_by_budget,
    )


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AggregateRow:
    sampler: str
    budget: int
    metric: str
    mean: float
    sd: float
    ci_low: float
    ci_high: float
    n: int


def confidence_interval(values: Sequence[float]) -> tuple[float, float, float, float]:
    """(mean, sd, ci_low, ci_high) under the normal approximation; sd and the
    interval are NaN below two samples."""
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if len(arr) < 2:
        return mean, float("nan"), float("nan"), float("nan")
    sd = float(arr.std(ddof=1))
    half = Z_95 * sd / math.sqrt(len(arr))
    return mean, sd, mean - half, mean + half


def aggregate(
    runs: Sequence[RunResult], budgets: Sequence[int], metrics: Sequence[str]
) -> list[AggregateRow]:
    samplers = sorted({r.sampler for r in runs})
    rows = []
    for sampler in samplers:
        sub = [r for r in runs if r.sampler == sampler]
        for b in budgets:
            for metric in metrics:
                values = [r.metrics_by_budget[b][metric] for r in sub]
                mean, sd, lo, hi = confidence_interval(values)
                rows.append(AggregateRow(sampler, b, metric, mean, sd, lo, hi, len(values)))
    return rows


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    runs: list[RunResult]
    aggregates: list[AggregateRow]

    def rows_for(self, sampler: str, metric: str, budget: int) -> AggregateRow:
        for row in self.aggregates:
            if row.sampler == sampler and row.metric == metric and row.budget == budget:
                return row
        raise KeyError((sampler, metric, budget))


_WORKER_CTX: dict = {}


def _init_worker(payload):
    base, suffix, api_config, budgets, metrics, master_seed, samplers = payload
    _WORKER_CTX["base"] = base
    _WORKER_CTX["index"] = build_index(base)
    _WORKER_CTX["suffix"] = suffix
    _WORKER_CTX["api_config"] = api_config
    _WORKER_CTX["budgets"] = budgets
    _WORKER_CTX["metrics"] = metrics
    _WORKER_CTX["seed"] = master_seed
    _WORKER_CTX["samplers"] = samplers


def _worker_run(task):
    sampler_idx, replicate = task
    ctx = _WORKER_CTX
    return _run_single(
        ctx["base"], ctx["index"], ctx["suffix"], ctx["samplers"][sampler_idx],
        ctx["api_config"], ctx["budgets"], ctx["metrics"], ctx["seed"], replicate,
    )


def run_experiment(
    spec: ExperimentSpec, jobs: int = 1, out_dir: Optional[Union[str, Path]] = None
) -> ExperimentResult:
    """Execute every (sampler, replicate) pair and aggregate across replicates.

    With `out_dir`, persists raw per-run results (JSON lines), the summary
    table (CSV), experiment metadata, and the optional precision heatmap.
    """
    prefix, suffix = _split_transforms(spec.transforms)
    base = _materialize(spec.dataset)
    for t in prefix:
        base = apply_transform(base, t, rng_seed=spec.seed)

    tasks = [
        (si, rep)
        for si in range(len(spec.samplers))
        for rep in range(spec.replicates)
    ]
    if jobs > 1 and len(tasks) > 1:
        payload = (base, suffix, spec.api, tuple(spec.budgets), tuple(spec.metrics),
                   spec.seed, tuple(spec.samplers))
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(payload,)) as pool:
            results = list(pool.map(_worker_run, tasks, chunksize=4))
    else:
        index = build_index(base)
        results = [
            _run_single(base, index, suffix, spec.samplers[si], spec.api,
                        spec.budgets, spec.metrics, spec.seed, rep)
            for si, rep in tasks
        ]

    order = {s.display_name: i for i, s in enumerate(spec.samplers)}
    results.sort(key=lambda r: (order[r.sampler], r.replicate))
    aggregates = aggregate(results, spec.budgets, spec.metrics)
    result = ExperimentResult(spec, results, aggregates)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def spec_fingerprint(spec: ExperimentSpec) -> str:
    """Stable hash of the resolved experiment plan (dataset by reference)."""
    payload = {
        "dataset": _dataset_ref(spec.dataset),
        "transforms": [t.to_dict() for t in spec.transforms],
        "samplers": [
            {k: v for k, v in vars(s).items() if v is not None} for s in spec.samplers
        ],
        "budgets": list(spec.budgets),
        "api": vars(spec.api),
        "replicates": spec.replicates,
        "seed": spec.seed,
        "metrics": list(spec.metrics),
        "heatmap": list(spec.heatmap) if spec.heatmap else None,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _dataset_ref(source: DatasetSource):
    if isinstance(source, FileSource):
        ref = {"path": source.path, "declaration": source.declaration}
        if source.rank_seed is not None:
            ref["rank_seed"] = source.rank_seed
        return ref
    if isinstance(source, SynthSpec):
        return {"synth": source.to_dict()}
    return {"inline": f"{len(source)} records"}


def write_outputs(result: ExperimentResult, out_dir: Union[str, Path]) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = result.spec

    raw_path = out / "raw.jsonl"
    with open(raw_path, "w", encoding="utf-8") as fh:
        for r in result.runs:
            fh.write(r.to_json_line() + "\n")

    summary_path = out / "summary.csv"
    write_summary(result.aggregates, summary_path)

    meta_path = out / "meta.json"
    meta = {
        "seed": spec.seed,
        "config_hash": spec_fingerprint(spec),
        "budgets": list(spec.budgets),
        "page_size": spec.api.page_size,
        "paging": spec.api.paging,
        "replicates": spec.replicates,
        "samplers": [s.display_name for s in spec.samplers],
        "metrics": list(spec.metrics),
        "dataset": _dataset_ref(spec.dataset),
    }
    paths = {"raw": raw_path, "summary": summary_path, "meta": meta_path}

    if spec.heatmap is not None:
        base = _materialize(spec.dataset)
        for t in spec.transforms:
            if t.kind in _PER_REPLICATE_KINDS and t.seed is None:
                continue  # replicate-specific noise has no single heatmap
            base = apply_transform(base, t, rng_seed=spec.seed)
        heatmap_path = out / "heatmap.csv"
        write_heatmap(base, spec.heatmap[0], spec.heatmap[1], heatmap_path)
        meta["heatmap"] = {"rows": spec.heatmap[0], "cols": spec.heatmap[1]}
        paths["heatmap"] = heatmap_path

    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths


def write_summary(aggregates: Sequence[AggregateRow], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sampler,budget,metric,mean,ci_low,ci_high\n")
        for row in aggregates:
            fh.write(
                f"{row.sampler},{row.budget},{row.metric},"
                f"{row.mean!r},{row.ci_low!r},{row.ci_high!r}\n"
            )


def read_summary(path: Union[str, Path]) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        expected = ["sampler", "budget", "metric", "mean", "ci_low", "ci_high"]
        if header != expected:
            raise HarnessError(f"{path}: unexpected summary header {header}")
        for line in fh:
            sampler, budget, metric, mean, lo, hi = line.rstrip("\n").split(",")
            rows.append({
                "sampler": sampler, "budget": int(budget), "metric": metric,
                "mean": float(mean), "ci_low": float(lo), "ci_high": float(hi),
            })
    return rows


def write_heatmap(dataset: Dataset, row_attr: str, col_attr: str,
                  path: Union[str, Path]) -> None:
    """Exact precision of every two-bound query over the chosen attribute pair,
    as a labeled delimited matrix; empty-match cells are NaN."""
    i = dataset.schema.index_of(row_attr)
    j = dataset.schema.index_of(col_attr)
    if i == j:
        raise HarnessError("heatmap attributes must differ")
    index = build_index(dataset)
    arity = dataset.schema.arity
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{row_attr}\\{col_attr}," + ",".join(dataset.schema.domains[j]) + "\n")
        for vi in dataset.schema.domains[i]:
            cells = []
            for vj in dataset.schema.domains[j]:
                slots: list = [None] * arity
                slots[i], slots[j] = vi, vj
                positions = index.match_positions(Query(tuple(slots)))
                if len(positions) == 0:
                    cells.append("nan")
                else:
                    p = float(dataset.target_mask[positions].sum()) / len(positions)
                    cells.append(repr(p))
            fh.write(f"{vi}," + ",".join(cells) + "\n")


# ---------------------------------------------------------------------------
# ablations
# ---------------------------------------------------------------------------

ABLATION_AXES = ("page-size", "attributes", "cardinality", "shuffle")
SUBSET_CAP = 20


@dataclass
class AblationResult:
    axis: str
    values: list
    results: dict  # axis value -> ExperimentResult (or list of, for subsets)
    combined: list[dict]  # flat rows for the combined table
    notes: dict = field(default_factory=dict)


def ablation(
    spec: ExperimentSpec,
    axis: str,
    values: Sequence,
    jobs: int = 1,
    out_dir: Optional[Union[str, Path]] = None,
) -> AblationResult:
    """Rerun the experiment along one ablation axis.

    page-size reruns at each page size and reports the percentage recall
    change between consecutive sizes (at the largest budget); attributes
    averages over same-size attribute subsets (capped at SUBSET_CAP random
    subsets, cap and seed recorded); cardinality merges every attribute down
    to each c; shuffle applies each ratio with per-replicate seeds.
    """
    if axis not in ABLATION_AXES:
        raise HarnessError(f"unknown ablation axis {axis!r}; expected one of {ABLATION_AXES}")
    if not values:
        raise HarnessError("ablation needs at least one axis value")

    handlers = {
        "page-size": _ablate_page_size,
        "attributes": _ablate_attribute_subsets,
        "cardinality": _ablate_cardinality,
        "shuffle": _ablate_shuffle,
    }
    result = handlers[axis](spec, list(values), jobs)
    if out_dir is not None:
        _write_ablation(result, out_dir)
    return result


def _ablate_page_size(spec: ExperimentSpec, values, jobs) -> AblationResult:
    sizes = [int(v) for v in values]
    if any(s < 1 for s in sizes):
        raise HarnessError("page sizes must be >= 1")
    results = {}
    for m in sizes:
        sub = replace(spec, api=replace(spec.api, page_size=m))
        results[m] = run_experiment(sub, jobs=jobs)
    combined = []
    budget = spec.max_budget
    for s in spec.samplers:
        name = s.display_name
        for prev, cur in zip(sizes, sizes[1:]):
            r_prev = results[prev].rows_for(name, "recall", budget).mean
            r_cur = results[cur].rows_for(name, "recall", budget).mean
            delta = float("nan") if r_prev == 0 else 100.0 * (r_cur - r_prev) / r_prev
            combined.append({
                "sampler": name, "budget": budget, "from_page_size": prev,
                "to_page_size": cur, "recall_from": r_prev, "recall_to": r_cur,
                "delta_recall_pct": delta,
            })
    return AblationResult("page-size", sizes, results, combined)


def _ablate_attribute_subsets(spec: ExperimentSpec, values, jobs) -> AblationResult:
    sizes = [int(v) for v in values]
    prefix, suffix = _split_transforms(spec.transforms)
    base = _materialize(spec.dataset)
    for t in prefix:
        base = apply_transform(base, t, rng_seed=spec.seed)
    names = base.schema.names
    if any(not 1 <= s <= len(names) for s in sizes):
        raise HarnessError(f"subset sizes must be in [1, {len(names)}]")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(9,)))
    results: dict = {}
    combined = []
    notes = {"subset_cap": SUBSET_CAP, "subset_seed": spec.seed}
    for s in sizes:
        all_subsets = list(itertools.combinations(names, s))
        if len(all_subsets) > SUBSET_CAP:
            chosen = rng.choice(len(all_subsets), size=SUBSET_CAP, replace=False)
            subsets = [all_subsets[int(k)] for k in sorted(chosen)]
        else:
            subsets = all_subsets
        per_subset = []
        for subset in subsets:
            t = TransformSpec(kind="attribute-subset", attributes=tuple(subset))
            sub_spec = replace(spec, dataset=base, transforms=(t,) + suffix)
            per_subset.append((subset, run_experiment(sub_spec, jobs=jobs)))
        results[s] = per_subset
        for sampler in spec.samplers:
            name = sampler.display_name
            for b in spec.budgets:
                for metric in spec.metrics:
                    pooled = [
                        r.metrics_by_budget[b][metric]
                        for _, res in per_subset
                        for r in res.runs
                        if r.sampler == name
                    ]
                    mean, sd, lo, hi = confidence_interval(pooled)
                    combined.append({
                        "sampler": name, "subset_size": s, "budget": b, "metric": metric,
                        "mean": mean, "ci_low": lo, "ci_high": hi,
                        "subsets_evaluated": len(per_subset),
                    })
    return AblationResult("attributes", sizes, results, combined, notes)


def _ablate_cardinality(spec: ExperimentSpec, values, jobs) -> AblationResult:
    cs = [int(v) for v in values]
    if any(c < 2 for c in cs):
        raise HarnessError("cardinality values must be >= 2")
    prefix, suffix = _split_transforms(spec.transforms)
    base = _materialize(spec.dataset)
    for t in prefix:
        base = apply_transform(base, t, rng_seed=spec.seed)
    results = {}
    combined = []
    for c in cs:
        # merge ranks values by target yield, so under per-replicate shuffles
        # it must run after them: keep merges on the per-replicate side
        transforms = suffix + tuple(
            TransformSpec(kind="cardinality-merge", attribute=name, c=c)
            for name, domain in zip(base.schema.names, base.schema.domains)
            if len(domain) > c
        )
        sub_spec = replace(spec, dataset=base, transforms=transforms)
        res = run_experiment(sub_spec, jobs=jobs)
        results[c] = res
        for row in res.aggregates:
            combined.append({
                "sampler": row.sampler, "cardinality": c, "budget": row.budget,
                "metric": row.metric, "mean": row.mean,
                "ci_low": row.ci_low, "ci_high": row.ci_high,
            })
    return AblationResult("cardinality", cs, results, combined)


def _ablate_shuffle(spec: ExperimentSpec, values, jobs) -> AblationResult:
    ratios = [float(v) for v in values]
    if any(not 0.0 <= r <= 1.0 for r in ratios):
        raise HarnessError("shuffle ratios must be in [0, 1]")
    results = {}
    combined = []
    for ratio in ratios:
        t = TransformSpec(kind="shuffle", ratio=ratio)  # seedless: per-replicate
        sub_spec = replace(spec, transforms=spec.transforms + (t,))
        res = run_experiment(sub_spec, jobs=jobs)
        results[ratio] = res
        for row in res.aggregates:
            combined.append({
                "sampler": row.sampler, "shuffle_ratio": ratio, "budget": row.budget,
                "metric": row.metric, "mean": row.mean,
                "ci_low": row.ci_low, "ci_high": row.ci_high,
            })
    return AblationResult("shuffle", ratios, results, combined)


def _write_ablation(result: AblationResult, out_dir: Union[str, Path]) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for value, res in result.results.items():
        tag = str(value).replace(".", "_")
        sub = out / f"{result.axis}-{tag}"
        if isinstance(res, ExperimentResult):
            write_outputs(res, sub)
        else:  # attribute subsets: list of (subset, result)
            sub.mkdir(parents=True, exist_ok=True)
            for subset, subset_res in res:
                write_outputs(subset_res, sub / "__".join(subset))
        paths[str(value)] = sub
    combined_path = out / "combined.csv"
    if result.combined:
        cols = list(result.combined[0].keys())
        with open(combined_path, "w", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            for row in result.combined:
                fh.write(",".join(_cell(row[c]) for c in cols) + "\n")
        paths["combined"] = combined_path
    if result.notes:
        notes_path = out / "notes.json"
        with open(notes_path, "w", encoding="utf-8") as fh:
            json.dump(result.notes, fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths["notes"] = notes_path
    return paths


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def default_jobs() -> int:
    env = os.environ.get("ATTRSEARCH_JOBS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)
