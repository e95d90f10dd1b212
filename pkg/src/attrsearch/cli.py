"""Command-line entry point: dataset tooling, experiments, ablations, reports.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.  Config and
dataset failures print one machine-parsable line to stderr:
``attrsearch: error: <message>``.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from pathlib import Path
from typing import Mapping, Optional

from .dataset import DatasetError, TransformSpec, load_dataset
from .harness import (
    ABLATION_AXES,
    ExperimentSpec,
    FileSource,
    HarnessError,
    ablation,
    default_jobs,
    read_summary,
    run_experiment,
    spec_fingerprint,
)
from .samplers import SamplerConfig, SamplerError
from .simapi import ApiConfig, ApiError
from .synth import SynthError, SynthSpec, write_files

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# experiment file parsing
# ---------------------------------------------------------------------------

_TOP_KEYS = {"dataset", "transforms", "api", "samplers", "budgets", "replicates",
             "seed", "metrics", "output_dir", "heatmap"}
_DATASET_KEYS = {"path", "declaration", "rank_seed", "synth"}
_API_KEYS = {"page_size", "paging", "report_match_count", "rng_seed"}
_SAMPLER_KEYS = {"kind", "epoch", "reward_mode", "generalize_prob", "smoothing",
                 "eq1_reward", "label"}


def _reject_unknown(mapping: Mapping, allowed: set, where: str) -> None:
    if not isinstance(mapping, Mapping):
        raise ConfigError(f"{where} must be a JSON object")
    extra = sorted(set(mapping) - allowed)
    if extra:
        raise ConfigError(f"unknown keys {extra} in {where}")


def parse_experiment_config(config: Mapping, base_dir: Path) -> tuple[ExperimentSpec, dict]:
    """Validate a declarative experiment config and build the resolved spec.

    Returns the spec plus the resolved plan (all defaults filled), which
    round-trips through this parser unchanged.
    """
    if not isinstance(config, Mapping):
        raise ConfigError("experiment config must be a JSON object")
    _reject_unknown(config, _TOP_KEYS, "experiment config")
    for key in ("dataset", "api", "samplers", "budgets"):
        if key not in config:
            raise ConfigError(f"experiment config missing required key {key!r}")

    ds = config["dataset"]
    _reject_unknown(ds, _DATASET_KEYS, "dataset")
    if "synth" in ds:
        if "path" in ds or "declaration" in ds:
            raise ConfigError("dataset: 'synth' excludes 'path'/'declaration'")
        source = SynthSpec.from_dict(ds["synth"])
    else:
        if "path" not in ds or "declaration" not in ds:
            raise ConfigError("dataset needs 'path' and 'declaration' (or 'synth')")
        source = FileSource(
            path=str(base_dir / ds["path"]),
            declaration=str(base_dir / ds["declaration"]),
            rank_seed=ds.get("rank_seed"),
        )

    api_cfg = config["api"]
    _reject_unknown(api_cfg, _API_KEYS, "api")
    if "page_size" not in api_cfg:
        raise ConfigError("api needs 'page_size'")
    api = ApiConfig(
        page_size=int(api_cfg["page_size"]),
        paging=api_cfg.get("paging", "without_replacement"),
        report_match_count=bool(api_cfg.get("report_match_count", True)),
        rng_seed=int(api_cfg.get("rng_seed", 0)),
    )

    if not isinstance(config["samplers"], (list, tuple)):
        raise ConfigError("'samplers' must be a list")
    samplers = []
    for k, entry in enumerate(config["samplers"]):
        _reject_unknown(entry, _SAMPLER_KEYS, f"samplers[{k}]")
        if "kind" not in entry:
            raise ConfigError(f"samplers[{k}] needs 'kind'")
        samplers.append(SamplerConfig(
            kind=entry["kind"],
            epoch=int(entry.get("epoch", 10)),
            reward_mode=entry.get("reward_mode"),
            generalize_prob=float(entry.get("generalize_prob", 0.5)),
            smoothing=float(entry.get("smoothing", 1.0)),
            eq1_reward=bool(entry.get("eq1_reward", False)),
            label=entry.get("label"),
        ))

    transforms = tuple(
        TransformSpec.from_dict(t) for t in config.get("transforms", [])
    )
    heatmap = config.get("heatmap")
    if heatmap is not None:
        if not isinstance(heatmap, (list, tuple)) or len(heatmap) != 2:
            raise ConfigError("heatmap must name exactly two attributes")
        heatmap = (heatmap[0], heatmap[1])

    spec = ExperimentSpec(
        dataset=source,
        samplers=tuple(samplers),
        budgets=tuple(int(b) for b in config["budgets"]),
        api=api,
        replicates=int(config.get("replicates", 100)),
        seed=int(config.get("seed", 0)),
        transforms=transforms,
        metrics=tuple(config.get("metrics", ("recall", "normalized_recall", "throughput_rate"))),
        heatmap=heatmap,
    )
    plan = resolved_plan(spec, config.get("output_dir"))
    return spec, plan


def resolved_plan(spec: ExperimentSpec, output_dir: Optional[str]) -> dict:
    if isinstance(spec.dataset, FileSource):
        ds: dict = {"path": spec.dataset.path, "declaration": spec.dataset.declaration}
        if spec.dataset.rank_seed is not None:
            ds["rank_seed"] = spec.dataset.rank_seed
    elif isinstance(spec.dataset, SynthSpec):
        ds = {"synth": spec.dataset.to_dict()}
    else:
        ds = {"inline": True}
    plan = {
        "dataset": ds,
        "transforms": [t.to_dict() for t in spec.transforms],
        "api": {
            "page_size": spec.api.page_size,
            "paging": spec.api.paging,
            "report_match_count": spec.api.report_match_count,
            "rng_seed": spec.api.rng_seed,
        },
        "samplers": [_sampler_plan(s) for s in spec.samplers],
        "budgets": list(spec.budgets),
        "replicates": spec.replicates,
        "seed": spec.seed,
        "metrics": list(spec.metrics),
        "config_hash": spec_fingerprint(spec),
    }
    if spec.heatmap:
        plan["heatmap"] = list(spec.heatmap)
    if output_dir:
        plan["output_dir"] = output_dir
    return plan


def _sampler_plan(s: SamplerConfig) -> dict:
    out = {"kind": s.kind, "epoch": s.epoch}
    if s.reward_mode:
        out["reward_mode"] = s.reward_mode
    if s.kind == "rw":
        out["generalize_prob"] = s.generalize_prob
    if s.kind == "cb":
        out["smoothing"] = s.smoothing
    if s.eq1_reward:
        out["eq1_reward"] = True
    if s.label:
        out["label"] = s.label
    return out


def _load_config_file(path: str) -> tuple[ExperimentSpec, dict]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(p, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return parse_experiment_config(raw, p.parent)


def _output_dir(plan: dict, override: Optional[str]) -> Path:
    env = os.environ.get("ATTRSEARCH_OUTPUT_DIR")
    chosen = override or env or plan.get("output_dir") or "results"
    return Path(chosen)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    spec, plan = _load_config_file(args.config)
    if args.dry_run:
        print(json.dumps(plan, indent=2, sort_keys=True))
        return 0
    out = _output_dir(plan, args.output_dir)
    result = run_experiment(spec, jobs=args.jobs, out_dir=out)
    _print_summary(result)
    print(f"wrote {out / 'raw.jsonl'} and {out / 'summary.csv'}")
    return 0


def _print_summary(result) -> None:
    print("sampler,budget,metric,mean,ci_low,ci_high")
    for row in result.aggregates:
        print(f"{row.sampler},{row.budget},{row.metric},"
              f"{row.mean:.6g},{row.ci_low:.6g},{row.ci_high:.6g}")


def cmd_ablate(args) -> int:
    spec, plan = _load_config_file(args.config)
    values = [v for v in args.values.split(",") if v]
    if not values:
        raise ConfigError("--values must list at least one value")
    if args.axis == "shuffle":
        parsed = [float(v) for v in values]
    else:
        parsed = [int(v) for v in values]
    out = _output_dir(plan, args.output_dir) / f"ablate-{args.axis}"
    result = ablation(spec, args.axis, parsed, jobs=args.jobs, out_dir=out)
    if result.combined:
        cols = list(result.combined[0].keys())
        print(",".join(cols))
        for row in result.combined:
            print(",".join(str(row[c]) for c in cols))
    print(f"wrote {out}")
    return 0


def cmd_gen_synth(args) -> int:
    cards = tuple(int(c) for c in args.cardinalities.split(","))
    if args.attributes is not None and args.attributes != len(cards):
        raise ConfigError(
            f"--attributes {args.attributes} disagrees with {len(cards)} cardinalities"
        )
    cluster = None
    if args.cluster_precisions:
        cluster = tuple(float(p) for p in args.cluster_precisions.split(","))
    spec = SynthSpec(
        cardinalities=cards,
        records=args.records,
        target_fraction=args.target_fraction,
        correlation=args.correlation,
        seed=args.seed,
        cluster_precisions=cluster,
        hot_bonus=args.hot_bonus,
    )
    csv_path, decl_path = write_files(spec, args.out, stem=args.stem)
    print(f"wrote {csv_path} and {decl_path}")
    return 0


def cmd_validate_dataset(args) -> int:
    ds = load_dataset(args.data, args.declaration)
    print(f"records: {len(ds)}")
    print(f"targets: {ds.target_count} ({100.0 * ds.target_count / max(len(ds), 1):.2f}%)")
    if ds.dropped_rows:
        print(f"dropped rows with missing values: {ds.dropped_rows}")
    for name, domain in zip(ds.schema.names, ds.schema.domains):
        print(f"attribute {name}: cardinality {len(domain)}")
    return 0


def cmd_report(args) -> int:
    results_dir = Path(args.results_dir)
    summary_path = results_dir / "summary.csv"
    meta_path = results_dir / "meta.json"
    if not summary_path.exists() or not meta_path.exists():
        raise ConfigError(f"{results_dir}: not a results directory (need summary.csv and meta.json)")
    rows = read_summary(summary_path)
    if not rows:
        raise ConfigError(f"{summary_path}: no aggregate rows")
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)

    metric = args.metric
    available = {r["metric"] for r in rows}
    if metric not in available:
        raise ConfigError(f"metric {metric!r} not in results (have {sorted(available)})")
    budget = max(r["budget"] for r in rows)
    finals = {r["sampler"]: r for r in rows if r["metric"] == metric and r["budget"] == budget}

    print(f"final {metric} at budget {budget}:")
    ranked = sorted(finals.values(), key=lambda r: -r["mean"])
    for r in ranked:
        print(f"  {r['sampler']}: {r['mean']:.6g}  [{r['ci_low']:.6g}, {r['ci_high']:.6g}]")
    print("pairwise improvement (% of row sampler over column sampler):")
    for a in ranked:
        for b in ranked:
            if a["sampler"] == b["sampler"] or b["mean"] <= 0:
                continue
            gain = 100.0 * (a["mean"] - b["mean"]) / b["mean"]
            print(f"  {a['sampler']} vs {b['sampler']}: {gain:+.2f}%")

    bundle = Path(args.out) if args.out else results_dir / "bundle"
    bundle.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(summary_path, bundle / "series.csv")
    figures = [{
        "kind": "curves",
        "series": "series.csv",
        "metric": metric,
        "x_label": "budget (API calls)",
        "y_label": metric.replace("_", " "),
        "samplers": sorted(finals),
        "title": f"{metric.replace('_', ' ')} vs budget",
    }]
    heatmap_src = results_dir / "heatmap.csv"
    if heatmap_src.exists():
        shutil.copyfile(heatmap_src, bundle / "heatmap.csv")
        hm = meta.get("heatmap", {})
        figures.append({
            "kind": "heatmap",
            "matrix": "heatmap.csv",
            "x_label": hm.get("cols", "attribute 2"),
            "y_label": hm.get("rows", "attribute 1"),
            "title": "true query precision",
        })
    manifest = {
        "figures": figures,
        "seed": meta.get("seed"),
        "config_hash": meta.get("config_hash"),
    }
    with open(bundle / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote plot bundle to {bundle}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attrsearch",
        description="Hidden-population sampling over attributed query APIs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--dry-run", action="store_true",
                       help="validate and print the resolved plan, run nothing")
    p_run.add_argument("--jobs", type=int, default=default_jobs())
    p_run.add_argument("--output-dir", default=None)
    p_run.set_defaults(func=cmd_run)

    p_ab = sub.add_parser("ablate", help="run one ablation axis")
    p_ab.add_argument("config")
    p_ab.add_argument("--axis", required=True, choices=ABLATION_AXES)
    p_ab.add_argument("--values", required=True,
                      help="comma-separated axis values (e.g. 5,10 or 0,0.5,1)")
    p_ab.add_argument("--jobs", type=int, default=default_jobs())
    p_ab.add_argument("--output-dir", default=None)
    p_ab.set_defaults(func=cmd_ablate)

    p_gen = sub.add_parser("gen-synth", help="generate a synthetic dataset")
    p_gen.add_argument("--cardinalities", required=True,
                       help="comma-separated per-attribute cardinalities")
    p_gen.add_argument("--attributes", type=int, default=None,
                       help="attribute count (checked against --cardinalities)")
    p_gen.add_argument("--records", type=int, required=True)
    p_gen.add_argument("--target-fraction", type=float, default=0.2)
    p_gen.add_argument("--correlation", type=float, default=0.0)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--cluster-precisions", default=None,
                       help="per-first-attribute-value precision levels (clustered mode)")
    p_gen.add_argument("--hot-bonus", type=float, default=0.0)
    p_gen.add_argument("--out", default=".")
    p_gen.add_argument("--stem", default="synth")
    p_gen.set_defaults(func=cmd_gen_synth)

    p_rep = sub.add_parser("report", help="summarize results and export a plot bundle")
    p_rep.add_argument("results_dir")
    p_rep.add_argument("--metric", default="normalized_recall")
    p_rep.add_argument("--out", default=None, help="bundle output directory")
    p_rep.set_defaults(func=cmd_report)

    p_val = sub.add_parser("validate-dataset", help="load and summarize a dataset")
    p_val.add_argument("data")
    p_val.add_argument("declaration")
    p_val.set_defaults(func=cmd_validate_dataset)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError, HarnessError, SamplerError, ApiError,
            SynthError, FileNotFoundError) as e:
        msg = str(e)
        if isinstance(e, FileNotFoundError):
            msg = f"file not found: {e.filename}"
        print(f"attrsearch: error: {msg}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as e:  # noqa: BLE001 - single boundary for runtime failures
        print(f"attrsearch: error: {type(e).__name__}: {e}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
