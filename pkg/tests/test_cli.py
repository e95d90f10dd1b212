import json
import shutil
from pathlib import Path

import pytest

from attrsearch.cli import main, parse_experiment_config

DATA = Path(__file__).parent / "data"


def write_config(tmp_path, **overrides):
    config = {
        "dataset": {"path": "toy.csv", "declaration": "toy.decl.json"},
        "api": {"page_size": 4, "paging": "without_replacement"},
        "samplers": [{"kind": "uni"}, {"kind": "dt-tmp", "epoch": 5}],
        "budgets": [2, 5],
        "replicates": 2,
        "seed": 3,
        "output_dir": str(tmp_path / "out"),
    }
    config.update(overrides)
    shutil.copyfile(DATA / "toy.csv", tmp_path / "toy.csv")
    shutil.copyfile(DATA / "toy.decl.json", tmp_path / "toy.decl.json")
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(config))
    return path


def test_run_happy_path(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["run", str(cfg), "--jobs", "1"]) == 0
    out = tmp_path / "out"
    assert (out / "raw.jsonl").exists()
    assert (out / "summary.csv").exists()
    printed = capsys.readouterr().out
    assert "sampler,budget,metric" in printed


def test_run_missing_dataset(tmp_path, capsys):
    cfg = write_config(tmp_path)
    (tmp_path / "toy.csv").unlink()
    code = main(["run", str(cfg), "--jobs", "1"])
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("attrsearch: error:")
    assert "toy.csv" in err


def test_dry_run_round_trip(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["run", str(cfg), "--dry-run"]) == 0
    plan = json.loads(capsys.readouterr().out)
    # the printed plan reparses to an identical resolved plan
    spec, plan2 = parse_experiment_config(
        {k: v for k, v in plan.items() if k not in ("config_hash",)}, tmp_path
    )
    plan2.pop("output_dir", None)
    plan.pop("output_dir", None)
    assert plan2 == plan
    out = tmp_path / "out"
    assert not out.exists()  # dry run executes nothing


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, bogus_key=1)
    assert main(["run", str(cfg)]) == 2
    assert "bogus_key" in capsys.readouterr().err


def test_unknown_sampler_key_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, samplers=[{"kind": "uni", "zap": 1}])
    assert main(["run", str(cfg)]) == 2
    assert "zap" in capsys.readouterr().err


def test_ablate_cardinality_precondition(tmp_path, capsys):
    cfg = write_config(tmp_path)
    code = main(["ablate", str(cfg), "--axis", "cardinality", "--values", "1", "--jobs", "1"])
    assert code == 2
    assert ">= 2" in capsys.readouterr().err


def test_ablate_page_size(tmp_path, capsys):
    cfg = write_config(tmp_path, samplers=[{"kind": "uni"}], replicates=2)
    code = main(["ablate", str(cfg), "--axis", "page-size", "--values", "2,4", "--jobs", "1"])
    assert code == 0
    printed = capsys.readouterr().out
    assert "delta_recall_pct" in printed
    assert (tmp_path / "out" / "ablate-page-size" / "combined.csv").exists()


def test_ablate_shuffle_fanout(tmp_path, capsys):
    cfg = write_config(tmp_path, samplers=[{"kind": "uni"}])
    code = main(["ablate", str(cfg), "--axis", "shuffle", "--values", "0,0.5,1", "--jobs", "1"])
    assert code == 0
    combined = (tmp_path / "out" / "ablate-shuffle" / "combined.csv").read_text()
    assert combined.count("\n") > 3


def test_gen_synth_deterministic(tmp_path):
    args = ["gen-synth", "--cardinalities", "2,2", "--records", "8",
            "--target-fraction", "0.5", "--correlation", "1.0", "--seed", "4"]
    assert main(args + ["--out", str(tmp_path / "one")]) == 0
    assert main(args + ["--out", str(tmp_path / "two")]) == 0
    for name in ("synth.csv", "synth.decl.json"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_gen_synth_reproduces_toy_family(tmp_path):
    from attrsearch.dataset import load_dataset
    from attrsearch.harness import true_precision_map
    from attrsearch.simapi import build_index, enumerate_nonempty_queries

    assert main(["gen-synth", "--cardinalities", "2,2", "--records", "8",
                 "--target-fraction", "0.5", "--correlation", "1.0",
                 "--seed", "4", "--out", str(tmp_path)]) == 0
    ds = load_dataset(tmp_path / "synth.csv", tmp_path / "synth.decl.json")
    assert len(ds.records) == 8
    assert ds.target_count == 4
    index = build_index(ds)
    pmap = true_precision_map(index, enumerate_nonempty_queries(index))
    assert max(p for q, p in pmap.items() if q.is_fully_bound()) == 1.0


def test_gen_synth_null_correlation_flat_precisions(tmp_path):
    from attrsearch.dataset import load_dataset
    from attrsearch.harness import true_precision_map
    from attrsearch.simapi import build_index, enumerate_nonempty_queries

    assert main(["gen-synth", "--cardinalities", "3,3", "--records", "20000",
                 "--target-fraction", "0.25", "--correlation", "0.0",
                 "--seed", "9", "--out", str(tmp_path)]) == 0
    ds = load_dataset(tmp_path / "synth.csv", tmp_path / "synth.decl.json")
    assert ds.target_count == 5000
    index = build_index(ds)
    pmap = true_precision_map(index, enumerate_nonempty_queries(index))
    for q, p in pmap.items():
        assert abs(p - 0.25) < 0.03  # i.i.d. targets: every precision near base rate


def test_gen_synth_infeasible_fraction(tmp_path, capsys):
    code = main(["gen-synth", "--cardinalities", "2", "--records", "4",
                 "--target-fraction", "2.0", "--out", str(tmp_path)])
    assert code == 2


def test_validate_dataset(tmp_path, capsys):
    assert main(["validate-dataset", str(DATA / "toy.csv"), str(DATA / "toy.decl.json")]) == 0
    out = capsys.readouterr().out
    assert "records: 8" in out
    assert "targets: 4 (50.00%)" in out
    assert main(["validate-dataset", str(tmp_path / "nope.csv"),
                 str(DATA / "toy.decl.json")]) == 2


def test_report_and_bundle(tmp_path, capsys):
    cfg = write_config(tmp_path, heatmap=["A1", "A2"])
    assert main(["run", str(cfg), "--jobs", "1"]) == 0
    capsys.readouterr()
    out = tmp_path / "out"
    assert main(["report", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "final normalized_recall at budget 5" in printed
    assert "%" in printed
    bundle = out / "bundle"
    manifest = json.loads((bundle / "manifest.json").read_text())
    kinds = {f["kind"] for f in manifest["figures"]}
    assert kinds == {"curves", "heatmap"}
    assert (bundle / "series.csv").exists()
    assert (bundle / "heatmap.csv").exists()
    first = {p.name: p.read_bytes() for p in bundle.iterdir()}
    assert main(["report", str(out)]) == 0  # idempotent regeneration
    second = {p.name: p.read_bytes() for p in bundle.iterdir()}
    assert first == second


def test_report_empty_dir(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 2


def test_output_dir_env_override(tmp_path, monkeypatch, capsys):
    cfg = write_config(tmp_path)
    override = tmp_path / "elsewhere"
    monkeypatch.setenv("ATTRSEARCH_OUTPUT_DIR", str(override))
    assert main(["run", str(cfg), "--jobs", "1"]) == 0
    assert (override / "summary.csv").exists()
    assert not (tmp_path / "out").exists()


def test_jobs_env_default(monkeypatch):
    from attrsearch.harness import default_jobs

    monkeypatch.setenv("ATTRSEARCH_JOBS", "3")
    assert default_jobs() == 3


def test_rerun_outputs_bit_identical(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["run", str(cfg), "--jobs", "1"]) == 0
    out = tmp_path / "out"
    first = {p.name: p.read_bytes() for p in out.iterdir() if p.is_file()}
    assert main(["run", str(cfg), "--jobs", "2"]) == 0
    second = {p.name: p.read_bytes() for p in out.iterdir() if p.is_file()}
    assert first == second
