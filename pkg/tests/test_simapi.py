import json

import numpy as np
import pytest

from attrsearch.dataset import Dataset
from attrsearch.query import Query, matches, root_query
from attrsearch.samplers import unique_draw_factor
from attrsearch.simapi import (
    ApiConfig,
    ApiError,
    BudgetExhausted,
    BudgetLedger,
    SimulatedApi,
    build_index,
    enumerate_nonempty_queries,
    sample_without_replacement,
)

from conftest import brute_force_match_ids, brute_force_nonempty, make_toy_dataset, random_dataset

Q_ROOT = root_query(2)
Q_A = Query(("a", None))
Q_AY = Query(("a", "y"))
Q_BX = Query(("b", "x"))


def drop_entities(dataset: Dataset, ids) -> Dataset:
    records = [r for r in dataset.records if r.id not in ids]
    return Dataset(dataset.schema, records, dataset.target_spec)


def test_build_index_posting_lists(toy_dataset):
    index = build_index(toy_dataset)
    assert set(index.posting_ids(0, "a")) == {1, 2, 3, 4}
    assert index.match_count(Q_AY) == 2
    assert index.match_count(Q_ROOT) == 8
    assert set(index.match_ids(Q_AY)) == {3, 4}


def test_match_positions_agree_with_brute_force():
    rng = np.random.default_rng(17)
    for _ in range(20):
        ds = random_dataset(rng)
        index = build_index(ds)
        for q in brute_force_nonempty(ds):
            assert set(index.match_ids(q)) == brute_force_match_ids(ds, q)


def test_execute_without_replacement_returns_all(toy_dataset):
    api = SimulatedApi(toy_dataset, ApiConfig(page_size=10, paging="without_replacement"))
    ledger = BudgetLedger(5)
    resp = api.execute(Q_A, ledger)
    assert sorted(e.id for e in resp.entities) == [1, 2, 3, 4]
    assert resp.match_count == 4
    assert ledger.calls_made == 1


def test_execute_empty_match_set_costs_budget(toy_dataset):
    gap = drop_entities(toy_dataset, {5, 7})  # (b, x) now empty
    api = SimulatedApi(gap, ApiConfig(page_size=10, paging="without_replacement"))
    ledger = BudgetLedger(2)
    resp = api.execute(Q_BX, ledger)
    assert resp.entities == []
    assert resp.match_count == 0
    assert ledger.calls_made == 1


def test_execute_with_replacement_singleton(toy_dataset):
    solo = drop_entities(toy_dataset, {7})  # (b, x) matches only entity 5
    api = SimulatedApi(solo, ApiConfig(page_size=10, paging="with_replacement"))
    resp = api.execute(Q_BX, BudgetLedger(1))
    assert [e.id for e in resp.entities] == [5] * 10


def test_budget_exhaustion(toy_dataset):
    api = SimulatedApi(toy_dataset, ApiConfig(page_size=2))
    ledger = BudgetLedger(3)
    for _ in range(3):
        api.execute(Q_ROOT, ledger)
    assert ledger.calls_made == 3
    with pytest.raises(BudgetExhausted):
        api.execute(Q_ROOT, ledger)
    assert ledger.calls_made == 3
    assert ledger.calls_by_query[Q_ROOT] == 3


def test_returned_entities_always_match_query():
    rng = np.random.default_rng(5)
    for _ in range(10):
        ds = random_dataset(rng, max_rows=30)
        for paging in ("with_replacement", "without_replacement"):
            api = SimulatedApi(ds, ApiConfig(page_size=4, paging=paging, rng_seed=1))
            ledger = BudgetLedger(1000)
            for q in list(brute_force_nonempty(ds))[:10]:
                resp = api.execute(q, ledger)
                for e in resp.entities:
                    assert matches(q, e.values)
                assert len(resp.entities) <= 4


def test_with_replacement_uniformity_chi_squared(toy_dataset):
    api = SimulatedApi(toy_dataset, ApiConfig(page_size=10, paging="with_replacement", rng_seed=3))
    ledger = BudgetLedger(4000)
    counts = {r.id: 0 for r in toy_dataset.records}
    for _ in range(4000):
        for e in api.execute(Q_ROOT, ledger).entities:
            counts[e.id] += 1
    total = sum(counts.values())
    assert total == 40000
    expected = total / 8
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2 < 30  # df=7; far above any plausible uniform fluctuation


def test_without_replacement_page_is_distinct(toy_dataset):
    api = SimulatedApi(toy_dataset, ApiConfig(page_size=6, paging="without_replacement", rng_seed=8))
    ledger = BudgetLedger(200)
    for _ in range(200):
        page = [e.id for e in api.execute(Q_ROOT, ledger).entities]
        assert len(page) == len(set(page)) == 6


def test_fixed_ranking_pages_concatenate_exactly(toy_dataset):
    ds = toy_dataset.with_random_rank(seed=42)
    api = SimulatedApi(ds, ApiConfig(page_size=3, paging="fixed_ranking"))
    ledger = BudgetLedger(10)
    seen, token = [], None
    while True:
        resp = api.execute(Q_A, ledger, page_token=token)
        seen.extend(e.id for e in resp.entities)
        token = resp.next_page_token
        if token is None:
            break
    rank_order = [i for i in ds.rank if i in {1, 2, 3, 4}]
    assert seen == rank_order  # no duplicates, no omissions, rank order
    assert len(seen) == 4


def test_fixed_ranking_requires_rank(toy_dataset):
    with pytest.raises(ApiError, match="rank"):
        SimulatedApi(toy_dataset, ApiConfig(page_size=3, paging="fixed_ranking"))


def test_fixed_ranking_token_validation(toy_dataset):
    ds = toy_dataset.with_random_rank(seed=1)
    api = SimulatedApi(ds, ApiConfig(page_size=2, paging="fixed_ranking"))
    ledger = BudgetLedger(10)
    resp = api.execute(Q_A, ledger)
    with pytest.raises(ApiError, match="stale"):
        api.execute(Q_ROOT, ledger, page_token=resp.next_page_token)
    with pytest.raises(ApiError, match="invalid"):
        api.execute(Q_A, ledger, page_token="garbage")


def test_report_match_count_flag(toy_dataset):
    api = SimulatedApi(toy_dataset, ApiConfig(page_size=2, report_match_count=False))
    resp = api.execute(Q_ROOT, BudgetLedger(1))
    assert resp.match_count is None


def test_enumerate_nonempty_toy(toy_dataset):
    index = build_index(toy_dataset)
    got = enumerate_nonempty_queries(index)
    expected = brute_force_nonempty(toy_dataset)
    assert set(got) == expected
    assert len(got) == len(expected) == 9  # root + 4 single-attribute + 4 fully bound
    assert len(got) == len(set(got))  # deterministic, no duplicates
    assert got == enumerate_nonempty_queries(index)  # deterministic order


def test_enumerate_nonempty_random_matches_brute_force():
    rng = np.random.default_rng(29)
    for _ in range(15):
        ds = random_dataset(rng, max_attrs=3, max_card=4, max_rows=25)
        assert set(enumerate_nonempty_queries(build_index(ds))) == brute_force_nonempty(ds)


def test_enumerate_minimal_schema():
    from attrsearch.dataset import AttributeSchema, EntityRecord, HiddenPropertySpec

    schema = AttributeSchema(("A",), (("v",),))
    ds = Dataset(schema, [EntityRecord(1, ("v",), {})], HiddenPropertySpec({"op": "true"}))
    got = enumerate_nonempty_queries(build_index(ds))
    assert set(got) == {Query((None,)), Query(("v",))}


def test_enumerate_empty_dataset(toy_dataset):
    empty = drop_entities(toy_dataset, {r.id for r in toy_dataset.records})
    assert enumerate_nonempty_queries(build_index(empty)) == []


def test_enumerate_overflow_guard(toy_dataset):
    with pytest.raises(ApiError, match="cap"):
        enumerate_nonempty_queries(build_index(toy_dataset), cap=4)


def test_expected_distinct_entities_monte_carlo(toy_dataset):
    # Mean distinct entities per with-replacement page matches N(1-(1-1/N)^m).
    api = SimulatedApi(toy_dataset, ApiConfig(page_size=5, paging="with_replacement", rng_seed=7))
    ledger = BudgetLedger(20000)
    distinct = [
        len({e.id for e in api.execute(Q_ROOT, ledger).entities}) for _ in range(20000)
    ]
    predicted = unique_draw_factor(8, 5)
    assert abs(np.mean(distinct) - predicted) / predicted < 0.01


def test_sample_without_replacement_helper():
    rng = np.random.default_rng(0)
    for n, k in [(10, 0), (10, 3), (10, 9), (10, 10), (5, 5), (1000, 4)]:
        out = sample_without_replacement(rng, n, k)
        assert len(out) == min(k, n)
        assert len(set(out.tolist())) == len(out)
        assert all(0 <= v < n for v in out.tolist())


def test_trace_log(toy_dataset, tmp_path):
    trace: list = []
    api = SimulatedApi(toy_dataset, ApiConfig(page_size=10), trace=trace)
    ledger = BudgetLedger(2)
    api.execute(Q_AY, ledger)
    api.execute(Q_A, ledger)
    assert trace[0]["call"] == 1 and trace[0]["query"] == "A1=a&A2=y"
    assert trace[0]["returned"] == 2 and trace[0]["targets"] == 2
    assert trace[1]["returned"] == 4 and trace[1]["targets"] == 3
    path = tmp_path / "trace.jsonl"
    api.write_trace(path)
    lines = path.read_text().strip().split("\n")
    assert [json.loads(l)["call"] for l in lines] == [1, 2]


def test_page_size_validation():
    with pytest.raises(ApiError):
        ApiConfig(page_size=0)
    with pytest.raises(ApiError):
        ApiConfig(page_size=5, paging="teleport")
