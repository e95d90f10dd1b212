import itertools

import numpy as np
import pytest

from attrsearch.query import (
    Query,
    QueryRelation,
    format_query,
    generalizations,
    is_generalization,
    lattice_neighbors,
    matches,
    parse_query,
    relation,
    root_query,
    specialize,
    strict_generalizations,
    subqueries_of_values,
)

from conftest import brute_force_match_ids, random_dataset


Q_ROOT = root_query(2)
Q_A = Query(("a", None))
Q_AY = Query(("a", "y"))
Q_BY = Query(("b", "y"))


def test_matches_examples(toy_dataset):
    e3 = toy_dataset.records[2]
    assert e3.id == 3 and e3.values == ("a", "y")
    assert matches(Q_A, e3.values) is True
    assert matches(Query(("a", "x")), e3.values) is False
    for r in toy_dataset.records:
        assert matches(Q_ROOT, r.values) is True


def test_matches_schema_mismatch():
    with pytest.raises(ValueError):
        matches(Q_A, ("a", "y", "z"))


def test_is_generalization_examples():
    assert is_generalization(Q_A, Q_AY) is True
    assert is_generalization(Q_A, Q_BY) is False
    for q in (Q_ROOT, Q_A, Q_AY, Q_BY):
        assert is_generalization(Q_ROOT, q) is True
        assert is_generalization(q, q) is True  # reflexive


def test_relation_enum():
    assert relation(Q_A, Q_A) is QueryRelation.EQUAL
    assert relation(Q_A, Q_AY) is QueryRelation.GENERALIZES
    assert relation(Q_AY, Q_A) is QueryRelation.SPECIALIZES
    assert relation(Q_AY, Query((None, "x"))) is QueryRelation.INCOMPARABLE


def test_specialize_examples():
    assert specialize(Q_ROOT, 0, "a") == Q_A
    assert specialize(Q_A, 1, "y") == Q_AY
    assert specialize(Q_A, 1, "y").bound_count == Q_A.bound_count + 1
    with pytest.raises(ValueError):
        specialize(Q_AY, 1, "x")  # slot already bound
    with pytest.raises(IndexError):
        specialize(Q_A, 5, "y")


def test_lattice_neighbors():
    domains = (("a", "b"), ("x", "y"))
    assert set(generalizations(Q_AY)) == {Query((None, "y")), Q_A}
    assert generalizations(Q_ROOT) == []
    got = lattice_neighbors(Q_A, domains, "specialize", observed_values=((), ("x",)))
    assert got == [Query(("a", "x"))]
    full = lattice_neighbors(Q_ROOT, domains, "specialize")
    assert set(full) == {Query(("a", None)), Query(("b", None)),
                         Query((None, "x")), Query((None, "y"))}
    with pytest.raises(ValueError):
        lattice_neighbors(Q_A, domains, "sideways")


def test_serialization_round_trip():
    names = ("A1", "A2")
    domains = (("a", "b"), ("x", "y"))
    for q in (Q_ROOT, Q_A, Q_AY, Query((None, "x"))):
        text = format_query(q, names)
        assert parse_query(text, names, domains) == q
    assert format_query(Q_AY, names) == "A1=a&A2=y"
    assert format_query(Q_ROOT, names) == "A1=*&A2=*"
    with pytest.raises(ValueError):
        parse_query("A1=z&A2=*", names, domains)
    with pytest.raises(ValueError):
        parse_query("A2=x&A1=a", names, domains)


def test_subsumption_soundness_random():
    # is_generalization(q1, q2) implies match(q2) subset of match(q1),
    # exhaustively on random small datasets.
    rng = np.random.default_rng(11)
    for _ in range(25):
        ds = random_dataset(rng, max_attrs=3, max_card=3, max_rows=20)
        choices = [(None, *dom) for dom in ds.schema.domains]
        queries = [Query(s) for s in itertools.product(*choices)]
        for q1 in queries:
            m1 = brute_force_match_ids(ds, q1)
            for q2 in queries:
                if is_generalization(q1, q2):
                    assert brute_force_match_ids(ds, q2) <= m1


def test_partial_order_properties():
    rng = np.random.default_rng(7)
    domains = [("a", "b", "c"), ("x", "y"), ("p", "q", "r")]

    def random_query():
        slots = []
        for dom in domains:
            k = int(rng.integers(0, len(dom) + 1))
            slots.append(None if k == len(dom) else dom[k])
        return Query(tuple(slots))

    for _ in range(3000):
        q1, q2, q3 = random_query(), random_query(), random_query()
        if is_generalization(q1, q2) and is_generalization(q2, q1):
            assert q1 == q2  # antisymmetry
        if is_generalization(q1, q2) and is_generalization(q2, q3):
            assert is_generalization(q1, q3)  # transitivity
        assert is_generalization(q1, q1)  # reflexivity


def test_partition_property():
    # Children under one attribute partition the parent's match set.
    rng = np.random.default_rng(23)
    for _ in range(30):
        ds = random_dataset(rng, max_attrs=3, max_card=4, max_rows=40)
        choices = [(None, *dom) for dom in ds.schema.domains]
        for slots in itertools.product(*choices):
            q = Query(slots)
            parent_ids = brute_force_match_ids(ds, q)
            for i in q.wildcard_slots():
                children = [specialize(q, i, v) for v in ds.schema.domains[i]]
                child_sets = [brute_force_match_ids(ds, c) for c in children]
                for s1, s2 in itertools.combinations(child_sets, 2):
                    assert not (s1 & s2)
                assert set().union(*child_sets) == parent_ids


def test_subqueries_of_values():
    subs = list(subqueries_of_values(("a", "y")))
    assert len(subs) == 4
    assert set(subs) == {Q_ROOT, Q_A, Query((None, "y")), Q_AY}
    for q in subs:
        assert matches(q, ("a", "y"))


def test_strict_generalizations():
    got = set(strict_generalizations(Q_AY))
    assert got == {Q_ROOT, Q_A, Query((None, "y"))}
    assert set(strict_generalizations(Q_ROOT)) == set()
