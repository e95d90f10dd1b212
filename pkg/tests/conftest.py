import itertools
from pathlib import Path

import numpy as np
import pytest

from attrsearch.dataset import AttributeSchema, Dataset, EntityRecord, HiddenPropertySpec
from attrsearch.query import Query, matches

DATA_DIR = Path(__file__).parent / "data"

# 8-row toy population used throughout: A1 in {a,b}, A2 in {x,y},
# targets are ids {1,3,4,8} (income > 50).
TOY_ROWS = [
    (1, ("a", "x"), 80.0),
    (2, ("a", "x"), 20.0),
    (3, ("a", "y"), 60.0),
    (4, ("a", "y"), 55.0),
    (5, ("b", "x"), 10.0),
    (6, ("b", "y"), 30.0),
    (7, ("b", "x"), 40.0),
    (8, ("b", "y"), 90.0),
]
TOY_TARGET_IDS = {1, 3, 4, 8}


def make_toy_dataset() -> Dataset:
    schema = AttributeSchema(("A1", "A2"), (("a", "b"), ("x", "y")))
    records = [EntityRecord(i, values, {"income": income}) for i, values, income in TOY_ROWS]
    spec = HiddenPropertySpec({"op": ">", "field": "income", "value": 50})
    return Dataset(schema, records, spec)


@pytest.fixture
def toy_dataset() -> Dataset:
    return make_toy_dataset()


@pytest.fixture
def toy_files():
    return DATA_DIR / "toy.csv", DATA_DIR / "toy.decl.json"


# ---------------------------------------------------------------------------
# independent oracles (brute force, no shared code paths with the library)
# ---------------------------------------------------------------------------


def brute_force_match_ids(dataset: Dataset, query: Query) -> set:
    out = set()
    for r in dataset.records:
        ok = all(s is None or r.values[i] == s for i, s in enumerate(query.slots))
        if ok:
            out.add(r.id)
    return out


def brute_force_nonempty(dataset: Dataset) -> set:
    """All syntactic queries with >= 1 match, by exhaustive slot enumeration."""
    choices = [(None, *dom) for dom in dataset.schema.domains]
    out = set()
    for slots in itertools.product(*choices):
        q = Query(slots)
        if brute_force_match_ids(dataset, q):
            out.add(q)
    return out


def random_dataset(rng: np.random.Generator, max_attrs=4, max_card=5, max_rows=60) -> Dataset:
    arity = int(rng.integers(1, max_attrs + 1))
    cards = [int(rng.integers(1, max_card + 1)) for _ in range(arity)]
    schema = AttributeSchema(
        tuple(f"A{i}" for i in range(arity)),
        tuple(tuple(f"v{j}" for j in range(c)) for c in cards),
    )
    n = int(rng.integers(1, max_rows + 1))
    records = []
    for i in range(n):
        values = tuple(f"v{int(rng.integers(0, c))}" for c in cards)
        records.append(EntityRecord(i + 1, values, {"hit": float(rng.integers(0, 2))}))
    spec = HiddenPropertySpec({"op": "=", "field": "hit", "value": 1})
    return Dataset(schema, records, spec)
