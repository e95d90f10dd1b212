"""Simulated rate-limited, paginated query API over an entity dataset.

The simulator answers conjunctive attributed queries from an inverted index,
charges one budget unit per call (empty pages included), and supports three
paging modes: i.i.d. draws with replacement, per-call draws without
replacement, and a fixed global ranking walked via opaque page tokens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import Dataset, EntityRecord
from .query import Query

PAGING_WITH_REPLACEMENT = "with_replacement"
PAGING_WITHOUT_REPLACEMENT = "without_replacement"
PAGING_FIXED_RANKING = "fixed_ranking"
PAGING_MODES = (PAGING_WITH_REPLACEMENT, PAGING_WITHOUT_REPLACEMENT, PAGING_FIXED_RANKING)


class ApiError(Exception):
    """Configuration or protocol misuse of the simulated API."""


class BudgetExhausted(ApiError):
    """Raised when a call is attempted past the call budget."""


@dataclass(frozen=True)
class ApiConfig:
    page_size: int
    paging: str = PAGING_WITHOUT_REPLACEMENT
    report_match_count: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if self.page_size < 1:
            raise ApiError(f"page_size must be >= 1, got {self.page_size}")
        if self.paging not in PAGING_MODES:
            raise ApiError(f"unknown paging mode {self.paging!r}")


@dataclass
class ApiResponse:
    entities: list[EntityRecord]
    match_count: Optional[int] = None
    next_page_token: Optional[str] = None


class BudgetLedger:
    """Counts API calls against a fixed budget; one unit per call, no refunds."""

    def __init__(self, budget: int):
        if budget < 0:
            raise ApiError(f"budget must be >= 0, got {budget}")
        self.budget = budget
        self.calls_made = 0
        self.calls_by_query: dict[Query, int] = {}

    @property
    def remaining(self) -> int:
        return self.budget - self.calls_made

    def charge(self, query: Query) -> None:
        if self.calls_made >= self.budget:
            raise BudgetExhausted(f"budget of {self.budget} calls exhausted")
        self.calls_made += 1
        self.calls_by_query[query] = self.calls_by_query.get(query, 0) + 1


class QueryIndex:
    """Per-(attribute, value) inverted posting lists of record positions.

    Match sets of conjunctive queries are posting-list intersections; results
    are cached per query.  Positions (not ids) are stored so that datasets
    differing only in hidden fields can share one index.
    """

    def __init__(self, dataset: Dataset):
        self.dataset = dataset
        self.schema = dataset.schema
        n = len(dataset.records)
        self.all_positions = np.arange(n, dtype=np.int64)
        self.postings: list[dict[str, np.ndarray]] = []
        for i in range(self.schema.arity):
            buckets: dict[str, list[int]] = {v: [] for v in self.schema.domains[i]}
            for pos, r in enumerate(dataset.records):
                buckets[r.values[i]].append(pos)
            self.postings.append(
                {v: np.asarray(lst, dtype=np.int64) for v, lst in buckets.items()}
            )
        self._match_cache: dict[Query, np.ndarray] = {}
        self._nonempty_cache: Optional[list[Query]] = None

    def posting_ids(self, attr_index: int, value: str) -> list[int]:
        """Entity ids holding `value` at the given attribute."""
        return [self.dataset.records[p].id for p in self.postings[attr_index][value]]

    def match_positions(self, query: Query) -> np.ndarray:
        """Sorted record positions matching the query."""
        cached = self._match_cache.get(query)
        if cached is not None:
            return cached
        lists = []
        for i, v in query.bound_items():
            posting = self.postings[i].get(v)
            if posting is None:
                raise ApiError(f"value {v!r} not in domain of attribute {self.schema.names[i]!r}")
            lists.append(posting)
        if not lists:
            result = self.all_positions
        else:
            lists.sort(key=len)
            result = lists[0]
            for other in lists[1:]:
                if len(result) == 0:
                    break
                result = np.intersect1d(result, other, assume_unique=True)
        self._match_cache[query] = result
        return result

    def match_count(self, query: Query) -> int:
        return int(len(self.match_positions(query)))

    def match_ids(self, query: Query) -> list[int]:
        return [self.dataset.records[p].id for p in self.match_positions(query)]


def build_index(dataset: Dataset) -> QueryIndex:
    return QueryIndex(dataset)


def sample_without_replacement(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """k distinct uniform draws from range(n); O(k) for k << n."""
    if k >= n:
        return rng.permutation(n)
    if k > n // 2:
        return rng.permutation(n)[:k]
    chosen: set[int] = set()
    out = np.empty(k, dtype=np.int64)
    i = 0
    while i < k:
        cand = int(rng.integers(0, n))
        if cand not in chosen:
            chosen.add(cand)
            out[i] = cand
            i += 1
    return out


class SimulatedApi:
    """The black-box query interface a sampler talks to.

    One instance owns one RNG stream; concurrent runs must each build their
    own instance (and their own ledger).
    """

    def __init__(
        self,
        dataset: Dataset,
        config: ApiConfig,
        index: Optional[QueryIndex] = None,
        trace: Optional[list] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        self.dataset = dataset
        self.config = config
        self.index = index if index is not None else build_index(dataset)
        if self.index.schema is not dataset.schema and self.index.schema != dataset.schema:
            raise ApiError("index schema does not match dataset schema")
        if config.paging == PAGING_FIXED_RANKING:
            if dataset.rank is None:
                raise ApiError("fixed_ranking paging requires a dataset rank")
            order = {eid: k for k, eid in enumerate(dataset.rank)}
            self._rank_of_pos = np.asarray(
                [order[r.id] for r in dataset.records], dtype=np.int64
            )
            self._ranked_cache: dict[Query, np.ndarray] = {}
        self.rng = rng if rng is not None else np.random.default_rng(
            np.random.SeedSequence(config.rng_seed)
        )
        self.trace = trace

    def _ranked_positions(self, query: Query) -> np.ndarray:
        cached = self._ranked_cache.get(query)
        if cached is None:
            pos = self.index.match_positions(query)
            cached = pos[np.argsort(self._rank_of_pos[pos], kind="stable")]
            self._ranked_cache[query] = cached
        return cached

    def execute(
        self,
        query: Query,
        ledger: BudgetLedger,
        page_token: Optional[str] = None,
    ) -> ApiResponse:
        """Serve one result page; always costs exactly one budget unit."""
        ledger.charge(query)
        m = self.config.page_size
        positions = self.index.match_positions(query)
        n_match = len(positions)
        records = self.dataset.records

        next_token = None
        if self.config.paging == PAGING_WITH_REPLACEMENT:
            if n_match == 0:
                page: list[EntityRecord] = []
            else:
                draws = self.rng.integers(0, n_match, size=m)
                page = [records[positions[d]] for d in draws]
        elif self.config.paging == PAGING_WITHOUT_REPLACEMENT:
            k = min(m, n_match)
            page = [records[positions[d]] for d in sample_without_replacement(self.rng, n_match, k)] \
                if k else []
        else:  # fixed ranking
            offset = self._decode_token(query, page_token)
            ranked = self._ranked_positions(query)
            chunk = ranked[offset: offset + m]
            page = [records[p] for p in chunk]
            if offset + m < len(ranked):
                next_token = self._encode_token(query, offset + m)

        match_count = n_match if self.config.report_match_count else None
        if self.trace is not None:
            mask = self.dataset.target_mask
            self.trace.append({
                "call": ledger.calls_made,
                "query": "&".join(
                    f"{n}={'*' if s is None else s}"
                    for n, s in zip(self.schema_names, query.slots)
                ),
                "returned": len(page),
                "targets": sum(1 for e in page if mask[self.dataset.position_of(e.id)]),
            })
        return ApiResponse(entities=page, match_count=match_count, next_page_token=next_token)

    @property
    def schema_names(self) -> Sequence[str]:
        return self.dataset.schema.names

    @staticmethod
    def _query_key(query: Query) -> str:
        return "\x1f".join("*" if s is None else s for s in query.slots)

    def _encode_token(self, query: Query, offset: int) -> str:
        return f"{self._query_key(query)}@{offset}"

    def _decode_token(self, query: Query, token: Optional[str]) -> int:
        if token is None:
            return 0
        key, sep, offset = token.rpartition("@")
        if not sep or not offset.isdigit():
            raise ApiError(f"invalid page token {token!r}")
        if key != self._query_key(query):
            raise ApiError(f"stale page token {token!r} for this query")
        return int(offset)

    def write_trace(self, path) -> None:
        if self.trace is None:
            raise ApiError("tracing was not enabled")
        with open(path, "w", encoding="utf-8") as fh:
            for row in self.trace:
                fh.write(json.dumps(row) + "\n")


DEFAULT_ENUMERATION_CAP = 10_000_000


def enumerate_nonempty_queries(
    index: QueryIndex, cap: int = DEFAULT_ENUMERATION_CAP
) -> list[Query]:
    """Every syntactic conjunctive query with at least one match.

    Depth-first lattice traversal over attributes in schema order with
    empty-branch pruning; the order is deterministic.  A guard trips when the
    output would exceed `cap`.  The default-cap result is cached on the index,
    which many runs over one dataset share.
    """
    if cap == DEFAULT_ENUMERATION_CAP and index._nonempty_cache is not None:
        return list(index._nonempty_cache)
    schema = index.schema
    out: list[Query] = []

    def extend(attr_index: int, slots: list, positions: np.ndarray) -> None:
        if len(out) >= cap:
            raise ApiError(f"non-empty query enumeration exceeds cap of {cap}")
        out.append(Query(tuple(slots)))
        for i in range(attr_index, schema.arity):
            for v in schema.domains[i]:
                sub = np.intersect1d(positions, index.postings[i][v], assume_unique=True)
                if len(sub):
                    slots[i] = v
                    extend(i + 1, slots, sub)
                    slots[i] = None

    if len(index.all_positions) == 0:
        out = []
    else:
        extend(0, [None] * schema.arity, index.all_positions)
    if cap == DEFAULT_ENUMERATION_CAP:
        index._nonempty_cache = list(out)
    return out
