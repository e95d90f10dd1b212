"""Budgeted samplers over the query lattice.

The centerpiece is a tree-guided Thompson sampler ("dt-tmp"): it grows a pool
of queries downward from the all-wildcard root, scores every pool member with
a Beta-posterior draw scaled by how many new distinct entities a page could
still deliver, and propagates page evidence to pool ancestors (fractionally)
and descendants (exactly).  Six reference samplers share the same run loop:

  uni  -- always issue the root query
  exp  -- uniform random non-empty query each call
  tmp  -- flat Thompson sampling over all non-empty queries, no tree
  rw   -- random walk over the lattice (generalize w.p. p, else specialize)
  ls   -- greedy unseen-cover: maximize match count minus already-seen matches
  cb   -- greedy smoothed observed precision over specializations of issued queries

Everything is deterministic given (seed, config, dataset).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from .query import (
    Query,
    format_query,
    generalizations,
    is_generalization,
    lattice_neighbors,
    matches,
    root_query,
    specialize,
    strict_generalizations,
    subqueries_of_values,
)
from .simapi import ApiConfig, ApiResponse, BudgetLedger, SimulatedApi, enumerate_nonempty_queries

REWARD_WITH_REPLACEMENT = "with_replacement_unique"
REWARD_WITHOUT_REPLACEMENT = "without_replacement"
REWARD_UNKNOWN_N = "unknown_n"
REWARD_MODES = (REWARD_WITH_REPLACEMENT, REWARD_WITHOUT_REPLACEMENT, REWARD_UNKNOWN_N)

SAMPLER_KINDS = ("dt-tmp", "tmp", "exp", "uni", "rw", "ls", "cb")


class SamplerError(Exception):
    pass


# ---------------------------------------------------------------------------
# per-query statistics and the query pool
# ---------------------------------------------------------------------------


@dataclass
class QueryStats:
    """Beta pseudo-counts plus coverage bookkeeping for one query.

    The Beta(1, 1) prior is baked into the initial values and never
    subtracted; ancestor updates add fractional evidence, so the counts are
    real-valued.  `seen_ids` holds distinct already-sampled entities known to
    match this query; `known_match_count` is the API-reported total when the
    query has been issued at least once.
    """

    successes: float = 1.0
    failures: float = 1.0
    seen_ids: set = field(default_factory=set)
    known_match_count: Optional[int] = None

    @property
    def n_seen(self) -> int:
        return len(self.seen_ids)

    @property
    def precision_estimate(self) -> float:
        return self.successes / (self.successes + self.failures)


class QueryPool:
    """Explored queries organized as a specialization tree rooted at the
    all-wildcard query.  Every non-root node's parent generalizes it with
    exactly one fewer bound slot."""

    def __init__(self, root: Query):
        self.root = root
        self.stats: dict[Query, QueryStats] = {root: QueryStats()}
        self.parent: dict[Query, Optional[Query]] = {root: None}
        self.children: dict[Query, list[Query]] = {root: []}

    def __len__(self) -> int:
        return len(self.stats)

    def __contains__(self, query: Query) -> bool:
        return query in self.stats

    @property
    def queries(self) -> list[Query]:
        return list(self.stats)

    def add(self, query: Query, parent: Query) -> bool:
        """Insert with fresh prior stats; returns False if already present."""
        if query in self.stats:
            return False
        if parent not in self.stats:
            raise SamplerError("parent query is not in the pool")
        if not is_generalization(parent, query) or query.bound_count != parent.bound_count + 1:
            raise SamplerError("parent must generalize the child by exactly one binding")
        self.stats[query] = QueryStats()
        self.parent[query] = parent
        self.children[query] = []
        self.children[parent].append(query)
        return True

    def ancestors_in_pool(self, query: Query) -> list[Query]:
        """Strict generalizations of `query` present in the pool."""
        if 1 << query.bound_count <= 2 * len(self.stats):
            return [g for g in strict_generalizations(query) if g in self.stats]
        return [q for q in self.stats if q != query and is_generalization(q, query)]

    def matching_members(self, values: Sequence[str]) -> Iterator[Query]:
        """Pool members matched by an entity with these attribute values."""
        if 1 << len(values) <= 2 * len(self.stats):
            for sub in subqueries_of_values(values):
                if sub in self.stats:
                    yield sub
        else:
            for q in self.stats:
                if matches(q, values):
                    yield q


# ---------------------------------------------------------------------------
# reward model
# ---------------------------------------------------------------------------


def unique_draw_factor(match_count: int, page_size: int) -> float:
    """Expected number of distinct entities among `page_size` draws with
    replacement from `match_count` items: N(1 - (1 - 1/N)^m)."""
    if match_count <= 0:
        return 0.0
    return match_count * (1.0 - (1.0 - 1.0 / match_count) ** page_size)


def reward_value(
    theta: float,
    *,
    seen: int,
    match_count: Optional[int],
    page_size: int,
    mode: str,
    eq1_form: bool = False,
) -> float:
    """Expected new distinct targets from one more page, given precision `theta`.

    `eq1_form` swaps the with-replacement novelty factor N(1-(1-1/N)^m) for
    (1-(1-1/N)^m); the default is the variant that equals the true expected
    count of distinct entities in a page.
    """
    if mode == REWARD_UNKNOWN_N:
        return theta * page_size
    if mode not in REWARD_MODES:
        raise SamplerError(f"unknown reward mode {mode!r}")
    if match_count is None:
        raise SamplerError(f"reward mode {mode!r} requires a known match count")
    if match_count <= 0 or seen >= match_count:
        return 0.0
    new_fraction = (match_count - seen) / match_count
    if mode == REWARD_WITHOUT_REPLACEMENT:
        return theta * new_fraction * page_size
    factor = unique_draw_factor(match_count, page_size)
    if eq1_form:
        factor /= match_count
    return theta * new_fraction * factor


def expected_reward(stats: QueryStats, page_size: int, mode: str, eq1_form: bool = False) -> float:
    """Reward at the posterior mean precision S/(S+F)."""
    return reward_value(
        stats.precision_estimate,
        seen=stats.n_seen,
        match_count=stats.known_match_count,
        page_size=page_size,
        mode=mode,
        eq1_form=eq1_form,
    )


def thompson_draw(
    stats: QueryStats,
    page_size: int,
    mode: str,
    rng: np.random.Generator,
    eq1_form: bool = False,
) -> float:
    """Reward at one random precision draw from Beta(successes, failures)."""
    theta = float(rng.beta(stats.successes, stats.failures))
    return reward_value(
        theta,
        seen=stats.n_seen,
        match_count=stats.known_match_count,
        page_size=page_size,
        mode=mode,
        eq1_form=eq1_form,
    )


def member_reward_mode(stats: QueryStats, mode: str) -> str:
    """Effective reward mode for one pool member: a member that has never
    been issued has no reported match count, so its reward falls back to the
    unknown-size form (equivalent to assuming far more matches than seen)."""
    if mode != REWARD_UNKNOWN_N and stats.known_match_count is None:
        return REWARD_UNKNOWN_N
    return mode


def _pool_rewards(
    pool: QueryPool,
    page_size: int,
    mode: str,
    eq1_form: bool,
    thetas: np.ndarray,
) -> np.ndarray:
    # vectorized counterpart of reward_value over the whole pool; members
    # without a reported match count fall back to the unknown-size form
    if mode not in REWARD_MODES:
        raise SamplerError(f"unknown reward mode {mode!r}")
    if mode == REWARD_UNKNOWN_N:
        return thetas * page_size
    members = pool.stats.values()
    counts = np.array([
        -1 if st.known_match_count is None else st.known_match_count for st in members
    ], dtype=np.float64)
    seen = np.array([st.n_seen for st in members], dtype=np.float64)
    known = counts >= 0
    safe = np.where(counts > 0, counts, 1.0)
    new_fraction = np.where(known, np.clip((counts - seen) / safe, 0.0, 1.0), 1.0)
    if mode == REWARD_WITHOUT_REPLACEMENT:
        factors = np.full(len(counts), float(page_size))
    else:
        unique = safe * (1.0 - (1.0 - 1.0 / safe) ** page_size)
        if eq1_form:
            unique = unique / safe
        factors = np.where(known, unique, float(page_size))
    values = thetas * new_fraction * factors
    return np.where(known & (counts <= 0), 0.0, values)


def _argmax_with_random_ties(values: np.ndarray, rng: np.random.Generator) -> int:
    ties = np.flatnonzero(values == values.max())
    if len(ties) == 1:
        return int(ties[0])
    return int(ties[int(rng.integers(len(ties)))])


def select_query(
    pool: QueryPool,
    page_size: int,
    mode: str,
    rng: np.random.Generator,
    eq1_form: bool = False,
) -> Query:
    """Argmax of one Thompson draw per pool member; ties uniform at random."""
    if len(pool) == 0:
        raise SamplerError("query pool is empty")
    members = list(pool.stats.values())
    shapes_s = np.array([st.successes for st in members])
    shapes_f = np.array([st.failures for st in members])
    thetas = rng.beta(shapes_s, shapes_f)
    values = _pool_rewards(pool, page_size, mode, eq1_form, thetas)
    return pool.queries[_argmax_with_random_ties(values, rng)]


def best_expansion_node(
    pool: QueryPool,
    page_size: int,
    mode: str,
    rng: np.random.Generator,
    eq1_form: bool = False,
) -> Query:
    """Pool member with the highest expected (not sampled) reward; random ties."""
    thetas = np.array([st.precision_estimate for st in pool.stats.values()])
    values = _pool_rewards(pool, page_size, mode, eq1_form, thetas)
    return pool.queries[_argmax_with_random_ties(values, rng)]


# ---------------------------------------------------------------------------
# evidence propagation and pool expansion
# ---------------------------------------------------------------------------


def update_on_result(
    pool: QueryPool,
    issued: Query,
    response: ApiResponse,
    target_flags: Sequence[bool],
) -> None:
    """Fold one result page into the pool.

    The issued query absorbs the page verbatim (duplicates count per draw
    toward the Beta counts, once toward coverage).  Pool descendants receive
    the matching subset of the page.  Pool ancestors receive the whole page
    scaled by the issued/ancestor population-size ratio: reported match
    counts when both are known, else the ratio of per-node seen-entity
    counts (clamped to 1) as the index-free estimate, 1 before any data.
    """
    if issued not in pool:
        raise SamplerError("issued query is not in the pool")
    entities = response.entities
    if len(target_flags) != len(entities):
        raise SamplerError("one target flag per returned entity is required")
    stats = pool.stats[issued]
    if response.match_count is not None:
        stats.known_match_count = response.match_count

    page_successes = int(sum(bool(f) for f in target_flags))
    page_failures = len(entities) - page_successes

    stats.successes += page_successes
    stats.failures += page_failures
    page_ids = [e.id for e in entities]
    stats.seen_ids.update(page_ids)

    # descendants: credit only the matching subset, per occurrence
    tallies: dict[Query, list] = {}
    for entity, flag in zip(entities, target_flags):
        for member in pool.matching_members(entity.values):
            if member == issued or not is_generalization(issued, member):
                continue
            bucket = tallies.setdefault(member, [0, 0, set()])
            if flag:
                bucket[0] += 1
            else:
                bucket[1] += 1
            bucket[2].add(entity.id)
    for member, (s_cnt, f_cnt, ids) in tallies.items():
        m_stats = pool.stats[member]
        m_stats.successes += s_cnt
        m_stats.failures += f_cnt
        m_stats.seen_ids.update(ids)

    # ancestors: whole page, fractionally weighted
    ancestors = pool.ancestors_in_pool(issued)
    for anc in ancestors:
        pool.stats[anc].seen_ids.update(page_ids)
    for anc in ancestors:
        a_stats = pool.stats[anc]
        if stats.known_match_count is not None and a_stats.known_match_count:
            ratio = stats.known_match_count / a_stats.known_match_count
        elif a_stats.n_seen > 0:
            ratio = min(1.0, stats.n_seen / a_stats.n_seen)
        else:
            ratio = 1.0
        a_stats.successes += ratio * page_successes
        a_stats.failures += ratio * page_failures


def expand_pool(
    pool: QueryPool,
    query: Query,
    sampled_values: Mapping[int, tuple],
) -> list[Query]:
    """Add one-binding specializations of `query` for every attribute value
    observed among sampled entities that match it.  Idempotent; returns the
    queries actually added."""
    if query not in pool:
        raise SamplerError("expansion target is not in the pool")
    wildcards = query.wildcard_slots()
    if not wildcards:
        return []
    observed: dict[int, set] = {j: set() for j in wildcards}
    for values in sampled_values.values():
        if matches(query, values):
            for j in wildcards:
                observed[j].add(values[j])
    added = []
    for j in wildcards:
        for v in sorted(observed[j]):
            child = specialize(query, j, v)
            if pool.add(child, parent=query):
                added.append(child)
    return added


# ---------------------------------------------------------------------------
# run configuration and logging
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplerConfig:
    kind: str
    epoch: int = 10
    reward_mode: Optional[str] = None  # derived from the API config when None
    rng_seed: int = 0
    generalize_prob: float = 0.5  # rw only
    smoothing: float = 1.0  # cb only
    eq1_reward: bool = False
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise SamplerError(f"unknown sampler kind {self.kind!r}")
        if self.epoch < 1:
            raise SamplerError(f"epoch must be >= 1, got {self.epoch}")
        if self.reward_mode is not None and self.reward_mode not in REWARD_MODES:
            raise SamplerError(f"unknown reward mode {self.reward_mode!r}")
        if not 0.0 <= self.generalize_prob <= 1.0:
            raise SamplerError("generalize_prob must be in [0, 1]")

    @property
    def display_name(self) -> str:
        return self.label or self.kind


def resolve_reward_mode(config: SamplerConfig, api_config: ApiConfig) -> str:
    """Reward mode implied by the paging semantics; unknown-size is forced
    when the API does not report match counts."""
    if not api_config.report_match_count:
        if config.reward_mode not in (None, REWARD_UNKNOWN_N):
            raise SamplerError(
                "API does not report match counts; reward mode must be unknown_n"
            )
        return REWARD_UNKNOWN_N
    if config.reward_mode is not None:
        return config.reward_mode
    if api_config.paging == "with_replacement":
        return REWARD_WITH_REPLACEMENT
    if api_config.paging == "without_replacement":
        return REWARD_WITHOUT_REPLACEMENT
    return REWARD_UNKNOWN_N  # fixed ranking: neither sampling model applies


@dataclass
class CallRecord:
    query: Query
    ids: tuple[int, ...]
    target_flags: tuple[bool, ...]


class SampleLog:
    """Complete account of one run: per-call records plus cumulative coverage."""

    def __init__(self):
        self.records: list[CallRecord] = []
        self.sampled_values: dict[int, tuple] = {}
        self.distinct_target_ids: set[int] = set()
        self.target_series: list[int] = []

    def record(self, query: Query, entities, target_flags: Sequence[bool]) -> None:
        ids = tuple(e.id for e in entities)
        self.records.append(CallRecord(query, ids, tuple(bool(f) for f in target_flags)))
        for e, flag in zip(entities, target_flags):
            self.sampled_values.setdefault(e.id, e.values)
            if flag:
                self.distinct_target_ids.add(e.id)
        self.target_series.append(len(self.distinct_target_ids))

    @property
    def calls(self) -> int:
        return len(self.records)

    @property
    def distinct_sampled(self) -> int:
        return len(self.sampled_values)

    @property
    def distinct_targets(self) -> int:
        return len(self.distinct_target_ids)

    def first_issue_call(self, query: Query) -> Optional[int]:
        """1-based call index of the first time `query` was issued, else None."""
        for k, rec in enumerate(self.records, start=1):
            if rec.query == query:
                return k
        return None

    def to_jsonl(self, names: Sequence[str]) -> str:
        lines = []
        for k, rec in enumerate(self.records, start=1):
            lines.append(json.dumps({
                "call": k,
                "query": format_query(rec.query, names),
                "ids": list(rec.ids),
                "targets": [int(f) for f in rec.target_flags],
            }, separators=(",", ":")))
        return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# sampler states
# ---------------------------------------------------------------------------


class _TreeThompson:
    """Pool-growing Thompson sampler; expands the best node every `epoch` calls."""

    def __init__(self, config: SamplerConfig, api: SimulatedApi, mode: str):
        self.pool = QueryPool(root_query(api.dataset.schema.arity))
        self.page_size = api.config.page_size
        self.mode = mode
        self.eq1 = config.eq1_reward
        self.epoch = config.epoch
        self.calls = 0

    def choose(self, rng: np.random.Generator) -> Query:
        return select_query(self.pool, self.page_size, self.mode, rng, self.eq1)

    def observe(self, query, response, flags, rng, log: SampleLog) -> None:
        update_on_result(self.pool, query, response, flags)
        self.calls += 1
        if self.calls % self.epoch == 0:
            node = best_expansion_node(self.pool, self.page_size, self.mode, rng, self.eq1)
            expand_pool(self.pool, node, log.sampled_values)


class _UniformRoot:
    def __init__(self, config: SamplerConfig, api: SimulatedApi, mode: str):
        self.root = root_query(api.dataset.schema.arity)

    def choose(self, rng) -> Query:
        return self.root

    def observe(self, query, response, flags, rng, log) -> None:
        pass


class _RandomQuery:
    """Pure exploration: uniform draw with replacement from non-empty queries."""

    def __init__(self, config: SamplerConfig, api: SimulatedApi, mode: str):
        self.queries = _nonempty_arms(api)

    def choose(self, rng) -> Query:
        return self.queries[int(rng.integers(len(self.queries)))]

    def observe(self, query, response, flags, rng, log) -> None:
        pass


class _FlatThompson:
    """Thompson sampling with every non-empty query as a flat arm: no tree,
    no expansion, no cross-arm updates."""

    def __init__(self, config: SamplerConfig, api: SimulatedApi, mode: str):
        self.queries = _nonempty_arms(api)
        self.arm_of = {q: i for i, q in enumerate(self.queries)}
        k = len(self.queries)
        self.successes = np.ones(k)
        self.failures = np.ones(k)
        self.match_counts = np.array(
            [api.index.match_count(q) for q in self.queries], dtype=np.int64
        )
        self.seen_counts = np.zeros(k, dtype=np.int64)
        self.seen: dict[int, set] = {}
        self.page_size = api.config.page_size
        self.mode = mode
        self.eq1 = config.eq1_reward
        mc = self.match_counts.astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            uf = mc * (1.0 - (1.0 - 1.0 / mc) ** self.page_size)
        self.unique_factors = np.where(mc > 0, uf, 0.0)

    def _reward_vector(self, thetas: np.ndarray) -> np.ndarray:
        m = self.page_size
        if self.mode == REWARD_UNKNOWN_N:
            return thetas * m
        mc = self.match_counts.astype(float)
        new_frac = np.clip((mc - self.seen_counts) / np.maximum(mc, 1), 0.0, 1.0)
        if self.mode == REWARD_WITHOUT_REPLACEMENT:
            return thetas * new_frac * m
        factors = self.unique_factors / mc if self.eq1 else self.unique_factors
        return thetas * new_frac * factors

    def choose(self, rng) -> Query:
        thetas = rng.beta(self.successes, self.failures)
        return self.queries[_argmax_with_random_ties(self._reward_vector(thetas), rng)]

    def observe(self, query, response, flags, rng, log) -> None:
        i = self.arm_of[query]
        s = int(sum(bool(f) for f in flags))
        self.successes[i] += s
        self.failures[i] += len(response.entities) - s
        bucket = self.seen.setdefault(i, set())
        bucket.update(e.id for e in response.entities)
        self.seen_counts[i] = len(bucket)


class _RandomWalk:
    """Lattice random walk: generalize with probability p, else bind a
    uniformly chosen wildcard slot to a uniformly chosen in-domain value.
    When the chosen direction is impossible the step takes the other one."""

    def __init__(self, config: SamplerConfig, api: SimulatedApi, mode: str):
        self.current = root_query(api.dataset.schema.arity)
        self.domains = api.dataset.schema.domains
        self.p_generalize = config.generalize_prob

    def choose(self, rng) -> Query:
        go_up = rng.random() < self.p_generalize
        up = generalizations(self.current)
        down = lattice_neighbors(self.current, self.domains, "specialize")
        if go_up and up:
            self.current = up[int(rng.integers(len(up)))]
        elif down:
            self.current = down[int(rng.integers(len(down)))]
        elif up:
            self.current = up[int(rng.integers(len(up)))]
        return self.current

    def observe(self, query, response, flags, rng, log) -> None:
        pass


class _GreedyCover:
    """Issue the non-empty query with the most not-yet-seen matching entities;
    deterministic first-maximum tie-break."""

    def __init__(self, config: SamplerConfig, api: SimulatedApi, mode: str):
        self.queries = _nonempty_arms(api)
        self.arm_of = {q: i for i, q in enumerate(self.queries)}
        self.match_counts = np.array(
            [api.index.match_count(q) for q in self.queries], dtype=np.int64
        )
        self.seen_counts = np.zeros(len(self.queries), dtype=np.int64)
        self.seen_ids: set[int] = set()

    def choose(self, rng) -> Query:
        return self.queries[int(np.argmax(self.match_counts - self.seen_counts))]

    def observe(self, query, response, flags, rng, log) -> None:
        for e in response.entities:
            if e.id in self.seen_ids:
                continue
            self.seen_ids.add(e.id)
            for sub in subqueries_of_values(e.values):
                arm = self.arm_of.get(sub)
                if arm is not None:
                    self.seen_counts[arm] += 1


class _GreedyPrecision:
    """Greedy query design: candidates are all one-binding specializations of
    queries already issued (seeded with the root); each call issues the
    candidate with the highest smoothed observed precision."""

    def __init__(self, config: SamplerConfig, api: SimulatedApi, mode: str):
        self.domains = api.dataset.schema.domains
        self.alpha = config.smoothing
        root = root_query(api.dataset.schema.arity)
        self.candidates: dict[Query, int] = {root: 0}
        self.order: list[Query] = [root]
        self.successes = [1.0]
        self.failures = [1.0]
        self.expanded: set[Query] = set()

    def choose(self, rng) -> Query:
        s = np.asarray(self.successes)
        f = np.asarray(self.failures)
        a = self.alpha
        scores = (s - 1.0 + a) / (s + f - 2.0 + 2.0 * a)
        return self.order[int(np.argmax(scores))]

    def _add_candidate(self, query: Query) -> None:
        if query in self.candidates:
            return
        self.candidates[query] = len(self.order)
        self.order.append(query)
        self.successes.append(1.0)
        self.failures.append(1.0)

    def observe(self, query, response, flags, rng, log) -> None:
        if query not in self.expanded:
            self.expanded.add(query)
            for child in lattice_neighbors(query, self.domains, "specialize"):
                self._add_candidate(child)
        for e, flag in zip(response.entities, flags):
            for sub in subqueries_of_values(e.values):
                idx = self.candidates.get(sub)
                if idx is None:
                    continue
                if flag:
                    self.successes[idx] += 1.0
                else:
                    self.failures[idx] += 1.0


_STATE_CLASSES = {
    "dt-tmp": _TreeThompson,
    "uni": _UniformRoot,
    "exp": _RandomQuery,
    "tmp": _FlatThompson,
    "rw": _RandomWalk,
    "ls": _GreedyCover,
    "cb": _GreedyPrecision,
}


def _nonempty_arms(api: SimulatedApi) -> list[Query]:
    arms = enumerate_nonempty_queries(api.index)
    if not arms:
        raise SamplerError("no non-empty queries: dataset is empty")
    return arms


def make_sampler_state(config: SamplerConfig, api: SimulatedApi):
    mode = resolve_reward_mode(config, api.config)
    return _STATE_CLASSES[config.kind](config, api, mode)


def baseline_step(state, rng: np.random.Generator) -> Query:
    """One query-selection step of any sampler state (no API call made)."""
    return state.choose(rng)


def run(
    config: SamplerConfig,
    api: SimulatedApi,
    ledger: BudgetLedger,
    rng: Optional[np.random.Generator] = None,
    state=None,
) -> SampleLog:
    """Drive one sampler until the ledger's budget is exhausted.

    Each call: select a query, execute it, oracle-label the page, update the
    sampler.  Under fixed-ranking paging, page tokens advance per query and
    wrap to the first page after exhaustion.  Passing a pre-built `state`
    lets callers inspect it (e.g. the final query pool) afterwards.
    """
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(config.rng_seed))
    if state is None:
        state = make_sampler_state(config, api)
    log = SampleLog()
    fixed_ranking = api.config.paging == "fixed_ranking"
    tokens: dict[Query, Optional[str]] = {}
    while ledger.calls_made < ledger.budget:
        query = state.choose(rng)
        token = tokens.get(query) if fixed_ranking else None
        response = api.execute(query, ledger, page_token=token)
        if fixed_ranking:
            tokens[query] = response.next_page_token
        flags = [api.dataset.evaluate_target(e.id) for e in response.entities]
        log.record(query, response.entities, flags)
        state.observe(query, response, flags, rng, log)
    return log
