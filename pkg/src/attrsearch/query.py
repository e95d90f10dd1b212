"""Conjunctive attributed queries and the generalization partial order over them.

A query binds each schema attribute slot either to a concrete value or to the
wildcard.  Queries are immutable and hashable so they can serve as dict keys
(bandit arms) and set members.  The partial order is purely syntactic: q1
generalizes q2 iff every slot bound in q1 carries the same value in q2.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence

WILDCARD = "*"


@dataclass(frozen=True)
class Query:
    """One slot per schema attribute; ``None`` marks a wildcard slot."""

    slots: tuple[Optional[str], ...]

    @property
    def arity(self) -> int:
        return len(self.slots)

    @property
    def bound_count(self) -> int:
        return sum(1 for s in self.slots if s is not None)

    def is_root(self) -> bool:
        return all(s is None for s in self.slots)

    def is_fully_bound(self) -> bool:
        return all(s is not None for s in self.slots)

    def bound_items(self) -> Iterator[tuple[int, str]]:
        for i, s in enumerate(self.slots):
            if s is not None:
                yield i, s

    def wildcard_slots(self) -> list[int]:
        return [i for i, s in enumerate(self.slots) if s is None]


class QueryRelation(Enum):
    EQUAL = "equal"
    GENERALIZES = "generalizes"
    SPECIALIZES = "specializes"
    INCOMPARABLE = "incomparable"


def root_query(arity: int) -> Query:
    """The all-wildcard query, most general element of the lattice."""
    return Query((None,) * arity)


def matches(query: Query, values: Sequence[str]) -> bool:
    """True iff every bound slot equals the entity's value; wildcards always match."""
    if len(values) != query.arity:
        raise ValueError(
            f"schema mismatch: query has {query.arity} slots, entity has {len(values)} values"
        )
    for i, bound in query.bound_items():
        if values[i] != bound:
            return False
    return True


def is_generalization(general: Query, specific: Query) -> bool:
    """Syntactic subsumption: every bound slot of `general` is bound identically
    in `specific`.  Reflexive."""
    if general.arity != specific.arity:
        raise ValueError("schema mismatch: differing slot counts")
    for i, bound in general.bound_items():
        if specific.slots[i] != bound:
            return False
    return True


def relation(q1: Query, q2: Query) -> QueryRelation:
    if q1 == q2:
        return QueryRelation.EQUAL
    if is_generalization(q1, q2):
        return QueryRelation.GENERALIZES
    if is_generalization(q2, q1):
        return QueryRelation.SPECIALIZES
    return QueryRelation.INCOMPARABLE


def specialize(query: Query, attr_index: int, value: str) -> Query:
    """Bind one wildcard slot; the result has exactly one more bound slot.

    Domain membership is the caller's concern (checked where a schema is in
    scope); this guards the structural precondition only.
    """
    if not 0 <= attr_index < query.arity:
        raise IndexError(f"attribute index {attr_index} out of range")
    if query.slots[attr_index] is not None:
        raise ValueError(f"slot {attr_index} already bound to {query.slots[attr_index]!r}")
    slots = list(query.slots)
    slots[attr_index] = value
    return Query(tuple(slots))


def generalizations(query: Query) -> list[Query]:
    """All queries obtained by unbinding exactly one bound slot."""
    out = []
    for i, _ in query.bound_items():
        slots = list(query.slots)
        slots[i] = None
        out.append(Query(tuple(slots)))
    return out


def strict_generalizations(query: Query) -> Iterator[Query]:
    """Every strict generalization of `query` (all proper subsets of its
    bindings), 2^b - 1 queries for b bound slots."""
    bound = list(query.bound_items())
    b = len(bound)
    for mask in range((1 << b) - 1):  # skip the full mask == query itself
        slots: list[Optional[str]] = [None] * query.arity
        for j in range(b):
            if mask >> j & 1:
                i, v = bound[j]
                slots[i] = v
        yield Query(tuple(slots))


def subqueries_of_values(values: Sequence[str]) -> Iterator[Query]:
    """Every syntactic query that the entity with these values matches
    (each slot either wildcard or the entity's own value), 2^r queries."""
    r = len(values)
    for mask in range(1 << r):
        slots: list[Optional[str]] = [None] * r
        for i in range(r):
            if mask >> i & 1:
                slots[i] = values[i]
        yield Query(tuple(slots))


def lattice_neighbors(
    query: Query,
    domains: Sequence[Sequence[str]],
    direction: str,
    observed_values: Optional[Sequence[Iterable[str]]] = None,
) -> list[Query]:
    """One-step lattice moves.

    ``generalize`` unbinds one bound slot; ``specialize`` binds one wildcard
    slot to a value drawn from ``observed_values`` (defaults to the full
    domain).  Neighbor order follows slot order then value order.
    """
    if direction == "generalize":
        return generalizations(query)
    if direction != "specialize":
        raise ValueError(f"unknown direction {direction!r}")
    pools = observed_values if observed_values is not None else domains
    out = []
    for i in query.wildcard_slots():
        domain = set(domains[i])
        for v in pools[i]:
            if v not in domain:
                raise ValueError(f"value {v!r} not in domain of attribute {i}")
            out.append(specialize(query, i, v))
    return out


def format_query(query: Query, names: Sequence[str]) -> str:
    """Serialize as ``attr=value&attr=*``; lossless with `parse_query`."""
    if len(names) != query.arity:
        raise ValueError("schema mismatch: name count differs from slot count")
    parts = []
    for name, slot in zip(names, query.slots):
        parts.append(f"{name}={WILDCARD if slot is None else slot}")
    return "&".join(parts)


def parse_query(text: str, names: Sequence[str], domains: Sequence[Sequence[str]]) -> Query:
    """Inverse of `format_query`; validates names, order, and domain membership."""
    parts = text.split("&") if text else []
    if len(parts) != len(names):
        raise ValueError(f"expected {len(names)} slots, got {len(parts)}")
    slots: list[Optional[str]] = []
    for part, name, domain in zip(parts, names, domains):
        key, sep, value = part.partition("=")
        if not sep:
            raise ValueError(f"malformed slot {part!r}")
        if key != name:
            raise ValueError(f"expected attribute {name!r}, got {key!r}")
        if value == WILDCARD:
            slots.append(None)
        else:
            if value not in set(domain):
                raise ValueError(f"value {value!r} not in domain of {name!r}")
            slots.append(value)
    return Query(tuple(slots))
