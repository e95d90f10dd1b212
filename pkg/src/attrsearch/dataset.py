"""Entity datasets: queryable schemas, hidden-property oracles, loading, transforms.

A dataset couples an ordered categorical schema (what the simulated API lets
you query) with per-record hidden fields that only the oracle predicate may
inspect.  Datasets are immutable after construction; every transform returns
a new dataset.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

log = logging.getLogger(__name__)


class DatasetError(Exception):
    """Raised for malformed dataset files, declarations, or transform misuse."""


# ---------------------------------------------------------------------------
# schema and records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered queryable attributes with discrete, ordered value domains.

    The wildcard is a query-level concept and never appears in a domain.
    """

    names: tuple[str, ...]
    domains: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if len(self.names) != len(self.domains):
            raise DatasetError("attribute name/domain count mismatch")
        if len(set(self.names)) != len(self.names):
            raise DatasetError("attribute names must be unique")
        for name, dom in zip(self.names, self.domains):
            if not dom:
                raise DatasetError(f"attribute {name!r} has an empty domain")
            if len(set(dom)) != len(dom):
                raise DatasetError(f"attribute {name!r} has duplicate domain values")

    @property
    def arity(self) -> int:
        return len(self.names)

    def cardinality(self, i: int) -> int:
        return len(self.domains[i])

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DatasetError(f"unknown attribute {name!r}") from None


@dataclass(frozen=True)
class EntityRecord:
    """One population entity: queryable values plus non-queryable hidden fields."""

    id: int
    values: tuple[str, ...]
    hidden: Mapping[str, object]


# ---------------------------------------------------------------------------
# hidden-property predicates (the oracle)
# ---------------------------------------------------------------------------

_COMPARATORS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}
_ORDER_OPS = {"<", "<=", ">", ">="}


class HiddenPropertySpec:
    """Boolean expression tree over hidden fields, built from a JSON-style dict.

    Leaves compare a hidden field against a constant (ordering comparisons for
    numerics, equality / set membership for strings); internal nodes are
    and / or / not.  Evaluation is deterministic per entity.
    """

    def __init__(self, tree: Mapping):
        self.tree = tree
        self.fields = frozenset(self._collect_fields(tree))

    @staticmethod
    def _collect_fields(node: Mapping) -> Iterable[str]:
        op = node.get("op")
        if op in ("and", "or"):
            for child in node["args"]:
                yield from HiddenPropertySpec._collect_fields(child)
        elif op == "not":
            yield from HiddenPropertySpec._collect_fields(node["arg"])
        elif op in ("true", "false"):
            return
        elif op in _COMPARATORS or op == "in":
            yield node["field"]
        else:
            raise DatasetError(f"unknown predicate op {op!r}")

    def evaluate(self, hidden: Mapping[str, object]) -> bool:
        return self._eval(self.tree, hidden)

    def _eval(self, node: Mapping, hidden: Mapping[str, object]) -> bool:
        op = node["op"]
        if op == "and":
            return all(self._eval(c, hidden) for c in node["args"])
        if op == "or":
            return any(self._eval(c, hidden) for c in node["args"])
        if op == "not":
            return not self._eval(node["arg"], hidden)
        if op == "true":
            return True
        if op == "false":
            return False
        value = hidden.get(node["field"])
        if value is None:
            raise DatasetError(f"predicate references missing hidden field {node['field']!r}")
        target = node["value"]
        if op == "in":
            return value in target
        if op in _ORDER_OPS and isinstance(value, str):
            raise DatasetError(f"ordering comparison {op!r} on string field {node['field']!r}")
        return _COMPARATORS[op](value, target)

    def to_dict(self) -> Mapping:
        return self.tree


TRUE_PREDICATE = HiddenPropertySpec({"op": "true"})


# ---------------------------------------------------------------------------
# dataset
# ---------------------------------------------------------------------------


class Dataset:
    """Immutable entity collection with a cached target oracle.

    `rank`, when present, is a permutation of all record ids used by the
    fixed-ranking paging mode (first id is served first).
    """

    def __init__(
        self,
        schema: AttributeSchema,
        records: Sequence[EntityRecord],
        target_spec: HiddenPropertySpec,
        rank: Optional[Sequence[int]] = None,
        dropped_rows: int = 0,
    ):
        self.schema = schema
        self.records = tuple(records)
        self.target_spec = target_spec
        self.dropped_rows = dropped_rows

        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise DatasetError("duplicate entity ids")
        self._pos_by_id = {r.id: i for i, r in enumerate(self.records)}

        missing = target_spec.fields - set().union(*(set(r.hidden) for r in self.records)) \
            if self.records else frozenset()
        if self.records and missing:
            raise DatasetError(f"target predicate references undeclared hidden fields: {sorted(missing)}")

        domain_sets = [set(d) for d in schema.domains]
        for r in self.records:
            for i, v in enumerate(r.values):
                if v not in domain_sets[i]:
                    raise DatasetError(
                        f"entity {r.id}: value {v!r} outside domain of {schema.names[i]!r}"
                    )

        self.target_mask = np.fromiter(
            (target_spec.evaluate(r.hidden) for r in self.records), dtype=bool, count=len(self.records)
        )
        self.target_count = int(self.target_mask.sum())

        if rank is not None:
            rank = tuple(rank)
            if sorted(rank) != sorted(ids):
                raise DatasetError("rank must be a permutation of all record ids")
        self.rank = rank

    def __len__(self) -> int:
        return len(self.records)

    def position_of(self, entity_id: int) -> int:
        try:
            return self._pos_by_id[entity_id]
        except KeyError:
            raise DatasetError(f"unknown entity id {entity_id}") from None

    def evaluate_target(self, entity_id: int) -> bool:
        """Oracle verdict for one entity; cached at construction."""
        return bool(self.target_mask[self.position_of(entity_id)])

    def value_counts(self, attr_index: int) -> dict[str, int]:
        counts = {v: 0 for v in self.schema.domains[attr_index]}
        for r in self.records:
            counts[r.values[attr_index]] += 1
        return counts

    def target_counts_by_value(self, attr_index: int) -> dict[str, int]:
        counts = {v: 0 for v in self.schema.domains[attr_index]}
        for r, is_target in zip(self.records, self.target_mask):
            if is_target:
                counts[r.values[attr_index]] += 1
        return counts

    def with_random_rank(self, seed: int) -> "Dataset":
        """Fix a seeded random ranking for fixed-ranking paging."""
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        order = rng.permutation(len(self.records))
        rank = tuple(self.records[i].id for i in order)
        return Dataset(self.schema, self.records, self.target_spec, rank=rank,
                       dropped_rows=self.dropped_rows)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransformSpec:
    """Declarative dataset transform.

    kinds:
      cardinality-merge: attribute, c (>= 2), merged_label
      shuffle:           ratio in [0, 1], optional seed
      attribute-subset:  attributes (non-empty name list)
      discretize:        field (hidden numeric), edges (ascending bin edges)
    """

    kind: str
    attribute: Optional[str] = None
    c: Optional[int] = None
    merged_label: str = "MERGED"
    ratio: Optional[float] = None
    seed: Optional[int] = None
    attributes: Optional[tuple[str, ...]] = None
    field: Optional[str] = None
    edges: Optional[tuple[float, ...]] = None

    @staticmethod
    def from_dict(d: Mapping) -> "TransformSpec":
        if not isinstance(d, Mapping):
            raise DatasetError(f"transform entry must be an object, got {type(d).__name__}")
        kind = d.get("kind")
        known = {
            "cardinality-merge": {"kind", "attribute", "c", "merged_label"},
            "shuffle": {"kind", "ratio", "seed"},
            "attribute-subset": {"kind", "attributes"},
            "discretize": {"kind", "field", "edges"},
        }
        if kind not in known:
            raise DatasetError(f"unknown transform kind {kind!r}")
        extra = set(d) - known[kind]
        if extra:
            raise DatasetError(f"unknown keys {sorted(extra)} for transform {kind!r}")
        out = TransformSpec(
            kind=kind,
            attribute=d.get("attribute"),
            c=d.get("c"),
            merged_label=d.get("merged_label", "MERGED"),
            ratio=d.get("ratio"),
            seed=d.get("seed"),
            attributes=tuple(d["attributes"]) if "attributes" in d else None,
            field=d.get("field"),
            edges=tuple(d["edges"]) if "edges" in d else None,
        )
        out.validate()
        return out

    def validate(self) -> None:
        if self.kind == "cardinality-merge":
            if self.attribute is None or self.c is None:
                raise DatasetError("cardinality-merge needs 'attribute' and 'c'")
            if self.c < 2:
                raise DatasetError(f"cardinality-merge c must be >= 2, got {self.c}")
        elif self.kind == "shuffle":
            if self.ratio is None or not 0.0 <= self.ratio <= 1.0:
                raise DatasetError(f"shuffle ratio must be in [0, 1], got {self.ratio}")
        elif self.kind == "attribute-subset":
            if not self.attributes:
                raise DatasetError("attribute-subset needs a non-empty attribute list")
        elif self.kind == "discretize":
            if self.field is None or not self.edges or len(self.edges) < 2:
                raise DatasetError("discretize needs 'field' and >= 2 bin edges")
        else:
            raise DatasetError(f"unknown transform kind {self.kind!r}")

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "cardinality-merge":
            d.update(attribute=self.attribute, c=self.c, merged_label=self.merged_label)
        elif self.kind == "shuffle":
            d.update(ratio=self.ratio)
            if self.seed is not None:
                d.update(seed=self.seed)
        elif self.kind == "attribute-subset":
            d.update(attributes=list(self.attributes))
        elif self.kind == "discretize":
            d.update(field=self.field, edges=list(self.edges))
        return d


def bin_label(lo: float, hi: float, last: bool) -> str:
    close = "]" if last else ")"
    return f"[{_num(lo)},{_num(hi)}{close}"


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def assign_bin(value: float, edges: Sequence[float]) -> str:
    """Closed-open bins over ascending edges; the last bin is closed."""
    if not edges[0] <= value <= edges[-1]:
        raise DatasetError(f"value {value} outside bin range [{edges[0]}, {edges[-1]}]")
    for k in range(len(edges) - 1):
        last = k == len(edges) - 2
        if edges[k] <= value < edges[k + 1] or (last and value == edges[-1]):
            return bin_label(edges[k], edges[k + 1], last)
    raise DatasetError(f"value {value} not assignable to bins {edges}")  # pragma: no cover


def merge_attribute_values(dataset: Dataset, attribute: str, c: int,
                           merged_label: str = "MERGED") -> Dataset:
    """Reduce an attribute's cardinality to exactly `c`.

    Keeps the c-1 values with the highest target-entity counts (ties broken by
    domain order) and relabels everything else to `merged_label`.  Target
    discoverability is preserved: no hidden field changes.
    """
    i = dataset.schema.index_of(attribute)
    domain = dataset.schema.domains[i]
    if c > len(domain):
        raise DatasetError(
            f"cardinality-merge c={c} exceeds cardinality {len(domain)} of {attribute!r}"
        )
    if merged_label in domain:
        raise DatasetError(f"merged label {merged_label!r} collides with an existing value")
    yields = dataset.target_counts_by_value(i)
    ranked = sorted(domain, key=lambda v: (-yields[v], domain.index(v)))
    kept = set(ranked[: c - 1])
    new_domain = tuple(v for v in domain if v in kept) + (merged_label,)

    def remap(values: tuple[str, ...]) -> tuple[str, ...]:
        out = list(values)
        if out[i] not in kept:
            out[i] = merged_label
        return tuple(out)

    records = [replace(r, values=remap(r.values)) for r in dataset.records]
    domains = list(dataset.schema.domains)
    domains[i] = new_domain
    schema = AttributeSchema(dataset.schema.names, tuple(domains))
    return Dataset(schema, records, dataset.target_spec, rank=dataset.rank,
                   dropped_rows=dataset.dropped_rows)


def shuffle_hidden(dataset: Dataset, ratio: float, seed: int) -> Dataset:
    """Permute the hidden-field maps of a uniformly chosen ceil(ratio*n)-row
    subset among themselves; queryable values stay put, so only the
    attribute/target correlation is destroyed."""
    if not 0.0 <= ratio <= 1.0:
        raise DatasetError(f"shuffle ratio must be in [0, 1], got {ratio}")
    n = len(dataset.records)
    k = math.ceil(ratio * n)
    if k <= 1:
        return dataset
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    chosen = rng.choice(n, size=k, replace=False)
    perm = rng.permutation(k)
    hidden = [r.hidden for r in dataset.records]
    new_hidden = list(hidden)
    for src, dst in zip(chosen[perm], chosen):
        new_hidden[dst] = hidden[src]
    records = [
        r if new_hidden[j] is r.hidden else replace(r, hidden=new_hidden[j])
        for j, r in enumerate(dataset.records)
    ]
    return Dataset(dataset.schema, records, dataset.target_spec, rank=dataset.rank,
                   dropped_rows=dataset.dropped_rows)


def select_attributes(dataset: Dataset, attributes: Sequence[str]) -> Dataset:
    """Keep only the listed queryable attributes (schema order preserved)."""
    if not attributes:
        raise DatasetError("attribute subset must be non-empty")
    keep = [dataset.schema.index_of(a) for a in attributes]
    keep.sort()
    names = tuple(dataset.schema.names[i] for i in keep)
    domains = tuple(dataset.schema.domains[i] for i in keep)
    schema = AttributeSchema(names, domains)
    records = [replace(r, values=tuple(r.values[i] for i in keep)) for r in dataset.records]
    return Dataset(schema, records, dataset.target_spec, rank=dataset.rank,
                   dropped_rows=dataset.dropped_rows)


def discretize_hidden(dataset: Dataset, field_name: str, edges: Sequence[float]) -> Dataset:
    """Promote a numeric hidden field to a queryable attribute via explicit bins."""
    edges = tuple(float(e) for e in edges)
    if list(edges) != sorted(set(edges)):
        raise DatasetError("bin edges must be strictly ascending")
    if field_name in dataset.schema.names:
        raise DatasetError(f"{field_name!r} is already a queryable attribute")
    labels = tuple(
        bin_label(edges[k], edges[k + 1], k == len(edges) - 2) for k in range(len(edges) - 1)
    )
    records = []
    for r in dataset.records:
        raw = r.hidden.get(field_name)
        if raw is None or isinstance(raw, str):
            raise DatasetError(f"entity {r.id}: hidden field {field_name!r} is not numeric")
        records.append(replace(r, values=r.values + (assign_bin(float(raw), edges),)))
    schema = AttributeSchema(dataset.schema.names + (field_name,),
                             dataset.schema.domains + (labels,))
    return Dataset(schema, records, dataset.target_spec, rank=dataset.rank,
                   dropped_rows=dataset.dropped_rows)


def apply_transform(dataset: Dataset, spec: TransformSpec, rng_seed: int = 0) -> Dataset:
    """Dispatch a declarative transform; `rng_seed` backs seedless shuffles."""
    spec.validate()
    if spec.kind == "cardinality-merge":
        return merge_attribute_values(dataset, spec.attribute, spec.c, spec.merged_label)
    if spec.kind == "shuffle":
        seed = spec.seed if spec.seed is not None else rng_seed
        return shuffle_hidden(dataset, spec.ratio, seed)
    if spec.kind == "attribute-subset":
        return select_attributes(dataset, spec.attributes)
    if spec.kind == "discretize":
        return discretize_hidden(dataset, spec.field, spec.edges)
    raise DatasetError(f"unknown transform kind {spec.kind!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------


def read_declaration(path: Union[str, Path]) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        decl = json.load(fh)
    _validate_declaration(decl)
    return decl


_DECL_KEYS = {"delimiter", "id_column", "queryable", "hidden", "target", "rank_column"}
_QUERYABLE_KEYS = {"name", "domain", "bins"}


def _validate_declaration(decl: Mapping) -> None:
    if not isinstance(decl, Mapping):
        raise DatasetError("declaration must be a JSON object")
    extra = set(decl) - _DECL_KEYS
    if extra:
        raise DatasetError(f"unknown declaration keys: {sorted(extra)}")
    queryable = decl.get("queryable")
    if not queryable:
        raise DatasetError("declaration needs a non-empty 'queryable' list")
    for q in queryable:
        if not isinstance(q, Mapping) or "name" not in q:
            raise DatasetError("each queryable entry needs a 'name'")
        extra = set(q) - _QUERYABLE_KEYS
        if extra:
            raise DatasetError(f"unknown queryable keys for {q.get('name')!r}: {sorted(extra)}")
        if "bins" in q and "domain" in q:
            raise DatasetError(f"queryable {q['name']!r}: 'bins' and 'domain' are exclusive")


def load_dataset(
    data_path: Union[str, Path],
    declaration: Union[str, Path, Mapping],
    target_spec: Optional[HiddenPropertySpec] = None,
) -> Dataset:
    """Load a delimited text file under a sidecar declaration.

    The declaration names queryable columns (with closed domains, "infer", or
    numeric bin edges), hidden columns, and the target predicate.  Rows with
    empty required cells are rejected and counted (`Dataset.dropped_rows`);
    structural problems (missing columns, out-of-domain values, duplicate ids,
    short rows) raise with the offending row number.
    """
    if isinstance(declaration, (str, Path)):
        decl = read_declaration(declaration)
    else:
        _validate_declaration(declaration)
        decl = dict(declaration)

    delimiter = decl.get("delimiter", ",")
    id_column = decl.get("id_column")
    hidden_cols = list(decl.get("hidden", []))
    rank_column = decl.get("rank_column")
    if target_spec is None:
        if "target" not in decl:
            raise DatasetError("no target predicate: declaration lacks 'target'")
        target_spec = HiddenPropertySpec(decl["target"])
    bad = target_spec.fields - set(hidden_cols)
    if bad:
        raise DatasetError(f"target predicate references non-hidden fields: {sorted(bad)}")

    with open(data_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{data_path}: empty file (missing header)") from None
        header = [h.strip() for h in header]
        col = {name: i for i, name in enumerate(header)}

        needed = [q["name"] for q in decl["queryable"]] + hidden_cols
        if id_column:
            needed.append(id_column)
        if rank_column:
            needed.append(rank_column)
        missing = [c for c in needed if c not in col]
        if missing:
            raise DatasetError(f"{data_path}: missing columns {missing}")

        qnames, qcols, qdomains, qbins = [], [], [], []
        for q in decl["queryable"]:
            qnames.append(q["name"])
            qcols.append(col[q["name"]])
            if "bins" in q:
                edges = tuple(float(e) for e in q["bins"])
                if list(edges) != sorted(set(edges)):
                    raise DatasetError(f"{q['name']!r}: bin edges must be strictly ascending")
                qbins.append(edges)
                qdomains.append(None)
            else:
                qbins.append(None)
                dom = q.get("domain", "infer")
                qdomains.append(None if dom == "infer" else tuple(dom))

        rows: list[tuple] = []
        dropped = 0
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(
                    f"{data_path}:{row_no}: expected {len(header)} fields, got {len(row)}"
                )
            cells = [c.strip() for c in row]
            if any(cells[c] == "" for c in qcols) or any(cells[col[h]] == "" for h in hidden_cols):
                dropped += 1
                continue
            rows.append((row_no, cells))
        if dropped:
            log.warning("%s: rejected %d rows with missing values", data_path, dropped)

    inferred: list[set] = [set() for _ in qnames]
    for _, cells in rows:
        for k, c in enumerate(qcols):
            if qdomains[k] is None and qbins[k] is None:
                inferred[k].add(cells[c])

    domains = []
    for k, name in enumerate(qnames):
        if qbins[k] is not None:
            edges = qbins[k]
            domains.append(tuple(
                bin_label(edges[j], edges[j + 1], j == len(edges) - 2)
                for j in range(len(edges) - 1)
            ))
        elif qdomains[k] is not None:
            domains.append(qdomains[k])
        else:
            domains.append(tuple(sorted(inferred[k])))
    if rows:
        schema = AttributeSchema(tuple(qnames), tuple(domains))
    else:
        # empty file: fall back to declared domains, placeholder for inferred
        schema = AttributeSchema(
            tuple(qnames),
            tuple(d if d else ("<none>",) for d in domains),
        )

    domain_sets = [set(d) for d in schema.domains]
    records = []
    rank_keys = {}
    seen_ids: set[int] = set()
    for row_no, cells in rows:
        if id_column:
            try:
                entity_id = int(cells[col[id_column]])
            except ValueError:
                raise DatasetError(f"{data_path}:{row_no}: unparsable id {cells[col[id_column]]!r}") from None
        else:
            entity_id = row_no - 1  # 1-based data row number
        if entity_id in seen_ids:
            raise DatasetError(f"{data_path}:{row_no}: duplicate id {entity_id}")
        seen_ids.add(entity_id)

        values = []
        for k, c in enumerate(qcols):
            raw = cells[c]
            if qbins[k] is not None:
                try:
                    num = float(raw)
                except ValueError:
                    raise DatasetError(
                        f"{data_path}:{row_no}: non-numeric value {raw!r} for binned "
                        f"attribute {qnames[k]!r}"
                    ) from None
                try:
                    values.append(assign_bin(num, qbins[k]))
                except DatasetError as e:
                    raise DatasetError(f"{data_path}:{row_no}: {e}") from None
            else:
                if raw not in domain_sets[k]:
                    raise DatasetError(
                        f"{data_path}:{row_no}: value {raw!r} outside declared domain "
                        f"of {qnames[k]!r}"
                    )
                values.append(raw)

        hidden = {}
        for h in hidden_cols:
            raw = cells[col[h]]
            try:
                hidden[h] = float(raw)
            except ValueError:
                hidden[h] = raw
        records.append(EntityRecord(entity_id, tuple(values), hidden))
        if rank_column:
            try:
                rank_keys[entity_id] = float(cells[col[rank_column]])
            except ValueError:
                raise DatasetError(
                    f"{data_path}:{row_no}: non-numeric rank {cells[col[rank_column]]!r}"
                ) from None

    rank = None
    if rank_column and records:
        rank = tuple(sorted(rank_keys, key=lambda i: (rank_keys[i], i)))
    return Dataset(schema, records, target_spec, rank=rank, dropped_rows=dropped)
