"""Agree/disagree sentence graph and its two-rule transitive closure.

Agreement is closed under reflexivity, symmetry and transitivity, so its
fixpoint is the set of connected components of the agree subgraph (kept in
a union-find).  A disagree edge between two sentences then relates their
whole components: ``dis(a, b) and agree(b, c) => dis(a, c)`` applied to
fixpoint is the cross product of the two classes.  A disagree edge whose
endpoints share one component is a conflict.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Iterator

from .dataset import Dataset, Label
from .errors import DataError

log = logging.getLogger(__name__)

Edge = tuple[int, int]

DEFAULT_CLOSURE_CAP = 10**8


def edge(u: int, v: int) -> Edge:
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class RelationGraph:
    n_sentences: int
    agree_edges: frozenset[Edge]
    disagree_edges: frozenset[Edge]
    self_pairs: int = 0

    @classmethod
    def from_edges(cls, n: int, agree: Iterable[Edge] = (), disagree: Iterable[Edge] = ()) -> "RelationGraph":
        agree = {edge(*e) for e in agree}
        disagree = {edge(*e) for e in disagree}
        for u, v in agree | disagree:
            if u == v:
                raise ValueError(f"self-edge ({u}, {v})")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) outside 0..{n - 1}")
        return cls(n, frozenset(agree), frozenset(disagree))

    def with_edges(self, agree: Iterable[Edge] = (), disagree: Iterable[Edge] = ()) -> "RelationGraph":
        return RelationGraph.from_edges(
            self.n_sentences, self.agree_edges | set(agree), self.disagree_edges | set(disagree)
        )


def build_graph(ds: Dataset) -> RelationGraph:
    """Agreed rows become agree edges, Disagreed rows disagree edges.

    Unrelated rows carry no relation. Rows whose premise and hypothesis intern
    to the same sentence are dropped and counted in ``self_pairs``.
    """
    ds.require_labels("build_graph")
    agree, disagree = set(), set()
    self_pairs = 0
    for rec in ds.pairs:
        if rec.label is Label.UNRELATED:
            continue
        if rec.premise == rec.hypothesis:
            self_pairs += 1
            continue
        (agree if rec.label is Label.AGREED else disagree).add(edge(rec.premise, rec.hypothesis))
    if self_pairs:
        log.warning("dropped %d self-pair row(s) (premise == hypothesis)", self_pairs)
    return RelationGraph(len(ds.store), frozenset(agree), frozenset(disagree), self_pairs)


class AgreementPartition:
    """Union-find over sentence ids, frozen after construction.

    Representatives are canonicalised to the smallest id in each class so
    results do not depend on union order.
    """

    def __init__(self, n: int, agree_edges: Iterable[Edge] = ()):
        parent = list(range(n))
        rank = [0] * n

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v in sorted(agree_edges):
            ru, rv = find(u), find(v)
            if ru == rv:
                continue
            if rank[ru] < rank[rv]:
                ru, rv = rv, ru
            parent[rv] = ru
            if rank[ru] == rank[rv]:
                rank[ru] += 1

        smallest: dict[int, int] = {}
        for x in range(n):
            smallest.setdefault(find(x), x)
        self.parent = tuple(smallest[find(x)] for x in range(n))
        self.rank = tuple(rank)
        members = defaultdict(list)
        for x, rep in enumerate(self.parent):
            members[rep].append(x)
        self._members = {rep: tuple(xs) for rep, xs in members.items()}

    def __len__(self) -> int:
        return len(self.parent)

    def class_of(self, x: int) -> int:
        return self.parent[x]

    def members(self, rep: int) -> tuple[int, ...]:
        return self._members[self.parent[rep]]

    def class_size(self, x: int) -> int:
        return len(self.members(x))

    def classes(self) -> dict[int, tuple[int, ...]]:
        return dict(self._members)


def agreement_partition(g: RelationGraph) -> AgreementPartition:
    return AgreementPartition(g.n_sentences, g.agree_edges)


@dataclass(frozen=True)
class DisagreementRelation:
    pairs: frozenset[Edge] = frozenset()
    _adj: dict[int, frozenset[int]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        adj = defaultdict(set)
        for a, b in self.pairs:
            adj[a].add(b)
            adj[b].add(a)
        object.__setattr__(self, "_adj", {k: frozenset(v) for k, v in adj.items()})

    def __contains__(self, pair: Edge) -> bool:
        return edge(*pair) in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def related(self, rep: int) -> frozenset[int]:
        return self._adj.get(rep, frozenset())


@dataclass(frozen=True)
class Conflict:
    witness_edge: Edge
    class_rep: int
    kind: str = "intra_class_disagreement"

    def to_dict(self, store=None) -> dict:
        d = {"kind": self.kind, "witness_edge": list(self.witness_edge), "class_rep": self.class_rep}
        if store is not None:
            d["witness_text"] = [store.text(s) for s in self.witness_edge]
        return d


def disagreement_relation(
    g: RelationGraph, p: AgreementPartition
) -> tuple[DisagreementRelation, list[Conflict]]:
    pairs = set()
    conflicts = []
    for u, v in sorted(g.disagree_edges):
        cu, cv = p.class_of(u), p.class_of(v)
        if cu == cv:
            conflicts.append(Conflict((u, v), cu))
        else:
            pairs.add(edge(cu, cv))
    return DisagreementRelation(frozenset(pairs)), conflicts


def detect_conflicts(g: RelationGraph) -> list[Conflict]:
    return disagreement_relation(g, agreement_partition(g))[1]


def derive_label(p: AgreementPartition, d: DisagreementRelation, a: int, b: int) -> Label | None:
    """Label implied for (a, b) by the closure, or None. Never Unrelated."""
    ca, cb = p.class_of(a), p.class_of(b)
    if ca == cb:
        return Label.AGREED
    if (ca, cb) in d:
        return Label.DISAGREED
    return None


class ClosureTooLarge(DataError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"closure would contain {count} pairs, above the cap of {cap}")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class Closure:
    """Partition, relation and conflicts of one graph, built together."""

    graph: RelationGraph
    partition: AgreementPartition
    relation: DisagreementRelation
    conflicts: tuple[Conflict, ...]

    @classmethod
    def of(cls, g: RelationGraph) -> "Closure":
        p = agreement_partition(g)
        d, conflicts = disagreement_relation(g, p)
        return cls(g, p, d, tuple(conflicts))

    @property
    def conflicted_classes(self) -> frozenset[int]:
        return frozenset(c.class_rep for c in self.conflicts)

    def derive(self, a: int, b: int) -> Label | None:
        return derive_label(self.partition, self.relation, a, b)

    def is_conflicted(self, a: int) -> bool:
        return self.partition.class_of(a) in self.conflicted_classes

    def count(self, exclude_conflicted: bool = False) -> int:
        skip = self.conflicted_classes if exclude_conflicted else frozenset()
        classes = self.partition.classes()
        total = sum(comb(len(m), 2) for rep, m in classes.items() if rep not in skip)
        for a, b in self.relation.pairs:
            if a not in skip and b not in skip:
                total += len(classes[a]) * len(classes[b])
        return total

    def iter_pairs(self, exclude_conflicted: bool = False) -> Iterator[tuple[Edge, Label]]:
        """Derivable unordered pairs (a < b) in lexicographic order."""
        skip = self.conflicted_classes if exclude_conflicted else frozenset()
        p, d = self.partition, self.relation
        for a in range(len(p)):
            ca = p.class_of(a)
            if ca in skip:
                continue
            partners = [(b, Label.AGREED) for b in p.members(ca) if b > a]
            for other in d.related(ca):
                if other not in skip:
                    partners.extend((b, Label.DISAGREED) for b in p.members(other) if b > a)
            partners.sort()
            for b, label in partners:
                yield (a, b), label


def enumerate_closure(
    g: RelationGraph, cap: int = DEFAULT_CLOSURE_CAP, exclude_conflicted: bool = False
) -> list[tuple[Edge, Label]]:
    closure = Closure.of(g)
    count = closure.count(exclude_conflicted)
    if count > cap:
        raise ClosureTooLarge(count, cap)
    return list(closure.iter_pairs(exclude_conflicted))


@dataclass(frozen=True)
class AuditReport:
    positive_triples: int = 0
    positive_held: int = 0
    negative_triples: int = 0
    negative_held: int = 0

    @property
    def positive_rate(self) -> float | None:
        return self.positive_held / self.positive_triples if self.positive_triples else None

    @property
    def negative_rate(self) -> float | None:
        return self.negative_held / self.negative_triples if self.negative_triples else None

    def to_dict(self, conflicts: Iterable[Conflict] = (), store=None) -> dict:
        return {
            "positive_triples": self.positive_triples,
            "positive_held": self.positive_held,
            "positive_rate": self.positive_rate,
            "negative_triples": self.negative_triples,
            "negative_held": self.negative_held,
            "negative_rate": self.negative_rate,
            "conflicts": [c.to_dict(store) for c in conflicts],
        }


def pair_labels(ds: Dataset) -> dict[Edge, frozenset[Label]]:
    """Every label observed for each unordered, non-self pair."""
    labels = defaultdict(set)
    for rec in ds.pairs:
        if rec.premise != rec.hypothesis:
            labels[edge(rec.premise, rec.hypothesis)].add(rec.label)
    return {k: frozenset(v) for k, v in labels.items()}


def audit_consistency(ds: Dataset) -> AuditReport:
    """Count how often the two transitivity rules hold on directly labeled triples.

    A triple is a pivot B with endpoints {A, C} where both (A, B) and (B, C)
    are labeled and (A, C) is labeled too. Agreed-Agreed legs make a positive
    triple, held when (A, C) is only ever Agreed; Disagreed-Agreed legs (either
    order) make a negative triple, held when (A, C) is only ever Disagreed.
    """
    ds.require_labels("audit_consistency")
    labels = pair_labels(ds)
    adj = defaultdict(set)
    for a, c in labels:
        adj[a].add(c)
        adj[c].add(a)

    agr, dis = Label.AGREED, Label.DISAGREED
    pos = pos_held = neg = neg_held = 0
    for (a, c), direct in labels.items():
        for b in adj[a] & adj[c]:
            ab, bc = labels[edge(a, b)], labels[edge(b, c)]
            if agr in ab and agr in bc:
                pos += 1
                pos_held += direct == {agr}
            if (dis in ab and agr in bc) or (agr in ab and dis in bc):
                neg += 1
                neg_held += direct == {dis}
    return AuditReport(pos, pos_held, neg, neg_held)
