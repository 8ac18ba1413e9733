"""Answering query pairs from the labeled closure, overlaying, augmenting."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, Label, argmax_label
from .errors import ConsistencyError, DataError
from .graph import DEFAULT_CLOSURE_CAP, Closure, RelationGraph, build_graph, edge

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransitivePrediction:
    row_id: str
    label: Label
    class_size: int
    via_disagreement: bool


@dataclass(frozen=True)
class AugmentedPair:
    premise: int
    hypothesis: int
    label: Label


def predict_pairs(train: Dataset, queries: Dataset, skip_conflicted: bool = True) -> list[TransitivePrediction]:
    """Label every query pair the training closure can derive, in query order.

    ``train`` and ``queries`` must have been interned into one store. With
    ``skip_conflicted`` a query touching any class that holds a conflict gets
    no prediction.
    """
    if train.store is not queries.store:
        raise DataError("train and query datasets must share one SentenceStore (load them jointly)")
    closure = Closure.of(build_graph(train))
    return predict_with_closure(closure, queries, skip_conflicted)


def predict_with_closure(
    closure: Closure, queries: Dataset, skip_conflicted: bool = True
) -> list[TransitivePrediction]:
    p = closure.partition
    n = len(p)
    out = []
    for rec in queries.pairs:
        a, b = rec.premise, rec.hypothesis
        if a >= n or b >= n:
            # Sentence interned after the graph was built: unseen in train.
            if a == b:
                out.append(TransitivePrediction(rec.row_id, Label.AGREED, 1, False))
            continue
        label = closure.derive(a, b)
        if label is None:
            continue
        if skip_conflicted and (closure.is_conflicted(a) or closure.is_conflicted(b)):
            continue
        out.append(TransitivePrediction(rec.row_id, label, p.class_size(a), label is Label.DISAGREED))
    return out


def check_soundness(train: Dataset, queries: Dataset, preds: Sequence[TransitivePrediction]) -> None:
    """Raise ConsistencyError if adding the predictions as edges creates a new conflict."""
    g = build_graph(train)
    before = {c.witness_edge for c in Closure.of(g).conflicts}
    agree, disagree = [], []
    for tp in preds:
        rec = queries[tp.row_id]
        if rec.premise == rec.hypothesis:
            continue
        (agree if tp.label is Label.AGREED else disagree).append(edge(rec.premise, rec.hypothesis))
    extended = RelationGraph.from_edges(
        len(queries.store), g.agree_edges | set(agree), g.disagree_edges | set(disagree)
    )
    new = [c for c in Closure.of(extended).conflicts if c.witness_edge not in before]
    if new:
        raise ConsistencyError(
            f"transitive predictions contradict each other: {len(new)} new conflict(s), "
            f"first witness {new[0].witness_edge}"
        )


def overlay_predictions(
    classifier: Sequence[tuple[str, np.ndarray]], transitive: Sequence[TransitivePrediction]
) -> list[tuple[str, Label]]:
    """Classifier argmax everywhere except rows the closure labeled."""
    known = {row_id for row_id, _ in classifier}
    overrides = {}
    for tp in transitive:
        if tp.row_id not in known:
            raise DataError(f"transitive row {tp.row_id!r} missing from classifier predictions")
        overrides[tp.row_id] = tp.label
    return [(row_id, overrides.get(row_id, argmax_label(vec))) for row_id, vec in classifier]


def augment(
    train: Dataset, cap: int = DEFAULT_CLOSURE_CAP, return_total: bool = False
) -> list[AugmentedPair] | tuple[list[AugmentedPair], int]:
    """New labeled pairs implied by the closure and absent from ``train``.

    Conflicted classes contribute nothing. Output is ordered by id pair; past
    ``cap`` pairs it is truncated with a warning. With ``return_total`` the
    untruncated count is returned alongside.
    """
    closure = Closure.of(build_graph(train))
    existing = {edge(r.premise, r.hypothesis) for r in train.pairs}
    pairs: list[AugmentedPair] = []
    total = 0
    for (a, b), label in closure.iter_pairs(exclude_conflicted=True):
        if (a, b) in existing:
            continue
        total += 1
        if total <= cap:
            pairs.append(AugmentedPair(a, b, label))
    if total > cap:
        log.warning("augmentation truncated to %d of %d derivable pairs", cap, total)
    return (pairs, total) if return_total else pairs
