"""Convex two-way blending, grid search of the blend weight, accuracy."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dataset import N_CLASSES, Label
from .errors import DataError

Predictions = Sequence[tuple[str, np.ndarray]]


@dataclass(frozen=True)
class BlendSpec:
    """Weight ``w`` on the first prediction set, ``1 - w`` on the second."""

    w: float

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"blend weight {self.w} outside [0, 1]")


@dataclass(frozen=True)
class EvalReport:
    n_rows: int
    n_correct: int
    confusion: tuple[tuple[int, ...], ...]  # confusion[gold][pred]
    weighted_accuracy: float | None = None

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_rows if self.n_rows else 0.0

    @property
    def exact_accuracy(self) -> Fraction:
        return Fraction(self.n_correct, self.n_rows) if self.n_rows else Fraction(0)

    def to_dict(self) -> dict:
        d = {
            "n": self.n_rows,
            "correct": self.n_correct,
            "accuracy": self.accuracy,
            "confusion": [list(r) for r in self.confusion],
        }
        if self.weighted_accuracy is not None:
            d["weighted_accuracy"] = self.weighted_accuracy
        return d


def _aligned(a: Predictions, b: Predictions) -> tuple[list[str], np.ndarray, np.ndarray]:
    ids = [r for r, _ in a]
    b_map = dict(b)
    if len(b_map) != len(b) or set(ids) != b_map.keys() or len(set(ids)) != len(ids):
        raise DataError("blend inputs must cover identical row_id sets")
    pa = np.array([v for _, v in a], dtype=float).reshape(-1, N_CLASSES)
    pb = np.array([b_map[r] for r in ids], dtype=float).reshape(-1, N_CLASSES)
    return ids, pa, pb


def blend(a: Predictions, b: Predictions, spec: BlendSpec) -> list[tuple[str, np.ndarray]]:
    ids, pa, pb = _aligned(a, b)
    out = spec.w * pa + (1.0 - spec.w) * pb
    return list(zip(ids, out))


def _grid(step: float) -> list[float]:
    k = round(1.0 / step)
    if k < 1 or abs(k * step - 1.0) > 1e-9:
        raise DataError(f"grid step {step} does not divide 1 evenly")
    # i / k is the correctly rounded grid point; i * step accumulates error.
    return [i / k for i in range(k + 1)]


def search_blend_weight(
    a: Predictions,
    b: Predictions,
    labels: Sequence[tuple[str, Label]],
    step: float = 0.01,
    class_weights: Sequence[float] | None = None,
) -> tuple[BlendSpec, EvalReport]:
    """Exhaustive grid search for the blend weight maximizing accuracy.

    Returns the smallest grid weight attaining the best accuracy (or the best
    class-weighted accuracy when ``class_weights`` is given).
    """
    if not a:
        raise DataError("cannot search a blend weight on empty predictions")
    ids, pa, pb = _aligned(a, b)
    gold_map = dict(labels)
    if set(ids) - gold_map.keys():
        raise DataError("gold labels do not cover every prediction row")
    gold = np.array([int(gold_map[r]) for r in ids])
    row_w = None if class_weights is None else np.asarray(class_weights, dtype=float)[gold]

    best_w, best_score = 0.0, -1.0
    for w in _grid(step):
        correct = np.argmax(w * pa + (1.0 - w) * pb, axis=1) == gold
        score = float(correct.sum()) if row_w is None else float(row_w[correct].sum())
        if score > best_score:
            best_w, best_score = w, score
    spec = BlendSpec(best_w)
    preds = [(r, Label(int(np.argmax(v)))) for r, v in blend(a, b, spec)]
    return spec, evaluate_accuracy(preds, [(r, gold_map[r]) for r in ids], class_weights)


def evaluate_accuracy(
    preds: Sequence[tuple[str, Label]],
    gold: Sequence[tuple[str, Label]],
    class_weights: Sequence[float] | None = None,
) -> EvalReport:
    gold_map = dict(gold)
    pred_map = dict(preds)
    if pred_map.keys() != gold_map.keys():
        missing = pred_map.keys() ^ gold_map.keys()
        raise DataError(f"prediction and gold row_id sets differ ({len(missing)} row(s), e.g. {min(missing)!r})")
    confusion = [[0] * N_CLASSES for _ in range(N_CLASSES)]
    for r, p in pred_map.items():
        confusion[int(gold_map[r])][int(p)] += 1
    correct = sum(confusion[i][i] for i in range(N_CLASSES))
    weighted = None
    if class_weights is not None:
        cw = list(class_weights)
        total = sum(cw[g] * sum(confusion[g]) for g in range(N_CLASSES))
        weighted = sum(cw[g] * confusion[g][g] for g in range(N_CLASSES)) / total if total else 0.0
    return EvalReport(len(pred_map), correct, tuple(tuple(r) for r in confusion), weighted)
