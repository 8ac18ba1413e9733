"""Soft pseudo-label records and fine-tuning corpus assembly."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import (
    N_CLASSES,
    Dataset,
    SentenceStore,
    read_rows,
    as_prob_vector,
    format_float,
)
from .errors import DataError

SOFT_HEADER = ("id", "title1", "title2", "p_agreed", "p_disagreed", "p_unrelated")


@dataclass(frozen=True)
class SoftRecord:
    row_id: str
    premise: int
    hypothesis: int
    target: np.ndarray


class MergeMode(enum.Enum):
    TEST_ONLY = "test-only"
    TRAIN_PLUS_TEST = "train-plus-test"


def one_hot(index: int) -> np.ndarray:
    v = np.zeros(N_CLASSES)
    v[index] = 1.0
    return v


def make_soft_labels(
    test: Dataset, preds: Sequence[tuple[str, np.ndarray]], harden: bool = False
) -> list[SoftRecord]:
    """One record per test row carrying its predicted distribution as target.

    ``harden`` replaces each target by the one-hot of its argmax.
    """
    pred_map = dict(preds)
    if len(pred_map) != len(preds) or pred_map.keys() != set(test.row_ids):
        raise DataError("predictions must cover exactly the test row_ids")
    out = []
    for rec in test.pairs:
        vec = as_prob_vector(pred_map[rec.row_id], f"prediction for {rec.row_id!r}")
        if harden:
            vec = one_hot(int(np.argmax(vec)))
        out.append(SoftRecord(rec.row_id, rec.premise, rec.hypothesis, vec))
    return out


def merge(
    train: Dataset,
    soft: Sequence[SoftRecord],
    mode: MergeMode = MergeMode.TEST_ONLY,
    exclude_ids: Iterable[str] = (),
) -> list[SoftRecord]:
    """Build a fine-tuning corpus from train rows (as one-hot) and soft records.

    Rows listed in ``exclude_ids`` (the held-out validation set) are dropped.
    """
    exclude = set(exclude_ids)
    out: list[SoftRecord] = []
    if mode is MergeMode.TRAIN_PLUS_TEST:
        train.require_labels("merge")
        soft_ids = {s.row_id for s in soft}
        clash = soft_ids.intersection(train.row_ids)
        if clash:
            raise DataError(f"{len(clash)} row_id(s) appear in both train and pseudo-labeled test, e.g. {min(clash)!r}")
        out.extend(
            SoftRecord(r.row_id, r.premise, r.hypothesis, one_hot(int(r.label)))
            for r in train.pairs
            if r.row_id not in exclude
        )
    out.extend(s for s in soft if s.row_id not in exclude)
    return out


def write_soft_labels(records: Iterable[SoftRecord], store: SentenceStore, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SOFT_HEADER)
        for r in records:
            w.writerow([r.row_id, store.text(r.premise), store.text(r.hypothesis), *map(format_float, r.target)])


def load_soft_labels(path: str | Path, store: SentenceStore | None = None) -> tuple[SentenceStore, list[SoftRecord]]:
    store = SentenceStore() if store is None else store
    out = []
    seen: set[str] = set()
    for row_no, header, row in read_rows(path, SOFT_HEADER):
        values = dict(zip(header, row))
        row_id = values["id"].strip()
        if row_id in seen:
            raise DataError(f"{path}: duplicate row_id {row_id!r} at row {row_no}")
        seen.add(row_id)
        try:
            target = [float(values[k]) for k in SOFT_HEADER[3:]]
        except ValueError:
            raise DataError(f"{path}: malformed number at row {row_no}") from None
        vec = as_prob_vector(target, f"{path}: row {row_no}")
        out.append(SoftRecord(row_id, store.intern(values["title1"]), store.intern(values["title2"]), vec))
    return store, out
