"""Pair and prediction file formats, sentence interning and validation."""

from __future__ import annotations

import csv
import enum
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

N_CLASSES = 3
PROB_SUM_TOLERANCE = 1e-3
# Vectors already within this distance of 1 are kept bit-for-bit.
PROB_EXACT_TOLERANCE = 1e-9
PREDICTION_HEADER = ("id", "p_agreed", "p_disagreed", "p_unrelated")


class Label(enum.IntEnum):
    AGREED = 0
    DISAGREED = 1
    UNRELATED = 2

    @classmethod
    def parse(cls, text: str) -> "Label":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown label {text!r}") from None

    @property
    def text(self) -> str:
        return self.name.lower()


def format_float(x: float) -> str:
    # 17 significant digits round-trip any double exactly.
    return format(float(x), ".17g")


_WS = re.compile(r"\s+")


def normalize_sentence(text: str) -> str:
    """NFC-compose, trim, and collapse internal whitespace runs to one space."""
    return _WS.sub(" ", unicodedata.normalize("NFC", text)).strip()


class SentenceStore:
    """Ordered, deduplicated collection of normalized sentences."""

    def __init__(self, sentences: Iterable[str] = ()):
        self._texts: list[str] = []
        self._index: dict[str, int] = {}
        for s in sentences:
            self.intern(s)

    def intern(self, text: str) -> int:
        norm = normalize_sentence(text)
        sid = self._index.get(norm)
        if sid is None:
            sid = len(self._texts)
            self._texts.append(norm)
            self._index[norm] = sid
        return sid

    def lookup(self, text: str) -> int | None:
        return self._index.get(normalize_sentence(text))

    def text(self, sid: int) -> str:
        return self._texts[sid]

    def __len__(self) -> int:
        return len(self._texts)

    def __contains__(self, text: str) -> bool:
        return normalize_sentence(text) in self._index

    def __iter__(self):
        return iter(self._texts)


def intern(store: SentenceStore, text: str) -> int:
    return store.intern(text)


@dataclass(frozen=True)
class PairRecord:
    row_id: str
    premise: int
    hypothesis: int
    label: Label | None = None


@dataclass(frozen=True)
class Dataset:
    store: SentenceStore
    pairs: tuple[PairRecord, ...]
    _by_id: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        by_id: dict[str, int] = {}
        for i, rec in enumerate(self.pairs):
            if rec.row_id in by_id:
                raise DataError(f"duplicate row_id {rec.row_id!r}")
            by_id[rec.row_id] = i
        object.__setattr__(self, "_by_id", by_id)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, row_id: str) -> PairRecord:
        return self.pairs[self._by_id[row_id]]

    def __contains__(self, row_id: str) -> bool:
        return row_id in self._by_id

    @property
    def row_ids(self) -> list[str]:
        return [p.row_id for p in self.pairs]

    @property
    def fully_labeled(self) -> bool:
        return all(p.label is not None for p in self.pairs)

    def require_labels(self, what: str = "dataset") -> None:
        for p in self.pairs:
            if p.label is None:
                raise DataError(f"{what}: row {p.row_id!r} has no label")

    def labels(self) -> list[tuple[str, Label]]:
        self.require_labels()
        return [(p.row_id, p.label) for p in self.pairs]

    def texts(self, rec: PairRecord) -> tuple[str, str]:
        return self.store.text(rec.premise), self.store.text(rec.hypothesis)


@dataclass(frozen=True)
class ColumnSchema:
    """Names of the columns holding each pair field."""

    id: str = "id"
    premise: str = "title1"
    hypothesis: str = "title2"
    label: str = "label"

    @classmethod
    def parse(cls, spec: str | None) -> "ColumnSchema":
        """Accept a preset name or ``id=..,premise=..,hypothesis=..,label=..``."""
        if spec is None or spec == "":
            return MINIMAL_SCHEMA
        if spec in SCHEMAS:
            return SCHEMAS[spec]
        fields = {}
        for part in spec.split(","):
            key, sep, value = part.partition("=")
            key = key.strip()
            if not sep or key not in ("id", "premise", "hypothesis", "label"):
                raise DataError(
                    f"bad schema {spec!r}: expected a preset ({', '.join(SCHEMAS)}) "
                    "or id=COL,premise=COL,hypothesis=COL[,label=COL]"
                )
            fields[key] = value.strip()
        return cls(**fields)

    def describe(self) -> str:
        return f"id={self.id},premise={self.premise},hypothesis={self.hypothesis},label={self.label}"


MINIMAL_SCHEMA = ColumnSchema()
# id,tid1,tid2,title1_zh,title2_zh,title1_en,title2_en,label
COMPETITION_SCHEMA = ColumnSchema("id", "title1_zh", "title2_zh", "label")
SCHEMAS = {"minimal": MINIMAL_SCHEMA, "competition": COMPETITION_SCHEMA}


def _open_table(path: str | Path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    return path.open(newline="", encoding="utf-8-sig")


def read_rows(path: str | Path, required: Sequence[str]):
    """Yield (row_number, header, fields) per data row; row numbers start at 1."""
    with _open_table(path) as fh:
        reader = csv.reader(fh, strict=True)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header required") from None
        except csv.Error as exc:
            raise DataError(f"{path}: unparseable header: {exc}") from None
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        row_no = 0
        while True:
            try:
                row = next(reader)
            except StopIteration:
                return
            except csv.Error as exc:
                raise DataError(f"{path}: unparseable row {row_no + 1}: {exc}") from None
            row_no += 1
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: unparseable row {row_no}: expected {len(header)} fields, got {len(row)}"
                )
            yield row_no, header, row


def load_pairs(
    path: str | Path,
    schema: ColumnSchema = MINIMAL_SCHEMA,
    labeled: bool = True,
    store: SentenceStore | None = None,
) -> Dataset:
    """Read a pair table, interning both sentences of every row.

    Pass an existing ``store`` to intern jointly with another file (train and
    test must share one store for transitive prediction). With ``labeled``
    false the label column is optional and blank cells load as ``None``.
    """
    store = SentenceStore() if store is None else store
    required = [schema.id, schema.premise, schema.hypothesis]
    if labeled:
        required.append(schema.label)
    pairs = []
    seen: set[str] = set()
    for row_no, header, row in read_rows(path, required):
        values = dict(zip(header, row))
        row_id = values[schema.id].strip()
        if row_id in seen:
            raise DataError(f"{path}: duplicate row_id {row_id!r} at row {row_no}")
        seen.add(row_id)
        label = None
        raw = values.get(schema.label)
        if raw is not None and (labeled or raw.strip()):
            try:
                label = Label.parse(raw)
            except ValueError:
                raise DataError(f"{path}: unknown label {raw!r} at row {row_no}") from None
        premise = store.intern(values[schema.premise])
        hypothesis = store.intern(values[schema.hypothesis])
        pairs.append(PairRecord(row_id, premise, hypothesis, label))
    return Dataset(store, tuple(pairs))


def write_pairs(ds: Dataset, path: str | Path) -> None:
    """Write ``ds`` in the minimal canonical layout (id,title1,title2,label)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "title1", "title2", "label"])
        for rec in ds.pairs:
            p, h = ds.texts(rec)
            w.writerow([rec.row_id, p, h, "" if rec.label is None else rec.label.text])


def _validate_prob(values: Sequence[float], where: str) -> np.ndarray:
    vec = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(vec)):
        raise DataError(f"{where}: non-finite probability")
    if np.any(vec < 0):
        raise DataError(f"{where}: negative probability")
    total = float(vec.sum())
    if abs(total - 1.0) > PROB_SUM_TOLERANCE:
        raise DataError(f"{where}: probabilities sum to {total:.6g}, not 1")
    if abs(total - 1.0) > PROB_EXACT_TOLERANCE:
        vec = vec / total
    return vec


def as_prob_vector(values: Sequence[float], where: str = "vector") -> np.ndarray:
    """Validate a 3-class probability vector (renormalizing small drift)."""
    if len(values) != N_CLASSES:
        raise DataError(f"{where}: expected {N_CLASSES} probabilities, got {len(values)}")
    return _validate_prob(values, where)


def load_predictions(path: str | Path, n_classes: int = N_CLASSES) -> list[tuple[str, np.ndarray]]:
    """Read ``id,p_agreed,p_disagreed,p_unrelated`` rows in file order."""
    if n_classes != N_CLASSES:
        raise ValueError("only 3-class prediction files are supported")
    out = []
    seen: set[str] = set()
    with _open_table(path) as fh:
        reader = csv.reader(fh, strict=True)
        header = [h.strip() for h in next(reader, [])]
        if len(header) != 4 or header[0] not in ("id", "row_id") or tuple(header[1:]) != PREDICTION_HEADER[1:]:
            raise DataError(f"{path}: expected header {','.join(PREDICTION_HEADER)}, got {','.join(header)}")
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            where = f"{path}: row {row_no}"
            if len(row) != 4:
                raise DataError(f"{where}: expected 4 fields, got {len(row)}")
            row_id = row[0].strip()
            if row_id in seen:
                raise DataError(f"{where}: duplicate row_id {row_id!r}")
            seen.add(row_id)
            try:
                values = [float(x) for x in row[1:]]
            except ValueError:
                raise DataError(f"{where}: malformed number in {row[1:]}") from None
            out.append((row_id, _validate_prob(values, where)))
    return out


def write_predictions(preds: Iterable[tuple[str, np.ndarray]], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_HEADER)
        for row_id, vec in preds:
            w.writerow([row_id, *(format_float(v) for v in vec)])


def load_labels(path: str | Path) -> list[tuple[str, Label]]:
    """Read an ``id,label`` file (transitive predictions, final outputs)."""
    out = []
    seen: set[str] = set()
    for row_no, header, row in read_rows(path, ["id", "label"]):
        values = dict(zip(header, row))
        row_id = values["id"].strip()
        if row_id in seen:
            raise DataError(f"{path}: duplicate row_id {row_id!r} at row {row_no}")
        seen.add(row_id)
        try:
            out.append((row_id, Label.parse(values["label"])))
        except ValueError:
            raise DataError(f"{path}: unknown label {values['label']!r} at row {row_no}") from None
    return out


def write_labels(rows: Iterable[tuple[str, Label]], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label"])
        for row_id, label in rows:
            w.writerow([row_id, Label(label).text])


def read_header(path: str | Path) -> list[str]:
    with _open_table(path) as fh:
        return [h.strip() for h in next(csv.reader(fh), [])]


def argmax_label(vec: np.ndarray) -> Label:
    # np.argmax returns the first maximum: ties go to the lowest class index.
    return Label(int(np.argmax(vec)))


def dataset_stats(a: Dataset, b: Dataset | None = None) -> dict:
    """Label counts and sentence counts; with ``b``, the number of shared sentences."""
    counts = Counter(p.label for p in a.pairs)
    sentences_a = {s for p in a.pairs for s in a.texts(p)}
    report = {
        "n_pairs": len(a),
        "label_counts": {lab.text: counts.get(lab, 0) for lab in Label},
        "unlabeled": counts.get(None, 0),
        "n_sentences": len(sentences_a),
        "self_pairs": sum(1 for p in a.pairs if p.premise == p.hypothesis),
    }
    if b is not None:
        sentences_b = {s for p in b.pairs for s in b.texts(p)}
        report["other_n_pairs"] = len(b)
        report["other_n_sentences"] = len(sentences_b)
        report["shared_sentences"] = len(sentences_a & sentences_b)
    return report


__all__ = [
    "COMPETITION_SCHEMA",
    "MINIMAL_SCHEMA",
    "ColumnSchema",
    "Dataset",
    "Label",
    "PairRecord",
    "SentenceStore",
    "argmax_label",
    "as_prob_vector",
    "dataset_stats",
    "format_float",
    "intern",
    "load_labels",
    "load_pairs",
    "load_predictions",
    "normalize_sentence",
    "write_labels",
    "write_pairs",
    "write_predictions",
]
