import unicodedata

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stancekit.dataset import (
    COMPETITION_SCHEMA,
    ColumnSchema,
    Label,
    SentenceStore,
    dataset_stats,
    intern,
    load_labels,
    load_pairs,
    load_predictions,
    normalize_sentence,
    write_labels,
    write_pairs,
    write_predictions,
)
from stancekit.errors import DataError

from conftest import write_csv


def test_normalize_whitespace():
    assert normalize_sentence("  abc  def ") == "abc def"
    assert normalize_sentence("abc") == "abc"
    assert normalize_sentence("a\t\n b　c") == "a b c"
    assert normalize_sentence("") == ""


def test_normalize_composes_accents():
    decomposed = "Café crème"
    assert normalize_sentence(decomposed) == unicodedata.normalize("NFC", decomposed)
    assert normalize_sentence(decomposed) == "Café crème"


def test_normalize_keeps_case_and_width():
    assert normalize_sentence("ABC abc") == "ABC abc"
    assert normalize_sentence("Ａ") == "Ａ"  # fullwidth A untouched


@given(st.text())
def test_normalize_idempotent(text):
    once = normalize_sentence(text)
    assert normalize_sentence(once) == once


def test_intern():
    store = SentenceStore()
    assert intern(store, "x") == 0
    assert intern(store, " x ") == 0
    assert [intern(store, s) for s in ("a", "b", "x")] == [1, 2, 0]
    assert len(store) == 3
    assert store.text(1) == "a"


def test_load_pairs_labels(tmp_path):
    path = write_csv(
        tmp_path / "p.csv",
        ["id", "title1", "title2", "label"],
        [("1", "p1", "h1", "agreed"), ("2", "p1", "h2", "AGREED"), ("3", "p2", "h3", "Disagreed"), ("4", "p2", "h1", "unrelated")],
    )
    ds = load_pairs(path)
    assert len(ds) == 4
    assert [p.label for p in ds] == [Label.AGREED, Label.AGREED, Label.DISAGREED, Label.UNRELATED]
    assert ds["3"].premise == ds["4"].premise
    assert len(ds.store) == 5


def test_load_pairs_bad_label_names_row(tmp_path):
    path = write_csv(
        tmp_path / "p.csv",
        ["id", "title1", "title2", "label"],
        [("1", "a", "b", "agreed"), ("2", "a", "c", "agreed"), ("3", "b", "c", "maybe")],
    )
    with pytest.raises(DataError, match=r"'maybe' at row 3"):
        load_pairs(path)


@pytest.mark.parametrize(
    "header,rows,match",
    [
        (["id", "title1", "label"], [("1", "a", "agreed")], "missing column"),
        (["id", "title1", "title2", "label"], [("1", "a", "b", "agreed"), ("1", "a", "c", "agreed")], "duplicate row_id"),
        (["id", "title1", "title2", "label"], [("1", "a", "b")], "unparseable row 1"),
    ],
)
def test_load_pairs_errors(tmp_path, header, rows, match):
    path = write_csv(tmp_path / "p.csv", header, rows)
    with pytest.raises(DataError, match=match):
        load_pairs(path)


def test_load_pairs_missing_file(tmp_path):
    with pytest.raises(DataError, match="missing file"):
        load_pairs(tmp_path / "nope.csv")


def test_quoted_fields(tmp_path):
    path = tmp_path / "q.csv"
    path.write_text('id,title1,title2,label\n1,"a, with comma","say ""hi""",agreed\n', encoding="utf-8")
    ds = load_pairs(path)
    assert ds.texts(ds["1"]) == ("a, with comma", 'say "hi"')


def test_competition_schema(tmp_path):
    header = ["id", "tid1", "tid2", "title1_zh", "title2_zh", "title1_en", "title2_en", "label"]
    path = write_csv(tmp_path / "c.csv", header, [("0", "0", "1", "甲", "乙", "A", "B", "unrelated")])
    ds = load_pairs(path, COMPETITION_SCHEMA)
    assert ds.texts(ds["0"]) == ("甲", "乙")
    assert ColumnSchema.parse("competition") == COMPETITION_SCHEMA
    custom = ColumnSchema.parse("id=id,premise=title1_en,hypothesis=title2_en,label=label")
    assert load_pairs(path, custom).texts(ds["0"]) == ("A", "B")
    with pytest.raises(DataError):
        ColumnSchema.parse("nonsense")


def test_unlabeled_queries(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["id", "title1", "title2"], [("q", "a", "b")])
    ds = load_pairs(path, labeled=False)
    assert ds["q"].label is None
    with pytest.raises(DataError):
        load_pairs(path, labeled=True)


def test_pairs_round_trip_and_stable_ids(tmp_path):
    path = write_csv(
        tmp_path / "p.csv",
        ["id", "title1", "title2", "label"],
        [("x1", "  spaced   text ", "b", "agreed"), ("x2", "Café", "b", ""), ("x3", "c", "d", "unrelated")],
    )
    ds = load_pairs(path, labeled=False)
    again = load_pairs(path, labeled=False)
    assert [(p.premise, p.hypothesis) for p in ds] == [(p.premise, p.hypothesis) for p in again]
    out = tmp_path / "canon.csv"
    write_pairs(ds, out)
    back = load_pairs(out, labeled=False)
    assert back.row_ids == ds.row_ids
    assert [p.label for p in back] == [p.label for p in ds]
    assert [back.texts(p) for p in back] == [ds.texts(p) for p in ds]


def test_load_predictions(tmp_path):
    path = write_csv(
        tmp_path / "p.csv",
        ["id", "p_agreed", "p_disagreed", "p_unrelated"],
        [("q1", "1.0", "0.0", "0.0"), ("q2", "0.3335", "0.3335", "0.3334"), ("q3", "0.2", "0.3", "0.5004")],
    )
    preds = load_predictions(path)
    assert [r for r, _ in preds] == ["q1", "q2", "q3"]
    np.testing.assert_array_equal(preds[0][1], [1.0, 0.0, 0.0])
    for _, v in preds:
        assert abs(v.sum() - 1.0) <= 1e-9
    assert preds[2][1][2] == pytest.approx(0.5004 / 1.0004)


@pytest.mark.parametrize(
    "row,match",
    [
        (("q3", "0.5", "0.5", "0.5"), "sum to 1.5"),
        (("q", "-0.1", "0.6", "0.5"), "negative"),
        (("q", "abc", "0.5", "0.5"), "malformed number"),
    ],
)
def test_load_predictions_errors(tmp_path, row, match):
    path = write_csv(tmp_path / "p.csv", ["id", "p_agreed", "p_disagreed", "p_unrelated"], [row])
    with pytest.raises(DataError, match=match):
        load_predictions(path)


def test_load_predictions_duplicate(tmp_path):
    path = write_csv(tmp_path / "p.csv", ["id", "p_agreed", "p_disagreed", "p_unrelated"], [("a", 1, 0, 0), ("a", 0, 1, 0)])
    with pytest.raises(DataError, match="duplicate"):
        load_predictions(path)


@given(st.lists(st.lists(st.floats(0.001, 1.0), min_size=3, max_size=3), min_size=1, max_size=20))
def test_predictions_round_trip_bit_exact(tmp_path_factory, raw):
    preds = [(f"r{i}", np.array(v) / np.sum(v)) for i, v in enumerate(raw)]
    path = tmp_path_factory.mktemp("rt") / "p.csv"
    write_predictions(preds, path)
    back = load_predictions(path)
    assert [r for r, _ in back] == [r for r, _ in preds]
    for (_, a), (_, b) in zip(preds, back):
        assert a.tobytes() == b.tobytes()


def test_labels_round_trip(tmp_path):
    rows = [("a", Label.AGREED), ("b", Label.UNRELATED)]
    write_labels(rows, tmp_path / "l.csv")
    assert load_labels(tmp_path / "l.csv") == rows


def test_dataset_stats(make_pairs):
    a = make_pairs([("s", "t", "agreed"), ("s", "u", "agreed"), ("t", "u", "disagreed")])
    stats = dataset_stats(a)
    assert stats["label_counts"] == {"agreed": 2, "disagreed": 1, "unrelated": 0}
    assert stats["n_sentences"] == 3
    disjoint = make_pairs([("x", "y", "unrelated")])
    assert dataset_stats(a, disjoint)["shared_sentences"] == 0
    sharing = make_pairs([("s", "y", "unrelated")])
    assert dataset_stats(a, sharing)["shared_sentences"] == 1
