import logging
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stancekit.dataset import Label, SentenceStore, load_pairs
from stancekit.errors import DataError
from stancekit.graph import Closure, build_graph, edge
from stancekit.transitive import TransitivePrediction, augment, check_soundness, overlay_predictions, predict_pairs

from conftest import pair_rows, write_csv
from oracles import fixpoint_labels

ONE_HOT = {lab: np.eye(3)[int(lab)] for lab in Label}


def test_predict_positive(joint):
    train, q = joint([("A", "B", "agreed"), ("B", "C", "agreed")], [("A", "C", "")])
    [p] = predict_pairs(train, q)
    assert p.row_id == "q0" and p.label is Label.AGREED and p.class_size == 3


def test_predict_negative_reversed_query(joint):
    train, q = joint([("A", "B", "disagreed"), ("B", "C", "agreed")], [("C", "A", "")])
    [p] = predict_pairs(train, q)
    assert p.label is Label.DISAGREED and p.via_disagreement


def test_predict_unseen(joint):
    train, q = joint([("A", "B", "agreed")], [("X", "Y", ""), ("A", "Z", "")])
    assert predict_pairs(train, q) == []


def test_predict_needs_joint_store(make_pairs):
    train = make_pairs([("A", "B", "agreed")])
    q = make_pairs([("A", "B")], labeled=False)
    with pytest.raises(DataError, match="share one SentenceStore"):
        predict_pairs(train, q)


def test_predict_skips_conflicted(joint):
    rows = [("A", "B", "agreed"), ("B", "C", "agreed"), ("A", "C", "disagreed"), ("C", "D", "disagreed"), ("E", "F", "agreed")]
    train, q = joint(rows, [("A", "B", ""), ("D", "A", ""), ("E", "F", "")])
    assert [p.row_id for p in predict_pairs(train, q)] == ["q2"]
    assert [p.row_id for p in predict_pairs(train, q, skip_conflicted=False)] == ["q0", "q1", "q2"]


def random_world(rnd, n_sent=10, n_rows=15, n_queries=15):
    names = [f"s{i}" for i in range(n_sent)]
    labels = ["agreed", "agreed", "disagreed", "unrelated"]
    rows = [(rnd.choice(names), rnd.choice(names), rnd.choice(labels)) for _ in range(n_rows)]
    queries = [(rnd.choice(names), rnd.choice(names), "") for _ in range(n_queries)]
    return rows, queries


@settings(max_examples=60, deadline=None)
@given(rnd=st.randoms(use_true_random=False))
def test_predictions_match_oracle_and_are_sound(rnd, tmp_path_factory):
    rows, queries = random_world(rnd)
    d = tmp_path_factory.mktemp("w")
    store = SentenceStore()
    train = load_pairs(write_csv(d / "t.csv", ["id", "title1", "title2", "label"], pair_rows(rows, "t")), store=store)
    q = load_pairs(write_csv(d / "q.csv", ["id", "title1", "title2", "label"], pair_rows(queries, "q")), labeled=False, store=store)
    preds = predict_pairs(train, q, skip_conflicted=True)
    check_soundness(train, q, preds)

    g = build_graph(train)
    oracle = fixpoint_labels(len(store), g.agree_edges, g.disagree_edges)
    conflicted_pairs = {k for k, v in oracle.items() if len(v) == 2}
    by_id = {p.row_id: p.label for p in predict_pairs(train, q, skip_conflicted=False)}
    for rec in q.pairs:
        a, b = rec.premise, rec.hypothesis
        if a == b:
            assert by_id[rec.row_id] is Label.AGREED
            continue
        want = oracle[edge(a, b)]
        if not want:
            assert rec.row_id not in by_id
        elif edge(a, b) not in conflicted_pairs:
            assert {by_id[rec.row_id].text} == want

    # Query order does not change per-row answers.
    shuffled = list(range(len(queries)))
    rnd.shuffle(shuffled)
    q2 = load_pairs(
        write_csv(d / "q2.csv", ["id", "title1", "title2"], [(f"q{i}", *queries[i][:2]) for i in shuffled]),
        labeled=False,
        store=store,
    )
    assert {p.row_id: p.label for p in predict_pairs(train, q2)} == {p.row_id: p.label for p in preds}


def _tp(row_id, label):
    return TransitivePrediction(row_id, label, 1, label is Label.DISAGREED)


def test_overlay_overrides():
    clf = [("q", np.array([0.1, 0.2, 0.7])), ("r", np.array([0.4, 0.4, 0.2]))]
    assert overlay_predictions(clf, [_tp("q", Label.AGREED)]) == [("q", Label.AGREED), ("r", Label.AGREED)]
    assert overlay_predictions(clf, []) == [("q", Label.UNRELATED), ("r", Label.AGREED)]


def test_overlay_unknown_row():
    with pytest.raises(DataError, match="missing from classifier"):
        overlay_predictions([("q", np.ones(3) / 3)], [_tp("zz", Label.AGREED)])


def test_overlay_ten_row_fixture():
    gold = [Label.AGREED] * 5 + [Label.UNRELATED] * 5
    clf_labels = list(gold)
    clf_labels[0] = Label.UNRELATED   # classifier wrong on rows 0 and 1
    clf_labels[1] = Label.DISAGREED
    clf = [(f"r{i}", ONE_HOT[lab]) for i, lab in enumerate(clf_labels)]
    # four overrides, all correct, covering both classifier errors
    trans = [_tp("r0", Label.AGREED), _tp("r1", Label.AGREED), _tp("r2", Label.AGREED), _tp("r3", Label.AGREED)]
    before = sum(lab == g for lab, g in zip(clf_labels, gold))
    after = sum(lab == g for (_, lab), g in zip(overlay_predictions(clf, trans), gold))
    assert Fraction(after - before, 10) == Fraction(1, 5)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 2), st.sampled_from([None, Label.AGREED, Label.DISAGREED])), min_size=1, max_size=30))
def test_overlay_changes_only_differing_rows(cells):
    clf = [(f"r{i}", ONE_HOT[Label(c)] * 0.8 + 0.2 / 3) for i, (c, _) in enumerate(cells)]
    trans = [_tp(f"r{i}", t) for i, (_, t) in enumerate(cells) if t is not None]
    out = overlay_predictions(clf, trans)
    base = overlay_predictions(clf, [])
    changed = sum(a != b for a, b in zip(out, base))
    assert changed == sum(1 for c, t in cells if t is not None and int(t) != c)
    assert [r for r, _ in out] == [r for r, _ in clf]


def test_augment_fixture(make_pairs):
    train = make_pairs([("A", "B", "agreed"), ("B", "C", "agreed"), ("D", "A", "disagreed")])
    A, B, C, D = (train.store.lookup(x) for x in "ABCD")
    got = [(p.premise, p.hypothesis, p.label) for p in augment(train)]
    assert got == [(A, C, Label.AGREED), (B, D, Label.DISAGREED), (C, D, Label.DISAGREED)]


def test_augment_empty(make_pairs):
    assert augment(make_pairs([("A", "B", "unrelated")])) == []


def test_augment_truncates(make_pairs, caplog):
    train = make_pairs([("A", "B", "agreed"), ("B", "C", "agreed"), ("C", "D", "agreed")])
    with caplog.at_level(logging.WARNING):
        pairs, total = augment(train, cap=2, return_total=True)
    assert len(pairs) == 2 and total == 3
    assert "truncated" in caplog.text


def test_augment_skips_conflicted_classes(make_pairs):
    train = make_pairs([("A", "B", "agreed"), ("B", "C", "agreed"), ("A", "C", "disagreed"), ("D", "E", "agreed"), ("E", "F", "agreed")])
    got = augment(train)
    D, F = train.store.lookup("D"), train.store.lookup("F")
    assert [(p.premise, p.hypothesis) for p in got] == [(D, F)]


@pytest.mark.parametrize("seed", range(20))
def test_augment_never_duplicates(make_pairs, seed):
    rows, _ = random_world(random.Random(seed), n_sent=12, n_rows=20)
    train = make_pairs(rows)
    seen = {edge(r.premise, r.hypothesis) for r in train.pairs}
    out = augment(train)
    keys = [edge(p.premise, p.hypothesis) for p in out]
    assert len(keys) == len(set(keys))
    assert not seen & set(keys)
    closure = Closure.of(build_graph(train))
    for p in out:
        assert closure.derive(p.premise, p.hypothesis) is p.label
