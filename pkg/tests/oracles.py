"""Brute-force reference computations, deliberately independent of the package code."""

from __future__ import annotations

import itertools
from fractions import Fraction

AGR, DIS = "agreed", "disagreed"


def fixpoint_labels(n, agree, disagree):
    """Apply agree.agree -> agree and disagree.agree -> disagree (both symmetric) to fixpoint.

    Returns {(a, b): set of label names} over unordered pairs a < b.
    """
    A = [set() for _ in range(n)]
    D = [set() for _ in range(n)]
    for u, v in agree:
        A[u].add(v)
        A[v].add(u)
    for u, v in disagree:
        D[u].add(v)
        D[v].add(u)
    changed = True
    while changed:
        changed = False
        for a in range(n):
            for b in list(A[a]):
                for c in list(A[b]):
                    if c not in A[a]:
                        A[a].add(c)
                        A[c].add(a)
                        changed = True
            for b in list(D[a]):
                for c in list(A[b]):
                    if c not in D[a]:
                        D[a].add(c)
                        D[c].add(a)
                        changed = True
    out = {}
    for a, b in itertools.combinations(range(n), 2):
        labels = set()
        if b in A[a]:
            labels.add(AGR)
        if b in D[a]:
            labels.add(DIS)
        out[(a, b)] = labels
    return out


def components(n, edges):
    """Connected components by repeated BFS."""
    adj = {i: set() for i in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen, comps = set(), []
    for s in range(n):
        if s in seen:
            continue
        comp, frontier = {s}, [s]
        while frontier:
            x = frontier.pop()
            for y in adj[x] - comp:
                comp.add(y)
                frontier.append(y)
        seen |= comp
        comps.append(frozenset(comp))
    return comps


def audit_by_triples(rows):
    """Enumerate every (pivot, {A, C}) over sentence keys; rows are (a, b, label-name).

    Returns (pos_triples, pos_held, neg_triples, neg_held).
    """
    labels = {}
    for a, b, lab in rows:
        if a != b:
            labels.setdefault(frozenset((a, b)), set()).add(lab)
    nodes = sorted({x for pair in labels for x in pair})
    get = lambda x, y: labels.get(frozenset((x, y)), set())
    pos = pos_held = neg = neg_held = 0
    for b in nodes:
        for a, c in itertools.combinations(nodes, 2):
            if b in (a, c):
                continue
            ab, bc, ac = get(a, b), get(b, c), get(a, c)
            if not ac or not ab or not bc:
                continue
            if AGR in ab and AGR in bc:
                pos += 1
                pos_held += ac == {AGR}
            if (DIS in ab and AGR in bc) or (AGR in ab and DIS in bc):
                neg += 1
                neg_held += ac == {DIS}
    return pos, pos_held, neg, neg_held


def grid_blend_optimum(a, b, gold, k=100):
    """Smallest w = i/k maximizing exact-rational accuracy of argmax(w a + (1 - w) b)."""
    best_i, best_correct = None, -1
    for i in range(k + 1):
        w = Fraction(i, k)
        correct = 0
        for pa, pb, g in zip(a, b, gold):
            scores = [w * Fraction(x) + (1 - w) * Fraction(y) for x, y in zip(pa, pb)]
            top = max(scores)
            correct += scores.index(top) == g
        if correct > best_correct:
            best_i, best_correct = i, correct
    return Fraction(best_i, k), best_correct


def random_graph(rng, max_nodes=12, max_edges=20):
    """(n, agree, disagree) with distinct, non-self, unordered edges."""
    n = rng.randint(2, max_nodes)
    all_pairs = list(itertools.combinations(range(n), 2))
    k = rng.randint(0, min(max_edges, len(all_pairs)))
    chosen = rng.sample(all_pairs, k)
    agree, disagree = [], []
    for e in chosen:
        (agree if rng.random() < 0.6 else disagree).append(e)
    return n, agree, disagree


def check_closure_against_oracle(closure, n, agree, disagree):
    """Compare derive_label and the conflicted-pair set with the fixpoint oracle.

    Returns the number of pairs compared; raises AssertionError on mismatch.
    """
    oracle = fixpoint_labels(n, agree, disagree)
    conflicted = closure.conflicted_classes
    got_conflicts, want_conflicts = set(), set()
    for (a, b), labels in oracle.items():
        derived = closure.derive(a, b)
        name = None if derived is None else derived.text
        if len(labels) == 2:
            want_conflicts.add((a, b))
            assert name in labels, (a, b, name, labels)
        elif labels:
            assert {name} == labels, (a, b, name, labels)
        else:
            assert name is None, (a, b, name)
        if closure.partition.class_of(a) == closure.partition.class_of(b) and closure.partition.class_of(a) in conflicted:
            got_conflicts.add((a, b))
    assert got_conflicts == want_conflicts
    return len(oracle)


def lower_row(t):
    """(a, b, gold) classified correctly by argmax(w a + (1 - w) b) iff w > t, for 0 <= t < 1."""
    if t <= 0.5:
        y = 1 / (2 * (1 - t))
        return (1.0, 0.0, 0.0), (1 - y, y, 0.0), 0
    alpha = 1 / (2 * t)
    return (alpha, 1 - alpha, 0.0), (0.0, 1.0, 0.0), 0


def upper_row(t):
    """Row classified correctly iff w < t (lower_row in the mirrored weight)."""
    a, b, gold = lower_row(1 - t)
    return b, a, gold


def blend_fixture(w_opt, lo_margin=0.005, hi_margin=0.005, copies=3):
    """Rows whose only fully-correct grid weights lie in [w_opt, w_opt + hi_margin)."""
    rows = []
    if w_opt > 0:
        rows += [lower_row(w_opt - lo_margin)] * copies
    if w_opt < 1:
        rows += [upper_row(w_opt + hi_margin)] * copies
    a = [r[0] for r in rows]
    b = [r[1] for r in rows]
    gold = [r[2] for r in rows]
    return a, b, gold
