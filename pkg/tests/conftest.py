import csv

import pytest

from stancekit.dataset import SentenceStore, load_pairs


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def pair_rows(triples, prefix="r"):
    """(premise, hypothesis, label) -> id,title1,title2,label rows."""
    return [(f"{prefix}{i}", p, h, lab) for i, (p, h, lab) in enumerate(triples)]


@pytest.fixture
def make_pairs(tmp_path):
    counter = iter(range(10**6))

    def make(triples, labeled=True, store=None, prefix="r"):
        path = tmp_path / f"pairs{next(counter)}.csv"
        if labeled:
            write_csv(path, ["id", "title1", "title2", "label"], pair_rows(triples, prefix))
        else:
            write_csv(path, ["id", "title1", "title2"], [(f"{prefix}{i}", t[0], t[1]) for i, t in enumerate(triples)])
        return load_pairs(path, labeled=labeled, store=store)

    return make


@pytest.fixture
def joint(make_pairs):
    """Load train (labeled) and queries (unlabeled) into one store."""

    def make(train_triples, query_pairs):
        store = SentenceStore()
        train = make_pairs(train_triples, store=store, prefix="t")
        queries = make_pairs(query_pairs, labeled=False, store=store, prefix="q")
        return train, queries

    return make
