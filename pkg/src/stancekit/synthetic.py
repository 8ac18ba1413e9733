"""Seeded synthetic data: a ground-truth stance world, noisy model outputs,
and the bundled end-to-end fixture suite used by the pipeline tests."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import N_CLASSES, Label, write_predictions
from .ensemble import StackedFeatures


def noisy_model(gold: np.ndarray, rng: np.random.Generator, signal: np.ndarray, noise: float = 1.0) -> np.ndarray:
    """Probabilities from logits ``signal[gold] * onehot(gold) + N(0, noise)``.

    ``signal`` holds one strength per class, so models can be strong on some
    classes and weak on others.
    """
    n = len(gold)
    logits = rng.normal(0.0, noise, size=(n, N_CLASSES))
    logits[np.arange(n), gold] += signal[gold]
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


def model_signals(rng: np.random.Generator, n_models: int, base: float, spread: float) -> np.ndarray:
    return base * (1.0 + spread * rng.uniform(-1.0, 1.0, size=(n_models, N_CLASSES)))


def make_stacking_dataset(seed: int = 7, n_models: int = 5, sizes=(3000, 500, 500), base: float = 1.6, spread: float = 0.5):
    """Train/val/test stacked features whose labels a linear rule recovers.

    Returns ``{"train": (feats, labels), "val": ..., "test": ...}``.
    """
    rng = np.random.default_rng(seed)
    signals = model_signals(rng, n_models, base, spread)
    out = {}
    for name, n in zip(("train", "val", "test"), sizes):
        gold = rng.integers(0, N_CLASSES, size=n)
        probs = np.stack([noisy_model(gold, rng, signals[j]) for j in range(n_models)], axis=1)
        ids = tuple(f"{name}{i}" for i in range(n))
        out[name] = (StackedFeatures(ids, probs.reshape(n, -1)), gold)
    return out


@dataclass
class StanceWorld:
    """Sentences grouped into agreement classes with a disagreement relation."""

    class_of: np.ndarray
    related: set[tuple[int, int]]

    @classmethod
    def sample(cls, rng: np.random.Generator, n_classes: int, class_size: tuple[int, int], link_prob: float):
        sizes = rng.integers(class_size[0], class_size[1] + 1, size=n_classes)
        class_of = np.repeat(np.arange(n_classes), sizes)
        related = set()
        for c in range(n_classes):
            for d in range(c + 1, n_classes):
                if rng.random() < link_prob:
                    related.add((c, d))
        return cls(class_of, related)

    @property
    def n_sentences(self) -> int:
        return len(self.class_of)

    def label(self, a: int, b: int) -> Label:
        ca, cb = int(self.class_of[a]), int(self.class_of[b])
        if ca == cb:
            return Label.AGREED
        if (min(ca, cb), max(ca, cb)) in self.related:
            return Label.DISAGREED
        return Label.UNRELATED

    def sample_pairs(self, rng: np.random.Generator, n: int, mix=(0.35, 0.1, 0.55)) -> list[tuple[int, int, Label]]:
        by_class: dict[int, np.ndarray] = {}
        for c in np.unique(self.class_of):
            by_class[int(c)] = np.flatnonzero(self.class_of == c)
        related = sorted(self.related)
        out = []
        while len(out) < n:
            kind = rng.choice(3, p=mix)
            if kind == 0:
                members = by_class[int(rng.integers(len(by_class)))]
                if len(members) < 2:
                    continue
                a, b = rng.choice(members, size=2, replace=False)
            elif kind == 1 and related:
                c, d = related[int(rng.integers(len(related)))]
                a, b = rng.choice(by_class[c]), rng.choice(by_class[d])
            else:
                a, b = rng.choice(self.n_sentences, size=2, replace=False)
            a, b = int(a), int(b)
            if rng.random() < 0.5:
                a, b = b, a
            out.append((a, b, self.label(a, b)))
        return out


def sentence_text(i: int) -> str:
    # Varied spacing exercises normalization without changing identity.
    return f"headline {i:04d}" if i % 7 else f"  headline   {i:04d} "


def _write_pair_file(path: Path, rows, prefix: str, with_label: bool = True) -> list[str]:
    ids = []
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "title1", "title2", "label"] if with_label else ["id", "title1", "title2"])
        for i, (a, b, label) in enumerate(rows):
            row_id = f"{prefix}{i}"
            ids.append(row_id)
            row = [row_id, sentence_text(a), sentence_text(b)]
            w.writerow(row + [label.text] if with_label else row)
    return ids


def make_fixture_suite(
    out_dir: str | Path,
    seed: int = 0,
    n_train: int = 1500,
    n_test: int = 600,
    n_models: int = 5,
    val_fraction: float = 0.25,
) -> Path:
    """Write a complete pipeline input set to ``out_dir``; returns the config path.

    Layout: ``train.csv`` (labeled), ``test.csv`` (unlabeled), ``test_gold.csv``,
    ``val_ids.txt``, ``level1/model{j}.csv``, ``level1/external.csv``, the
    matching ``level2/`` files (stronger models), and ``pipeline.json``.
    """
    out = Path(out_dir)
    (out / "level1").mkdir(parents=True, exist_ok=True)
    (out / "level2").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    world = StanceWorld.sample(rng, n_classes=80, class_size=(2, 6), link_prob=0.02)
    train_rows = world.sample_pairs(rng, n_train)
    test_rows = world.sample_pairs(rng, n_test)
    train_ids = _write_pair_file(out / "train.csv", train_rows, "tr")
    test_ids = _write_pair_file(out / "test.csv", test_rows, "te", with_label=False)
    _write_pair_file(out / "test_gold.csv", test_rows, "te")

    n_val = int(round(val_fraction * n_train))
    val_ids = sorted(rng.choice(train_ids, size=n_val, replace=False).tolist(), key=lambda r: int(r[2:]))
    (out / "val_ids.txt").write_text("\n".join(val_ids) + "\n", encoding="utf-8")

    ids = train_ids + test_ids
    gold = np.array([int(r[2]) for r in train_rows + test_rows])
    config = {"train": "train.csv", "test": "test.csv", "test_gold": "test_gold.csv", "validation_ids": "val_ids.txt"}
    for level, base in (("level1", 1.2), ("level2", 1.5)):
        signals = model_signals(rng, n_models + 1, base, spread=0.6)
        models = []
        for j in range(n_models):
            name = f"{level}/model{j}.csv"
            write_predictions(zip(ids, noisy_model(gold, rng, signals[j])), out / name)
            models.append(name)
        write_predictions(zip(ids, noisy_model(gold, rng, signals[n_models])), out / f"{level}/external.csv")
        config[level] = {"models": models, "external": f"{level}/external.csv"}
    config["seed"] = seed
    path = out / "pipeline.json"
    path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
