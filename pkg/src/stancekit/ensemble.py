"""Stacking per-model class probabilities and training a softmax stacker.

The stacker is multinomial logistic regression on the concatenated
probability vectors (optionally with one tanh hidden layer), trained by
seeded mini-batch gradient descent on cross-entropy with early stopping on
validation accuracy.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import N_CLASSES, Label, format_float
from .errors import DataError

MODEL_FORMAT = "stancekit-stacker"
MODEL_VERSION = 1


@dataclass(frozen=True)
class PredictionMatrix:
    """``probs[i, j]`` is model j's probability vector for ``row_ids[i]``."""

    row_ids: tuple[str, ...]
    probs: np.ndarray

    @classmethod
    def from_models(
        cls, models: Sequence[Sequence[tuple[str, np.ndarray]]], row_ids: Sequence[str] | None = None
    ) -> "PredictionMatrix":
        """Align several prediction lists on ``row_ids`` (default: the first model's order)."""
        if not models:
            raise DataError("at least one model's predictions are required")
        lookups = [dict(m) for m in models]
        if row_ids is None:
            row_ids = [r for r, _ in models[0]]
            for j, lk in enumerate(lookups[1:], start=1):
                if lk.keys() != lookups[0].keys():
                    raise DataError(f"model {j} does not cover the same rows as model 0")
        probs = np.empty((len(row_ids), len(models), N_CLASSES))
        for j, lk in enumerate(lookups):
            for i, r in enumerate(row_ids):
                try:
                    probs[i, j] = lk[r]
                except KeyError:
                    raise DataError(f"model {j} has no prediction for row {r!r}") from None
        return cls(tuple(row_ids), probs)

    @property
    def n_models(self) -> int:
        return self.probs.shape[1]

    def model(self, j: int) -> list[tuple[str, np.ndarray]]:
        return list(zip(self.row_ids, self.probs[:, j]))


@dataclass(frozen=True)
class StackedFeatures:
    row_ids: tuple[str, ...]
    x: np.ndarray

    @property
    def n_models(self) -> int:
        return self.x.shape[1] // N_CLASSES

    def subset(self, row_ids: Sequence[str]) -> "StackedFeatures":
        index = {r: i for i, r in enumerate(self.row_ids)}
        try:
            rows = [index[r] for r in row_ids]
        except KeyError as exc:
            raise DataError(f"no stacked features for row {exc.args[0]!r}") from None
        return StackedFeatures(tuple(row_ids), self.x[rows])


def stack_features(m: PredictionMatrix) -> StackedFeatures:
    n, k, c = m.probs.shape
    return StackedFeatures(m.row_ids, m.probs.reshape(n, k * c).copy())


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0
    batch_size: int = 64
    hidden: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if not self.learning_rate > 0 or self.max_epochs < 1 or self.batch_size < 1:
            raise ValueError("learning_rate, max_epochs and batch_size must be positive")
        if not 0 <= self.patience <= self.max_epochs:
            raise ValueError("patience must lie in [0, max_epochs]")
        if self.hidden < 0 or self.seed < 0:
            raise ValueError("hidden and seed must be non-negative")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown stacker config key(s): {', '.join(sorted(unknown))}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StackerModel:
    # One matrix per layer; the last row of each holds the bias.
    weights: list[np.ndarray]
    n_models: int
    hidden: int = 0
    seed: int = 0
    epochs_run: int = 0
    best_epoch: int = 0
    best_val_accuracy: float = 0.0
    history: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.n_models * N_CLASSES

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise DataError(f"feature width {x.shape[-1]} does not match model width {self.n_features}")
        return softmax(forward(self.weights, x)[0])


def _affine(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    return x @ w[:-1] + w[-1]


def forward(weights: Sequence[np.ndarray], x: np.ndarray):
    """Return logits and the hidden activations (None without a hidden layer)."""
    if len(weights) == 1:
        return _affine(weights[0], x), None
    h = np.tanh(_affine(weights[0], x))
    return _affine(weights[1], h), h


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def loss_and_grad(weights: Sequence[np.ndarray], x: np.ndarray, targets: np.ndarray):
    """Mean cross-entropy against (possibly soft) targets and its gradient per layer."""
    n = x.shape[0]
    logits, h = forward(weights, x)
    loss = -float(np.sum(targets * log_softmax(logits))) / n
    dz = (softmax(logits) - targets) / n

    def affine_grad(inp, d):
        return np.vstack([inp.T @ d, d.sum(axis=0, keepdims=True)])

    if h is None:
        return loss, [affine_grad(x, dz)]
    w2 = weights[1]
    dh = (dz @ w2[:-1].T) * (1.0 - h * h)
    return loss, [affine_grad(x, dh), affine_grad(h, dz)]


def as_targets(labels, n: int) -> np.ndarray:
    """Labels (sequence of Label/int) or an (n, 3) array of probability targets."""
    arr = np.asarray(labels)
    if arr.ndim == 2:
        if arr.shape != (n, N_CLASSES):
            raise DataError(f"soft targets must have shape ({n}, {N_CLASSES}), got {arr.shape}")
        return arr.astype(float)
    if arr.shape != (n,):
        raise DataError(f"expected {n} labels, got {arr.shape[0] if arr.ndim else 0}")
    out = np.zeros((n, N_CLASSES))
    out[np.arange(n), arr.astype(int)] = 1.0
    return out


def _init_weights(n_features: int, hidden: int, rng: np.random.Generator) -> list[np.ndarray]:
    if hidden == 0:
        return [np.zeros((n_features + 1, N_CLASSES))]
    w1 = rng.normal(0.0, 1.0 / np.sqrt(n_features + 1), size=(n_features + 1, hidden))
    return [w1, np.zeros((hidden + 1, N_CLASSES))]


def _accuracy(weights, x: np.ndarray, gold: np.ndarray) -> float:
    pred = np.argmax(forward(weights, x)[0], axis=1)
    return float(np.mean(pred == gold))


def train_stacker(
    train: StackedFeatures,
    train_labels,
    val: StackedFeatures,
    val_labels,
    cfg: TrainConfig = TrainConfig(),
) -> StackerModel:
    """Fit the stacker; returns parameters from the best validation epoch.

    Both label arguments take hard labels or soft (n, 3) targets; validation
    accuracy is measured against the argmax of soft targets.
    """
    if len(train.row_ids) == 0 or len(val.row_ids) == 0:
        raise DataError("train and validation sets must be non-empty")
    if train.x.shape[1] != val.x.shape[1]:
        raise DataError("train and validation feature widths differ")
    overlap = set(train.row_ids) & set(val.row_ids)
    if overlap:
        raise DataError(f"{len(overlap)} row(s) appear in both train and validation, e.g. {min(overlap)!r}")
    for name, feats in (("train", train), ("validation", val)):
        if not np.all(np.isfinite(feats.x)):
            raise DataError(f"non-finite {name} features")

    x, t = train.x, as_targets(train_labels, len(train.row_ids))
    val_gold = np.argmax(as_targets(val_labels, len(val.row_ids)), axis=1)
    n = x.shape[0]

    rng = np.random.default_rng(cfg.seed)
    weights = _init_weights(x.shape[1], cfg.hidden, rng)
    m = [np.zeros_like(w) for w in weights]
    v = [np.zeros_like(w) for w in weights]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    best = [w.copy() for w in weights]
    best_acc, best_epoch, since_best = -1.0, 0, 0
    history: list[float] = []
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            _, grads = loss_and_grad(weights, x[idx], t[idx])
            step += 1
            for i, g in enumerate(grads):
                if cfg.optimizer == "sgd":
                    weights[i] -= cfg.learning_rate * g
                    continue
                m[i] = beta1 * m[i] + (1 - beta1) * g
                v[i] = beta2 * v[i] + (1 - beta2) * g * g
                m_hat = m[i] / (1 - beta1**step)
                v_hat = v[i] / (1 - beta2**step)
                weights[i] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        acc = _accuracy(weights, val.x, val_gold)
        history.append(acc)
        if acc > best_acc:
            best_acc, best_epoch, since_best = acc, epoch, 0
            best = [w.copy() for w in weights]
        else:
            since_best += 1
        if since_best >= cfg.patience:
            break

    return StackerModel(
        weights=best,
        n_models=x.shape[1] // N_CLASSES,
        hidden=cfg.hidden,
        seed=cfg.seed,
        epochs_run=epoch,
        best_epoch=best_epoch,
        best_val_accuracy=best_acc,
        history=history,
    )


def stacker_predict(model: StackerModel, feats: StackedFeatures) -> list[tuple[str, np.ndarray]]:
    return list(zip(feats.row_ids, model.predict_proba(feats.x)))


def save_model(model: StackerModel, path: str | Path) -> None:
    lines = [
        f"{MODEL_FORMAT} {MODEL_VERSION}",
        f"n_models {model.n_models}",
        f"hidden {model.hidden}",
        f"seed {model.seed}",
        f"epochs_run {model.epochs_run}",
        f"best_epoch {model.best_epoch}",
        f"best_val_accuracy {format_float(model.best_val_accuracy)}",
        "history " + " ".join(format_float(a) for a in model.history),
        f"layers {len(model.weights)}",
    ]
    for w in model.weights:
        lines.append(f"matrix {w.shape[0]} {w.shape[1]}")
        lines.extend(" ".join(format_float(x) for x in row) for row in w)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> StackerModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    try:
        fmt, version = lines[0].split()
        if fmt != MODEL_FORMAT or int(version) != MODEL_VERSION:
            raise DataError(f"{path}: unsupported model format {lines[0]!r}")
        meta = {}
        i = 1
        while not lines[i].startswith("layers"):
            key, _, value = lines[i].partition(" ")
            meta[key] = value
            i += 1
        n_layers = int(lines[i].split()[1])
        i += 1
        weights = []
        for _ in range(n_layers):
            _, rows, cols = lines[i].split()
            rows, cols = int(rows), int(cols)
            w = np.array([[float(x) for x in lines[i + 1 + r].split()] for r in range(rows)])
            if w.shape != (rows, cols):
                raise DataError(f"{path}: matrix shape mismatch")
            weights.append(w)
            i += 1 + rows
    except (IndexError, ValueError) as exc:
        raise DataError(f"{path}: malformed model file ({exc})") from None
    model = StackerModel(
        weights=weights,
        n_models=int(meta["n_models"]),
        hidden=int(meta["hidden"]),
        seed=int(meta["seed"]),
        epochs_run=int(meta["epochs_run"]),
        best_epoch=int(meta["best_epoch"]),
        best_val_accuracy=float(meta["best_val_accuracy"]),
        history=[float(a) for a in meta.get("history", "").split()],
    )
    if weights[0].shape[0] != model.n_features + 1 or not all(np.all(np.isfinite(w)) for w in weights):
        raise DataError(f"{path}: weights inconsistent with header")
    return model


def labels_to_array(labels: Sequence[Label]) -> np.ndarray:
    return np.array([int(lab) for lab in labels], dtype=int)
