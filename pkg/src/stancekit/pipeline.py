"""End-to-end orchestration: stack, blend, pseudo-label, second level, overlay.

Every stage writes into its own numbered subdirectory of the output
directory together with a ``manifest.json``; ``report.json`` at the top
records the resolved configuration and each stage's summary.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .blending import BlendSpec, EvalReport, blend, evaluate_accuracy, search_blend_weight
from .dataset import (
    ColumnSchema,
    Dataset,
    Label,
    SentenceStore,
    argmax_label,
    dataset_stats,
    format_float,
    load_pairs,
    load_predictions,
    write_labels,
    write_pairs,
    write_predictions,
)
from .ensemble import (
    PredictionMatrix,
    StackedFeatures,
    TrainConfig,
    save_model,
    stack_features,
    stacker_predict,
    train_stacker,
)
from .errors import DataError
from .graph import DEFAULT_CLOSURE_CAP
from .pseudo import MergeMode, make_soft_labels, merge, write_soft_labels
from .transitive import check_soundness, overlay_predictions, predict_pairs

log = logging.getLogger(__name__)

STAGES = ("01_ingest", "02_level1", "03_pseudo", "04_level2", "05_transitive", "06_final")


@dataclass
class LevelInputs:
    models: list[str]
    external: str


@dataclass
class PipelineConfig:
    train: str
    test: str
    validation_ids: str
    level1: LevelInputs
    level2: LevelInputs | None = None
    test_gold: str | None = None
    schema: str = "minimal"
    stacker: dict = field(default_factory=dict)
    grid_step: float = 0.01
    blend_weight: float | None = None
    cap: int = DEFAULT_CLOSURE_CAP
    skip_conflicted: bool = True
    harden: bool = False
    seed: int = 0
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> "PipelineConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__) - {"base_dir"}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown pipeline config key(s): {', '.join(sorted(unknown))}")
        try:
            d["level1"] = LevelInputs(**d["level1"])
            if d.get("level2") is not None:
                d["level2"] = LevelInputs(**d["level2"])
            cfg = cls(**d, base_dir=str(base_dir))
        except (KeyError, TypeError) as exc:
            raise DataError(f"bad pipeline config: {exc}") from None
        cfg.train_config()  # validates stacker settings early
        if cfg.blend_weight is not None:
            BlendSpec(cfg.blend_weight)
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"missing file: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data, base_dir=path.parent)

    def resolve(self, p: str) -> Path:
        return Path(self.base_dir) / p

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig.from_dict({**self.stacker, "seed": self.seed})
        except (TypeError, ValueError) as exc:
            raise DataError(f"bad stacker config: {exc}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d["stacker"] = self.train_config().to_dict()
        return d


def write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def read_ids(path: Path) -> list[str]:
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    return [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def write_features(feats: StackedFeatures, path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write(",".join(["id"] + [f"f{i}" for i in range(feats.x.shape[1])]) + "\n")
        for r, row in zip(feats.row_ids, feats.x):
            fh.write(",".join([r, *map(format_float, row)]) + "\n")


class LevelResult:
    def __init__(self, blended, spec: BlendSpec, val_report: EvalReport, manifest: dict):
        self.blended = blended
        self.spec = spec
        self.val_report = val_report
        self.manifest = manifest


def run_level(
    cfg: PipelineConfig,
    level: LevelInputs,
    train: Dataset,
    val_ids: Sequence[str],
    test_ids: Sequence[str],
    stage_dir: Path,
) -> LevelResult:
    """Stack the level's model files, fit the stacker, blend with the external model."""
    stage_dir.mkdir(parents=True, exist_ok=True)
    all_ids = train.row_ids + list(test_ids)
    models = [load_predictions(cfg.resolve(p)) for p in level.models]
    external = load_predictions(cfg.resolve(level.external))
    matrix = PredictionMatrix.from_models(models, row_ids=all_ids)
    feats = stack_features(matrix)
    write_features(feats, stage_dir / "stacked.csv")

    val_set = set(val_ids)
    fit_ids = [r for r in train.row_ids if r not in val_set]
    fit_labels = np.array([int(train[r].label) for r in fit_ids])
    val_labels = np.array([int(train[r].label) for r in val_ids])
    tcfg = cfg.train_config()
    model = train_stacker(feats.subset(fit_ids), fit_labels, feats.subset(val_ids), val_labels, tcfg)
    save_model(model, stage_dir / "stacker.model")

    scored_ids = list(val_ids) + list(test_ids)
    ensemble = stacker_predict(model, feats.subset(scored_ids))
    write_predictions(ensemble, stage_dir / "ensemble.csv")

    ext_map = dict(external)
    try:
        ext = [(r, ext_map[r]) for r in scored_ids]
    except KeyError as exc:
        raise DataError(f"{cfg.resolve(level.external)}: no prediction for row {exc.args[0]!r}") from None
    n_val = len(val_ids)
    gold_val = [(r, train[r].label) for r in val_ids]
    if cfg.blend_weight is None:
        spec, val_report = search_blend_weight(ext[:n_val], ensemble[:n_val], gold_val, cfg.grid_step)
    else:
        spec = BlendSpec(cfg.blend_weight)
        val_report = evaluate_accuracy(
            [(r, argmax_label(v)) for r, v in blend(ext[:n_val], ensemble[:n_val], spec)], gold_val
        )
    blended = blend(ext, ensemble, spec)
    write_predictions(blended, stage_dir / "blended.csv")

    def val_acc(preds):
        return evaluate_accuracy([(r, argmax_label(v)) for r, v in preds[:n_val]], gold_val).accuracy

    manifest = {
        "inputs": {"models": list(level.models), "external": level.external},
        "stacker": {
            "epochs_run": model.epochs_run,
            "best_epoch": model.best_epoch,
            "best_val_accuracy": model.best_val_accuracy,
            "n_fit_rows": len(fit_ids),
            "n_val_rows": n_val,
        },
        "blend_weight_external": spec.w,
        "blend_weight_ensemble": 1.0 - spec.w,
        "weight_searched": cfg.blend_weight is None,
        "validation": {
            "external": val_acc(ext),
            "ensemble": val_acc(ensemble),
            "blended": val_report.to_dict(),
        },
        "outputs": ["stacked.csv", "stacker.model", "ensemble.csv", "blended.csv"],
    }
    write_json(manifest, stage_dir / "manifest.json")
    return LevelResult(blended, spec, val_report, manifest)


def _restrict(preds, ids: Sequence[str]):
    m = dict(preds)
    return [(r, m[r]) for r in ids]


def run_pipeline(cfg: PipelineConfig, out_dir: str | Path) -> dict:
    """Run every stage; returns the report also written to ``report.json``.

    When the config names level-2 prediction files that do not exist yet,
    the run stops after pseudo-label export with status ``paused`` so the
    external trainers can consume the soft labels; re-running once the
    files exist completes the pipeline.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schema = ColumnSchema.parse(cfg.schema)
    report: dict = {"config": cfg.to_dict(), "stages": {}, "status": "running"}

    def finish(status: str) -> dict:
        report["status"] = status
        write_json(report, out / "report.json")
        return report

    # Level-1 inputs must exist up front; level 2 may arrive later.
    for p in [cfg.train, cfg.test, cfg.validation_ids, *cfg.level1.models, cfg.level1.external]:
        if not cfg.resolve(p).is_file():
            raise DataError(f"missing file: {cfg.resolve(p)}")

    # 01 ingest
    stage = out / STAGES[0]
    stage.mkdir(exist_ok=True)
    store = SentenceStore()
    train = load_pairs(cfg.resolve(cfg.train), schema, labeled=True, store=store)
    test = load_pairs(cfg.resolve(cfg.test), schema, labeled=False, store=store)
    clash = set(train.row_ids).intersection(test.row_ids)
    if clash:
        raise DataError(f"{len(clash)} row_id(s) appear in both train and test, e.g. {min(clash)!r}")
    val_ids = read_ids(cfg.resolve(cfg.validation_ids))
    unknown = [r for r in val_ids if r not in train]
    if unknown:
        raise DataError(f"validation id {unknown[0]!r} is not a train row")
    write_pairs(train, stage / "train.csv")
    write_pairs(test, stage / "test.csv")
    stats = dataset_stats(train, test)
    write_json({"stats": stats, "n_validation": len(val_ids), "outputs": ["train.csv", "test.csv"]}, stage / "manifest.json")
    report["stages"][STAGES[0]] = stats
    test_ids = test.row_ids

    # 02 first level
    level1 = run_level(cfg, cfg.level1, train, val_ids, test_ids, out / STAGES[1])
    report["stages"][STAGES[1]] = level1.manifest

    # 03 pseudo labels from the first-level blend
    stage = out / STAGES[2]
    stage.mkdir(exist_ok=True)
    soft = make_soft_labels(test, _restrict(level1.blended, test_ids), harden=cfg.harden)
    test_only = merge(train, soft, MergeMode.TEST_ONLY)
    combined = merge(train, soft, MergeMode.TRAIN_PLUS_TEST, exclude_ids=val_ids)
    write_soft_labels(test_only, store, stage / "soft_test_only.csv")
    write_soft_labels(combined, store, stage / "soft_train_plus_test.csv")
    pseudo_manifest = {
        "hardened": cfg.harden,
        "n_test_only": len(test_only),
        "n_train_plus_test": len(combined),
        "outputs": ["soft_test_only.csv", "soft_train_plus_test.csv"],
    }
    write_json(pseudo_manifest, stage / "manifest.json")
    report["stages"][STAGES[2]] = pseudo_manifest

    # 04 second level, if its predictions are available
    final_blend = level1.blended
    if cfg.level2 is not None:
        missing = [p for p in [*cfg.level2.models, cfg.level2.external] if not cfg.resolve(p).is_file()]
        if missing:
            report["awaiting"] = missing
            log.warning("paused: level-2 prediction file(s) not present yet: %s", ", ".join(missing))
            return finish("paused")
        level2 = run_level(cfg, cfg.level2, train, val_ids, test_ids, out / STAGES[3])
        report["stages"][STAGES[3]] = level2.manifest
        final_blend = level2.blended

    # 05 transitive predictions
    stage = out / STAGES[4]
    stage.mkdir(exist_ok=True)
    transitive = predict_pairs(train, test, skip_conflicted=cfg.skip_conflicted)
    check_soundness(train, test, transitive)
    write_labels([(t.row_id, t.label) for t in transitive], stage / "transitive.csv")
    trans_manifest = {
        "n_derived": len(transitive),
        "n_agreed": sum(t.label is Label.AGREED for t in transitive),
        "n_disagreed": sum(t.label is Label.DISAGREED for t in transitive),
        "skip_conflicted": cfg.skip_conflicted,
        "outputs": ["transitive.csv"],
    }
    write_json(trans_manifest, stage / "manifest.json")
    report["stages"][STAGES[4]] = trans_manifest

    # 06 overlay and evaluation
    stage = out / STAGES[5]
    stage.mkdir(exist_ok=True)
    classifier = _restrict(final_blend, test_ids)
    final = overlay_predictions(classifier, transitive)
    write_labels(final, stage / "final.csv")
    final_manifest: dict = {"n_rows": len(final), "outputs": ["final.csv"]}
    if cfg.test_gold is not None:
        gold_ds = load_pairs(cfg.resolve(cfg.test_gold), schema, labeled=True)
        gold = [(r.row_id, r.label) for r in gold_ds.pairs]
        scores = {
            "final": evaluate_accuracy(final, gold).to_dict(),
            "classifier_only": evaluate_accuracy([(r, argmax_label(v)) for r, v in classifier], gold).to_dict(),
        }
        inputs = {}
        levels = [("level1", cfg.level1)] + ([("level2", cfg.level2)] if cfg.level2 else [])
        for name, lv in levels:
            for p in [*lv.models, lv.external]:
                preds = _restrict(load_predictions(cfg.resolve(p)), test_ids)
                inputs[p] = evaluate_accuracy([(r, argmax_label(v)) for r, v in preds], gold).accuracy
        scores["inputs"] = inputs
        scores["best_input"] = max(inputs.values())
        final_manifest["test_scores"] = scores
    write_json(final_manifest, stage / "manifest.json")
    report["stages"][STAGES[5]] = final_manifest
    return finish("complete")
