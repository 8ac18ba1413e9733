"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal consistency
failure. Outputs go to ``--out-dir`` under fixed file names; reports are
JSON with sorted keys so re-runs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .blending import BlendSpec, blend, evaluate_accuracy, search_blend_weight
from .dataset import (
    ColumnSchema,
    Label,
    SentenceStore,
    argmax_label,
    dataset_stats,
    load_labels,
    load_pairs,
    load_predictions,
    read_header,
    write_labels,
    write_pairs,
    write_predictions,
)
from .ensemble import (
    PredictionMatrix,
    TrainConfig,
    save_model,
    stack_features,
    stacker_predict,
    train_stacker,
)
from .errors import ConsistencyError, DataError
from .graph import DEFAULT_CLOSURE_CAP, Closure, audit_consistency, build_graph, enumerate_closure
from .pipeline import PipelineConfig, read_ids, run_pipeline, write_features, write_json
from .pseudo import SOFT_HEADER, MergeMode, load_soft_labels, make_soft_labels, merge, write_soft_labels
from .synthetic import make_fixture_suite
from .transitive import augment, check_soundness, predict_pairs

log = logging.getLogger("stancekit")

GLOBAL_DEFAULTS = {
    "seed": 0,
    "out_dir": ".",
    "schema": "minimal",
    "grid_step": 0.01,
    "cap": DEFAULT_CLOSURE_CAP,
    "strict": False,
}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda k: argparse.SUPPRESS) if suppress else GLOBAL_DEFAULTS.get
    p.add_argument("--seed", type=int, default=d("seed"), help="random seed (default 0)")
    p.add_argument("--out-dir", default=d("out_dir"), help="directory for outputs (default .)")
    p.add_argument("--schema", default=d("schema"),
                   help="pair-file column mapping: 'minimal', 'competition', or id=..,premise=..,hypothesis=..,label=..")
    p.add_argument("--grid-step", type=float, default=d("grid_step"), help="blend-weight grid step (default 0.01)")
    p.add_argument("--cap", type=int, default=d("cap"), help="closure / augmentation size cap (default 1e8)")
    p.add_argument("--strict", action="store_true", default=d("strict"),
                   help="treat warnings (self-pairs, conflicts, truncation) as data errors")


def _schema(args) -> ColumnSchema:
    return ColumnSchema.parse(args.schema)


def _out(args, name: str) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _load_joint(args, with_test: bool = True):
    store = SentenceStore()
    train = load_pairs(args.train, _schema(args), labeled=True, store=store)
    test = load_pairs(args.test, _schema(args), labeled=False, store=store) if with_test else None
    return train, test


def _strict_graph_checks(args, train) -> None:
    if not args.strict:
        return
    g = build_graph(train)
    if g.self_pairs:
        raise DataError(f"{g.self_pairs} self-pair row(s) in {args.train}")
    conflicts = Closure.of(g).conflicts
    if conflicts:
        raise DataError(f"{len(conflicts)} conflict(s) in {args.train}, first witness {conflicts[0].witness_edge}")


def _load_gold(path: str, schema: ColumnSchema) -> list[tuple[str, Label]]:
    header = read_header(path)
    if header == ["id", "label"]:
        return load_labels(path)
    return load_pairs(path, schema, labeled=True).labels()


def _class_weights(text: str | None):
    if text is None:
        return None
    try:
        w = [float(x) for x in text.split(",")]
    except ValueError:
        raise DataError(f"bad --class-weights {text!r}") from None
    if len(w) != 3 or any(x < 0 for x in w):
        raise DataError("--class-weights needs three non-negative numbers")
    return w


def cmd_ingest(args) -> int:
    train, test = _load_joint(args, with_test=args.test is not None)
    write_pairs(train, _out(args, "train.csv"))
    if test is not None:
        write_pairs(test, _out(args, "test.csv"))
    stats = dataset_stats(train, test)
    write_json(stats, _out(args, "stats.json"))
    print(json.dumps(stats, sort_keys=True))
    return 0


def cmd_audit(args) -> int:
    train, _ = _load_joint(args, with_test=False)
    report = audit_consistency(train)
    conflicts = Closure.of(build_graph(train)).conflicts
    d = report.to_dict(conflicts, train.store)
    write_json(d, _out(args, "audit.json"))
    print(f"positive {report.positive_held}/{report.positive_triples} rate={d['positive_rate']}")
    print(f"negative {report.negative_held}/{report.negative_triples} rate={d['negative_rate']}")
    print(f"conflicts {len(conflicts)}")
    _strict_graph_checks(args, train)
    return 0


def _write_text_pairs(rows, store, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["premise_text", "hypothesis_text", "label"])
        for a, b, label in rows:
            w.writerow([store.text(a), store.text(b), label.text])


def cmd_closure(args) -> int:
    train, _ = _load_joint(args, with_test=False)
    _strict_graph_checks(args, train)
    pairs = enumerate_closure(build_graph(train), cap=args.cap, exclude_conflicted=args.exclude_conflicted)
    _write_text_pairs(((a, b, lab) for (a, b), lab in pairs), train.store, _out(args, "closure.csv"))
    n_agree = sum(lab is Label.AGREED for _, lab in pairs)
    print(f"derived {len(pairs)} pairs: {n_agree} agreed, {len(pairs) - n_agree} disagreed")
    return 0


def cmd_predict_transitive(args) -> int:
    train, test = _load_joint(args)
    _strict_graph_checks(args, train)
    preds = predict_pairs(train, test, skip_conflicted=not args.keep_conflicted)
    check_soundness(train, test, preds)
    write_labels([(p.row_id, p.label) for p in preds], _out(args, "transitive.csv"))
    print(len(preds))
    return 0


def cmd_augment(args) -> int:
    train, _ = _load_joint(args, with_test=False)
    _strict_graph_checks(args, train)
    pairs, total = augment(train, cap=args.cap, return_total=True)
    if total > len(pairs) and args.strict:
        raise DataError(f"augmentation truncated: {total} pairs derivable, cap {args.cap}")
    _write_text_pairs(((p.premise, p.hypothesis, p.label) for p in pairs), train.store, _out(args, "augmented.csv"))
    n_agree = sum(p.label is Label.AGREED for p in pairs)
    print(f"new pairs {len(pairs)} of {total}: {n_agree} agreed, {len(pairs) - n_agree} disagreed")
    return 0


def _matrix(paths, row_ids=None) -> PredictionMatrix:
    return PredictionMatrix.from_models([load_predictions(p) for p in paths], row_ids=row_ids)


def cmd_stack(args) -> int:
    feats = stack_features(_matrix(args.pred))
    write_features(feats, _out(args, "stacked.csv"))
    print(f"{len(feats.row_ids)} rows x {feats.x.shape[1]} features")
    return 0


def _training_targets(path: str, schema: ColumnSchema) -> dict[str, np.ndarray]:
    if tuple(read_header(path)) == SOFT_HEADER:
        _, records = load_soft_labels(path)
        return {r.row_id: r.target for r in records}
    out = {}
    for row_id, label in _load_gold(path, schema):
        v = np.zeros(3)
        v[int(label)] = 1.0
        out[row_id] = v
    return out


def cmd_train_stacker(args) -> int:
    feats = stack_features(_matrix(args.pred))
    targets = _training_targets(args.labels, _schema(args))
    val_ids = read_ids(Path(args.val_ids))
    val_set = set(val_ids)
    missing = [r for r in val_ids if r not in targets]
    if missing:
        raise DataError(f"validation row {missing[0]!r} has no label in {args.labels}")
    fit_ids = [r for r in feats.row_ids if r in targets and r not in val_set]
    cfg = TrainConfig(
        learning_rate=args.lr,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
        batch_size=args.batch_size,
        hidden=args.hidden,
        optimizer=args.optimizer,
    )
    model = train_stacker(
        feats.subset(fit_ids),
        np.array([targets[r] for r in fit_ids]).reshape(-1, 3),
        feats.subset(val_ids),
        np.array([targets[r] for r in val_ids]).reshape(-1, 3),
        cfg,
    )
    save_model(model, _out(args, "stacker.model"))
    write_predictions(stacker_predict(model, feats), _out(args, "stacker_predictions.csv"))
    write_json({"config": cfg.to_dict(), "epochs_run": model.epochs_run, "best_epoch": model.best_epoch,
                "best_val_accuracy": model.best_val_accuracy, "n_fit_rows": len(fit_ids), "n_val_rows": len(val_ids)},
               _out(args, "stacker.json"))
    print(f"best validation accuracy {model.best_val_accuracy:.5f} at epoch {model.best_epoch}/{model.epochs_run}")
    return 0


def cmd_blend(args) -> int:
    try:
        spec = BlendSpec(args.weight)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = blend(load_predictions(args.a), load_predictions(args.b), spec)
    write_predictions(out, _out(args, "blended.csv"))
    print(f"blended {len(out)} rows with w={spec.w}")
    return 0


def cmd_search_weight(args) -> int:
    a, b = load_predictions(args.a), load_predictions(args.b)
    gold = dict(_load_gold(args.gold, _schema(args)))
    ids = [r for r, _ in a]
    missing = [r for r in ids if r not in gold]
    if missing:
        raise DataError(f"row {missing[0]!r} has no gold label in {args.gold}")
    spec, report = search_blend_weight(a, b, [(r, gold[r]) for r in ids], args.grid_step,
                                       _class_weights(args.class_weights))
    write_json({"w": spec.w, "w_second": 1.0 - spec.w, "grid_step": args.grid_step, "eval": report.to_dict()},
               _out(args, "weight.json"))
    write_predictions(blend(a, b, spec), _out(args, "blended.csv"))
    print(f"w={spec.w} accuracy={report.accuracy:.6f}")
    return 0


def cmd_pseudo(args) -> int:
    store = SentenceStore()
    train = load_pairs(args.train, _schema(args), labeled=True, store=store) if args.train else None
    test = load_pairs(args.test, _schema(args), labeled=False, store=store)
    soft = make_soft_labels(test, load_predictions(args.preds), harden=args.harden)
    mode = MergeMode(args.mode)
    if mode is MergeMode.TRAIN_PLUS_TEST and train is None:
        raise UsageError("--mode train-plus-test needs --train")
    exclude = read_ids(Path(args.val_ids)) if args.val_ids else ()
    records = merge(train if train is not None else test, soft, mode, exclude_ids=exclude)
    write_soft_labels(records, store, _out(args, "soft_labels.csv"))
    print(f"{len(records)} records")
    return 0


def cmd_evaluate(args) -> int:
    header = read_header(args.preds)
    preds = load_labels(args.preds) if header == ["id", "label"] else [
        (r, argmax_label(v)) for r, v in load_predictions(args.preds)
    ]
    report = evaluate_accuracy(preds, _load_gold(args.gold, _schema(args)), _class_weights(args.class_weights))
    write_json(report.to_dict(), _out(args, "eval.json"))
    print(f"accuracy {report.n_correct}/{report.n_rows} = {report.accuracy:.6f}")
    return 0


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig.load(args.config)
    # Global flags override the config only when given explicitly.
    for key in ("seed", "schema", "grid_step", "cap"):
        if key in args.explicit:
            setattr(cfg, key, getattr(args, key))
    report = run_pipeline(cfg, args.out_dir)
    final = report["stages"].get("06_final", {})
    print(f"status {report['status']}")
    if "test_scores" in final:
        print(f"final test accuracy {final['test_scores']['final']['accuracy']:.6f}")
    return 0


def cmd_make_fixtures(args) -> int:
    path = make_fixture_suite(args.out_dir, seed=args.seed)
    print(path)
    return 0


def build_parser() -> Parser:
    parser = Parser(prog="stancekit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        _add_globals(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "normalize pair files, write canonical copies and stats")
    p.add_argument("--train", required=True)
    p.add_argument("--test")

    p = add("audit", cmd_audit, "transitivity hold-rates and conflicts of a labeled file")
    p.add_argument("--train", required=True)

    p = add("closure", cmd_closure, "every pair label derivable from a labeled file")
    p.add_argument("--train", required=True)
    p.add_argument("--exclude-conflicted", action="store_true")

    p = add("predict-transitive", cmd_predict_transitive, "label test pairs derivable from train")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--keep-conflicted", action="store_true", help="also answer from classes holding a conflict")

    p = add("augment", cmd_augment, "new training pairs implied by the closure")
    p.add_argument("--train", required=True)

    p = add("stack", cmd_stack, "concatenate per-model probability files into features")
    p.add_argument("--pred", nargs="+", required=True)

    d = TrainConfig()
    p = add("train-stacker", cmd_train_stacker, "fit the stacker with early stopping")
    p.add_argument("--pred", nargs="+", required=True, help="per-model prediction files")
    p.add_argument("--labels", required=True, help="labeled pair file, id,label file, or soft-label file")
    p.add_argument("--val-ids", required=True, help="file with one validation row_id per line")
    p.add_argument("--lr", type=float, default=d.learning_rate)
    p.add_argument("--epochs", type=int, default=d.max_epochs)
    p.add_argument("--patience", type=int, default=d.patience)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--hidden", type=int, default=d.hidden)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default=d.optimizer)

    p = add("blend", cmd_blend, "w * a + (1 - w) * b")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--weight", type=float, required=True)

    p = add("search-weight", cmd_search_weight, "grid-search the blend weight on gold labels")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--class-weights", help="optional per-class weights AGREED,DISAGREED,UNRELATED")

    p = add("pseudo", cmd_pseudo, "export soft pseudo-label corpora")
    p.add_argument("--test", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--train")
    p.add_argument("--mode", choices=[m.value for m in MergeMode], default=MergeMode.TEST_ONLY.value)
    p.add_argument("--harden", action="store_true", help="one-hot targets instead of soft")
    p.add_argument("--val-ids", help="row_ids to hold out of the corpus")

    p = add("evaluate", cmd_evaluate, "accuracy and confusion matrix against gold labels")
    p.add_argument("--preds", required=True, help="id,label file or probability file")
    p.add_argument("--gold", required=True)
    p.add_argument("--class-weights")

    p = add("pipeline", cmd_pipeline, "run every stage from a JSON config")
    p.add_argument("--config", required=True)

    add("make-fixtures", cmd_make_fixtures, "write the synthetic end-to-end fixture suite")
    return parser


def _explicit_globals(argv) -> set[str]:
    flags = {"--seed": "seed", "--schema": "schema", "--grid-step": "grid_step", "--cap": "cap"}
    return {flags[a.split("=")[0]] for a in argv if a.split("=")[0] in flags}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"stancekit: error: {exc}", file=sys.stderr)
        return 1
    args.explicit = _explicit_globals(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"stancekit: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"stancekit: data error: {exc}", file=sys.stderr)
        return 2
    except ConsistencyError as exc:
        print(f"stancekit: consistency failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
