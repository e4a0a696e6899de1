"""Command-line entry point.

Subcommands: augment, train, evaluate, predict, explain, selfcheck.
Configuration comes from a flat `key = value` file (# comments allowed)
merged with `--key value` flag overrides (flags win).  Unknown keys are
rejected.  Exit codes: 0 success, 1 self-check failure, 2 usage/config/input
error, 3 numeric training failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import lime as bl
from .errors import (
    BlastokitError,
    CheckpointError,
    ConfigError,
    DataError,
    ImageFormatError,
    ShapeError,
    TrainingError,
    UntrainedModelError,
)
from .imgcore import (
    augment_dataset,
    load_dataset,
    load_image,
    load_split_arrays,
    read_manifest,
    save_image,
    split_stratified,
    write_tree,
)
from .metrics import confusion, metrics, roc_auc, write_roc_csv, MetricsReport
from .model import (
    CLASS_NAMES,
    ModelSpec,
    TrainConfig,
    build_model,
    cross_validate,
    load_model,
    predict_scores,
    save_model,
    train_model,
)
from .util import config_hash, dump_json, tune_allocator

# key -> (type, default, precondition description, validator)
CONFIG_KEYS = {
    "data.root": (str, ".", "dataset root directory", None),
    "data.size": (int, 224, "square input resolution >= 1", lambda v: v >= 1),
    "aug.variants": (int, 14, "variants per original >= 0", lambda v: v >= 0),
    "aug.seed": (int, 0, "integer seed", None),
    "train.epochs": (int, 25, "epochs per fold >= 1", lambda v: v >= 1),
    "train.folds": (int, 10, "fold count >= 2", lambda v: v >= 2),
    "train.batch": (int, 32, "batch size >= 1", lambda v: v >= 1),
    "train.lr": (float, 0.001, "initial learning rate > 0", lambda v: v > 0),
    "train.lr_drop": (float, 0.5, "drop factor > 0", lambda v: v > 0),
    "train.runs": (int, 5, "independent runs >= 1", lambda v: v >= 1),
    "train.seed": (int, 0, "integer seed", None),
    "lime.segments": (int, 50, "target superpixels >= 1", lambda v: v >= 1),
    "lime.sigma": (float, 0.25, "kernel width > 0", lambda v: v > 0),
    "lime.k": (int, 5, "selected feature cap >= 1", lambda v: v >= 1),
    "lime.samples": (int, 1000, "perturbation samples >= 1", lambda v: v >= 1),
    "lime.seed": (int, 0, "integer seed", None),
    "out.dir": (str, "out", "output directory", None),
}


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def as_dict(self) -> dict:
        return dict(self.values)


def parse_config_file(path) -> dict:
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def build_config(config_file: str | None, overrides: dict) -> RunConfig:
    merged = {k: spec[1] for k, spec in CONFIG_KEYS.items()}
    raw: dict = {}
    if config_file:
        raw.update(parse_config_file(config_file))
    raw.update({k: v for k, v in overrides.items() if v is not None})
    for key, value in raw.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        typ, _, description, validator = CONFIG_KEYS[key]
        try:
            parsed = typ(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected {typ.__name__} ({description}), got {value!r}")
        if validator is not None and not validator(parsed):
            raise ConfigError(f"{key}: value {parsed!r} violates: {description}")
        merged[key] = parsed
    return RunConfig(merged)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="flat key=value config file")
    for key, (_, default, description, _) in CONFIG_KEYS.items():
        parser.add_argument(f"--{key}", dest=key, metavar="V", default=None,
                            help=f"{description} (default {default})")


def _config_from_args(args) -> RunConfig:
    overrides = {key: getattr(args, key, None) for key in CONFIG_KEYS}
    return build_config(args.config, overrides)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_augment(args) -> int:
    cfg = _config_from_args(args)
    size = cfg["data.size"]
    originals = load_dataset(cfg["data.root"], size)
    n_orig = len(originals.samples)
    if args.split_first:
        originals = split_stratified(originals, 0.8, seed=cfg["aug.seed"])
        augmented = augment_dataset(originals, cfg["aug.variants"], cfg["aug.seed"])
    else:
        augmented = augment_dataset(originals, cfg["aug.variants"], cfg["aug.seed"])
        augmented = split_stratified(augmented, 0.8, seed=cfg["aug.seed"])
    manifest = write_tree(augmented, cfg["out.dir"])
    good, poor = augmented.class_counts()
    splits = augmented.split_assignment or []
    dump_json(
        {
            "seed": cfg["aug.seed"],
            "variants_per_image": cfg["aug.variants"],
            "size": size,
            "split_first": bool(args.split_first),
        },
        Path(cfg["out.dir"]) / "augment.json",
    )
    print(f"originals: {n_orig}")
    print(f"augmented total: {len(augmented.samples)} (good {good}, poor {poor})")
    print(f"train: {splits.count('train')}  test: {splits.count('test')}")
    print(f"manifest: {manifest}")
    return 0


def _train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        epochs=cfg["train.epochs"],
        folds=cfg["train.folds"],
        batch=cfg["train.batch"],
        lr=cfg["train.lr"],
        lr_drop=cfg["train.lr_drop"],
        runs=cfg["train.runs"],
        seed=cfg["train.seed"],
    )


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    size = cfg["data.size"]
    rows = read_manifest(cfg["data.root"])
    images, labels = load_split_arrays(cfg["data.root"], rows, "train", size)
    out_dir = Path(cfg["out.dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = ModelSpec(height=size, width=size)
    tc = _train_config(cfg)
    if tc.batch > len(images):
        raise ConfigError(
            f"train.batch={tc.batch} exceeds the {len(images)} training samples"
        )
    # hash the behavioral settings only; paths don't change what is trained
    chash = config_hash({k: v for k, v in cfg.as_dict().items()
                         if k not in ("data.root", "out.dir")})

    fold_models: dict = {}
    cv = cross_validate(images, labels, tc, spec, fold_models=fold_models)
    for fold, model in sorted(fold_models.items()):
        model_path = out_dir / f"fold_{fold}.ckpt"
        save_model(model, model_path, epoch=tc.epochs, seed=tc.seed, config_hash=chash)

    final = build_model(spec, seed=tc.seed)
    train_model(final, images, labels, tc)
    save_model(final, out_dir / "final.ckpt", epoch=tc.epochs, seed=tc.seed,
               config_hash=chash)
    with open(out_dir / "history.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,lr,loss,train_acc\n")
        for row in final.history:
            fh.write(f"{row['epoch']},{row['lr']!r},{row['loss']!r},{row['train_acc']!r}\n")
    summary = {
        "folds": tc.folds,
        "runs": tc.runs,
        "per_fold": cv.per_fold,
        "mean_accuracy": cv.mean_accuracy,
        "std_accuracy": cv.std_accuracy,
        "report": cv.report(),
        "final_train_accuracy": final.history[-1]["train_acc"],
        "config_hash": chash,
        "config": {
            "epochs": tc.epochs, "folds": tc.folds, "batch": tc.batch,
            "lr": tc.lr, "lr_drop": tc.lr_drop, "runs": tc.runs, "seed": tc.seed,
        },
    }
    dump_json(summary, out_dir / "summary.json")
    print(f"cross-validation accuracy: {cv.report()} over {len(cv.per_fold)} fold-runs")
    print(f"outputs in {out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config_from_args(args)
    size = cfg["data.size"]
    model = load_model(args.checkpoint)
    if (model.spec.height, model.spec.width) != (size, size):
        raise ConfigError(
            f"checkpoint expects {model.spec.height}x{model.spec.width} input, "
            f"config says {size}x{size}"
        )
    rows = read_manifest(cfg["data.root"])
    images, labels = load_split_arrays(cfg["data.root"], rows, args.split, size)
    scores = predict_scores(model, images)
    predicted = [CLASS_NAMES[i] for i in scores.argmax(axis=1)]
    actual = [CLASS_NAMES[i] for i in labels]
    cm = confusion(predicted, actual, positive_class="poor")
    report = metrics(cm)
    poor_scores = scores[:, 1].astype(np.float64)
    points, auc = roc_auc(poor_scores, (labels == 1).astype(np.int64))
    print(MetricsReport.table_header())
    print(report.table_row(f"{args.split} split"))
    print(f"AUC: {auc:.4f}")
    out_dir = Path(cfg["out.dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = report.as_dict()
    payload.update({
        "auc": auc,
        "confusion": {"tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn},
        "positive_class": cm.positive_class,
        "split": args.split,
        "n_samples": len(labels),
    })
    dump_json(payload, out_dir / "metrics.json")
    write_roc_csv(points, out_dir / "roc.csv")
    return 0


def cmd_predict(args) -> int:
    cfg = _config_from_args(args)
    model = load_model(args.checkpoint)
    image = load_image(args.image, (model.spec.width, model.spec.height))
    label, (p_good, p_poor) = model.predict(image.data)
    print(dump_json({"label": label, "probabilities": {"good": p_good, "poor": p_poor}}),
          end="")
    return 0


def cmd_explain(args) -> int:
    cfg = _config_from_args(args)
    model = load_model(args.checkpoint)
    image = load_image(args.image, (model.spec.width, model.spec.height))
    lime_cfg = bl.LimeConfig(
        segments=cfg["lime.segments"],
        n_samples=cfg["lime.samples"],
        sigma=cfg["lime.sigma"],
        k=cfg["lime.k"],
        seed=cfg["lime.seed"],
    )

    def predict_fn(batch):
        return model.forward_batch(np.ascontiguousarray(batch, dtype=np.float32))

    explanation = bl.explain(predict_fn, image, lime_cfg)
    out_dir = Path(cfg["out.dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.image).stem
    payload = explanation.as_json_dict()
    if args.annotation:
        ann = load_image(args.annotation)
        mask = ann.data.max(axis=2) > 0
        payload["iou"] = bl.explanation_iou(explanation, mask)
    dump_json(payload, out_dir / f"{stem}.explanation.json")
    ks = [args.k] if args.k is not None else [1, 3, 5]
    n_sel = len(explanation.segment_ids)
    for k in ks:
        eff = min(k, n_sel)
        if eff < k:
            print(f"warning: only {n_sel} segments selected; top{k} overlay uses {eff}",
                  file=sys.stderr)
        overlay = bl.render_overlay(image, explanation, eff)
        save_image(overlay, out_dir / f"{stem}.top{k}.png")
    print(f"explained class: {CLASS_NAMES[explanation.explained_class]}"
          f" fidelity: {explanation.fidelity:.4f}")
    print(f"outputs in {out_dir}")
    return 0


def cmd_selfcheck(args) -> int:
    from .selfcheck import run_selfcheck

    ok = run_selfcheck(tamper_layer=args.tamper_gradient)
    return 0 if ok else 1


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blastokit",
        description="CNN-LSTM embryo grading with local surrogate explanations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="expand the dataset and write tree + manifest")
    _add_config_flags(p)
    p.add_argument("--split-first", action="store_true",
                   help="split originals before augmenting (leak-free protocol)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="cross-validate, train the final model")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="metrics + ROC for a checkpoint on a split")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify one image")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", help="write explanation JSON and overlay PNGs")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--k", type=int, default=None,
                   help="single overlay with this many segments (default: top 1/3/5)")
    p.add_argument("--annotation", default=None,
                   help="single-channel PNG; nonzero pixels are the annotated region")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("selfcheck", help="gradient, explanation and metric oracles")
    p.add_argument("--tamper-gradient", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    tune_allocator()
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, DataError, CheckpointError, ShapeError, ImageFormatError,
            UntrainedModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BlastokitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
