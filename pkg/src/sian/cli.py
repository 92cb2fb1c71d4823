"""Command-line pipeline.

Subcommands walk the whole workflow: train a dense reference network, select
an interaction family from it, train the additive model on that family,
evaluate, export shape grids, and run the self-verification suites.  One JSON
config describes an experiment; a mandatory seed makes every artifact
reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .data import (
    CLASSIFICATION_TASK,
    CsvSchema,
    SplitPlan,
    Standardizer,
    fold_summary,
    load_csv,
    metrics,
    standardize,
)
from .errors import (
    ArchitectureError,
    ConfigError,
    DataError,
    FormatError,
    ShapeMismatchError,
    SianError,
)
from .fis import (
    FisConfig,
    family_to_architecture,
    load_family,
    save_family,
    select_interactions,
)
from .model import (
    GamArchitecture,
    build_sian,
    convert_mode,
    default_grid_points,
    eval_shape,
    load_sian,
    save_sian,
    sian_forward,
    train_sian,
)
from .nn import CLASSIFICATION, REGRESSION, TrainConfig
from .oracle import SUITES, run_suite
from .plots import save_score_histogram, save_shape_figure, save_training_curve
from .tensor import Rng

__all__ = ["main"]

_USER_ERRORS = (ConfigError, DataError, FormatError, ArchitectureError, OSError)

_TOP_KEYS = {"seed", "out", "data", "dnn", "fis", "sian"}
_DATA_KEYS = {"path", "label", "task", "categorical", "split"}
_SPLIT_KEYS = {"test_fraction", "n_folds"}
_TRAIN_KEYS = {"widths", "lr", "l1", "batch_size", "epochs", "patience"}
_SIAN_KEYS = _TRAIN_KEYS | {"mode"}
_FIS_KEYS = {"K", "tau", "theta", "subsample_cap", "baseline"}


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(sorted(unknown))}")


def _read_json(path, kind: str):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{kind} file {path} does not exist")
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path} is not valid JSON: {exc}") from None


def _write_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


class Experiment:
    """Parsed config plus command-line overrides."""

    def __init__(self, args, need_data: bool = True, need_seed: bool = True):
        doc = _read_json(args.config, "config") if args.config else {}
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        _check_keys(doc, _TOP_KEYS, "config")

        seed = args.seed if args.seed is not None else doc.get("seed")
        if seed is None:
            if need_seed:
                raise ConfigError(
                    "a seed is required: set \"seed\" in the config or pass --seed"
                )
            seed = 0
        self.seed = int(seed)
        self.out = Path(args.out or doc.get("out") or "sian-out")

        data = doc.get("data", {})
        _check_keys(data, _DATA_KEYS, "data")
        path = getattr(args, "data", None) or data.get("path")
        if need_data and not path:
            raise ConfigError("no dataset: set data.path in the config or pass --data")
        self.data_path = Path(path) if path else None
        if need_data:
            if not self.data_path.exists():
                raise ConfigError(f"data file {self.data_path} does not exist")
            if "label" not in data:
                raise ConfigError("data.label (the target column) is required")
        self.task = data.get("task", "regression")
        self.schema = (
            CsvSchema(
                label=data.get("label", "y"),
                task=self.task,
                categorical=tuple(data.get("categorical", ())),
            )
            if need_data
            else None
        )
        split = data.get("split", {})
        _check_keys(split, _SPLIT_KEYS, "data.split")
        self.split_plan = SplitPlan(
            test_fraction=float(split.get("test_fraction", 0.2)),
            n_folds=int(split.get("n_folds", 5)),
            seed=self.seed,
        )

        dnn = doc.get("dnn", {})
        _check_keys(dnn, _TRAIN_KEYS, "dnn")
        self.dnn_widths = tuple(int(w) for w in dnn.get("widths", (64, 32)))
        self.dnn_train = _train_config(dnn)

        sian = doc.get("sian", {})
        _check_keys(sian, _SIAN_KEYS, "sian")
        self.sian_widths = tuple(int(w) for w in sian.get("widths", (16, 12, 8)))
        self.sian_train = _train_config(sian)
        self.sian_mode = sian.get("mode", "default")

        fis = doc.get("fis", {})
        _check_keys(fis, _FIS_KEYS, "fis")
        self.fis_config = FisConfig(
            K=int(fis.get("K", 2)),
            theta=fis.get("theta", 1e-3),
            tau=float(fis.get("tau", 0.5)),
            subsample_cap=int(fis.get("subsample_cap", 1024)),
            seed=self.seed,
        )
        self.fis_baseline = fis.get("baseline", "zero")

    @property
    def head(self):
        return CLASSIFICATION if self.task == CLASSIFICATION_TASK else REGRESSION

    def baseline_vector(self, d: int) -> np.ndarray:
        if self.fis_baseline == "zero":
            return np.zeros(d)
        vec = np.asarray(self.fis_baseline, dtype=np.float64)
        if vec.shape != (d,):
            raise ConfigError(
                f"fis.baseline has {vec.size} entries for {d} features"
            )
        return vec


def _train_config(section: dict) -> TrainConfig:
    patience = section.get("patience")
    return TrainConfig(
        lr=float(section.get("lr", 5e-3)),
        l1=float(section.get("l1", 5e-5)),
        batch_size=int(section.get("batch_size", 256)),
        epochs=int(section.get("epochs", 100)),
        patience=None if patience is None else int(patience),
    )


def _standardize_fold(ds, train_idx):
    """Fold standardization that refuses to silently renumber features."""
    out, stdzr = standardize(ds, train_idx)
    if len(stdzr.kept) != ds.d:
        dropped = set(ds.feature_names) - set(stdzr.feature_names)
        raise DataError(
            "constant features on this training fold would renumber the "
            f"columns: {', '.join(sorted(dropped))}; clean them at ingestion"
        )
    return out, stdzr


def _apply_model_preprocess(model, ds):
    """Transform a raw dataset with the standardizer stored in a model file."""
    if model.preprocess is not None:
        stdzr = Standardizer.from_json(model.preprocess)
        x = stdzr.transform_x(ds.x)
        y = stdzr.transform_y(ds.y)
    else:
        x, y = ds.x, ds.y
    if x.shape[1] != model.arch.d:
        raise ConfigError(
            f"model expects {model.arch.d} features, data provides {x.shape[1]}"
        )
    return x, y


def _train_folds(exp: Experiment, ds, arch_for, train_cfg):
    """Train one model per fold; return per-fold metrics and the best fold.

    ``arch_for(d)`` builds the architecture once the post-standardization
    width is known.  The best fold is the one with the lowest validation
    loss; its model carries the fold's standardizer for downstream commands.
    """
    split = exp.split_plan.assign(ds.n)
    base = Rng(exp.seed)
    per_fold = []
    best = None
    for i in range(exp.split_plan.n_folds):
        init_rng = base.spawn()
        train_rng = base.spawn()
        train_idx, val_idx = split.fold(i)
        std_ds, stdzr = _standardize_fold(ds, train_idx)
        model0 = build_sian(arch_for(std_ds.d), init_rng)
        result = train_sian(
            model0,
            std_ds.x[train_idx], std_ds.y[train_idx],
            std_ds.x[val_idx], std_ds.y[val_idx],
            train_cfg, train_rng,
        )
        preds = sian_forward(result.model, std_ds.x[split.test])
        fold_metrics = metrics(preds, std_ds.y[split.test], ds.task)
        per_fold.append(fold_metrics)
        if best is None or result.best_val_loss < best[1].best_val_loss:
            result.model.preprocess = stdzr.to_json()
            best = (i, result)
    return per_fold, best


def _write_training_outputs(exp, ds, per_fold, best, prefix):
    fold_idx, result = best
    exp.out.mkdir(parents=True, exist_ok=True)
    model_path = exp.out / f"{prefix}_model.json"
    save_sian(result.model, model_path)
    summary = {
        "task": ds.task,
        "n_samples": ds.n,
        "n_features": ds.d,
        "folds": fold_summary(per_fold),
        "best_fold": fold_idx,
        "best_val_loss": result.best_val_loss,
    }
    _write_json(summary, exp.out / f"{prefix}_metrics.json")
    save_training_curve(result.trace, exp.out / f"{prefix}_training.png")
    for name, stats in summary["folds"].items():
        print(f"{name}: {stats['mean']:.6g} +/- {stats['std']:.6g}")
    print(f"model -> {model_path}")
    return 0


def cmd_train_dnn(args) -> int:
    exp = Experiment(args)
    ds = load_csv(exp.data_path, exp.schema)

    def arch_for(d):
        return GamArchitecture(
            d=d, family=(tuple(range(d)),), widths=exp.dnn_widths, head=exp.head
        )

    per_fold, best = _train_folds(exp, ds, arch_for, exp.dnn_train)
    return _write_training_outputs(exp, ds, per_fold, best, "dnn")


def cmd_fis(args) -> int:
    exp = Experiment(args)
    model = load_sian(args.model)
    ds = load_csv(exp.data_path, exp.schema)
    x, _ = _apply_model_preprocess(model, ds)
    split = exp.split_plan.assign(ds.n)
    pool = np.concatenate(split.folds)
    family = select_interactions(
        lambda batch: sian_forward(model, batch),
        x[pool],
        exp.baseline_vector(model.arch.d),
        exp.fis_config,
    )
    exp.out.mkdir(parents=True, exist_ok=True)
    family_path = exp.out / "family.json"
    save_family(family, family_path)
    with open(exp.out / "scores.csv", "w", encoding="utf-8") as fh:
        family.report().to_csv(fh)
    save_score_histogram(family.report(), exp.out / "scores.png")
    print(f"selected {len(family)} sets out of {len(family.evaluated)} candidates")
    for s, strength in zip(family.sets, family.strengths):
        print(f"  {s.label}: {strength:.6g}")
    print(f"family -> {family_path}")
    return 0


def cmd_train_sian(args) -> int:
    exp = Experiment(args)
    family = load_family(args.family)
    ds = load_csv(exp.data_path, exp.schema)

    def arch_for(d):
        return family_to_architecture(
            family, d=d, widths=exp.sian_widths, head=exp.head
        )

    per_fold, best = _train_folds(exp, ds, arch_for, exp.sian_train)
    if exp.sian_mode != best[1].model.mode:
        best[1].model = convert_mode(best[1].model, exp.sian_mode)
    return _write_training_outputs(exp, ds, per_fold, best, "sian")


def cmd_evaluate(args) -> int:
    exp = Experiment(args)
    model = load_sian(args.model)
    ds = load_csv(exp.data_path, exp.schema)
    x, y = _apply_model_preprocess(model, ds)
    split = exp.split_plan.assign(ds.n)
    preds = sian_forward(model, x[split.test])
    result = metrics(preds, y[split.test], ds.task)
    exp.out.mkdir(parents=True, exist_ok=True)
    doc = {"n_test": int(len(split.test)), **result}
    _write_json(doc, exp.out / "eval_metrics.json")
    for name, value in result.items():
        print(f"{name}: {value:.6g}")
    return 0


def cmd_export_shapes(args) -> int:
    exp = Experiment(args, need_data=False, need_seed=False)
    model = load_sian(args.model)
    shapes_dir = exp.out / "shapes"
    shapes_dir.mkdir(parents=True, exist_ok=True)
    if not model.arch.family:
        print("model has no shape subnets (bias only); nothing to export")
        return 0
    half_width = 2.5  # standardized units
    for s in model.arch.family:
        n = args.grid_points or default_grid_points(s.order)
        axes = [np.linspace(-half_width, half_width, n) for _ in s.indices]
        grid = eval_shape(model, s, axes)
        stem = shapes_dir / f"shape_{s.label}"
        with open(f"{stem}.csv", "w", encoding="utf-8") as fh:
            fh.write(",".join([*(f"x{i}" for i in s.indices), "value"]) + "\n")
            mesh = np.meshgrid(*grid.axes, indexing="ij")
            columns = [m.ravel() for m in mesh] + [grid.values.ravel()]
            for row in zip(*columns):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        save_shape_figure(grid, f"{stem}.png")
        print(f"{s.label}: {n}^{s.order} grid -> {stem}.csv")
    return 0


def cmd_oracle(args) -> int:
    seed = args.seed if args.seed is not None else 0
    report = run_suite(args.suite, seed=seed)
    out = Path(args.out or "sian-out")
    out.mkdir(parents=True, exist_ok=True)
    _write_json(report.to_json(), out / f"oracle_{args.suite}.json")
    for check in report.checks:
        flag = "PASS" if check.passed else "FAIL"
        print(f"[{flag}] {check.name}: max deviation {check.max_deviation:.3e}"
              f" (tolerance {check.tolerance:g})")
    return 0 if report.passed else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sian",
        description="Additive models with selected feature interactions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required,
                        help="experiment config JSON")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--out", default=None, help="output directory")

    sp = sub.add_parser("train-dnn", help="train the dense reference network")
    common(sp)
    sp.add_argument("--data", help="override data.path")
    sp.set_defaults(func=cmd_train_dnn)

    sp = sub.add_parser("fis", help="select interactions from a trained model")
    common(sp)
    sp.add_argument("--model", required=True, help="reference model file")
    sp.add_argument("--data", help="override data.path")
    sp.set_defaults(func=cmd_fis)

    sp = sub.add_parser("train-sian", help="train the additive model on a family")
    common(sp)
    sp.add_argument("--family", required=True, help="family JSON file")
    sp.add_argument("--data", help="override data.path")
    sp.set_defaults(func=cmd_train_sian)

    sp = sub.add_parser("evaluate", help="score a saved model on the test split")
    common(sp)
    sp.add_argument("--model", required=True, help="model file")
    sp.add_argument("--data", help="override data.path")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("export-shapes", help="write per-set grid CSVs and figures")
    common(sp, config_required=False)
    sp.add_argument("--model", required=True, help="model file")
    sp.add_argument("--grid-points", type=int, default=None,
                    help="points per axis (default depends on order)")
    sp.set_defaults(func=cmd_export_shapes)

    sp = sub.add_parser("oracle", help="run a self-verification suite")
    sp.add_argument("suite", choices=[*SUITES, "all"])
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SianError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
