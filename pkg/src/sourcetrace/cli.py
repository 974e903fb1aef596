"""Command-line pipeline: synth, train, kfold, eval.

Exit codes: 0 success, 1 user/config error, 2 internal or numerical error.
All artifacts are byte-reproducible for a fixed config; timestamps only
appear in the run.log written to each output directory.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, DataError, NumericalError, SourceTraceError
from .models import FUSION_ARCHS, ModelConfig, build_model
from .steb import load_embedding_file, pair_align, stratified_holdout, write_embedding_file
from .synth import SynthSpec, gen_two_view
from .trainer import (
    TrainConfig,
    evaluate,
    load_checkpoint,
    run_kfold,
    save_checkpoint,
    train,
)

log = logging.getLogger("sourcetrace")

CONFIG_DEFAULTS = {
    "dataset": {
        "train_a": None,
        "train_b": None,
        "val_a": None,
        "val_b": None,
        "test_a": None,
        "test_b": None,
    },
    "model": {
        "arch": "trio",
        "d_in_a": None,
        "d_in_b": None,
        "n_classes": None,
        "proj_dim": 128,
        "token_dim": 64,
        "dropout_rate": 0.2,
        "lambda": 0.3,
    },
    "train": {
        "epochs": 50,
        "batch_size": 32,
        "lr": 1e-3,
        "lambda": 0.3,
        "patience": 5,
        "min_delta": 1e-4,
        "val_fraction": 0.1,
        "seed": 0,
        "ridge": 1e-3,
        "eig_floor": 1e-6,
        "dropout_rate": 0.2,
    },
    "output": None,
}


def resolve_config(raw):
    """Fill defaults section by section; unknown keys are rejected."""
    if not isinstance(raw, dict):
        raise ConfigError("run config must be a JSON object")
    unknown = set(raw) - set(CONFIG_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    resolved = {}
    for section, defaults in CONFIG_DEFAULTS.items():
        if section == "output":
            resolved["output"] = raw.get("output")
            continue
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        bad = set(given) - set(defaults)
        if bad:
            raise ConfigError(f"unknown key(s) in {section!r}: {sorted(bad)}")
        merged = dict(defaults)
        merged.update(given)
        resolved[section] = merged
    if not resolved["output"]:
        raise ConfigError("config must name an output directory")
    return resolved


def _load_config_file(path):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(p) as fh:
            return resolve_config(json.load(fh))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc


def _setup_run_dir(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return out


def _echo_config(resolved, out):
    with open(out / "config.resolved.json", "w") as fh:
        json.dump(resolved, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_view_pair(path_a, path_b, what):
    if path_a is None:
        raise ConfigError(f"dataset.{what}_a is required")
    table_a = load_embedding_file(path_a)
    if path_b is None:
        return table_a, None
    table_b = load_embedding_file(path_b)
    return table_a, table_b


def _as_dataset(table_a, table_b):
    if table_b is None:
        return table_a
    return pair_align(table_a, table_b)


def _build_model_config(model_section, table_a, table_b):
    arch = model_section["arch"]
    d_in_a = table_a.dim
    if model_section["d_in_a"] is not None and model_section["d_in_a"] != d_in_a:
        raise DataError(
            f"view A dim mismatch: config says {model_section['d_in_a']}, "
            f"data has {d_in_a}"
        )
    if arch in FUSION_ARCHS:
        if table_b is None:
            raise ConfigError("fusion requires two views")
        d_in_b = table_b.dim
        if model_section["d_in_b"] is not None and model_section["d_in_b"] != d_in_b:
            raise DataError(
                f"view B dim mismatch: config says {model_section['d_in_b']}, "
                f"data has {d_in_b}"
            )
    else:
        d_in_b = None
        if table_b is not None:
            log.warning("arch=%s uses a single view; view B ignored", arch)
            print(f"warning: arch={arch} uses a single view; view B ignored",
                  file=sys.stderr)
    n_classes = len(table_a.class_names)
    if model_section["n_classes"] is not None and model_section["n_classes"] != n_classes:
        raise DataError(
            f"class count mismatch: config says {model_section['n_classes']}, "
            f"data has {n_classes}"
        )
    return ModelConfig(
        arch=arch,
        d_in_a=d_in_a,
        d_in_b=d_in_b,
        n_classes=n_classes,
        proj_dim=model_section["proj_dim"],
        token_dim=model_section["token_dim"],
        dropout_rate=model_section["dropout_rate"],
        cca_lambda=model_section["lambda"],
    )


# -- subcommands ---------------------------------------------------------------


def cmd_synth(args):
    spec = SynthSpec(
        n_classes=args.classes,
        n_per_class=args.per_class,
        d_a=args.da,
        d_b=args.db,
        separation=args.sep,
        cross_corr=args.corr,
        seed=args.seed,
    )
    paired = gen_two_view(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_embedding_file(paired.view_a, out / "view_a.steb")
    write_embedding_file(paired.view_b, out / "view_b.steb")
    print(f"wrote {paired.n} samples x ({spec.d_a}, {spec.d_b}) dims to {out}")
    return 0


def _prepare_train_data(cfg):
    ds = cfg["dataset"]
    train_a, train_b = _load_view_pair(ds["train_a"], ds["train_b"], "train")
    model_cfg = _build_model_config(cfg["model"], train_a, train_b)
    if model_cfg.arch not in FUSION_ARCHS:
        train_b = None
    train_set = _as_dataset(train_a, train_b)

    val_set = None
    if ds["val_a"] is not None:
        val_a, val_b = _load_view_pair(ds["val_a"], ds["val_b"], "val")
        if model_cfg.arch not in FUSION_ARCHS:
            val_b = None
        val_set = _as_dataset(val_a, val_b)

    test_set = None
    if ds["test_a"] is not None:
        test_a, test_b = _load_view_pair(ds["test_a"], ds["test_b"], "test")
        if model_cfg.arch not in FUSION_ARCHS:
            test_b = None
        test_set = _as_dataset(test_a, test_b)
    return model_cfg, train_set, val_set, test_set


def cmd_train(args):
    cfg = _load_config_file(args.config)
    out = _setup_run_dir(cfg["output"])
    _echo_config(cfg, out)
    model_cfg, train_set, val_set, test_set = _prepare_train_data(cfg)
    train_cfg = TrainConfig.from_dict(cfg["train"])

    if val_set is None:
        rest, held = stratified_holdout(
            train_set.labels, train_cfg.val_fraction, train_cfg.seed
        )
        val_set = train_set.subset(held)
        train_set = train_set.subset(rest)
    log.info(
        "training %s on %d samples (%d validation)",
        model_cfg.arch, train_set.n, val_set.n,
    )
    model = build_model(model_cfg, seed=train_cfg.seed)
    model, history = train(model, train_set, val_set, train_cfg)
    save_checkpoint(model, out / "checkpoint.stc")
    history.write_csv(out / "history.csv")
    report = evaluate(model, test_set if test_set is not None else val_set)
    report.write_json(out / "metrics.json")
    log.info("finished: %s", report.summary_line())
    print(report.summary_line())
    return 0


def cmd_kfold(args):
    if args.k < 2:
        raise ConfigError(f"need k >= 2 folds, got {args.k}")
    cfg = _load_config_file(args.config)
    out = _setup_run_dir(cfg["output"])
    _echo_config(cfg, out)
    ds = cfg["dataset"]
    table_a, table_b = _load_view_pair(ds["train_a"], ds["train_b"], "train")
    model_cfg = _build_model_config(cfg["model"], table_a, table_b)
    if model_cfg.arch not in FUSION_ARCHS:
        table_b = None
    corpus = _as_dataset(table_a, table_b)
    train_cfg = TrainConfig.from_dict(cfg["train"])
    reports, histories, avg = run_kfold(
        corpus, args.k, train_cfg, model_cfg, jobs=args.jobs
    )
    for i, (report, history) in enumerate(zip(reports, histories)):
        fold_dir = out / f"fold_{i}"
        fold_dir.mkdir(exist_ok=True)
        report.write_json(fold_dir / "metrics.json")
        history.write_csv(fold_dir / "history.csv")
    with open(out / "average.json", "w") as fh:
        json.dump(avg, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"acc={100 * avg['accuracy']:.2f} eer={100 * avg['eer_avg']:.2f}")
    return 0


def cmd_eval(args):
    model = load_checkpoint(args.checkpoint)
    table_a = load_embedding_file(args.view_a)
    table_b = load_embedding_file(args.view_b) if args.view_b else None
    if model.config.arch in FUSION_ARCHS and table_b is None:
        raise ConfigError("fusion requires two views")
    if model.config.arch not in FUSION_ARCHS:
        table_b = None
    data = _as_dataset(table_a, table_b)
    report = evaluate(model, data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(out / "metrics.json")
    report.write_confusion_csv(out / "confusion.csv")
    print(report.summary_line())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sourcetrace",
        description="source tracing of synthetic-speech generators from embedding views",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a two-view synthetic dataset")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--da", type=int, required=True)
    p.add_argument("--db", type=int, required=True)
    p.add_argument("--sep", type=float, default=2.0)
    p.add_argument("--corr", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model from a run config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("kfold", help="stratified k-fold cross-validation")
    p.add_argument("--config", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_kfold)

    p = sub.add_parser("eval", help="evaluate a checkpoint on embedding files")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--view-a", required=True)
    p.add_argument("--view-b", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except SourceTraceError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        for handler in list(log.handlers):
            log.removeHandler(handler)
            handler.close()


if __name__ == "__main__":
    sys.exit(main())
