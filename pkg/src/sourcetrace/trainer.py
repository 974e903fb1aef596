"""Deterministic training loop, k-fold orchestration and checkpointing.

Everything downstream of (seed, config, data) is reproducible: batch order,
dropout masks and weight init all derive from the config seed, and the
best-validation-epoch parameters are restored at the end of training.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .cca import CcaConfig
from .errors import ConfigError, DataError, NumericalError
from .metrics import report_from_probs
from .models import FUSION_ARCHS, ModelConfig, build_model
from .params import adam_step, config_hash, read_checkpoint, write_checkpoint
from .steb import EmbeddingTable, PairedDataset, batch_iter, stratified_holdout, stratified_kfold

EVAL_CHUNK = 512


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    cca_lambda: float = 0.3
    patience: int = 5
    min_delta: float = 1e-4
    val_fraction: float = 0.1
    seed: int = 0
    ridge: float = 1e-3
    eig_floor: float = 1e-6
    dropout_rate: float = 0.2

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if not 0.0 < self.val_fraction < 0.5:
            raise ConfigError(
                f"val_fraction must be in (0, 0.5), got {self.val_fraction}"
            )

    def to_dict(self):
        d = self.__dict__.copy()
        d["lambda"] = d.pop("cca_lambda")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["cca_lambda"] = d.pop("lambda")
        return cls(**d)


@dataclass
class TrainHistory:
    train_loss: list
    val_loss: list
    val_acc: list
    stopped_epoch: int
    best_epoch: int

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_loss", "val_acc"])
            for i, (tr, vl, va) in enumerate(
                zip(self.train_loss, self.val_loss, self.val_acc), start=1
            ):
                writer.writerow([i, f"{tr:.6f}", f"{vl:.6f}", f"{va:.6f}"])


def _as_arrays(data):
    """Accept a PairedDataset or a single EmbeddingTable."""
    if isinstance(data, PairedDataset):
        return (
            data.view_a.vectors.astype(np.float64),
            data.view_b.vectors.astype(np.float64),
            data.labels,
            data.class_names,
        )
    if isinstance(data, EmbeddingTable):
        return data.vectors.astype(np.float64), None, data.labels, data.class_names
    raise DataError(f"expected PairedDataset or EmbeddingTable, got {type(data)!r}")


def _forward_probs(model, xa, xb, chunk=EVAL_CHUNK):
    """Evaluation-mode forward in chunks; returns the probability matrix."""
    n = xa.shape[0]
    bounds = list(range(0, n, chunk)) + [n]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] == 1:
        bounds[-2] -= 1  # keep every chunk >= 2 rows for the alignment term
    pieces = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        out = model.forward(
            xa[lo:hi], None if xb is None else xb[lo:hi], training=False
        )
        pieces.append(out.probs.data)
    return np.concatenate(pieces, axis=0)


def train(model, train_data, val_data, config):
    """Train with Adam and early stopping; returns (model, TrainHistory).

    The model's dropout rate, lambda and CCA regularizers are taken from the
    TrainConfig so one config object controls a run end to end.
    """
    xa, xb, labels, _ = _as_arrays(train_data)
    vxa, vxb, vlabels, _ = _as_arrays(val_data)
    if vlabels.size == 0:
        raise DataError("validation split is empty")
    cfg = config
    model.config.dropout_rate = cfg.dropout_rate
    model.config.cca_lambda = cfg.cca_lambda
    model.cca_config = CcaConfig(ridge=cfg.ridge, eig_floor=cfg.eig_floor)
    use_cca = model.config.arch == "trio" and cfg.cca_lambda != 0.0

    history = TrainHistory([], [], [], stopped_epoch=0, best_epoch=0)
    best_val = np.inf
    best_state = model.store.state_arrays()
    epochs_since_improve = 0

    for epoch in range(1, cfg.epochs + 1):
        batch_losses = []
        batch_sizes = []
        for bi, idx in enumerate(batch_iter(labels.size, cfg.batch_size, cfg.seed, epoch)):
            rng = np.random.default_rng((cfg.seed, epoch, bi, 0xD0))
            out = model.forward(
                xa[idx], None if xb is None else xb[idx], training=True, rng=rng
            )
            loss = ad.cross_entropy(out.probs, labels[idx])
            if use_cca and out.cca_value is not None:
                loss = loss + ad.scale(out.cca_value, -cfg.cca_lambda)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericalError(f"diverged at epoch {epoch}, batch {bi}")
            model.store.zero_grads()
            ad.backward(loss)
            adam_step(model.store, lr=cfg.lr)
            batch_losses.append(value)
            batch_sizes.append(idx.size)
        train_loss = float(np.average(batch_losses, weights=batch_sizes))

        val_probs = _forward_probs(model, vxa, vxb)
        picked = np.maximum(val_probs[np.arange(vlabels.size), vlabels], 1e-12)
        val_loss = float(-np.log(picked).mean())
        val_acc = float((np.argmax(val_probs, axis=1) == vlabels).mean())

        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        history.val_acc.append(val_acc)
        history.stopped_epoch = epoch

        # min_delta gates the patience counter only; restoration tracks the
        # true minimum so the returned model never loses to an earlier epoch
        if val_loss < best_val - cfg.min_delta:
            epochs_since_improve = 0
        else:
            epochs_since_improve += 1
        if val_loss < best_val:
            best_val = val_loss
            best_state = model.store.state_arrays()
            history.best_epoch = epoch
        if epochs_since_improve >= cfg.patience:
            break

    model.store.load_state_arrays(best_state)
    return model, history


def evaluate(model, data):
    """Dropout-free evaluation; returns a MetricsReport."""
    xa, xb, labels, class_names = _as_arrays(data)
    if model.config.arch in FUSION_ARCHS and xb is None:
        raise ConfigError("fusion requires two views")
    if xa.shape[1] != model.config.d_in_a:
        raise DataError(
            f"view A dim mismatch: model expects {model.config.d_in_a}, data has {xa.shape[1]}"
        )
    if xb is not None and model.config.arch in FUSION_ARCHS and xb.shape[1] != model.config.d_in_b:
        raise DataError(
            f"view B dim mismatch: model expects {model.config.d_in_b}, data has {xb.shape[1]}"
        )
    probs = _forward_probs(model, xa, None if model.config.arch not in FUSION_ARCHS else xb)
    return report_from_probs(probs, labels, class_names)


def _run_fold(paired, plan, fold, model_config, config):
    fold_cfg = replace(config, seed=config.seed + fold)
    test_idx = plan.test_indices(fold)
    pool_idx = plan.train_indices(fold)
    pool_labels = paired.labels[pool_idx]
    rest, held = stratified_holdout(pool_labels, config.val_fraction, fold_cfg.seed)
    train_set = paired.subset(pool_idx[rest])
    val_set = paired.subset(pool_idx[held])
    test_set = paired.subset(test_idx)
    model = build_model(model_config, seed=fold_cfg.seed)
    model, history = train(model, train_set, val_set, fold_cfg)
    return evaluate(model, test_set), history


def average_reports(reports):
    """Unweighted mean of fold metrics plus the pooled confusion counts."""
    return {
        "accuracy": float(np.mean([r.accuracy for r in reports])),
        "eer_avg": float(np.mean([r.eer_avg for r in reports])),
        "eer_per_class": np.mean([r.eer_per_class for r in reports], axis=0).tolist(),
        "fold_accuracy": [r.accuracy for r in reports],
        "fold_eer_avg": [r.eer_avg for r in reports],
        "n_total": int(sum(r.n for r in reports)),
        "confusion_total": np.sum([r.confusion for r in reports], axis=0).astype(int).tolist(),
    }


def run_kfold(paired, k, config, model_config, jobs=1):
    """Stratified k-fold cross-validation; returns (reports, histories, average)."""
    plan = stratified_kfold(paired.labels, k, config.seed)
    results = [None] * k
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                pool.submit(_run_fold, paired, plan, fold, model_config, config): fold
                for fold in range(k)
            }
            for fut, fold in futures.items():
                results[fold] = fut.result()
    else:
        for fold in range(k):
            results[fold] = _run_fold(paired, plan, fold, model_config, config)
    reports = [r for r, _ in results]
    histories = [h for _, h in results]
    return reports, histories, average_reports(reports)


def save_checkpoint(model, path):
    cfg_dict = model.config.to_dict()
    write_checkpoint(
        model.store,
        path,
        extra_header={"model_config": cfg_dict, "config_hash": config_hash(cfg_dict)},
    )


def load_checkpoint(path, expect_arch=None):
    header, arrays = read_checkpoint(path)
    cfg_dict = header.get("model_config")
    if cfg_dict is None:
        raise DataError("checkpoint header lacks a model config")
    if header.get("config_hash") != config_hash(cfg_dict):
        raise DataError("config-hash mismatch: refusing to load checkpoint")
    config = ModelConfig.from_dict(cfg_dict)
    if expect_arch is not None and config.arch != expect_arch:
        raise DataError(
            f"checkpoint holds a {config.arch!r} model, expected {expect_arch!r}"
        )
    model = build_model(config, seed=0)
    expected = set(model.store.names())
    if expected != set(arrays):
        raise DataError("checkpoint parameters do not match the declared architecture")
    model.store.load_state_arrays(arrays)
    model.store.t = int(header.get("step", 0))
    return model
