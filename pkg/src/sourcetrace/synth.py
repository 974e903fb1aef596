"""Deterministic two-view synthetic embedding datasets for desk-scale runs.

Each sample of class c is built from a class mean plus a latent split into
a shared part z (weight sqrt(cross_corr)) and per-view noise (weight
sqrt(1-cross_corr)), then pushed through a fixed random isometry per view:

    u_view = mean_c + sqrt(rho) * z + sqrt(1-rho) * eps_view
    v_view = u_view @ M_view          (M_view rows orthonormal)

Within-class variance is 1 per latent coordinate, so ``separation`` is the
per-coordinate standard deviation of the class means in within-class-sigma
units; Euclidean class-mean spacing grows with sqrt(2 * latent_dim).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .steb import EmbeddingTable, PairedDataset

MAX_LATENT_DIM = 16


@dataclass
class SynthSpec:
    n_classes: int
    n_per_class: int
    d_a: int
    d_b: int
    separation: float = 2.0
    cross_corr: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ConfigError("need >= 2 classes")
        if min(self.n_per_class, self.d_a, self.d_b) < 1:
            raise ConfigError("counts and dimensions must be positive")
        if self.separation < 0:
            raise ConfigError("separation must be >= 0")
        if not 0.0 <= self.cross_corr <= 1.0:
            raise ConfigError("cross_corr must be in [0, 1]")


def _isometry(rng, latent_dim, out_dim):
    q, _ = np.linalg.qr(rng.standard_normal((out_dim, latent_dim)))
    return q.T  # (latent_dim, out_dim), orthonormal rows


def _gen_views(spec, map_a, map_b):
    rng = np.random.default_rng(spec.seed)
    latent_dim = map_a.shape[0]
    means = spec.separation * rng.standard_normal((spec.n_classes, latent_dim))
    w_shared = math.sqrt(spec.cross_corr)
    w_noise = math.sqrt(1.0 - spec.cross_corr)
    rows_a, rows_b, labels = [], [], []
    for c in range(spec.n_classes):
        z = rng.standard_normal((spec.n_per_class, latent_dim))
        eps_a = rng.standard_normal((spec.n_per_class, latent_dim))
        eps_b = rng.standard_normal((spec.n_per_class, latent_dim))
        u_a = means[c] + w_shared * z + w_noise * eps_a
        u_b = means[c] + w_shared * z + w_noise * eps_b
        rows_a.append(u_a @ map_a)
        rows_b.append(u_b @ map_b)
        labels.extend([c] * spec.n_per_class)
    ids = [f"synth_{i:06d}" for i in range(spec.n_classes * spec.n_per_class)]
    class_names = [f"class_{c}" for c in range(spec.n_classes)]
    table_a = EmbeddingTable(
        ids=ids,
        vectors=np.concatenate(rows_a).astype(np.float32),
        labels=np.asarray(labels),
        class_names=class_names,
        source_model="synthetic",
    )
    table_b = EmbeddingTable(
        ids=ids,
        vectors=np.concatenate(rows_b).astype(np.float32),
        labels=np.asarray(labels),
        class_names=class_names,
        source_model="synthetic",
    )
    return PairedDataset(view_a=table_a, view_b=table_b), means


def gen_two_view(spec):
    """Generate the paired dataset for a spec; byte-identical for equal specs."""
    latent_dim = min(spec.d_a, spec.d_b, MAX_LATENT_DIM)
    map_rng = np.random.default_rng((spec.seed, 0xA11))
    map_a = _isometry(map_rng, latent_dim, spec.d_a)
    map_b = _isometry(map_rng, latent_dim, spec.d_b)
    paired, _ = _gen_views(spec, map_a, map_b)
    return paired


def ncm_accuracy(train_vectors, train_labels, test_vectors, test_labels):
    """Nearest-class-mean accuracy: the learned-component-free difficulty oracle."""
    train_vectors = np.asarray(train_vectors, dtype=np.float64)
    test_vectors = np.asarray(test_vectors, dtype=np.float64)
    classes = np.unique(train_labels)
    means = np.stack(
        [train_vectors[train_labels == c].mean(axis=0) for c in classes]
    )
    d2 = ((test_vectors[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    preds = classes[np.argmin(d2, axis=1)]
    return float((preds == np.asarray(test_labels)).mean())


def gen_eer_case(kind):
    """Fixed (scores, flags, expected_eer) fixtures for the EER implementation."""
    if kind == "perfect":
        scores = np.array([0.9, 0.8, 0.2, 0.1])
        flags = np.array([True, True, False, False])
        return scores, flags, 0.0
    if kind == "random":
        scores = np.full(6, 0.5)
        flags = np.array([True, True, True, False, False, False])
        return scores, flags, 0.5
    if kind == "hand":
        scores = np.array([0.9, 0.8, 0.4, 0.6, 0.2, 0.1])
        flags = np.array([True, True, True, False, False, False])
        return scores, flags, 1.0 / 3.0
    raise ConfigError(f"unknown EER case {kind!r}")
