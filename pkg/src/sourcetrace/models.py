"""The four downstream architectures and the joint training objective.

fcn     dense 90 -> dense 45 -> softmax head on a single view.
cnn     two conv blocks (128 then 64 width-3 filters, each ReLU + pool-2)
        on the view as a 1-channel sequence, flattened into the fcn head.
concat  two cnn feature stacks, per-branch dense projection to a shared
        width, concatenation, fcn head. No gate, no alignment, no attention.
trio    concat plus, per branch, a sigmoid gate multiplied into the
        projected features, a CCA alignment term between the gated
        branches, and single-head self-attention over the concatenated
        vector reshaped into tokens.

The training objective is  total = cross_entropy - lambda * cca_value;
the alignment term enters only for trio.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import autodiff as ad
from .cca import CcaConfig, cca_node
from .errors import ConfigError
from .params import ParamStore, glorot_uniform

ARCHS = ("fcn", "cnn", "concat", "trio")
SINGLE_VIEW_ARCHS = ("fcn", "cnn")
FUSION_ARCHS = ("concat", "trio")
CONV_FILTERS = (128, 64)
HEAD_UNITS = (90, 45)
MIN_CNN_DIM = 12


@dataclass
class ModelConfig:
    arch: str
    d_in_a: int
    n_classes: int
    d_in_b: Optional[int] = None
    proj_dim: int = 128
    token_dim: int = 64
    dropout_rate: float = 0.2
    cca_lambda: float = 0.3

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ConfigError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if self.n_classes < 2:
            raise ConfigError(f"need >= 2 classes, got {self.n_classes}")
        if self.d_in_a < 1:
            raise ConfigError(f"d_in_a must be positive, got {self.d_in_a}")
        if self.arch in FUSION_ARCHS and not self.d_in_b:
            raise ConfigError("fusion requires two views")
        needs_conv = [self.d_in_a] if self.arch != "fcn" else []
        if self.arch in FUSION_ARCHS:
            needs_conv.append(self.d_in_b)
        for d in needs_conv:
            if d < MIN_CNN_DIM:
                raise ConfigError(
                    f"conv stack needs input dim >= {MIN_CNN_DIM}, got {d}"
                )
        if self.arch == "trio" and (2 * self.proj_dim) % self.token_dim != 0:
            raise ConfigError(
                f"2*proj_dim ({2 * self.proj_dim}) must be divisible by "
                f"token_dim ({self.token_dim})"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.cca_lambda < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.cca_lambda}")

    def to_dict(self):
        return {
            "arch": self.arch,
            "d_in_a": self.d_in_a,
            "d_in_b": self.d_in_b,
            "n_classes": self.n_classes,
            "proj_dim": self.proj_dim,
            "token_dim": self.token_dim,
            "dropout_rate": self.dropout_rate,
            "lambda": self.cca_lambda,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["cca_lambda"] = d.pop("lambda")
        return cls(**d)


@dataclass
class ForwardOutput:
    probs: ad.Tensor
    cca_value: Optional[ad.Tensor] = None


def conv_stack_length(d_in):
    """Sequence length after conv3-pool2-conv3-pool2, and the flattened width."""
    l1 = d_in - 2
    l1p = l1 // 2
    l2 = l1p - 2
    l2p = l2 // 2
    if l2p < 1:
        raise ConfigError(f"input dim {d_in} too small for the conv stack")
    return l2p, CONV_FILTERS[1] * l2p


def cross_entropy(probs, labels):
    """Mean negative log-likelihood of the true classes (clamped at 1e-12)."""
    return ad.cross_entropy(probs, labels)


def total_loss(ce, cca_value, lam):
    """Joint objective: cross-entropy minus lambda times the alignment value."""
    if lam < 0:
        raise ConfigError(f"lambda must be >= 0, got {lam}")
    if isinstance(ce, ad.Tensor) or isinstance(cca_value, ad.Tensor):
        return ad.as_tensor(ce) + ad.scale(ad.as_tensor(cca_value), -lam)
    return float(ce) - lam * float(cca_value)


class Model:
    """A built architecture: config plus parameter store plus forward pass."""

    def __init__(self, config, store, cca_config=None):
        self.config = config
        self.store = store
        self.cca_config = cca_config or CcaConfig()

    # -- forward ------------------------------------------------------------

    def forward(self, xa, xb=None, training=False, rng=None):
        cfg = self.config
        if cfg.arch in FUSION_ARCHS and xb is None:
            raise ConfigError("fusion requires two views")
        xa_t = ad.as_tensor(np.asarray(xa, dtype=np.float64))
        if xa_t.data.ndim != 2 or xa_t.data.shape[1] != cfg.d_in_a:
            raise ConfigError(
                f"view A must be (N, {cfg.d_in_a}), got {np.asarray(xa).shape}"
            )
        if xb is not None:
            xb_t = ad.as_tensor(np.asarray(xb, dtype=np.float64))
            if cfg.arch in FUSION_ARCHS and xb_t.data.shape[1] != cfg.d_in_b:
                raise ConfigError(
                    f"view B must be (N, {cfg.d_in_b}), got {np.asarray(xb).shape}"
                )
        if cfg.arch == "fcn":
            return ForwardOutput(probs=self._head(xa_t, training, rng))
        if cfg.arch == "cnn":
            feat = self._conv_branch(xa_t, "a")
            return ForwardOutput(probs=self._head(feat, training, rng))
        pa = self._projected_branch(xa_t, "a")
        pb = self._projected_branch(xb_t, "b")
        if cfg.arch == "concat":
            fused = ad.concat_cols(pa, pb)
            return ForwardOutput(probs=self._head(fused, training, rng))
        # trio: gate, align, attend
        ga = ad.sigmoid(ad.dense_forward(pa, self["gate_a/w"], self["gate_a/b"]))
        gb = ad.sigmoid(ad.dense_forward(pb, self["gate_b/w"], self["gate_b/b"]))
        xh = ad.mul(ga, pa)
        yh = ad.mul(gb, pb)
        cca_value = None
        if xh.data.shape[0] >= 2:
            cca_value = cca_node(xh, yh, self.cca_config)
        fused = ad.concat_cols(xh, yh)
        n_tokens = 2 * cfg.proj_dim // cfg.token_dim
        tokens = ad.reshape(fused, (fused.data.shape[0], n_tokens, cfg.token_dim))
        attended = ad.self_attention(
            tokens, self["attn/wq"], self["attn/wk"], self["attn/wv"]
        )
        flat = ad.flatten_rows(attended)
        return ForwardOutput(probs=self._head(flat, training, rng), cca_value=cca_value)

    def _conv_branch(self, x, tag):
        h = ad.reshape(x, (x.data.shape[0], 1, x.data.shape[1]))
        h = ad.relu(ad.conv1d(h, self[f"conv1_{tag}/k"], self[f"conv1_{tag}/b"]))
        h = ad.maxpool1d(h)
        h = ad.relu(ad.conv1d(h, self[f"conv2_{tag}/k"], self[f"conv2_{tag}/b"]))
        h = ad.maxpool1d(h)
        return ad.flatten_rows(h)

    def _projected_branch(self, x, tag):
        feat = self._conv_branch(x, tag)
        return ad.relu(ad.dense_forward(feat, self[f"proj_{tag}/w"], self[f"proj_{tag}/b"]))

    def _head(self, x, training, rng):
        cfg = self.config
        h = ad.relu(ad.dense_forward(x, self["head1/w"], self["head1/b"]))
        h = ad.dropout(h, cfg.dropout_rate, rng, training)
        h = ad.relu(ad.dense_forward(h, self["head2/w"], self["head2/b"]))
        h = ad.dropout(h, cfg.dropout_rate, rng, training)
        logits = ad.dense_forward(h, self["out/w"], self["out/b"])
        return ad.softmax_rows(logits)

    def __getitem__(self, name):
        return self.store[name]

    def param_count(self):
        return self.store.n_params()


# -- builders ----------------------------------------------------------------


def _add_dense(store, rng, name, d_in, d_out):
    store.add(f"{name}/w", glorot_uniform(rng, (d_in, d_out), d_in, d_out))
    store.add(f"{name}/b", np.zeros(d_out))


def _add_conv(store, rng, name, c_in, c_out):
    fan_in, fan_out = c_in * 3, c_out * 3
    store.add(f"{name}/k", glorot_uniform(rng, (c_out, c_in, 3), fan_in, fan_out))
    store.add(f"{name}/b", np.zeros(c_out))


def _add_conv_branch(store, rng, tag):
    _add_conv(store, rng, f"conv1_{tag}", 1, CONV_FILTERS[0])
    _add_conv(store, rng, f"conv2_{tag}", CONV_FILTERS[0], CONV_FILTERS[1])


def _add_head(store, rng, d_in, n_classes):
    _add_dense(store, rng, "head1", d_in, HEAD_UNITS[0])
    _add_dense(store, rng, "head2", HEAD_UNITS[0], HEAD_UNITS[1])
    # zero output layer: softmax starts uniform, first-batch CE is ln(C)
    store.add("out/w", np.zeros((HEAD_UNITS[1], n_classes)))
    store.add("out/b", np.zeros(n_classes))


def build_fcn(config, seed=0):
    if config.arch != "fcn":
        raise ConfigError(f"expected arch=fcn, got {config.arch!r}")
    rng = np.random.default_rng((seed, 0))
    store = ParamStore()
    _add_head(store, rng, config.d_in_a, config.n_classes)
    return Model(config, store)


def build_cnn(config, seed=0):
    if config.arch != "cnn":
        raise ConfigError(f"expected arch=cnn, got {config.arch!r}")
    rng = np.random.default_rng((seed, 0))
    store = ParamStore()
    _add_conv_branch(store, rng, "a")
    _, flat = conv_stack_length(config.d_in_a)
    _add_head(store, rng, flat, config.n_classes)
    return Model(config, store)


def build_concat_fusion(config, seed=0):
    if config.arch != "concat":
        raise ConfigError(f"expected arch=concat, got {config.arch!r}")
    rng = np.random.default_rng((seed, 0))
    store = ParamStore()
    _add_conv_branch(store, rng, "a")
    _add_conv_branch(store, rng, "b")
    _, flat_a = conv_stack_length(config.d_in_a)
    _, flat_b = conv_stack_length(config.d_in_b)
    _add_dense(store, rng, "proj_a", flat_a, config.proj_dim)
    _add_dense(store, rng, "proj_b", flat_b, config.proj_dim)
    _add_head(store, rng, 2 * config.proj_dim, config.n_classes)
    return Model(config, store)


def build_trio(config, seed=0):
    if config.arch != "trio":
        raise ConfigError(f"expected arch=trio, got {config.arch!r}")
    rng = np.random.default_rng((seed, 0))
    store = ParamStore()
    _add_conv_branch(store, rng, "a")
    _add_conv_branch(store, rng, "b")
    _, flat_a = conv_stack_length(config.d_in_a)
    _, flat_b = conv_stack_length(config.d_in_b)
    _add_dense(store, rng, "proj_a", flat_a, config.proj_dim)
    _add_dense(store, rng, "proj_b", flat_b, config.proj_dim)
    _add_dense(store, rng, "gate_a", config.proj_dim, config.proj_dim)
    _add_dense(store, rng, "gate_b", config.proj_dim, config.proj_dim)
    for name in ("attn/wq", "attn/wk", "attn/wv"):
        store.add(
            name,
            glorot_uniform(rng, (config.token_dim, config.token_dim),
                           config.token_dim, config.token_dim),
        )
    _add_head(store, rng, 2 * config.proj_dim, config.n_classes)
    return Model(config, store)


_BUILDERS = {
    "fcn": build_fcn,
    "cnn": build_cnn,
    "concat": build_concat_fusion,
    "trio": build_trio,
}


def build_model(config, seed=0):
    return _BUILDERS[config.arch](config, seed)
