"""Array-valued reverse-mode autodiff over numpy, sized for this project.

A Tensor wraps a float64 ndarray plus a gradient buffer and a backward
closure; ``backward()`` runs the closures in reverse topological order.
Only the operations the four architectures need are provided. Convolution
and pooling dispatch to the kernels package (compiled or numpy backend);
everything else rides on BLAS through numpy.
"""

import math

import numpy as np

from . import kernels
from .errors import ConfigError


class Tensor:
    """A node in the computation graph: value, gradient, backward closure."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def item(self):
        return float(self.data)

    # small arithmetic surface used when composing losses
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(as_tensor(other), -1.0))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def backward(loss):
    """Populate gradients of every node reachable from a scalar loss."""
    if loss.data.size != 1:
        raise ValueError("backward requires a scalar loss")
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# primitive ops


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data + b.data, (a, b))

    def _bwd(g):
        a.accumulate(g)
        b.accumulate(g)

    out._backward = _bwd
    return out


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data * b.data, (a, b))

    def _bwd(g):
        a.accumulate(g * b.data)
        b.accumulate(g * a.data)

    out._backward = _bwd
    return out


def scale(x, c):
    x = as_tensor(x)
    c = float(c)
    out = Tensor(x.data * c, (x,))

    def _bwd(g):
        x.accumulate(g * c)

    out._backward = _bwd
    return out


def matmul(a, b):
    """Matrix product; supports 2d@2d, 3d@2d (shared right factor) and 3d@3d."""
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data.ndim, b.data.ndim
    if (ad, bd) not in ((2, 2), (3, 2), (3, 3)):
        raise ValueError(f"unsupported matmul ranks {ad} @ {bd}")
    if a.data.shape[-1] != b.data.shape[-2 if bd > 1 else 0]:
        raise ValueError(f"matmul shape mismatch {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, (a, b))

    def _bwd(g):
        if (ad, bd) == (2, 2):
            a.accumulate(g @ b.data.T)
            b.accumulate(a.data.T @ g)
        elif (ad, bd) == (3, 2):
            a.accumulate(g @ b.data.T)
            b.accumulate(np.tensordot(a.data, g, axes=([0, 1], [0, 1])))
        else:
            a.accumulate(g @ b.data.transpose(0, 2, 1))
            b.accumulate(a.data.transpose(0, 2, 1) @ g)

    out._backward = _bwd
    return out


def add_bias(x, b):
    """Broadcast a vector bias over the last axis."""
    x, b = as_tensor(x), as_tensor(b)
    if x.data.shape[-1] != b.data.shape[0] or b.data.ndim != 1:
        raise ValueError(f"bias shape {b.data.shape} does not fit {x.data.shape}")
    out = Tensor(x.data + b.data, (x, b))

    def _bwd(g):
        x.accumulate(g)
        b.accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0))

    out._backward = _bwd
    return out


def reshape(x, shape):
    x = as_tensor(x)
    old = x.data.shape
    out = Tensor(x.data.reshape(shape), (x,))

    def _bwd(g):
        x.accumulate(g.reshape(old))

    out._backward = _bwd
    return out


def flatten_rows(x):
    x = as_tensor(x)
    return reshape(x, (x.data.shape[0], -1))


def concat_cols(a, b):
    a, b = as_tensor(a), as_tensor(b)
    wa = a.data.shape[1]
    out = Tensor(np.concatenate([a.data, b.data], axis=1), (a, b))

    def _bwd(g):
        a.accumulate(g[:, :wa])
        b.accumulate(g[:, wa:])

    out._backward = _bwd
    return out


def transpose_last2(x):
    x = as_tensor(x)
    axes = list(range(x.data.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    out = Tensor(x.data.transpose(axes), (x,))

    def _bwd(g):
        x.accumulate(g.transpose(axes))

    out._backward = _bwd
    return out


# ---------------------------------------------------------------------------
# activations


def relu(x):
    x = as_tensor(x)
    out = Tensor(np.maximum(x.data, 0.0), (x,))

    def _bwd(g):
        x.accumulate(g * (x.data > 0))

    out._backward = _bwd
    return out


def sigmoid(x):
    x = as_tensor(x)
    # split by sign to avoid overflow in exp
    pos = x.data >= 0
    s = np.empty_like(x.data)
    s[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    e = np.exp(x.data[~pos])
    s[~pos] = e / (1.0 + e)
    out = Tensor(s, (x,))

    def _bwd(g):
        x.accumulate(g * s * (1.0 - s))

    out._backward = _bwd
    return out


def softmax_rows(x):
    """Exp-normalize along the last axis, stabilized by max subtraction."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s, (x,))

    def _bwd(g):
        inner = (g * s).sum(axis=-1, keepdims=True)
        x.accumulate((g - inner) * s)

    out._backward = _bwd
    return out


# ---------------------------------------------------------------------------
# structured layers


def conv1d(x, kernels_w, bias):
    """Valid stride-1 width-3 convolution: (N, Cin, L) -> (N, Cout, L-2)."""
    x, kernels_w, bias = as_tensor(x), as_tensor(kernels_w), as_tensor(bias)
    xd = np.ascontiguousarray(x.data)
    kd = np.ascontiguousarray(kernels_w.data)
    out = Tensor(kernels.conv1d_forward(xd, kd, bias.data), (x, kernels_w, bias))

    def _bwd(g):
        gx, gk, gb = kernels.conv1d_backward(xd, kd, np.ascontiguousarray(g))
        x.accumulate(gx)
        kernels_w.accumulate(gk)
        bias.accumulate(gb)

    out._backward = _bwd
    return out


def maxpool1d(x):
    """Window-2 stride-2 max pooling, trailing odd element dropped."""
    x = as_tensor(x)
    xd = np.ascontiguousarray(x.data)
    pooled, switches = kernels.maxpool1d_forward(xd)
    out = Tensor(pooled, (x,))
    length = xd.shape[2]

    def _bwd(g):
        x.accumulate(kernels.maxpool1d_backward(switches, np.ascontiguousarray(g), length))

    out._backward = _bwd
    return out


def dropout(x, rate, rng=None, training=False):
    """Inverted dropout: zero with probability rate, scale survivors by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs a random generator")
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    out = Tensor(x.data * mask, (x,))

    def _bwd(g):
        x.accumulate(g * mask)

    out._backward = _bwd
    return out


def self_attention(tokens, wq, wk, wv):
    """Single-head scaled dot-product self-attention.

    tokens is (T, d) or batched (N, T, d); the projection weights are (d, d).
    Rows of the softmaxed score matrix attend over all tokens of the same
    sample.
    """
    tokens = as_tensor(tokens)
    d = tokens.data.shape[-1]
    q = matmul(tokens, wq)
    k = matmul(tokens, wk)
    v = matmul(tokens, wv)
    logits = scale(matmul(q, transpose_last2(k)), 1.0 / math.sqrt(d))
    return matmul(softmax_rows(logits), v)


def cross_entropy(probs, labels):
    """Mean negative log-likelihood; probabilities clamped to >= 1e-12."""
    probs = as_tensor(probs)
    labels = np.asarray(labels, dtype=np.int64)
    n, c = probs.data.shape
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"label out of range for {c} classes")
    picked = probs.data[np.arange(n), labels]
    clamped = np.maximum(picked, 1e-12)
    out = Tensor(-np.log(clamped).mean(), (probs,))

    def _bwd(g):
        gp = np.zeros_like(probs.data)
        live = picked >= 1e-12
        gp[np.arange(n), labels] = np.where(live, -1.0 / (n * clamped), 0.0)
        probs.accumulate(float(g) * gp)

    out._backward = _bwd
    return out


# functional conveniences for plain-array callers


def dense_forward(x, w, b):
    """out[n] = x[n] @ w + b, the dense-layer contract."""
    return add_bias(matmul(x, w), b)
