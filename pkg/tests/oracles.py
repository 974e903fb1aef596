"""Independent reference implementations the tests check against.

Everything here is deliberately naive (explicit loops, a different
eigendecomposition routine) and stays decoupled from the package code
paths it validates.
"""

import numpy as np
import scipy.linalg


def matmul_naive(a, b):
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def conv1d_naive(x, kernels, bias):
    n, cin, length = x.shape
    cout = kernels.shape[0]
    lout = length - 2
    out = np.zeros((n, cout, lout))
    for i in range(n):
        for co in range(cout):
            for t in range(lout):
                s = bias[co]
                for ci in range(cin):
                    for tau in range(3):
                        s += kernels[co, ci, tau] * x[i, ci, t + tau]
                out[i, co, t] = s
    return out


def covariance_naive(a, b):
    n, d1 = a.shape
    d2 = b.shape[1]
    am = a.mean(axis=0)
    bm = b.mean(axis=0)
    out = np.zeros((d1, d2))
    for i in range(d1):
        for j in range(d2):
            s = 0.0
            for r in range(n):
                s += (a[r, i] - am[i]) * (b[r, j] - bm[j])
            out[i, j] = s / (n - 1)
    return out


def inv_sqrt_scipy(s):
    w, u = scipy.linalg.eigh(s)
    return u @ np.diag(w**-0.5) @ u.T


def cca_loss_oracle(x, y):
    """Trace of the whitened cross-covariance, ridge-free, via scipy eigh."""
    sxx = covariance_naive(x, x)
    syy = covariance_naive(y, y)
    sxy = covariance_naive(x, y)
    t = inv_sqrt_scipy(sxx) @ sxy @ inv_sqrt_scipy(syy)
    return float(np.trace(t))


def attention_naive(tokens, wq, wk, wv):
    t, d = tokens.shape
    q = tokens @ wq
    k = tokens @ wk
    v = tokens @ wv
    logits = q @ k.T / np.sqrt(d)
    out = np.zeros((t, d))
    for i in range(t):
        row = logits[i] - logits[i].max()
        w = np.exp(row)
        w /= w.sum()
        out[i] = w @ v
    return out


def eer_sweep_oracle(scores, flags):
    """Exhaustive midpoint threshold sweep, explicit loop."""
    scores = np.asarray(scores, dtype=np.float64)
    flags = np.asarray(flags, dtype=bool)
    pos = scores[flags]
    neg = scores[~flags]
    uniq = np.unique(scores)
    thresholds = [-np.inf] + list((uniq[:-1] + uniq[1:]) / 2.0) + [np.inf]
    best_key = None
    best_eer = None
    for t in thresholds:
        far = float((neg >= t).mean())
        frr = float((pos < t).mean())
        key = (abs(far - frr), far + frr)
        if best_key is None or key < best_key:
            best_key = key
            best_eer = (far + frr) / 2.0
    return best_eer


def adam_scalar_oracle(theta0, grad_fn, lr, steps, beta1=0.9, beta2=0.999, eps=1e-8):
    """The textbook scalar Adam recurrence."""
    theta = theta0
    m = v = 0.0
    traj = []
    for t in range(1, steps + 1):
        g = grad_fn(theta)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        theta -= lr * mhat / (np.sqrt(vhat) + eps)
        traj.append(theta)
    return np.array(traj)
