"""Canonical-correlation alignment loss between two projected feature batches.

The loss is the trace of the whitened cross-covariance

    T = (Sxx)^(-1/2) Sxy (Syy)^(-1/2)

computed on column-centered batches with unbiased (N-1) covariances, a
ridge term on the self-covariance diagonals and an eigenvalue floor inside
the inverse square roots. Training maximizes it (the total objective
subtracts lambda times this value), pulling the two branches toward
maximal correlation. ``mode="nuclear"`` swaps the trace for the sum of
singular values of T.

Gradients are analytic; the inverse square root is differentiated through
its eigendecomposition with the Daleckii-Krein kernel.
"""

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, as_tensor
from .errors import ConfigError, DataError, NumericalError

CCA_MODES = ("trace", "nuclear")


@dataclass
class CcaConfig:
    ridge: float = 1e-3
    eig_floor: float = 1e-6
    mode: str = "trace"

    def __post_init__(self):
        if self.ridge < 0:
            raise ConfigError(f"ridge must be >= 0, got {self.ridge}")
        if self.eig_floor <= 0:
            raise ConfigError(f"eig_floor must be > 0, got {self.eig_floor}")
        if self.mode not in CCA_MODES:
            raise ConfigError(f"cca_mode must be one of {CCA_MODES}, got {self.mode!r}")


def center_columns(m):
    m = np.asarray(m, dtype=np.float64)
    return m - m.mean(axis=0, keepdims=True)


def covariance(a, b, ridge=0.0):
    """A'B / (N-1); the ridge lands on the diagonal only for self-covariance."""
    a = np.asarray(a, dtype=np.float64)
    same = b is None or b is a
    b = a if same else np.asarray(b, dtype=np.float64)
    n = a.shape[0]
    if n < 2:
        raise DataError("covariance undefined for fewer than 2 samples")
    cov = a.T @ b / (n - 1)
    if same and ridge:
        cov = cov + ridge * np.eye(a.shape[1])
    return cov


def inv_sqrt_psd(s, eig_floor=1e-6):
    """U diag(max(w, floor))^(-1/2) U' for a symmetric matrix S = U diag(w) U'."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape[0] != s.shape[1]:
        raise DataError(f"matrix must be square, got {s.shape}")
    if not np.allclose(s, s.T, atol=1e-8):
        raise DataError("matrix is not symmetric within 1e-8")
    try:
        w, u = np.linalg.eigh(s)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition did not converge") from exc
    f = np.maximum(w, eig_floor) ** -0.5
    return (u * f) @ u.T


def _dk_invsqrt_adjoint(w, u, grad, eig_floor):
    """Pull a gradient on f(S) = clamp(S)^(-1/2) back to S (Daleckii-Krein)."""
    wc = np.maximum(w, eig_floor)
    f = wc**-0.5
    deriv = np.where(w > eig_floor, -0.5 * wc**-1.5, 0.0)
    dw = w[:, None] - w[None, :]
    df = f[:, None] - f[None, :]
    tol = 1e-12 * max(1.0, float(np.abs(w).max()))
    close = np.abs(dw) < tol
    kernel = np.where(
        close,
        0.5 * (deriv[:, None] + deriv[None, :]),
        df / np.where(close, 1.0, dw),
    )
    return u @ (kernel * (u.T @ grad @ u)) @ u.T


def _loss_core(xh, yh, config):
    xh = np.asarray(xh, dtype=np.float64)
    yh = np.asarray(yh, dtype=np.float64)
    if xh.ndim != 2 or yh.ndim != 2:
        raise DataError("CCA inputs must be 2-d batches")
    if xh.shape[0] != yh.shape[0]:
        raise DataError(
            f"CCA inputs must have equal row counts, got {xh.shape[0]} and {yh.shape[0]}"
        )
    if xh.shape[1] != yh.shape[1]:
        raise DataError("CCA requires equal projected dimensions")
    n = xh.shape[0]
    if n < 2:
        raise DataError("covariance undefined for fewer than 2 samples")
    xc = center_columns(xh)
    yc = center_columns(yh)
    sxx = covariance(xc, None, ridge=config.ridge)
    syy = covariance(yc, None, ridge=config.ridge)
    sxy = xc.T @ yc / (n - 1)
    try:
        wx, ux = np.linalg.eigh(sxx)
        wy, uy = np.linalg.eigh(syy)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition did not converge") from exc
    a = (ux * np.maximum(wx, config.eig_floor) ** -0.5) @ ux.T
    b = (uy * np.maximum(wy, config.eig_floor) ** -0.5) @ uy.T
    t = a @ sxy @ b
    return xc, yc, sxy, (wx, ux, a), (wy, uy, b), t


def cca_loss(xh, yh, config=None):
    """Trace (or nuclear norm) of the whitened cross-covariance; |value| <= D."""
    config = config or CcaConfig()
    *_, t = _loss_core(xh, yh, config)
    if config.mode == "trace":
        return float(np.trace(t))
    return float(np.linalg.svd(t, compute_uv=False).sum())


def cca_grad(xh, yh, config=None):
    """Gradients of cca_loss with respect to both input batches."""
    config = config or CcaConfig()
    xc, yc, sxy, (wx, ux, a), (wy, uy, b), t = _loss_core(xh, yh, config)
    n = xc.shape[0]
    if config.mode == "trace":
        gt = np.eye(t.shape[0])
    else:
        u_svd, _, vt_svd = np.linalg.svd(t)
        gt = u_svd @ vt_svd
    # T = A Sxy B with A, B functions of the self-covariances
    g_a = gt @ b @ sxy.T
    g_b = sxy.T @ a @ gt
    g_sxy = a @ gt @ b
    g_sxx = _dk_invsqrt_adjoint(wx, ux, g_a, config.eig_floor)
    g_syy = _dk_invsqrt_adjoint(wy, uy, g_b, config.eig_floor)
    gx = (yc @ g_sxy.T + xc @ (g_sxx + g_sxx.T)) / (n - 1)
    gy = (xc @ g_sxy + yc @ (g_syy + g_syy.T)) / (n - 1)
    # undo the column centering (H' g with H = I - 11'/n)
    gx -= gx.mean(axis=0, keepdims=True)
    gy -= gy.mean(axis=0, keepdims=True)
    return gx, gy


def cca_node(xh, yh, config=None):
    """Autodiff node: scalar CCA value whose backward uses the analytic gradient."""
    config = config or CcaConfig()
    xh, yh = as_tensor(xh), as_tensor(yh)
    value = cca_loss(xh.data, yh.data, config)
    out = Tensor(value, (xh, yh))

    def _bwd(g):
        gx, gy = cca_grad(xh.data, yh.data, config)
        xh.accumulate(float(g) * gx)
        yh.accumulate(float(g) * gy)

    out._backward = _bwd
    return out
