"""Pure-numpy kernel backend (fallback for the compiled extension).

Convolutions are lowered to a single GEMM over an im2col buffer, which is
the winning formulation once the channel count is wide enough for BLAS
blocking to pay off. All kernels take and return float64 C-contiguous
arrays. Convolution is stride-1 valid with a fixed width-3 kernel; pooling
is window 2, stride 2, trailing odd element dropped.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

KERNEL_WIDTH = 3


def _im2col(x, lout):
    windows = sliding_window_view(x, KERNEL_WIDTH, axis=2)  # (N, Cin, Lout, 3) view
    n, cin = x.shape[0], x.shape[1]
    return windows.transpose(0, 2, 1, 3).reshape(n * lout, cin * KERNEL_WIDTH)


def conv1d_forward(x, kernels, bias):
    """x: (N, Cin, L), kernels: (Cout, Cin, 3), bias: (Cout,) -> (N, Cout, L-2)."""
    n, cin, length = x.shape
    if length < KERNEL_WIDTH:
        raise ValueError("input shorter than kernel")
    lout = length - KERNEL_WIDTH + 1
    cout = kernels.shape[0]
    cols = _im2col(x, lout)
    out = cols @ kernels.reshape(cout, cin * KERNEL_WIDTH).T
    out += bias
    return np.ascontiguousarray(out.reshape(n, lout, cout).transpose(0, 2, 1))


def conv1d_backward(x, kernels, grad_out):
    """Gradients of conv1d_forward: returns (grad_x, grad_kernels, grad_bias)."""
    n, cin, length = x.shape
    cout, lout = grad_out.shape[1], grad_out.shape[2]
    g2d = np.ascontiguousarray(grad_out.transpose(0, 2, 1)).reshape(n * lout, cout)
    cols = _im2col(x, lout)
    grad_k = (g2d.T @ cols).reshape(cout, cin, KERNEL_WIDTH)
    grad_b = grad_out.sum(axis=(0, 2))
    gcols = g2d @ kernels.reshape(cout, cin * KERNEL_WIDTH)
    gwin = gcols.reshape(n, lout, cin, KERNEL_WIDTH).transpose(0, 2, 1, 3)
    grad_x = np.zeros_like(x)
    for tau in range(KERNEL_WIDTH):
        grad_x[:, :, tau : tau + lout] += gwin[..., tau]
    return grad_x, grad_k, grad_b


def maxpool1d_forward(x):
    """x: (N, C, L) -> (out (N, C, L//2), switches uint8 with the in-window argmax)."""
    n, c, length = x.shape
    if length < 2:
        raise ValueError("nothing to pool")
    lout = length // 2
    pairs = x[:, :, : 2 * lout].reshape(n, c, lout, 2)
    # ties resolve to the first element, matching the compiled backend
    switches = (pairs[..., 1] > pairs[..., 0]).astype(np.uint8)
    out = np.maximum(pairs[..., 0], pairs[..., 1])
    return np.ascontiguousarray(out), switches


def maxpool1d_backward(switches, grad_out, length):
    """Scatter grad_out back to the argmax positions of an (N, C, length) input."""
    n, c, lout = grad_out.shape
    grad_x = np.zeros((n, c, length))
    idx = 2 * np.arange(lout)[None, None, :] + switches
    np.put_along_axis(grad_x, idx, grad_out, axis=2)
    return grad_x
