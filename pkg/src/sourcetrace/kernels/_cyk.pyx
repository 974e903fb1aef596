# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend: width-3 valid conv1d and window-2 maxpool.

Direct vectorizable loops own the regimes where BLAS overhead dominates
(narrow channel counts, pooling); wide-channel convolutions dispatch to
the im2col GEMM formulation, which blocked BLAS wins by a wide margin.
The crossover was measured with benchmarks/bench_kernels.py.
"""

import numpy as np

cimport cython
cimport numpy as cnp

from . import _npk

cnp.import_array()

KERNEL_WIDTH = 3
DIRECT_CIN_MAX = 8


def conv1d_forward(x, kernels, bias):
    if x.shape[1] > DIRECT_CIN_MAX:
        return _npk.conv1d_forward(x, kernels, bias)
    return _conv1d_forward_direct(x, kernels, bias)


def conv1d_backward(x, kernels, grad_out):
    if x.shape[1] > DIRECT_CIN_MAX:
        return _npk.conv1d_backward(x, kernels, grad_out)
    return _conv1d_backward_direct(x, kernels, grad_out)


def _conv1d_forward_direct(
    double[:, :, ::1] x, double[:, :, ::1] kernels, double[::1] bias
):
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[1], length = x.shape[2]
    cdef Py_ssize_t cout = kernels.shape[0]
    if length < 3:
        raise ValueError("input shorter than kernel")
    cdef Py_ssize_t lout = length - 2
    out_arr = np.empty((n, cout, lout), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, co, ci, t
    cdef double k0, k1, k2, b
    cdef const double* xrow
    cdef double* orow

    with nogil:
        for i in range(n):
            for co in range(cout):
                b = bias[co]
                orow = &out[i, co, 0]
                for t in range(lout):
                    orow[t] = b
                for ci in range(cin):
                    xrow = &x[i, ci, 0]
                    k0 = kernels[co, ci, 0]
                    k1 = kernels[co, ci, 1]
                    k2 = kernels[co, ci, 2]
                    for t in range(lout):
                        orow[t] += k0 * xrow[t] + k1 * xrow[t + 1] + k2 * xrow[t + 2]
    return out_arr


def _conv1d_backward_direct(
    double[:, :, ::1] x, double[:, :, ::1] kernels, double[:, :, ::1] grad_out
):
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[1], length = x.shape[2]
    cdef Py_ssize_t cout = kernels.shape[0], lout = grad_out.shape[2]
    gx_arr = np.zeros((n, cin, length), dtype=np.float64)
    gk_arr = np.zeros((cout, cin, 3), dtype=np.float64)
    gb_arr = np.zeros(cout, dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, ::1] gk = gk_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t i, co, ci, t
    cdef double k0, k1, k2, g, s0, s1, s2, bsum
    cdef const double* grow
    cdef const double* xrow
    cdef double* gxrow

    with nogil:
        for i in range(n):
            for co in range(cout):
                grow = &grad_out[i, co, 0]
                bsum = 0.0
                for t in range(lout):
                    bsum += grow[t]
                gb[co] += bsum
                for ci in range(cin):
                    xrow = &x[i, ci, 0]
                    gxrow = &gx[i, ci, 0]
                    k0 = kernels[co, ci, 0]
                    k1 = kernels[co, ci, 1]
                    k2 = kernels[co, ci, 2]
                    s0 = 0.0
                    s1 = 0.0
                    s2 = 0.0
                    for t in range(lout):
                        g = grow[t]
                        s0 += g * xrow[t]
                        s1 += g * xrow[t + 1]
                        s2 += g * xrow[t + 2]
                        gxrow[t] += k0 * g
                        gxrow[t + 1] += k1 * g
                        gxrow[t + 2] += k2 * g
                    gk[co, ci, 0] += s0
                    gk[co, ci, 1] += s1
                    gk[co, ci, 2] += s2
    return gx_arr, gk_arr, gb_arr


def maxpool1d_forward(double[:, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], length = x.shape[2]
    if length < 2:
        raise ValueError("nothing to pool")
    cdef Py_ssize_t lout = length // 2
    out_arr = np.empty((n, c, lout), dtype=np.float64)
    sw_arr = np.empty((n, c, lout), dtype=np.uint8)
    cdef double[:, :, ::1] out = out_arr
    cdef unsigned char[:, :, ::1] sw = sw_arr
    cdef Py_ssize_t i, j, t
    cdef double a, b

    with nogil:
        for i in range(n):
            for j in range(c):
                for t in range(lout):
                    a = x[i, j, 2 * t]
                    b = x[i, j, 2 * t + 1]
                    if b > a:  # tie resolves to the first element
                        out[i, j, t] = b
                        sw[i, j, t] = 1
                    else:
                        out[i, j, t] = a
                        sw[i, j, t] = 0
    return out_arr, sw_arr


def maxpool1d_backward(
    unsigned char[:, :, ::1] switches, double[:, :, ::1] grad_out, Py_ssize_t length
):
    cdef Py_ssize_t n = grad_out.shape[0], c = grad_out.shape[1], lout = grad_out.shape[2]
    gx_arr = np.zeros((n, c, length), dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef Py_ssize_t i, j, t

    with nogil:
        for i in range(n):
            for j in range(c):
                for t in range(lout):
                    gx[i, j, 2 * t + switches[i, j, t]] = grad_out[i, j, t]
    return gx_arr
