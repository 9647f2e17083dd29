# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: LSTM sequence passes and the transducer lattice
forward-backward. Semantics mirror _pykernels exactly (same gate order, same
per-step operations), only the inner loops are compiled.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log1p, tanh

BACKEND_NAME = "cython"

cdef double NEG_INF = float("-inf")


cdef inline double _sig(double v) noexcept nogil:
    cdef double e
    if v >= 0.0:
        return 1.0 / (1.0 + exp(-v))
    e = exp(v)
    return e / (1.0 + e)


cdef inline double _lae(double a, double b) noexcept nogil:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


cdef void _one_step(const double[::1] x_t,
                    const double[:, ::1] wx, const double[:, ::1] wr,
                    const double[::1] b, const double[:, ::1] wp, bint has_wp,
                    const double[::1] r_prev, const double[::1] c_prev,
                    double[::1] r_out, double[::1] c_out, double[::1] g_out,
                    double[::1] z_buf) noexcept nogil:
    cdef Py_ssize_t d = x_t.shape[0]
    cdef Py_ssize_t g4 = b.shape[0]
    cdef Py_ssize_t h = g4 // 4
    cdef Py_ssize_t rdim = r_prev.shape[0]
    cdef Py_ssize_t j, k
    cdef double v
    for j in range(g4):
        z_buf[j] = b[j]
    for k in range(d):
        v = x_t[k]
        for j in range(g4):
            z_buf[j] += v * wx[k, j]
    for k in range(rdim):
        v = r_prev[k]
        for j in range(g4):
            z_buf[j] += v * wr[k, j]
    for j in range(h):
        g_out[j] = _sig(z_buf[j])
        g_out[h + j] = _sig(z_buf[h + j])
        g_out[2 * h + j] = tanh(z_buf[2 * h + j])
        g_out[3 * h + j] = _sig(z_buf[3 * h + j])
    for j in range(h):
        c_out[j] = g_out[h + j] * c_prev[j] + g_out[j] * g_out[2 * h + j]
    if has_wp:
        for j in range(rdim):
            r_out[j] = 0.0
        for k in range(h):
            v = g_out[3 * h + k] * tanh(c_out[k])
            for j in range(rdim):
                r_out[j] += v * wp[k, j]
    else:
        for j in range(h):
            r_out[j] = g_out[3 * h + j] * tanh(c_out[j])


def lstm_step(x_t, wx, wr, b, wp, r_prev, c_prev):
    """One LSTM step; see _pykernels.lstm_step."""
    cdef bint has_wp = wp is not None
    cdef Py_ssize_t h = b.shape[0] // 4
    r_out = np.empty_like(r_prev)
    c_out = np.empty_like(c_prev)
    g_out = np.empty_like(b)
    z_buf = np.empty_like(b)
    _one_step(x_t, wx, wr, b,
              wp if has_wp else _EMPTY2D, has_wp,
              r_prev, c_prev, r_out, c_out, g_out, z_buf)
    return r_out, c_out, g_out


def lstm_forward(x, wx, wr, b, wp):
    """Run an LSTM over x (T,D); see _pykernels.lstm_forward."""
    cdef bint has_wp = wp is not None
    cdef Py_ssize_t t_len = x.shape[0]
    cdef Py_ssize_t h = b.shape[0] // 4
    cdef Py_ssize_t rdim = wp.shape[1] if has_wp else h
    out = np.empty((t_len, rdim))
    gates = np.empty((t_len, 4 * h))
    cells = np.empty((t_len, h))
    zeros_r = np.zeros(rdim)
    zeros_c = np.zeros(h)
    z_buf = np.empty(4 * h)
    cdef double[:, ::1] out_v = out
    cdef double[:, ::1] gates_v = gates
    cdef double[:, ::1] cells_v = cells
    cdef double[:, ::1] x_v = x
    cdef double[:, ::1] wx_v = wx
    cdef double[:, ::1] wr_v = wr
    cdef double[::1] b_v = b
    cdef double[:, ::1] wp_v = wp if has_wp else _EMPTY2D
    cdef double[::1] zr_v = zeros_r
    cdef double[::1] zc_v = zeros_c
    cdef double[::1] zb_v = z_buf
    cdef Py_ssize_t t
    for t in range(t_len):
        _one_step(x_v[t], wx_v, wr_v, b_v, wp_v, has_wp,
                  zr_v if t == 0 else out_v[t - 1],
                  zc_v if t == 0 else cells_v[t - 1],
                  out_v[t], cells_v[t], gates_v[t], zb_v)
    return out, gates, cells


def lstm_backward(dout, x, wx, wr, b, wp, out, gates, cells):
    """Full BPTT matching lstm_forward; see _pykernels.lstm_backward."""
    cdef bint has_wp = wp is not None
    cdef Py_ssize_t t_len = cells.shape[0]
    cdef Py_ssize_t h = cells.shape[1]
    cdef Py_ssize_t rdim = out.shape[1]
    dz = np.empty((t_len, 4 * h))
    dwp = np.zeros_like(wp) if has_wp else None
    dr_carry = np.zeros(rdim)
    dc_carry = np.zeros(h)
    dh_buf = np.zeros(h)
    cdef double[:, ::1] dz_v = dz
    cdef double[:, ::1] dout_v = dout
    cdef double[:, ::1] gates_v = gates
    cdef double[:, ::1] cells_v = cells
    cdef double[:, ::1] out_v = out
    cdef double[:, ::1] wr_v = wr
    cdef double[:, ::1] wp_v = wp if has_wp else _EMPTY2D
    cdef double[:, ::1] dwp_v = dwp if has_wp else _EMPTY2D
    cdef double[::1] drc = dr_carry
    cdef double[::1] dcc = dc_carry
    cdef double[::1] dh = dh_buf
    cdef Py_ssize_t t, j, k
    cdef double tc, dr_j, dc_j, hid_k, i_g, f_g, g_g, o_g, cprev, acc
    with nogil:
        for t in range(t_len - 1, -1, -1):
            if has_wp:
                # dwp += outer(hidden, dr); dh = dr @ wp.T
                for k in range(h):
                    tc = tanh(cells_v[t, k])
                    hid_k = gates_v[t, 3 * h + k] * tc
                    acc = 0.0
                    for j in range(rdim):
                        dr_j = dout_v[t, j] + drc[j]
                        dwp_v[k, j] += hid_k * dr_j
                        acc += dr_j * wp_v[k, j]
                    dh[k] = acc
            else:
                for k in range(h):
                    dh[k] = dout_v[t, k] + drc[k]
            for k in range(h):
                i_g = gates_v[t, k]
                f_g = gates_v[t, h + k]
                g_g = gates_v[t, 2 * h + k]
                o_g = gates_v[t, 3 * h + k]
                tc = tanh(cells_v[t, k])
                dc_j = dcc[k] + dh[k] * o_g * (1.0 - tc * tc)
                cprev = cells_v[t - 1, k] if t > 0 else 0.0
                dz_v[t, k] = dc_j * g_g * i_g * (1.0 - i_g)
                dz_v[t, h + k] = dc_j * cprev * f_g * (1.0 - f_g)
                dz_v[t, 2 * h + k] = dc_j * i_g * (1.0 - g_g * g_g)
                dz_v[t, 3 * h + k] = dh[k] * tc * o_g * (1.0 - o_g)
                dcc[k] = dc_j * f_g
            for j in range(rdim):
                acc = 0.0
                for k in range(4 * h):
                    acc += dz_v[t, k] * wr_v[j, k]
                drc[j] = acc
    r_prev_seq = np.zeros_like(out)
    r_prev_seq[1:] = out[:-1]
    dwx = x.T @ dz
    dwr = r_prev_seq.T @ dz
    db = dz.sum(axis=0)
    dx = dz @ wx.T
    return dx, dwx, dwr, db, dwp


def lattice_forward_backward(blank_lp, label_lp):
    """Transducer loss and lattice-entry gradients; see _pykernels."""
    cdef Py_ssize_t t_len = blank_lp.shape[0]
    cdef Py_ssize_t u_len = blank_lp.shape[1]
    cdef Py_ssize_t u_max = u_len - 1
    alpha = np.empty((t_len, u_len))
    beta = np.empty((t_len, u_len))
    dblank = np.zeros((t_len, u_len))
    dlabel = np.zeros((t_len, u_max))
    cdef double[:, ::1] a = alpha
    cdef double[:, ::1] bt = beta
    cdef double[:, ::1] blp = blank_lp
    cdef double[:, ::1] llp = label_lp
    cdef double[:, ::1] db = dblank
    cdef double[:, ::1] dl = dlabel
    cdef Py_ssize_t t, u
    cdef double log_p
    with nogil:
        a[0, 0] = 0.0
        for t in range(1, t_len):
            a[t, 0] = a[t - 1, 0] + blp[t - 1, 0]
        for u in range(1, u_len):
            a[0, u] = a[0, u - 1] + llp[0, u - 1]
        for t in range(1, t_len):
            for u in range(1, u_len):
                a[t, u] = _lae(a[t - 1, u] + blp[t - 1, u],
                               a[t, u - 1] + llp[t, u - 1])
        log_p = a[t_len - 1, u_max] + blp[t_len - 1, u_max]

        bt[t_len - 1, u_max] = blp[t_len - 1, u_max]
        for t in range(t_len - 2, -1, -1):
            bt[t, u_max] = blp[t, u_max] + bt[t + 1, u_max]
        for u in range(u_max - 1, -1, -1):
            bt[t_len - 1, u] = llp[t_len - 1, u] + bt[t_len - 1, u + 1]
        for t in range(t_len - 2, -1, -1):
            for u in range(u_max - 1, -1, -1):
                bt[t, u] = _lae(blp[t, u] + bt[t + 1, u],
                                llp[t, u] + bt[t, u + 1])

        for t in range(t_len - 1):
            for u in range(u_len):
                db[t, u] = -exp(a[t, u] + blp[t, u] + bt[t + 1, u] - log_p)
        db[t_len - 1, u_max] = -exp(a[t_len - 1, u_max]
                                    + blp[t_len - 1, u_max] - log_p)
        for t in range(t_len):
            for u in range(u_max):
                dl[t, u] = -exp(a[t, u] + llp[t, u] + bt[t, u + 1] - log_p)
    return -log_p, dblank, dlabel


_EMPTY2D = np.empty((0, 0))
