"""NumPy fallback for the hot kernels: LSTM sequence passes and the
transducer lattice forward-backward.

Per-frame work uses fixed-shape row operations (one matvec per step) rather
than one batched matmul over the whole sequence. BLAS results can differ in
the last ulp between batch shapes, and the causality contract requires that
running a prefix reproduces the full run's leading rows bit-exactly.
"""

import numpy as np

BACKEND_NAME = "python"

# gate order inside the fused 4H axis: input, forget, cell, output
_I, _F, _G, _O = 0, 1, 2, 3


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_step(x_t, wx, wr, b, wp, r_prev, c_prev):
    """One LSTM step. Returns (r_t, c_t, gates_t) with gates post-activation.

    x_t: (D,), wx: (D,4H), wr: (R,4H), b: (4H,), wp: (H,R) or None.
    r is the recurrent output (projected when wp is given), c the cell state.
    """
    h = c_prev.shape[0]
    z = x_t @ wx + r_prev @ wr + b
    gates = np.empty_like(z)
    gates[: 2 * h] = _sigmoid(z[: 2 * h])          # i, f
    gates[2 * h : 3 * h] = np.tanh(z[2 * h : 3 * h])  # g
    gates[3 * h :] = _sigmoid(z[3 * h :])          # o
    c_t = gates[h : 2 * h] * c_prev + gates[:h] * gates[2 * h : 3 * h]
    hidden = gates[3 * h :] * np.tanh(c_t)
    r_t = hidden @ wp if wp is not None else hidden
    return r_t, c_t, gates


def lstm_forward(x, wx, wr, b, wp):
    """Run an LSTM over x (T,D). Returns (out (T,R), gates (T,4H), c (T,H))."""
    t_len = x.shape[0]
    h = wr.shape[1] // 4
    r_dim = wp.shape[1] if wp is not None else h
    out = np.empty((t_len, r_dim))
    gates = np.empty((t_len, 4 * h))
    cells = np.empty((t_len, h))
    r_prev = np.zeros(r_dim)
    c_prev = np.zeros(h)
    for t in range(t_len):
        r_prev, c_prev, g = lstm_step(x[t], wx, wr, b, wp, r_prev, c_prev)
        out[t] = r_prev
        gates[t] = g
        cells[t] = c_prev
    return out, gates, cells


def lstm_backward(dout, x, wx, wr, b, wp, out, gates, cells):
    """Full BPTT for lstm_forward.

    Returns (dx, dwx, dwr, db, dwp); dwp is None when wp is None.
    """
    t_len, h = cells.shape
    dz = np.empty((t_len, 4 * h))
    dwp = np.zeros_like(wp) if wp is not None else None
    dr_carry = np.zeros(out.shape[1])
    dc_carry = np.zeros(h)
    for t in range(t_len - 1, -1, -1):
        i = gates[t, :h]
        f = gates[t, h : 2 * h]
        g = gates[t, 2 * h : 3 * h]
        o = gates[t, 3 * h :]
        tanh_c = np.tanh(cells[t])
        dr = dout[t] + dr_carry
        if wp is not None:
            dwp += np.outer(o * tanh_c, dr)
            dh = dr @ wp.T
        else:
            dh = dr
        dc = dc_carry + dh * o * (1.0 - tanh_c * tanh_c)
        c_prev = cells[t - 1] if t > 0 else np.zeros(h)
        dz[t, :h] = dc * g * i * (1.0 - i)
        dz[t, h : 2 * h] = dc * c_prev * f * (1.0 - f)
        dz[t, 2 * h : 3 * h] = dc * i * (1.0 - g * g)
        dz[t, 3 * h :] = dh * tanh_c * o * (1.0 - o)
        dc_carry = dc * f
        dr_carry = dz[t] @ wr.T
    # parameter gradients batch cleanly once dz is known
    r_prev_seq = np.zeros_like(out)
    r_prev_seq[1:] = out[:-1]
    dwx = x.T @ dz
    dwr = r_prev_seq.T @ dz
    db = dz.sum(axis=0)
    dx = dz @ wx.T
    return dx, dwx, dwr, db, dwp


def lattice_forward_backward(blank_lp, label_lp):
    """Transducer loss and gradients on the (T, U+1) lattice.

    blank_lp[t, u]: log P(blank at node (t,u)); label_lp[t, u]: log P of the
    target's next token at node (t,u). Returns (loss, dblank, dlabel) where
    the gradients are of loss = -log P(target).
    """
    t_len, u_len = blank_lp.shape  # u_len == U + 1
    u_max = u_len - 1
    lae = np.logaddexp

    alpha = np.empty((t_len, u_len))
    alpha[0, 0] = 0.0
    for t in range(1, t_len):
        alpha[t, 0] = alpha[t - 1, 0] + blank_lp[t - 1, 0]
    for u in range(1, u_len):
        alpha[0, u] = alpha[0, u - 1] + label_lp[0, u - 1]
    for t in range(1, t_len):
        for u in range(1, u_len):
            alpha[t, u] = lae(
                alpha[t - 1, u] + blank_lp[t - 1, u],
                alpha[t, u - 1] + label_lp[t, u - 1],
            )
    log_p = alpha[t_len - 1, u_max] + blank_lp[t_len - 1, u_max]

    beta = np.empty((t_len, u_len))
    beta[t_len - 1, u_max] = blank_lp[t_len - 1, u_max]
    for t in range(t_len - 2, -1, -1):
        beta[t, u_max] = blank_lp[t, u_max] + beta[t + 1, u_max]
    for u in range(u_max - 1, -1, -1):
        beta[t_len - 1, u] = label_lp[t_len - 1, u] + beta[t_len - 1, u + 1]
    for t in range(t_len - 2, -1, -1):
        for u in range(u_max - 1, -1, -1):
            beta[t, u] = lae(
                blank_lp[t, u] + beta[t + 1, u],
                label_lp[t, u] + beta[t, u + 1],
            )

    dblank = np.zeros_like(blank_lp)
    dlabel = np.zeros_like(label_lp)
    # occupancy of each transition, normalized by the total path mass
    dblank[: t_len - 1, :] = -np.exp(
        alpha[: t_len - 1, :] + blank_lp[: t_len - 1, :] + beta[1:, :] - log_p
    )
    dblank[t_len - 1, u_max] = -np.exp(
        alpha[t_len - 1, u_max] + blank_lp[t_len - 1, u_max] - log_p
    )
    if u_max > 0:
        dlabel[:, :] = -np.exp(
            alpha[:, :u_max] + label_lp + beta[:, 1:] - log_p
        )
    return -log_p, dblank, dlabel
