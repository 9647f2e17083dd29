"""Dense numeric core: stable activations, layers with hand-written backward
passes, and Adam with a warmup/constant/decay learning-rate schedule.

Everything runs in float64. Per-frame forward passes use fixed-shape row
operations so that running a prefix of a sequence reproduces the full run's
leading rows bit-exactly (BLAS results are not batch-shape invariant).
"""

from dataclasses import dataclass

import numpy as np

from intent_rnnt import kernels
from intent_rnnt.errors import ShapeError


def check_finite(x, what="array"):
    """Raise if x contains NaN or Inf; numeric ops must never produce them."""
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {what}")


def matmul(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError("matmul expects 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def log_sum_exp(v):
    """log(sum(exp(v))) with max-subtraction; v is a nonempty 1-D vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty vector")
    m = np.max(v)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(v - m))))


def softmax(x, axis=-1):
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("softmax of an empty array")
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(x, axis=-1):
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("log_softmax of an empty array")
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


class Param:
    """A named trainable array with a gradient buffer of the same shape."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name, value):
        self.name = name
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Param({self.name}, shape={self.value.shape})"


def uniform_init(rng, shape, scale=0.1):
    return rng.uniform(-scale, scale, size=shape)


class Linear:
    """y = x @ w + b, computed row by row (see module docstring)."""

    def __init__(self, in_dim, out_dim, rng, name="linear"):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.w = Param(f"{name}.w", uniform_init(rng, (in_dim, out_dim)))
        self.b = Param(f"{name}.b", np.zeros(out_dim))
        self._x = None

    def forward_row(self, v):
        return v @ self.w.value + self.b.value

    def forward(self, x):
        if x.shape[1] != self.in_dim:
            raise ShapeError(f"linear expects {self.in_dim} cols, got {x.shape[1]}")
        self._x = x
        out = np.empty((x.shape[0], self.out_dim))
        for t in range(x.shape[0]):
            out[t] = self.forward_row(x[t])
        return out

    def backward(self, dy):
        x = self._x
        self.w.grad += x.T @ dy
        self.b.grad += dy.sum(axis=0)
        return dy @ self.w.value.T

    def params(self):
        return [self.w, self.b]


class Embedding:
    """Token-id lookup table."""

    def __init__(self, vocab_size, dim, rng, name="embedding"):
        self.vocab_size = vocab_size
        self.dim = dim
        self.w = Param(f"{name}.w", uniform_init(rng, (vocab_size, dim)))
        self._ids = None

    def forward(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        self._ids = ids
        return self.w.value[ids].copy()

    def backward(self, dy):
        np.add.at(self.w.grad, self._ids, dy)

    def params(self):
        return [self.w]


class LstmLayer:
    """Unidirectional LSTM with optional output projection.

    Standard cell (sigmoid input/forget/output gates, tanh cell and output
    nonlinearities, no peepholes), zero initial state, forget-gate bias
    initialized to 1.0. With a projection, the recurrent state is the
    projected output.
    """

    def __init__(self, input_dim, hidden_dim, rng, proj_dim=None, name="lstm"):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.proj_dim = proj_dim
        self.wx = Param(f"{name}.wx", uniform_init(rng, (input_dim, 4 * hidden_dim)))
        self.wr = Param(f"{name}.wr", uniform_init(rng, (self.out_dim, 4 * hidden_dim)))
        b = np.zeros(4 * hidden_dim)
        b[hidden_dim : 2 * hidden_dim] = 1.0
        self.b = Param(f"{name}.b", b)
        self.wp = (
            Param(f"{name}.wp", uniform_init(rng, (hidden_dim, proj_dim)))
            if proj_dim is not None
            else None
        )
        self._cache = None

    @property
    def out_dim(self):
        return self.proj_dim if self.proj_dim is not None else self.hidden_dim

    def initial_state(self):
        return np.zeros(self.out_dim), np.zeros(self.hidden_dim)

    def step(self, x_t, state):
        """One frame; state is (recurrent_out, cell). Matches forward() rows."""
        r_prev, c_prev = state
        r, c, _ = kernels.lstm_step(
            np.ascontiguousarray(x_t),
            self.wx.value,
            self.wr.value,
            self.b.value,
            self.wp.value if self.wp is not None else None,
            r_prev,
            c_prev,
        )
        return r, (r, c)

    def forward(self, x):
        if x.shape[1] != self.input_dim:
            raise ShapeError(f"lstm expects {self.input_dim} cols, got {x.shape[1]}")
        x = np.ascontiguousarray(x, dtype=np.float64)
        out, gates, cells = kernels.lstm_forward(
            x,
            self.wx.value,
            self.wr.value,
            self.b.value,
            self.wp.value if self.wp is not None else None,
        )
        self._cache = (x, out, gates, cells)
        return out

    def backward(self, dout):
        x, out, gates, cells = self._cache
        dx, dwx, dwr, db, dwp = kernels.lstm_backward(
            np.ascontiguousarray(dout, dtype=np.float64),
            x,
            self.wx.value,
            self.wr.value,
            self.b.value,
            self.wp.value if self.wp is not None else None,
            out,
            gates,
            cells,
        )
        self.wx.grad += dwx
        self.wr.grad += dwr
        self.b.grad += db
        if self.wp is not None:
            self.wp.grad += dwp
        return dx

    def params(self):
        ps = [self.wx, self.wr, self.b]
        if self.wp is not None:
            ps.append(self.wp)
        return ps


@dataclass
class LrSchedule:
    """Linear warmup to peak, constant plateau, then exponential decay."""

    peak_lr: float = 4e-3
    warmup_steps: int = 100
    constant_steps: int = 1500
    decay_rate: float = 0.9995

    def __call__(self, step):
        if step < 0:
            raise ValueError("schedule step must be >= 0")
        if step <= self.warmup_steps:
            if self.warmup_steps == 0:
                return self.peak_lr
            return self.peak_lr * step / self.warmup_steps
        plateau_end = self.warmup_steps + self.constant_steps
        if step <= plateau_end:
            return self.peak_lr
        return self.peak_lr * self.decay_rate ** (step - plateau_end)


class Adam:
    """Adam with bias correction; the step size comes from an LrSchedule
    when one is given, otherwise from the fixed lr."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 schedule=None):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.schedule = schedule
        self.step_count = 0
        self._m = [np.zeros_like(p.value) for p in self.params]
        self._v = [np.zeros_like(p.value) for p in self.params]

    def current_lr(self):
        if self.schedule is not None:
            return self.schedule(self.step_count)
        return self.lr

    def step(self):
        self.step_count += 1
        lr = self.current_lr()
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def global_norm(params):
    sq = 0.0
    for p in params:
        sq += float(np.sum(p.grad * p.grad))
    return float(np.sqrt(sq))


def clip_global_norm(params, max_norm=1.0):
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    norm = global_norm(params)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params:
            p.grad *= scale
    return norm
