"""Neural building blocks on top of the autodiff tensors.

Dense layers, LSTM cells and sequences, single-layer BiLSTM encoders and
scaled dot-product attention, plus seeded initializers. Each block also
has a plain-numpy twin (``*_np``) used on inference paths where no
gradients are needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DimensionError, EmptyCatalogError
from .tensor import Tensor


def init_weight(rng, d_out, d_in, dtype=np.float32):
    """uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))."""
    bound = 1.0 / np.sqrt(d_in)
    return Tensor(
        rng.uniform(-bound, bound, size=(d_out, d_in)).astype(dtype),
        requires_grad=True,
    )


def init_bias(d_out, dtype=np.float32):
    return Tensor(np.zeros(d_out, dtype=dtype), requires_grad=True)


def init_embedding(rng, n_rows, dim, dtype=np.float32):
    bound = 1.0 / np.sqrt(dim)
    return Tensor(
        rng.uniform(-bound, bound, size=(n_rows, dim)).astype(dtype),
        requires_grad=True,
    )


def dense_apply(x, w, b):
    """out[n] = W @ x[n] + b for x[N, D_in], W[D_out, D_in], b[D_out]."""
    return T.add_bias(T.matmul_t(x, w), b)


def linear_apply(x, w):
    """Dense layer without bias (attention projections)."""
    return T.matmul_t(x, w)


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

GATE_ORDER = ("i", "f", "o", "g")  # sigmoid block first, cell gate last


@dataclass
class LstmParams:
    """One LSTM cell: per-gate weights and biases for input and recurrent paths."""

    w_i: Tensor
    w_f: Tensor
    w_o: Tensor
    w_g: Tensor
    r_i: Tensor
    r_f: Tensor
    r_o: Tensor
    r_g: Tensor
    b_wi: Tensor
    b_wf: Tensor
    b_wo: Tensor
    b_wg: Tensor
    b_ri: Tensor
    b_rf: Tensor
    b_ro: Tensor
    b_rg: Tensor
    hidden_size: int

    def named(self, prefix):
        out = {}
        for gate in GATE_ORDER:
            out[f"{prefix}.w_{gate}"] = getattr(self, f"w_{gate}")
            out[f"{prefix}.r_{gate}"] = getattr(self, f"r_{gate}")
            out[f"{prefix}.b_w{gate}"] = getattr(self, f"b_w{gate}")
            out[f"{prefix}.b_r{gate}"] = getattr(self, f"b_r{gate}")
        return out


def init_lstm(rng, d_in, hidden, dtype=np.float32):
    kw = {}
    for gate in GATE_ORDER:
        kw[f"w_{gate}"] = init_weight(rng, hidden, d_in, dtype)
        kw[f"r_{gate}"] = init_weight(rng, hidden, hidden, dtype)
        kw[f"b_w{gate}"] = init_bias(hidden, dtype)
        kw[f"b_r{gate}"] = init_bias(hidden, dtype)
    return LstmParams(hidden_size=hidden, **kw)


def _stacked(params):
    """Gate-stacked weights: W[4H, D], R[4H, H], b[4H] in GATE_ORDER."""
    w = T.concat([params.w_i, params.w_f, params.w_o, params.w_g], axis=0)
    r = T.concat([params.r_i, params.r_f, params.r_o, params.r_g], axis=0)
    b = T.add(
        T.concat([params.b_wi, params.b_wf, params.b_wo, params.b_wg], axis=0),
        T.concat([params.b_ri, params.b_rf, params.b_ro, params.b_rg], axis=0),
    )
    return w, r, b


def _cell(pre, h_prev, c_prev, r, hidden):
    """Shared cell update given pre = W x + b (gate-stacked)."""
    acts = T.add(pre, T.matmul_t(h_prev, r))
    gates = T.sigmoid(T.narrow(acts, 1, 0, 3 * hidden))
    i = T.narrow(gates, 1, 0, hidden)
    f = T.narrow(gates, 1, hidden, hidden)
    o = T.narrow(gates, 1, 2 * hidden, hidden)
    g = T.tanh(T.narrow(acts, 1, 3 * hidden, hidden))
    c = T.add(T.mul(f, c_prev), T.mul(i, g))
    h = T.mul(o, T.tanh(c))
    return h, c


def lstm_step(x_t, state, params):
    """One LSTM update. x_t is (D,) or (N, D); state is (h, c) of matching rank."""
    squeeze = x_t.data.ndim == 1
    if squeeze:
        x_t = T.reshape(x_t, (1, x_t.shape[0]))
    if x_t.data.ndim != 2:
        raise DimensionError("lstm_step: input must be 1-D or 2-D")
    if x_t.shape[1] != params.w_i.shape[1]:
        raise DimensionError(
            f"lstm_step: input axis 1 is {x_t.shape[1]}, weights expect "
            f"{params.w_i.shape[1]}"
        )
    h_prev, c_prev = state
    if squeeze:
        h_prev = T.reshape(h_prev, (1, params.hidden_size))
        c_prev = T.reshape(c_prev, (1, params.hidden_size))
    if h_prev.shape[-1] != params.hidden_size:
        raise DimensionError(
            f"lstm_step: state axis -1 is {h_prev.shape[-1]}, expected "
            f"{params.hidden_size}"
        )
    w, r, b = _stacked(params)
    pre = T.add_bias(T.matmul_t(x_t, w), b)
    h, c = _cell(pre, h_prev, c_prev, r, params.hidden_size)
    if squeeze:
        h = T.reshape(h, (params.hidden_size,))
        c = T.reshape(c, (params.hidden_size,))
    return h, c


def lstm_sequence(xs, params, reverse=False):
    """Run an LSTM over xs[T, N, D]; returns list of T hidden tensors (N, H).

    The input projection for all steps is batched into one matmul; only
    the recurrence runs step by step. ``reverse=True`` consumes the
    sequence back to front and returns outputs in input order.
    """
    t_len, n, d = xs.shape
    hidden = params.hidden_size
    w, r, b = _stacked(params)
    flat = T.reshape(xs, (t_len * n, d))
    pre_all = T.add_bias(T.matmul_t(flat, w), b)
    h = T.zeros((n, hidden), dtype=xs.dtype)
    c = T.zeros((n, hidden), dtype=xs.dtype)
    steps = range(t_len - 1, -1, -1) if reverse else range(t_len)
    out = [None] * t_len
    for t in steps:
        pre = T.narrow(pre_all, 0, t * n, n)
        h, c = _cell(pre, h, c, r, hidden)
        out[t] = h
    return out


def bilstm_encode(seq, fwd, bwd):
    """Concat of forward and backward final hidden states for seq[L, D]."""
    if seq.data.ndim != 2 or seq.shape[0] < 1:
        raise DimensionError("bilstm_encode: sequence must be non-empty (L, D)")
    xs = T.reshape(seq, (seq.shape[0], 1, seq.shape[1]))
    h_f = lstm_sequence(xs, fwd)[-1]
    h_b = lstm_sequence(xs, bwd, reverse=True)[0]
    return T.reshape(T.concat([h_f, h_b], axis=1), (2 * fwd.hidden_size,))


def bilstm_outputs(xs, fwd, bwd):
    """Per-step [fwd_t ; bwd_t] outputs for stacked BiLSTM layers.

    xs is (L, N, D); result is (L, N, 2H) assembled step-wise.
    """
    hs_f = lstm_sequence(xs, fwd)
    hs_b = lstm_sequence(xs, bwd, reverse=True)
    rows = [T.concat([hf, hb], axis=1) for hf, hb in zip(hs_f, hs_b)]
    stacked = T.concat(rows, axis=0)
    return T.reshape(stacked, (xs.shape[0], xs.shape[1], 2 * fwd.hidden_size))


def bilstm_last_batch(xs, fwd, bwd):
    """Final-state concat for a batch of equal-length sequences xs[L, N, D]."""
    h_f = lstm_sequence(xs, fwd)[-1]
    h_b = lstm_sequence(xs, bwd, reverse=True)[0]
    return T.concat([h_f, h_b], axis=1)


# ---------------------------------------------------------------------------
# Attention
# ---------------------------------------------------------------------------


def attend_rows(q, keys, values):
    """Scaled dot-product attention for a stack of queries.

    q[T, D], keys[M, D], values[M, D_v] -> (ctx[T, D_v], weights[T, M]).
    """
    if keys.shape[0] < 1:
        raise EmptyCatalogError("attention requires at least one key")
    if q.shape[-1] != keys.shape[-1]:
        raise DimensionError(
            f"attention: query dim {q.shape[-1]} != key dim {keys.shape[-1]}"
        )
    if keys.shape[0] != values.shape[0]:
        raise DimensionError(
            f"attention: {keys.shape[0]} keys vs {values.shape[0]} values"
        )
    scores = T.scale(T.matmul_t(q, keys), 1.0 / np.sqrt(q.shape[-1]))
    weights = T.softmax(scores)
    ctx = T.matmul(weights, values)
    return ctx, weights


def scaled_dot_attention(q, keys, values):
    """Single-query attention: q[D] over keys[M, D] -> (ctx[D_v], weights[M])."""
    q2 = T.reshape(q, (1, q.shape[0]))
    ctx, weights = attend_rows(q2, keys, values)
    return (
        T.reshape(ctx, (values.shape[1],)),
        T.reshape(weights, (keys.shape[0],)),
    )


# ---------------------------------------------------------------------------
# Plain-numpy twins for inference paths
# ---------------------------------------------------------------------------


class LstmNp:
    """Gate-stacked snapshot of LstmParams for fast forward-only stepping."""

    __slots__ = ("w", "r", "b", "hidden")

    def __init__(self, params):
        self.w = np.concatenate(
            [params.w_i.data, params.w_f.data, params.w_o.data, params.w_g.data]
        )
        self.r = np.concatenate(
            [params.r_i.data, params.r_f.data, params.r_o.data, params.r_g.data]
        )
        self.b = np.concatenate(
            [params.b_wi.data, params.b_wf.data, params.b_wo.data, params.b_wg.data]
        ) + np.concatenate(
            [params.b_ri.data, params.b_rf.data, params.b_ro.data, params.b_rg.data]
        )
        self.hidden = params.hidden_size

    def step(self, x, h, c):
        acts = x @ self.w.T + h @ self.r.T + self.b
        hid = self.hidden
        gates = 1.0 / (1.0 + np.exp(-acts[..., : 3 * hid]))
        i = gates[..., :hid]
        f = gates[..., hid : 2 * hid]
        o = gates[..., 2 * hid : 3 * hid]
        g = np.tanh(acts[..., 3 * hid :])
        c_new = f * c + i * g
        h_new = o * np.tanh(c_new)
        return h_new, c_new

    def run(self, xs, reverse=False):
        """xs (T, D) -> outputs (T, H)."""
        t_len = xs.shape[0]
        h = np.zeros(self.hidden, dtype=xs.dtype)
        c = np.zeros(self.hidden, dtype=xs.dtype)
        out = np.empty((t_len, self.hidden), dtype=xs.dtype)
        steps = range(t_len - 1, -1, -1) if reverse else range(t_len)
        pre = xs @ self.w.T + self.b
        for t in steps:
            acts = pre[t] + h @ self.r.T
            hid = self.hidden
            gates = 1.0 / (1.0 + np.exp(-acts[: 3 * hid]))
            c = gates[hid : 2 * hid] * c + gates[:hid] * np.tanh(acts[3 * hid :])
            h = gates[2 * hid : 3 * hid] * np.tanh(c)
            out[t] = h
        return out


def softmax_np(x, axis=-1):
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax_np(x, axis=-1):
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
