"""Dense tensors with reverse-mode automatic differentiation.

Every forward op records a closure that maps the output gradient to the
parent gradients; ``Tensor.backward`` replays those closures in reverse
topological order and accumulates into ``.grad``. Working precision is
float32; float64 is supported end to end for gradient checking.

Shapes are explicit everywhere: the only implicit broadcast is the
last-axis bias add in ``add_bias``. Mismatches raise ``DimensionError``
naming the offending axis.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, GradientError

__all__ = [
    "Tensor",
    "add",
    "sub",
    "neg",
    "mul",
    "scale",
    "add_n",
    "add_bias",
    "matmul",
    "matmul_t",
    "sigmoid",
    "tanh",
    "softmax",
    "log_softmax",
    "tsum",
    "concat",
    "narrow",
    "reshape",
    "transpose",
    "gather_rows",
    "colmul",
    "lattice_add",
    "zeros",
    "constant",
]


def _as_array(data, dtype=None):
    arr = np.asarray(data)
    if dtype is not None:
        return arr.astype(dtype, copy=False)
    if arr.dtype == np.float64 or arr.dtype == np.float32:
        return arr
    return arr.astype(np.float32)


class Tensor:
    """A dense real array plus an optional same-shape gradient accumulator."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = _as_array(data, dtype)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def detach(self):
        """A view of the same data with no graph history."""
        return Tensor(self.data)

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``.grad``.

        ``self`` must be scalar (size 1). Calling backward twice on the
        same graph accumulates, it does not overwrite.
        """
        if self.data.size != 1:
            raise GradientError(
                f"backward requires a scalar loss, got shape {self.data.shape}"
            )
        order = []
        seen = set()
        stack = [(self, False)]
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        seed = np.ones_like(self.data)
        self.grad = seed if self.grad is None else self.grad + seed
        for node in reversed(order):
            if node._backward_fn is None:
                continue
            grads = node._backward_fn(node.grad)
            for parent, g in zip(node._parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g

    # Arithmetic sugar used mostly by tests.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def sum(self):
        return tsum(self)


def _node(data, parents, backward_fn):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def constant(data, dtype=None):
    return Tensor(data, requires_grad=False, dtype=dtype)


def zeros(shape, dtype=np.float32):
    return Tensor(np.zeros(shape, dtype=dtype))


def _check_same_shape(opname, a, b):
    if a.data.shape != b.data.shape:
        for axis, (da, db) in enumerate(zip(a.data.shape, b.data.shape)):
            if da != db:
                raise DimensionError(
                    f"{opname}: axis {axis} differs ({da} vs {db})"
                )
        raise DimensionError(
            f"{opname}: ranks differ ({a.data.shape} vs {b.data.shape})"
        )


def add(a, b):
    _check_same_shape("add", a, b)
    return _node(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    _check_same_shape("sub", a, b)
    return _node(a.data - b.data, (a, b), lambda g: (g, -g))


def neg(a):
    return _node(-a.data, (a,), lambda g: (-g,))


def mul(a, b):
    _check_same_shape("mul", a, b)
    return _node(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a, c):
    c = float(c)
    return _node(a.data * c, (a,), lambda g: (g * c,))


def add_n(tensors):
    """Sum of same-shape tensors."""
    if not tensors:
        raise DimensionError("add_n: empty operand list")
    first = tensors[0]
    for t in tensors[1:]:
        _check_same_shape("add_n", first, t)
    total = tensors[0].data.copy()
    for t in tensors[1:]:
        total += t.data
    return _node(total, tuple(tensors), lambda g: tuple(g for _ in tensors))


def add_bias(x, b):
    """x[..., D] + b[D]; the one sanctioned broadcast."""
    if b.data.ndim != 1:
        raise DimensionError(f"add_bias: bias must be 1-D, got rank {b.data.ndim}")
    if x.data.shape[-1] != b.data.shape[0]:
        raise DimensionError(
            f"add_bias: last axis of x is {x.data.shape[-1]} but bias has "
            f"{b.data.shape[0]}"
        )
    lead = x.data.ndim - 1

    def bwd(g):
        gb = g.sum(axis=tuple(range(lead))) if lead else g
        return g, gb

    return _node(x.data + b.data, (x, b), bwd)


def matmul(a, b):
    """(N, K) @ (K, M) -> (N, M)."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError("matmul: operands must be 2-D")
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul: inner axes differ (a axis 1 = {a.data.shape[1]}, "
            f"b axis 0 = {b.data.shape[0]})"
        )
    return _node(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def matmul_t(a, w):
    """(N, K) @ (M, K)^T -> (N, M); the dense-layer product x @ W^T."""
    if a.data.ndim != 2 or w.data.ndim != 2:
        raise DimensionError("matmul_t: operands must be 2-D")
    if a.data.shape[1] != w.data.shape[1]:
        raise DimensionError(
            f"matmul_t: axis 1 differs (a has {a.data.shape[1]}, "
            f"w has {w.data.shape[1]})"
        )
    return _node(
        a.data @ w.data.T,
        (a, w),
        lambda g: (g @ w.data, g.T @ a.data),
    )


def sigmoid(x):
    out = 1.0 / (1.0 + np.exp(-x.data))
    return _node(out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x):
    out = np.tanh(x.data)
    return _node(out, (x,), lambda g: (g * (1.0 - out * out),))


def softmax(x):
    """Stable softmax over the last axis."""
    if x.data.ndim == 0 or x.data.shape[-1] == 0:
        raise DimensionError("softmax: last axis is empty")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return ((g - dot) * out,)

    return _node(out, (x,), bwd)


def log_softmax(x):
    if x.data.ndim == 0 or x.data.shape[-1] == 0:
        raise DimensionError("log_softmax: last axis is empty")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse

    def bwd(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return _node(out, (x,), bwd)


def tsum(x):
    """Sum of all elements; returns a scalar tensor."""

    def bwd(g):
        return (np.full_like(x.data, float(g)),)

    return _node(np.asarray(x.data.sum(), dtype=x.data.dtype), (x,), bwd)


def concat(tensors, axis=0):
    if not tensors:
        raise DimensionError("concat: empty operand list")
    sizes = [t.data.shape[axis] for t in tensors]
    ref = tensors[0].data.shape
    for t in tensors[1:]:
        for ax, (da, db) in enumerate(zip(ref, t.data.shape)):
            if ax != axis and da != db:
                raise DimensionError(f"concat: axis {ax} differs ({da} vs {db})")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        pieces = []
        for i in range(len(tensors)):
            index = [slice(None)] * g.ndim
            index[axis] = slice(offsets[i], offsets[i + 1])
            pieces.append(g[tuple(index)])
        return tuple(pieces)

    return _node(out, tuple(tensors), bwd)


def narrow(x, axis, start, length):
    """Contiguous slice [start, start+length) along one axis."""
    if not (0 <= start and start + length <= x.data.shape[axis]):
        raise DimensionError(
            f"narrow: [{start}, {start + length}) out of range on axis {axis} "
            f"(size {x.data.shape[axis]})"
        )
    index = [slice(None)] * x.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def bwd(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return _node(x.data[index], (x,), bwd)


def reshape(x, shape):
    shape = tuple(shape)
    if int(np.prod(shape)) != x.data.size:
        raise DimensionError(
            f"reshape: cannot view {x.data.shape} as {shape}"
        )
    return _node(
        x.data.reshape(shape), (x,), lambda g: (g.reshape(x.data.shape),)
    )


def transpose(x, axes):
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _node(
        np.ascontiguousarray(x.data.transpose(axes)),
        (x,),
        lambda g: (g.transpose(inverse),),
    )


def gather_rows(x, idx):
    """Rows x[idx] of a 2-D tensor; duplicate indices accumulate gradient."""
    if x.data.ndim != 2:
        raise DimensionError("gather_rows: x must be 2-D")
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise DimensionError("gather_rows: idx must be 1-D")
    if idx.size and (idx.min() < 0 or idx.max() >= x.data.shape[0]):
        raise IndexError(
            f"gather_rows: index out of range for {x.data.shape[0]} rows"
        )

    def bwd(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        return (full,)

    return _node(x.data[idx], (x,), bwd)


def colmul(x, w):
    """Scale each row of x[N, D] by w[N]."""
    if x.data.ndim != 2 or w.data.ndim != 1:
        raise DimensionError("colmul: expected x 2-D and w 1-D")
    if x.data.shape[0] != w.data.shape[0]:
        raise DimensionError(
            f"colmul: axis 0 differs ({x.data.shape[0]} vs {w.data.shape[0]})"
        )
    wcol = w.data[:, None]

    def bwd(g):
        return g * wcol, (g * x.data).sum(axis=1)

    return _node(x.data * wcol, (x, w), bwd)


def lattice_add(f, g):
    """Pairwise sum f[..., T, J] + g[..., U, J] -> [..., T, U, J].

    Accepts (T, J)+(U, J) or batched (B, T, J)+(B, U, J); used to fuse
    per-frame and per-token projections into a joint lattice.
    """
    if f.data.ndim != g.data.ndim or f.data.ndim not in (2, 3):
        raise DimensionError("lattice_add: operands must both be 2-D or 3-D")
    if f.data.shape[-1] != g.data.shape[-1]:
        raise DimensionError(
            f"lattice_add: last axis differs ({f.data.shape[-1]} vs "
            f"{g.data.shape[-1]})"
        )
    if f.data.ndim == 3 and f.data.shape[0] != g.data.shape[0]:
        raise DimensionError(
            f"lattice_add: batch axis differs ({f.data.shape[0]} vs "
            f"{g.data.shape[0]})"
        )
    if f.data.ndim == 2:
        out = f.data[:, None, :] + g.data[None, :, :]
        bwd = lambda gr: (gr.sum(axis=1), gr.sum(axis=0))
    else:
        out = f.data[:, :, None, :] + g.data[:, None, :, :]
        bwd = lambda gr: (gr.sum(axis=2), gr.sum(axis=1))
    return _node(out, (f, g), bwd)
