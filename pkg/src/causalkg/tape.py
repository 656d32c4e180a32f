"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every value is float64. A Var wraps an array plus the closure that maps
the output gradient to parent gradients; ``backward`` walks the tape in
reverse topological order. Only the operations the embedding models need
are provided, each with a hand-written vector-Jacobian product.
"""

from __future__ import annotations

import numpy as np

ArrayLike = "np.ndarray | float | int | list"


class Var:
    """A node in the computation graph."""

    __slots__ = ("value", "grad", "parents", "vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.parents: tuple[Var, ...] = parents
        self.vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape}, leaf={not self.parents})"


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value + b.value, (a, b))
    out.vjp = lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))
    return out


def sub(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value - b.value, (a, b))
    out.vjp = lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))
    return out


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value * b.value, (a, b))
    out.vjp = lambda g: (
        _unbroadcast(g * b.value, a.shape),
        _unbroadcast(g * a.value, b.shape),
    )
    return out


def scale(a, c: float) -> Var:
    a = as_var(a)
    out = Var(a.value * c, (a,))
    out.vjp = lambda g: (g * c,)
    return out


def matmul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value @ b.value, (a, b))

    def vjp(g):
        ga = g @ np.swapaxes(b.value, -1, -2)
        gb = np.swapaxes(a.value, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    out.vjp = vjp
    return out


def transpose(a) -> Var:
    a = as_var(a)
    out = Var(a.value.T, (a,))
    out.vjp = lambda g: (g.T,)
    return out


def reshape(a, shape) -> Var:
    a = as_var(a)
    out = Var(a.value.reshape(shape), (a,))
    out.vjp = lambda g: (g.reshape(a.shape),)
    return out


def tanh(a) -> Var:
    a = as_var(a)
    y = np.tanh(a.value)
    out = Var(y, (a,))
    out.vjp = lambda g: (g * (1.0 - y * y),)
    return out


def sigmoid(a) -> Var:
    a = as_var(a)
    y = 1.0 / (1.0 + np.exp(-np.clip(a.value, -500, 500)))
    out = Var(y, (a,))
    out.vjp = lambda g: (g * y * (1.0 - y),)
    return out


def softplus(a) -> Var:
    a = as_var(a)
    out = Var(np.logaddexp(0.0, a.value), (a,))
    out.vjp = lambda g: (g / (1.0 + np.exp(-a.value)),)
    return out


def log(a) -> Var:
    a = as_var(a)
    out = Var(np.log(a.value), (a,))
    out.vjp = lambda g: (g / a.value,)
    return out


def sum_all(a) -> Var:
    a = as_var(a)
    out = Var(a.value.sum(), (a,))
    out.vjp = lambda g: (np.broadcast_to(g, a.shape).copy(),)
    return out


def mean_all(a) -> Var:
    a = as_var(a)
    out = Var(a.value.mean(), (a,))
    out.vjp = lambda g: (np.broadcast_to(g / a.value.size, a.shape).copy(),)
    return out


def sum_axis(a, axis: int) -> Var:
    a = as_var(a)
    out = Var(a.value.sum(axis=axis), (a,))

    def vjp(g):
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    out.vjp = vjp
    return out


def gather_rows(table, index) -> Var:
    """table[index] for an integer index array of any shape."""
    table = as_var(table)
    idx = np.asarray(index)
    out = Var(table.value[idx], (table,))

    def vjp(g):
        gt = np.zeros_like(table.value)
        np.add.at(gt, idx.reshape(-1), g.reshape(-1, *table.shape[1:]))
        return (gt,)

    out.vjp = vjp
    return out


def segment_sum(data, segments, num_segments: int) -> Var:
    data = as_var(data)
    seg = np.asarray(segments)
    value = np.zeros((num_segments,) + data.shape[1:])
    np.add.at(value, seg, data.value)
    out = Var(value, (data,))
    out.vjp = lambda g: (g[seg],)
    return out


def segment_mean(data, segments, num_segments: int) -> Var:
    """Per-segment mean; segments with no members yield zero rows."""
    data = as_var(data)
    seg = np.asarray(segments)
    counts = np.bincount(seg, minlength=num_segments).astype(np.float64)
    denom = np.maximum(counts, 1.0)
    total = np.zeros((num_segments,) + data.shape[1:])
    np.add.at(total, seg, data.value)
    value = total / denom.reshape((num_segments,) + (1,) * (data.value.ndim - 1))
    out = Var(value, (data,))

    def vjp(g):
        per_row = denom[seg].reshape((len(seg),) + (1,) * (data.value.ndim - 1))
        return (g[seg] / per_row,)

    out.vjp = vjp
    return out


def concat_cols(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(np.concatenate([a.value, b.value], axis=-1), (a, b))
    split = a.shape[-1]
    out.vjp = lambda g: (g[..., :split], g[..., split:])
    return out


def slice_cols(a, start: int, stop: int) -> Var:
    a = as_var(a)
    out = Var(a.value[..., start:stop], (a,))

    def vjp(g):
        ga = np.zeros(a.shape)
        ga[..., start:stop] = g
        return (ga,)

    out.vjp = vjp
    return out


def where(mask, a, b) -> Var:
    """Elementwise select by a constant boolean/0-1 mask.

    Rows where the mask is 0 pass ``b`` through bit-for-bit, which lets
    callers enforce exact no-op branches.
    """
    a, b = as_var(a), as_var(b)
    m = np.asarray(mask, dtype=bool)
    out = Var(np.where(m, a.value, b.value), (a, b))
    out.vjp = lambda g: (
        _unbroadcast(np.where(m, g, 0.0), a.shape),
        _unbroadcast(np.where(m, 0.0, g), b.shape),
    )
    return out


def concat_rows(parts: "list[Var]") -> Var:
    parts = [as_var(p) for p in parts]
    out = Var(np.concatenate([p.value for p in parts], axis=0), tuple(parts))
    sizes = [p.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(g[offsets[i] : offsets[i + 1]] for i in range(len(parts)))

    out.vjp = vjp
    return out


def softmax_rows(a) -> Var:
    """Softmax over the last axis."""
    a = as_var(a)
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Var(y, (a,))

    def vjp(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return ((g - dot) * y,)

    out.vjp = vjp
    return out


def bce_with_logits(scores, targets) -> Var:
    """Mean binary cross entropy on logits, computed in stable form.

    loss = mean(softplus(s) - y * s), gradient (sigmoid(s) - y) / size.
    """
    scores = as_var(scores)
    y = np.asarray(targets, dtype=np.float64)
    s = scores.value
    out = Var(np.mean(np.logaddexp(0.0, s) - y * s), (scores,))

    def vjp(g):
        sig = 1.0 / (1.0 + np.exp(-np.clip(s, -500, 500)))
        return (g * (sig - y) / s.size,)

    out.vjp = vjp
    return out


def backward(root: Var) -> None:
    """Accumulate gradients of a scalar root into every reachable Var."""
    if root.value.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.shape}")

    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        stack.extend((p, False) for p in node.parents)

    for node in order:
        node.grad = np.zeros(node.shape)
    root.grad = np.ones(root.shape)

    for node in reversed(order):
        if node.vjp is None:
            continue
        grads = node.vjp(node.grad)
        for parent, g in zip(node.parents, grads):
            parent.grad = parent.grad + g
