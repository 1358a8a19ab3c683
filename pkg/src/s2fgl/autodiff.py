"""Dense-matrix reverse-mode autodiff on an explicit tape.

Every value is a 2-D float64 array. Operations append a node to the tape of
their differentiable inputs; :meth:`Tape.backward` walks the tape in reverse
and accumulates gradients into the watched :class:`Parameter` objects.

Constants (features, frozen global embeddings, prototypes, eigenvectors) are
plain tensors without a tape, or tensors passed through :func:`stop_gradient`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

EPS = 1e-12


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class NonFiniteError(FloatingPointError):
    """Raised when an operation produces NaN or Inf."""


def _as_matrix(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {arr.shape}")
    return arr


def _check_finite(value: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f"{op} produced non-finite values")
    return value


@dataclass
class Parameter:
    """A trainable matrix with its accumulated gradient."""

    value: np.ndarray
    name: str = ""
    requires_grad: bool = True
    grad: np.ndarray = field(init=False)

    def __post_init__(self):
        self.value = _as_matrix(self.value).copy()
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)

    def copy(self) -> "Parameter":
        p = Parameter(self.value.copy(), self.name, self.requires_grad)
        p.grad = self.grad.copy()
        return p


class Tensor:
    """A value produced on (or outside of) a tape."""

    __slots__ = ("value", "tape", "index")

    def __init__(self, value, tape: "Tape | None" = None, index: int = -1):
        self.value = value if isinstance(value, np.ndarray) and value.ndim == 2 else _as_matrix(value)
        self.tape = tape
        self.index = index

    @property
    def requires_grad(self) -> bool:
        return self.tape is not None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def item(self) -> float:
        if self.value.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.value[0, 0])


@dataclass
class _Node:
    inputs: tuple[int, ...]
    vjp: Callable[[np.ndarray], tuple[np.ndarray | None, ...]]


class Tape:
    """Ordered record of differentiable operations.

    Nodes are appended as operations execute, so the list is already in
    topological order.
    """

    def __init__(self):
        self.nodes: list[_Node | None] = []
        self._watched: dict[int, Parameter] = {}

    def __len__(self):
        return len(self.nodes)

    def watch(self, param: Parameter) -> Tensor:
        """Leaf tensor whose gradient flows into ``param.grad``."""
        if not param.requires_grad:
            return Tensor(param.value)
        idx = len(self.nodes)
        self.nodes.append(None)
        self._watched[idx] = param
        return Tensor(param.value, self, idx)

    def record(self, value: np.ndarray, inputs: Sequence[Tensor], vjp) -> Tensor:
        idx = len(self.nodes)
        self.nodes.append(_Node(tuple(t.index if t.tape is self else -1 for t in inputs), vjp))
        return Tensor(value, self, idx)

    def backward(self, loss: Tensor) -> None:
        if loss.value.shape != (1, 1):
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss.tape is not self:
            raise ValueError("loss was not recorded on this tape")
        grads: list[np.ndarray | None] = [None] * len(self.nodes)
        grads[loss.index] = np.ones((1, 1))
        for idx in range(loss.index, -1, -1):
            g = grads[idx]
            if g is None:
                continue
            node = self.nodes[idx]
            if node is None:
                param = self._watched[idx]
                param.grad = param.grad + g
                continue
            for inp, gi in zip(node.inputs, node.vjp(g)):
                if inp < 0 or gi is None:
                    continue
                grads[inp] = gi if grads[inp] is None else grads[inp] + gi
            grads[idx] = None


def constant(x) -> Tensor:
    return x if isinstance(x, Tensor) and x.tape is None else Tensor(_as_matrix(x.value if isinstance(x, Tensor) else x))


def stop_gradient(x: Tensor) -> Tensor:
    """Same value, detached from any tape."""
    return Tensor(x.value if isinstance(x, Tensor) else _as_matrix(x))


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(_as_matrix(x))


def _tape_of(*tensors: Tensor) -> Tape | None:
    tape = None
    for t in tensors:
        if t.tape is not None:
            if tape is not None and t.tape is not tape:
                raise ValueError("operands live on different tapes")
            tape = t.tape
    return tape


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _emit(value, inputs, vjp, op):
    _check_finite(value, op)
    tape = _tape_of(*inputs)
    if tape is None:
        return Tensor(value)
    return tape.record(value, inputs, vjp)


# -- elementwise ----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        out = a.value + b.value
    except ValueError as exc:
        raise ShapeError(f"add: {a.shape} vs {b.shape}") from exc
    return _emit(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        out = a.value - b.value
    except ValueError as exc:
        raise ShapeError(f"sub: {a.shape} vs {b.shape}") from exc
    return _emit(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    """Elementwise product with row/column broadcasting."""
    a, b = _lift(a), _lift(b)
    try:
        out = a.value * b.value
    except ValueError as exc:
        raise ShapeError(f"mul: {a.shape} vs {b.shape}") from exc

    def vjp(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)

    return _emit(out, (a, b), vjp, "mul")


def scale(a, c: float) -> Tensor:
    a = _lift(a)
    return _emit(a.value * c, (a,), lambda g: (g * c,), "scale")


def relu(a) -> Tensor:
    a = _lift(a)
    mask = a.value > 0
    return _emit(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,), "relu")


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    out = a.value @ b.value
    return _emit(out, (a, b), lambda g: (g @ b.value.T, a.value.T @ g), "matmul")


# -- reductions and reshaping ---------------------------------------------


def total(a) -> Tensor:
    """Sum of all entries as a 1x1 tensor."""
    a = _lift(a)
    shape = a.shape
    return _emit(np.array([[a.value.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),), "total")


def mean(a) -> Tensor:
    a = _lift(a)
    n = a.value.size
    return scale(total(a), 1.0 / n)


def concat_cols(parts: Sequence) -> Tensor:
    parts = [_lift(p) for p in parts]
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: row counts differ {sorted(rows)}")
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])
    out = np.concatenate([p.value for p in parts], axis=1)

    def vjp(g):
        return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(parts)))

    return _emit(out, tuple(parts), vjp, "concat_cols")


def take_cols(a, start: int, stop: int) -> Tensor:
    a = _lift(a)
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape)
        full[:, start:stop] = g
        return (full,)

    return _emit(a.value[:, start:stop].copy(), (a,), vjp, "take_cols")


def take_rows(a, rows) -> Tensor:
    a = _lift(a)
    rows = np.asarray(rows, dtype=np.int64)
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape)
        np.add.at(full, rows, g)
        return (full,)

    return _emit(a.value[rows], (a,), vjp, "take_rows")


# -- probability ops ------------------------------------------------------


def softmax_rows(x) -> Tensor:
    x = _lift(x)
    z = x.value - x.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=1, keepdims=True)),)

    return _emit(s, (x,), vjp, "softmax_rows")


def log_softmax_rows(x) -> Tensor:
    x = _lift(x)
    z = x.value - x.value.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = z - lse
    s = np.exp(out)

    def vjp(g):
        return (g - s * g.sum(axis=1, keepdims=True),)

    return _emit(out, (x,), vjp, "log_softmax_rows")


def kl_rows(p, q) -> Tensor:
    """Mean over rows of KL(p_row || q_row); logs clamp at 1e-12.

    Gradient flows into ``p`` only; ``q`` is always treated as frozen.
    """
    p, q = _lift(p), _lift(q)
    if p.shape != q.shape:
        raise ShapeError(f"kl_rows: {p.shape} vs {q.shape}")
    n = p.shape[0]
    pc = np.maximum(p.value, EPS)
    log_q = np.log(np.maximum(q.value, EPS))
    log_p = np.log(pc)
    val = float((p.value * (log_p - log_q)).sum()) / n

    def vjp(g):
        d = log_p - log_q + np.where(p.value > EPS, 1.0, 0.0)
        return (g[0, 0] * d / n, None)

    return _emit(np.array([[val]]), (p, stop_gradient(q)), vjp, "kl_rows")


def mse(a, b) -> Tensor:
    """Mean squared elementwise difference."""
    a, b = _lift(a), _lift(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse: {a.shape} vs {b.shape}")
    diff = a.value - b.value
    n = diff.size
    val = np.array([[float((diff * diff).sum()) / n]])

    def vjp(g):
        d = (2.0 * g[0, 0] / n) * diff
        return d, -d

    return _emit(val, (a, b), vjp, "mse")


def cross_entropy(logits, labels, mask) -> Tensor:
    """Mean negative log-likelihood of the true class over ``mask`` nodes."""
    logits = _lift(logits)
    idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cross_entropy: empty mask")
    labels = np.asarray(labels, dtype=np.int64)
    if idx.max() >= logits.shape[0]:
        raise ShapeError("cross_entropy: mask index beyond logits rows")
    y = labels[idx]
    c = logits.shape[1]
    if np.any(y < 0) or np.any(y >= c):
        raise ValueError(f"cross_entropy: label out of range [0, {c})")
    z = logits.value[idx]
    z = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    nll = lse - z[np.arange(idx.size), y]
    val = np.array([[nll.mean()]])
    shape = logits.shape

    def vjp(g):
        s = np.exp(z - lse[:, None])
        s[np.arange(idx.size), y] -= 1.0
        full = np.zeros(shape)
        np.add.at(full, idx, s * (g[0, 0] / idx.size))
        return (full,)

    return _emit(val, (logits,), vjp, "cross_entropy")


def cosine_sim_rows(a, b) -> Tensor:
    """Row-wise cosine similarity of ``a`` against constant rows of ``b``.

    Zero-norm rows on either side give similarity 0.
    """
    a = _lift(a)
    bv = b.value if isinstance(b, Tensor) else _as_matrix(b)
    if a.shape[1] != bv.shape[1]:
        raise ShapeError(f"cosine_sim_rows: {a.shape} vs {bv.shape}")
    na = np.linalg.norm(a.value, axis=1, keepdims=True)
    nb = np.linalg.norm(bv, axis=1, keepdims=True)
    safe_a = np.where(na > 0, na, 1.0)
    ahat = np.where(na > 0, a.value / safe_a, 0.0)
    bhat = np.where(nb > 0, bv / np.where(nb > 0, nb, 1.0), 0.0)
    out = ahat @ bhat.T

    def vjp(g):
        dahat = g @ bhat
        proj = (dahat * ahat).sum(axis=1, keepdims=True)
        return (np.where(na > 0, (dahat - ahat * proj) / safe_a, 0.0),)

    return _emit(out, (a,), vjp, "cosine_sim_rows")


# -- optimizer ------------------------------------------------------------


def backward(loss: Tensor) -> None:
    if loss.tape is None:
        if loss.value.shape != (1, 1):
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        return
    loss.tape.backward(loss)


def zero_grad(params: Sequence[Parameter]) -> None:
    for p in params:
        p.zero_grad()


def sgd_step(params: Sequence[Parameter], lr: float, weight_decay: float = 0.0) -> None:
    """In-place ``p <- p - lr * (g + weight_decay * p)``."""
    if lr < 0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    for p in params:
        if not p.requires_grad:
            continue
        step = p.grad + weight_decay * p.value if weight_decay else p.grad
        p.value = p.value - lr * step
