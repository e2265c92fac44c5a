"""Reverse-mode automatic differentiation over dense float64 tensors.

A ``Tape`` records every primitive application as a node (op kind, input
ids, output id, saved activations).  ``backward`` walks the recorded nodes
in reverse, accumulating adjoints and depositing gradients into trainable
leaf tensors.  Replaying a tape forward reproduces all recorded outputs
bitwise, which the test suite relies on.

Tapes are confined to one thread at a time; independent tapes may run in
parallel threads (the active-tape stack is thread-local).
"""

from __future__ import annotations

import math
import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, NumericError, ShapeError

# Kinds accepted by forward_primitive.  The tape also records a few
# specialized node kinds (cosine, lookup, select_row, stack, log) that
# have their own entry points.
PRIMITIVE_KINDS = (
    "matmul",
    "add",
    "elementwise_multiply",
    "subtract",
    "absolute",
    "sigmoid",
    "tanh",
    "concat",
    "mean_over_axis",
    "max_over_axis",
    "softmax",
    "scale",
)

NORM_GUARD = 1e-12  # zero-norm guard for cosine


class Tensor:
    """Dense n-dimensional array with an optional gradient slot.

    ``values`` is a float64 ndarray (row-major).  ``grad`` stays ``None``
    until a backward pass deposits into it; trainable tensors accumulate
    additively across backward calls until ``zero_grad``.
    """

    __slots__ = ("values", "grad", "trainable", "name", "id", "_tape", "degenerate")

    def __init__(self, values, trainable: bool = False, name: str | None = None):
        arr = np.asarray(values, dtype=np.float64)
        self.values = arr
        self.grad: np.ndarray | None = None
        self.trainable = trainable
        self.name = name
        self.id: int | None = None
        self._tape: "Tape | None" = None
        self.degenerate = False  # set by cosine when both norms vanish

    @classmethod
    def _wrap(cls, arr) -> "Tensor":
        """Internal fast constructor for kernel outputs (already float64)."""
        t = cls.__new__(cls)
        t.values = arr if isinstance(arr, np.ndarray) else np.asarray(arr)
        t.grad = None
        t.trainable = False
        t.name = None
        t.id = None
        t._tape = None
        t.degenerate = False
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, delta: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += delta

    def __repr__(self) -> str:
        label = self.name or f"tensor#{self.id}"
        return f"Tensor({label}, shape={self.shape}, trainable={self.trainable})"


class TapeNode:
    """One recorded primitive application."""

    __slots__ = ("kind", "inputs", "input_ids", "output", "output_id", "attrs", "saved")

    def __init__(self, kind, inputs, output, attrs=None, saved=None):
        self.kind = kind
        self.inputs = tuple(inputs)
        self.input_ids = tuple(t.id for t in inputs)
        self.output = output
        self.output_id = output.id
        self.attrs = attrs or {}
        self.saved = saved or {}


_LOCAL = threading.local()


def _tape_stack() -> list:
    stack = getattr(_LOCAL, "stack", None)
    if stack is None:
        stack = []
        _LOCAL.stack = stack
    return stack


def active_tape() -> "Tape":
    try:
        return _LOCAL.stack[-1]
    except (AttributeError, IndexError):
        raise ContractError("no active tape; wrap the computation in 'with Tape():'") from None


class Tape:
    """Ordered, replayable record of primitive applications."""

    def __init__(self):
        self.nodes: list[TapeNode] = []
        self._next_id = 0

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _tape_stack().pop()
        assert popped is self

    def register(self, tensor: Tensor) -> Tensor:
        """Assign the tensor an id on this tape (no-op if already on it)."""
        if tensor._tape is not self:
            tensor._tape = self
            tensor.id = self._next_id
            self._next_id += 1
        return tensor

    def record(self, node: TapeNode) -> None:
        self.nodes.append(node)

    def replay(self) -> None:
        """Re-execute every node forward, overwriting recorded outputs.

        With unchanged leaf values this reproduces all outputs bitwise.
        """
        for node in self.nodes:
            values = [t.values for t in node.inputs]
            out, saved = _FORWARD[node.kind](values, node.attrs)
            node.output.values = out
            node.saved = saved


class InferenceTape(Tape):
    """A tape that drops its nodes: forward values only, no backward.

    Used for prediction and evaluation, where recording every node would
    only cost memory and time.
    """

    def record(self, node: TapeNode) -> None:
        pass


# ---------------------------------------------------------------------------
# forward kernels: fn(values, attrs) -> (output ndarray, saved dict)
# backward kernels: fn(node, out_grad) -> tuple of input adjoints (None = skip)
# ---------------------------------------------------------------------------


def _require_same_shape(op: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(op, a.shape, b.shape)


def _fwd_matmul(values, attrs):
    a, b = values
    if a.ndim == 0 or b.ndim == 0 or a.ndim > 2 or b.ndim > 2:
        raise ShapeError("matmul", a.shape, b.shape, detail="operands must be 1-D or 2-D")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    return np.matmul(a, b), {}


def _bwd_matmul(node, g):
    a, b = (t.values for t in node.inputs)
    if a.ndim == 1 and b.ndim == 1:  # dot -> scalar
        return g * b, g * a
    if a.ndim == 2 and b.ndim == 1:  # (m,n)@(n,) -> (m,)
        return np.outer(g, b), a.T @ g
    if a.ndim == 1 and b.ndim == 2:  # (n,)@(n,p) -> (p,)
        return b @ g, np.outer(a, g)
    return g @ b.T, a.T @ g


def _fwd_add(values, attrs):
    a, b = values
    _require_same_shape("add", a, b)
    return a + b, {}


def _bwd_add(node, g):
    return g, g


def _fwd_subtract(values, attrs):
    a, b = values
    _require_same_shape("subtract", a, b)
    return a - b, {}


def _bwd_subtract(node, g):
    return g, -g


def _fwd_multiply(values, attrs):
    a, b = values
    _require_same_shape("elementwise_multiply", a, b)
    return a * b, {}


def _bwd_multiply(node, g):
    a, b = (t.values for t in node.inputs)
    return g * b, g * a


def _fwd_absolute(values, attrs):
    (a,) = values
    return np.abs(a), {}


def _bwd_absolute(node, g):
    return (g * np.sign(node.inputs[0].values),)


def _fwd_sigmoid(values, attrs):
    (a,) = values
    # clamp keeps exp within float64 range; saturation is unaffected
    return 1.0 / (1.0 + np.exp(-np.clip(a, -709.0, 709.0))), {}


def _bwd_sigmoid(node, g):
    s = node.output.values
    return (g * s * (1.0 - s),)


def _fwd_tanh(values, attrs):
    (a,) = values
    return np.tanh(a), {}


def _bwd_tanh(node, g):
    t = node.output.values
    return (g * (1.0 - t * t),)


def _fwd_concat(values, attrs):
    parts = [np.atleast_1d(v) for v in values]
    for v in parts:
        if v.ndim != 1:
            raise ShapeError("concat", v.shape, detail="inputs must be scalars or vectors")
    return np.concatenate(parts), {"sizes": [v.size for v in parts]}


def _bwd_concat(node, g):
    grads = []
    offset = 0
    for t in node.inputs:
        size = max(t.values.size, 1)
        piece = g[offset : offset + size]
        grads.append(piece.reshape(t.values.shape))
        offset += size
    return tuple(grads)


def _fwd_stack(values, attrs):
    first = values[0]
    if first.ndim != 1:
        raise ShapeError("stack", first.shape, detail="inputs must be vectors")
    for v in values[1:]:
        _require_same_shape("stack", first, v)
    return np.stack(values), {}


def _bwd_stack(node, g):
    return tuple(g[i] for i in range(len(node.inputs)))


def _fwd_select_row(values, attrs):
    (a,) = values
    row = attrs["row"]
    if a.ndim != 2 or not (0 <= row < a.shape[0]):
        raise ShapeError("select_row", a.shape, detail=f"row {row}")
    return a[row].copy(), {}


def _bwd_select_row(node, g):
    out = np.zeros_like(node.inputs[0].values)
    out[node.attrs["row"]] = g
    return (out,)


def _fwd_lookup(values, attrs):
    (m,) = values
    idx = attrs["indices"]
    if m.ndim != 2:
        raise ShapeError("lookup", m.shape, detail="matrix must be 2-D")
    return m[idx].copy(), {}


def _bwd_lookup(node, g):
    out = np.zeros_like(node.inputs[0].values)
    np.add.at(out, node.attrs["indices"], g)
    return (out,)


def _check_axis(op: str, a: np.ndarray, axis: int) -> None:
    if a.ndim == 0 or axis not in range(a.ndim):
        raise ShapeError(op, a.shape, detail=f"axis {axis}")


def _fwd_mean(values, attrs):
    (a,) = values
    axis = attrs["axis"]
    _check_axis("mean_over_axis", a, axis)
    return a.mean(axis=axis), {}


def _bwd_mean(node, g):
    a = node.inputs[0].values
    axis = node.attrs["axis"]
    n = a.shape[axis]
    return (np.broadcast_to(np.expand_dims(g, axis), a.shape) / n,)


def _fwd_max(values, attrs):
    (a,) = values
    axis = attrs["axis"]
    _check_axis("max_over_axis", a, axis)
    return a.max(axis=axis), {"argmax": a.argmax(axis=axis)}


def _bwd_max(node, g):
    a = node.inputs[0].values
    axis = node.attrs["axis"]
    out = np.zeros_like(a)
    idx = node.saved["argmax"]
    if a.ndim == 1:
        out[idx] = g
    elif axis == 0:
        out[idx, np.arange(a.shape[1])] = g
    else:
        out[np.arange(a.shape[0]), idx] = g
    return (out,)


def _fwd_softmax(values, attrs):
    (a,) = values
    if a.ndim != 1:
        raise ShapeError("softmax", a.shape, detail="input must be a vector")
    shifted = a - a.max()
    e = np.exp(shifted)
    return e / e.sum(), {}


def _bwd_softmax(node, g):
    s = node.output.values
    return (s * (g - np.dot(g, s)),)


def _fwd_scale(values, attrs):
    (a,) = values
    return a * attrs["factor"], {}


def _bwd_scale(node, g):
    return (g * node.attrs["factor"],)


def _fwd_log(values, attrs):
    (a,) = values
    if np.any(a <= 0):
        raise NumericError("log: input has non-positive entries")
    return np.log(a), {}


def _bwd_log(node, g):
    return (g / node.inputs[0].values,)


def _fwd_cosine(values, attrs):
    u, v = values
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
        raise ShapeError("cosine", u.shape, v.shape)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    du = max(nu, NORM_GUARD)
    dv = max(nv, NORM_GUARD)
    if nu < NORM_GUARD and nv < NORM_GUARD:
        return np.float64(0.0), {"degenerate": True, "nu": nu, "nv": nv}
    return np.float64(np.dot(u, v) / (du * dv)), {"degenerate": False, "nu": nu, "nv": nv}


def _bwd_cosine(node, g):
    if node.saved["degenerate"]:
        u, v = (t.values for t in node.inputs)
        return np.zeros_like(u), np.zeros_like(v)
    u, v = (t.values for t in node.inputs)
    nu, nv = node.saved["nu"], node.saved["nv"]
    du = max(nu, NORM_GUARD)
    dv = max(nv, NORM_GUARD)
    c = float(node.output.values)
    # norm factors pinned at the guard contribute no gradient through the norm
    gu = v / (du * dv) - (c * u / (du * du) if nu >= NORM_GUARD else 0.0)
    gv = u / (du * dv) - (c * v / (dv * dv) if nv >= NORM_GUARD else 0.0)
    return g * gu, g * gv


_FORWARD: dict[str, Callable] = {
    "matmul": _fwd_matmul,
    "add": _fwd_add,
    "subtract": _fwd_subtract,
    "elementwise_multiply": _fwd_multiply,
    "absolute": _fwd_absolute,
    "sigmoid": _fwd_sigmoid,
    "tanh": _fwd_tanh,
    "concat": _fwd_concat,
    "stack": _fwd_stack,
    "select_row": _fwd_select_row,
    "lookup": _fwd_lookup,
    "mean_over_axis": _fwd_mean,
    "max_over_axis": _fwd_max,
    "softmax": _fwd_softmax,
    "scale": _fwd_scale,
    "log": _fwd_log,
    "cosine": _fwd_cosine,
}

_BACKWARD: dict[str, Callable] = {
    "matmul": _bwd_matmul,
    "add": _bwd_add,
    "subtract": _bwd_subtract,
    "elementwise_multiply": _bwd_multiply,
    "absolute": _bwd_absolute,
    "sigmoid": _bwd_sigmoid,
    "tanh": _bwd_tanh,
    "concat": _bwd_concat,
    "stack": _bwd_stack,
    "select_row": _bwd_select_row,
    "lookup": _bwd_lookup,
    "mean_over_axis": _bwd_mean,
    "max_over_axis": _bwd_max,
    "softmax": _bwd_softmax,
    "scale": _bwd_scale,
    "log": _bwd_log,
    "cosine": _bwd_cosine,
}


_NO_ATTRS: dict = {}


def _apply(kind: str, inputs: Sequence[Tensor], attrs: dict | None = None) -> Tensor:
    tape = active_tape()
    if attrs is None:
        attrs = _NO_ATTRS
    tensors = []
    for x in inputs:
        t = x if isinstance(x, Tensor) else Tensor(x)
        tensors.append(tape.register(t))
    out_values, saved = _FORWARD[kind]([t.values for t in tensors], attrs)
    out = Tensor._wrap(out_values)
    if kind == "cosine" and saved.get("degenerate"):
        out.degenerate = True
    tape.register(out)
    tape.record(TapeNode(kind, tensors, out, attrs=attrs, saved=saved))
    return out


def forward_primitive(kind: str, inputs: Sequence[Tensor], **attrs) -> Tensor:
    """Apply a primitive by name and record it on the active tape."""
    if kind not in _FORWARD:
        raise ContractError(f"unknown primitive kind {kind!r}")
    return _apply(kind, inputs, attrs)


# Named wrappers used throughout the package.


def matmul(a, b) -> Tensor:
    return _apply("matmul", (a, b))


def add(a, b) -> Tensor:
    return _apply("add", (a, b))


def subtract(a, b) -> Tensor:
    return _apply("subtract", (a, b))


def elementwise_multiply(a, b) -> Tensor:
    return _apply("elementwise_multiply", (a, b))


def absolute(a) -> Tensor:
    return _apply("absolute", (a,))


def sigmoid(a) -> Tensor:
    return _apply("sigmoid", (a,))


def tanh(a) -> Tensor:
    return _apply("tanh", (a,))


def concat(parts: Iterable[Tensor]) -> Tensor:
    return _apply("concat", tuple(parts))


def stack(rows: Iterable[Tensor]) -> Tensor:
    return _apply("stack", tuple(rows))


def select_row(a, row: int) -> Tensor:
    return _apply("select_row", (a,), {"row": int(row)})


def lookup_rows(matrix, indices: Sequence[int]) -> Tensor:
    return _apply("lookup", (matrix,), {"indices": np.asarray(indices, dtype=np.intp)})


def mean_over_axis(a, axis: int = 0) -> Tensor:
    return _apply("mean_over_axis", (a,), {"axis": int(axis)})


def max_over_axis(a, axis: int = 0) -> Tensor:
    return _apply("max_over_axis", (a,), {"axis": int(axis)})


def softmax(a) -> Tensor:
    return _apply("softmax", (a,))


def scale(a, factor: float) -> Tensor:
    return _apply("scale", (a,), {"factor": float(factor)})


def log(a) -> Tensor:
    return _apply("log", (a,))


def cosine(u, v) -> Tensor:
    """Cosine similarity of two vectors, guarded against zero norms.

    Both norms below the guard yield 0 with ``degenerate=True`` on the
    output instead of NaN, so all-OOV sentences cannot poison training.
    """
    return _apply("cosine", (u, v))


def backward(tape: Tape, loss: Tensor) -> dict[int, np.ndarray]:
    """Reverse accumulation from a scalar loss recorded on the tape.

    Deposits gradients (additively) into every reachable trainable
    tensor; non-trainable leaves receive none.  Returns the full adjoint
    map keyed by tensor id, mainly for diagnostics.
    """
    if loss.values.ndim != 0:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.shape}")
    if loss._tape is not tape:
        raise ContractError("loss was not produced on the given tape")
    # adjoints are keyed by the ids recorded at trace time, so tensors that
    # were meanwhile re-registered on another tape still resolve correctly
    adjoints: dict[int, np.ndarray] = {loss.id: np.ones_like(loss.values)}
    for node in reversed(tape.nodes):
        g = adjoints.get(node.output_id)
        if g is None:
            continue
        input_grads = _BACKWARD[node.kind](node, g)
        for tid, grad in zip(node.input_ids, input_grads):
            if grad is None:
                continue
            if tid in adjoints:
                # plain + (never in place): adjoint arrays may be shared
                # with kernel outputs and must not be mutated
                adjoints[tid] = adjoints[tid] + grad
            else:
                adjoints[tid] = np.asarray(grad, dtype=np.float64)
    produced = {node.output_id for node in tape.nodes}
    deposited: set[int] = set()
    for node in tape.nodes:
        for tensor, tid in zip(node.inputs, node.input_ids):
            if (
                tensor.trainable
                and tid not in produced  # leaves only
                and tid not in deposited
                and tid in adjoints
            ):
                tensor.accumulate_grad(adjoints[tid])
                deposited.add(tid)
    return adjoints


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.zero_grad()


def grad_check(fn: Callable[[], Tensor], params: Sequence[Tensor], step: float = 1e-5) -> float:
    """Compare reverse-mode gradients of ``fn`` against central differences.

    ``fn`` must build its computation on a fresh tape each call and return
    a scalar Tensor.  Returns the maximum relative error over every
    coordinate of every parameter, with denominator
    max(|analytic|, |numeric|, 1e-8).
    """
    if step <= 0:
        raise ContractError("step must be positive")
    zero_grads(params)
    with Tape() as tape:
        loss = fn()
    if not np.isfinite(loss.values):
        raise NumericError("grad_check: function value is not finite")
    backward(tape, loss)
    analytic = []
    for p in params:
        if not p.trainable:
            raise ContractError(f"grad_check parameter {p!r} must be trainable")
        analytic.append(np.zeros_like(p.values) if p.grad is None else p.grad.copy())

    def evaluate() -> float:
        with Tape():
            out = fn()
        value = float(out.values)
        if not math.isfinite(value):
            raise NumericError("grad_check: function value is not finite")
        return value

    worst = 0.0
    for p, a in zip(params, analytic):
        for idx in np.ndindex(*p.values.shape):
            original = p.values[idx]
            p.values[idx] = original + step
            f_plus = evaluate()
            p.values[idx] = original - step
            f_minus = evaluate()
            p.values[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * step)
            denom = max(abs(a[idx]), abs(numeric), 1e-8)
            worst = max(worst, abs(a[idx] - numeric) / denom)
    zero_grads(params)
    return worst
