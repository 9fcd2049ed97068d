"""Reverse-mode automatic differentiation over float64 numpy arrays.

All model math runs through the `Tensor` type defined here. Gradients are
recorded on an explicit `Tape`: forward functions append backward closures
while a tape is active, and `Tape.backward(loss)` replays them in reverse.
Forward order is a valid topological order by construction, so no graph
traversal is needed and backward accumulation order is deterministic.

Inference code simply runs without an active tape and pays no recording
cost. Everything is float64; there is no batching (vectors in, vectors
out), which keeps variable-length sequence models trivial.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import NumericError, ShapeError


class Tensor:
    """Dense float64 array plus an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """Copy of the value with no gradient history (stop-gradient)."""
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """Trainable tensor with eagerly allocated grad and Adam state."""

    __slots__ = ("adam_m", "adam_v", "step_count", "name")

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.grad = np.zeros_like(self.data)
        self.adam_m = np.zeros_like(self.data)
        self.adam_v = np.zeros_like(self.data)
        self.step_count = 0
        self.name = name

    def zero_grad(self):
        self.grad.fill(0.0)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


class Tape:
    """Records backward closures during forward evaluation."""

    current: "Tape | None" = None

    def __init__(self):
        self._ops = []
        self._prev = None

    def __enter__(self):
        self._prev = Tape.current
        Tape.current = self
        return self

    def __exit__(self, *exc):
        Tape.current = self._prev
        return False

    def record(self, fn):
        self._ops.append(fn)

    def backward(self, loss: Tensor):
        """Backpropagate from a scalar loss through every recorded op."""
        if loss.data.shape != ():
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        if not math.isfinite(loss.data):
            raise NumericError("backward called on a non-finite loss")
        if loss.grad is None:
            loss.grad = np.ones((), dtype=np.float64)
        else:
            loss.grad += 1.0
        for fn in reversed(self._ops):
            fn()


def accumulate(t: Tensor, g):
    """Add a gradient contribution to a tensor, allocating on first use."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def _recording(requires: bool) -> bool:
    return requires and Tape.current is not None


# ---------------------------------------------------------------------------
# elementwise and reduction ops


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add: shapes {a.data.shape} vs {b.data.shape}")
    req = a.requires_grad or b.requires_grad
    out = Tensor(a.data + b.data, requires_grad=req)
    if _recording(req):
        def bwd():
            if out.grad is None:
                return
            accumulate(a, out.grad)
            accumulate(b, out.grad)
        Tape.current.record(bwd)
    return out


def add_n(parts: list[Tensor]) -> Tensor:
    """Sum of same-shaped tensors (used for loss aggregation)."""
    if not parts:
        raise ShapeError("add_n: empty input list")
    req = any(p.requires_grad for p in parts)
    total = parts[0].data.copy()
    for p in parts[1:]:
        total += p.data
    out = Tensor(total, requires_grad=req)
    if _recording(req):
        def bwd():
            if out.grad is None:
                return
            for p in parts:
                accumulate(p, out.grad)
        Tape.current.record(bwd)
    return out


def scale(a: Tensor, s: float) -> Tensor:
    req = a.requires_grad
    out = Tensor(a.data * s, requires_grad=req)
    if _recording(req):
        def bwd():
            if out.grad is None:
                return
            accumulate(a, out.grad * s)
        Tape.current.record(bwd)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul: shapes {a.data.shape} vs {b.data.shape}")
    req = a.requires_grad or b.requires_grad
    out = Tensor(a.data * b.data, requires_grad=req)
    if _recording(req):
        def bwd():
            if out.grad is None:
                return
            accumulate(a, out.grad * b.data)
            accumulate(b, out.grad * a.data)
        Tape.current.record(bwd)
    return out


def tanh(a: Tensor) -> Tensor:
    req = a.requires_grad
    y = np.tanh(a.data)
    out = Tensor(y, requires_grad=req)
    if _recording(req):
        def bwd():
            if out.grad is None:
                return
            accumulate(a, out.grad * (1.0 - y * y))
        Tape.current.record(bwd)
    return out


def sigmoid(a: Tensor) -> Tensor:
    req = a.requires_grad
    y = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(y, requires_grad=req)
    if _recording(req):
        def bwd():
            if out.grad is None:
                return
            accumulate(a, out.grad * y * (1.0 - y))
        Tape.current.record(bwd)
    return out


def mean_of(parts: list[Tensor]) -> Tensor:
    return scale(add_n(parts), 1.0 / len(parts))


# ---------------------------------------------------------------------------
# linear algebra


def affine(w: Tensor, x: Tensor, b: Tensor | None = None) -> Tensor:
    """y = w @ x (+ b) for w of shape (out, in) and x of shape (in,)."""
    if w.data.ndim != 2 or x.data.ndim != 1:
        raise ShapeError(f"affine: need matrix and vector, got {w.data.shape} and {x.data.shape}")
    if w.data.shape[1] != x.data.shape[0]:
        raise ShapeError(
            f"affine: weight input dim {w.data.shape[1]} does not match x dim {x.data.shape[0]}")
    y = w.data @ x.data
    if b is not None:
        if b.data.shape != y.shape:
            raise ShapeError(f"affine: bias shape {b.data.shape} vs output {y.shape}")
        y = y + b.data
    req = w.requires_grad or x.requires_grad or (b is not None and b.requires_grad)
    out = Tensor(y, requires_grad=req)
    if _recording(req):
        def bwd():
            g = out.grad
            if g is None:
                return
            accumulate(w, np.outer(g, x.data))
            accumulate(x, w.data.T @ g)
            if b is not None:
                accumulate(b, g)
        Tape.current.record(bwd)
    return out


def concat(parts: list[Tensor]) -> Tensor:
    """Concatenate 1-D tensors."""
    for p in parts:
        if p.data.ndim != 1:
            raise ShapeError(f"concat: all parts must be 1-D, got shape {p.data.shape}")
    req = any(p.requires_grad for p in parts)
    out = Tensor(np.concatenate([p.data for p in parts]), requires_grad=req)
    if _recording(req):
        sizes = [p.data.shape[0] for p in parts]

        def bwd():
            g = out.grad
            if g is None:
                return
            off = 0
            for p, n in zip(parts, sizes):
                accumulate(p, g[off:off + n])
                off += n
        Tape.current.record(bwd)
    return out


def stack_rows(parts: list[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal length into a (T, E) matrix."""
    if not parts:
        raise ShapeError("stack_rows: empty input list")
    req = any(p.requires_grad for p in parts)
    out = Tensor(np.stack([p.data for p in parts]), requires_grad=req)
    if _recording(req):
        def bwd():
            g = out.grad
            if g is None:
                return
            for t, p in enumerate(parts):
                accumulate(p, g[t])
        Tape.current.record(bwd)
    return out


# ---------------------------------------------------------------------------
# embeddings


def embedding(table: Tensor, index: int) -> Tensor:
    if not 0 <= index < table.data.shape[0]:
        raise ShapeError(f"embedding: index {index} out of range for table of {table.data.shape[0]} rows")
    req = table.requires_grad
    out = Tensor(table.data[index].copy(), requires_grad=req)
    if _recording(req):
        def bwd():
            if out.grad is None:
                return
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            table.grad[index] += out.grad
        Tape.current.record(bwd)
    return out


def embedding_sum(table: Tensor, indices) -> Tensor:
    """Sum of table rows; the order-independent bag embedding."""
    idx = list(indices)
    if not idx:
        raise ShapeError("embedding_sum: empty index list")
    for i in idx:
        if not 0 <= i < table.data.shape[0]:
            raise ShapeError(f"embedding_sum: index {i} out of range for table of {table.data.shape[0]} rows")
    req = table.requires_grad
    out = Tensor(table.data[idx].sum(axis=0), requires_grad=req)
    if _recording(req):
        def bwd():
            if out.grad is None:
                return
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, idx, out.grad)
        Tape.current.record(bwd)
    return out


# ---------------------------------------------------------------------------
# regularization


def dropout(x: Tensor, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or p == 0."""
    if not 0.0 <= p < 1.0:
        raise ShapeError(f"dropout: probability {p} outside [0, 1)")
    if not training or p == 0.0:
        return x
    mask = (rng.random(x.data.shape) >= p) / (1.0 - p)
    req = x.requires_grad
    out = Tensor(x.data * mask, requires_grad=req)
    if _recording(req):
        def bwd():
            if out.grad is None:
                return
            accumulate(x, out.grad * mask)
        Tape.current.record(bwd)
    return out


# ---------------------------------------------------------------------------
# losses and attention scoring


def softmax_xent(logits: Tensor, gold_index: int) -> tuple[Tensor, Tensor]:
    """Stable softmax cross-entropy.

    Returns (loss, probabilities). The probability tensor is a constant:
    gradients flow only through the loss.
    """
    if logits.data.ndim != 1:
        raise ShapeError(f"softmax_xent: logits must be 1-D, got shape {logits.data.shape}")
    n = logits.data.shape[0]
    if not 0 <= gold_index < n:
        raise ShapeError(f"softmax_xent: gold index {gold_index} out of range for {n} logits")
    z = logits.data
    m = z.max()
    e = np.exp(z - m)
    s = e.sum()
    probs = e / s
    loss_val = math.log(s) + m - z[gold_index]
    req = logits.requires_grad
    out = Tensor(loss_val, requires_grad=req)
    if _recording(req):
        def bwd():
            g = out.grad
            if g is None:
                return
            dz = probs * float(g)
            dz[gold_index] -= float(g)
            accumulate(logits, dz)
        Tape.current.record(bwd)
    return out, Tensor(probs)


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    """Plain stable softmax on a raw array (no gradient)."""
    m = logits.max()
    e = np.exp(logits - m)
    return e / e.sum()


def luong_score(state: Tensor, encoder_outputs: Tensor, weight: Tensor) -> Tensor:
    """Bilinear (general) attention weights over stacked encoder outputs.

    state: (H,), encoder_outputs: (T, E), weight: (H, E). Returns the
    softmax-normalized weight vector of length T.
    """
    if encoder_outputs.data.ndim != 2 or encoder_outputs.data.shape[0] == 0:
        raise ShapeError(
            f"luong_score: encoder outputs must be a nonempty (T, E) matrix, got {encoder_outputs.data.shape}")
    if state.data.ndim != 1:
        raise ShapeError(f"luong_score: state must be 1-D, got shape {state.data.shape}")
    h, e = weight.data.shape
    if state.data.shape[0] != h:
        raise ShapeError(f"luong_score: state dim {state.data.shape[0]} does not match weight rows {h}")
    if encoder_outputs.data.shape[1] != e:
        raise ShapeError(
            f"luong_score: encoder dim {encoder_outputs.data.shape[1]} does not match weight cols {e}")
    q = state.data @ weight.data
    scores = encoder_outputs.data @ q
    weights = softmax_probs(scores)
    req = state.requires_grad or encoder_outputs.requires_grad or weight.requires_grad
    out = Tensor(weights, requires_grad=req)
    if _recording(req):
        def bwd():
            da = out.grad
            if da is None:
                return
            ds = weights * (da - float(weights @ da))
            dq = encoder_outputs.data.T @ ds
            accumulate(encoder_outputs, np.outer(ds, q))
            accumulate(state, weight.data @ dq)
            accumulate(weight, np.outer(state.data, dq))
        Tape.current.record(bwd)
    return out


def attend(weights: Tensor, encoder_outputs: Tensor) -> Tensor:
    """Context vector: weights (T,) against encoder outputs (T, E)."""
    if weights.data.shape[0] != encoder_outputs.data.shape[0]:
        raise ShapeError(
            f"attend: {weights.data.shape[0]} weights vs {encoder_outputs.data.shape[0]} encoder positions")
    req = weights.requires_grad or encoder_outputs.requires_grad
    out = Tensor(weights.data @ encoder_outputs.data, requires_grad=req)
    if _recording(req):
        def bwd():
            g = out.grad
            if g is None:
                return
            accumulate(weights, encoder_outputs.data @ g)
            accumulate(encoder_outputs, np.outer(weights.data, g))
        Tape.current.record(bwd)
    return out
