"""Dense float64 tensors with reverse-mode automatic differentiation.

The engine is a tape-free variant of the usual autograd design: every
tensor produced by an operation keeps references to its parents and a
closure that scatters the incoming gradient back to them.  Tensors are
numbered at creation, so walking the reachable set in descending creation
order is a valid reverse topological order (an operation's inputs always
exist before its output).  Gradients accumulate additively until
``zero_grad`` is called, which supports mini-batching.

Only the operations the forecasting models need are implemented; there is
no general broadcasting, no GPU path and no higher-order differentiation.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "GradientError",
    "ShapeError",
    "tensor",
    "add",
    "sub",
    "mul",
    "neg",
    "scale",
    "shift",
    "matmul",
    "affine",
    "conv1d_causal",
    "weight_norm_apply",
    "activation",
    "relu",
    "sigmoid",
    "tanh",
    "embedding_lookup",
    "concat",
    "select_index",
    "transpose",
    "reshape",
    "absolute",
    "mean",
    "total",
    "backward",
    "zero_grad",
    "init_uniform_fan_in",
    "init_uniform",
]

_ids = itertools.count()


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class GradientError(RuntimeError):
    """Backward pass invoked on an invalid target (e.g. non-scalar loss)."""


class Tensor:
    """A dense n-dimensional float64 value, optionally tracked for gradients.

    Attributes
    ----------
    data : np.ndarray
        The value, always float64.
    grad : np.ndarray or None
        Accumulated gradient, same shape as ``data``.  Allocated lazily
        during the backward pass.
    requires_grad : bool
        Whether this tensor participates in differentiation.
    """

    __slots__ = ("data", "grad", "requires_grad", "_id", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = _backward
        self._id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar used throughout the model code.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def tensor(data, requires_grad=False) -> Tensor:
    """Wrap ``data`` (array-like or Tensor) as a Tensor."""
    if isinstance(data, Tensor):
        return data
    return Tensor(data, requires_grad=requires_grad)


def _out(data, parents, backward_fn) -> Tensor:
    """Build an op output; gradient tracking is inherited from the parents."""
    tracked = any(p.requires_grad for p in parents)
    if not tracked:
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward_fn)


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)
    _same_shape(a, b, "add")

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _out(a.data + b.data, (a, b), backward_fn)


def sub(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)
    _same_shape(a, b, "sub")

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(-g)

    return _out(a.data - b.data, (a, b), backward_fn)


def mul(a, b) -> Tensor:
    """Elementwise (Hadamard) product of same-shaped tensors."""
    a, b = tensor(a), tensor(b)
    _same_shape(a, b, "mul")

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)

    return _out(a.data * b.data, (a, b), backward_fn)


def neg(a) -> Tensor:
    a = tensor(a)

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(-g)

    return _out(-a.data, (a,), backward_fn)


def scale(a, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    a = tensor(a)
    c = float(c)

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g * c)

    return _out(a.data * c, (a,), backward_fn)


def shift(a, c) -> Tensor:
    """Add a constant (scalar or ndarray of same shape); no gradient to it."""
    a = tensor(a)
    c = np.asarray(c, dtype=np.float64)
    if c.ndim and c.shape != a.shape:
        raise ShapeError(f"shift: constant shape {c.shape} vs {a.shape}")

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g)

    return _out(a.data + c, (a,), backward_fn)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Tensor:
    """Matrix product for 1-D/2-D operands (numpy ``@`` semantics)."""
    a, b = tensor(a), tensor(b)
    if a.ndim > 2 or b.ndim > 2:
        raise ShapeError("matmul supports 1-D and 2-D operands only")
    try:
        out_data = a.data @ b.data
    except ValueError as exc:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}") from exc

    def backward_fn(g):
        g = np.asarray(g)
        ad, bd = a.data, b.data
        if a.requires_grad:
            if ad.ndim == 1 and bd.ndim == 1:
                a._accumulate(g * bd)
            elif ad.ndim == 2 and bd.ndim == 1:
                a._accumulate(np.outer(g, bd))
            elif ad.ndim == 1 and bd.ndim == 2:
                a._accumulate(g @ bd.T)
            else:
                a._accumulate(g @ bd.T)
        if b.requires_grad:
            if ad.ndim == 1 and bd.ndim == 1:
                b._accumulate(g * ad)
            elif ad.ndim == 2 and bd.ndim == 1:
                b._accumulate(ad.T @ g)
            elif ad.ndim == 1 and bd.ndim == 2:
                b._accumulate(np.outer(ad, g))
            else:
                b._accumulate(ad.T @ g)

    return _out(out_data, (a, b), backward_fn)


def affine(x, W, b) -> Tensor:
    """Dense layer ``x @ W.T + b``.

    ``x`` may be a single feature vector ``[F]`` or a batch ``[N, F]``;
    ``W`` is ``[O, F]`` and ``b`` is ``[O]``.
    """
    x, W, b = tensor(x), tensor(W), tensor(b)
    if W.ndim != 2 or b.ndim != 1 or W.shape[0] != b.shape[0]:
        raise ShapeError(f"affine: W {W.shape}, b {b.shape}")
    if x.shape[-1] != W.shape[1]:
        raise ShapeError(f"affine: x {x.shape} vs W {W.shape}")
    out_data = x.data @ W.data.T + b.data

    def backward_fn(g):
        g = np.asarray(g)
        if x.requires_grad:
            x._accumulate(g @ W.data)
        if W.requires_grad:
            if x.ndim == 1:
                W._accumulate(np.outer(g, x.data))
            else:
                W._accumulate(g.T @ x.data)
        if b.requires_grad:
            if x.ndim == 1:
                b._accumulate(g)
            else:
                b._accumulate(g.sum(axis=0))

    return _out(out_data, (x, W, b), backward_fn)


def conv1d_causal(x, kernel, dilation: int = 1) -> Tensor:
    """Causal dilated 1-D convolution preserving sequence length.

    ``x`` is ``[C_in, L]`` or batched ``[N, C_in, L]``; ``kernel`` is
    ``[C_out, C_in, k]``.  The input is left-padded with ``(k - 1) *
    dilation`` zeros, so ``out[..., t]`` depends only on ``x[..., :t + 1]``
    and the output length equals ``L``.
    """
    x, kernel = tensor(x), tensor(kernel)
    if kernel.ndim != 3:
        raise ShapeError(f"conv1d_causal: kernel must be [C_out, C_in, k], got {kernel.shape}")
    if dilation < 1:
        raise ValueError(f"conv1d_causal: dilation must be >= 1, got {dilation}")
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 3:
        raise ShapeError(f"conv1d_causal: input must be [C_in, L] or [N, C_in, L], got {x.shape}")
    c_out, c_in, k = kernel.shape
    if xd.shape[1] != c_in:
        raise ShapeError(
            f"conv1d_causal: input has {xd.shape[1]} channels, kernel expects {c_in}"
        )
    n, _, length = xd.shape
    pad = (k - 1) * dilation
    xp = np.pad(xd, ((0, 0), (0, 0), (pad, 0)))
    # cols[n, c, l, t] = x_padded[n, c, t - dilation*l] once re-aligned.
    cols = np.stack(
        [xp[:, :, pad - dilation * l : pad - dilation * l + length] for l in range(k)],
        axis=2,
    )
    out_data = np.einsum("ocl,nclt->not", kernel.data, cols)
    if squeeze:
        out_data = out_data[0]

    def backward_fn(g):
        g3 = np.asarray(g)[None] if squeeze else np.asarray(g)
        if kernel.requires_grad:
            kernel._accumulate(np.einsum("not,nclt->ocl", g3, cols))
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for l in range(k):
                start = pad - dilation * l
                gxp[:, :, start : start + length] += np.einsum(
                    "not,oc->nct", g3, kernel.data[:, :, l]
                )
            gx = gxp[:, :, pad:]
            x._accumulate(gx[0] if squeeze else gx)

    return _out(out_data, (x, kernel), backward_fn)


def weight_norm_apply(V, g) -> Tensor:
    """Reparameterize a weight tensor as ``(g / ||V||) * V`` per output unit.

    For ``V`` of rank >= 2 the norm is taken over all axes except axis 0,
    one scale ``g[i]`` per output unit; a 1-D ``V`` is treated as a single
    unit with scalar ``g``.  The resulting per-unit norms equal ``|g|``.
    """
    V, g = tensor(V), tensor(g)
    if V.ndim == 0:
        raise ShapeError("weight_norm_apply: V must have at least one axis")
    if V.ndim == 1:
        vd = V.data[None]
        gd = g.data.reshape(1)
    else:
        vd = V.data.reshape(V.shape[0], -1)
        gd = g.data.reshape(-1)
        if gd.shape[0] != V.shape[0]:
            raise ShapeError(f"weight_norm_apply: g {g.shape} vs V {V.shape}")
    norms = np.sqrt((vd * vd).sum(axis=1))
    if np.any(norms == 0.0):
        raise GradientError("weight_norm_apply: zero-norm weight row (uninitialized parameters?)")
    coef = gd / norms
    out_data = (vd * coef[:, None]).reshape(V.shape)

    def backward_fn(grad):
        gm = np.asarray(grad).reshape(vd.shape)
        dot = (gm * vd).sum(axis=1)  # <dL/dW_i, V_i>
        if g.requires_grad:
            g._accumulate((dot / norms).reshape(g.shape))
        if V.requires_grad:
            dv = gm * coef[:, None] - vd * (gd * dot / norms**3)[:, None]
            V._accumulate(dv.reshape(V.shape))

    return _out(out_data, (V, g), backward_fn)


# ---------------------------------------------------------------------------
# activations


def relu(x) -> Tensor:
    x = tensor(x)
    out_data = np.maximum(x.data, 0.0)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g * (x.data > 0.0))

    return _out(out_data, (x,), backward_fn)


def sigmoid(x) -> Tensor:
    x = tensor(x)
    # Split by sign for numerical stability at large |x|.
    out_data = np.where(
        x.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(x.data))),
        np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))),
    )

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g * out_data * (1.0 - out_data))

    return _out(out_data, (x,), backward_fn)


def tanh(x) -> Tensor:
    x = tensor(x)
    out_data = np.tanh(x.data)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g * (1.0 - out_data * out_data))

    return _out(out_data, (x,), backward_fn)


def activation(x, kind: str) -> Tensor:
    """Apply an elementwise activation by name: relu, sigmoid, tanh, identity."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    return fn(x)


def _identity(x) -> Tensor:
    x = tensor(x)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g)

    return _out(x.data.copy(), (x,), backward_fn)


_ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh, "identity": _identity}


def absolute(x) -> Tensor:
    """|x| elementwise, with subgradient 0 at exactly 0."""
    x = tensor(x)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g * np.sign(x.data))

    return _out(np.abs(x.data), (x,), backward_fn)


# ---------------------------------------------------------------------------
# structure ops


def embedding_lookup(table, indices) -> Tensor:
    """Gather rows of ``table [V, E]`` by integer ``indices`` (any shape).

    Output shape is ``indices.shape + (E,)``.  Gradients accumulate only
    into the gathered rows.
    """
    table = tensor(table)
    idx = np.asarray(indices)
    if table.ndim != 2:
        raise ShapeError(f"embedding_lookup: table must be 2-D, got {table.shape}")
    if not np.issubdtype(idx.dtype, np.integer):
        raise TypeError("embedding_lookup: indices must be integers")
    vocab = table.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= vocab):
        bad = int(idx.min()) if idx.min() < 0 else int(idx.max())
        raise IndexError(f"embedding_lookup: code {bad} outside table of size {vocab}")
    out_data = table.data[idx]

    def backward_fn(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, idx.ravel(), np.asarray(g).reshape(-1, table.shape[1]))

    return _out(out_data, (table,), backward_fn)


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    """Concatenate tensors along ``axis``; all other dimensions must agree."""
    parts = [tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat: empty part list")
    ref = parts[0].shape
    for p in parts[1:]:
        if p.ndim != len(ref):
            raise ShapeError("concat: rank mismatch")
        for ax, (da, db) in enumerate(zip(ref, p.shape)):
            if ax != (axis % len(ref)) and da != db:
                raise ShapeError(f"concat: shapes {ref} and {p.shape} differ off-axis")
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(g):
        g = np.asarray(g)
        for p, start, stop in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(start, stop)
                p._accumulate(g[tuple(sl)])

    return _out(out_data, tuple(parts), backward_fn)


def select_index(x, index: int, axis: int = -1) -> Tensor:
    """Take a single slice at ``index`` along ``axis`` (axis is removed)."""
    x = tensor(x)
    axis = axis % x.ndim
    out_data = np.take(x.data, index, axis=axis)

    def backward_fn(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            sl = [slice(None)] * x.ndim
            sl[axis] = index
            full[tuple(sl)] = g
            x._accumulate(full)

    return _out(out_data, (x,), backward_fn)


def transpose(x, axes: Sequence[int]) -> Tensor:
    x = tensor(x)
    axes = tuple(axes)
    inverse = np.argsort(axes)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(np.transpose(np.asarray(g), inverse))

    return _out(np.transpose(x.data, axes), (x,), backward_fn)


def reshape(x, shape) -> Tensor:
    x = tensor(x)
    orig = x.shape

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(np.asarray(g).reshape(orig))

    return _out(x.data.reshape(shape), (x,), backward_fn)


# ---------------------------------------------------------------------------
# reductions


def total(x) -> Tensor:
    """Sum of all elements (scalar output)."""
    x = tensor(x)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(np.full_like(x.data, float(g)))

    return _out(x.data.sum(), (x,), backward_fn)


def mean(x) -> Tensor:
    """Mean of all elements (scalar output)."""
    x = tensor(x)
    n = x.data.size

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(np.full_like(x.data, float(g) / n))

    return _out(x.data.mean(), (x,), backward_fn)


# ---------------------------------------------------------------------------
# backward driver


def _reachable(root: Tensor) -> list[Tensor]:
    seen = set()
    stack = [root]
    nodes = []
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        nodes.append(node)
        stack.extend(node._parents)
    return nodes


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(tensor) into ``grad`` for every tensor that
    requires gradients and is reachable from ``loss``.

    The loss must be scalar.  Nodes are visited exactly once, in reverse
    creation order, which is a valid reverse topological order of the DAG.
    Interior (op-produced) gradients are scratch state for the pass and are
    cleared at the end; leaf gradients persist, so calling twice without
    ``zero_grad`` accumulates additively.
    """
    if loss.data.size != 1:
        raise GradientError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    nodes = sorted(_reachable(loss), key=lambda t: t._id, reverse=True)
    loss._accumulate(np.ones_like(loss.data))
    for node in nodes:
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    for node in nodes:
        if node._backward is not None:
            node.grad = None


def zero_grad(params: Iterable[Tensor]) -> None:
    """Reset accumulated gradients on the given tensors."""
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# initialization

def init_uniform_fan_in(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    """Uniform init in [-sqrt(1/fan_in), +sqrt(1/fan_in)], gradient-tracked."""
    bound = float(np.sqrt(1.0 / fan_in))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def init_uniform(rng: np.random.Generator, shape, bound: float) -> Tensor:
    """Uniform init in [-bound, +bound], gradient-tracked."""
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)
