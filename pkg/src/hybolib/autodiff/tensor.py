"""Dense tensors with reverse-mode differentiation.

Every differentiable result carries a ``Node`` pointing at its inputs and a
closure mapping the output gradient to input gradients. Nodes get a sequence
number at creation, so sorting by it is a valid topological order and
``backward`` visits each reachable node exactly once, newest first.

Elementwise binary operations accept equal shapes or a scalar operand only.
Anything else has to go through :func:`expand` explicitly, so every gradient
reduction is visible in one place.
"""

from __future__ import annotations

import contextlib
import itertools
import threading

import numpy as np

__all__ = [
    "Tensor", "DomainError", "ShapeError", "tensor", "as_tensor", "no_grad",
    "is_grad_enabled", "get_default_dtype", "set_default_dtype", "precision",
    "backward", "grad",
    "matmul", "add", "sub", "mul", "div", "neg", "sum", "mean", "concat",
    "index", "norm2", "sqrt", "square", "exp", "log", "cosh", "sinh", "arcosh",
    "sigmoid", "log_sigmoid", "softmax", "log_softmax", "dropout", "clamp_min",
    "relu", "expand", "reshape", "transpose", "where",
]

ARCOSH_FLOOR = 1.0 + 1e-12

_state = threading.local()
_seq = itertools.count()
_DEFAULT_DTYPE = [np.dtype(np.float64)]


class ShapeError(ValueError):
    pass


class DomainError(ValueError):
    pass


def get_default_dtype():
    return _DEFAULT_DTYPE[0]


def set_default_dtype(dtype):
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE[0] = dtype


@contextlib.contextmanager
def precision(name):
    """Temporarily switch the default scalar width: ``"f32"`` or ``"f64"``."""
    old = get_default_dtype()
    set_default_dtype({"f32": np.float32, "f64": np.float64}[name])
    try:
        yield
    finally:
        set_default_dtype(old)


def is_grad_enabled():
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    old = is_grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = old


class Node:
    __slots__ = ("seq", "op", "inputs", "backward_fn", "saved")

    def __init__(self, op, inputs, backward_fn, saved=None):
        self.seq = next(_seq)
        self.op = op
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.saved = saved


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "node", "__weakref__")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        native = isinstance(data, (np.ndarray, np.generic))
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif not native or arr.dtype not in (np.float32, np.float64):
            # python scalars and lists take the default width; float arrays keep theirs
            arr = arr.astype(get_default_dtype())
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        return self.node is None

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def __len__(self):
        return len(self.data)

    def backward(self):
        backward(self)

    def zero_grad(self):
        self.grad = None

    __add__ = lambda a, b: add(a, b)
    __radd__ = lambda a, b: add(b, a)
    __sub__ = lambda a, b: sub(a, b)
    __rsub__ = lambda a, b: sub(b, a)
    __mul__ = lambda a, b: mul(a, b)
    __rmul__ = lambda a, b: mul(b, a)
    __truediv__ = lambda a, b: div(a, b)
    __rtruediv__ = lambda a, b: div(b, a)
    __matmul__ = lambda a, b: matmul(a, b)
    __rmatmul__ = lambda a, b: matmul(b, a)
    __neg__ = lambda a: neg(a)
    __getitem__ = lambda a, idx: index(a, idx)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


def tensor(data, requires_grad=False, dtype=None):
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    if like is not None and np.isscalar(x):
        return Tensor(np.asarray(x, dtype=like.dtype))
    return Tensor(x)


def _make(op, data, inputs, backward_fn, saved=None):
    out = Tensor(data, dtype=data.dtype if isinstance(data, np.ndarray) else None)
    if is_grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = Node(op, inputs, backward_fn, saved)
    return out


# ---------------------------------------------------------------------------
# backward


def _collect(root):
    seen = {}
    stack = [root]
    while stack:
        t = stack.pop()
        if t.node is None or id(t) in seen:
            continue
        seen[id(t)] = t
        stack.extend(i for i in t.node.inputs if i.requires_grad)
    return sorted(seen.values(), key=lambda t: t.node.seq, reverse=True)


def _propagate(root):
    if root.size != 1:
        raise ShapeError(f"backward: root must have exactly one element, got shape {root.shape}")
    grads = {id(root): np.ones_like(root.data)}
    leaves = {}
    if root.node is None:
        leaves[id(root)] = root
    for t in _collect(root):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        in_grads = t.node.backward_fn(g)
        for inp, ig in zip(t.node.inputs, in_grads):
            if ig is None or not inp.requires_grad:
                continue
            if ig.shape != inp.shape:
                raise ShapeError(
                    f"{t.node.op} backward: gradient shape {ig.shape} != input shape {inp.shape}")
            key = id(inp)
            grads[key] = grads[key] + ig if key in grads else ig
            if inp.node is None:
                leaves[key] = inp
    return {k: grads[k] for k in leaves if k in grads}, leaves


def backward(root):
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every reachable leaf."""
    grads, leaves = _propagate(root)
    for key, leaf in leaves.items():
        g = grads[key].astype(leaf.dtype, copy=False)
        leaf.grad = g if leaf.grad is None else leaf.grad + g


def grad(root, leaves):
    """Gradients of a scalar ``root`` w.r.t. ``leaves``, as numpy arrays.

    Leaves that do not participate in the graph get zero-filled arrays.
    Nothing is written to ``.grad``.
    """
    grads, _ = _propagate(root)
    return [grads.get(id(leaf), np.zeros_like(leaf.data)).astype(leaf.dtype, copy=False)
            for leaf in leaves]


# ---------------------------------------------------------------------------
# elementwise binary


def _binary_operands(op, a, b):
    if not isinstance(a, Tensor):
        a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    if not isinstance(b, Tensor):
        b = as_tensor(b, like=a)
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")
    return a, b


def _reduce_to(g, t):
    """Sum a gradient back down to ``t``'s shape when ``t`` was a broadcast scalar."""
    if g.shape == t.shape:
        return g
    return np.asarray(g.sum()).reshape(t.shape)


def add(a, b):
    a, b = _binary_operands("add", a, b)
    return _make("add", a.data + b.data, (a, b),
                 lambda g: (_reduce_to(g, a), _reduce_to(g, b)))


def sub(a, b):
    a, b = _binary_operands("sub", a, b)
    return _make("sub", a.data - b.data, (a, b),
                 lambda g: (_reduce_to(g, a), _reduce_to(-g, b)))


def mul(a, b):
    a, b = _binary_operands("mul", a, b)
    return _make("mul", a.data * b.data, (a, b),
                 lambda g: (_reduce_to(g * b.data, a), _reduce_to(g * a.data, b)))


def div(a, b):
    a, b = _binary_operands("div", a, b)
    out = a.data / b.data

    def bw(g):
        ga = _reduce_to(g / b.data, a) if a.requires_grad else None
        gb = _reduce_to(-g * out / b.data, b) if b.requires_grad else None
        return ga, gb

    return _make("div", out, (a, b), bw)


def where(mask, a, b):
    """Select ``a`` where ``mask`` else ``b`` (either operand may be a scalar)."""
    mask = np.asarray(mask, dtype=bool)
    a, b = _binary_operands("where", a, b)
    shape = a.shape if a.size >= b.size else b.shape
    if mask.shape != shape:
        raise ShapeError(f"where: mask shape {mask.shape} vs operands {a.shape}, {b.shape}")
    return _make("where", np.where(mask, a.data, b.data), (a, b),
                 lambda g: (_reduce_to(np.where(mask, g, 0.0), a),
                            _reduce_to(np.where(mask, 0.0, g), b)))


# ---------------------------------------------------------------------------
# linear algebra and shape


def matmul(a, b):
    """``a @ b`` for ``a`` of rank >= 2 and ``b`` either 2-D or with the same batch dims."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must be at least 2-D, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2] or (b.ndim > 2 and a.shape[:-2] != b.shape[:-2]):
        raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")
    out = a.data @ b.data

    def bw(g):
        ga = g @ np.swapaxes(b.data, -1, -2) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            if b.ndim == 2 and a.ndim > 2:
                a2 = a.data.reshape(-1, a.shape[-1])
                gb = a2.T @ g.reshape(-1, g.shape[-1])
            else:
                gb = np.swapaxes(a.data, -1, -2) @ g
        return ga, gb

    return _make("matmul", out, (a, b), bw)


def transpose(a):
    """Swap the last two axes."""
    a = as_tensor(a)
    return _make("transpose", np.swapaxes(a.data, -1, -2), (a,),
                 lambda g: (np.swapaxes(g, -1, -2),))


def reshape(a, shape):
    a = as_tensor(a)
    return _make("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def expand(a, shape):
    """Broadcast ``a`` to ``shape`` (numpy rules); backward sums over the copies."""
    a = as_tensor(a)
    shape = tuple(shape)
    try:
        out = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeError(f"expand: cannot broadcast {a.shape} to {shape}") from None

    def bw(g):
        lead = g.ndim - a.ndim
        g = g.sum(axis=tuple(range(lead))) if lead else g
        axes = tuple(i for i, n in enumerate(a.shape) if n == 1 and g.shape[i] != 1)
        if axes:
            g = g.sum(axis=axes, keepdims=True)
        return (g,)

    return _make("expand", np.ascontiguousarray(out), (a,), bw)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    if axis != -1 and axis != tensors[0].ndim - 1:
        raise ShapeError("concat: only the last axis is supported")
    lead = tensors[0].shape[:-1]
    for t in tensors[1:]:
        if t.shape[:-1] != lead:
            raise ShapeError(f"concat: leading shapes differ {tensors[0].shape} vs {t.shape}")
    out = np.concatenate([t.data for t in tensors], axis=-1)
    bounds = np.cumsum([0] + [t.shape[-1] for t in tensors])

    def bw(g):
        return tuple(g[..., bounds[i]:bounds[i + 1]] for i in range(len(tensors)))

    return _make("concat", out, tuple(tensors), bw)


def index(a, idx):
    """Basic or integer-array indexing; backward scatter-adds (handles repeats)."""
    a = as_tensor(a)
    if isinstance(idx, Tensor):
        idx = idx.data.astype(np.int64)
    out = a.data[idx]
    parts = idx if isinstance(idx, tuple) else (idx,)
    basic = all(p is None or p is Ellipsis or isinstance(p, (int, np.integer, slice)) for p in parts)

    def bw(g):
        full = np.zeros_like(a.data)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return _make("index", np.array(out, copy=True), (a,), bw)


# ---------------------------------------------------------------------------
# reductions


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def sum(a, axis=None, keepdims=False):  # noqa: A001
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make("sum", np.asarray(out), (a,), bw)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    out = a.data.mean(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, a.shape).copy(),)

    return _make("mean", np.asarray(out), (a,), bw)


def norm2(a, axis=-1, keepdims=False):
    """Euclidean norm along ``axis``; the gradient at a zero vector is taken as zero."""
    a = as_tensor(a)
    n = np.sqrt(np.sum(a.data * a.data, axis=axis, keepdims=True))

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        safe = np.where(n > 0, n, 1.0)
        return (np.where(n > 0, g * a.data / safe, 0.0),)

    out = n if keepdims else np.squeeze(n, axis=axis)
    return _make("norm2", out, (a,), bw)


# ---------------------------------------------------------------------------
# elementwise unary


def neg(a):
    a = as_tensor(a)
    return _make("neg", -a.data, (a,), lambda g: (-g,))


def square(a):
    a = as_tensor(a)
    return _make("square", a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def sqrt(a):
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise DomainError(f"sqrt: negative input (min {a.data.min():.3e})")
    out = np.sqrt(a.data)
    return _make("sqrt", out, (a,), lambda g: (g * 0.5 / out,))


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make("exp", out, (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise DomainError("log: negative input")
    return _make("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def cosh(a):
    a = as_tensor(a)
    return _make("cosh", np.cosh(a.data), (a,), lambda g: (g * np.sinh(a.data),))


def sinh(a):
    a = as_tensor(a)
    return _make("sinh", np.sinh(a.data), (a,), lambda g: (g * np.cosh(a.data),))


def arcosh(a):
    """Inverse hyperbolic cosine. Inputs below 1 raise; clamp first (see ARCOSH_FLOOR)."""
    a = as_tensor(a)
    if np.any(a.data < 1.0):
        raise DomainError(
            f"arcosh: input below 1 (min {a.data.min()!r}); clamp_min(x, ARCOSH_FLOOR) first")
    return _make("arcosh", np.arccosh(a.data), (a,),
                 lambda g: (g / np.sqrt(a.data * a.data - 1.0),))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ez = np.exp(x[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(a):
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return _make("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def log_sigmoid(a):
    """log(sigmoid(a)) without underflow for large negative inputs."""
    a = as_tensor(a)
    x = a.data
    out = np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))
    return _make("log_sigmoid", out, (a,), lambda g: (g * _sigmoid(-x),))


def softmax(a):
    """Softmax over the last axis."""
    a = as_tensor(a)
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (out * (g - np.sum(g * out, axis=-1, keepdims=True)),)

    return _make("softmax", out, (a,), bw)


def log_softmax(a):
    a = as_tensor(a)
    z = a.data - a.data.max(axis=-1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))

    def bw(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return _make("log_softmax", out, (a,), bw)


def clamp_min(a, threshold):
    """max(a, threshold); gradient 1 where a > threshold, else 0."""
    a = as_tensor(a)
    keep = a.data > threshold
    out = np.where(keep, a.data, threshold).astype(a.dtype, copy=False)
    return _make("clamp_min", out, (a,), lambda g: (g * keep,))


def relu(a):
    return clamp_min(a, 0.0)


def dropout(a, p, rng=None, training=True, mask=None):
    """Inverted dropout: kept entries are scaled by 1/(1-p) at train time.

    Pass ``mask`` (boolean, same shape) to replay a fixed pattern; the mask
    actually used is recorded on the node as ``saved``.
    """
    a = as_tensor(a)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout: p must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return a
    if mask is None:
        rng = np.random.default_rng() if rng is None else rng
        mask = rng.random(a.shape) >= p
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise ShapeError(f"dropout: mask shape {mask.shape} vs input {a.shape}")
    scale = mask / (1.0 - p)
    return _make("dropout", a.data * scale, (a,), lambda g: (g * scale,), saved=mask)
