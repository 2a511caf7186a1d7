"""Dense float64 tensors with reverse-mode automatic differentiation.

A ``Tape`` records primitive operations in execution order while it is
active; ``Tape.backward`` replays them in reverse, accumulating adjoints.
Outside a tape, operations run at plain numpy speed with zero recording
overhead, which is what evaluation-mode forward passes use.

All primitives are pure: identical inputs (and masks, for dropout) give
byte-identical outputs across runs.
"""

import numpy as np


class ShapeMismatch(ValueError):
    """Raised when operand shapes do not conform for a primitive."""

    def __init__(self, op: str, *shapes):
        super().__init__(f"{op}: incompatible shapes {' vs '.join(str(tuple(s)) for s in shapes)}")


class TapeError(RuntimeError):
    pass


_ACTIVE_TAPES: list = []


class Tensor:
    """Immutable dense array of float64, optionally tracked by a tape.

    ``data`` is row-major and never mutated by primitives; optimizers update
    ``Parameter`` objects in place between tape lifetimes only.
    """

    __slots__ = ("data", "requires_grad", "_node")

    def __init__(self, data, requires_grad: bool = False, validate: bool = True):
        arr = np.asarray(data, dtype=np.float64)
        if validate and not np.all(np.isfinite(arr)):
            raise ValueError("Tensor rejects non-finite values at construction")
        self.data = arr
        self.requires_grad = requires_grad
        self._node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    # -- operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __matmul__(self, other):
        return matmul(self, _lift(other))

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __getitem__(self, key):
        return slice_(self, key)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes or None)


class Parameter(Tensor):
    """A trainable leaf tensor; optimizers mutate ``data`` in place."""

    __slots__ = ("name",)

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    __slots__ = ("out", "parents", "vjp")

    def __init__(self, out, parents, vjp):
        self.out = out
        self.parents = parents
        self.vjp = vjp


class GradientMap:
    """Adjoints per leaf parameter after a backward pass."""

    def __init__(self, grads: dict):
        self._grads = grads

    def __getitem__(self, param: Tensor) -> np.ndarray:
        g = self._grads.get(id(param))
        if g is None:
            return np.zeros_like(param.data)
        return g

    def __contains__(self, param: Tensor) -> bool:
        return id(param) in self._grads


class Tape:
    """Ordered record of primitives; nodes appear in topological order
    because they are appended as they execute. One backward pass per tape
    unless reset."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._spent = False

    def __enter__(self):
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE_TAPES.pop()
        return False

    def __len__(self):
        return len(self._nodes)

    def reset(self):
        self._nodes.clear()
        self._spent = False

    def backward(self, loss: Tensor) -> GradientMap:
        """Populate adjoints for every leaf parameter reachable from ``loss``.

        The loss must be scalar; calling backward twice without ``reset`` is
        rejected so stale adjoints can never be reused by mistake.
        """
        if self._spent:
            raise TapeError("backward() already ran on this tape; call reset() first")
        if loss.data.size != 1:
            raise TapeError(f"backward() needs a scalar loss, got shape {loss.data.shape}")
        self._spent = True

        own_nodes = frozenset(id(n) for n in self._nodes)
        adjoint: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaf_grads: dict[int, np.ndarray] = {}
        for node in reversed(self._nodes):
            out_grad = adjoint.pop(id(node.out), None)
            if out_grad is None:
                continue
            parent_grads = node.vjp(out_grad)
            for parent, grad in zip(node.parents, parent_grads):
                if grad is None:
                    continue
                if parent.requires_grad:
                    key = id(parent)
                    if key in leaf_grads:
                        leaf_grads[key] = leaf_grads[key] + grad
                    else:
                        leaf_grads[key] = grad
                elif parent._node is not None and id(parent._node) in own_nodes:
                    key = id(parent)
                    if key in adjoint:
                        adjoint[key] = adjoint[key] + grad
                    else:
                        adjoint[key] = grad
        return GradientMap(leaf_grads)


def _record(out: Tensor, parents: tuple, vjp) -> Tensor:
    if not _ACTIVE_TAPES:
        return out
    tape = _ACTIVE_TAPES[-1]
    if any(p.requires_grad or p._node is not None for p in parents):
        node = _Node(out, parents, vjp)
        out._node = node
        tape._nodes.append(node)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum-reduce a broadcasted gradient back to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise / linear-algebra primitives
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = Tensor(a.data + b.data, validate=False)
    except ValueError:
        raise ShapeMismatch("add", a.shape, b.shape) from None

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _record(out, (a, b), vjp)


def sub(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = Tensor(a.data - b.data, validate=False)
    except ValueError:
        raise ShapeMismatch("sub", a.shape, b.shape) from None

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _record(out, (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = Tensor(a.data * b.data, validate=False)
    except ValueError:
        raise ShapeMismatch("mul", a.shape, b.shape) from None

    def vjp(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return _record(out, (a, b), vjp)


def div(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = Tensor(a.data / b.data, validate=False)
    except ValueError:
        raise ShapeMismatch("div", a.shape, b.shape) from None

    def vjp(g):
        ga = _unbroadcast(g / b.data, a.data.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)
        return ga, gb

    return _record(out, (a, b), vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D or batched (leading axes equal) matrix product."""
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeMismatch("matmul", a.shape, b.shape)
    out = Tensor(a.data @ b.data, validate=False)

    def vjp(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return _record(out, (a, b), vjp)


def sqrt(a: Tensor) -> Tensor:
    out = Tensor(np.sqrt(a.data), validate=False)

    def vjp(g):
        return (g * 0.5 / out.data,)

    return _record(out, (a,), vjp)


def absolute(a: Tensor) -> Tensor:
    out = Tensor(np.abs(a.data), validate=False)

    def vjp(g):
        return (g * np.sign(a.data),)

    return _record(out, (a,), vjp)


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0), validate=False)

    def vjp(g):
        return (g * (a.data > 0.0),)

    return _record(out, (a,), vjp)


def tanh(a: Tensor) -> Tensor:
    out = Tensor(np.tanh(a.data), validate=False)

    def vjp(g):
        return (g * (1.0 - out.data * out.data),)

    return _record(out, (a,), vjp)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # piecewise-stable logistic
    pos = x >= 0
    y = np.empty_like(x)
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    out = Tensor(y, validate=False)

    def vjp(g):
        return (g * out.data * (1.0 - out.data),)

    return _record(out, (a,), vjp)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y, validate=False)

    def vjp(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    return _record(out, (a,), vjp)


# ---------------------------------------------------------------------------
# reductions and shape ops
# ---------------------------------------------------------------------------

def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.data.mean(axis=axis, keepdims=keepdims), validate=False)
    count = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )

    def vjp(g):
        g = np.asarray(g)
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape) / count,)

    return _record(out, (a,), vjp)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), validate=False)

    def vjp(g):
        g = np.asarray(g)
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _record(out, (a,), vjp)


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape), validate=False)

    def vjp(g):
        return (g.reshape(a.data.shape),)

    return _record(out, (a,), vjp)


def transpose(a: Tensor, axes=None) -> Tensor:
    out = Tensor(np.transpose(a.data, axes), validate=False)

    def vjp(g):
        if axes is None:
            return (np.transpose(g),)
        inverse = np.argsort(axes)
        return (np.transpose(g, inverse),)

    return _record(out, (a,), vjp)


def slice_(a: Tensor, key) -> Tensor:
    out = Tensor(a.data[key], validate=False)

    def vjp(g):
        full = np.zeros_like(a.data)
        full[key] += g
        return (full,)

    return _record(out, (a,), vjp)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), validate=False)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, offsets, axis=axis))

    return _record(out, tuple(tensors), vjp)


# ---------------------------------------------------------------------------
# convolution / pooling primitives (stride 1 convs; NCL layout)
# ---------------------------------------------------------------------------

def conv1d(x: Tensor, w: Tensor, b=None, padding: int = 0) -> Tensor:
    """Cross-correlation of (B, C_in, L) with kernels (C_out, C_in, K)."""
    if x.ndim != 3 or w.ndim != 3 or x.data.shape[1] != w.data.shape[1]:
        raise ShapeMismatch("conv1d", x.shape, w.shape)
    batch, c_in, length = x.data.shape
    c_out, _, k = w.data.shape
    l_out = length + 2 * padding - k + 1
    if l_out < 1:
        raise ShapeMismatch("conv1d", x.shape, w.shape)

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    # im2col: one dgemm instead of K small ones
    cols = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)  # (B, C_in, L_out, K)
    cols = cols.transpose(0, 2, 1, 3).reshape(batch * l_out, c_in * k)
    wmat = w.data.reshape(c_out, c_in * k)
    y = (cols @ wmat.T).reshape(batch, l_out, c_out).transpose(0, 2, 1)
    if b is not None:
        y = y + b.data[None, :, None]
    out = Tensor(y, validate=False)

    def vjp(g):
        gmat = g.transpose(0, 2, 1).reshape(batch * l_out, c_out)
        gw = (gmat.T @ cols).reshape(c_out, c_in, k)
        gcols = (gmat @ wmat).reshape(batch, l_out, c_in, k).transpose(0, 2, 1, 3)
        gxp = np.zeros((batch, c_in, length + 2 * padding))
        for tap in range(k):
            gxp[:, :, tap:tap + l_out] += gcols[:, :, :, tap]
        gx = gxp[:, :, padding:padding + length] if padding else gxp
        gb = g.sum(axis=(0, 2)) if b is not None else None
        return (gx, gw, gb) if b is not None else (gx, gw)

    parents = (x, w, b) if b is not None else (x, w)
    return _record(out, parents, vjp)


def conv1d_transpose(x: Tensor, w: Tensor, b=None) -> Tensor:
    """Stride-1 transposed convolution: (B, C_in, L) x (C_in, C_out, K) -> (B, C_out, L+K-1)."""
    if x.ndim != 3 or w.ndim != 3 or x.data.shape[1] != w.data.shape[0]:
        raise ShapeMismatch("conv1d_transpose", x.shape, w.shape)
    batch, c_in, length = x.data.shape
    _, c_out, k = w.data.shape
    l_out = length + k - 1

    y = np.zeros((batch, c_out, l_out))
    xt = x.data.transpose(0, 2, 1)  # (B, L, C_in)
    for tap in range(k):
        y[:, :, tap:tap + length] += (xt @ w.data[:, :, tap]).transpose(0, 2, 1)
    if b is not None:
        y = y + b.data[None, :, None]
    out = Tensor(y, validate=False)

    def vjp(g):
        gx = np.zeros_like(x.data)
        gw = np.zeros_like(w.data)
        for tap in range(k):
            gslab = g[:, :, tap:tap + length]          # (B, C_out, L)
            gx += np.einsum("bol,io->bil", gslab, w.data[:, :, tap], optimize=True)
            gw[:, :, tap] = np.einsum("bil,bol->io", x.data, gslab, optimize=True)
        gb = g.sum(axis=(0, 2)) if b is not None else None
        return (gx, gw, gb) if b is not None else (gx, gw)

    parents = (x, w, b) if b is not None else (x, w)
    return _record(out, parents, vjp)


def maxpool1d(x: Tensor, size: int, stride: int) -> Tensor:
    """Max pooling over the last axis of (B, C, L)."""
    batch, chan, length = x.data.shape
    l_out = (length - size) // stride + 1
    if l_out < 1:
        raise ShapeMismatch("maxpool1d", x.shape, (size,))
    windows = np.lib.stride_tricks.sliding_window_view(x.data, size, axis=2)[:, :, ::stride]
    arg = windows.argmax(axis=3)
    y = np.take_along_axis(windows, arg[..., None], axis=3)[..., 0]
    out = Tensor(y, validate=False)

    def vjp(g):
        gx = np.zeros_like(x.data)
        starts = np.arange(l_out) * stride
        src = starts[None, None, :] + arg  # winning index along L
        bidx = np.arange(batch)[:, None, None]
        cidx = np.arange(chan)[None, :, None]
        np.add.at(gx, (bidx, cidx, src), g)
        return (gx,)

    return _record(out, (x,), vjp)


def upsample1d(x: Tensor, factor: int) -> Tensor:
    """Nearest-neighbour repeat along the last axis."""
    out = Tensor(np.repeat(x.data, factor, axis=-1), validate=False)

    def vjp(g):
        return (g.reshape(*x.data.shape, factor).sum(axis=-1),)

    return _record(out, (x,), vjp)
