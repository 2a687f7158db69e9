"""Dense float64 tensors with reverse-mode automatic differentiation.

The graph is taped implicitly: every differentiable op returns a Tensor that
remembers its parent tensors and a closure that routes the incoming gradient
to them. ``backward`` walks the tape once, in reverse topological order.

All arithmetic is 64-bit. Backward closures must never mutate the gradient
array they receive (it may alias another node's accumulated gradient);
in-place updates are only permitted on buffers a closure allocated itself.
"""

from __future__ import annotations

import ctypes
import os
from typing import Callable, Iterable, Sequence

import numpy as np

from .validation import ContractError, NumericError, ParameterError, ShapeError

__all__ = [
    "Tensor",
    "no_grad",
    "toposort",
    "backward",
    "matmul",
    "softmax",
    "log_softmax",
    "layer_norm",
    "l2_normalize",
    "conv2d",
    "attention_core",
    "embedding",
    "take_along_last",
    "concat",
    "relu",
    "grad_check",
    "save_checkpoint",
    "load_checkpoint",
]


def _tune_malloc() -> None:
    # Large activations (attention score maps) are allocated and freed every
    # step; by default glibc services them with mmap/munmap, which costs a
    # page-fault storm per step. Raising the thresholds lets free lists
    # recycle the buffers. No-op off glibc.
    if os.environ.get("CORNERTEXT_NO_MALLOC_TUNING"):
        return
    try:
        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(-3, 1 << 30)  # M_MMAP_THRESHOLD
        libc.mallopt(-1, 1 << 30)  # M_TRIM_THRESHOLD
    except Exception:
        pass


_tune_malloc()

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables tape recording (inference mode)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    """A float64 array plus optional gradient and tape linkage."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes if axes else None)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    """Wrap an op result, recording tape linkage only when needed."""
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to ``shape``, undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- graph traversal ---------------------------------------------------------


def toposort(root: Tensor) -> list[Tensor]:
    """Ordered record of the executed ops reaching ``root``.

    Every node's parents precede it; backward visits the reversed list, so
    each node is processed exactly once, after all of its consumers.
    """
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every requires_grad leaf reachable from ``loss``.

    The tape is consumed: interior nodes drop their gradient buffers and
    closures as soon as they have been processed, so a graph can only be
    differentiated once.
    """
    if loss.data.size != 1:
        raise ContractError(
            f"backward requires a scalar loss, got shape {loss.data.shape}"
        )
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any requires_grad tensor")
    order = toposort(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is None:
            continue
        node._backward(node.grad)
        # Interior node: gradient fully propagated, release buffers early.
        node.grad = None
        node._backward = None
        node._parents = ()


# -- elementwise and reduction ops -------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data - b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _make(out_data, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), bwd)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data / b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g / b.data, a.data.shape))
        _accumulate(b, _unbroadcast(-g * out_data / b.data, b.data.shape))

    return _make(out_data, (a, b), bwd)


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _make(-a.data, (a,), lambda g: _accumulate(a, -g))


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.exp(a.data)

    def bwd(g):
        _accumulate(a, g * out_data)

    return _make(out_data, (a,), bwd)


def log(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.log(a.data)

    def bwd(g):
        _accumulate(a, g / a.data)

    return _make(out_data, (a,), bwd)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.maximum(a.data, 0.0)

    def bwd(g):
        _accumulate(a, g * (out_data > 0.0))

    return _make(out_data, (a,), bwd)


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        gg = g
        if not keepdims and axis is not None:
            gg = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(gg, a.data.shape).copy())

    return _make(out_data, (a,), bwd)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size / max(out_data.size, 1)

    def bwd(g):
        gg = g
        if not keepdims and axis is not None:
            gg = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(gg / count, a.data.shape).copy())

    return _make(out_data, (a,), bwd)


# -- shape ops ----------------------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.reshape(shape)

    def bwd(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _make(out_data, (a,), bwd)


def transpose(a, axes=None) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.transpose(axes)
    inv = None if axes is None else np.argsort(axes)

    def bwd(g):
        _accumulate(a, g.transpose(inv))

    return _make(out_data, (a,), bwd)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in ts], axis=axis)
    splits = np.cumsum([t.data.shape[axis] for t in ts])[:-1]

    def bwd(g):
        for t, piece in zip(ts, np.split(g, splits, axis=axis)):
            _accumulate(t, piece)

    return _make(out_data, tuple(ts), bwd)


# -- linear algebra -----------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product with numpy leading-batch broadcasting."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(
            f"matmul requires matrices, got shapes {a.data.shape} and {b.data.shape}"
        )
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(
            f"matmul inner dimensions disagree: {a.data.shape} @ {b.data.shape}"
        )
    out_data = np.matmul(a.data, b.data)

    def bwd(g):
        if a.requires_grad:
            ga = np.matmul(g, b.data.swapaxes(-1, -2))
            _accumulate(a, _unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.matmul(a.data.swapaxes(-1, -2), g)
            _accumulate(b, _unbroadcast(gb, b.data.shape))

    return _make(out_data, (a, b), bwd)


def _stable_softmax_inplace(x: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    if np.isnan(m).any():
        raise NumericError("softmax input contains NaN")
    np.subtract(x, m, out=x)
    np.exp(x, out=x)
    s = np.sum(x, axis=axis, keepdims=True)
    np.divide(x, s, out=x)
    return x


def softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ShapeError(f"softmax axis {axis} invalid for shape {a.data.shape}")
    out_data = _stable_softmax_inplace(a.data.copy(), axis)

    def bwd(g):
        dot = np.sum(g * out_data, axis=axis, keepdims=True)
        _accumulate(a, (g - dot) * out_data)

    return _make(out_data, (a,), bwd)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    m = np.max(a.data, axis=axis, keepdims=True)
    if np.isnan(m).any():
        raise NumericError("log_softmax input contains NaN")
    shifted = a.data - m
    out_data = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))

    def bwd(g):
        _accumulate(a, g - np.exp(out_data) * np.sum(g, axis=axis, keepdims=True))

    return _make(out_data, (a,), bwd)


def layer_norm(x, gain, bias, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    d = x.data.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise ShapeError(
            f"layer_norm gain/bias must have shape ({d},), got "
            f"{gain.data.shape} and {bias.data.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = xhat * gain.data + bias.data

    def bwd(g):
        if gain.requires_grad:
            _accumulate(gain, np.sum(g * xhat, axis=tuple(range(g.ndim - 1))))
        if bias.requires_grad:
            _accumulate(bias, np.sum(g, axis=tuple(range(g.ndim - 1))))
        if x.requires_grad:
            gx = g * gain.data
            t1 = gx.mean(axis=-1, keepdims=True)
            t2 = np.mean(gx * xhat, axis=-1, keepdims=True)
            _accumulate(x, (gx - t1 - xhat * t2) * inv)

    return _make(out_data, (x, gain, bias), bwd)


def l2_normalize(x, axis: int = -1, eps: float = 1e-12) -> Tensor:
    """Scale slices along ``axis`` to unit Euclidean norm (zero stays zero)."""
    x = _as_tensor(x)
    norm = np.sqrt(np.sum(x.data * x.data, axis=axis, keepdims=True))
    safe = np.maximum(norm, eps)
    out_data = x.data / safe

    def bwd(g):
        # y = x / max(|x|, eps): below eps the map is linear in x.
        dot = np.sum(g * out_data, axis=axis, keepdims=True)
        gx = g / safe
        gx = gx - np.where(norm > eps, out_data * dot / safe, 0.0)
        _accumulate(x, gx)

    return _make(out_data, (x,), bwd)


# -- structured ops -----------------------------------------------------------


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-d cross-correlation over (B, C, H, W) or (C, H, W) input, zero padded."""
    x, weight = _as_tensor(x), _as_tensor(weight)
    squeeze = x.data.ndim == 3
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 4 or weight.data.ndim != 4:
        raise ShapeError(
            f"conv2d expects (B, C, H, W) input and (O, C, kh, kw) kernels, got "
            f"{x.data.shape} and {weight.data.shape}"
        )
    bsz, cin, h, w = xd.shape
    cout, cin_w, kh, kw = weight.data.shape
    if cin != cin_w:
        raise ShapeError(
            f"conv2d channel mismatch: input {x.data.shape} vs kernels {weight.data.shape}"
        )
    if stride < 1 or padding < 0:
        raise ParameterError(f"invalid stride {stride} / padding {padding}")
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise ShapeError(
            f"kernel {kh}x{kw} larger than padded input {hp}x{wp}"
        )
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1

    if padding:
        xp = np.zeros((bsz, cin, hp, wp))
        xp[:, :, padding : padding + h, padding : padding + w] = xd
    else:
        xp = xd
    cols = np.empty((bsz, cin, kh, kw, ho, wo))
    for u in range(kh):
        for v in range(kw):
            cols[:, :, u, v] = xp[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride]
    cols = cols.reshape(bsz, cin * kh * kw, ho * wo)
    wmat = weight.data.reshape(cout, cin * kh * kw)
    out = np.matmul(wmat, cols).reshape(bsz, cout, ho, wo)
    parents: list[Tensor] = [x, weight]
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.data.shape != (cout,):
            raise ShapeError(f"conv2d bias must have shape ({cout},), got {bias.data.shape}")
        out += bias.data[:, None, None]
        parents.append(bias)
    out_data = out[0] if squeeze else out

    def bwd(g):
        gb = (g[None] if squeeze else g).reshape(bsz, cout, ho * wo)
        if bias is not None and bias.requires_grad:
            _accumulate(bias, gb.sum(axis=(0, 2)))
        gbt = None
        if weight.requires_grad:
            # One fat GEMM instead of a batched small-K product.
            gbt = gb.transpose(1, 0, 2).reshape(cout, bsz * ho * wo)
            colst = cols.transpose(0, 2, 1).reshape(bsz * ho * wo, cin * kh * kw)
            _accumulate(weight, (gbt @ colst).reshape(weight.data.shape))
        if x.requires_grad:
            if gbt is None:
                gbt = gb.transpose(1, 0, 2).reshape(cout, bsz * ho * wo)
            gcols = (wmat.T @ gbt).reshape(cin * kh * kw, bsz, ho * wo)
            gcols = gcols.transpose(1, 0, 2).reshape(bsz, cin, kh, kw, ho, wo)
            gxp = np.zeros((bsz, cin, hp, wp))
            for u in range(kh):
                for v in range(kw):
                    gxp[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride] += gcols[:, :, u, v]
            gx = gxp[:, :, padding : padding + h, padding : padding + w] if padding else gxp
            _accumulate(x, gx[0] if squeeze else gx)

    return _make(out_data, tuple(parents), bwd)


def attention_core(q, k, v, mask: np.ndarray | None = None, capture: dict | None = None) -> Tensor:
    """softmax(q @ k^T) @ v over stacked head batches.

    ``q``: (B, S, D), ``k``/``v``: (B, T, D); any scaling is the caller's
    job. ``mask`` is an additive constant broadcast onto the score map.
    Fused so the (B, S, T) score map never outlives the op.
    """
    q, k, v = _as_tensor(q), _as_tensor(k), _as_tensor(v)
    if q.data.shape[-1] != k.data.shape[-1] or k.data.shape[:-1] != v.data.shape[:-1]:
        raise ShapeError(
            f"attention shapes disagree: q {q.data.shape}, k {k.data.shape}, v {v.data.shape}"
        )
    scores = np.matmul(q.data, k.data.swapaxes(-1, -2))
    if mask is not None:
        scores += mask
    y = _stable_softmax_inplace(scores, -1)
    out_data = np.matmul(y, v.data)
    if capture is not None:
        capture["weights"] = y.copy()
        capture["values"] = v.data.copy()
        capture["outputs"] = out_data.copy()

    def bwd(g):
        if v.requires_grad:
            _accumulate(v, np.matmul(y.swapaxes(-1, -2), g))
        if q.requires_grad or k.requires_grad:
            dy = np.matmul(g, v.data.swapaxes(-1, -2))
            dot = np.sum(dy * y, axis=-1, keepdims=True)
            np.subtract(dy, dot, out=dy)
            np.multiply(dy, y, out=dy)  # dy now holds dL/dscores
            if q.requires_grad:
                _accumulate(q, np.matmul(dy, k.data))
            if k.requires_grad:
                _accumulate(k, np.matmul(dy.swapaxes(-1, -2), q.data))

    return _make(out_data, (q, k, v), bwd)


def embedding(table, ids: np.ndarray) -> Tensor:
    """Row lookup ``table[ids]`` with scatter-add backward."""
    table = _as_tensor(table)
    ids = np.asarray(ids)
    out_data = table.data[ids]

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        _accumulate(table, gt)

    return _make(out_data, (table,), bwd)


def take_along_last(x, idx: np.ndarray) -> Tensor:
    """Pick one entry per slice along the last axis: out[...] = x[..., idx[...]]."""
    x = _as_tensor(x)
    idx = np.asarray(idx)
    out_data = np.take_along_axis(x.data, idx[..., None], axis=-1)[..., 0]

    def bwd(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, idx[..., None], g[..., None], axis=-1)
        _accumulate(x, gx)

    return _make(out_data, (x,), bwd)


# -- verification -------------------------------------------------------------


def grad_check(
    f: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-5,
    max_per_input: int | None = None,
    seed: int = 0,
    noise_floor: float = 0.0,
) -> float:
    """Compare tape gradients of the scalar map ``f`` with central differences.

    Returns the worst relative error max(|analytic - fd|) / max(|analytic|,
    |fd|, 1e-8) over the checked coordinates. When ``max_per_input`` is set,
    a seeded random subset of coordinates per input is checked; otherwise all.

    ``noise_floor``: coordinates where both the analytic gradient and the
    finite difference are below this magnitude are counted as agreeing.
    Central differences resolve gradients only down to ~|f|*eps/h (~1e-11
    here), so structurally-zero gradients (e.g. key-projection biases, which
    cancel in softmax) otherwise register pure measurement noise.
    """
    for t in inputs:
        t.grad = None
    out = f()
    if out.data.size != 1:
        raise ContractError("grad_check requires a scalar-valued map")
    backward(out)
    analytic = [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in inputs
    ]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, an in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        an_flat = an.reshape(-1)
        n = flat.size
        if max_per_input is not None and n > max_per_input:
            coords = rng.choice(n, size=max_per_input, replace=False)
        else:
            coords = range(n)
        for i in coords:
            orig = flat[i]
            with no_grad():
                flat[i] = orig + h
                fp = float(f().data)
                flat[i] = orig - h
                fm = float(f().data)
            flat[i] = orig
            fd = (fp - fm) / (2.0 * h)
            if max(abs(an_flat[i]), abs(fd)) < noise_floor:
                continue
            err = abs(an_flat[i] - fd) / max(abs(an_flat[i]), abs(fd), 1e-8)
            worst = max(worst, err)
    return worst


# -- checkpoint container ------------------------------------------------------


_CKPT_MAGIC = "f64-tensor-checkpoint-v1"


def save_checkpoint(path, arrays: dict, meta: dict | None = None) -> None:
    """Write named float64 arrays with a plain-text header and raw payload.

    Header lines: ``meta <key> <value>`` then ``tensor <name> <shape> <offset>``
    (shape comma-separated, ``-`` for rank 0; offsets into the payload that
    follows the ``end`` line). Payload is little-endian float64, so a load
    reproduces every array bit for bit.
    """
    lines = [_CKPT_MAGIC]
    for key, value in (meta or {}).items():
        key, value = str(key), str(value)
        if any(c.isspace() for c in key) or "\n" in value:
            raise ValueError(f"invalid meta entry {key!r}")
        lines.append(f"meta {key} {value}")
    offset = 0
    payload = []
    for name, arr in arrays.items():
        if any(c.isspace() for c in name):
            raise ValueError(f"tensor name may not contain whitespace: {name!r}")
        a = arr.data if isinstance(arr, Tensor) else np.asarray(arr, dtype=np.float64)
        shape = ",".join(str(n) for n in a.shape) or "-"
        a = np.ascontiguousarray(a, dtype=np.float64)
        lines.append(f"tensor {name} {shape} {offset}")
        payload.append(a.astype("<f8", copy=False).tobytes())
        offset += a.size * 8
    lines.append("end")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        for chunk in payload:
            fh.write(chunk)


def load_checkpoint(path):
    """Read a checkpoint: returns (dict name -> float64 array, dict meta)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    header_end = blob.index(b"end\n") + 4
    header = blob[:header_end].decode("utf-8").splitlines()
    if header[0] != _CKPT_MAGIC:
        raise ValueError(f"not a checkpoint file: {path}")
    payload = blob[header_end:]
    meta: dict[str, str] = {}
    arrays: dict[str, np.ndarray] = {}
    for line in header[1:-1]:
        kind, rest = line.split(" ", 1)
        if kind == "meta":
            key, _, value = rest.partition(" ")
            meta[key] = value
        elif kind == "tensor":
            name, shape_s, offset_s = rest.rsplit(" ", 2)
            shape = () if shape_s == "-" else tuple(int(n) for n in shape_s.split(","))
            count = int(np.prod(shape)) if shape else 1
            start = int(offset_s)
            arr = np.frombuffer(payload, dtype="<f8", count=count, offset=start)
            arrays[name] = arr.reshape(shape).astype(np.float64)
        else:
            raise ValueError(f"unrecognized checkpoint header line: {line!r}")
    return arrays, meta
