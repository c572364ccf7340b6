"""Dense tensors with reverse-mode gradients.

Covers exactly the kernels the networks here need: linear, 2D convolution,
2D transpose convolution, batch norm, ReLU, MSE, plus scalar add/scale for
combining losses. Arrays are float32 by default; float64 goes through every
op unchanged, which is what the finite-difference gradient checks use.
"""
from __future__ import annotations

import contextlib

import numpy as np


class ShapeError(ValueError):
    """Operands with incompatible shapes or invalid geometry."""


class GraphError(RuntimeError):
    """Backward called on an invalid or already-consumed graph."""


class NonFiniteError(FloatingPointError):
    """A value that must be finite is NaN or Inf."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, metrics)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """N-dimensional array plus an optional gradient of the same shape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        self.grad = None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def assert_finite(self, what: str = "tensor"):
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError(f"{what} contains NaN or Inf")
        return self

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, grad={'yes' if self.grad is not None else 'no'})"

    def __add__(self, other):
        return _add(self, other)

    def __mul__(self, other):
        return _scale(self, other)

    def __rmul__(self, other):
        return _scale(self, other)


def _recording(*tensors: Tensor) -> bool:
    return _grad_enabled and any(t.requires_grad for t in tensors if isinstance(t, Tensor))


def _node(data: np.ndarray, parents, backward_fn) -> Tensor:
    out = Tensor(data)
    out.requires_grad = True
    out._parents = tuple(parents)
    out._backward = backward_fn
    return out


def backward(loss: Tensor):
    """Run reverse-mode accumulation from a scalar loss node.

    Leaf tensors keep their gradients; intermediate buffers are released as
    the walk passes them. A graph can be consumed once.
    """
    if loss.data.size != 1:
        raise GraphError(f"backward root must be scalar, got shape {loss.shape}")
    if loss._backward is None and not loss._parents:
        raise GraphError("backward root was not produced by a recorded operation")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        if node._consumed:
            raise GraphError("graph already consumed; rebuild the forward pass")
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)
        if node._parents:
            # intermediate value: free the buffer, only leaves keep grads
            node._consumed = True
            node.grad = None
            node._backward = None


# ---------------------------------------------------------------------------
# elementwise / reduction ops

def _add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    if a.shape != b.shape:
        raise ShapeError(f"add shapes differ: {a.shape} vs {b.shape}")
    out_data = a.data + b.data
    if not _recording(a, b):
        return Tensor(out_data)

    def _bw(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _node(out_data, (a, b), _bw)


def _scale(a: Tensor, s) -> Tensor:
    s = float(s)
    out_data = a.data * s
    if not _recording(a):
        return Tensor(out_data)

    def _bw(g):
        if a.requires_grad:
            a._accumulate(g * s)

    return _node(out_data, (a,), _bw)


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x)."""
    y = np.maximum(x.data, 0)
    if not _recording(x):
        return Tensor(y)

    mask = x.data > 0

    def _bw(g):
        if x.requires_grad:
            x._accumulate(g * mask)

    return _node(y, (x,), _bw)


def mse_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean squared difference over all elements. Scalar output."""
    if a.shape != b.shape:
        raise ShapeError(f"mse_loss shapes differ: {a.shape} vs {b.shape}")
    diff = a.data - b.data
    out_data = np.asarray((diff * diff).mean(), dtype=a.dtype)
    if not np.isfinite(out_data):
        raise NonFiniteError("mse_loss produced a non-finite value")
    if not _recording(a, b):
        return Tensor(out_data)

    n = diff.size

    def _bw(g):
        scale = 2.0 * float(g) / n
        if a.requires_grad:
            a._accumulate(scale * diff)
        if b.requires_grad:
            b._accumulate(-scale * diff)

    return _node(out_data, (a, b), _bw)


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    y = x.data.reshape(shape)
    if not _recording(x):
        return Tensor(y)

    old_shape = x.shape

    def _bw(g):
        if x.requires_grad:
            x._accumulate(g.reshape(old_shape))

    return _node(y, (x,), _bw)


# ---------------------------------------------------------------------------
# linear

def linear_forward(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y[i, j] = sum_k x[i, k] * w[j, k] + b[j] for x of shape [B, in]."""
    if x.ndim != 2 or w.ndim != 2 or b.ndim != 1:
        raise ShapeError(f"linear expects x[B,in], w[out,in], b[out]; got {x.shape}, {w.shape}, {b.shape}")
    if x.shape[1] != w.shape[1] or w.shape[0] != b.shape[0]:
        raise ShapeError(f"linear dimension mismatch: x{x.shape} w{w.shape} b{b.shape}")
    y = x.data @ w.data.T + b.data
    if not _recording(x, w, b):
        return Tensor(y)

    def _bw(g):
        if x.requires_grad:
            x._accumulate(g @ w.data)
        if w.requires_grad:
            w._accumulate(g.T @ x.data)
        if b.requires_grad:
            b._accumulate(g.sum(axis=0))

    return _node(y, (x, w, b), _bw)


# ---------------------------------------------------------------------------
# convolution plumbing: kernel-position slicing, GEMM, batch chunking

_COL_BUDGET_BYTES = 64 * 1024 * 1024


def _chunk_size(per_sample_cols: int, itemsize: int, batch: int) -> int:
    rows = max(1, _COL_BUDGET_BYTES // max(1, per_sample_cols * itemsize))
    return min(batch, rows)


def _im2col(xpad: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    b, c = xpad.shape[:2]
    cols = np.empty((b, c, kh, kw, oh, ow), dtype=xpad.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xpad[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
    return cols.reshape(b, c * kh * kw, oh * ow)


def _col2im(cols: np.ndarray, c: int, h: int, w: int, kh: int, kw: int,
            stride: int, pad: int, oh: int, ow: int) -> np.ndarray:
    b = cols.shape[0]
    xpad = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    cols = cols.reshape(b, c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            xpad[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += cols[:, :, i, j]
    if pad == 0:
        return xpad
    return xpad[:, :, pad : pad + h, pad : pad + w]


def _pad_hw(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _conv_out_size(h: int, w: int, kh: int, kw: int, stride: int, pad: int) -> tuple[int, int]:
    if h + 2 * pad < kh or w + 2 * pad < kw:
        raise ShapeError(f"conv geometry invalid: input {h}x{w}, kernel {kh}x{kw}, pad {pad}")
    return (h + 2 * pad - kh) // stride + 1, (w + 2 * pad - kw) // stride + 1


def _conv2d_data(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    bsz, cin, h, wd = x.shape
    cout, cin2, kh, kw = w.shape
    if cin != cin2:
        raise ShapeError(f"conv2d channel mismatch: input {cin}, kernel {cin2}")
    oh, ow = _conv_out_size(h, wd, kh, kw, stride, pad)
    wr = w.reshape(cout, -1)
    y = np.empty((bsz, cout, oh, ow), dtype=x.dtype)
    step = _chunk_size(cin * kh * kw * oh * ow, x.itemsize, bsz)
    for s in range(0, bsz, step):
        cols = _im2col(_pad_hw(x[s : s + step], pad), kh, kw, stride, oh, ow)
        y[s : s + step] = np.matmul(wr, cols).reshape(-1, cout, oh, ow)
    return y


def _conv2d_dx(g: np.ndarray, w: np.ndarray, x_shape, stride: int, pad: int) -> np.ndarray:
    bsz, cin, h, wd = x_shape
    cout, _, kh, kw = w.shape
    oh, ow = g.shape[2], g.shape[3]
    wr = w.reshape(cout, -1)
    dx = np.empty(x_shape, dtype=g.dtype)
    step = _chunk_size(cin * kh * kw * oh * ow, g.itemsize, bsz)
    for s in range(0, bsz, step):
        gr = g[s : s + step].reshape(-1, cout, oh * ow)
        dcols = np.matmul(wr.T, gr)
        dx[s : s + step] = _col2im(dcols, cin, h, wd, kh, kw, stride, pad, oh, ow)
    return dx


def _conv2d_dw(g: np.ndarray, x: np.ndarray, w_shape, stride: int, pad: int) -> np.ndarray:
    bsz, cin, h, wd = x.shape
    cout, _, kh, kw = w_shape
    oh, ow = g.shape[2], g.shape[3]
    dw = np.zeros((cout, cin * kh * kw), dtype=g.dtype)
    step = _chunk_size(cin * kh * kw * oh * ow, x.itemsize, bsz)
    for s in range(0, bsz, step):
        cols = _im2col(_pad_hw(x[s : s + step], pad), kh, kw, stride, oh, ow)
        gr = g[s : s + step].transpose(1, 0, 2, 3).reshape(cout, -1)
        dw += gr @ cols.transpose(0, 2, 1).reshape(-1, cin * kh * kw)
    return dw.reshape(w_shape)


def conv2d_forward(x: Tensor, w: Tensor, b: Tensor | None = None,
                   stride: int = 1, pad: int = 0) -> Tensor:
    """Standard cross-correlation. x[B,Cin,H,W], w[Cout,Cin,kh,kw]."""
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d expects 4D input and kernel, got {x.shape}, {w.shape}")
    y = _conv2d_data(x.data, w.data, stride, pad)
    if b is not None:
        if b.shape != (w.shape[0],):
            raise ShapeError(f"conv2d bias shape {b.shape} != ({w.shape[0]},)")
        y += b.data[None, :, None, None]
    parents = (x, w) if b is None else (x, w, b)
    if not _recording(*parents):
        return Tensor(y)

    x_shape, w_shape = x.shape, w.shape

    def _bw(g):
        if x.requires_grad:
            x._accumulate(_conv2d_dx(g, w.data, x_shape, stride, pad))
        if w.requires_grad:
            w._accumulate(_conv2d_dw(g, x.data, w_shape, stride, pad))
        if b is not None and b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2, 3)))

    return _node(y, parents, _bw)


def _tconv_out_size(h: int, w: int, kh: int, kw: int, stride: int, pad: int) -> tuple[int, int]:
    oh = (h - 1) * stride - 2 * pad + kh
    ow = (w - 1) * stride - 2 * pad + kw
    if oh < 1 or ow < 1:
        raise ShapeError(f"transpose conv geometry gives empty output: {oh}x{ow}")
    return oh, ow


def _tconv_data(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    bsz, cin, h, wd = x.shape
    cin2, cout, kh, kw = w.shape
    if cin != cin2:
        raise ShapeError(f"transpose conv channel mismatch: input {cin}, kernel {cin2}")
    oh, ow = _tconv_out_size(h, wd, kh, kw, stride, pad)
    wr = w.reshape(cin, cout * kh * kw)
    y = np.empty((bsz, cout, oh, ow), dtype=x.dtype)
    step = _chunk_size(cout * kh * kw * h * wd, x.itemsize, bsz)
    for s in range(0, bsz, step):
        xr = x[s : s + step].reshape(-1, cin, h * wd)
        cols = np.matmul(wr.T, xr)
        y[s : s + step] = _col2im(cols, cout, oh, ow, kh, kw, stride, pad, h, wd)
    return y


def _tconv_dx(g: np.ndarray, w: np.ndarray, x_shape, stride: int, pad: int) -> np.ndarray:
    # gradient through the scatter is a plain strided convolution of g
    bsz, cin, h, wd = x_shape
    cin2, cout, kh, kw = w.shape
    wr = w.reshape(cin, cout * kh * kw)
    dx = np.empty(x_shape, dtype=g.dtype)
    step = _chunk_size(cout * kh * kw * h * wd, g.itemsize, bsz)
    for s in range(0, bsz, step):
        cols = _im2col(_pad_hw(g[s : s + step], pad), kh, kw, stride, h, wd)
        dx[s : s + step] = np.matmul(wr, cols).reshape(-1, cin, h, wd)
    return dx


def _tconv_dw(g: np.ndarray, x: np.ndarray, w_shape, stride: int, pad: int) -> np.ndarray:
    bsz, cin, h, wd = x.shape
    _, cout, kh, kw = w_shape
    dw = np.zeros((cin, cout * kh * kw), dtype=g.dtype)
    step = _chunk_size(cout * kh * kw * h * wd, x.itemsize, bsz)
    for s in range(0, bsz, step):
        cols = _im2col(_pad_hw(g[s : s + step], pad), kh, kw, stride, h, wd)
        xr = x[s : s + step].transpose(1, 0, 2, 3).reshape(cin, -1)
        dw += xr @ cols.transpose(0, 2, 1).reshape(-1, cout * kh * kw)
    return dw.reshape(w_shape)


def conv_transpose2d_forward(x: Tensor, w: Tensor, b: Tensor | None = None,
                             stride: int = 2, pad: int = 1) -> Tensor:
    """Transpose convolution. x[B,Cin,H,W], w[Cin,Cout,kh,kw].

    With kernel 4, stride 2, pad 1 the spatial size exactly doubles.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"transpose conv expects 4D input and kernel, got {x.shape}, {w.shape}")
    y = _tconv_data(x.data, w.data, stride, pad)
    if b is not None:
        if b.shape != (w.shape[1],):
            raise ShapeError(f"transpose conv bias shape {b.shape} != ({w.shape[1]},)")
        y += b.data[None, :, None, None]
    parents = (x, w) if b is None else (x, w, b)
    if not _recording(*parents):
        return Tensor(y)

    x_shape, w_shape = x.shape, w.shape

    def _bw(g):
        if x.requires_grad:
            x._accumulate(_tconv_dx(g, w.data, x_shape, stride, pad))
        if w.requires_grad:
            w._accumulate(_tconv_dw(g, x.data, w_shape, stride, pad))
        if b is not None and b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2, 3)))

    return _node(y, parents, _bw)


# ---------------------------------------------------------------------------
# batch normalization

class RunningStats:
    """Per-channel running mean/variance buffers used in eval mode."""

    def __init__(self, channels: int, dtype=np.float32):
        self.mean = np.zeros(channels, dtype=dtype)
        self.var = np.ones(channels, dtype=dtype)

    def copy(self) -> "RunningStats":
        out = RunningStats(len(self.mean), dtype=self.mean.dtype)
        out.mean = self.mean.copy()
        out.var = self.var.copy()
        return out


def batchnorm2d(x: Tensor, gamma: Tensor, beta: Tensor, stats: RunningStats,
                training: bool, momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """Per-channel normalization over (batch, height, width).

    Train mode normalizes by batch statistics and updates `stats` in place
    (unbiased variance for the running buffer). Eval mode reads `stats`.
    """
    if x.ndim != 4:
        raise ShapeError(f"batchnorm2d expects [B,C,H,W], got {x.shape}")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batchnorm2d affine shapes {gamma.shape}/{beta.shape} != ({c},)")

    if not training:
        inv = 1.0 / np.sqrt(stats.var.astype(x.dtype) + eps)
        xhat = (x.data - stats.mean.astype(x.dtype)[None, :, None, None]) * inv[None, :, None, None]
        y = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]
        if not _recording(x, gamma, beta):
            return Tensor(y)

        def _bw_eval(g):
            if gamma.requires_grad:
                gamma._accumulate((g * xhat).sum(axis=(0, 2, 3)))
            if beta.requires_grad:
                beta._accumulate(g.sum(axis=(0, 2, 3)))
            if x.requires_grad:
                x._accumulate(g * (gamma.data * inv)[None, :, None, None])

        return _node(y, (x, gamma, beta), _bw_eval)

    m = x.shape[0] * x.shape[2] * x.shape[3]
    if m < 2:
        raise ShapeError("batchnorm2d train mode needs at least 2 elements per channel")
    mu = x.data.mean(axis=(0, 2, 3))
    var = x.data.var(axis=(0, 2, 3))
    inv = 1.0 / np.sqrt(var + eps)
    xc = x.data - mu[None, :, None, None]
    xhat = xc * inv[None, :, None, None]
    y = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]

    unbiased = var * (m / (m - 1))
    stats.mean[:] = (1.0 - momentum) * stats.mean + momentum * mu.astype(stats.mean.dtype)
    stats.var[:] = (1.0 - momentum) * stats.var + momentum * unbiased.astype(stats.var.dtype)

    if not _recording(x, gamma, beta):
        return Tensor(y)

    def _bw_train(g):
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).sum(axis=(0, 2, 3)))
        if beta.requires_grad:
            beta._accumulate(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gxh = g * gamma.data[None, :, None, None]
            sum_gxh = gxh.sum(axis=(0, 2, 3))
            sum_gxh_xhat = (gxh * xhat).sum(axis=(0, 2, 3))
            dx = (inv[None, :, None, None] / m) * (
                m * gxh
                - sum_gxh[None, :, None, None]
                - xhat * sum_gxh_xhat[None, :, None, None]
            )
            x._accumulate(dx)

    return _node(y, (x, gamma, beta), _bw_train)
