"""Independent scalar-loop references used as oracles by the test suite.

These deliberately share no code with the library kernels: plain Python
loops over numpy scalars, nothing vectorized.
"""
import numpy as np


def conv2d_reference(x, w, b=None, stride=1, pad=0):
    """Direct six-loop cross-correlation."""
    bsz, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = np.zeros((bsz, cin, h + 2 * pad, wd + 2 * pad), dtype=np.float64)
    xp[:, :, pad : pad + h, pad : pad + wd] = x
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    y = np.zeros((bsz, cout, oh, ow), dtype=np.float64)
    for n in range(bsz):
        for co in range(cout):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for ci in range(cin):
                        for u in range(kh):
                            for v in range(kw):
                                acc += xp[n, ci, i * stride + u, j * stride + v] * w[co, ci, u, v]
                    y[n, co, i, j] = acc + (b[co] if b is not None else 0.0)
    return y


def conv_transpose2d_reference(x, w, b=None, stride=2, pad=1):
    """Scatter-add: every input pixel stamps a weighted kernel into the output."""
    bsz, cin, h, wd = x.shape
    _, cout, kh, kw = w.shape
    oh = (h - 1) * stride - 2 * pad + kh
    ow = (wd - 1) * stride - 2 * pad + kw
    full = np.zeros((bsz, cout, oh + 2 * pad, ow + 2 * pad), dtype=np.float64)
    for n in range(bsz):
        for ci in range(cin):
            for i in range(h):
                for j in range(wd):
                    for co in range(cout):
                        for u in range(kh):
                            for v in range(kw):
                                full[n, co, i * stride + u, j * stride + v] += x[n, ci, i, j] * w[ci, co, u, v]
    y = full[:, :, pad : pad + oh, pad : pad + ow]
    if b is not None:
        y = y + b[None, :, None, None]
    return y


def numeric_gradient(f, arrays, index, h=1e-4):
    """Central finite differences of scalar-valued f w.r.t. arrays[index]."""
    target = arrays[index]
    grad = np.zeros_like(target, dtype=np.float64)
    it = np.nditer(target, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = target[idx]
        target[idx] = orig + h
        fp = f(*arrays)
        target[idx] = orig - h
        fm = f(*arrays)
        target[idx] = orig
        grad[idx] = (fp - fm) / (2.0 * h)
        it.iternext()
    return grad


def relative_error(a, b, floor=1e-6):
    num = np.abs(a - b)
    den = np.maximum(np.abs(a) + np.abs(b), floor)
    return float((num / den).max())
