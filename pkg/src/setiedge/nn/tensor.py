"""A small reverse-mode autodiff engine over numpy arrays.

Tensors are logically NCHW.  Convolution-heavy ops keep their results in
channels-last memory and hand back transposed views, so the next op can
reach a contiguous (N*H*W, C) matrix for BLAS without copying.  Callers only
ever see NCHW shapes and indexing.

Reductions (bias grads, pooling, global averages) accumulate in float64.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None, name=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float32)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = tuple(parents)
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Propagate ``grad`` (defaults to ones) to every tensor in the graph."""
        if grad is None:
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=self.data.dtype)
        if grad.shape != self.shape:
            raise ValueError(f"gradient shape {grad.shape} does not match tensor shape {self.shape}")

        order, seen, stack = [], set(), [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        _accumulate(self, grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node._parents:
                    # interior node: its gradient is no longer needed
                    node.grad = None


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    # never in place: g may be a view shared with a sibling
    t.grad = g if t.grad is None else t.grad + g


def parameter(data, name=None) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=True, name=name)


def _nhwc(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a.transpose(0, 2, 3, 1))


def _nchw_view(a: np.ndarray) -> np.ndarray:
    return a.transpose(0, 3, 1, 2)


def conv_output_size(size: int, k: int, stride: int, padding: str) -> int:
    pad = k // 2 if padding == "same" else 0
    return (size + 2 * pad - k) // stride + 1


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1,
           padding: str = "same") -> Tensor:
    """2-D cross-correlation, weight shaped (C_out, C_in, kh, kw).

    ``same`` pads ``k // 2`` on each side; output size is
    ``(size + 2 * pad - k) // stride + 1``.
    """
    if padding not in ("same", "valid"):
        raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ValueError("conv2d expects a 4-D input and a 4-D weight")
    B, C, H, W = x.shape
    Cout, Cin, kh, kw = weight.shape
    if C != Cin:
        raise ValueError(f"channel mismatch: input has {C}, weight expects {Cin}")
    if bias is not None and bias.shape != (Cout,):
        raise ValueError(f"bias must have shape ({Cout},), got {bias.shape}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    ph, pw = (kh // 2, kw // 2) if padding == "same" else (0, 0)
    Ho = conv_output_size(H, kh, stride, padding)
    Wo = conv_output_size(W, kw, stride, padding)
    if Ho < 1 or Wo < 1:
        raise ValueError(f"input {H}x{W} is smaller than kernel {kh}x{kw}")

    dtype = np.result_type(x.dtype, weight.dtype)
    xn = _nhwc(x.data).astype(dtype, copy=False)
    wd = weight.data.astype(dtype, copy=False)
    geom = (B, C, H, W, Cout, kh, kw, ph, pw, Ho, Wo)
    if kh == kw == 1 and stride == 1:
        out, saved = _conv_1x1(xn, wd, geom)
        back = _conv_1x1_backward
    elif stride == 1:
        out, saved = _conv_taps(xn, wd, geom)
        back = _conv_taps_backward
    else:
        out, saved = _conv_im2col(xn, wd, stride, geom)
        back = _conv_im2col_backward
    if bias is not None:
        out += bias.data
    out = _nchw_view(out.reshape(B, Ho, Wo, Cout))
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gm = _nhwc(g).reshape(B * Ho * Wo, Cout)
        dx, dw = back(gm, wd, saved, geom, x.requires_grad)
        if weight.requires_grad:
            _accumulate(weight, np.ascontiguousarray(dw, dtype=weight.dtype))
        if bias is not None and bias.requires_grad:
            _accumulate(bias, gm.sum(axis=0, dtype=np.float64).astype(bias.dtype))
        if dx is not None:
            _accumulate(x, _nchw_view(dx).astype(x.dtype, copy=False))

    return Tensor(out, parents=parents, backward=backward)


def _conv_1x1(xn, wd, geom):
    B, C, H, W, Cout = geom[:5]
    xm = xn.reshape(B * H * W, C)
    return xm @ wd.reshape(Cout, C).T, xm


def _conv_1x1_backward(gm, wd, xm, geom, need_dx):
    B, C, H, W, Cout = geom[:5]
    dw = (gm.T @ xm).reshape(Cout, C, 1, 1)
    dx = (gm @ wd.reshape(Cout, C)).reshape(B, H, W, C) if need_dx else None
    return dx, dw


# Stride-1 path.  One GEMM of the padded input against all taps at once,
# (B*Hp*Wp, C) @ (C, kh*kw*C_out); tap (a, b) of input row (i + a, j + b)
# then lands on output (i, j).  The backward pass gathers, for every input
# position, the output grads it fed through each tap and reuses that block
# for both the weight and the input gradient.

def _conv_taps(xn, wd, geom):
    B, C, H, W, Cout, kh, kw, ph, pw, Ho, Wo = geom
    xp = np.pad(xn, ((0, 0), (ph, ph), (pw, pw), (0, 0))) if ph or pw else xn
    Hp, Wp = xp.shape[1], xp.shape[2]
    xf = xp.reshape(B * Hp * Wp, C)
    wall = wd.transpose(1, 2, 3, 0).reshape(C, kh * kw * Cout)
    big = (xf @ wall).reshape(B, Hp, Wp, kh * kw, Cout)
    out = np.zeros((B, Ho, Wo, Cout), dtype=xf.dtype)
    for a in range(kh):
        for b in range(kw):
            out += big[:, a:a + Ho, b:b + Wo, a * kw + b]
    return out, (xf, wall, Hp, Wp)


def _conv_taps_backward(gm, wd, saved, geom, need_dx):
    B, C, H, W, Cout, kh, kw, ph, pw, Ho, Wo = geom
    xf, wall, Hp, Wp = saved
    g = np.zeros((B, Hp + kh - 1, Wp + kw - 1, Cout), dtype=gm.dtype)
    g[:, kh - 1:kh - 1 + Ho, kw - 1:kw - 1 + Wo] = gm.reshape(B, Ho, Wo, Cout)
    # win[..., c, a', b'] = g[i + a', j + b']; flipping gives tap (a, b) = g[i - a, j - b]
    win = sliding_window_view(g, (kh, kw), axis=(1, 2))[..., ::-1, ::-1]
    spread = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(B * Hp * Wp, -1)
    dw = (xf.T @ spread).reshape(C, kh, kw, Cout).transpose(3, 0, 1, 2)
    dx = None
    if need_dx:
        dxp = (spread @ wall.T).reshape(B, Hp, Wp, C)
        dx = dxp[:, ph:ph + H, pw:pw + W, :]
    return dx, dw


def _conv_im2col(xn, wd, stride, geom):
    B, C, H, W, Cout, kh, kw, ph, pw, Ho, Wo = geom
    xp = np.pad(xn, ((0, 0), (ph, ph), (pw, pw), (0, 0))) if ph or pw else xn
    cols = np.empty((B, Ho, Wo, kh, kw, C), dtype=xn.dtype)
    for a in range(kh):
        for b in range(kw):
            cols[:, :, :, a, b, :] = xp[:, a:a + stride * (Ho - 1) + 1:stride,
                                        b:b + stride * (Wo - 1) + 1:stride, :]
    cols = cols.reshape(B * Ho * Wo, kh * kw * C)
    wm = wd.transpose(2, 3, 1, 0).reshape(kh * kw * C, Cout)
    return cols @ wm, (cols, wm, xp.shape, stride)


def _conv_im2col_backward(gm, wd, saved, geom, need_dx):
    B, C, H, W, Cout, kh, kw, ph, pw, Ho, Wo = geom
    cols, wm, padded_shape, stride = saved
    dw = (cols.T @ gm).reshape(kh, kw, C, Cout).transpose(3, 2, 0, 1)
    dx = None
    if need_dx:
        dcols = (gm @ wm.T).reshape(B, Ho, Wo, kh, kw, C)
        dxp = np.zeros(padded_shape, dtype=gm.dtype)
        for a in range(kh):
            for b in range(kw):
                dxp[:, a:a + stride * (Ho - 1) + 1:stride,
                    b:b + stride * (Wo - 1) + 1:stride, :] += dcols[:, :, :, a, b, :]
        dx = dxp[:, ph:ph + H, pw:pw + W, :]
    return dx, dw


_relu_recorders: list = []


class record_relu_masks:
    """Context manager collecting every ReLU mask computed inside it, in order."""

    def __enter__(self):
        self.masks = []
        _relu_recorders.append(self.masks)
        return self.masks

    def __exit__(self, *exc):
        _relu_recorders.remove(self.masks)
        return False


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    for rec in _relu_recorders:
        rec.append(mask)
    out = np.maximum(x.data, 0)

    def backward(g):
        _accumulate(x, g * mask)

    return Tensor(out, parents=(x,), backward=backward)


def avg_pool2d(x: Tensor, k: int = 2) -> Tensor:
    """Non-overlapping k x k mean pool; spatial dims must be divisible by k."""
    B, C, H, W = x.shape
    if H % k or W % k:
        raise ValueError(f"avg_pool2d: spatial dims {H}x{W} not divisible by {k}")
    Ho, Wo = H // k, W // k
    xn = _nhwc(x.data).reshape(B, Ho, k, Wo, k, C)
    out = xn.mean(axis=(2, 4), dtype=np.float64).astype(x.dtype)

    def backward(g):
        gn = _nhwc(g) / (k * k)
        full = np.broadcast_to(gn[:, :, None, :, None, :], (B, Ho, k, Wo, k, C)).reshape(B, H, W, C)
        _accumulate(x, _nchw_view(full))

    return Tensor(_nchw_view(out), parents=(x,), backward=backward)


def concat_channels(*xs: Tensor) -> Tensor:
    if not xs:
        raise ValueError("concat_channels needs at least one tensor")
    B, _, H, W = xs[0].shape
    for t in xs:
        if t.data.ndim != 4 or t.shape[0] != B or t.shape[2:] != (H, W):
            raise ValueError(f"concat_channels: shape {t.shape} incompatible with {xs[0].shape}")
    out = np.concatenate([_nhwc(t.data) for t in xs], axis=3)
    sizes = [t.shape[1] for t in xs]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(xs, bounds[:-1], bounds[1:]):
            _accumulate(t, g[:, lo:hi])

    return Tensor(_nchw_view(out), parents=xs, backward=backward)


def global_avg_pool(x: Tensor) -> Tensor:
    B, C, H, W = x.shape
    out = x.data.mean(axis=(2, 3), dtype=np.float64).astype(x.dtype)

    def backward(g):
        gn = (g / (H * W)).astype(x.dtype)
        full = np.ascontiguousarray(np.broadcast_to(gn[:, None, None, :], (B, H, W, C)))
        _accumulate(x, _nchw_view(full))

    return Tensor(out, parents=(x,), backward=backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` with weight shaped (out, in)."""
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ValueError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        if weight.requires_grad:
            _accumulate(weight, (g.T @ x.data).astype(weight.dtype, copy=False))
        if bias is not None and bias.requires_grad:
            _accumulate(bias, g.sum(axis=0, dtype=np.float64).astype(bias.dtype))
        _accumulate(x, (g @ weight.data).astype(x.dtype, copy=False))

    return Tensor(out, parents=parents, backward=backward)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood and its gradient with respect to the logits.

    Args:
        logits: (batch, n_classes) array or Tensor.
        labels: integer class indices, one per row.

    Returns:
        ``(loss, grad)``; ``grad`` has the logits' dtype and equals
        ``(softmax - onehot) / batch``.
    """
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = data.shape
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    z = data.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(logsum - z[rows, labels]))
    grad = np.exp(z - logsum[:, None])
    grad[rows, labels] -= 1.0
    grad /= n
    return loss, grad.astype(data.dtype)
