"""Dense float64 tensor kernels with exact gradient counterparts.

Every forward operation here has a matching ``*_backward`` (or ``*_grad``)
function returning analytic derivatives, verified against central finite
differences by the test suite and the ``gradcheck`` command.

Conventions:
  - images and activations are float64 arrays in (batch, channel, height,
    width) layout; convolution is cross-correlation (no kernel flip)
  - forward results for one image never depend on the rest of the batch,
    bit for bit; batched inputs are therefore processed image by image
    (the GEMM library dispatches differently per matrix shape, so a
    whole-batch GEMM would not honour that contract)
  - reductions run in a fixed order, so results are reproducible
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import ShapeError

Array = np.ndarray


@dataclass(frozen=True)
class ConvParams:
    """Convolution filter bank: weight (out_ch, in_ch, kh, kw), bias (out_ch)."""

    weight: Array
    bias: Array
    stride: int = 1
    padding: int = 0


def conv_output_hw(h: int, w: int, kh: int, kw: int, stride: int, padding: int):
    """Output spatial extent of a conv/pool window scan, floor convention."""
    hp = h + 2 * padding
    wp = w + 2 * padding
    if kh > hp:
        raise ShapeError("kernel_h", f"<= {hp}", kh, context="conv2d")
    if kw > wp:
        raise ShapeError("kernel_w", f"<= {wp}", kw, context="conv2d")
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError("output_hw", ">= 1", (oh, ow), context="conv2d")
    return oh, ow


def _im2col(img: Array, kh: int, kw: int, stride: int, oh: int, ow: int) -> Array:
    # img: one padded image (C, Hp, Wp) -> window matrix (oh*ow, C*kh*kw)
    c = img.shape[0]
    sc, sh, sw = img.strides
    view = as_strided(
        img, (oh, ow, c, kh, kw), (sh * stride, sw * stride, sc, sh, sw)
    )
    return view.reshape(oh * ow, c * kh * kw)


def _check_conv(x: Array, params: ConvParams) -> None:
    if x.ndim != 4:
        raise ShapeError("input.ndim", 4, x.ndim, context="conv2d")
    if params.weight.ndim != 4:
        raise ShapeError("weight.ndim", 4, params.weight.ndim, context="conv2d")
    if x.shape[1] != params.weight.shape[1]:
        raise ShapeError(
            "in_channels", params.weight.shape[1], x.shape[1], context="conv2d"
        )
    if params.bias.shape != (params.weight.shape[0],):
        raise ShapeError(
            "bias", (params.weight.shape[0],), params.bias.shape, context="conv2d"
        )


def conv2d(x: Array, params: ConvParams) -> Array:
    """Cross-correlate a batch of images with a filter bank, plus bias."""
    _check_conv(x, params)
    n, _, h, w = x.shape
    o, c, kh, kw = params.weight.shape
    oh, ow = conv_output_hw(h, w, kh, kw, params.stride, params.padding)
    p = params.padding
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    w2 = np.ascontiguousarray(params.weight.reshape(o, c * kh * kw).T)
    out = np.empty((n, o, oh, ow))
    for i in range(n):
        cols = _im2col(xp[i], kh, kw, params.stride, oh, ow)
        out[i] = (cols @ w2).T.reshape(o, oh, ow)
    out += params.bias.reshape(1, o, 1, 1)
    return out


def conv2d_backward(grad: Array, x: Array, params: ConvParams):
    """Gradients of conv2d w.r.t. input, weight, and bias."""
    _check_conv(x, params)
    n, _, h, w = x.shape
    o, c, kh, kw = params.weight.shape
    s = params.stride
    oh, ow = conv_output_hw(h, w, kh, kw, s, params.padding)
    if grad.shape != (n, o, oh, ow):
        raise ShapeError("grad", (n, o, oh, ow), grad.shape, context="conv2d_backward")
    p = params.padding
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    w2 = params.weight.reshape(o, c * kh * kw)
    db = grad.sum(axis=(0, 2, 3))
    dw2 = np.zeros((c * kh * kw, o))
    dxp = np.zeros_like(xp)
    for i in range(n):
        cols = _im2col(xp[i], kh, kw, s, oh, ow)
        g2 = grad[i].reshape(o, oh * ow).T  # (oh*ow, o)
        dw2 += cols.T @ g2
        dcols = (g2 @ w2).reshape(oh, ow, c, kh, kw)
        for a in range(kh):
            for b in range(kw):
                dxp[i, :, a : a + s * oh : s, b : b + s * ow : s] += dcols[
                    :, :, :, a, b
                ].transpose(2, 0, 1)
    dx = dxp[:, :, p : p + h, p : p + w] if p else dxp
    dw = dw2.T.reshape(o, c, kh, kw)
    return dx, dw, db


def maxpool2d(x: Array, k: int, stride: int):
    """Window maximum over (k, k) patches. Returns (output, argmax index map).

    The index map holds flat positions into ``x``; ties go to the first
    element in row-major scan order (numpy argmax convention).
    """
    if x.ndim != 4:
        raise ShapeError("input.ndim", 4, x.ndim, context="maxpool2d")
    n, c, h, w = x.shape
    if k > h or k > w:
        raise ShapeError("pool_window", f"<= {min(h, w)}", k, context="maxpool2d")
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    sn, sc, sh, sw = x.strides
    view = as_strided(
        x, (n, c, oh, ow, k, k), (sn, sc, sh * stride, sw * stride, sh, sw)
    )
    flat = view.reshape(n, c, oh, ow, k * k)
    win = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, win[..., None], axis=-1)[..., 0]
    di, dj = np.divmod(win, k)
    iy = np.arange(oh).reshape(1, 1, oh, 1) * stride + di
    ix = np.arange(ow).reshape(1, 1, 1, ow) * stride + dj
    nn = np.arange(n).reshape(n, 1, 1, 1)
    cc = np.arange(c).reshape(1, c, 1, 1)
    idx = ((nn * c + cc) * h + iy) * w + ix
    return out, idx


def maxpool2d_backward(grad: Array, idx: Array, input_shape) -> Array:
    """Route upstream gradient to the stored argmax positions."""
    if grad.shape != idx.shape:
        raise ShapeError("grad", idx.shape, grad.shape, context="maxpool2d_backward")
    dx = np.zeros(int(np.prod(input_shape)))
    np.add.at(dx, idx.ravel(), grad.ravel())
    return dx.reshape(input_shape)


def linear(x: Array, weight: Array, bias: Array) -> Array:
    """Affine map y = x @ weight.T + bias for x (batch, in), weight (out, in)."""
    if x.ndim != 2:
        raise ShapeError("input.ndim", 2, x.ndim, context="linear")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError("in_features", weight.shape[1], x.shape[1], context="linear")
    if bias.shape != (weight.shape[0],):
        raise ShapeError("bias", (weight.shape[0],), bias.shape, context="linear")
    # einsum (non-optimized) keeps each row's reduction independent of the
    # batch size, which the batched GEMM path does not guarantee bitwise
    return np.einsum("bi,oi->bo", x, weight) + bias


def linear_backward(grad: Array, x: Array, weight: Array):
    """Gradients of linear w.r.t. input, weight, and bias."""
    if grad.shape != (x.shape[0], weight.shape[0]):
        raise ShapeError(
            "grad", (x.shape[0], weight.shape[0]), grad.shape, context="linear_backward"
        )
    dx = grad @ weight
    dw = grad.T @ x
    db = grad.sum(axis=0)
    return dx, dw, db


def relu(x: Array) -> Array:
    """Elementwise max(0, x)."""
    return np.maximum(x, 0.0)


def relu_backward(grad: Array, x: Array) -> Array:
    # subgradient at 0 is defined as 0
    return grad * (x > 0.0)


def softmax(logits: Array) -> Array:
    """Row-wise softmax with max-subtraction for stability."""
    if logits.ndim != 2:
        raise ShapeError("logits.ndim", 2, logits.ndim, context="softmax")
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(grad: Array, probs: Array) -> Array:
    """Gradient of softmax given upstream gradient and the forward output."""
    return (grad - (grad * probs).sum(axis=1, keepdims=True)) * probs


def mse_loss(pred: Array, target: Array) -> float:
    """Mean of squared elementwise differences."""
    if pred.shape != target.shape:
        raise ShapeError("target", pred.shape, target.shape, context="mse_loss")
    d = pred - target
    return float(np.mean(d * d))


def mse_loss_grad(pred: Array, target: Array) -> Array:
    if pred.shape != target.shape:
        raise ShapeError("target", pred.shape, target.shape, context="mse_loss")
    return 2.0 * (pred - target) / pred.size


def cross_entropy_loss(logits: Array, labels: Array) -> float:
    """Mean negative log softmax probability of the true class, fused form."""
    if logits.ndim != 2:
        raise ShapeError("logits.ndim", 2, logits.ndim, context="cross_entropy_loss")
    labels = np.asarray(labels)
    if labels.shape != (logits.shape[0],):
        raise ShapeError(
            "labels", (logits.shape[0],), labels.shape, context="cross_entropy_loss"
        )
    d = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= d):
        raise ValueError(f"class label out of range [0, {d})")
    m = logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(logits - m).sum(axis=1)) + m[:, 0]
    picked = logits[np.arange(logits.shape[0]), labels]
    return float(np.mean(lse - picked))


def cross_entropy_grad(logits: Array, labels: Array) -> Array:
    labels = np.asarray(labels)
    g = softmax(logits)
    g[np.arange(logits.shape[0]), labels] -= 1.0
    return g / logits.shape[0]


def _resize_grid(in_size: int, out_size: int):
    # align-corners: first and last output samples map onto the input corners
    if out_size == 1:
        pos = np.zeros(1)
    else:
        pos = np.arange(out_size) * ((in_size - 1) / (out_size - 1))
    lo = np.minimum(np.floor(pos).astype(np.intp), in_size - 1)
    hi = np.minimum(lo + 1, in_size - 1)
    frac = pos - lo
    return lo, hi, frac


def resize_bilinear(image: Array, out_h: int, out_w: int) -> Array:
    """Bilinear resize of a (channels, h, w) image, align-corners convention."""
    if image.ndim != 3:
        raise ShapeError("image.ndim", 3, image.ndim, context="resize_bilinear")
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be >= 1")
    _, h, w = image.shape
    if (out_h, out_w) == (h, w):
        return image.copy()
    y0, y1, fy = _resize_grid(h, out_h)
    x0, x1, fx = _resize_grid(w, out_w)
    wy = fy[:, None]
    wx = fx[None, :]
    top = image[:, y0][:, :, x0] * (1 - wx) + image[:, y0][:, :, x1] * wx
    bot = image[:, y1][:, :, x0] * (1 - wx) + image[:, y1][:, :, x1] * wx
    return top * (1 - wy) + bot * wy


def resize_bilinear_backward(grad: Array, in_h: int, in_w: int) -> Array:
    """Gradient of resize_bilinear w.r.t. the input image."""
    c, oh, ow = grad.shape
    y0, y1, fy = _resize_grid(in_h, oh)
    x0, x1, fx = _resize_grid(in_w, ow)
    wy = fy[:, None]
    wx = fx[None, :]
    dimg = np.zeros((c, in_h, in_w))
    ch = np.arange(c)[:, None, None]
    for ys, wys in ((y0, 1 - wy), (y1, wy)):
        for xs, wxs in ((x0, 1 - wx), (x1, wx)):
            np.add.at(dimg, (ch, ys[None, :, None], xs[None, None, :]), grad * wys * wxs)
    return dimg
