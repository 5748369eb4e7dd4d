"""Finite-difference verification of every kernel gradient.

For each kernel a scalar functional L(x) = sum(c * f(x)) with a fixed random
cotangent c is compared against central differences, elementwise, over many
seeded trials on small tensors. Used by the ``gradcheck`` CLI command; the
test suite carries its own independent copy of the same idea.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .seeding import derive_rng

Array = np.ndarray


@dataclass
class GradCheckResult:
    kernel: str
    trials: int
    max_rel_err: float
    passed: bool


def _rel_err(analytic: Array, fd: Array) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-6)
    return float(np.max(np.abs(analytic - fd) / denom))


def _central_diff(f, x: Array, h: float) -> Array:
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = f()
        flat[i] = orig - h
        lo = f()
        flat[i] = orig
        gf[i] = (hi - lo) / (2.0 * h)
    return g


def _spread_values(rng, size: int) -> Array:
    # distinct, well-separated values so max/relu kinks sit far from the probe
    vals = (rng.permutation(size) + 1.0) * 0.05
    return vals * rng.choice([-1.0, 1.0], size=size)


def _check_conv(rng, h):
    # tensors stay at or below 64 elements so the FD sweep is quick
    n, c, o = rng.integers(1, 3), rng.integers(1, 3), rng.integers(1, 3)
    hh = int(rng.integers(3, 5))
    ww = int(rng.integers(3, 5))
    k = int(rng.integers(1, min(hh, ww) + 1))
    stride = int(rng.integers(1, 3))
    pad = int(rng.integers(0, 2))
    x = rng.standard_normal((int(n), int(c), hh, ww))
    params = kernels.ConvParams(
        rng.standard_normal((int(o), int(c), k, k)),
        rng.standard_normal(int(o)),
        stride,
        pad,
    )
    try:
        out = kernels.conv2d(x, params)
    except kernels.ShapeError:
        return None  # degenerate geometry for this draw; skip
    cot = rng.standard_normal(out.shape)
    dx, dw, db = kernels.conv2d_backward(cot, x, params)
    errs = []
    for tensor, grad in ((x, dx), (params.weight, dw), (params.bias, db)):
        fd = _central_diff(lambda: float((kernels.conv2d(x, params) * cot).sum()), tensor, h)
        errs.append(_rel_err(grad, fd))
    return max(errs)


def _check_maxpool(rng, h):
    n, c = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    hh = int(rng.integers(3, 5))
    ww = int(rng.integers(3, 5))
    k = int(rng.integers(1, min(hh, ww) + 1))
    stride = int(rng.integers(1, 3))
    x = _spread_values(rng, n * c * hh * ww).reshape(n, c, hh, ww)
    out, idx = kernels.maxpool2d(x, k, stride)
    cot = rng.standard_normal(out.shape)
    dx = kernels.maxpool2d_backward(cot, idx, x.shape)
    fd = _central_diff(
        lambda: float((kernels.maxpool2d(x, k, stride)[0] * cot).sum()), x, h
    )
    return _rel_err(dx, fd)


def _check_linear(rng, h):
    b, fin, fout = int(rng.integers(1, 5)), int(rng.integers(1, 6)), int(rng.integers(1, 5))
    x = rng.standard_normal((b, fin))
    w = rng.standard_normal((fout, fin))
    bias = rng.standard_normal(fout)
    cot = rng.standard_normal((b, fout))
    dx, dw, db = kernels.linear_backward(cot, x, w)
    errs = []
    for tensor, grad in ((x, dx), (w, dw), (bias, db)):
        fd = _central_diff(lambda: float((kernels.linear(x, w, bias) * cot).sum()), tensor, h)
        errs.append(_rel_err(grad, fd))
    return max(errs)


def _check_relu(rng, h):
    size = int(rng.integers(2, 65))
    x = _spread_values(rng, size)
    cot = rng.standard_normal(size)
    dx = kernels.relu_backward(cot, x)
    fd = _central_diff(lambda: float((kernels.relu(x) * cot).sum()), x, h)
    return _rel_err(dx, fd)


def _check_softmax(rng, h):
    b, d = int(rng.integers(1, 5)), int(rng.integers(2, 9))
    x = rng.standard_normal((b, d))
    cot = rng.standard_normal((b, d))
    dx = kernels.softmax_backward(cot, kernels.softmax(x))
    fd = _central_diff(lambda: float((kernels.softmax(x) * cot).sum()), x, h)
    return _rel_err(dx, fd)


def _check_mse(rng, h):
    size = int(rng.integers(1, 65))
    pred = rng.standard_normal(size)
    target = rng.standard_normal(size)
    dp = kernels.mse_loss_grad(pred, target)
    fd = _central_diff(lambda: kernels.mse_loss(pred, target), pred, h)
    return _rel_err(dp, fd)


def _check_cross_entropy(rng, h):
    b, d = int(rng.integers(1, 5)), int(rng.integers(2, 9))
    logits = rng.standard_normal((b, d))
    labels = rng.integers(0, d, size=b)
    dl = kernels.cross_entropy_grad(logits, labels)
    fd = _central_diff(lambda: kernels.cross_entropy_loss(logits, labels), logits, h)
    return _rel_err(dl, fd)


def _check_resize(rng, h):
    c = int(rng.integers(1, 3))
    ih, iw = int(rng.integers(2, 6)), int(rng.integers(2, 6))
    oh, ow = int(rng.integers(1, 7)), int(rng.integers(1, 7))
    img = rng.standard_normal((c, ih, iw))
    cot = rng.standard_normal((c, oh, ow))
    danalytic = kernels.resize_bilinear_backward(cot, ih, iw)
    fd = _central_diff(
        lambda: float((kernels.resize_bilinear(img, oh, ow) * cot).sum()), img, h
    )
    return _rel_err(danalytic, fd)


_CHECKS = {
    "conv2d": _check_conv,
    "maxpool2d": _check_maxpool,
    "linear": _check_linear,
    "relu": _check_relu,
    "softmax": _check_softmax,
    "mse_loss": _check_mse,
    "cross_entropy_loss": _check_cross_entropy,
    "resize_bilinear": _check_resize,
}

KERNEL_NAMES = tuple(_CHECKS)


def check_kernel(
    name: str,
    trials: int = 100,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    seed: int = 0,
    corrupt: bool = False,
) -> GradCheckResult:
    """Run the finite-difference check for one kernel over seeded trials.

    ``corrupt`` skews the reported analytic error (test hook proving the
    harness can fail).
    """
    fn = _CHECKS[name]
    worst = 0.0
    done = 0
    trial = 0
    while done < trials and trial < 10 * trials:
        rng = derive_rng(seed, "gradcheck", name, trial)
        trial += 1
        err = fn(rng, step)
        if err is None:
            continue
        done += 1
        worst = max(worst, err)
    if corrupt:
        worst += 10.0 * tolerance
    return GradCheckResult(name, trials, worst, worst < tolerance)


def run_gradcheck(
    trials: int = 100,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    seed: int = 0,
    corrupt: str | None = None,
) -> list[GradCheckResult]:
    """Check every kernel; returns one result row per kernel."""
    return [
        check_kernel(
            name, trials=trials, step=step, tolerance=tolerance, seed=seed,
            corrupt=(name == corrupt),
        )
        for name in KERNEL_NAMES
    ]
