"""Minimal double-precision neural engine.

Feature maps are plain float64 arrays in (channels, rows, cols) order; a
batch stacks them along a leading axis, (batch, channels, rows, cols).
Forward functions return ``(output, cache)`` and the matching backward
function consumes the cache.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError, UsageError

# Upper bound on the number of float64 entries in one im2col buffer.
COL_BUDGET = 1 << 23


@dataclass
class ConvLayer:
    """Same-padded, stride-1 convolution with optional ReLU."""

    weights: np.ndarray  # (out_channels, in_channels, k, k)
    bias: np.ndarray  # (out_channels,)
    apply_relu: bool = True

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        w = self.weights
        if w.ndim != 4 or w.shape[2] != w.shape[3]:
            raise ConfigurationError(f"conv weights must be (out, in, k, k), got {w.shape}")
        if w.shape[2] % 2 != 1:
            raise ConfigurationError(f"kernel size must be odd, got {w.shape[2]}")
        if self.bias.shape != (w.shape[0],):
            raise ConfigurationError(f"bias shape {self.bias.shape} != ({w.shape[0]},)")

    @property
    def kernel_size(self):
        return self.weights.shape[2]

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def out_channels(self):
        return self.weights.shape[0]


@dataclass
class FCLayer:
    weights: np.ndarray  # (out_len, in_len)
    bias: np.ndarray  # (out_len,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ConfigurationError(
                f"FC weights {self.weights.shape} and bias {self.bias.shape} disagree"
            )

    @property
    def in_len(self):
        return self.weights.shape[1]

    @property
    def out_len(self):
        return self.weights.shape[0]


def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise UsageError(f"feature map must be (C, H, W) or (B, C, H, W), got shape {x.shape}")


def _bands(n_rows, per_row):
    step = max(1, COL_BUDGET // max(per_row, 1))
    for r0 in range(0, n_rows, step):
        yield r0, min(n_rows, r0 + step)


def _pad(x, p):
    if p == 0:
        return np.ascontiguousarray(x)
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def _use_shift(C, O, k, B, H, W):
    """Pick the channel-contraction path when its buffer is smaller than im2col's."""
    return k > 1 and O * (H + k - 1) * (W + k - 1) < C * H * W


def conv2d_forward(x, layer, keep_cache=True):
    """Apply ``layer`` to a feature map or batch; returns ``(output, cache)``."""
    x, squeeze = _as_batch(x)
    B, C, H, W = x.shape
    if C != layer.in_channels:
        raise ConfigurationError(f"input has {C} channels, layer expects {layer.in_channels}")
    k = layer.kernel_size
    O = layer.out_channels
    xp = _pad(x, k // 2)
    if _use_shift(C, O, k, B, H, W):
        # z[o, i, j] = sum_c w[o, c, i, j] * xp[c], then shift-and-sum over (i, j)
        wr = layer.weights.transpose(0, 2, 3, 1).reshape(O * k * k, C)
        xc = np.ascontiguousarray(xp.transpose(1, 0, 2, 3)).reshape(C, -1)
        z = (wr @ xc).reshape(O, k, k, B, H + k - 1, W + k - 1)
        acc = np.zeros((O, B, H, W))
        kernels.shift_sum(z, acc)
        out = np.ascontiguousarray(acc.transpose(1, 0, 2, 3))
    else:
        wm = layer.weights.reshape(O, -1)
        out = np.empty((B, O, H, W))
        for r0, r1 in _bands(H, C * k * k * B * W):
            col = kernels.im2col(xp, k, r0, r1)
            out[:, :, r0:r1, :] = (wm @ col).reshape(O, B, r1 - r0, W).transpose(1, 0, 2, 3)
    out += layer.bias[None, :, None, None]
    if layer.apply_relu:
        np.maximum(out, 0.0, out=out)
    cache = None
    if keep_cache:
        cache = {"xp": xp, "layer": layer, "out": out, "squeeze": squeeze}
    return (out[0] if squeeze else out), cache


def conv2d_backward(grad_out, cache, need_input_grad=True):
    """Return ``(grad_input, grad_weights, grad_bias)`` for a cached forward call.

    ``grad_input`` is None when ``need_input_grad`` is false.
    """
    if not cache:
        raise UsageError("conv2d_backward needs the cache from a conv2d_forward call")
    layer = cache["layer"]
    xp = cache["xp"]
    g = np.asarray(grad_out, dtype=np.float64)
    if cache["squeeze"]:
        g = g[None]
    if g.shape != cache["out"].shape:
        raise UsageError(f"grad shape {g.shape} != output shape {cache['out'].shape}")
    if layer.apply_relu:
        g = np.where(cache["out"] > 0.0, g, 0.0)
    B, O, H, W = g.shape
    k = layer.kernel_size
    C = layer.in_channels
    p = k // 2
    db = g.sum(axis=(0, 2, 3))
    dx = None
    if _use_shift(C, O, k, B, H, W):
        gt = np.ascontiguousarray(g.transpose(1, 0, 2, 3))
        dz = np.zeros((O, k, k, B, H + k - 1, W + k - 1))
        kernels.shift_spread(gt, dz)
        dz = dz.reshape(O * k * k, -1)
        xc = np.ascontiguousarray(xp.transpose(1, 0, 2, 3)).reshape(C, -1)
        dw = (dz @ xc.T).reshape(O, k, k, C).transpose(0, 3, 1, 2)
        if need_input_grad:
            wr = layer.weights.transpose(0, 2, 3, 1).reshape(O * k * k, C)
            dxp = (wr.T @ dz).reshape(C, B, H + k - 1, W + k - 1)
            dx = dxp[:, :, p : p + H, p : p + W].transpose(1, 0, 2, 3)
    else:
        wm = layer.weights.reshape(O, -1)
        dw = np.zeros_like(wm)
        dxp = np.zeros(xp.shape) if need_input_grad else None
        for r0, r1 in _bands(H, C * k * k * B * W):
            col = kernels.im2col(xp, k, r0, r1)
            gb = np.ascontiguousarray(g[:, :, r0:r1, :].transpose(1, 0, 2, 3)).reshape(O, -1)
            dw += gb @ col.T
            if need_input_grad:
                kernels.col2im_add(wm.T @ gb, dxp, k, r0, r1)
        dw = dw.reshape(layer.weights.shape)
        if need_input_grad:
            dx = dxp[:, :, p : p + H, p : p + W]
    if dx is not None:
        dx = np.ascontiguousarray(dx)
        if cache["squeeze"]:
            dx = dx[0]
    return dx, np.ascontiguousarray(dw), db


def fc_forward(x, layer, keep_cache=True):
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None]
    if x.ndim != 2 or x.shape[1] != layer.in_len:
        raise ConfigurationError(f"FC input length {x.shape[-1]} != {layer.in_len}")
    out = x @ layer.weights.T + layer.bias
    cache = {"x": x, "layer": layer, "squeeze": squeeze} if keep_cache else None
    return (out[0] if squeeze else out), cache


def fc_backward(grad_out, cache):
    if not cache:
        raise UsageError("fc_backward needs the cache from an fc_forward call")
    layer = cache["layer"]
    g = np.asarray(grad_out, dtype=np.float64)
    if cache["squeeze"]:
        g = g[None]
    dx = g @ layer.weights
    dw = g.T @ cache["x"]
    db = g.sum(axis=0)
    return (dx[0] if cache["squeeze"] else dx), dw, db


def residual_add(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigurationError(f"residual shapes differ: {a.shape} vs {b.shape}")
    return a + b


def residual_add_backward(grad_out):
    """The sum rule: both branches receive ``grad_out`` unchanged."""
    return grad_out, grad_out


def mse_loss(pred, target):
    """Batch-mean of per-sample squared error norms; the leading axis is the batch.

    Returns ``(loss, grad)`` with ``grad = 2 * (pred - target) / k``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ConfigurationError(f"prediction {pred.shape} and target {target.shape} differ")
    if pred.ndim == 0:
        raise UsageError("mse_loss needs a leading batch axis")
    k = pred.shape[0]
    diff = pred - target
    return float(np.sum(diff * diff)) / k, (2.0 / k) * diff


@dataclass
class OptimState:
    """Momentum SGD state; ``lrs`` maps parameter names to learning rates."""

    momentum: float
    lrs: dict
    velocity: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must be in [0, 1), got {self.momentum}")


def sgd_step(params, grads, state):
    """In-place update ``v = mu * v - lr * g; p = p + v`` for every parameter."""
    for name, p in params.items():
        if name not in state.lrs:
            raise ConfigurationError(f"no learning rate for parameter {name!r}")
        g = grads[name]
        if g.shape != p.shape:
            raise ConfigurationError(f"gradient for {name!r} has shape {g.shape}, want {p.shape}")
        v = state.velocity.get(name)
        if v is None:
            v = state.velocity[name] = np.zeros_like(p)
        elif v.shape != p.shape:
            raise ConfigurationError(f"velocity for {name!r} has shape {v.shape}, want {p.shape}")
        v *= state.momentum
        v -= state.lrs[name] * g
        p += v
    return params


def grad_check(network, x, target, max_params=None, h=1e-5, seed=0):
    """Worst relative error between analytic and central-difference gradients.

    ``network`` must expose ``params`` (name -> array, mutated in place) and
    ``loss_and_grads(x, target) -> (loss, grads)``. With ``max_params`` set,
    a seeded random subset of that many scalar parameters is checked.
    """
    _, grads = network.loss_and_grads(x, target)
    index = [(name, i) for name, p in network.params.items() for i in range(p.size)]
    if max_params is not None and max_params < len(index):
        pick = np.random.default_rng(seed).choice(len(index), size=max_params, replace=False)
        index = [index[j] for j in sorted(pick)]
    worst = 0.0
    for name, i in index:
        flat = network.params[name].reshape(-1)
        orig = flat[i]
        flat[i] = orig + h
        lp, _ = network.loss_and_grads(x, target, need_grads=False)
        flat[i] = orig - h
        lm, _ = network.loss_and_grads(x, target, need_grads=False)
        flat[i] = orig
        numeric = (lp - lm) / (2.0 * h)
        analytic = grads[name].reshape(-1)[i]
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
