"""Layer primitives: forward evaluation and exact gradients.

Public functions operate on single vectors/blocks as documented; the
batched paths used by network evaluation live in the `_*_batch` helpers.
All math is float64.
"""

import numpy as np
from scipy.special import expit

from ..errors import ConfigError, ShapeError
from .. import _kernels


def maxout_forward(pre_activations, group_size):
    """Max over disjoint groups of `group_size` consecutive activations.

    Returns (outputs, winners); winners are within-group indices of the
    maximum, lowest index on ties. Works on the last axis, so both single
    vectors and (N, D) batches are accepted.
    """
    a = np.asarray(pre_activations, dtype=np.float64)
    if group_size < 1:
        raise ConfigError("group_size must be >= 1")
    if a.shape[-1] % group_size != 0:
        raise ShapeError(
            f"activation length {a.shape[-1]} not divisible by group size {group_size}"
        )
    grouped = a.reshape(a.shape[:-1] + (a.shape[-1] // group_size, group_size))
    winners = grouped.argmax(axis=-1)
    outputs = np.take_along_axis(grouped, winners[..., None], axis=-1)[..., 0]
    return outputs, winners


def maxout_backward(grad_out, winners, group_size):
    """Route each output gradient to its winning activation."""
    g = np.asarray(grad_out, dtype=np.float64)
    winners = np.asarray(winners)
    if winners.shape != g.shape:
        raise ShapeError("grad_out and winners shapes differ")
    if np.any(winners < 0) or np.any(winners >= group_size):
        raise ValueError("winner index outside its group")
    grouped = np.zeros(g.shape + (group_size,))
    np.put_along_axis(grouped, winners[..., None], g[..., None], axis=-1)
    return grouped.reshape(g.shape[:-1] + (g.shape[-1] * group_size,))


def conv2d_forward(block, weights, bias, stride=1):
    """Valid cross-correlation of one H x W x C block with F filters.

    weights: (F, window_h, window_w, C); returns (H', W', F) feature maps.
    """
    x = np.asarray(block, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if x.ndim != 3 or w.ndim != 4:
        raise ShapeError("conv2d expects an H x W x C block and F x kh x kw x C weights")
    if w.shape[1] > x.shape[0] or w.shape[2] > x.shape[1]:
        raise ShapeError(
            f"window {w.shape[1]}x{w.shape[2]} larger than input {x.shape[0]}x{x.shape[1]}"
        )
    if w.shape[3] != x.shape[2]:
        raise ShapeError("channel counts differ")
    y = _kernels.conv2d_forward(
        np.ascontiguousarray(x[None]), np.ascontiguousarray(w),
        np.ascontiguousarray(bias, dtype=np.float64), stride,
    )
    return y[0]


def maxpool_forward(maps, pool_h, pool_w):
    """Per-window maximum over non-overlapping pool_h x pool_w windows.

    maps: (H, W, F). Edge remainders are truncated. Returns (pooled, winners)
    with winners holding flat r*W+c input positions.
    """
    x = np.asarray(maps, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError("maxpool expects H x W x F maps")
    y, idx = _kernels.maxpool_forward(np.ascontiguousarray(x[None]), pool_h, pool_w)
    return y[0], idx[0]


def unfolded_rnn_forward(rows, w, u, b, steps):
    """Recurrence over fixed windows of frames ordered t..t+steps-1.

    Each row holds `steps` concatenated frames. Frames are processed
    backwards in time (the last frame first, ending at frame t):
    h <- sigmoid(W x_k + U h + b), h_0 = 0. Returns the final hidden
    state for each row, shape (n, hidden).
    """
    x = np.asarray(rows, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if steps < 1:
        raise ShapeError(f"steps must be >= 1, got {steps}")
    if x.ndim != 2 or x.shape[1] % steps != 0:
        raise ShapeError(
            f"rows of width {x.shape[-1]} cannot hold {steps} equal frames"
        )
    frame_dim = x.shape[1] // steps
    if frame_dim != w.shape[1]:
        raise ShapeError(f"frame dim {frame_dim} does not match W columns {w.shape[1]}")
    frames = x.reshape(x.shape[0], steps, frame_dim)
    h = np.zeros((x.shape[0], w.shape[0]))
    for k in range(steps - 1, -1, -1):
        h = expit(frames[:, k] @ w.T + h @ u.T + b)
    return h


def apply_dropout(activations, rate, rng, mode):
    """Inverted dropout: zero units with prob. `rate` and scale survivors.

    Returns (output, mask); backward passes multiply by the same mask.
    Eval mode is the identity, so no test-time renormalization is needed.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    a = np.asarray(activations, dtype=np.float64)
    if mode == "eval" or rate == 0.0:
        return a.copy(), np.ones_like(a)
    mask = dropout_mask(a.shape, rate, rng)
    return a * mask, mask


def dropout_mask(shape, rate, rng):
    """Keep-mask scaled by 1/(1-rate); used for forward/backward symmetry."""
    return (rng.random(shape) >= rate) / (1.0 - rate)


# ---------------------------------------------------------------------------
# Batched forward/backward used by network evaluation. Each forward returns
# (y, cache); each backward consumes the cache and returns (gx, grads|None).
# ---------------------------------------------------------------------------


def affine_batch_forward(x, w, b):
    return x @ w.T + b, x


def affine_batch_backward(gy, w, cache):
    x = cache
    return gy @ w, {"W": gy.T @ x, "b": gy.sum(axis=0)}


def sigmoid_batch_forward(x):
    y = expit(x)
    return y, y


def sigmoid_batch_backward(gy, cache):
    y = cache
    return gy * y * (1.0 - y), None


def relu_batch_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_batch_backward(gy, cache):
    return gy * cache, None


def maxout_batch_forward(x, group_size):
    y, winners = maxout_forward(x, group_size)
    return y, winners


def maxout_batch_backward(gy, group_size, cache):
    return maxout_backward(gy, cache, group_size), None


def conv2d_batch_forward(x_rows, in_shape, w, b, stride):
    n = x_rows.shape[0]
    h, wid, c = in_shape
    x4 = np.ascontiguousarray(x_rows.reshape(n, h, wid, c))
    y4 = _kernels.conv2d_forward(x4, w, b, stride)
    return y4.reshape(n, -1), (x4, y4.shape)


def conv2d_batch_backward(gy_rows, w, stride, cache):
    x4, yshape = cache
    gy4 = np.ascontiguousarray(gy_rows.reshape(yshape))
    gx4, gw, gb = _kernels.conv2d_backward(x4, w, gy4, stride)
    return gx4.reshape(gy_rows.shape[0], -1), {"W": gw, "b": gb}


def maxpool_batch_forward(x_rows, in_shape, pool_h, pool_w):
    n = x_rows.shape[0]
    h, wid, c = in_shape
    x4 = np.ascontiguousarray(x_rows.reshape(n, h, wid, c))
    y4, idx = _kernels.maxpool_forward(x4, pool_h, pool_w)
    return y4.reshape(n, -1), (idx, h, wid, y4.shape)


def maxpool_batch_backward(gy_rows, cache):
    idx, h, wid, yshape = cache
    gy4 = np.ascontiguousarray(gy_rows.reshape(yshape))
    gx4 = _kernels.maxpool_backward(gy4, idx, h, wid)
    return gx4.reshape(gy_rows.shape[0], -1), None


def recurrent_batch_forward(x_rows, steps, w, u, b):
    n, total = x_rows.shape
    frame_dim = total // steps
    h = np.zeros((n, w.shape[0]))
    states = []  # (k, h_in, h_out) in processing order
    for k in range(steps - 1, -1, -1):
        xk = x_rows[:, k * frame_dim : (k + 1) * frame_dim]
        h_out = expit(xk @ w.T + h @ u.T + b)
        states.append((k, h, h_out))
        h = h_out
    return h, (x_rows, states, frame_dim)


def recurrent_batch_backward(gy, w, u, cache):
    x_rows, states, frame_dim = cache
    gx = np.zeros_like(x_rows)
    gw = np.zeros_like(w)
    gu = np.zeros_like(u)
    gb = np.zeros(w.shape[0])
    gh = gy
    for k, h_in, h_out in reversed(states):
        gpre = gh * h_out * (1.0 - h_out)
        xk = x_rows[:, k * frame_dim : (k + 1) * frame_dim]
        gw += gpre.T @ xk
        gu += gpre.T @ h_in
        gb += gpre.sum(axis=0)
        gx[:, k * frame_dim : (k + 1) * frame_dim] = gpre @ w
        gh = gpre @ u
    return gx, {"W": gw, "b": gb, "U": gu}


def log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
