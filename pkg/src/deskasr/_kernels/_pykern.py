"""Pure-numpy implementations of the hot kernels.

Same contracts as the compiled backend (`_ckern`): float64 C-contiguous
arrays, valid-mode cross-correlation, lowest-index tie-breaking. The
compiled module is preferred at import time; this module is the fallback
and the reference the benchmark compares against.
"""

import numpy as np

BACKEND = "python"


def conv2d_forward(x, w, b, stride=1):
    """Valid cross-correlation. x: (N,H,W,C), w: (F,KH,KW,C), b: (F,).

    Returns y: (N,HO,WO,F) with HO=(H-KH)//stride+1.
    """
    n, h, wid, c = x.shape
    f, kh, kw, _ = w.shape
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]  # (N,HO,WO,C,KH,KW)
    ho, wo = windows.shape[1], windows.shape[2]
    cols = windows.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, kh * kw * c)
    y = cols @ w.reshape(f, kh * kw * c).T + b
    return np.ascontiguousarray(y.reshape(n, ho, wo, f))


def conv2d_backward(x, w, gy, stride=1):
    """Gradients of conv2d_forward. Returns (gx, gw, gb)."""
    n, h, wid, c = x.shape
    f, kh, kw, _ = w.shape
    _, ho, wo, _ = gy.shape
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]
    cols = windows.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, kh * kw * c)
    gy_flat = gy.reshape(n * ho * wo, f)
    gb = gy_flat.sum(axis=0)
    gw = (gy_flat.T @ cols).reshape(f, kh, kw, c)
    gcols = (gy_flat @ w.reshape(f, kh * kw * c)).reshape(n, ho, wo, kh, kw, c)
    gx = np.zeros_like(x)
    for a in range(kh):
        for d in range(kw):
            gx[:, a : a + ho * stride : stride, d : d + wo * stride : stride, :] += gcols[
                :, :, :, a, d, :
            ]
    return gx, gw, gb


def maxpool_forward(x, ph, pw):
    """Non-overlapping max pooling; edge remainder truncated.

    Returns (y, idx) where idx holds the winner's flat spatial index r*W+c
    (first maximum in row-major window order wins ties).
    """
    n, h, w, c = x.shape
    ho, wo = h // ph, w // pw
    cropped = x[:, : ho * ph, : wo * pw, :]
    win = cropped.reshape(n, ho, ph, wo, pw, c).transpose(0, 1, 3, 5, 2, 4)
    flat = win.reshape(n, ho, wo, c, ph * pw)
    local = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, local[..., None], axis=-1)[..., 0]
    rows = (np.arange(ho)[None, :, None, None] * ph) + local // pw
    cols = (np.arange(wo)[None, None, :, None] * pw) + local % pw
    idx = (rows * w + cols).astype(np.int64)
    return np.ascontiguousarray(y), np.ascontiguousarray(idx)


def maxpool_backward(gy, idx, h, w):
    """Route gy back to winner positions. Returns gx: (N,h,w,C)."""
    n, ho, wo, c = gy.shape
    gx = np.zeros((n, h, w, c), dtype=gy.dtype)
    flat = gx.reshape(n, h * w, c)
    ni = np.arange(n)[:, None, None, None]
    ci = np.arange(c)[None, None, None, :]
    np.add.at(flat, (np.broadcast_to(ni, idx.shape), idx, np.broadcast_to(ci, idx.shape)), gy)
    return gx


def viterbi_forward(scores, init, edges_src, edges_dst, edges_logp):
    """Max-sum DP over a sparse transition graph.

    scores: (T,S) frame scores; init: (S,) log start probs (-inf = illegal).
    Edge arrays must be sorted by (dst, src) ascending so that ties break
    toward the lowest predecessor index.

    Returns (delta: (T,S), backptr: (T,S) int32, -1 where undefined).
    """
    t_len, s_len = scores.shape
    delta = np.full((t_len, s_len), -np.inf)
    backptr = np.full((t_len, s_len), -1, dtype=np.int32)
    delta[0] = init + scores[0]
    if t_len == 1 or len(edges_src) == 0:
        return delta, backptr
    starts = np.flatnonzero(np.r_[True, edges_dst[1:] != edges_dst[:-1]])
    dst_unique = edges_dst[starts]
    e_index = np.arange(len(edges_src))
    n_edges = len(edges_src)
    for t in range(1, t_len):
        cand = delta[t - 1, edges_src] + edges_logp
        maxes = np.maximum.reduceat(cand, starts)
        sizes = np.diff(np.r_[starts, n_edges])
        hit = cand == np.repeat(maxes, sizes)
        first = np.minimum.reduceat(np.where(hit, e_index, n_edges), starts)
        reach = maxes > -np.inf
        delta[t, dst_unique[reach]] = maxes[reach] + scores[t, dst_unique[reach]]
        backptr[t, dst_unique[reach]] = edges_src[first[reach]]
    return delta, backptr
