"""Central finite-difference gradient checking used across the test suite.

The FD oracle only touches network_forward + cross_entropy, never the
backprop code path it verifies.
"""

import numpy as np

from deskasr.nn import Minibatch, backprop, cross_entropy, network_forward
from deskasr.nn.network import init_params

EPS = 1e-5
REL_TOL = 1e-4


def _loss(spec, params, mb):
    fwd = network_forward(spec, params, mb, mode="eval")
    return cross_entropy(fwd.log_posteriors, mb.targets)


def _canonical_dim(spec):
    """Width of the raw minibatch row the spec's view consumes."""
    v = spec.view
    if v.kind == "identity":
        return spec.input_dim - spec.embedding_dim
    return (2 * v.context + 1) * 3 * v.base_dim


def _min_gap(spec, params, mb):
    """Smallest top-2 gap across maxout groups, pool windows and relu pivots.

    Finite differences are only trustworthy away from these kink points.
    """
    gap = np.inf
    fwd = network_forward(spec, params, mb, mode="eval")
    prev = spec.view.apply(mb.inputs)
    for layer, act in zip(spec.layers, fwd.activations):
        if layer.kind == "maxout":
            grouped = np.sort(
                prev.reshape(prev.shape[0], -1, layer.group_size), axis=-1
            )
            if layer.group_size > 1:
                gap = min(gap, float((grouped[..., -1] - grouped[..., -2]).min()))
        elif layer.kind == "relu":
            gap = min(gap, float(np.abs(prev).min()))
        elif layer.kind == "maxpool":
            h, w, c = layer.in_shape
            ph, pw = layer.pool
            x4 = prev.reshape(-1, h, w, c)
            ho, wo = h // ph, w // pw
            win = (
                x4[:, : ho * ph, : wo * pw, :]
                .reshape(-1, ho, ph, wo, pw, c)
                .transpose(0, 1, 3, 5, 2, 4)
                .reshape(-1, ph * pw)
            )
            srt = np.sort(win, axis=-1)
            gap = min(gap, float((srt[:, -1] - srt[:, -2]).min()))
        prev = act
    return gap


def make_probe(spec, seed, n_frames=3, min_gap=1e-3):
    """Seeded random (params, minibatch) with kinks safely away from EPS."""
    for attempt in range(50):
        rng = np.random.default_rng([seed, attempt])
        params = init_params(spec, seed=int(rng.integers(2**31)))
        for p in params:
            if p is None:
                continue
            for k in p:
                p[k] = p[k] + 0.1 * rng.standard_normal(p[k].shape)
        mb = Minibatch(
            rng.standard_normal((n_frames, _canonical_dim(spec))),
            rng.integers(0, spec.num_outputs, size=n_frames),
        )
        if _min_gap(spec, params, mb) > min_gap:
            return params, mb
    raise AssertionError("could not find a probe away from ties")


def check_gradients(spec, seed, n_coords=10, n_frames=3):
    """Compare backprop gradients to central finite differences.

    Returns the max relative error over the sampled coordinates.
    """
    params, mb = make_probe(spec, seed, n_frames)
    grads, _ = backprop(spec, params, mb)
    rng = np.random.default_rng([seed, 991])
    worst = 0.0
    for li, (p, g) in enumerate(zip(params, grads)):
        if p is None:
            continue
        for key in p:
            flat = p[key].reshape(-1)
            gflat = g[key].reshape(-1)
            picks = rng.choice(flat.size, size=min(n_coords, flat.size), replace=False)
            for idx in picks:
                orig = flat[idx]
                flat[idx] = orig + EPS
                up = _loss(spec, params, mb)
                flat[idx] = orig - EPS
                down = _loss(spec, params, mb)
                flat[idx] = orig
                fd = (up - down) / (2 * EPS)
                an = gflat[idx]
                err = abs(fd - an) / max(1e-6, abs(fd) + abs(an))
                worst = max(worst, err)
                assert err < REL_TOL, (
                    f"layer {li} ({spec.layers[li].kind}) {key}[{idx}]: "
                    f"analytic {an:.3e} vs fd {fd:.3e} (rel err {err:.2e})"
                )
    return worst
