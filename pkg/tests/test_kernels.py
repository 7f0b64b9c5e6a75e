"""Kernel contracts checked against naive oracles and across backends."""

import numpy as np
import pytest

from deskasr._kernels import _pykern

try:
    from deskasr._kernels import _ckern
except ImportError:
    _ckern = None

BACKENDS = [_pykern] if _ckern is None else [_pykern, _ckern]


def naive_conv2d(x, w, b, stride=1):
    """Direct nested-loop cross-correlation, the oracle for both backends."""
    n, h, wid, c = x.shape
    f, kh, kw, _ = w.shape
    ho = (h - kh) // stride + 1
    wo = (wid - kw) // stride + 1
    y = np.zeros((n, ho, wo, f))
    for m in range(n):
        for i in range(ho):
            for j in range(wo):
                for k in range(f):
                    acc = b[k]
                    for a in range(kh):
                        for d in range(kw):
                            for ch in range(c):
                                acc += x[m, i * stride + a, j * stride + d, ch] * w[k, a, d, ch]
                    y[m, i, j, k] = acc
    return y


def naive_maxpool(x, ph, pw):
    n, h, w, c = x.shape
    ho, wo = h // ph, w // pw
    y = np.zeros((n, ho, wo, c))
    for m in range(n):
        for i in range(ho):
            for j in range(wo):
                for ch in range(c):
                    y[m, i, j, ch] = x[m, i * ph : (i + 1) * ph, j * pw : (j + 1) * pw, ch].max()
    return y


@pytest.mark.parametrize("kern", BACKENDS, ids=lambda k: k.BACKEND)
class TestConv2d:
    def test_matches_naive_oracle(self, kern):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2, 12, 12, 2))
        w = rng.standard_normal((3, 3, 3, 2))
        b = rng.standard_normal(3)
        got = kern.conv2d_forward(x, w, b)
        want = naive_conv2d(x, w, b)
        assert np.abs(got - want).max() < 1e-10

    def test_spec_geometry(self, kern):
        x = np.zeros((1, 40, 11, 3))
        w = np.zeros((4, 9, 9, 3))
        y = kern.conv2d_forward(x, w, np.zeros(4))
        assert y.shape == (1, 32, 3, 4)

    def test_delta_filter_shifts_input(self, kern):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((1, 8, 8, 1))
        w = np.zeros((1, 3, 3, 1))
        w[0, 1, 2, 0] = 1.0  # picks tap (row+1, col+2)
        y = kern.conv2d_forward(x, w, np.zeros(1))
        assert np.allclose(y[0, :, :, 0], x[0, 1:7, 2:8, 0])

    def test_stride(self, kern):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((1, 9, 9, 2))
        w = rng.standard_normal((2, 3, 3, 2))
        b = rng.standard_normal(2)
        got = kern.conv2d_forward(x, w, b, 2)
        want = naive_conv2d(x, w, b, 2)
        assert got.shape == (1, 4, 4, 2)
        assert np.abs(got - want).max() < 1e-10

    def test_backward_matches_finite_differences(self, kern):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 6, 5, 2))
        w = rng.standard_normal((3, 3, 2, 2))
        b = rng.standard_normal(3)
        gy = rng.standard_normal((2, 4, 4, 3))
        gx, gw, gb = kern.conv2d_backward(x, w, gy)
        eps = 1e-6

        def loss(xx, ww, bb):
            return float((kern.conv2d_forward(xx, ww, bb) * gy).sum())

        for arr, grad in ((x, gx), (w, gw), (b, gb)):
            flat = arr.reshape(-1)
            for i in rng.choice(flat.size, size=min(8, flat.size), replace=False):
                orig = flat[i]
                flat[i] = orig + eps
                up = loss(x, w, b)
                flat[i] = orig - eps
                down = loss(x, w, b)
                flat[i] = orig
                fd = (up - down) / (2 * eps)
                assert abs(fd - grad.reshape(-1)[i]) < 1e-5 * max(1.0, abs(fd))


@pytest.mark.parametrize("kern", BACKENDS, ids=lambda k: k.BACKEND)
class TestMaxpool:
    def test_matches_naive_oracle(self, kern):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((2, 7, 9, 3))  # remainder rows/cols truncated
        y, idx = kern.maxpool_forward(x, 2, 2)
        assert y.shape == (2, 3, 4, 3)
        assert np.array_equal(y, naive_maxpool(x, 2, 2))

    def test_constant_map(self, kern):
        x = np.full((1, 4, 4, 1), 2.5)
        y, idx = kern.maxpool_forward(x, 2, 2)
        assert np.all(y == 2.5)
        # ties break to the lowest flat spatial index (window top-left)
        assert idx[0, 0, 0, 0] == 0
        assert idx[0, 0, 1, 0] == 2

    def test_2x2_example(self, kern):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1)
        y, idx = kern.maxpool_forward(x, 2, 2)
        assert y[0, 0, 0, 0] == 4.0
        assert idx[0, 0, 0, 0] == 3

    def test_backward_routes_to_winners(self, kern):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((1, 4, 4, 2))
        y, idx = kern.maxpool_forward(x, 2, 2)
        gy = rng.standard_normal(y.shape)
        gx = kern.maxpool_backward(gy, idx, 4, 4)
        assert gx.shape == x.shape
        assert np.isclose(gx.sum(), gy.sum())
        # every nonzero entry of gx sits at a winning position
        nz = np.flatnonzero(gx)
        assert len(nz) == gy.size


@pytest.mark.parametrize("kern", BACKENDS, ids=lambda k: k.BACKEND)
class TestViterbi:
    def _chain(self):
        # 2-state chain: 0 self-loops or advances to 1; 1 self-loops
        src = np.array([0, 0, 1], dtype=np.int32)
        dst = np.array([0, 1, 1], dtype=np.int32)
        logp = np.log(np.array([0.6, 0.4, 1.0]))
        order = np.lexsort((src, dst))
        return src[order], dst[order], logp[order]

    def test_hand_worked_chain(self, kern):
        src, dst, logp = self._chain()
        scores = np.log(np.array([[0.9, 0.1], [0.2, 0.8]]))
        init = np.array([0.0, -np.inf])
        delta, back = kern.viterbi_forward(scores, init, src, dst, logp)
        # best path 0 -> 1: log .9 + log .4 + log .8
        assert np.isclose(delta[1, 1], np.log(0.9) + np.log(0.4) + np.log(0.8))
        assert back[1, 1] == 0
        assert np.isclose(delta[1, 0], np.log(0.9) + np.log(0.6) + np.log(0.2))

    def test_tie_breaks_to_lowest_src(self, kern):
        # both states reach state 1 with identical scores
        src = np.array([0, 1], dtype=np.int32)
        dst = np.array([1, 1], dtype=np.int32)
        logp = np.zeros(2)
        scores = np.zeros((2, 2))
        init = np.zeros(2)
        delta, back = kern.viterbi_forward(scores, init, src, dst, logp)
        assert back[1, 1] == 0

    def test_unreachable_stays_neg_inf(self, kern):
        src = np.array([0], dtype=np.int32)
        dst = np.array([0], dtype=np.int32)
        logp = np.zeros(1)
        scores = np.zeros((3, 2))
        init = np.array([0.0, -np.inf])
        delta, back = kern.viterbi_forward(scores, init, src, dst, logp)
        assert delta[2, 1] == -np.inf
        assert back[2, 1] == -1


@pytest.mark.skipif(_ckern is None, reason="compiled backend unavailable")
class TestBackendEquivalence:
    def test_conv2d(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((3, 10, 8, 3))
        w = rng.standard_normal((4, 3, 3, 3))
        b = rng.standard_normal(4)
        assert np.abs(
            _pykern.conv2d_forward(x, w, b) - _ckern.conv2d_forward(x, w, b)
        ).max() < 1e-12
        gy = rng.standard_normal((3, 8, 6, 4))
        for p, c in zip(_pykern.conv2d_backward(x, w, gy), _ckern.conv2d_backward(x, w, gy)):
            assert np.abs(p - c).max() < 1e-11

    def test_maxpool(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((2, 9, 7, 2))
        yp, ip = _pykern.maxpool_forward(x, 2, 3)
        yc, ic = _ckern.maxpool_forward(x, 2, 3)
        assert np.array_equal(yp, yc)
        assert np.array_equal(ip, ic)

    def test_viterbi(self):
        rng = np.random.default_rng(8)
        n_states = 12
        edges = sorted({(rng.integers(n_states), rng.integers(n_states)) for _ in range(40)})
        dst = np.array([e[0] for e in edges], dtype=np.int32)
        src = np.array([e[1] for e in edges], dtype=np.int32)
        order = np.lexsort((src, dst))
        src, dst = src[order], dst[order]
        logp = rng.standard_normal(len(src))
        scores = rng.standard_normal((9, n_states))
        init = rng.standard_normal(n_states)
        dp, bp = _pykern.viterbi_forward(scores, init, src, dst, logp)
        dc, bc = _ckern.viterbi_forward(scores, init, src, dst, logp)
        assert np.allclose(dp, dc, equal_nan=True)
        assert np.array_equal(bp, bc)
