"""Layer primitives: hand-worked values, identities, and FD gradient checks."""

import numpy as np
import pytest

from deskasr.errors import ConfigError, ShapeError
from deskasr.nn import (
    InputView,
    apply_dropout,
    maxout_backward,
    maxout_forward,
    unfolded_rnn_forward,
)
from deskasr.nn import archs
from deskasr.nn import network as net
from deskasr.nn.network import InputView, NetworkSpec

from gradcheck import check_gradients


class TestMaxout:
    def test_pairs_example(self):
        a = np.array([[-2.0, 1.0]])
        out, winners = maxout_forward(a, 2)
        assert out.tolist() == [[1.0]]
        assert winners.tolist() == [[1]]

    def test_group_of_one_is_identity(self):
        a = np.random.default_rng(0).standard_normal((4, 6))
        out, winners = maxout_forward(a, 1)
        np.testing.assert_array_equal(out, a)
        assert np.all(winners == 0)

    def test_tie_breaks_to_lowest_index(self):
        out, winners = maxout_forward(np.array([[3.0, 3.0]]), 2)
        assert out.tolist() == [[3.0]]
        assert winners.tolist() == [[0]]

    def test_relu_equivalence(self):
        # max{a, 0} over pairs (a_j, 0) reproduces relu(a_j).
        rng = np.random.default_rng(7)
        a = rng.standard_normal((5, 8))
        paired = np.stack([a, np.zeros_like(a)], axis=-1).reshape(5, 16)
        out, _ = maxout_forward(paired, 2)
        np.testing.assert_array_equal(out, np.maximum(a, 0.0))

    def test_backward_routes_to_winner_only(self):
        a = np.array([[-2.0, 1.0, 5.0, 0.0]])
        out, winners = maxout_forward(a, 2)
        g = maxout_backward(np.array([[10.0, 20.0]]), winners, 2)
        assert g.tolist() == [[0.0, 10.0, 20.0, 0.0]]

    def test_group_size_must_divide(self):
        with pytest.raises(ShapeError):
            maxout_forward(np.zeros((2, 5)), 2)

    @pytest.mark.parametrize("seed", range(5))
    def test_grouping_matches_naive_loop(self, seed):
        rng = np.random.default_rng(seed)
        g = int(rng.integers(1, 5))
        cols = g * int(rng.integers(1, 6))
        a = rng.standard_normal((3, cols))
        out, winners = maxout_forward(a, g)
        for r in range(3):
            for j in range(cols // g):
                grp = a[r, j * g : (j + 1) * g]
                assert out[r, j] == grp.max()
                assert winners[r, j] == int(np.argmax(grp))


class TestUnfoldedRnn:
    def test_zero_recurrence_is_framewise_sigmoid(self):
        rng = np.random.default_rng(3)
        d, h, steps = 4, 5, 6
        x = rng.standard_normal((2, steps * d))
        W = rng.standard_normal((h, d))
        b = rng.standard_normal(h)
        out = unfolded_rnn_forward(x, W, np.zeros((h, h)), b, steps)
        # with U = 0 the final state depends only on the first frame
        # of the window (processed last).
        first = x[:, :d]
        expected = 1.0 / (1.0 + np.exp(-(first @ W.T + b)))
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_single_step_is_sigmoid_affine(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((3, 4))
        W = rng.standard_normal((6, 4))
        U = rng.standard_normal((6, 6))
        b = rng.standard_normal(6)
        out = unfolded_rnn_forward(x, W, U, b, 1)
        expected = 1.0 / (1.0 + np.exp(-(x @ W.T + b)))
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_window_processed_backwards(self):
        # with W = 0 the output ignores every frame; with U = 0 it sees
        # only the chronologically first frame. A W that reads frame
        # index via a distinctive bias-free projection confirms order.
        d, h = 2, 2
        x = np.array([[1.0, 0.0, 0.0, 0.0, 5.0, 0.0]])  # frames t, t+1, t+2
        W = np.eye(2)
        out_last = unfolded_rnn_forward(x, W, np.zeros((2, 2)), np.zeros(2), 3)
        expected = 1.0 / (1.0 + np.exp(-np.array([1.0, 0.0])))
        np.testing.assert_allclose(out_last[0], expected, atol=1e-12)


class TestDropout:
    def test_rate_zero_is_identity(self):
        x = np.random.default_rng(0).standard_normal((4, 4))
        out, mask = apply_dropout(x, 0.0, np.random.default_rng(1), mode="train")
        np.testing.assert_array_equal(out, x)
        np.testing.assert_array_equal(mask, np.ones_like(x))

    def test_eval_mode_is_identity(self):
        x = np.random.default_rng(0).standard_normal((4, 4))
        out, _ = apply_dropout(x, 0.9, np.random.default_rng(1), mode="eval")
        np.testing.assert_array_equal(out, x)

    def test_invalid_rate_rejected(self):
        rng = np.random.default_rng(0)
        for bad in (-0.1, 1.0, 1.5):
            with pytest.raises(ConfigError):
                apply_dropout(np.ones((2, 2)), bad, rng, mode="train")

    def test_inverted_scaling_preserves_mean(self):
        rng = np.random.default_rng(42)
        x = np.ones((200, 200))
        out, _ = apply_dropout(x, 0.5, rng, mode="train")
        kept = out[out != 0]
        assert np.allclose(kept, 2.0)  # survivors scaled by 1/(1-p)
        assert abs(out.mean() - 1.0) < 0.05

    def test_mask_zeros_match_rate(self):
        rng = np.random.default_rng(9)
        _, mask = apply_dropout(np.ones((300, 300)), 0.3, rng, mode="train")
        frac = float((mask == 0).mean())
        assert abs(frac - 0.3) < 0.01


class TestGradients:
    """Backprop vs central finite differences for every layer kind."""

    def test_sigmoid_dnn(self):
        spec = archs.dnn_spec(9, InputView(), [7, 6], bottleneck=5, num_outputs=4)
        assert check_gradients(spec, seed=11) < 1e-4

    def test_relu_dnn(self):
        spec = archs.dnn_spec(
            9, InputView(), [7, 6], bottleneck=5, num_outputs=4, activation="relu"
        )
        assert check_gradients(spec, seed=12) < 1e-4

    def test_maxout_dnn(self):
        spec = archs.maxout_dnn_spec(
            8, InputView(), [3, 2], bottleneck=5, num_outputs=4, group_size=3
        )
        assert check_gradients(spec, seed=13) < 1e-4

    def test_cnn(self):
        view = archs.conv_view(base_dim=4, context=1)  # (4, 3, 3) block
        spec = archs.cnn_spec(
            36,
            view,
            filters=(2, 3),
            windows=((2, 2), (1, 2)),
            pool=(2, 1),
            hidden_dims=(5,),
            bottleneck=4,
            num_outputs=3,
        )
        assert check_gradients(spec, seed=14) < 1e-4

    def test_rnn(self):
        view = archs.rnn_window_view(base_dim=5, context=2, steps=3)
        spec = archs.rnn_spec(
            75, view, steps=3, recurrent_hidden=6, hidden_dims=[7],
            bottleneck=5, num_outputs=4,
        )
        assert check_gradients(spec, seed=15) < 1e-4

    def test_bottleneck_linear(self):
        layers = [
            net.affine(6, 5),
            net.sigmoid(5),
            net.affine(5, 3),  # linear bottleneck, no nonlinearity
            net.softmax_output(3, 4),
        ]
        spec = NetworkSpec(layers, InputView())
        assert check_gradients(spec, seed=16) < 1e-4
