"""Front end: framing, filterbank, deltas, splicing, CMVN, LDA, file formats."""

import numpy as np
import pytest

from deskasr.errors import ConfigError, DataError, ParseError, ShapeError
from deskasr.features import (
    FeatureMatrix,
    Waveform,
    add_deltas,
    canonical_rows,
    cmvn,
    estimate_lda,
    frame_count,
    logmel,
    mel_filterbank,
    read_alignments,
    read_features,
    read_waveform,
    splice,
    write_alignments,
    write_features,
    write_waveform,
)
from deskasr.features.frontend import LOG_FLOOR


def tone(freq_hz, seconds=1.0, sr=8000, amplitude=8000):
    t = np.arange(int(seconds * sr)) / sr
    return Waveform((amplitude * np.sin(2 * np.pi * freq_hz * t)).astype(np.int16),
                    sr, "A")


class TestLogmel:
    def test_one_second_at_8khz_gives_98_frames(self):
        feats = logmel(tone(440))
        assert feats.num_frames == 98
        assert feats.dim == 40

    @pytest.mark.parametrize("seed", range(6))
    def test_frame_count_formula(self, seed):
        rng = np.random.default_rng(seed)
        sr = int(rng.choice([8000, 16000]))
        n = int(rng.integers(sr // 4, 3 * sr))
        frame_len, shift = sr * 25 // 1000, sr * 10 // 1000
        wav = Waveform(rng.integers(-100, 100, size=n).astype(np.int16), sr)
        assert logmel(wav).num_frames == 1 + (n - frame_len) // shift
        assert frame_count(n, frame_len, shift) == 1 + (n - frame_len) // shift

    def test_all_zero_waveform_hits_log_floor(self):
        wav = Waveform(np.zeros(8000, dtype=np.int16))
        feats = logmel(wav)
        np.testing.assert_allclose(feats.data, np.log(LOG_FLOOR))

    def test_pure_tone_peaks_at_nearest_filter(self):
        freq = 1000.0
        feats = logmel(tone(freq))
        _, centers = mel_filterbank(40, 256, 8000)
        expected = int(np.argmin(np.abs(centers - freq)))
        # interior frames (edges see window leakage the same way)
        hot = np.argmax(feats.data, axis=1)
        assert np.all(hot == expected)

    def test_too_short_waveform_rejected(self):
        with pytest.raises(DataError):
            logmel(Waveform(np.zeros(100, dtype=np.int16)))

    def test_filterbank_covers_band_without_gaps(self):
        filters, _ = mel_filterbank(40, 256, 8000)
        support = filters.sum(axis=0)
        # every analysis bin between the first and last center is covered
        inner = support[3:-3]
        assert np.all(inner > 0)


class TestDeltas:
    def test_constant_input_gives_zero_derivatives(self):
        feats = add_deltas(np.full((6, 3), 2.5))
        assert feats.dim == 9
        np.testing.assert_allclose(feats.data[:, 3:], 0.0, atol=1e-12)

    def test_linear_ramp_interior(self):
        x = np.arange(10, dtype=float).reshape(-1, 1)
        feats = add_deltas(x)
        np.testing.assert_allclose(feats.data[2:-2, 1], 1.0, atol=1e-12)
        np.testing.assert_allclose(feats.data[4:-4, 2], 0.0, atol=1e-12)

    def test_matches_direct_formula_on_random_sequence(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((7, 2))
        feats = add_deltas(x)

        def at(t):  # edge-replicated fetch
            return x[min(max(t, 0), 6)]

        for t in range(7):
            expected = sum(k * (at(t + k) - at(t - k)) for k in (1, 2)) / 10.0
            np.testing.assert_allclose(feats.data[t, 2:4], expected, atol=1e-12)

    def test_translation_equivariance_away_from_edges(self):
        # delta-delta reaches 4 frames, so stay >= 4 from the cut edge
        rng = np.random.default_rng(8)
        x = rng.standard_normal((12, 3))
        a = add_deltas(x).data
        b = add_deltas(x[2:]).data
        np.testing.assert_allclose(a[6:12], b[4:10], atol=1e-12)


class TestSplice:
    def test_zero_context_is_identity(self):
        x = np.random.default_rng(0).standard_normal((5, 4))
        np.testing.assert_array_equal(splice(x, 0).data, x)

    def test_left_edge_replicates_first_frame(self):
        x = np.arange(12, dtype=float).reshape(6, 2)
        row0 = splice(x, 2).data[0]
        np.testing.assert_array_equal(row0[:2], x[0])
        np.testing.assert_array_equal(row0[2:4], x[0])
        np.testing.assert_array_equal(row0[4:6], x[0])
        np.testing.assert_array_equal(row0[6:8], x[1])

    def test_center_block_is_original_frame(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((9, 3))
        k = 3
        rows = splice(x, k).data
        np.testing.assert_array_equal(rows[:, k * 3 : (k + 1) * 3], x)

    def test_width_formula(self):
        x = np.zeros((4, 5))
        assert splice(x, 4).dim == 9 * 5
        assert splice(x, 5).dim == 11 * 5


class TestCmvn:
    def test_output_statistics(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((200, 6)) * 4.0 + 3.0
        out = cmvn(x).data
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(out.var(axis=0), 1.0, atol=1e-6)

    def test_constant_dimension_maps_to_zero(self):
        x = np.random.default_rng(3).standard_normal((50, 3))
        x[:, 1] = 7.0
        out = cmvn(x).data
        np.testing.assert_array_equal(out[:, 1], 0.0)

    def test_idempotent(self):
        x = np.random.default_rng(4).standard_normal((60, 4)) * 2 + 1
        once = cmvn(x).data
        twice = cmvn(once).data
        np.testing.assert_allclose(twice, once, atol=1e-9)


class TestCanonicalRows:
    def test_width_is_3d_times_window(self):
        x = np.random.default_rng(5).standard_normal((20, 40))
        rows = canonical_rows(x, context=5)
        assert rows.data.shape == (20, 11 * 3 * 40)


class TestLda:
    def test_two_gaussians_recover_fisher_direction(self):
        rng = np.random.default_rng(10)
        mean_a, mean_b = np.array([2.0, 1.0]), np.array([-2.0, -1.0])
        xa = rng.standard_normal((400, 2)) * 0.4 + mean_a
        xb = rng.standard_normal((400, 2)) * 0.4 + mean_b
        x = np.vstack([xa, xb])
        y = np.repeat([0, 1], 400)
        lda = estimate_lda(x, y, target_dim=1)
        direction = lda.matrix[0] / np.linalg.norm(lda.matrix[0])
        fisher = (mean_a - mean_b) / np.linalg.norm(mean_a - mean_b)
        angle = np.degrees(np.arccos(np.clip(abs(direction @ fisher), -1, 1)))
        assert angle < 1.0

    def test_single_class_rejected(self):
        x = np.random.default_rng(11).standard_normal((20, 3))
        with pytest.raises(ConfigError):
            estimate_lda(x, np.zeros(20, dtype=int), target_dim=1)

    def test_target_dim_above_source_rejected(self):
        x = np.random.default_rng(12).standard_normal((30, 3))
        y = np.arange(30) % 3
        with pytest.raises(ShapeError):
            estimate_lda(x, y, target_dim=4)

    def test_eigenvalues_descend_and_rows_sw_orthonormal(self):
        rng = np.random.default_rng(13)
        means = rng.standard_normal((4, 6)) * 3.0
        y = rng.integers(0, 4, size=500)
        x = means[y] + rng.standard_normal((500, 6))
        lda = estimate_lda(x, y, target_dim=3)
        ev = lda.eigenvalues
        assert all(a >= b - 1e-12 for a, b in zip(ev, ev[1:]))
        from deskasr.features import scatter_matrices

        _, sw = scatter_matrices(x, y)
        sw = sw + np.eye(6) * (1e-6 * np.trace(sw) / 6)
        gram = lda.matrix @ sw @ lda.matrix.T
        np.testing.assert_allclose(gram, np.eye(3), atol=1e-6)

    def test_sign_convention(self):
        rng = np.random.default_rng(14)
        means = rng.standard_normal((3, 4)) * 2.0
        y = rng.integers(0, 3, size=200)
        x = means[y] + rng.standard_normal((200, 4))
        lda = estimate_lda(x, y, target_dim=2)
        for row in lda.matrix:
            assert row[np.argmax(np.abs(row))] > 0

    def test_projection_preserves_class_separability(self):
        rng = np.random.default_rng(15)
        means = rng.standard_normal((5, 12)) * 2.5
        y = rng.integers(0, 5, size=800)
        x = means[y] + rng.standard_normal((800, 12))

        def nearest_mean_accuracy(data):
            mus = np.stack([data[y == c].mean(axis=0) for c in range(5)])
            d = ((data[:, None, :] - mus[None]) ** 2).sum(axis=2)
            return float((d.argmin(axis=1) == y).mean())

        full = nearest_mean_accuracy(x)
        lda = estimate_lda(x, y, target_dim=4)
        reduced = nearest_mean_accuracy(lda.project(x))
        assert reduced >= full - 0.02


class TestFeatureFiles:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(20)
        mat = FeatureMatrix(rng.standard_normal((17, 5)).astype(np.float32))
        path = tmp_path / "utt.feat"
        write_features(path, mat)
        back = read_features(path)
        assert back.data.shape == (17, 5)
        np.testing.assert_array_equal(back.data, mat.data.astype(np.float32))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.feat"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ParseError):
            read_features(path)

    def test_size_mismatch(self, tmp_path):
        path = tmp_path / "x.feat"
        write_features(path, np.zeros((3, 4)))
        blob = path.read_bytes()
        path.write_bytes(blob[:-4])
        with pytest.raises(ParseError):
            read_features(path)


class TestAlignmentFiles:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "ali.txt"
        alis = [("utt1", np.array([0, 1, 1, 2])), ("utt2", np.array([5]))]
        write_alignments(path, alis)
        back = read_alignments(path)
        assert back[0][0] == "utt1"
        np.testing.assert_array_equal(back[0][1], [0, 1, 1, 2])
        np.testing.assert_array_equal(back[1][1], [5])

    def test_length_mismatch_names_line(self, tmp_path):
        path = tmp_path / "ali.txt"
        path.write_text("utt1 3 0 1\n")
        with pytest.raises(ParseError) as exc:
            read_alignments(path)
        assert ":1:" in str(exc.value)

    def test_non_integer_field(self, tmp_path):
        path = tmp_path / "ali.txt"
        path.write_text("utt1 2 0 x\n")
        with pytest.raises(ParseError):
            read_alignments(path)


class TestWaveformFiles:
    def test_round_trip(self, tmp_path):
        wav = Waveform(np.array([0, 100, -100, 32767, -32768], dtype=np.int16),
                       16000, "B")
        path = tmp_path / "utt.pcm"
        write_waveform(path, wav)
        back = read_waveform(path)
        np.testing.assert_array_equal(back.samples, wav.samples)
        assert back.sample_rate == 16000
        assert back.side_id == "B"

    def test_missing_sidecar(self, tmp_path):
        path = tmp_path / "utt.pcm"
        path.write_bytes(b"\x00\x00")
        with pytest.raises(ParseError):
            read_waveform(path)
