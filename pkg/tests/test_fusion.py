import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isa2.fusion import (
    ScoreMapFormatError,
    ScoreMapSet,
    argmax_labels,
    fuse_scales,
    read_score_map,
    read_score_map_set,
    scaled_dim,
    synthetic_score_maps,
    upsample_nearest,
    validate_score_map_set,
    write_score_map,
    write_score_map_set,
)

SCALES = (0.5, 0.75, 1.0)


def random_set(rng, ref=16, class_count=4, scales=SCALES, quantize=None):
    entries = []
    for scale in scales:
        shape = (scaled_dim(ref, scale), scaled_dim(ref, scale), class_count)
        scores = rng.random(shape).astype(np.float32)
        if quantize:
            scores = (np.floor(scores * quantize) / quantize).astype(np.float32)
        entries.append((scale, scores))
    return ScoreMapSet(tuple(entries), ref, ref)


def brute_force_fuse_argmax(score_set):
    """Per-pixel, per-class max across scales, then first-max argmax."""
    h, w = score_set.reference_height, score_set.reference_width
    class_count = score_set.entries[0][1].shape[2]
    fused = np.full((h, w, class_count), -np.inf)
    labels = np.zeros((h, w), dtype=int)
    for y in range(h):
        for x in range(w):
            for c in range(class_count):
                best = -np.inf
                for _, scores in score_set.entries:
                    sh, sw = scores.shape[:2]
                    v = scores[y * sh // h, x * sw // w, c]
                    if v > best:
                        best = v
                fused[y, x, c] = best
            label = 0
            for c in range(1, class_count):
                if fused[y, x, c] > fused[y, x, label]:
                    label = c
            labels[y, x] = label
    return fused, labels


class TestScaledDim:
    @pytest.mark.parametrize(
        "ref,scale,expected",
        [(16, 0.5, 8), (16, 0.75, 12), (15, 0.5, 8), (13, 0.75, 10), (16, 1.0, 16)],
    )
    def test_round_half_up(self, ref, scale, expected):
        assert scaled_dim(ref, scale) == expected


class TestUpsample:
    def test_constant_replication(self):
        single = np.full((1, 1, 1), 0.7, dtype=np.float32)
        out = upsample_nearest(single, 2, 2)
        assert (out == 0.7).all() and out.shape == (2, 2, 1)

    def test_identity(self):
        rng = np.random.default_rng(0)
        scores = rng.random((2, 2, 3)).astype(np.float32)
        np.testing.assert_array_equal(upsample_nearest(scores, 2, 2), scores)

    def test_two_by_two_blocks(self):
        scores = np.arange(4, dtype=np.float32).reshape(2, 2, 1)
        out = upsample_nearest(scores, 4, 4)[:, :, 0]
        expected = np.array(
            [[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 3, 3], [2, 2, 3, 3]], dtype=np.float32
        )
        np.testing.assert_array_equal(out, expected)

    def test_rejects_downsampling(self):
        with pytest.raises(ValueError, match="smaller"):
            upsample_nearest(np.zeros((4, 4, 1)), 2, 4)


class TestFuse:
    def test_elementwise_max(self):
        a = np.array([[[0.25, 0.875]]], dtype=np.float32)
        b = np.array([[[0.5, 0.125]]], dtype=np.float32)
        s = ScoreMapSet(((0.5, a), (1.0, b)), 1, 1)
        fused = fuse_scales(s, check=False)
        assert fused[0, 0].tolist() == [0.5, 0.875]

    def test_single_entry_is_identity(self):
        rng = np.random.default_rng(1)
        scores = rng.random((4, 4, 3)).astype(np.float32)
        s = ScoreMapSet(((1.0, scores),), 4, 4)
        np.testing.assert_array_equal(fuse_scales(s), scores)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            s = random_set(rng, ref=8, class_count=3)
            fused = fuse_scales(s)
            expected, _ = brute_force_fuse_argmax(s)
            np.testing.assert_allclose(fused, expected)

    def test_monotonicity_over_entries(self):
        rng = np.random.default_rng(3)
        s = random_set(rng, ref=8, class_count=3)
        fused = fuse_scales(s)
        for _, scores in s.entries:
            up = upsample_nearest(scores, 8, 8)
            assert (fused >= up).all()

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        s = random_set(rng, ref=8)
        fused = fuse_scales(s)
        again = fuse_scales(ScoreMapSet(((1.0, fused),), 8, 8))
        np.testing.assert_array_equal(again, fused)

    def test_order_independent(self):
        rng = np.random.default_rng(5)
        s = random_set(rng, ref=8)
        permuted = ScoreMapSet(tuple(reversed(s.entries)), 8, 8)
        np.testing.assert_array_equal(
            fuse_scales(s), fuse_scales(permuted, check=False)
        )

    def test_validation_errors(self):
        rng = np.random.default_rng(6)
        good = random_set(rng, ref=8)
        with pytest.raises(ValueError, match="empty"):
            fuse_scales(ScoreMapSet((), 8, 8))
        entries = ((0.5, good.entries[0][1]), (1.0, rng.random((8, 8, 9))))
        with pytest.raises(ValueError, match="class counts"):
            validate_score_map_set(ScoreMapSet(entries, 8, 8))
        with pytest.raises(ValueError, match="1.0"):
            validate_score_map_set(ScoreMapSet(good.entries[:2], 8, 8))
        with pytest.raises(ValueError, match="increasing"):
            validate_score_map_set(
                ScoreMapSet(tuple(reversed(good.entries)), 8, 8)
            )
        bad_dim = (good.entries[0], (1.0, rng.random((5, 8, 4))))
        with pytest.raises(ValueError, match="expected"):
            validate_score_map_set(ScoreMapSet(bad_dim, 8, 8))
        with_nan = good.entries[2][1].copy()
        with_nan[0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            validate_score_map_set(
                ScoreMapSet(good.entries[:2] + ((1.0, with_nan),), 8, 8)
            )


class TestArgmax:
    def test_unique_max(self):
        scores = np.array([[[0.1, 0.9, 0.3]]])
        assert argmax_labels(scores)[0, 0] == 1

    def test_tie_breaks_to_lowest_id(self):
        scores = np.array([[[0.5, 0.5]]])
        assert argmax_labels(scores)[0, 0] == 0

    def test_matches_brute_force_with_ties(self):
        rng = np.random.default_rng(7)
        # Coarse quantization forces frequent exact ties.
        s = random_set(rng, ref=8, class_count=3, quantize=4)
        _, expected = brute_force_fuse_argmax(s)
        got = argmax_labels(fuse_scales(s))
        np.testing.assert_array_equal(got, expected)

    @given(lam=st.floats(0.01, 100.0))
    @settings(max_examples=30, deadline=None)
    def test_invariant_under_positive_scaling(self, lam):
        rng = np.random.default_rng(8)
        scores = rng.random((4, 4, 5))
        np.testing.assert_array_equal(
            argmax_labels(scores), argmax_labels(scores * lam)
        )


class TestFiles:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(9)
        scores = rng.random((3, 5, 2)).astype(np.float32)
        path = tmp_path / "a.smap"
        write_score_map(path, scores, 0.75)
        scale, loaded = read_score_map(path)
        assert scale == 0.75
        np.testing.assert_array_equal(loaded, scores)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "a.smap"
        path.write_bytes(b"NOTSMAP!" + bytes(24))
        with pytest.raises(ScoreMapFormatError, match="magic"):
            read_score_map(path)

    def test_truncated_payload(self, tmp_path):
        rng = np.random.default_rng(10)
        path = tmp_path / "a.smap"
        write_score_map(path, rng.random((4, 4, 2)).astype(np.float32), 1.0)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ScoreMapFormatError, match="payload"):
            read_score_map(path)

    def test_set_roundtrip_and_discovery(self, tmp_path):
        rng = np.random.default_rng(11)
        s = random_set(rng, ref=8)
        write_score_map_set(tmp_path, "frame01", s)
        loaded = read_score_map_set(tmp_path, "frame01")
        assert loaded.reference_height == 8
        assert [scale for scale, _ in loaded.entries] == list(SCALES)
        for (_, a), (_, b) in zip(loaded.entries, s.entries):
            np.testing.assert_array_equal(a, b)

    def test_missing_frame(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_score_map_set(tmp_path, "nope")

    def test_missing_full_scale(self, tmp_path):
        rng = np.random.default_rng(12)
        s = random_set(rng, ref=8)
        write_score_map_set(tmp_path, "f", ScoreMapSet(s.entries[:2], 8, 8))
        with pytest.raises(ScoreMapFormatError, match="scale-1.0"):
            read_score_map_set(tmp_path, "f")


class TestSyntheticScoreMaps:
    def test_fusion_recovers_labels(self):
        rng = np.random.default_rng(13)
        labels = rng.integers(0, 6, size=(12, 16)).astype(np.uint8)
        s = synthetic_score_maps(labels, 6, rng)
        validate_score_map_set(s)
        got = argmax_labels(fuse_scales(s))
        np.testing.assert_array_equal(got, labels)

    def test_rejects_void_labels(self):
        labels = np.full((4, 4), 255, dtype=np.uint8)
        with pytest.raises(ValueError, match="void"):
            synthetic_score_maps(labels, 6, np.random.default_rng(0))
