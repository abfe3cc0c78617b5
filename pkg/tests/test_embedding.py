"""Clean-frame masks, slot embedders, and the embedding file format."""

import numpy as np
import pytest

from diarpipe import (
    CleanMaskSet,
    EmbeddingSet,
    GroundTruthScript,
    ImportedEmbedder,
    PldaGenerator,
    SyntheticEmbedder,
    TimeSpan,
    build_embedding_set,
    clean_masks,
    make_synthetic_model,
    read_embeddings,
    write_embeddings,
)


class TestCleanMasks:
    def test_solo_frames_only(self):
        act = np.array(
            [
                [
                    [1, 0, 0],  # slot 0 alone
                    [1, 1, 0],  # overlapped, excluded everywhere
                    [0, 1, 0],  # slot 1 alone
                    [0, 1, 1],  # overlapped
                    [0, 0, 0],
                    [1, 0, 0],  # slot 0 alone again
                ]
            ]
        )
        out = clean_masks(act)
        assert out.masks[0, :, 0].tolist() == [1, 0, 0, 0, 0, 1]
        assert out.masks[0, :, 1].tolist() == [0, 0, 1, 0, 0, 0]
        # slot 2 never speaks alone: falls back to its full activity
        assert out.masks[0, :, 2].tolist() == [0, 0, 0, 1, 0, 0]
        assert out.fallback_used[0].tolist() == [False, False, True]

    def test_always_overlapped_pair_both_fall_back(self):
        act = np.ones((1, 8, 2), dtype=np.int64)
        out = clean_masks(act)
        assert out.fallback_used.all()
        np.testing.assert_array_equal(out.masks, act)

    def test_inactive_slot_keeps_empty_mask(self):
        act = np.zeros((1, 5, 2), dtype=np.int64)
        act[0, :, 0] = 1
        out = clean_masks(act)
        assert out.masks[0, :, 1].sum() == 0
        assert not out.fallback_used[0, 1]

    def test_min_num_frames_threshold(self):
        act = np.array([[[1, 0], [1, 1], [1, 1], [0, 1]]])
        # slot 0 has one clean frame: enough at the default, not at 2
        assert not clean_masks(act, min_num_frames=1).fallback_used[0, 0]
        out = clean_masks(act, min_num_frames=2)
        assert out.fallback_used[0, 0]
        assert out.masks[0, :, 0].tolist() == [1, 1, 1, 0]

    def test_masks_never_exceed_activity(self):
        rng = np.random.default_rng(4)
        act = (rng.random((3, 30, 4)) > 0.5).astype(np.int64)
        out = clean_masks(act, min_num_frames=3)
        assert (out.masks <= act).all()
        # every mask is either the solo selection or the full activity column
        solo = act * (act.sum(axis=2, keepdims=True) < 2)
        for c in range(3):
            for s in range(4):
                got = out.masks[c, :, s]
                want = act[c, :, s] if out.fallback_used[c, s] else solo[c, :, s]
                np.testing.assert_array_equal(got, want)

    def test_validation(self):
        with pytest.raises(ValueError, match="chunks, frames, slots"):
            clean_masks(np.zeros((4, 2)))
        with pytest.raises(ValueError, match="min_num_frames"):
            clean_masks(np.zeros((1, 4, 2)), min_num_frames=0)


def two_speaker_script():
    # B leads in the second window, so the same speakers land in swapped slots
    segs = (
        (TimeSpan(0.0, 12.0), "A"),
        (TimeSpan(16.0, 28.0), "A"),
        (TimeSpan(6.0, 28.0), "B"),
    )
    return GroundTruthScript(recording_id="two", segments=segs, duration_s=28.0)


def small_generator():
    model = make_synthetic_model(embedding_dim=64, lda_dim=16, separation=100.0, seed=0)
    return PldaGenerator(model=model, seed=0)


class TestSyntheticEmbedder:
    def setup_method(self):
        self.emb = SyntheticEmbedder(
            script=two_speaker_script(), generator=small_generator(), n_slots=4
        )
        self.span0 = TimeSpan(0.0, 16.0)  # slots [A, B]
        self.span1 = TimeSpan(12.0, 28.0)  # slots [B, A]
        self.mask = np.ones(200)

    def test_unit_norm_and_deterministic(self):
        e = self.emb.embed_slot(0, self.span0, 0, self.mask)
        assert e.shape == (64,)
        assert abs(np.linalg.norm(e) - 1.0) < 1e-12
        again = self.emb.embed_slot(0, self.span0, 0, self.mask)
        np.testing.assert_array_equal(e, again)

    def test_same_speaker_across_swapped_slots(self):
        a_chunk0 = self.emb.embed_slot(0, self.span0, 0, self.mask)
        a_chunk1 = self.emb.embed_slot(1, self.span1, 1, self.mask)
        b_chunk0 = self.emb.embed_slot(0, self.span0, 1, self.mask)
        b_chunk1 = self.emb.embed_slot(1, self.span1, 0, self.mask)
        assert float(a_chunk0 @ a_chunk1) > 0.95
        assert float(b_chunk0 @ b_chunk1) > 0.95
        assert abs(float(a_chunk0 @ b_chunk0)) < 0.5

    def test_more_pooled_frames_less_noise(self):
        model = self.emb.generator.model
        mean = model.lda @ self.emb.generator.speaker_mean(0)
        mean = mean / np.linalg.norm(mean)
        few = self.emb.embed_slot(0, self.span0, 0, np.ones(1))
        many = self.emb.embed_slot(0, self.span0, 0, np.ones(10000))
        assert np.linalg.norm(many - mean) < np.linalg.norm(few - mean)

    def test_empty_mask_gives_none(self):
        assert self.emb.embed_slot(0, self.span0, 0, np.zeros(200)) is None

    def test_slot_beyond_active_speakers_gives_none(self):
        # only two speakers exist, so slots 2 and 3 stay unassigned
        assert self.emb.embed_slot(0, self.span0, 2, self.mask) is None
        assert self.emb.embed_slot(0, self.span0, 3, self.mask) is None


class TestImportedEmbedder:
    def _set(self):
        vectors = np.zeros((2, 2, 3))
        vectors[0, 0] = [1.0, 0.0, 0.0]
        vectors[1, 0] = [0.0, 1.0, 0.0]
        vectors[1, 1] = [0.0, 0.0, 1.0]
        valid = np.array([[True, False], [True, True]])
        return EmbeddingSet(vectors=vectors, valid=valid)

    def test_replay_and_invalid(self):
        emb = ImportedEmbedder(embeddings=self._set())
        span = TimeSpan(0.0, 16.0)
        np.testing.assert_array_equal(emb.embed_slot(0, span, 0, np.ones(4)), [1, 0, 0])
        assert emb.embed_slot(0, span, 1, np.ones(4)) is None

    def test_out_of_range_chunk(self):
        emb = ImportedEmbedder(embeddings=self._set())
        with pytest.raises(ValueError, match="covers 2 chunks, chunk 5 requested"):
            emb.embed_slot(5, TimeSpan(0.0, 16.0), 0, np.ones(4))


class _StubEmbedder:
    """Returns a chunk-coded basis vector, skipping slot 1."""

    def __init__(self, dim=4):
        self.dim = dim

    def embed_slot(self, chunk_index, span, slot, mask, samples=None):
        if slot == 1:
            return None
        v = np.zeros(self.dim)
        v[chunk_index % self.dim] = 1.0
        return v


class TestBuildEmbeddingSet:
    def _masks(self, n_chunks=2, n_slots=3):
        return CleanMaskSet(
            masks=np.ones((n_chunks, 5, n_slots)),
            fallback_used=np.zeros((n_chunks, n_slots), dtype=bool),
        )

    def test_grid_and_validity(self):
        spans = [TimeSpan(0.0, 16.0), TimeSpan(1.6, 17.6)]
        out = build_embedding_set(_StubEmbedder(), spans, self._masks(), dim=4)
        assert out.vectors.shape == (2, 3, 4)
        assert out.valid.tolist() == [[True, False, True], [True, False, True]]
        np.testing.assert_array_equal(out.vectors[1, 0], [0, 1, 0, 0])
        np.testing.assert_array_equal(out.vectors[0, 1], np.zeros(4))

    def test_wrong_shape_rejected(self):
        spans = [TimeSpan(0.0, 16.0), TimeSpan(1.6, 17.6)]
        with pytest.raises(ValueError, match="returned shape"):
            build_embedding_set(_StubEmbedder(dim=3), spans, self._masks(), dim=4)


def random_set(rng, n_chunks=3, n_slots=2, dim=5, drop=(1, 1)):
    vectors = rng.normal(size=(n_chunks, n_slots, dim))
    vectors /= np.linalg.norm(vectors, axis=2, keepdims=True)
    valid = np.ones((n_chunks, n_slots), dtype=bool)
    valid[drop] = False
    vectors[drop] = 0.0
    return EmbeddingSet(vectors=vectors, valid=valid)


class TestEmbeddingFiles:
    def test_round_trip(self, tmp_path):
        emb = random_set(np.random.default_rng(5))
        path = str(tmp_path / "emb.txt")
        write_embeddings(path, emb)
        back = read_embeddings(path)
        np.testing.assert_array_equal(back.vectors, emb.vectors)
        np.testing.assert_array_equal(back.valid, emb.valid)

    def test_expected_shape_enforced(self, tmp_path):
        path = str(tmp_path / "emb.txt")
        write_embeddings(path, random_set(np.random.default_rng(6)))
        read_embeddings(path, expected_chunks=3, expected_slots=2, expected_dim=5)
        with pytest.raises(ValueError, match="header says 3 chunks, expected 4"):
            read_embeddings(path, expected_chunks=4)

    def test_non_unit_rows_warn_and_renormalize(self, tmp_path):
        emb = random_set(np.random.default_rng(7))
        vectors = emb.vectors.copy()
        vectors[0, 0] *= 2.0
        path = str(tmp_path / "emb.txt")
        write_embeddings(path, EmbeddingSet(vectors=vectors, valid=emb.valid))
        with pytest.warns(UserWarning, match="renormalizing"):
            back = read_embeddings(path)
        np.testing.assert_allclose(back.vectors[0, 0], emb.vectors[0, 0], atol=1e-12)

    def test_header_errors(self, tmp_path):
        bad_magic = tmp_path / "a.txt"
        bad_magic.write_text("vectors 1 1 2\n1 0\n")
        with pytest.raises(ValueError, match="expected 'embeddings"):
            read_embeddings(str(bad_magic))
        bad_ints = tmp_path / "b.txt"
        bad_ints.write_text("embeddings one 1 2\n1 0\n")
        with pytest.raises(ValueError, match="malformed header"):
            read_embeddings(str(bad_ints))

    def test_truncated_body(self, tmp_path):
        path = tmp_path / "short.txt"
        path.write_text("embeddings 2 2 3\n1 0 0\n0 1 0\n0 0 1\n")
        with pytest.raises(ValueError, match="expected 4 rows"):
            read_embeddings(str(path))
