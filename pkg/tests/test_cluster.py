"""Agglomerative clustering, HMM refinement, and grid assignment.

The AHC oracle below recomputes average linkage the expensive way: the
similarity of two clusters is the plain mean over all original cross pairs,
recomputed from scratch at every step.  The implementation's size-weighted
update must produce the same partitions.
"""

import numpy as np
import pytest

from diarpipe import (
    INACTIVE,
    ClusteringBackend,
    EmbeddingSet,
    PipelineConfig,
    PldaGenerator,
    ahc,
    assign,
    make_synthetic_model,
    pairwise_llr,
    sample_speakers_and_embeddings,
    vbx_refine,
)
from helpers import adjusted_rand_index


def small_model(separation=100.0, seed=0):
    return make_synthetic_model(embedding_dim=64, lda_dim=16, separation=separation, seed=seed)


def canonical(labels):
    order = {}
    out = []
    for lab in labels:
        lab = int(lab)
        if lab not in order:
            order[lab] = len(order)
        out.append(order[lab])
    return out


def average_linkage_reference(sim, threshold):
    """Merge greedily on from-scratch average similarities."""
    n = sim.shape[0]
    clusters = [[i] for i in range(n)]
    while len(clusters) >= 2:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                val = np.mean([sim[i, j] for i in clusters[a] for j in clusters[b]])
                if best is None or val > best[0]:
                    best = (val, a, b)
        if best[0] < threshold:
            break
        _, a, b = best
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]
    labels = np.empty(n, dtype=int)
    for gid, group in enumerate(clusters):
        for i in group:
            labels[i] = gid
    return labels


class TestAhc:
    def test_two_tight_groups(self):
        model = small_model()
        gen = PldaGenerator(model=model, seed=1)
        vecs, truth = sample_speakers_and_embeddings(gen, 2, 5)
        labels = ahc(vecs, model, threshold=0.0)
        assert adjusted_rand_index(labels, truth) == 1.0
        assert labels[0] == 0  # first unit anchors label zero
        assert sorted(set(labels.tolist())) == [0, 1]

    def test_matches_from_scratch_reference(self):
        # moderate separation so the merge order is not a foregone conclusion
        model = small_model(separation=2.0)
        gen = PldaGenerator(model=model, seed=2)
        for seed, threshold in [(3, 0.0), (4, 5.0), (5, -20.0), (6, 1.0)]:
            rng = np.random.default_rng(seed)
            vecs, _ = sample_speakers_and_embeddings(gen, 3, 4)
            vecs = vecs + 0.01 * rng.normal(size=vecs.shape)  # break any ties
            sim = pairwise_llr(vecs, model)
            np.fill_diagonal(sim, -np.inf)
            want = canonical(average_linkage_reference(sim, threshold))
            got = ahc(vecs, model, threshold).tolist()
            assert got == want, f"seed {seed} threshold {threshold}"

    def test_threshold_extremes(self):
        model = small_model()
        gen = PldaGenerator(model=model, seed=3)
        vecs, _ = sample_speakers_and_embeddings(gen, 2, 3)
        assert ahc(vecs, model, threshold=1e12).tolist() == list(range(6))
        assert set(ahc(vecs, model, threshold=-1e12).tolist()) == {0}

    def test_single_embedding(self):
        model = small_model()
        vec = PldaGenerator(model=model, seed=4).observation(0, (0,))
        assert ahc(vec[None, :], model, threshold=0.0).tolist() == [0]

    def test_partition_stable_under_input_permutation(self):
        model = small_model()
        gen = PldaGenerator(model=model, seed=5)
        vecs, truth = sample_speakers_and_embeddings(gen, 3, 4)
        direct = ahc(vecs, model, threshold=0.0)
        rng = np.random.default_rng(8)
        perm = rng.permutation(len(vecs))
        permuted = ahc(vecs[perm], model, threshold=0.0)
        mapped = np.empty_like(permuted)
        mapped[perm] = permuted
        assert adjusted_rand_index(mapped, direct) == 1.0

    def test_validation(self):
        model = small_model()
        with pytest.raises(ValueError, match=r"\(n, dim\)"):
            ahc(np.zeros(4), model, 0.0)
        with pytest.raises(ValueError, match="zero embeddings"):
            ahc(np.zeros((0, 16)), model, 0.0)


class TestVbxRefine:
    def _cfg(self):
        return PipelineConfig()

    def test_gamma_rows_sum_to_one_and_elbo_grows(self):
        model = small_model(separation=2.0)
        gen = PldaGenerator(model=model, seed=6)
        vecs, truth = sample_speakers_and_embeddings(gen, 3, 8)
        init = ahc(vecs, model, threshold=0.0)
        out = vbx_refine(vecs, init, model, self._cfg())
        np.testing.assert_allclose(out.state.gamma.sum(axis=1), 1.0, atol=1e-9)
        trace = out.state.elbo_trace
        assert len(trace) >= 2
        for prev, cur in zip(trace, trace[1:]):
            assert cur - prev >= -1e-8 * max(1.0, abs(prev))
        n_kept = out.state.gamma.shape[1]
        assert out.state.gamma.shape[0] == 24
        assert 1 <= n_kept <= int(init.max()) + 1
        assert out.state.speaker_means.shape == (n_kept, 16)
        assert (out.state.speaker_covs > 0).all()

    def test_perfect_init_is_a_fixed_point(self):
        model = small_model()
        gen = PldaGenerator(model=model, seed=7)
        vecs, truth = sample_speakers_and_embeddings(gen, 4, 6)
        out = vbx_refine(vecs, truth, model, self._cfg())
        assert out.labels.tolist() == truth.tolist()
        trace = out.state.elbo_trace
        # early stop: the final step improves by less than the relative cutoff
        assert len(trace) < self._cfg().vbx_max_iters
        assert trace[-1] - trace[-2] < 1e-6 * abs(trace[-2])

    def test_starved_cluster_is_dropped(self):
        model = small_model()
        gen = PldaGenerator(model=model, seed=8)
        vecs, truth = sample_speakers_and_embeddings(gen, 2, 10)
        init = truth.copy()
        init[16:] = 2  # hive off two units of each speaker into a fake third cluster
        out = vbx_refine(vecs, init, model, self._cfg())
        assert out.state.gamma.shape[1] == 2
        assert adjusted_rand_index(out.labels, truth) == 1.0

    def test_single_speaker_shortcut(self):
        model = small_model()
        gen = PldaGenerator(model=model, seed=9)
        vecs, _ = sample_speakers_and_embeddings(gen, 1, 5)
        out = vbx_refine(vecs, np.zeros(5, dtype=int), model, self._cfg())
        assert out.labels.tolist() == [0] * 5
        np.testing.assert_array_equal(out.state.gamma, np.ones((5, 1)))

    def test_non_finite_elbo_raises(self):
        model = small_model()
        vecs = np.full((6, 16), 1e200)  # overflows the quadratic terms
        init = np.arange(6) % 2
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(FloatingPointError, match="non-finite at iteration 0"):
                vbx_refine(vecs, init, model, self._cfg())

    def test_validation(self):
        model = small_model()
        cfg = self._cfg()
        with pytest.raises(ValueError, match=r"\(n, 16\)"):
            vbx_refine(np.zeros((4, 8)), np.zeros(4, dtype=int), model, cfg)
        with pytest.raises(ValueError, match="one entry per embedding"):
            vbx_refine(np.zeros((4, 16)), np.zeros(3, dtype=int), model, cfg)
        with pytest.raises(ValueError, match="zero embeddings"):
            vbx_refine(np.zeros((0, 16)), np.zeros(0, dtype=int), model, cfg)


def lift(model, y):
    e = model.lda @ y
    return e / np.linalg.norm(e)


class TestAssign:
    def _setup(self):
        model = small_model()
        gen = PldaGenerator(model=model, seed=0)
        backend = ClusteringBackend(model=model, cfg=PipelineConfig())
        # chunk 0: speaker 0 in slot 0, speaker 1 in slot 1, slot 2 silent
        # chunk 1: speaker 1 in slot 0, speaker 0 in slot 1, slot 2 active
        #          but with no usable embedding
        vectors = np.zeros((2, 3, 64))
        vectors[0, 0] = lift(model, gen.observation(0, (0, 0)))
        vectors[0, 1] = lift(model, gen.observation(1, (0, 1)))
        vectors[1, 0] = lift(model, gen.observation(1, (1, 0)))
        vectors[1, 1] = lift(model, gen.observation(0, (1, 1)))
        valid = np.array([[True, True, False], [True, True, False]])
        act = np.zeros((2, 20, 3), dtype=np.int64)
        act[0, :, 0] = act[0, :, 1] = 1
        act[1, :, 0] = act[1, :, 1] = act[1, :, 2] = 1
        return EmbeddingSet(vectors=vectors, valid=valid), act, backend

    def test_swapped_slots_get_one_global_id(self):
        emb, act, backend = self._setup()
        result, state = assign(emb, act, backend)
        assert result.n_clusters == 2
        assert result.labels.tolist() == [[0, 1, INACTIVE], [1, 0, INACTIVE]]
        assert state is not None
        np.testing.assert_allclose(state.gamma.sum(axis=1), 1.0, atol=1e-9)

    def test_refine_disabled_skips_state(self):
        emb, act, backend = self._setup()
        backend = ClusteringBackend(model=backend.model, cfg=backend.cfg, refine=False)
        result, state = assign(emb, act, backend)
        assert state is None
        assert result.labels.tolist() == [[0, 1, INACTIVE], [1, 0, INACTIVE]]

    def test_already_projected_matches_direct_ahc(self):
        model = small_model()
        gen = PldaGenerator(model=model, seed=10)
        vecs, _ = sample_speakers_and_embeddings(gen, 2, 3)
        emb = EmbeddingSet(
            vectors=vecs.reshape(2, 3, 16), valid=np.ones((2, 3), dtype=bool)
        )
        act = np.ones((2, 5, 3), dtype=np.int64)
        backend = ClusteringBackend(model=model, cfg=PipelineConfig(), refine=False)
        result, _ = assign(emb, act, backend, already_projected=True)
        direct = ahc(vecs, model, PipelineConfig().ahc_threshold)
        assert result.labels.flatten().tolist() == direct.tolist()

    def test_nothing_to_cluster(self):
        emb = EmbeddingSet(vectors=np.zeros((2, 3, 64)), valid=np.zeros((2, 3), dtype=bool))
        act = np.ones((2, 20, 3), dtype=np.int64)
        backend = ClusteringBackend(model=small_model(), cfg=PipelineConfig())
        result, state = assign(emb, act, backend)
        assert result.n_clusters == 0
        assert (result.labels == INACTIVE).all()
        assert state is None

    def test_grid_mismatch(self):
        emb = EmbeddingSet(vectors=np.zeros((2, 3, 64)), valid=np.ones((2, 3), dtype=bool))
        act = np.ones((2, 20, 4), dtype=np.int64)
        backend = ClusteringBackend(model=small_model(), cfg=PipelineConfig())
        with pytest.raises(ValueError, match="does not match"):
            assign(emb, act, backend)
