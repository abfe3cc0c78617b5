"""
Speaker embeddings, PLDA similarity, and clustering
===================================================

Slot embeddings from different chunks belong to the same person or not;
PLDA turns each pair into a log-likelihood ratio, AHC merges while the
best average ratio is high enough, and a variational HMM refines the
result using chronology (speakers tend to hold the floor).
"""

import numpy as np

from diarpipe import (
    PipelineConfig,
    PldaGenerator,
    ahc,
    llr_score,
    make_synthetic_model,
    pairwise_llr,
    sample_speakers_and_embeddings,
    vbx_refine,
)

model = make_synthetic_model(embedding_dim=256, lda_dim=128, separation=100.0, seed=0)
gen = PldaGenerator(model=model, seed=0)

# two observations of one speaker vs two different speakers
a1 = gen.observation(0, (0,))
a2 = gen.observation(0, (1,))
b1 = gen.observation(1, (2,))
print("LLR same speaker:     ", f"{llr_score(a1, a2, model):.1f}")
print("LLR different speaker:", f"{llr_score(a1, b1, model):.1f}")

# forty embeddings, four speakers, interleaved like chunk order would be
vecs, truth = sample_speakers_and_embeddings(gen, n_speakers=4, per_speaker=10)
print("pairwise LLR matrix:", pairwise_llr(vecs, model).shape)

cfg = PipelineConfig()
init = ahc(vecs, model, cfg.ahc_threshold)
print("AHC found", init.max() + 1, "clusters")

out = vbx_refine(vecs, init, model, cfg)
print("refined labels match truth:", bool((out.labels == truth).all()))
print("ELBO trace:", [round(v, 2) for v in out.state.elbo_trace])
print("responsibility rows sum to one:", bool(np.allclose(out.state.gamma.sum(axis=1), 1.0)))
