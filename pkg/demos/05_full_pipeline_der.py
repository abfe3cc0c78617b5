"""
End to end: synthetic meeting in, RTTM and DER out
==================================================

Generate a 60 s four-speaker meeting, diarize it with oracle backends,
write the hypothesis RTTM, and score it against the reference.
"""

import os
import tempfile

from diarpipe import (
    ClusteringBackend,
    MeetingSpec,
    OracleScorer,
    OracleScorerConfig,
    PipelineConfig,
    PldaGenerator,
    SyntheticEmbedder,
    build_codec,
    der,
    generate,
    make_synthetic_model,
    measure_fractions,
    run,
    write_rttm,
)

spec = MeetingSpec(n_speakers=4, duration_s=60.0, seed=7)
script = generate(spec)
sil, ov = measure_fractions(script)
print(f"script: {len(script.segments)} segments, silence {sil:.1%}, overlap {ov:.1%}")

cfg = PipelineConfig()
codec = build_codec(cfg.max_local_speakers, cfg.max_overlap)
model = make_synthetic_model(embedding_dim=cfg.embedding_dim, lda_dim=cfg.lda_dim, seed=7)
scorer = OracleScorer(script=script, codec=codec, cfg=OracleScorerConfig(p_correct=0.95, seed=7))
embedder = SyntheticEmbedder(script=script, generator=PldaGenerator(model=model, seed=7), n_slots=4)
backend = ClusteringBackend(model=model, cfg=cfg)

out = run(cfg, scorer, embedder, backend, duration_s=60.0, recording_id=script.recording_id)
print("chunks:", out.batch.n_chunks)
print("speakers found:", out.assignment.n_clusters)
for stage, seconds in out.timings_s.items():
    print(f"  {stage:<12} {seconds * 1000:7.1f} ms")

path = os.path.join(tempfile.mkdtemp(), f"{script.recording_id}.rttm")
write_rttm(path, out.annotation)
print("hypothesis written to", path)

b = der(script.to_annotation(), out.annotation)
print(f"t_ref {b.t_ref:.2f}  t_miss {b.t_miss:.2f}  t_fa {b.t_fa:.2f}  t_conf {b.t_conf:.2f}")
print(f"DER {100 * b.der:.2f}%")
