"""
From chunk scores to a recording-level speaker count
====================================================

The oracle scorer plays the role of the segmentation network: it reads a
ground-truth script and emits per-chunk class scores.  Crucially it
assigns speakers to chunk-local slots by first activity inside each
chunk, so slot k means different people in different chunks.
"""

import numpy as np

from diarpipe import (
    GroundTruthScript,
    OracleScorer,
    OracleScorerConfig,
    PipelineConfig,
    TimeSpan,
    assign_local_slots,
    build_codec,
    median_filter_time,
    overlap_add,
    sort_slots,
    speaker_count,
    to_multilabel,
)

segs = (
    (TimeSpan(0.0, 14.5), "alice"),
    (TimeSpan(13.5, 30.0), "bob"),
    (TimeSpan(2.0, 8.0), "carol"),
    (TimeSpan(20.5, 29.0), "dave"),
)
script = GroundTruthScript(recording_id="demo", segments=segs, duration_s=30.0)

cfg = PipelineConfig()
codec = build_codec(cfg.max_local_speakers, cfg.max_overlap)
scorer = OracleScorer(script=script, codec=codec, cfg=OracleScorerConfig(p_correct=0.95, seed=0))

# ten chunks for 30 s; look at who lands in which slot
starts = np.arange(10) * cfg.hop_samples
for c in (0, 5, 9):
    span = TimeSpan(starts[c] / 16000, starts[c] / 16000 + 16.0)
    print(f"chunk {c} slots: {assign_local_slots(script, span, 4)}")

scores = np.stack(
    [
        scorer.score_chunk(None, TimeSpan(s / 16000, s / 16000 + 16.0), c)
        for c, s in enumerate(starts)
    ]
)
print("score tensor:", scores.shape)

multilabel = np.stack([to_multilabel(b, codec) for b in scores])
multilabel = median_filter_time(multilabel, cfg.median_kernel_frames).astype(int)

# slot columns are not comparable across chunks, sort before averaging
agg = overlap_add(sort_slots(multilabel), starts, cfg.window_samples)
count = speaker_count(agg, cfg)
print("count timeline:", count.counts.shape)

values, freq = np.unique(count.counts, return_counts=True)
total = count.counts.shape[0]
for v, n in zip(values, freq):
    print(f"  {v} active speaker(s): {n / total:.1%} of frames")
