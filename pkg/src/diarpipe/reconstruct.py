"""From clustered chunk activity back to a recording-level diarization.

Once every (chunk, slot) carries a global speaker id, each chunk's local
activity is regrouped by those ids: a global speaker's score in a chunk is
the maximum over the slots assigned to them (usually one slot, but a
speaker can occupy several when the segmenter splits a voice).  The
regrouped per-chunk scores go through the same overlap-add as the counting
path, and each speaker's continuous track is binarized with hysteresis.

Output segments snap to frame-center times rounded to the millisecond, and
speakers are renamed SPEAKER_00, SPEAKER_01, ... in order of first speech.
"""

from __future__ import annotations

import numpy as np

from .aggregate import AggregatedActivity, overlap_add
from .cluster import ClusterAssignment
from .core import Annotation, FrameRate, PipelineConfig, TimeSpan, frame_to_time, quantize_ms


def reconstruct(multilabel: np.ndarray, assignment: ClusterAssignment) -> np.ndarray:
    """Regroup per-slot activity by global speaker id.

    ``multilabel`` is (chunks, frames, slots); the result is
    (chunks, frames, n_clusters) where column k holds, per chunk, the
    elementwise maximum of the slots labeled k (zero when no slot is).
    """
    act = np.asarray(multilabel, dtype=np.float64)
    n_chunks, n_frames, n_slots = act.shape
    if assignment.labels.shape != (n_chunks, n_slots):
        raise ValueError("assignment grid does not match activity grid")
    out = np.zeros((n_chunks, n_frames, max(assignment.n_clusters, 1)))
    for c in range(n_chunks):
        for s in range(n_slots):
            k = assignment.labels[c, s]
            if k < 0:
                continue
            np.maximum(out[c, :, k], act[c, :, s], out=out[c, :, k])
    return out


def binarize_hysteresis(track: np.ndarray, onset: float, offset: float) -> list[tuple[int, int]]:
    """Active frame runs [start, end) of one score track.

    A run opens when the score rises above ``onset`` and closes when it
    falls below ``offset``; a run still open at the end of the track is
    closed there.  Every run spans at least one frame.
    """
    runs: list[tuple[int, int]] = []
    start: int | None = None
    for t, v in enumerate(track):
        if start is None:
            if v > onset:
                start = t
        elif v < offset:
            runs.append((start, t))
            start = None
    if start is not None:
        runs.append((start, len(track)))
    return runs


def to_diarization(
    clustered: np.ndarray,
    start_samples: np.ndarray,
    window_samples: int,
    cfg: PipelineConfig,
    recording_id: str,
    fr: FrameRate | None = None,
) -> tuple[Annotation, AggregatedActivity]:
    """Aggregate clustered chunk activity and emit labeled segments.

    Returns the annotation plus the aggregated per-speaker scores (useful
    for inspection).  Segment boundaries are the center times of the first
    active frame and of the first inactive frame after the run, rounded to
    1 ms, so every segment lasts at least one frame hop.
    """
    fr = fr or cfg.frame_rate
    agg = overlap_add(
        clustered, start_samples, window_samples, fr=fr, sample_rate_hz=cfg.sample_rate_hz
    )
    n_speakers = agg.scores.shape[1]
    first_start: list[tuple[float, int]] = []
    raw_segments: dict[int, list[TimeSpan]] = {}
    for k in range(n_speakers):
        runs = binarize_hysteresis(agg.scores[:, k], cfg.binarize_onset, cfg.binarize_offset)
        spans = []
        for a, b in runs:
            t0 = quantize_ms(frame_to_time(a, fr, cfg.sample_rate_hz))
            t1 = quantize_ms(frame_to_time(b, fr, cfg.sample_rate_hz))
            spans.append(TimeSpan(t0, t1))
        if spans:
            raw_segments[k] = spans
            first_start.append((spans[0].start_s, k))

    first_start.sort()
    segments: list[tuple[TimeSpan, str]] = []
    for rank, (_, k) in enumerate(first_start):
        label = f"SPEAKER_{rank:02d}"
        segments.extend((span, label) for span in raw_segments[k])
    return Annotation(recording_id=recording_id, segments=segments), agg
