"""Combining per-chunk frame activity into one recording-level timeline.

Chunks overlap heavily (hop is a tenth of the window), so each output frame
is covered by up to ``round(1 / segmentation_step)`` chunks.  Overlap-add
averages the per-chunk values at every output frame:

    out[t] = sum over covering chunks c of x_c[t - offset_c] / coverage[t]

Chunk offsets are expressed on the frame grid as ``round(start_samples /
hop)``.  The output timeline extends to the end of the last (padded) chunk:
``floor((last_start + window_samples) / hop) + 1`` frames, i.e. every frame
grid point from zero through the padded extent.  Frames past the last
chunk's final frame have zero coverage and are reported as zeros.

One caution about slot identity: slot k of one chunk and slot k of another
are unrelated speakers (slots are assigned per chunk).  Averaging slot-wise
is meaningful for visualisation and for anything permutation-invariant; for
counting speakers, sort each frame's slot values first (:func:`sort_slots`)
so aggregation compares like with like.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import median_filter

from .core import FrameRate, PipelineConfig


@dataclass(frozen=True)
class AggregatedActivity:
    """Recording-level activity scores on the analysis frame grid."""

    scores: np.ndarray  # (total_frames, n_columns), values in [0, 1]
    coverage: np.ndarray  # (total_frames,) chunks covering each frame
    frame_rate: FrameRate
    sample_rate_hz: int

    @property
    def total_frames(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class SpeakerCount:
    """Estimated number of simultaneous speakers per output frame."""

    counts: np.ndarray  # (total_frames,) non-negative ints
    frame_rate: FrameRate
    sample_rate_hz: int


def overlap_add(
    per_chunk: np.ndarray,
    start_samples: np.ndarray,
    window_samples: int,
    fr: FrameRate = FrameRate(),
    sample_rate_hz: int = 16000,
) -> AggregatedActivity:
    """Average per-chunk frame values into one recording-level array.

    Parameters
    ----------
    per_chunk : (n_chunks, frames_per_chunk, n_columns) array
        Frame values for each chunk; all chunks share one shape.
    start_samples : (n_chunks,) int array
        Waveform offset of each chunk, non-decreasing.
    window_samples : int
        Chunk length in samples; fixes the output extent.
    """
    x = np.asarray(per_chunk, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"per_chunk must be (chunks, frames, columns), got {x.shape}")
    starts = np.asarray(start_samples, dtype=np.int64)
    n_chunks, frames_per_chunk, n_cols = x.shape
    if starts.shape != (n_chunks,):
        raise ValueError("start_samples must have one entry per chunk")
    if n_chunks == 0:
        raise ValueError("no chunks to aggregate")
    if (np.diff(starts) < 0).any():
        raise ValueError("start_samples must be non-decreasing")

    hop = fr.conv_hop_samples
    start_frames = np.round(starts / hop).astype(np.int64)
    total_frames = int((starts[-1] + window_samples) // hop) + 1
    if start_frames[-1] + frames_per_chunk > total_frames:
        raise ValueError("chunk frames extend past the output extent")

    acc = np.zeros((total_frames, n_cols))
    cov = np.zeros(total_frames, dtype=np.int64)
    for c in range(n_chunks):
        lo = start_frames[c]
        acc[lo : lo + frames_per_chunk] += x[c]
        cov[lo : lo + frames_per_chunk] += 1
    scores = np.divide(acc, cov[:, None], out=np.zeros_like(acc), where=cov[:, None] > 0)
    return AggregatedActivity(
        scores=scores, coverage=cov, frame_rate=fr, sample_rate_hz=sample_rate_hz
    )


def median_filter_time(x: np.ndarray, kernel: int) -> np.ndarray:
    """Sliding median along the time axis, one column at a time.

    Accepts (frames, columns) or (chunks, frames, columns); time is the
    second-to-last axis either way.  Edges are padded by reflection (the
    edge sample is mirrored, i.e. ``d c b a | a b c d``).  ``kernel`` must
    be odd so the window has a well-defined center.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError("kernel must be odd and >= 1")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        size: tuple[int, ...] = (kernel, 1)
    elif x.ndim == 3:
        size = (1, kernel, 1)
    else:
        raise ValueError(f"expected 2-D or 3-D input, got shape {x.shape}")
    return median_filter(x, size=size, mode="reflect")


def sort_slots(multilabel: np.ndarray) -> np.ndarray:
    """Canonicalize slot order per frame, most active slot first.

    Slot identities are chunk-local, so any cross-chunk comparison of raw
    slot columns mixes speakers.  Sorting each frame's values descending
    yields a permutation-invariant representation (for binary rows: column
    k answers "are more than k speakers active").
    """
    return np.sort(np.asarray(multilabel), axis=-1)[..., ::-1]


def speaker_count(agg: AggregatedActivity, cfg: PipelineConfig) -> SpeakerCount:
    """Binarize each aggregated column at 0.5, sum, clip to max_speakers."""
    scores = agg.scores
    if scores.min() < 0.0 or scores.max() > 1.0:
        raise ValueError("aggregated scores must lie in [0, 1]")
    counts = (scores > 0.5).sum(axis=1)
    counts = np.clip(counts, 0, cfg.max_speakers).astype(np.int64)
    return SpeakerCount(counts=counts, frame_rate=agg.frame_rate, sample_rate_hz=agg.sample_rate_hz)
