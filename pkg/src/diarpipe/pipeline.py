"""End-to-end diarization: waveform (or script) in, annotation out.

Stages, in order:

1. window the waveform into overlapping chunks
2. score every chunk into powerset classes (oracle, imported, or any
   FrameScorer)
3. decode scores to per-slot binary activity and median-filter it in time
4. aggregate: slot-sorted overlap-add for the speaker count, plain
   overlap-add of slot activity for inspection
5. build clean masks and one embedding per active (chunk, slot)
6. cluster embeddings into global speakers (AHC, then HMM refinement)
7. regroup activity by global speaker, aggregate again, binarize into
   segments

Everything downstream of stage 2 is deterministic; the scorer and embedder
backends own all randomness (and both are seeded), so a fixed input and
seed always produce byte-identical RTTM.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .aggregate import (
    AggregatedActivity,
    SpeakerCount,
    median_filter_time,
    overlap_add,
    sort_slots,
    speaker_count,
)
from .audio import AudioBuffer, ChunkBatch, load_wav, sliding_window
from .cluster import ClusterAssignment, ClusteringBackend, VbxState, assign
from .core import Annotation, PipelineConfig
from .embedding import CleanMaskSet, EmbeddingSet, SlotEmbedder, build_embedding_set, clean_masks
from .powerset import PowersetCodec, build_codec, to_multilabel
from .reconstruct import reconstruct, to_diarization
from .scoring import FrameScorer


@dataclass(frozen=True)
class PipelineRun:
    """All intermediates of one pipeline execution, for inspection."""

    config: PipelineConfig
    recording_id: str
    codec: PowersetCodec
    batch: ChunkBatch
    scores: np.ndarray  # (chunks, frames, classes) log-probabilities
    multilabel: np.ndarray  # (chunks, frames, slots) after median filtering
    aggregated: AggregatedActivity  # slot-wise OLA, inspection only
    count: SpeakerCount
    masks: CleanMaskSet
    embeddings: EmbeddingSet
    assignment: ClusterAssignment
    vbx_state: VbxState | None
    clustered: np.ndarray  # (chunks, frames, n_clusters)
    annotation: Annotation
    timings_s: dict[str, float]


def run(
    cfg: PipelineConfig,
    scorer: FrameScorer,
    embedder: SlotEmbedder,
    backend: ClusteringBackend,
    *,
    audio: AudioBuffer | None = None,
    duration_s: float | None = None,
    recording_id: str = "session",
) -> PipelineRun:
    """Run the full pipeline.

    Provide either ``audio`` (a real waveform) or ``duration_s`` (script
    mode: windowing is simulated over a silent buffer, which suits oracle
    backends that never read samples).
    """
    if (audio is None) == (duration_s is None):
        raise ValueError("provide exactly one of audio or duration_s")
    if audio is None:
        n = round(duration_s * cfg.sample_rate_hz)
        audio = AudioBuffer(samples=np.zeros(n), sample_rate_hz=cfg.sample_rate_hz)

    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    batch = sliding_window(audio, cfg)
    timings["window"] = time.perf_counter() - t0

    codec = build_codec(cfg.max_local_speakers, cfg.max_overlap)
    t0 = time.perf_counter()
    scores = np.stack(
        [
            scorer.score_chunk(batch.chunks[c], batch.span(c), c)
            for c in range(batch.n_chunks)
        ]
    )
    timings["segmentation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    multilabel = np.stack([to_multilabel(scores[c], codec) for c in range(batch.n_chunks)])
    multilabel = median_filter_time(multilabel, cfg.median_kernel_frames).astype(np.int64)
    aggregated = overlap_add(
        multilabel,
        batch.start_samples,
        batch.window_samples,
        fr=cfg.frame_rate,
        sample_rate_hz=cfg.sample_rate_hz,
    )
    count_agg = overlap_add(
        sort_slots(multilabel),
        batch.start_samples,
        batch.window_samples,
        fr=cfg.frame_rate,
        sample_rate_hz=cfg.sample_rate_hz,
    )
    count = speaker_count(count_agg, cfg)
    timings["aggregate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    masks = clean_masks(multilabel, cfg.min_num_frames)
    embeddings = build_embedding_set(
        embedder,
        [batch.span(c) for c in range(batch.n_chunks)],
        masks,
        backend.model.embedding_dim,
        chunk_samples=batch.chunks,
    )
    timings["embedding"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    assignment, vbx_state = assign(embeddings, multilabel, backend)
    timings["clustering"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    clustered = reconstruct(multilabel, assignment)
    annotation, _ = to_diarization(
        clustered,
        batch.start_samples,
        batch.window_samples,
        cfg,
        recording_id,
        fr=cfg.frame_rate,
    )
    timings["reconstruct"] = time.perf_counter() - t0

    return PipelineRun(
        config=cfg,
        recording_id=recording_id,
        codec=codec,
        batch=batch,
        scores=scores,
        multilabel=multilabel,
        aggregated=aggregated,
        count=count,
        masks=masks,
        embeddings=embeddings,
        assignment=assignment,
        vbx_state=vbx_state,
        clustered=clustered,
        annotation=annotation,
        timings_s=timings,
    )


def run_wav(
    path: str,
    cfg: PipelineConfig,
    scorer: FrameScorer,
    embedder: SlotEmbedder,
    backend: ClusteringBackend,
    recording_id: str | None = None,
) -> PipelineRun:
    """Convenience wrapper: load a WAV file and run."""
    audio = load_wav(path)
    rid = recording_id or _stem(path)
    return run(cfg, scorer, embedder, backend, audio=audio, recording_id=rid)


def _stem(path: str) -> str:
    name = path.replace("\\", "/").rsplit("/", 1)[-1]
    return name.rsplit(".", 1)[0] if "." in name else name
