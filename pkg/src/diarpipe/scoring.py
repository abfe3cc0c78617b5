"""Frame scorers: pluggable sources of powerset class scores.

The neural segmentation model is abstracted behind the ``FrameScorer``
protocol.  Two backends are provided:

- :class:`OracleScorer` derives scores from a ground-truth script.  It
  reproduces the behavior that makes the downstream pipeline non-trivial:
  speakers are assigned to chunk-local slots in order of first activity
  inside each chunk, so the same speaker occupies different slots in
  different chunks and only clustering can stitch identities together.
- :class:`ImportedScorer` replays per-chunk scores from a text file
  (e.g. exported from a real model).

Scores are log-probabilities over powerset classes, one row per frame.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .core import Annotation, FrameRate, TimeSpan, frames_for_samples
from .powerset import PowersetCodec, _logsumexp_rows


@dataclass(frozen=True)
class GroundTruthScript:
    """Reference speech activity for one synthetic or real recording."""

    recording_id: str
    segments: tuple[tuple[TimeSpan, str], ...]  # who speaks when
    duration_s: float  # total recording length, may exceed the last segment

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "segments",
            tuple(sorted(self.segments, key=lambda p: (p[0].start_s, p[1]))),
        )
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        last = max((span.end_s for span, _ in self.segments), default=0.0)
        if last > self.duration_s + 1e-9:
            raise ValueError("segments extend past duration_s")

    @classmethod
    def from_annotation(cls, ann: Annotation, duration_s: float | None = None) -> "GroundTruthScript":
        dur = duration_s if duration_s is not None else ann.extent_s()
        return cls(recording_id=ann.recording_id, segments=tuple(ann.segments), duration_s=dur)

    def to_annotation(self) -> Annotation:
        return Annotation(recording_id=self.recording_id, segments=list(self.segments))

    def speaker_order(self) -> list[str]:
        """All speakers, by first appearance in the script."""
        seen: list[str] = []
        for span, label in self.segments:
            if label not in seen:
                seen.append(label)
        return seen

    def active_labels(self, t_s: float) -> set[str]:
        return {label for span, label in self.segments if span.contains(t_s)}


def assign_local_slots(script: GroundTruthScript, span: TimeSpan, n_slots: int) -> list[str]:
    """Chunk-local slot assignment: which speaker occupies each slot.

    Speakers with any activity inside ``span`` are ranked by first activity
    time within the span; the returned list maps slot index to speaker
    label.  When more speakers are active than there are slots, the
    longest-active ones (within the span) are kept.  Deterministic: ties
    break on (time, label).
    """
    stats: dict[str, tuple[float, float]] = {}  # label -> (first_t, duration)
    for seg_span, label in script.segments:
        ov = seg_span.overlap_s(span)
        if ov <= 0:
            continue
        first = max(seg_span.start_s, span.start_s)
        prev = stats.get(label)
        if prev is None:
            stats[label] = (first, ov)
        else:
            stats[label] = (min(prev[0], first), prev[1] + ov)
    labels = list(stats)
    if len(labels) > n_slots:
        labels.sort(key=lambda lab: (-stats[lab][1], stats[lab][0], lab))
        labels = labels[:n_slots]
    labels.sort(key=lambda lab: (stats[lab][0], lab))
    return labels


def rasterize_local_activity(
    script: GroundTruthScript,
    span: TimeSpan,
    slots: list[str],
    n_frames: int,
    fr: FrameRate,
    sample_rate_hz: int,
) -> np.ndarray:
    """Per-frame binary activity of each slot inside one chunk.

    Frame f is active for a slot when the slot's speaker is active at the
    frame's center time.  Returns (n_frames, len(slots)) in {0, 1}.
    """
    centers = (
        span.start_s
        + (np.arange(n_frames) * fr.conv_hop_samples + fr.conv_window_samples / 2)
        / sample_rate_hz
    )
    act = np.zeros((n_frames, len(slots)), dtype=np.int64)
    for seg_span, label in script.segments:
        if label not in slots:
            continue
        col = slots.index(label)
        on = (centers >= seg_span.start_s) & (centers < seg_span.end_s)
        act[on, col] = 1
    return act


def truncate_overlaps(
    activity: np.ndarray, slot_durations: np.ndarray, max_overlap: int
) -> np.ndarray:
    """Drop excess simultaneous speakers, keeping the longest-active slots.

    Frames with more than ``max_overlap`` active slots retain the
    ``max_overlap`` slots with the greatest total activity in the chunk
    (ties toward the lower slot index).
    """
    act = activity.copy()
    counts = act.sum(axis=1)
    # priority: stable order of slots by decreasing chunk-level duration
    priority = np.argsort(-slot_durations, kind="stable")
    for t in np.nonzero(counts > max_overlap)[0]:
        keep: list[int] = []
        for slot in priority:
            if act[t, slot] and len(keep) < max_overlap:
                keep.append(int(slot))
        row = np.zeros_like(act[t])
        row[keep] = 1
        act[t] = row
    return act


class FrameScorer(Protocol):
    """Anything that yields powerset scores for one chunk of waveform."""

    def score_chunk(
        self, samples: np.ndarray, span: TimeSpan, chunk_index: int
    ) -> np.ndarray: ...


@dataclass(frozen=True)
class OracleScorerConfig:
    p_correct: float = 0.95  # probability mass on the true class
    label_noise: float = 0.0  # per-frame chance of swapping the peak away
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.p_correct <= 1.0):
            raise ValueError("p_correct must be in (0, 1]")
        if not (0.0 <= self.label_noise <= 1.0):
            raise ValueError("label_noise must be in [0, 1]")


@dataclass(frozen=True)
class OracleScorer:
    """Frame scorer backed by a ground-truth script.

    Each frame's true powerset class receives ``p_correct`` probability
    mass; the remainder is spread uniformly over the other classes.  With
    ``label_noise`` > 0, a frame's peak is swapped with a uniformly random
    class with that probability.  Randomness is drawn from a stream keyed
    by (seed, chunk index), so chunks can be scored in any order and the
    result never changes.
    """

    script: GroundTruthScript
    codec: PowersetCodec
    cfg: OracleScorerConfig = field(default_factory=OracleScorerConfig)
    frame_rate: FrameRate = field(default_factory=FrameRate)
    sample_rate_hz: int = 16000

    def true_activity(self, span: TimeSpan, chunk_index: int) -> np.ndarray:
        """Slot activity after truncation; what the scores encode."""
        n_frames = frames_for_samples(
            round(span.duration_s * self.sample_rate_hz), self.frame_rate
        )
        slots = assign_local_slots(self.script, span, self.codec.n_speakers)
        act = rasterize_local_activity(
            self.script, span, slots, n_frames, self.frame_rate, self.sample_rate_hz
        )
        durations = act.sum(axis=0).astype(np.float64)
        act = truncate_overlaps(act, durations, self.codec.max_overlap)
        full = np.zeros((n_frames, self.codec.n_speakers), dtype=np.int64)
        full[:, : act.shape[1]] = act
        return full

    def score_chunk(
        self, samples: np.ndarray, span: TimeSpan, chunk_index: int
    ) -> np.ndarray:
        act = self.true_activity(span, chunk_index)
        n_frames = act.shape[0]
        k = self.codec.n_classes
        # class index per frame via bitmask lookup
        bits = act @ (1 << np.arange(self.codec.n_speakers))
        lookup = np.full(1 << self.codec.n_speakers, -1, dtype=np.int64)
        for idx, cls in enumerate(self.codec.classes):
            lookup[sum(1 << s for s in cls)] = idx
        true_class = lookup[bits]
        assert (true_class >= 0).all()

        p = self.cfg.p_correct
        if p == 1.0:
            with np.errstate(divide="ignore"):
                scores = np.full((n_frames, k), -np.inf)
            scores[np.arange(n_frames), true_class] = 0.0
        else:
            rest = np.log((1.0 - p) / (k - 1))
            scores = np.full((n_frames, k), rest)
            scores[np.arange(n_frames), true_class] = np.log(p)

        if self.cfg.label_noise > 0.0:
            rng = np.random.default_rng((self.cfg.seed, chunk_index))
            flip = rng.random(n_frames) < self.cfg.label_noise
            swap_to = rng.integers(0, k, size=n_frames)
            for t in np.nonzero(flip)[0]:
                a, b = true_class[t], swap_to[t]
                scores[t, [a, b]] = scores[t, [b, a]]
        return scores


@dataclass(frozen=True)
class ImportedScorer:
    """Replays scores loaded from a file, one block per chunk."""

    per_chunk: tuple[np.ndarray, ...]

    def score_chunk(
        self, samples: np.ndarray, span: TimeSpan, chunk_index: int
    ) -> np.ndarray:
        if chunk_index >= len(self.per_chunk):
            raise ValueError(
                f"score file covers {len(self.per_chunk)} chunks, "
                f"chunk {chunk_index} requested"
            )
        return self.per_chunk[chunk_index]


# --- score files -------------------------------------------------------------
#
# Text format: a header line "scores <n_chunks> <n_frames> <n_classes>",
# then n_chunks * n_frames lines of n_classes floats, chunk-major.


def write_scores(path: str, per_chunk: list[np.ndarray]) -> None:
    if not per_chunk:
        raise ValueError("no chunks to write")
    n_frames, n_classes = per_chunk[0].shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"scores {len(per_chunk)} {n_frames} {n_classes}\n")
        for block in per_chunk:
            if block.shape != (n_frames, n_classes):
                raise ValueError("all chunks must share one shape")
            for row in block:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_scores(
    path: str,
    expected_chunks: int | None = None,
    expected_frames: int | None = None,
    expected_classes: int | None = None,
) -> list[np.ndarray]:
    """Load per-chunk score blocks, validating shape and normalization.

    Rows whose log-probabilities do not sum to one (|logsumexp| > 1e-3) are
    renormalized with a warning.  NaN values are an error naming the chunk
    and frame.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "scores":
            raise ValueError(f"{path}: expected 'scores <chunks> <frames> <classes>' header")
        try:
            n_chunks, n_frames, n_classes = (int(v) for v in header[1:])
        except ValueError:
            raise ValueError(f"{path}: malformed header {header!r}")
        for name, got, want in (
            ("chunks", n_chunks, expected_chunks),
            ("frames", n_frames, expected_frames),
            ("classes", n_classes, expected_classes),
        ):
            if want is not None and got != want:
                raise ValueError(f"{path}: header says {got} {name}, expected {want}")
        values = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if values.shape != (n_chunks * n_frames, n_classes):
        raise ValueError(
            f"{path}: expected {n_chunks * n_frames} rows of {n_classes} values, "
            f"got array of shape {values.shape}"
        )
    if np.isnan(values).any():
        flat = int(np.nonzero(np.isnan(values).any(axis=1))[0][0])
        raise ValueError(
            f"{path}: NaN score at chunk {flat // n_frames}, frame {flat % n_frames}"
        )
    blocks = [values[i * n_frames : (i + 1) * n_frames].copy() for i in range(n_chunks)]
    worst = 0.0
    for block in blocks:
        lse = _logsumexp_rows(block)
        worst = max(worst, float(np.max(np.abs(lse))) if lse.size else 0.0)
    if worst > 1e-3:
        warnings.warn(
            f"{path}: scores were not normalized (max |logsumexp| = {worst:.3g}); "
            "renormalizing",
            stacklevel=2,
        )
        blocks = [block - _logsumexp_rows(block)[:, None] for block in blocks]
    return blocks
