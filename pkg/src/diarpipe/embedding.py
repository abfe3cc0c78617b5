"""Per-slot speaker embeddings and the masks that select their frames.

An embedding summarizes one (chunk, slot) pair.  To keep it clean of other
voices, pooling is restricted to frames where that slot is the only active
speaker.  When a slot never speaks alone (fewer clean frames than
``min_num_frames``), the mask falls back to the slot's full activity so the
slot still gets an embedding.

The embedding network itself is pluggable.  :class:`SyntheticEmbedder`
fabricates embeddings from a ground-truth script and a PLDA generator: the
vector is the global speaker's mean plus within-speaker noise shrunk by
sqrt(number of pooled frames), lifted to embedding space and
length-normalized.  :class:`ImportedEmbedder` replays vectors from a file.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .core import TimeSpan
from .plda import PldaGenerator
from .scoring import GroundTruthScript, assign_local_slots


@dataclass(frozen=True)
class CleanMaskSet:
    """Frame selection masks for embedding pooling."""

    masks: np.ndarray  # (chunks, frames, slots) in {0, 1}
    fallback_used: np.ndarray  # (chunks, slots) bool


@dataclass(frozen=True)
class EmbeddingSet:
    """One embedding per (chunk, slot); invalid entries must not be read."""

    vectors: np.ndarray  # (chunks, slots, dim)
    valid: np.ndarray  # (chunks, slots) bool


def clean_masks(multilabel: np.ndarray, min_num_frames: int = 1) -> CleanMaskSet:
    """Select single-speaker frames per slot, with a fallback.

    ``multilabel`` is (chunks, frames, slots) binary activity.  The clean
    mask keeps a slot's frames where the total number of active slots is
    below two.  Slots whose clean frames number fewer than
    ``min_num_frames`` but that are active somewhere fall back to their
    full activity mask.  Slots with no activity at all keep an empty mask.
    """
    act = np.asarray(multilabel)
    if act.ndim != 3:
        raise ValueError(f"multilabel must be (chunks, frames, slots), got {act.shape}")
    if min_num_frames < 1:
        raise ValueError("min_num_frames must be >= 1")
    solo = act.sum(axis=2, keepdims=True) < 2
    masks = (act * solo).astype(np.float64)
    clean_counts = masks.sum(axis=1)  # (chunks, slots)
    active_counts = act.sum(axis=1)
    fallback = (clean_counts < min_num_frames) & (active_counts >= 1)
    c_idx, s_idx = np.nonzero(fallback)
    for c, s in zip(c_idx, s_idx):
        masks[c, :, s] = act[c, :, s]
    return CleanMaskSet(masks=masks, fallback_used=fallback)


class SlotEmbedder(Protocol):
    """Produces the embedding of one (chunk, slot), or None when invalid."""

    def embed_slot(
        self,
        chunk_index: int,
        span: TimeSpan,
        slot: int,
        mask: np.ndarray,
        samples: np.ndarray | None,
    ) -> np.ndarray | None: ...


@dataclass(frozen=True)
class SyntheticEmbedder:
    """Embedding oracle driven by a script and a PLDA generator.

    Deterministic: the noise stream is keyed by (generator seed, chunk
    index, slot), and speaker means are keyed by the speaker's position in
    the script's speaker order.  More pooled frames mean proportionally
    less noise (standard error of a mean), so long clean regions give very
    stable embeddings.
    """

    script: GroundTruthScript
    generator: PldaGenerator
    n_slots: int = 4  # must match the scorer's slot count for identical truncation

    def embed_slot(
        self,
        chunk_index: int,
        span: TimeSpan,
        slot: int,
        mask: np.ndarray,
        samples: np.ndarray | None = None,
    ) -> np.ndarray | None:
        n_pooled = float(np.sum(mask))
        if n_pooled < 1:
            return None
        model = self.generator.model
        slots = assign_local_slots(self.script, span, self.n_slots)
        if slot >= len(slots):
            return None
        speaker_index = self.script.speaker_order().index(slots[slot])
        y = self.generator.observation(
            speaker_index, (chunk_index, slot), scale=1.0 / np.sqrt(n_pooled)
        )
        e = model.lda @ y
        norm = np.linalg.norm(e)
        return e / norm if norm > 0 else e


@dataclass(frozen=True)
class ImportedEmbedder:
    """Replays an EmbeddingSet loaded from a file."""

    embeddings: EmbeddingSet

    def embed_slot(
        self,
        chunk_index: int,
        span: TimeSpan,
        slot: int,
        mask: np.ndarray,
        samples: np.ndarray | None = None,
    ) -> np.ndarray | None:
        if chunk_index >= self.embeddings.vectors.shape[0]:
            raise ValueError(
                f"embedding file covers {self.embeddings.vectors.shape[0]} chunks, "
                f"chunk {chunk_index} requested"
            )
        if not self.embeddings.valid[chunk_index, slot]:
            return None
        return self.embeddings.vectors[chunk_index, slot]


def build_embedding_set(
    embedder: SlotEmbedder,
    spans: list[TimeSpan],
    masks: CleanMaskSet,
    dim: int,
    chunk_samples: np.ndarray | None = None,
) -> EmbeddingSet:
    """Run an embedder over every (chunk, slot) pair."""
    n_chunks, _, n_slots = masks.masks.shape
    vectors = np.zeros((n_chunks, n_slots, dim))
    valid = np.zeros((n_chunks, n_slots), dtype=bool)
    for c in range(n_chunks):
        samples = chunk_samples[c] if chunk_samples is not None else None
        for s in range(n_slots):
            vec = embedder.embed_slot(c, spans[c], s, masks.masks[c, :, s], samples)
            if vec is None:
                continue
            if vec.shape != (dim,):
                raise ValueError(f"embedder returned shape {vec.shape}, expected ({dim},)")
            vectors[c, s] = vec
            valid[c, s] = True
    return EmbeddingSet(vectors=vectors, valid=valid)


# --- embedding files ---------------------------------------------------------
#
# Text format: header "embeddings <n_chunks> <n_slots> <dim>", then
# n_chunks * n_slots lines of dim floats, chunk-major then slot.  A row of
# NaN marks an invalid (chunk, slot).


def write_embeddings(path: str, emb: EmbeddingSet) -> None:
    n_chunks, n_slots, dim = emb.vectors.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"embeddings {n_chunks} {n_slots} {dim}\n")
        for c in range(n_chunks):
            for s in range(n_slots):
                if emb.valid[c, s]:
                    fh.write(" ".join(f"{v:.17g}" for v in emb.vectors[c, s]) + "\n")
                else:
                    fh.write(" ".join(["nan"] * dim) + "\n")


def read_embeddings(
    path: str,
    expected_chunks: int | None = None,
    expected_slots: int | None = None,
    expected_dim: int | None = None,
) -> EmbeddingSet:
    """Load an embedding file; NaN rows become invalid entries.

    Vectors whose norm strays from one by more than 1e-3 are length-
    normalized with a warning (embeddings are unit-norm by contract).
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "embeddings":
            raise ValueError(f"{path}: expected 'embeddings <chunks> <slots> <dim>' header")
        try:
            n_chunks, n_slots, dim = (int(v) for v in header[1:])
        except ValueError:
            raise ValueError(f"{path}: malformed header {header!r}")
        for name, got, want in (
            ("chunks", n_chunks, expected_chunks),
            ("slots", n_slots, expected_slots),
            ("dim", dim, expected_dim),
        ):
            if want is not None and got != want:
                raise ValueError(f"{path}: header says {got} {name}, expected {want}")
        values = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if values.shape != (n_chunks * n_slots, dim):
        raise ValueError(
            f"{path}: expected {n_chunks * n_slots} rows of {dim} values, "
            f"got array of shape {values.shape}"
        )
    valid_rows = ~np.isnan(values).any(axis=1)
    norms = np.linalg.norm(values, axis=1)
    off = valid_rows & (np.abs(norms - 1.0) > 1e-3)
    if off.any():
        warnings.warn(
            f"{path}: {int(off.sum())} embeddings are not unit-norm; renormalizing",
            stacklevel=2,
        )
        bad = off & (norms > 0)
        values[bad] = values[bad] / norms[bad, None]
    vectors = np.where(valid_rows[:, None], np.nan_to_num(values), 0.0)
    return EmbeddingSet(
        vectors=vectors.reshape(n_chunks, n_slots, dim),
        valid=valid_rows.reshape(n_chunks, n_slots),
    )
