"""Powerset encoding of joint speaker activity.

The segmentation front end classifies each frame into one of K classes,
where each class is a subset of the local speaker slots with at most
``max_overlap`` members.  Classes are ordered by cardinality first (empty
set, singletons, pairs, ...), lexicographically within a cardinality.  For
4 slots and overlap 2 that gives 1 + 4 + 6 = 11 classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np


@dataclass(frozen=True)
class PowersetCodec:
    """Bidirectional mapping between class indices and speaker subsets."""

    n_speakers: int  # local slots per chunk
    max_overlap: int  # largest subset size encoded
    classes: tuple[frozenset[int], ...]  # index -> slot subset
    mapping: np.ndarray  # (n_classes, n_speakers) binary matrix

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def encode(self, active: frozenset[int] | set[int]) -> int:
        """Class index for a set of active slots.

        Raises ValueError for unknown slots or sets larger than max_overlap.
        """
        key = frozenset(active)
        if len(key) > self.max_overlap:
            raise ValueError(
                f"{len(key)} simultaneous speakers exceed max_overlap={self.max_overlap}"
            )
        if not key <= frozenset(range(self.n_speakers)):
            raise ValueError(f"unknown speaker slots in {sorted(key)}")
        return self.classes.index(key)

    def decode(self, index: int) -> frozenset[int]:
        return self.classes[index]


def build_codec(n_speakers: int, max_overlap: int) -> PowersetCodec:
    """Enumerate the powerset classes for ``n_speakers`` slots.

    The class count is ``sum(comb(n_speakers, k) for k in 0..max_overlap)``.
    """
    if n_speakers < 1:
        raise ValueError("n_speakers must be >= 1")
    if not (1 <= max_overlap <= n_speakers):
        raise ValueError("max_overlap must be in [1, n_speakers]")
    classes: list[frozenset[int]] = []
    for k in range(max_overlap + 1):
        for combo in combinations(range(n_speakers), k):
            classes.append(frozenset(combo))
    assert len(classes) == sum(comb(n_speakers, k) for k in range(max_overlap + 1))
    mapping = np.zeros((len(classes), n_speakers), dtype=np.int64)
    for idx, cls in enumerate(classes):
        mapping[idx, sorted(cls)] = 1
    return PowersetCodec(
        n_speakers=n_speakers,
        max_overlap=max_overlap,
        classes=tuple(classes),
        mapping=mapping,
    )


def to_multilabel(scores: np.ndarray, codec: PowersetCodec) -> np.ndarray:
    """Collapse frame-level class scores to per-slot binary activity.

    ``scores`` is (frames, n_classes); rows are log-probabilities (or any
    scores where larger means more likely).  Each frame takes the argmax
    class, ties resolved toward the lowest index, and is expanded through
    the codec's mapping matrix.  Returns (frames, n_speakers) in {0, 1}.
    """
    scores = np.asarray(scores)
    if scores.ndim != 2 or scores.shape[1] != codec.n_classes:
        raise ValueError(f"scores must be (frames, {codec.n_classes}), got {scores.shape}")
    best = np.argmax(scores, axis=1)  # np.argmax keeps the lowest index on ties
    return codec.mapping[best].astype(np.int64)


def validate_frame_scores(scores: np.ndarray, codec: PowersetCodec, tol: float = 1e-5) -> None:
    """Check that rows are normalized log-probability distributions."""
    scores = np.asarray(scores)
    if scores.ndim != 2 or scores.shape[1] != codec.n_classes:
        raise ValueError(f"expected (frames, {codec.n_classes}) scores, got {scores.shape}")
    if np.isnan(scores).any():
        raise ValueError("frame scores contain NaN")
    lse = _logsumexp_rows(scores)
    worst = float(np.max(np.abs(lse))) if lse.size else 0.0
    if worst > tol:
        raise ValueError(f"frame scores are not normalized (max |logsumexp| = {worst:.3g})")


def _logsumexp_rows(scores: np.ndarray) -> np.ndarray:
    m = np.max(scores, axis=1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)  # rows of all -inf stay -inf
    return (m + np.log(np.sum(np.exp(scores - m), axis=1, keepdims=True)))[:, 0]
