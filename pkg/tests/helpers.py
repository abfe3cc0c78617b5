"""Reference implementations shared by the tests.

Everything in this file is written the slow, obvious way (python loops,
exhaustive enumeration) so the fast vectorized code in the package has an
independent implementation to be checked against.  Keep it dumb.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from diarpipe import Annotation, TimeSpan


def ola_reference(per_chunk, start_frames, total_frames):
    """Per-frame averaging of overlapping chunks, loop by loop."""
    per_chunk = np.asarray(per_chunk, dtype=np.float64)
    n_chunks, frames_per_chunk, n_cols = per_chunk.shape
    acc = np.zeros((total_frames, n_cols))
    cov = np.zeros(total_frames)
    for c in range(n_chunks):
        for f in range(frames_per_chunk):
            t = start_frames[c] + f
            acc[t] += per_chunk[c, f]
            cov[t] += 1
    out = np.zeros_like(acc)
    for t in range(total_frames):
        if cov[t] > 0:
            out[t] = acc[t] / cov[t]
    return out, cov


def median_reference(x, kernel):
    """Sliding median over axis 0 with reflect padding (edge mirrored)."""
    x = np.asarray(x, dtype=np.float64)
    half = kernel // 2
    # reflect: d c b a | a b c d | d c b a
    padded = np.concatenate([x[:half][::-1], x, x[-half:][::-1]]) if half else x
    out = np.empty_like(x)
    for t in range(x.shape[0]):
        out[t] = np.median(padded[t : t + kernel], axis=0)
    return out


def _best_mapping_time(joint):
    """Maximum total time over one-to-one label mappings, by enumeration."""
    n_ref, n_hyp = joint.shape
    best = 0.0
    hyp_choices = list(range(n_hyp)) + [None] * n_ref
    for perm in itertools.permutations(hyp_choices, n_ref):
        total = sum(joint[r, h] for r, h in enumerate(perm) if h is not None)
        best = max(best, total)
    return best


def sampled_der(ref: Annotation, hyp: Annotation, collar_s=0.0, skip_overlap=False, step=0.001):
    """DER by brute-force time sampling at cell midpoints.

    Returns (t_miss, t_fa, t_conf, t_ref).  Exact whenever every boundary
    (segments and collar edges) is a multiple of ``step``: no midpoint can
    then sit on a boundary.  The label mapping is exhaustive enumeration,
    not an assignment solver.
    """
    extent = max(ref.extent_s(), hyp.extent_s())
    n = int(math.ceil(extent / step)) + 1
    mids = (np.arange(n) + 0.5) * step
    ref_labels = ref.labels()
    hyp_labels = hyp.labels()

    def raster(ann, labels):
        act = np.zeros((len(labels), n), dtype=bool)
        for i, lab in enumerate(labels):
            for sp in ann.label_spans(lab):
                act[i] |= (mids >= sp.start_s) & (mids < sp.end_s)
        return act

    r_act = raster(ref, ref_labels)
    h_act = raster(hyp, hyp_labels)

    excluded = np.zeros(n, dtype=bool)
    if collar_s > 0:
        for span, _ in ref.segments:
            for edge in (span.start_s, span.end_s):
                excluded |= (mids >= edge - collar_s) & (mids < edge + collar_s)
    if skip_overlap:
        excluded |= r_act.sum(axis=0) >= 2
    r_act = r_act[:, ~excluded]
    h_act = h_act[:, ~excluded]

    nr = r_act.sum(axis=0)
    nh = h_act.sum(axis=0)
    joint = step * (r_act.astype(np.float64) @ h_act.astype(np.float64).T)
    matched = _best_mapping_time(joint)
    t_ref = step * float(nr.sum())
    t_miss = step * float(np.maximum(0, nr - nh).sum())
    t_fa = step * float(np.maximum(0, nh - nr).sum())
    t_conf = step * float(np.minimum(nr, nh).sum()) - matched
    return t_miss, t_fa, t_conf, t_ref


def adjusted_rand_index(a, b):
    """ARI from the pair-counting contingency table."""
    a = np.asarray(a)
    b = np.asarray(b)
    labels_a = sorted(set(a.tolist()))
    labels_b = sorted(set(b.tolist()))
    table = np.zeros((len(labels_a), len(labels_b)), dtype=np.int64)
    for x, y in zip(a, b):
        table[labels_a.index(x), labels_b.index(y)] += 1
    comb2 = lambda v: v * (v - 1) // 2
    sum_ij = sum(comb2(int(v)) for v in table.flat)
    sum_a = sum(comb2(int(v)) for v in table.sum(axis=1))
    sum_b = sum(comb2(int(v)) for v in table.sum(axis=0))
    total = comb2(len(a))
    expected = sum_a * sum_b / total if total else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return (sum_ij - expected) / (max_index - expected)


def random_annotation(rng, recording_id, labels, extent_s=30.0):
    """Random annotation with millisecond-quantized boundaries.

    Per label, an alternating gap/segment walk along the timeline; every
    boundary is an exact multiple of 1 ms so sampled scoring is exact.
    """
    segments = []
    for lab in labels:
        t_ms = int(rng.integers(0, 2000))
        limit_ms = int(extent_s * 1000)
        while t_ms < limit_ms - 300:
            dur_ms = int(rng.integers(200, 5000))
            end_ms = min(t_ms + dur_ms, limit_ms)
            segments.append((TimeSpan(t_ms / 1000.0, end_ms / 1000.0), lab))
            t_ms = end_ms + int(rng.integers(100, 4000))
    return Annotation(recording_id=recording_id, segments=segments)
