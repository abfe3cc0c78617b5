"""RTTM reading/writing and diarization error rate scoring.

RTTM lines carry ten space-separated fields:

    SPEAKER <file_id> 1 <onset> <duration> <NA> <NA> <label> <NA> <NA>

Onset and duration are written with millisecond precision.  The reader
tolerates arbitrary whitespace runs, blank lines and comments (lines
starting with ``;;`` or ``#``); everything else must be a well-formed
SPEAKER record or parsing fails with the offending line number.

DER is computed exactly on interval arithmetic: the timeline is split at
every segment boundary, speakers are matched one-to-one to maximize jointly
attributed time (an assignment problem), and missed speech, false alarm and
confusion are accumulated per elementary interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Annotation, TimeSpan, quantize_ms


class RttmParseError(ValueError):
    """Raised with file name and line number for malformed RTTM input."""


@dataclass(frozen=True)
class RttmRecord:
    recording_id: str
    onset_s: float
    duration_s: float
    speaker: str

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")


@dataclass(frozen=True)
class DerBreakdown:
    """Time accounting of a scored pair of annotations, in seconds."""

    t_miss: float
    t_fa: float
    t_conf: float
    t_ref: float

    @property
    def der(self) -> float:
        """(miss + false alarm + confusion) / reference speech."""
        return (self.t_miss + self.t_fa + self.t_conf) / self.t_ref


def format_rttm_line(rec: RttmRecord) -> str:
    return (
        f"SPEAKER {rec.recording_id} 1 {rec.onset_s:.3f} {rec.duration_s:.3f} "
        f"<NA> <NA> {rec.speaker} <NA> <NA>"
    )


def write_rttm(path: str, ann: Annotation) -> None:
    """Write an annotation in canonical form (sorted, 3-decimal times)."""
    with open(path, "w", encoding="utf-8") as fh:
        for span, label in ann.segments:
            rec = RttmRecord(
                recording_id=ann.recording_id,
                onset_s=quantize_ms(span.start_s),
                duration_s=quantize_ms(span.duration_s),
                speaker=label,
            )
            fh.write(format_rttm_line(rec) + "\n")


def parse_rttm_lines(lines: list[str], source: str = "<rttm>") -> list[RttmRecord]:
    records: list[RttmRecord] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith(";;") or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 10:
            raise RttmParseError(
                f"{source}:{lineno}: expected 10 fields, got {len(fields)}"
            )
        if fields[0] != "SPEAKER":
            raise RttmParseError(
                f"{source}:{lineno}: unsupported record type {fields[0]!r}"
            )
        try:
            onset = float(fields[3])
            duration = float(fields[4])
        except ValueError:
            raise RttmParseError(
                f"{source}:{lineno}: non-numeric onset/duration "
                f"({fields[3]!r}, {fields[4]!r})"
            )
        if duration <= 0:
            raise RttmParseError(f"{source}:{lineno}: non-positive duration {duration}")
        records.append(
            RttmRecord(
                recording_id=fields[1],
                onset_s=onset,
                duration_s=duration,
                speaker=fields[7],
            )
        )
    return records


def records_to_annotation(records: list[RttmRecord], source: str = "<rttm>") -> Annotation:
    """Collect records for one recording into an Annotation.

    Boundaries are quantized to whole milliseconds (the resolution of the
    format), so reading back a written file reproduces the exact spans.
    """
    ids = {r.recording_id for r in records}
    if len(ids) > 1:
        raise RttmParseError(
            f"{source}: contains {len(ids)} recording ids {sorted(ids)}; expected one"
        )
    recording_id = next(iter(ids)) if ids else ""
    segments = []
    for r in records:
        start = quantize_ms(r.onset_s)
        end = quantize_ms(r.onset_s + r.duration_s)
        if end <= start:
            raise RttmParseError(
                f"{source}: segment for {r.speaker!r} at {r.onset_s:.6f}s has "
                "sub-millisecond duration"
            )
        segments.append((TimeSpan(start, end), r.speaker))
    return Annotation(recording_id=recording_id, segments=segments)


def read_rttm(path: str) -> Annotation:
    """Read a single-recording RTTM file.

    An empty file yields an empty annotation with an empty recording id.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    return records_to_annotation(parse_rttm_lines(lines, source=path), source=path)


# --- DER -------------------------------------------------------------------


def _merge_intervals(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def _excluded_regions(ref: Annotation, collar_s: float, skip_overlap: bool) -> list[tuple[float, float]]:
    zones: list[tuple[float, float]] = []
    if collar_s > 0:
        for span, _ in ref.segments:
            zones.append((span.start_s - collar_s, span.start_s + collar_s))
            zones.append((span.end_s - collar_s, span.end_s + collar_s))
    if skip_overlap:
        points = sorted({t for span, _ in ref.segments for t in (span.start_s, span.end_s)})
        for lo, hi in zip(points[:-1], points[1:]):
            mid = 0.5 * (lo + hi)
            n_active = sum(1 for span, _ in ref.segments if span.contains(mid))
            if n_active >= 2:
                zones.append((lo, hi))
    return _merge_intervals(zones)


def _in_excluded(t: float, zones: list[tuple[float, float]]) -> bool:
    return any(lo <= t < hi for lo, hi in zones)


def der(
    ref: Annotation,
    hyp: Annotation,
    collar_s: float = 0.0,
    skip_overlap: bool = False,
) -> DerBreakdown:
    """Diarization error rate of ``hyp`` against ``ref``.

    The speaker mapping is the exact optimum (maximum jointly attributed
    time over one-to-one label matchings).  ``collar_s`` excludes that many
    seconds on each side of every reference boundary from scoring;
    ``skip_overlap`` additionally excludes regions where the reference has
    two or more simultaneous speakers.  Overlapping speech is otherwise
    scored, and reference time counts each active speaker separately.

    Raises
    ------
    ValueError
        If no reference speech remains after exclusions.
    """
    zones = _excluded_regions(ref, collar_s, skip_overlap)

    points: set[float] = set()
    for ann in (ref, hyp):
        for span, _ in ann.segments:
            points.add(span.start_s)
            points.add(span.end_s)
    for lo, hi in zones:
        points.add(lo)
        points.add(hi)
    grid = sorted(points)

    ref_labels = ref.labels()
    hyp_labels = hyp.labels()
    r_index = {lab: i for i, lab in enumerate(ref_labels)}
    h_index = {lab: i for i, lab in enumerate(hyp_labels)}

    # one pass to collect elementary intervals and the joint-time matrix
    cells: list[tuple[float, list[int], list[int]]] = []
    joint = np.zeros((len(ref_labels), len(hyp_labels)))
    for lo, hi in zip(grid[:-1], grid[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        if _in_excluded(mid, zones):
            continue
        r_active = [r_index[lab] for span, lab in ref.segments if span.contains(mid)]
        h_active = [h_index[lab] for span, lab in hyp.segments if span.contains(mid)]
        if not r_active and not h_active:
            continue
        dur = hi - lo
        cells.append((dur, r_active, h_active))
        for ri in r_active:
            for hi_ in h_active:
                joint[ri, hi_] += dur

    t_ref = sum(dur * len(r_active) for dur, r_active, _ in cells)
    if t_ref <= 0:
        raise ValueError("reference contains no scored speech; DER is undefined")

    mapped: dict[int, int] = {}
    if joint.size:
        rows, cols = linear_sum_assignment(joint, maximize=True)
        mapped = {int(r): int(c) for r, c in zip(rows, cols)}

    t_miss = t_fa = t_conf = 0.0
    for dur, r_active, h_active in cells:
        n_ref, n_hyp = len(r_active), len(h_active)
        h_set = set(h_active)
        n_correct = sum(1 for ri in r_active if mapped.get(ri) in h_set)
        t_miss += dur * max(0, n_ref - n_hyp)
        t_fa += dur * max(0, n_hyp - n_ref)
        t_conf += dur * (min(n_ref, n_hyp) - n_correct)
    return DerBreakdown(t_miss=t_miss, t_fa=t_fa, t_conf=t_conf, t_ref=t_ref)
