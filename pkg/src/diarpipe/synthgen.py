"""Synthetic meeting scripts with controlled silence and overlap.

Turn-taking model: speakers take exponentially distributed turns (clipped
to a sane range); between consecutive turns there is either a silent gap or
an overlapped hand-over where the next speaker starts before the current
one finishes.  Only adjacent turns may overlap, so at most two speakers are
ever simultaneously active.

The generator targets global silence and overlap fractions.  Because the
process is random, it samples a script, measures the realized fractions on
a 10 ms grid, and if they miss the targets by more than the tolerance it
rescales the gap/overlap knobs and tries again (up to ``max_attempts``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Annotation, TimeSpan
from .scoring import GroundTruthScript

RASTER_STEP_S = 0.01  # resolution used to measure realized fractions
MIN_TURN_S = 0.2


class GenerationError(ValueError):
    """Raised when no script hits the target fractions within max_attempts."""


@dataclass(frozen=True)
class MeetingSpec:
    """Targets for one synthetic meeting."""

    n_speakers: int = 4
    duration_s: float = 30.0
    mean_turn_s: float = 2.0
    silence_target: float = 0.08  # fraction of the timeline with nobody talking
    overlap_target: float = 0.28  # fraction with two simultaneous speakers
    tolerance: float = 0.03  # accepted absolute deviation of either fraction
    seed: int = 0
    max_attempts: int = 100

    def __post_init__(self) -> None:
        if self.n_speakers < 1:
            raise ValueError("n_speakers must be >= 1")
        if self.duration_s <= 4 * MIN_TURN_S:
            raise ValueError("duration_s too short for a meaningful script")
        if self.mean_turn_s < MIN_TURN_S:
            raise ValueError(f"mean_turn_s must be >= {MIN_TURN_S}")
        if not (0.0 <= self.silence_target and 0.0 <= self.overlap_target):
            raise ValueError("targets must be non-negative")
        if self.silence_target + self.overlap_target > 0.9:
            raise ValueError("silence + overlap targets leave too little speech")
        if self.n_speakers == 1 and self.overlap_target > 0.0:
            raise ValueError("a single speaker cannot overlap with themselves")
        if not (0.0 < self.tolerance < 0.5):
            raise ValueError("tolerance must be in (0, 0.5)")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


def measure_fractions(script: GroundTruthScript) -> tuple[float, float]:
    """(silence, overlap) fractions of a script on the 10 ms grid."""
    n = max(1, round(script.duration_s / RASTER_STEP_S))
    centers = (np.arange(n) + 0.5) * RASTER_STEP_S
    counts = np.zeros(n, dtype=np.int64)
    for span, _ in script.segments:
        counts[(centers >= span.start_s) & (centers < span.end_s)] += 1
    return float(np.mean(counts == 0)), float(np.mean(counts >= 2))


def _sample_turns(
    spec: MeetingSpec, rng: np.random.Generator, mean_gap: float, mean_ov: float, p_ov: float
) -> list[tuple[float, float, str]]:
    names = [f"spk{chr(ord('a') + i)}" for i in range(spec.n_speakers)]
    opening = list(rng.permutation(spec.n_speakers))  # everybody gets a turn early

    turns: list[tuple[float, float, str]] = []
    max_end_excl_last = 0.0  # latest end among all turns except the newest
    cursor = 0.0  # end of the newest turn
    while cursor < spec.duration_s - MIN_TURN_S:
        dur = float(np.clip(rng.exponential(spec.mean_turn_s), MIN_TURN_S, 4 * spec.mean_turn_s))
        if not turns:
            start = min(rng.exponential(mean_gap) if mean_gap > 0 else 0.0, 2.0)
        else:
            prev_start, prev_end, _ = turns[-1]
            if spec.n_speakers > 1 and rng.random() < p_ov:
                room = max(0.0, prev_end - max(prev_start, max_end_excl_last))
                o = min(rng.exponential(mean_ov) if mean_ov > 0 else 0.0, 0.9 * room)
                start = prev_end - o
            else:
                start = prev_end + (rng.exponential(mean_gap) if mean_gap > 0 else 0.0)
            start = max(start, max_end_excl_last)
        end = min(start + dur, spec.duration_s)
        if end - start < MIN_TURN_S / 2:
            break
        if len(turns) < spec.n_speakers:
            speaker = names[opening[len(turns)]]
        elif spec.n_speakers == 1:
            speaker = names[0]
        else:
            others = [nm for nm in names if nm != turns[-1][2]]
            speaker = others[int(rng.integers(len(others)))]
        if turns:
            max_end_excl_last = max(max_end_excl_last, turns[-1][1])
        turns.append((start, end, speaker))
        cursor = end
    return turns


def _merge_per_speaker(turns: list[tuple[float, float, str]]) -> list[tuple[TimeSpan, str]]:
    by_speaker: dict[str, list[tuple[float, float]]] = {}
    for start, end, speaker in turns:
        by_speaker.setdefault(speaker, []).append((start, end))
    segments: list[tuple[TimeSpan, str]] = []
    for speaker, spans in by_speaker.items():
        spans.sort()
        merged = [spans[0]]
        for lo, hi in spans[1:]:
            if lo <= merged[-1][1] + 1e-9:  # same speaker may never self-overlap
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        segments.extend((TimeSpan(lo, hi), speaker) for lo, hi in merged)
    return segments


def generate(spec: MeetingSpec) -> GroundTruthScript:
    """Sample a meeting script hitting the requested target fractions.

    Deterministic for a fixed spec (all randomness flows from ``seed``).

    Raises
    ------
    GenerationError
        After ``max_attempts`` failed samples, reporting the best achieved
        fractions.
    """
    rng = np.random.default_rng(spec.seed)
    p_ov = 0.5 if (spec.overlap_target > 0 and spec.n_speakers > 1) else 0.0
    # initial knob settings from the stationary turn-cycle budget
    cycle = spec.mean_turn_s / max(0.2, 1.0 - spec.silence_target + spec.overlap_target)
    mean_gap = spec.silence_target * cycle / max(1e-6, 1.0 - p_ov) if spec.silence_target > 0 else 0.0
    mean_ov = spec.overlap_target * cycle / p_ov if p_ov > 0 else 0.0

    best: tuple[float, GroundTruthScript | None] = (np.inf, None)
    for attempt in range(spec.max_attempts):
        turns = _sample_turns(spec, rng, mean_gap, mean_ov, p_ov)
        if len(turns) < spec.n_speakers:
            continue
        script = GroundTruthScript(
            recording_id=f"synth_{spec.seed}",
            segments=tuple(_merge_per_speaker(turns)),
            duration_s=spec.duration_s,
        )
        sil, ov = measure_fractions(script)
        err = max(abs(sil - spec.silence_target), abs(ov - spec.overlap_target))
        if err < best[0]:
            best = (err, script)
        if (
            abs(sil - spec.silence_target) <= spec.tolerance
            and abs(ov - spec.overlap_target) <= spec.tolerance
        ):
            return script
        # rescale the knobs toward the targets and resample
        if spec.silence_target > 0:
            ratio = spec.silence_target / max(sil, 1e-3)
            mean_gap = float(np.clip(mean_gap * np.clip(ratio, 0.5, 2.0), 1e-3, spec.duration_s))
        if spec.overlap_target > 0:
            ratio = spec.overlap_target / max(ov, 1e-3)
            mean_ov = float(np.clip(mean_ov * np.clip(ratio, 0.5, 2.0), 1e-3, spec.duration_s))
    sil, ov = measure_fractions(best[1]) if best[1] is not None else (float("nan"),) * 2
    raise GenerationError(
        f"no script within tolerance {spec.tolerance} after {spec.max_attempts} attempts; "
        f"best achieved silence={sil:.3f} (target {spec.silence_target}), "
        f"overlap={ov:.3f} (target {spec.overlap_target})"
    )


def script_to_rttm(script: GroundTruthScript) -> Annotation:
    """Reference annotation of a script (segments pass through verbatim)."""
    return script.to_annotation()
