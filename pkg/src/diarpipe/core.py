"""Shared types, frame arithmetic and configuration.

Conventions used across the package:

- All timing is in seconds unless a name says otherwise (``*_samples``,
  ``*_frames``).
- The segmentation front end consumes fixed-length windows of waveform and
  emits one score vector per analysis frame.  The frame grid is defined by a
  strided convolution stack: ``conv_window_samples`` samples of receptive
  field advancing by ``conv_hop_samples`` samples per frame.
- Frame ``i`` is anchored at the center of its receptive field, i.e. at
  ``(i * hop + window / 2) / sample_rate`` seconds.
- Speaker activity spans are half-open intervals ``[start_s, end_s)``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Raised for invalid configuration values or unparseable config files."""


@dataclass(frozen=True, order=True)
class TimeSpan:
    """Half-open time interval ``[start_s, end_s)`` in seconds."""

    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if not (self.end_s > self.start_s):
            raise ValueError(
                f"TimeSpan requires end_s > start_s, got [{self.start_s}, {self.end_s})"
            )

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def overlap_s(self, other: "TimeSpan") -> float:
        """Length of the intersection with ``other`` (0.0 when disjoint)."""
        lo = max(self.start_s, other.start_s)
        hi = min(self.end_s, other.end_s)
        return max(0.0, hi - lo)

    def contains(self, t: float) -> bool:
        return self.start_s <= t < self.end_s


@dataclass(frozen=True)
class FrameRate:
    """Frame grid of the segmentation front end.

    The front end sees ``conv_window_samples`` per frame and advances by
    ``conv_hop_samples``.  Defaults give 50 frames per second at 16 kHz.
    """

    conv_window_samples: int = 400  # receptive field per frame
    conv_hop_samples: int = 320  # stride between frames

    def __post_init__(self) -> None:
        if self.conv_window_samples <= 0 or self.conv_hop_samples <= 0:
            raise ValueError("conv window and hop must be positive")


def frames_for_samples(n_samples: int, fr: FrameRate = FrameRate()) -> int:
    """Number of analysis frames produced for ``n_samples`` of waveform.

    floor((n - window) / hop) + 1, the usual strided-convolution count.

    Raises
    ------
    ValueError
        If the input is shorter than one analysis window.
    """
    if n_samples < fr.conv_window_samples:
        raise ValueError(
            f"input of {n_samples} samples is shorter than one analysis window "
            f"({fr.conv_window_samples} samples)"
        )
    return (n_samples - fr.conv_window_samples) // fr.conv_hop_samples + 1


def frame_to_time(frame: int, fr: FrameRate = FrameRate(), sample_rate_hz: int = 16000) -> float:
    """Center time in seconds of frame ``frame`` on the analysis grid."""
    center = frame * fr.conv_hop_samples + fr.conv_window_samples / 2
    return center / sample_rate_hz


def time_to_frame(t_s: float, fr: FrameRate = FrameRate(), sample_rate_hz: int = 16000) -> int:
    """Index of the frame whose center is nearest to time ``t_s``.

    Inverse of :func:`frame_to_time` on frame centers.  Clipped below at 0.
    """
    i = round((t_s * sample_rate_hz - fr.conv_window_samples / 2) / fr.conv_hop_samples)
    return max(0, int(i))


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the diarization pipeline, with working defaults.

    Derived quantities (window and hop in samples) are properties so a config
    can never carry inconsistent values.
    """

    sample_rate_hz: int = 16000
    seg_duration_s: float = 16.0  # waveform seconds per segmentation window
    segmentation_step: float = 0.1  # hop between windows, fraction of window
    max_local_speakers: int = 4  # slots per window the segmenter can track
    max_overlap: int = 2  # max simultaneous speakers per frame
    median_kernel_frames: int = 11  # temporal median smoothing, must be odd
    binarize_onset: float = 0.5
    binarize_offset: float = 0.5
    max_speakers: int = 20  # cap on the instantaneous speaker count
    ahc_threshold: float = 0.6  # stop merging below this PLDA similarity
    vbx_max_iters: int = 20
    vbx_loop_p: float = 0.9  # HMM self-loop probability
    vbx_fa: float = 0.07  # acoustic log-likelihood scale
    vbx_fb: float = 0.8  # speaker prior regularization scale
    embedding_dim: int = 256
    lda_dim: int = 128
    min_num_frames: int = 1  # clean-mask fallback threshold, in frames
    frame_rate: FrameRate = field(default_factory=FrameRate)

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be positive")
        if self.seg_duration_s <= 0:
            raise ConfigError("seg_duration_s must be positive")
        if not (0.0 < self.segmentation_step <= 1.0):
            raise ConfigError("segmentation_step must be in (0, 1]")
        if self.max_local_speakers < 1:
            raise ConfigError("max_local_speakers must be >= 1")
        if not (1 <= self.max_overlap <= self.max_local_speakers):
            raise ConfigError("max_overlap must be in [1, max_local_speakers]")
        if self.median_kernel_frames < 1 or self.median_kernel_frames % 2 == 0:
            raise ConfigError("median_kernel_frames must be odd and >= 1")
        if not (0.0 <= self.binarize_offset <= 1.0 and 0.0 <= self.binarize_onset <= 1.0):
            raise ConfigError("binarize thresholds must be in [0, 1]")
        if self.max_speakers < 1:
            raise ConfigError("max_speakers must be >= 1")
        if self.vbx_max_iters < 1:
            raise ConfigError("vbx_max_iters must be >= 1")
        if not (0.0 < self.vbx_loop_p < 1.0):
            raise ConfigError("vbx_loop_p must be in (0, 1)")
        if self.vbx_fa <= 0 or self.vbx_fb <= 0:
            raise ConfigError("vbx_fa and vbx_fb must be positive")
        if self.embedding_dim < 1 or self.lda_dim < 1:
            raise ConfigError("embedding_dim and lda_dim must be >= 1")
        if self.lda_dim > self.embedding_dim:
            raise ConfigError("lda_dim cannot exceed embedding_dim")
        if self.min_num_frames < 1:
            raise ConfigError("min_num_frames must be >= 1")
        if self.window_samples < self.frame_rate.conv_window_samples:
            raise ConfigError("segmentation window is shorter than one analysis frame")
        if self.hop_samples < 1:
            raise ConfigError("segmentation_step rounds to a zero-sample hop")

    @property
    def window_samples(self) -> int:
        """Segmentation window length in samples."""
        return round(self.seg_duration_s * self.sample_rate_hz)

    @property
    def hop_samples(self) -> int:
        """Hop between consecutive segmentation windows in samples."""
        return round(self.segmentation_step * self.window_samples)

    @property
    def frames_per_chunk(self) -> int:
        return frames_for_samples(self.window_samples, self.frame_rate)


@dataclass
class Annotation:
    """A diarization result: labeled speech segments for one recording.

    Segments are kept sorted by (start, label).  Within one label the
    segments must be non-overlapping; different labels may overlap freely.
    """

    recording_id: str
    segments: list[tuple[TimeSpan, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.segments = sorted(self.segments, key=lambda p: (p[0].start_s, p[1], p[0].end_s))
        by_label: dict[str, float] = {}
        for span, label in self.segments:
            prev_end = by_label.get(label)
            if prev_end is not None and span.start_s < prev_end - 1e-12:
                raise ValueError(
                    f"segments for speaker {label!r} overlap at {span.start_s:.3f}s"
                )
            by_label[label] = span.end_s

    def labels(self) -> list[str]:
        """Distinct speaker labels, sorted."""
        return sorted({label for _, label in self.segments})

    def label_spans(self, label: str) -> list[TimeSpan]:
        return [span for span, lab in self.segments if lab == label]

    def total_speech_s(self) -> float:
        """Total speech time in seconds, overlap counted per speaker."""
        return sum(span.duration_s for span, _ in self.segments)

    def extent_s(self) -> float:
        """End time of the last segment (0.0 when empty)."""
        return max((span.end_s for span, _ in self.segments), default=0.0)


# --- configuration files ---------------------------------------------------
#
# Flat text format, one "key = value" pair per line, keys matching
# PipelineConfig field names.  '#' starts a comment.  Example:
#
#     seg_duration_s = 16.0
#     ahc_threshold = 0.62


def _coerce(name: str, text: str, typ: type) -> object:
    try:
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
        if typ is bool:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return text
    except ValueError:
        raise ConfigError(f"config key {name!r}: cannot parse {text!r} as {typ.__name__}")


def read_config_file(path: str) -> dict[str, str]:
    """Parse a flat key/value config file into a string mapping."""
    mapping: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = line.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping


def config_from_mapping(
    mapping: dict[str, str], base: PipelineConfig | None = None
) -> PipelineConfig:
    """Build a PipelineConfig from string key/value pairs over ``base``.

    Unknown keys are an error so typos never pass silently.
    """
    base = base or PipelineConfig()
    field_types = {
        f.name: f.type for f in dataclasses.fields(PipelineConfig) if f.name != "frame_rate"
    }
    overrides: dict[str, object] = {}
    for key, value in mapping.items():
        if key not in field_types:
            raise ConfigError(f"unknown config key {key!r}")
        typ_name = field_types[key]
        typ = {"int": int, "float": float, "str": str, "bool": bool}.get(str(typ_name), str)
        overrides[key] = _coerce(key, value, typ)
    return dataclasses.replace(base, **overrides)


def load_config(path: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Read ``path`` and apply its keys over ``base`` (or the defaults)."""
    return config_from_mapping(read_config_file(path), base)


def quantize_ms(t_s: float) -> float:
    """Round a time to whole milliseconds (the resolution of RTTM output)."""
    return math.floor(t_s * 1000.0 + 0.5) / 1000.0
