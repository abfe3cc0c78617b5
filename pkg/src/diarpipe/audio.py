"""Waveform loading and sliding-window chunking.

The WAV reader is deliberately minimal: RIFF/WAVE containers holding 16-bit
integer PCM or 32-bit IEEE float samples, any channel count (averaged to
mono).  Anything else is rejected with a clear error; no resampling is ever
attempted.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import PipelineConfig, TimeSpan

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class WavFormatError(ValueError):
    """Raised when a file is not a WAV this package can read."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono waveform in float64, values nominally in [-1, 1]."""

    samples: np.ndarray  # shape (n_samples,)
    sample_rate_hz: int

    def __post_init__(self) -> None:
        if self.samples.ndim != 1:
            raise ValueError("AudioBuffer.samples must be 1-D mono")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


def _read_chunks(data: bytes) -> dict[bytes, tuple[int, int]]:
    """Map chunk id -> (offset, size) for the top-level RIFF chunks."""
    chunks: dict[bytes, tuple[int, int]] = {}
    pos = 12  # past 'RIFF<size>WAVE'
    end = len(data)
    while pos + 8 <= end:
        cid, size = struct.unpack_from("<4sI", data, pos)
        pos += 8
        if cid not in chunks:  # first occurrence wins
            chunks[cid] = (pos, size)
        pos += size + (size & 1)  # chunks are word-aligned, odd sizes padded
    return chunks


def load_wav(path: str) -> AudioBuffer:
    """Read a RIFF/WAVE file into a mono float64 buffer.

    Multi-channel input is averaged to mono.  16-bit PCM is scaled by
    1/32768 so full scale maps to [-1, 1); float32 data is taken as is.

    Raises
    ------
    WavFormatError
        For malformed containers, unsupported codecs or empty data chunks.
    OSError
        If the file cannot be read at all.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    chunks = _read_chunks(data)
    if b"fmt " not in chunks or b"data" not in chunks:
        raise WavFormatError(f"{path}: missing fmt or data chunk")

    fmt_off, fmt_size = chunks[b"fmt "]
    if fmt_size < 16:
        raise WavFormatError(f"{path}: fmt chunk too short ({fmt_size} bytes)")
    tag, n_channels, sample_rate, _, _, bits = struct.unpack_from("<HHIIHH", data, fmt_off)
    if tag == WAVE_FORMAT_EXTENSIBLE:
        # sub-format GUID starts with the real format tag
        if fmt_size < 40:
            raise WavFormatError(f"{path}: extensible fmt chunk too short")
        tag = struct.unpack_from("<H", data, fmt_off + 24)[0]
    if n_channels < 1:
        raise WavFormatError(f"{path}: channel count {n_channels} invalid")

    if tag == WAVE_FORMAT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise WavFormatError(
            f"{path}: unsupported sample format (tag=0x{tag:04x}, {bits}-bit); "
            "only 16-bit PCM and 32-bit float are readable"
        )

    data_off, data_size = chunks[b"data"]
    data_size = min(data_size, len(data) - data_off)  # tolerate truncated size field
    frame_bytes = dtype.itemsize * n_channels
    n_frames = data_size // frame_bytes
    if n_frames == 0:
        raise WavFormatError(f"{path}: data chunk holds no samples")
    raw = np.frombuffer(data, dtype=dtype, count=n_frames * n_channels, offset=data_off)
    samples = raw.reshape(n_frames, n_channels).astype(np.float64).mean(axis=1) * scale
    return AudioBuffer(samples=samples, sample_rate_hz=sample_rate)


@dataclass(frozen=True)
class ChunkBatch:
    """Sliding segmentation windows cut from one recording.

    ``chunks[i]`` holds ``window_samples`` samples starting at waveform
    offset ``start_samples[i]``.  Only the final chunk may be zero-padded;
    ``real_samples_last`` says how many of its samples are genuine.
    """

    chunks: np.ndarray  # shape (n_chunks, window_samples)
    start_samples: np.ndarray  # shape (n_chunks,), int64
    window_samples: int
    hop_samples: int
    sample_rate_hz: int
    real_samples_last: int

    @property
    def n_chunks(self) -> int:
        return self.chunks.shape[0]

    def span(self, i: int) -> TimeSpan:
        """Time span covered by chunk ``i`` (including any padding)."""
        start = self.start_samples[i] / self.sample_rate_hz
        return TimeSpan(start, start + self.window_samples / self.sample_rate_hz)


def sliding_window(buf: AudioBuffer, cfg: PipelineConfig) -> ChunkBatch:
    """Cut a waveform into overlapping segmentation windows.

    Window length W and hop H come from ``cfg``.  For T input samples there
    are ``floor((T - W) / H) + 1`` complete windows; one extra window,
    zero-padded to W, is appended whenever the complete windows do not reach
    the end of the waveform.  Every input sample lands in at least one
    window, and only the final window may carry padding.

    A waveform shorter than W yields a single zero-padded window.
    """
    if buf.sample_rate_hz != cfg.sample_rate_hz:
        raise ValueError(
            f"waveform is {buf.sample_rate_hz} Hz but the pipeline expects "
            f"{cfg.sample_rate_hz} Hz; resample the file first"
        )
    w = cfg.window_samples
    h = cfg.hop_samples
    t = buf.n_samples
    n_complete = (t - w) // h + 1 if t >= w else 0
    covered = (n_complete - 1) * h + w if n_complete > 0 else 0
    pad_needed = covered < t

    starts = [i * h for i in range(n_complete)]
    if pad_needed:
        starts.append(n_complete * h)
    n_chunks = len(starts)

    chunks = np.zeros((n_chunks, w), dtype=np.float64)
    for i, s in enumerate(starts):
        take = min(w, t - s)
        chunks[i, :take] = buf.samples[s : s + take]

    real_last = (t - starts[-1]) if pad_needed else w
    return ChunkBatch(
        chunks=chunks,
        start_samples=np.asarray(starts, dtype=np.int64),
        window_samples=w,
        hop_samples=h,
        sample_rate_hz=cfg.sample_rate_hz,
        real_samples_last=real_last,
    )
