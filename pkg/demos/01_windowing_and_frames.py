"""
Windowing a waveform and the analysis frame grid
================================================

A recording is processed in fixed 16 s windows that slide by 1.6 s, so
every instant is seen by up to ten windows.  Inside a window, a conv
front end turns samples into frames: 400-sample receptive field, hop 320.
"""

import numpy as np

from diarpipe import AudioBuffer, PipelineConfig, frame_to_time, frames_for_samples, sliding_window

cfg = PipelineConfig()
print("window samples:", cfg.window_samples)  # 16 s at 16 kHz
print("hop samples:   ", cfg.hop_samples)  # 1.6 s
print("frames/window: ", cfg.frames_per_chunk)

# the frame formula: floor((n - 400) / 320) + 1
print("frames in one window:", frames_for_samples(256_000))

# frame index -> center time of its receptive field
for f in (0, 1, 798):
    print(f"frame {f} sits at {frame_to_time(f):.4f} s")

# slice a 30 s buffer; the tail window is zero padded
buf = AudioBuffer(samples=np.zeros(480_000), sample_rate_hz=16_000)
batch = sliding_window(buf, cfg)
print("chunks:", batch.n_chunks)
print("starts:", batch.start_samples.tolist())
print("real samples in the padded last chunk:", batch.real_samples_last)

# each chunk knows its time span in the recording
for c in (0, 1, batch.n_chunks - 1):
    span = batch.span(c)
    print(f"chunk {c}: [{span.start_s:.1f}, {span.end_s:.1f}) s")
