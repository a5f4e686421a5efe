"""Synthetic UGC: optional sensor noise, then a full-frame compress/decompress pass.

Also provides a procedural generator of pristine test footage so fixtures do
not depend on external datasets.
"""
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from satrdo.codec.core import _check_qv, forward_blocks, from_blocks, quality_to_qtable, quantize, reconstruct
from satrdo.frame_io import Frame, FrameSet
from satrdo.parallel import map_ordered


@dataclass(frozen=True)
class SynthSpec:
    severity_qv: int
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        _check_qv(self.severity_qv)
        if not self.noise_sigma >= 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


def compress_frame(pixels, qv):
    """Encode/decode a whole frame as one patch and return the reconstruction."""
    qtable = quality_to_qtable(qv)
    h, w = pixels.shape
    q = quantize(forward_blocks(pixels[None]), qtable)
    return from_blocks(reconstruct(q, qtable), h, w)[0]


def _degrade(pixels, spec, source_index):
    if spec.noise_sigma > 0:
        # per-frame substream keeps output independent of worker scheduling
        rng = np.random.default_rng([spec.seed, source_index])
        noisy = pixels + rng.normal(0.0, spec.noise_sigma, pixels.shape)
        pixels = np.clip(np.floor(noisy + 0.5), 0, 255).astype(np.uint8)
    return compress_frame(pixels, spec.severity_qv)


def synthesize_ugc(pristine, spec, jobs=1):
    out = map_ordered(lambda item: Frame(_degrade(item[1].pixels, spec, item[0])),
                      zip(pristine.source_indices, pristine.frames), jobs)
    return FrameSet(tuple(out), pristine.source_indices)


def make_pristine_frames(count=10, width=480, height=360, seed=0, motion=(3, 2)):
    """Procedural footage panning by ``motion`` pixels per frame.

    Soft gradients, low-frequency texture, hard-edged ellipses and long-period
    gratings, finished with a mild blur. The content is smooth enough that a
    sigma=1.5 Gaussian still moves UGC closer to the pristine frames.
    """
    rng = np.random.default_rng(seed)
    dx, dy = motion
    cw = width + abs(dx) * count + 16
    ch = height + abs(dy) * count + 16
    yy, xx = np.mgrid[0:ch, 0:cw].astype(np.float64)

    canvas = 90 + 60 * (xx / cw) + 40 * np.sin(yy / ch * np.pi)
    texture = gaussian_filter(rng.normal(0, 1, (ch, cw)), 10.0)
    texture /= texture.std()
    canvas += 6 * texture

    for _ in range(14):
        cx, cy = rng.uniform(0, cw), rng.uniform(0, ch)
        rx, ry = rng.uniform(15, 70), rng.uniform(15, 70)
        inside = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1
        canvas[inside] = rng.uniform(20, 235) + 1.8 * texture[inside]
    for _ in range(8):
        x0, y0 = rng.integers(0, cw - 40), rng.integers(0, ch - 40)
        w_, h_ = rng.integers(20, 90), rng.integers(20, 90)
        period = rng.uniform(20, 60)
        angle = rng.uniform(0, np.pi)
        sl = (slice(y0, y0 + h_), slice(x0, x0 + w_))
        phase = (xx[sl] * np.cos(angle) + yy[sl] * np.sin(angle)) * 2 * np.pi / period
        canvas[sl] = rng.uniform(60, 190) + 45 * np.sin(phase)

    canvas = np.clip(np.floor(gaussian_filter(canvas, 2.0) + 0.5), 0, 255).astype(np.uint8)
    x_start = 0 if dx >= 0 else abs(dx) * count
    y_start = 0 if dy >= 0 else abs(dy) * count
    frames = []
    for i in range(count):
        x0, y0 = x_start + dx * i, y_start + dy * i
        frames.append(Frame(canvas[y0:y0 + height, x0:x0 + width]))
    return FrameSet.of(frames)
