"""Denoised references: block-boundary deblocking, Gaussian blur, or frames from disk."""
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d

from satrdo.frame_io import Frame, FrameSet, list_frame_files, load_frame
from satrdo.parallel import map_ordered

KINDS = ("deblock", "gaussian", "external")


@dataclass(frozen=True)
class DenoiserSpec:
    kind: str
    strength: float = 0.0
    external_paths: tuple = field(default=())
    format: str = None
    width: int = None
    height: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown denoiser {self.kind!r}; expected one of {KINDS}")
        if not math.isfinite(self.strength) or self.strength < 0:
            raise ValueError(f"denoiser strength must be finite and >= 0, got {self.strength}")
        paths = tuple(Path(p) for p in self.external_paths)
        object.__setattr__(self, "external_paths", paths)
        if (self.kind == "external") != bool(paths):
            raise ValueError("external_paths must be non-empty exactly when kind is 'external'")

    @classmethod
    def parse(cls, text, **io_options):
        """Parse ``deblock:20``, ``gaussian:1.5`` or ``external:<dir>``."""
        kind, sep, arg = text.partition(":")
        if not sep or not arg:
            raise ValueError(f"denoiser must look like 'kind:value', got {text!r}")
        if kind == "external":
            return cls("external", 0.0, tuple(list_frame_files(arg)), **io_options)
        try:
            strength = float(arg)
        except ValueError:
            raise ValueError(f"denoiser strength must be a number, got {arg!r}") from None
        return cls(kind, strength)

    def describe(self):
        if self.kind == "external":
            parent = self.external_paths[0].parent
            return f"external:{parent}"
        return f"{self.kind}:{self.strength:g}"


def _round_half_up(x):
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def deblock(pixels, strength):
    """Smooth straddling pixel pairs on 8-aligned block edges.

    A pair ``(a, b)`` with ``|a - b| < strength`` becomes
    ``((3a + b) / 4, (a + 3b) / 4)`` rounded half-up. Vertical edges are
    processed first (the horizontal pass), then horizontal edges on the result.
    """
    out = pixels.astype(np.int32)
    for axis in (1, 0):
        out = np.moveaxis(out, axis, 0).copy()
        a = out[7:-1:8]
        b = out[8::8]
        mask = np.abs(a - b) < strength
        na = (3 * a + b + 2) // 4
        nb = (a + 3 * b + 2) // 4
        out[7:-1:8] = np.where(mask, na, a)
        out[8::8] = np.where(mask, nb, b)
        out = np.moveaxis(out, 0, axis)
    return out.astype(np.uint8)


def gaussian_kernel(sigma):
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian(pixels, sigma):
    """Separable Gaussian blur, half-sample-symmetric edges, rounded to uint8."""
    if sigma == 0:
        return pixels.copy()
    k = gaussian_kernel(sigma)
    if len(k) // 2 > min(pixels.shape):
        raise ValueError(f"sigma {sigma} too large for a {pixels.shape[1]}x{pixels.shape[0]} frame")
    out = correlate1d(pixels.astype(np.float64), k, axis=1, mode="reflect")
    out = correlate1d(out, k, axis=0, mode="reflect")
    return _round_half_up(out)


def _external_files(frames, spec):
    paths = spec.external_paths
    if len(paths) == len(frames):
        return list(paths)
    if len(paths) > frames.source_indices[-1]:
        return [paths[i] for i in frames.source_indices]
    raise ValueError(
        f"{len(paths)} external frames cannot be aligned to {len(frames)} frames "
        f"with source indices up to {frames.source_indices[-1]}"
    )


def denoise(frames, spec, jobs=1):
    """Denoised reference with the same size and source indices as ``frames``."""
    if spec.kind == "external":
        files = _external_files(frames, spec)
        out = [load_frame(f, spec.format, spec.width, spec.height) for f in files]
        if any(f.pixels.shape != frames[0].pixels.shape for f in out):
            raise ValueError("external denoised frames do not match input dimensions")
        return FrameSet(tuple(out), frames.source_indices)

    fn = deblock if spec.kind == "deblock" else gaussian
    results = map_ordered(lambda f: Frame(fn(f.pixels, spec.strength)), frames.frames, jobs)
    return FrameSet(tuple(results), frames.source_indices)
