import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from satrdo.denoise import DenoiserSpec, deblock, denoise, gaussian, gaussian_kernel
from satrdo.frame_io import Frame, FrameSet, save_frame

frames_16 = arrays(np.uint8, st.sampled_from([(16, 16), (24, 32), (16, 40)]))


def naive_deblock(px, t):
    out = px.astype(int).copy()
    h, w = out.shape
    for x in range(8, w, 8):
        for y in range(h):
            a, b = out[y, x - 1], out[y, x]
            if abs(a - b) < t:
                out[y, x - 1], out[y, x] = (3 * a + b + 2) // 4, (a + 3 * b + 2) // 4
    for y in range(8, h, 8):
        for x in range(w):
            a, b = out[y - 1, x], out[y, x]
            if abs(a - b) < t:
                out[y - 1, x], out[y, x] = (3 * a + b + 2) // 4, (a + 3 * b + 2) // 4
    return out


def naive_gaussian(px, sigma):
    k = gaussian_kernel(sigma)
    r = len(k) // 2
    padded = np.pad(px.astype(float), r, mode="symmetric")
    h, w = px.shape
    tmp = np.zeros((h + 2 * r, w))
    for j in range(w):
        tmp[:, j] = padded[:, j:j + 2 * r + 1] @ k
    out = np.zeros((h, w))
    for i in range(h):
        out[i] = k @ tmp[i:i + 2 * r + 1]
    return np.clip(np.floor(out + 0.5), 0, 255)


def test_deblock_step_edge():
    px = np.full((16, 16), 100, np.uint8)
    px[:, 8:] = 110
    out = deblock(px, 20)
    assert out[0, 7] == 103 and out[0, 8] == 108
    assert (out[:, :7] == 100).all() and (out[:, 9:] == 110).all()


def test_deblock_threshold_is_strict():
    px = np.full((8, 16), 100, np.uint8)
    px[:, 8:] = 120
    assert np.array_equal(deblock(px, 20), px)


@settings(max_examples=40, deadline=None)
@given(frames_16, st.integers(0, 60))
def test_deblock_matches_naive(px, t):
    assert np.array_equal(deblock(px, t), naive_deblock(px, t))


@settings(max_examples=40, deadline=None)
@given(frames_16, st.integers(1, 60))
def test_deblock_only_touches_boundary_pixels(px, t):
    changed = deblock(px, t) != px
    rows, cols = np.nonzero(changed)
    assert all(c % 8 in (7, 0) or r % 8 in (7, 0) for r, c in zip(rows, cols))


@pytest.mark.parametrize("sigma", [0.5, 1.0, 1.5, 2.7])
def test_gaussian_matches_naive(rng, sigma):
    px = rng.integers(0, 256, (24, 32), dtype=np.uint8)
    assert np.array_equal(gaussian(px, sigma), naive_gaussian(px, sigma))


def test_gaussian_kernel_shape():
    k = gaussian_kernel(1.5)
    assert len(k) == 11 and abs(k.sum() - 1) < 1e-12 and k.argmax() == 5


def test_gaussian_zero_is_identity(rng):
    px = rng.integers(0, 256, (16, 24), dtype=np.uint8)
    assert np.array_equal(gaussian(px, 0), px)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 255), st.floats(0.3, 3.0), st.integers(0, 40))
def test_constant_frames_unchanged(value, sigma, t):
    px = np.full((24, 32), value, np.uint8)
    assert np.array_equal(gaussian(px, sigma), px)
    assert np.array_equal(deblock(px, t), px)


@settings(max_examples=30, deadline=None)
@given(frames_16, st.floats(0.3, 2.0))
def test_gaussian_preserves_mean(px, sigma):
    # symmetric-reflect convolution keeps the mean only approximately at edges
    out = gaussian(px, sigma)
    assert out.dtype == np.uint8
    assert abs(float(out.mean()) - float(px.mean())) <= 0.5 + 0.1 * np.ptp(px)


def test_gaussian_mean_on_smooth_content(pristine):
    px = pristine[0].pixels
    assert abs(float(gaussian(px, 1.5).mean()) - float(px.mean())) <= 0.5


@pytest.mark.parametrize("text,kind,strength", [
    ("deblock:20", "deblock", 20.0), ("gaussian:1.5", "gaussian", 1.5), ("gaussian:0", "gaussian", 0.0),
])
def test_parse(text, kind, strength):
    spec = DenoiserSpec.parse(text)
    assert (spec.kind, spec.strength) == (kind, strength)
    assert DenoiserSpec.parse(spec.describe()) == spec


@pytest.mark.parametrize("text", ["median:3", "deblock", "gaussian:-1", "gaussian:abc", "deblock:nan"])
def test_parse_rejects(text):
    with pytest.raises(ValueError):
        DenoiserSpec.parse(text)


def test_denoise_keeps_source_indices(rng):
    fs = FrameSet(tuple(Frame(rng.integers(0, 256, (16, 16), dtype=np.uint8)) for _ in range(3)), (0, 4, 8))
    z = denoise(fs, DenoiserSpec("deblock", 20), jobs=2)
    assert z.source_indices == (0, 4, 8)
    assert all(np.array_equal(a.pixels, deblock(b.pixels, 20)) for a, b in zip(z, fs))


def test_external_reference(tmp_path, rng):
    px = [rng.integers(0, 256, (16, 16), dtype=np.uint8) for _ in range(10)]
    for i, p in enumerate(px):
        save_frame(Frame(p), tmp_path / f"z_{i:03d}.pgm")
    spec = DenoiserSpec.parse(f"external:{tmp_path}")
    fs = FrameSet(tuple(Frame(px[i]) for i in (0, 2, 4)), (0, 2, 4))
    z = denoise(fs, spec)
    assert all(np.array_equal(a.pixels, px[i]) for a, i in zip(z, (0, 2, 4)))


def test_external_misaligned(tmp_path, rng):
    save_frame(Frame(np.zeros((16, 16), np.uint8)), tmp_path / "z.pgm")
    spec = DenoiserSpec.parse(f"external:{tmp_path}")
    fs = FrameSet.of([Frame(np.zeros((16, 16), np.uint8))] * 3)
    with pytest.raises(ValueError, match="aligned"):
        denoise(fs, spec)
