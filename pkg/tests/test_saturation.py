import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.ndimage import gaussian_filter

from satrdo import rdo
from satrdo import saturation as sat
from satrdo.denoise import DenoiserSpec
from satrdo.frame_io import Frame, FrameSet
from satrdo.ugc_synth import SynthSpec, synthesize_ugc


def curve(ref, lams, rates=None, sse_u=None, sse_z=None):
    n = len(lams)
    rates = rates or [0] * n
    sse_u = sse_u or [0] * n
    sse_z = sse_z or [0] * n
    pts = tuple(rdo.RDPoint(float(l), r, u, z, np.empty(0, np.int64))
                for l, r, u, z in zip(lams, rates, sse_u, sse_z))
    return rdo.RDCurve(ref, pts, 100)


LAMS5 = [1, 2, 4, 8, 16]


def test_qp12_is_base():
    assert abs(sat.qp_to_lambda(12) - 0.852) < 1e-12
    assert sat.lambda_to_qp(0.852) == 12


def test_qp15_doubles():
    assert abs(sat.qp_to_lambda(15) - 1.704) < 1e-12


def test_qp_roundtrip_and_monotone():
    lams = [sat.qp_to_lambda(q) for q in range(52)]
    assert all(b > a for a, b in zip(lams, lams[1:]))
    assert [sat.lambda_to_qp(l) for l in lams] == list(range(52))


def test_lambda_to_qp_clamps():
    assert sat.lambda_to_qp(1e-9) == 0 and sat.lambda_to_qp(1e9) == 51


@pytest.mark.parametrize("bad", [-1, 52, 3.5])
def test_qp_rejects(bad):
    with pytest.raises(ValueError):
        sat.qp_to_lambda(bad)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_lambda_to_qp_rejects(bad):
    with pytest.raises(ValueError):
        sat.lambda_to_qp(bad)


def test_geometric_bound_examples():
    assert sat.geometric_bound(5.0, 5.0, 0.0)
    # x=(1,0), u=(0,0), z=(0,1)
    assert sat.geometric_bound(2.0, 1.0, 1.0)
    assert not sat.geometric_bound(10.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        sat.geometric_bound(-1.0, 1.0, 1.0)


vec = st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=8)


@settings(max_examples=200, deadline=None)
@given(vec, vec, vec)
def test_geometric_bound_holds_for_any_vectors(x, u, z):
    x, u, z = map(np.array, (x, u, z))
    assert sat.geometric_bound(float(((x - z) ** 2).sum()), float(((u - z) ** 2).sum()),
                               float(((x - u) ** 2).sum()))


def test_transition_estimate_examples():
    lams = [1, 2, 3]
    assert sat.transition_estimate(curve("U", lams, sse_u=[100, 400, 900]), 100) == 2
    assert sat.transition_estimate(curve("U", [1, 2], sse_u=[100, 900]), 100) == 1
    assert sat.transition_estimate(curve("U", lams, sse_u=[5, 5, 9]), 0) == 1


def test_lambda_z_hand_trace():
    cz = curve("Z", LAMS5, sse_z=[95, 93, 98, 112, 130])
    assert sat.detect_lambda_z(cz, sat.SaturationBounds(100, 10)) == (4.0, sat.DETECTED)


def test_lambda_z_whole_grid_and_none():
    cz = curve("Z", LAMS5, sse_z=[100] * 5)
    assert sat.detect_lambda_z(cz, sat.SaturationBounds(100, 10)) == (16.0, sat.DETECTED)
    cz = curve("Z", LAMS5, sse_z=[150, 100, 100, 100, 100])
    assert sat.detect_lambda_z(cz, sat.SaturationBounds(100, 10)) == (None, sat.NO_SATURATION)


def test_lambda_z_degenerate():
    cz = curve("Z", LAMS5, sse_z=[3, 9, 20, 40, 80])
    assert sat.detect_lambda_z(cz, sat.SaturationBounds(0, 3)) == (1.0, sat.DEGENERATE)


def test_lambda_z_needs_z_curve():
    with pytest.raises(ValueError):
        sat.detect_lambda_z(curve("U", LAMS5), sat.SaturationBounds(1, 1))


@pytest.mark.parametrize("threshold,expected", [(55, 8.0), (100, 1.0), (20, 16.0)])
def test_lambda_u_hand_trace(threshold, expected):
    cu = curve("U", LAMS5, rates=[100, 80, 60, 40, 20])
    assert sat.detect_lambda_u(cu, threshold) == expected


def test_lambda_u_unreachable():
    with pytest.raises(ValueError):
        sat.detect_lambda_u(curve("U", LAMS5, rates=[100, 80, 60, 40, 20]), 10)


def test_qv_star_hand_trace():
    pairs = [(0, z, 4) for z in (130, 110, 103, 102, 101)]
    assert sat.detect_qv_star(pairs, 100) == 2
    assert sat.detect_qv_star(pairs, 100, qvs=(19, 39, 59, 79, 99)) == 59


def test_qv_star_trivial_ends():
    assert sat.detect_qv_star([(0, z, 4) for z in (101, 102, 99, 100)], 100) == 0
    assert sat.detect_qv_star([(0, z, 4) for z in (150, 140, 130, 103)], 100) == 3
    assert sat.detect_qv_star([(0, z, 4) for z in (150, 140)], 100) is None


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 10_000), min_size=2, max_size=30), st.integers(0, 10_000),
       st.integers(0, 2_000), st.integers(1, 1000))
def test_detectors_scale_invariant(sse_z, d_uz, d_best, k):
    a = sat.lambda_z_index(sse_z, d_uz, d_best)
    b = sat.lambda_z_index([k * s for s in sse_z], k * d_uz, k * d_best)
    assert a == b


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 500), min_size=1, max_size=30), st.integers(0, 500))
def test_lambda_z_prefix_property(sse_z, d_best):
    d_uz = 250
    i = sat.lambda_z_index(sse_z, d_uz, d_best)
    assert all(abs(s - d_uz) <= d_best for s in sse_z[:i + 1])
    if i + 1 < len(sse_z):
        assert abs(sse_z[i + 1] - d_uz) > d_best


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=1, max_size=30), st.integers(0, 1000))
def test_lambda_u_suffix_property(rates, threshold):
    rates = sorted(rates, reverse=True)
    i = sat.lambda_u_index(rates, threshold)
    if i < 0:
        assert rates[-1] > threshold
    else:
        assert all(r <= threshold for r in rates[i:])
        assert i == 0 or rates[i - 1] > threshold


def test_bounds():
    b = sat.SaturationBounds(100, 30)
    assert (b.delta_sq, b.small_delta_sq) == (130, 70)
    assert sat.SaturationBounds(10, 30).small_delta_sq == -20
    with pytest.raises(ValueError):
        sat.SaturationBounds(-1, 0)


def test_compute_bounds_sources():
    cu = curve("U", LAMS5, sse_u=[3, 5, 8, 9, 10])
    cz = curve("Z", LAMS5, sse_u=[6, 7, 9, 9, 12])
    assert sat.compute_bounds(50, cu, cz, "u-sweep").d_best == 3
    assert sat.compute_bounds(50, cu, cz, "z-sweep").d_best == 6
    with pytest.raises(ValueError):
        sat.compute_bounds(50, cu, curve("Z", [1, 2, 4, 8, 32]))
    with pytest.raises(ValueError):
        sat.compute_bounds(50, cu, cz, "x-sweep")


def test_detect_from_curves_hand():
    cu = curve("U", LAMS5, rates=[100, 80, 60, 40, 20], sse_u=[2, 6, 20, 40, 80])
    cz = curve("Z", LAMS5, rates=[90, 70, 55, 30, 10], sse_u=[10, 12, 20, 40, 80],
               sse_z=[95, 93, 98, 112, 130])
    r = sat.detect_from_curves(cu, cz, 100)
    assert r.verdict == sat.DETECTED
    assert (r.lambda_star_z, r.saturation_rate_bits, r.lambda_star_u) == (4.0, 55, 8.0)
    assert r.qp_star == sat.lambda_to_qp(8.0)
    j = r.to_json()
    assert j["d_best_sse"] == 10 and j["saturation_rate_bpp"] == 0.55
    for key in ("verdict", "lambda_star_z", "lambda_star_u", "qp_star", "saturation_rate_bpp",
                "d_uz_mse", "d_best_mse", "delta_sq", "small_delta_sq", "grid", "denoiser"):
        assert key in j


def test_result_invariants_when_missing():
    cu = curve("U", LAMS5, rates=[5] * 5)
    cz = curve("Z", LAMS5, sse_z=[500] * 5, sse_u=[1] * 5)
    r = sat.detect_from_curves(cu, cz, 100)
    assert r.verdict == sat.NO_SATURATION
    assert r.lambda_star_z is None and r.saturation_rate_bits is None and r.qp_star is None


def test_run_detection_identity_reference_is_degenerate(pristine):
    fs = FrameSet(pristine.frames[:2], (0, 1))
    rep = sat.run_detection(fs, DenoiserSpec("gaussian", 0.0), sat.DetectionConfig(sample_count=2))
    r = rep.result
    assert r.verdict == sat.DEGENERATE
    assert r.lambda_star_z == r.lambda_grid[0]


def test_run_detection_clamps_sample_count():
    fs = FrameSet.of([Frame(np.full((40, 48), 100, np.uint8))])
    rep = sat.run_detection(fs, DenoiserSpec("deblock", 20), sat.DetectionConfig(sample_count=5))
    assert len(rep.U) == 1


def test_over_smoothing_reports_instead_of_crashing(rng):
    # fine texture compressed at QV 25: a sigma=1.5 blur moves Z further from the
    # pristine frames than U is, so no saturation region exists
    frames = []
    for _ in range(2):
        t = gaussian_filter(rng.normal(0, 1, (160, 192)), 1.0)
        frames.append(Frame(np.clip(128 + 50 * t / t.std(), 0, 255).round().astype(np.uint8)))
    pristine = FrameSet.of(frames)
    ugc = synthesize_ugc(pristine, SynthSpec(25))
    rep = sat.run_detection(ugc, DenoiserSpec("gaussian", 1.5), sat.DetectionConfig(sample_count=2))
    assert sat.sse(pristine, rep.Z) > sat.sse(pristine, ugc)
    assert rep.result.verdict == sat.NO_SATURATION
    assert rep.result.lambda_star_u is None and rep.result.qp_star is None
