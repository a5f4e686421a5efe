"""Saturation detection on RD curves and the QP <-> lambda map.

Notation: ``U`` is the UGC input, ``Z`` its denoised reference, ``Û`` a
reconstruction. All distortions are SSE over the sampled pixels.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from satrdo import rdo
from satrdo.denoise import denoise
from satrdo.frame_io import sample_frames

log = logging.getLogger(__name__)

LAMBDA_QP12 = 0.852
QP_MIN, QP_MAX = 0, 51

DETECTED = "detected"
NO_SATURATION = "no-saturation-in-range"
DEGENERATE = "degenerate-reference"

BOUND_SOURCES = ("u-sweep", "z-sweep")


def _check_qp(qp):
    if isinstance(qp, bool) or int(qp) != qp or not QP_MIN <= qp <= QP_MAX:
        raise ValueError(f"QP must be an integer in [{QP_MIN}, {QP_MAX}], got {qp!r}")
    return int(qp)


def qp_to_lambda(qp):
    """``0.852 * 2**((qp - 12) / 3)``."""
    qp = _check_qp(qp)
    return LAMBDA_QP12 * 2.0 ** ((qp - 12) / 3.0)


def lambda_to_qp(lam):
    """Nearest integer QP for ``lam``, clamped to 0..51."""
    if not lam > 0 or not math.isfinite(lam):
        raise ValueError(f"lambda must be finite and > 0, got {lam}")
    qp = round(12 + 3 * math.log2(lam / LAMBDA_QP12))
    return int(min(max(qp, QP_MIN), QP_MAX))


def default_lambda_grid():
    return tuple(qp_to_lambda(qp) for qp in range(QP_MIN, QP_MAX + 1))


def geometric_bound(x_minus_z_sq, u_minus_z_sq, x_minus_u_sq, rtol=1e-12):
    """Check ``| |x-z|^2 - |u-z|^2 | <= |x-u|^2 + 2 |x-u| |u-z|``.

    The inequality holds for any vectors; ``rtol`` only absorbs float
    round-off on the right-hand side.
    """
    if min(x_minus_z_sq, u_minus_z_sq, x_minus_u_sq) < 0:
        raise ValueError("squared distances must be non-negative")
    lhs = abs(x_minus_z_sq - u_minus_z_sq)
    rhs = x_minus_u_sq + 2.0 * math.sqrt(x_minus_u_sq) * math.sqrt(u_minus_z_sq)
    return lhs <= rhs * (1.0 + rtol)


def transition_estimate(curve_u, d_uz):
    """Grid lambda whose ``|Û - U|^2`` is closest to ``4 |U - Z|^2``.

    This is where the two right-hand terms of the geometric bound are equal.
    Ties go to the smaller lambda. Diagnostic only.
    """
    gap = np.abs(curve_u.sse_u - 4 * d_uz)
    return float(curve_u.lambdas[int(np.argmin(gap))])


@dataclass(frozen=True)
class SaturationBounds:
    d_uz: int
    d_best: int

    def __post_init__(self):
        if self.d_uz < 0 or self.d_best < 0:
            raise ValueError("distortions must be non-negative")

    @property
    def delta_sq(self):
        return self.d_uz + self.d_best

    @property
    def small_delta_sq(self):
        # negative when the inner circle does not exist
        return self.d_uz - self.d_best


def compute_bounds(d_uz, curve_u, curve_z, source="z-sweep"):
    """``d_best`` = ``|Û(λ_min) - U|^2`` from the chosen sweep at the smallest λ.

    ``z-sweep`` measures the Z-reference minimizer at λ_min. ``u-sweep`` uses
    the U-reference minimizer instead; that value is never larger, so the
    band is stricter.
    """
    if source not in BOUND_SOURCES:
        raise ValueError(f"bound source must be one of {BOUND_SOURCES}, got {source!r}")
    if not np.array_equal(curve_u.lambdas, curve_z.lambdas):
        raise ValueError("U and Z curves were swept on different lambda grids")
    curve = curve_u if source == "u-sweep" else curve_z
    return SaturationBounds(int(d_uz), int(curve.points[0].sse_vs_U))


def lambda_z_index(sse_vs_z, d_uz, d_best):
    """Index of the last grid point of the leading run with
    ``|sse_vs_z - d_uz| <= d_best``; -1 when the first point already fails."""
    dev = np.abs(np.asarray(sse_vs_z) - d_uz)
    bad = np.flatnonzero(dev > d_best)
    return (len(dev) if bad.size == 0 else int(bad[0])) - 1


def detect_lambda_z(curve_z, bounds):
    """Largest grid λ such that every grid λ' up to it stays in the saturation band.

    Returns ``(lambda_star_z or None, verdict)``. A reference identical to the
    input (``d_uz == 0``) is reported as degenerate and pinned to λ_min.
    """
    if curve_z.reference != "Z":
        raise ValueError("detect_lambda_z needs a Z-reference sweep")
    lams = curve_z.lambdas
    if bounds.d_uz == 0:
        return float(lams[0]), DEGENERATE
    i = lambda_z_index(curve_z.sse_z, bounds.d_uz, bounds.d_best)
    if i < 0:
        return None, NO_SATURATION
    return float(lams[i]), DETECTED


def lambda_u_index(rates, threshold):
    """First index of the trailing run with ``rate <= threshold``; -1 if empty."""
    over = np.flatnonzero(np.asarray(rates) > threshold)
    start = 0 if over.size == 0 else int(over[-1]) + 1
    return start if start < len(rates) else -1


def detect_lambda_u(curve_u, saturation_rate_bits):
    """Smallest grid λ from which the U-reference rate stays at or below the threshold."""
    if curve_u.reference != "U":
        raise ValueError("detect_lambda_u needs a U-reference sweep")
    i = lambda_u_index(curve_u.rates, saturation_rate_bits)
    if i < 0:
        raise ValueError(
            f"saturation rate {saturation_rate_bits} is below the lowest swept rate "
            f"{int(curve_u.rates[-1])}"
        )
    return float(curve_u.lambdas[i])


def detect_qv_star(rd_pairs, d_uz, qvs=None):
    """Saturation onset for a fixed-QV sweep without RDO.

    ``rd_pairs`` holds ``(rate, sse_vs_Z, sse_vs_U)`` per QV in ascending QV
    order. Returns the smallest QV (or its position, when ``qvs`` is None)
    from which every deviation ``|sse_vs_Z - d_uz|`` stays within
    ``sse_vs_U`` at the largest QV, or None if even the last QV fails.
    """
    if len(rd_pairs) < 2:
        raise ValueError("need at least two QV points")
    sse_z = np.array([p[1] for p in rd_pairs], dtype=np.float64)
    bound = rd_pairs[-1][2]
    over = np.flatnonzero(np.abs(sse_z - d_uz) > bound)
    start = 0 if over.size == 0 else int(over[-1]) + 1
    if start == len(rd_pairs):
        return None
    return start if qvs is None else qvs[start]


@dataclass(frozen=True)
class SaturationResult:
    verdict: str
    lambda_star_z: float
    saturation_rate_bits: int
    lambda_star_u: float
    qp_star: int
    bounds: SaturationBounds
    num_pixels: int
    lambda_grid: tuple
    bound_source: str = "z-sweep"
    denoiser: str = None
    transition_lambda: float = None

    def to_json(self):
        n = self.num_pixels
        return {
            "verdict": self.verdict,
            "lambda_star_z": self.lambda_star_z,
            "lambda_star_u": self.lambda_star_u,
            "qp_star": self.qp_star,
            "saturation_rate_bits": self.saturation_rate_bits,
            "saturation_rate_bpp": (None if self.saturation_rate_bits is None
                                    else self.saturation_rate_bits / n),
            "d_uz_mse": self.bounds.d_uz / n,
            "d_best_mse": self.bounds.d_best / n,
            "d_uz_sse": self.bounds.d_uz,
            "d_best_sse": self.bounds.d_best,
            "delta_sq": self.bounds.delta_sq,
            "small_delta_sq": self.bounds.small_delta_sq,
            "num_pixels": n,
            "bound_source": self.bound_source,
            "transition_lambda": self.transition_lambda,
            "grid": list(self.lambda_grid),
            "denoiser": self.denoiser,
        }


def detect_from_curves(curve_u, curve_z, d_uz, bound_source="z-sweep", denoiser=None):
    """λ*_Z, then the saturation rate, then λ*_U and its QP."""
    bounds = compute_bounds(d_uz, curve_u, curve_z, bound_source)
    lam_z, verdict = detect_lambda_z(curve_z, bounds)
    rate = lam_u = qp = None
    if lam_z is not None:
        iz = int(np.flatnonzero(curve_z.lambdas == lam_z)[0])
        rate = int(curve_z.rates[iz])
        try:
            lam_u = detect_lambda_u(curve_u, rate)
        except ValueError as exc:
            log.warning("no U-reference lambda reaches the saturation rate: %s", exc)
            verdict = NO_SATURATION
        else:
            qp = lambda_to_qp(lam_u)
    return SaturationResult(
        verdict=verdict,
        lambda_star_z=lam_z,
        saturation_rate_bits=rate,
        lambda_star_u=lam_u,
        qp_star=qp,
        bounds=bounds,
        num_pixels=curve_u.num_pixels,
        lambda_grid=tuple(float(x) for x in curve_u.lambdas),
        bound_source=bound_source,
        denoiser=denoiser,
        transition_lambda=transition_estimate(curve_u, d_uz),
    )


@dataclass(frozen=True)
class DetectionConfig:
    sample_count: int = 5
    patch_width: int = 48
    patch_height: int = 40
    qvs: tuple = rdo.DEFAULT_QVS
    lambda_grid: tuple = field(default_factory=default_lambda_grid)
    bound_source: str = "z-sweep"
    jobs: int = 1


@dataclass(frozen=True, eq=False)
class DetectionReport:
    result: SaturationResult
    curve_u: rdo.RDCurve
    curve_z: rdo.RDCurve
    table: rdo.PatchRDTable
    U: object
    Z: object


def sse(a, b):
    return int(((a.stack().astype(np.int64) - b.stack()) ** 2).sum())


def run_detection(frames, denoiser, config=DetectionConfig()):
    """Sample, denoise, build the RD table, sweep against U and Z, detect."""
    U = sample_frames(frames, min(config.sample_count, len(frames)))
    Z = denoise(U, denoiser, jobs=config.jobs)
    table = rdo.build_rd_table(U, Z, config.patch_width, config.patch_height,
                               config.qvs, jobs=config.jobs)
    curve_u = rdo.sweep(table, config.lambda_grid, "U")
    curve_z = rdo.sweep(table, config.lambda_grid, "Z")
    result = detect_from_curves(curve_u, curve_z, sse(U, Z), config.bound_source,
                                denoiser.describe())
    log.info("verdict=%s lambda*_Z=%s lambda*_U=%s QP*=%s", result.verdict,
             result.lambda_star_z, result.lambda_star_u, result.qp_star)
    return DetectionReport(result, curve_u, curve_z, table, U, Z)
