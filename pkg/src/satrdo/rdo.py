"""Per-patch Lagrangian RDO over a precomputed (patch x QV) rate/distortion table."""
import csv
from dataclasses import dataclass, field

import numpy as np

from satrdo.codec.core import forward_blocks, from_blocks, quality_to_qtable, quantize, reconstruct, zigzag
from satrdo.codec.kernels import count_bits
from satrdo.frame_io import partition
from satrdo.parallel import map_ordered

REFERENCES = ("U", "Z")
DEFAULT_QVS = tuple(range(19, 96, 4))
CSV_COLUMNS = ("lambda", "rate_bits", "rate_bpp", "mse_vs_U", "mse_vs_Z", "sse_vs_U", "sse_vs_Z")


def _frozen(a, dtype=np.int64):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PatchRDTable:
    """Rate (bits) and SSE against U and Z for every (patch, QV) pair.

    Arrays are ``(n_patches, n_qvs)`` int64 and read-only.
    """

    qvs: tuple
    rate: np.ndarray
    sse_u: np.ndarray
    sse_z: np.ndarray
    num_pixels: int

    def __post_init__(self):
        qvs = tuple(int(q) for q in self.qvs)
        if not qvs or any(b <= a for a, b in zip(qvs, qvs[1:])):
            raise ValueError("qvs must be non-empty and strictly ascending")
        object.__setattr__(self, "qvs", qvs)
        for name in ("rate", "sse_u", "sse_z"):
            arr = _frozen(getattr(self, name))
            if arr.shape != (arr.shape[0], len(qvs)) or arr.shape[0] == 0:
                raise ValueError(f"{name} must have shape (n_patches, {len(qvs)})")
            if (arr < 0).any():
                raise ValueError(f"{name} has negative entries")
            object.__setattr__(self, name, arr)
        if not (self.rate.shape == self.sse_u.shape == self.sse_z.shape):
            raise ValueError("rate/sse tables disagree in shape")

    @property
    def n_patches(self):
        return self.rate.shape[0]

    def distortion(self, reference):
        if reference == "U":
            return self.sse_u
        if reference == "Z":
            return self.sse_z
        raise ValueError(f"reference must be one of {REFERENCES}, got {reference!r}")

    def fixed_qv_totals(self):
        """Whole-set ``(rate, sse_vs_Z, sse_vs_U)`` per QV with every patch at that QV."""
        return list(zip(self.rate.sum(0).tolist(), self.sse_z.sum(0).tolist(),
                        self.sse_u.sum(0).tolist()))


def _qv_column(coeffs, u_patches, z_patches, qv):
    qtable = quality_to_qtable(qv)
    q = quantize(coeffs, qtable)
    rate = count_bits(zigzag(q))
    n, ph, pw = u_patches.shape
    recon = from_blocks(reconstruct(q, qtable), ph, pw).astype(np.int64)
    sse_u = ((recon - u_patches) ** 2).sum(axis=(1, 2))
    sse_z = ((recon - z_patches) ** 2).sum(axis=(1, 2))
    return rate, sse_u, sse_z


def build_rd_table(U, Z, patch_width, patch_height, qvs=DEFAULT_QVS, jobs=1):
    """Encode every patch of ``U`` at every QV and score it against ``U`` and ``Z``.

    The DCT is computed once; each QV only quantizes, counts bits and
    reconstructs. Columns are built in parallel over QVs.
    """
    qvs = tuple(int(q) for q in qvs)
    if not qvs:
        raise ValueError("qv list is empty")
    if any(b <= a for a, b in zip(qvs, qvs[1:])):
        raise ValueError("qv list must be strictly ascending")
    for q in qvs:
        quality_to_qtable(q)
    if (U.width, U.height, len(U)) != (Z.width, Z.height, len(Z)):
        raise ValueError("U and Z frame sets differ in size or count")

    grid, u_patches = partition(U, patch_width, patch_height)
    _, z_patches = partition(Z, patch_width, patch_height)
    coeffs = forward_blocks(u_patches)
    u64 = u_patches.astype(np.int64)
    z64 = z_patches.astype(np.int64)

    cols = map_ordered(lambda qv: _qv_column(coeffs, u64, z64, qv), qvs, jobs)
    rate, sse_u, sse_z = (np.stack([c[i] for c in cols], axis=1) for i in range(3))
    return PatchRDTable(qvs, rate, sse_u, sse_z, U.num_pixels)


@dataclass(frozen=True, eq=False)
class RDPoint:
    lam: float
    total_rate_bits: int
    sse_vs_U: int
    sse_vs_Z: int
    choices: np.ndarray = field(repr=False)


def _choose(table, lam, reference):
    d = table.distortion(reference)
    cost = d + lam * table.rate
    best = cost.min(axis=1, keepdims=True)
    tied = cost == best
    # among tied QVs: smallest rate, then largest QV index
    rate_masked = np.where(tied, table.rate, np.iinfo(np.int64).max)
    tied &= rate_masked == rate_masked.min(axis=1, keepdims=True)
    n_q = tied.shape[1]
    return n_q - 1 - np.argmax(tied[:, ::-1], axis=1)


def solve_rdo(table, lam, reference):
    """Minimize ``sum_k d[k] + lam * r[k]`` patch by patch.

    The objective is separable, so the per-patch argmin is globally optimal.
    Ties go to the smaller rate, then the larger QV index.
    """
    lam = float(lam)
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    choices = _choose(table, lam, reference)
    idx = np.arange(table.n_patches)
    return RDPoint(
        lam=lam,
        total_rate_bits=int(table.rate[idx, choices].sum()),
        sse_vs_U=int(table.sse_u[idx, choices].sum()),
        sse_vs_Z=int(table.sse_z[idx, choices].sum()),
        choices=_frozen(choices),
    )


@dataclass(frozen=True, eq=False)
class RDCurve:
    reference: str
    points: tuple
    num_pixels: int

    def __post_init__(self):
        if self.reference not in REFERENCES:
            raise ValueError(f"reference must be one of {REFERENCES}")
        if not self.points:
            raise ValueError("curve has no points")
        lams = [p.lam for p in self.points]
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("curve lambdas must be strictly increasing")

    @property
    def lambdas(self):
        return np.array([p.lam for p in self.points])

    @property
    def rates(self):
        return np.array([p.total_rate_bits for p in self.points], dtype=np.int64)

    @property
    def sse_u(self):
        return np.array([p.sse_vs_U for p in self.points], dtype=np.int64)

    @property
    def sse_z(self):
        return np.array([p.sse_vs_Z for p in self.points], dtype=np.int64)

    def optimized_sse(self):
        return self.sse_u if self.reference == "U" else self.sse_z

    def __len__(self):
        return len(self.points)


def sweep(table, lambda_grid, reference):
    grid = [float(x) for x in lambda_grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be strictly increasing")
    points = tuple(solve_rdo(table, lam, reference) for lam in grid)
    return RDCurve(reference, points, table.num_pixels)


def write_curve_csv(curve, path):
    """Write ``lambda, rate_bits, rate_bpp, mse_vs_U, mse_vs_Z`` plus the exact SSEs."""
    n = curve.num_pixels
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for p in curve.points:
            w.writerow([repr(p.lam), p.total_rate_bits, repr(p.total_rate_bits / n),
                        repr(p.sse_vs_U / n), repr(p.sse_vs_Z / n), p.sse_vs_U, p.sse_vs_Z])


def read_curve_csv(path, reference, num_pixels):
    """Load a curve written by :func:`write_curve_csv` (choices are not stored)."""
    points = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            points.append(RDPoint(float(row["lambda"]), int(row["rate_bits"]),
                                  int(row["sse_vs_U"]), int(row["sse_vs_Z"]),
                                  np.empty(0, dtype=np.int64)))
    return RDCurve(reference, tuple(points), num_pixels)
