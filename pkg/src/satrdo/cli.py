"""``satrdo`` command line: detect, rd-curve, generate-ugc, encode.

Exit status of ``detect``: 0 detected, 2 no saturation in range, 3 degenerate
reference, 1 any operational error.
"""
import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from satrdo import __version__, rdo
from satrdo._accel import NUMBA_ENABLED
from satrdo.codec import encode_patch
from satrdo.denoise import DenoiserSpec, denoise
from satrdo.frame_io import Frame, FrameSet, load_frames, partition, sample_frames, save_frames
from satrdo.parallel import resolve_jobs
from satrdo.saturation import (
    BOUND_SOURCES,
    DEGENERATE,
    DETECTED,
    NO_SATURATION,
    DetectionConfig,
    default_lambda_grid,
    detect_from_curves,
    run_detection,
    sse,
)
from satrdo.ugc_synth import SynthSpec, synthesize_ugc

log = logging.getLogger("satrdo")

EXIT_CODES = {DETECTED: 0, NO_SATURATION: 2, DEGENERATE: 3}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # exit 2 is reserved for the no-saturation verdict
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_patch_size(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"patch size must look like 48x40, got {text!r}") from None
    return w, h


def parse_qvs(text):
    """``19:95:4`` (inclusive range) or ``19,50,95``."""
    try:
        if ":" in text:
            start, stop, step = (int(v) for v in text.split(":"))
            qvs = tuple(range(start, stop + 1, step))
        else:
            qvs = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad QV list {text!r}") from None
    if not qvs or any(not 1 <= q <= 100 for q in qvs) or list(qvs) != sorted(set(qvs)):
        raise argparse.ArgumentTypeError(f"QVs must be ascending, unique, in [1, 100]: {text!r}")
    return qvs


def parse_lambdas(text):
    try:
        lams = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda list {text!r}") from None
    if not lams or any(not lam > 0 for lam in lams) or any(b <= a for a, b in zip(lams, lams[1:])):
        raise argparse.ArgumentTypeError("lambdas must be positive and strictly increasing")
    return lams


def _add_input_args(p, required=True):
    p.add_argument("inputs", nargs="+" if required else "*", type=Path,
                   help="frame files or directories of .pgm / raw .y files")
    p.add_argument("--format", choices=("pgm", "raw"), help="default: by file extension")
    p.add_argument("--width", type=int, help="frame width for raw input")
    p.add_argument("--height", type=int, help="frame height for raw input")


def _add_rd_args(p):
    p.add_argument("--sample-count", type=int, default=5)
    p.add_argument("--patch-size", type=parse_patch_size, default=(48, 40), metavar="WxH")
    p.add_argument("--qvs", type=parse_qvs, default=rdo.DEFAULT_QVS, metavar="START:STOP:STEP|LIST")
    p.add_argument("--lambdas", type=parse_lambdas, default=None,
                   help="comma-separated grid (default: lambda(QP) for QP 0..51)")
    p.add_argument("--denoiser", default="deblock:20",
                   help="deblock:<threshold> | gaussian:<sigma> | external:<dir>")
    p.add_argument("--bound-source", choices=BOUND_SOURCES, default="z-sweep")
    p.add_argument("--jobs", type=int, default=None, help="worker threads (env SATRDO_JOBS)")
    p.add_argument("-o", "--out-dir", type=Path, required=True)


def build_parser():
    parser = _Parser(prog="satrdo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect the saturation lambda and QP")
    _add_input_args(p, required=False)
    _add_rd_args(p)
    p.add_argument("--from-curves", type=Path, metavar="DIR",
                   help="re-derive detection from an rd-curve output directory")

    p = sub.add_parser("rd-curve", help="write U- and Z-reference RD curves only")
    _add_input_args(p)
    _add_rd_args(p)

    p = sub.add_parser("generate-ugc", help="simulate UGC by noise + compression")
    p.add_argument("--severity", type=int, required=True, help="quality value of the degrading pass")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("pgm", "raw"))
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("in_dir", type=Path)
    p.add_argument("out_dir", type=Path)

    p = sub.add_parser("encode", help="encode frames patch-wise at one QV")
    _add_input_args(p)
    p.add_argument("--qv", type=int, required=True)
    p.add_argument("--patch-size", type=parse_patch_size, default=(48, 40), metavar="WxH")
    p.add_argument("--dump-bitstreams", action="store_true")
    p.add_argument("-o", "--out-dir", type=Path, required=True)
    return parser


def _jsonable(value):
    if isinstance(value, Path):
        return str(value.resolve())
    if isinstance(value, tuple):
        return list(value)
    return value


def write_manifest(out_dir, args, argv, **extra):
    manifest = {
        "tool": "satrdo",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "cwd": os.getcwd(),
        "numba": NUMBA_ENABLED,
        "config": {k: ([_jsonable(v) for v in val] if isinstance(val, list) else _jsonable(val))
                   for k, val in vars(args).items()},
    }
    manifest.update(extra)
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def _load_inputs(args):
    if not args.inputs:
        raise UsageError("no input frames given")
    return load_frames(args.inputs, args.format, args.width, args.height)


def _detection_config(args, frames):
    w, h = args.patch_size
    if args.sample_count < 1 or args.sample_count > len(frames):
        raise UsageError(f"--sample-count must be in [1, {len(frames)}]")
    rdo_grid = args.lambdas or default_lambda_grid()
    # fail on bad patch geometry before any pixel work
    partition(FrameSet((frames[0],), (0,)), w, h)
    return DetectionConfig(sample_count=args.sample_count, patch_width=w, patch_height=h,
                           qvs=args.qvs, lambda_grid=tuple(rdo_grid),
                           bound_source=args.bound_source, jobs=resolve_jobs(args.jobs))


def _denoiser(args):
    return DenoiserSpec.parse(args.denoiser, format=args.format, width=args.width, height=args.height)


def _write_result(out_dir, result):
    with open(out_dir / "saturation.json", "w") as fh:
        json.dump(result.to_json(), fh, indent=2)


def cmd_detect(args, argv):
    out = args.out_dir
    if args.from_curves:
        src = args.from_curves
        meta = json.loads((src / "manifest.json").read_text())
        n = meta["num_pixels"]
        curve_u = rdo.read_curve_csv(src / "rd_curve_u.csv", "U", n)
        curve_z = rdo.read_curve_csv(src / "rd_curve_z.csv", "Z", n)
        result = detect_from_curves(curve_u, curve_z, meta["d_uz_sse"], args.bound_source,
                                    meta.get("denoiser"))
        out.mkdir(parents=True, exist_ok=True)
        _write_result(out, result)
        write_manifest(out, args, argv)
        return EXIT_CODES[result.verdict]

    frames = _load_inputs(args)
    config = _detection_config(args, frames)
    spec = _denoiser(args)
    out.mkdir(parents=True, exist_ok=True)
    report = run_detection(frames, spec, config)
    rdo.write_curve_csv(report.curve_u, out / "rd_curve_u.csv")
    rdo.write_curve_csv(report.curve_z, out / "rd_curve_z.csv")
    _write_result(out, report.result)
    write_manifest(out, args, argv, num_pixels=report.table.num_pixels,
                   d_uz_sse=report.result.bounds.d_uz, denoiser=spec.describe(),
                   source_indices=list(report.U.source_indices))
    r = report.result
    print(f"verdict={r.verdict} lambda*_Z={r.lambda_star_z} lambda*_U={r.lambda_star_u} QP*={r.qp_star}")
    return EXIT_CODES[r.verdict]


def cmd_rd_curve(args, argv):
    frames = _load_inputs(args)
    config = _detection_config(args, frames)
    spec = _denoiser(args)
    U = sample_frames(frames, config.sample_count)
    Z = denoise(U, spec, jobs=config.jobs)
    table = rdo.build_rd_table(U, Z, config.patch_width, config.patch_height, config.qvs,
                               jobs=config.jobs)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    for ref in rdo.REFERENCES:
        curve = rdo.sweep(table, config.lambda_grid, ref)
        rdo.write_curve_csv(curve, out / f"rd_curve_{ref.lower()}.csv")
    write_manifest(out, args, argv, num_pixels=table.num_pixels, d_uz_sse=sse(U, Z),
                   denoiser=spec.describe(), source_indices=list(U.source_indices))
    return 0


def cmd_generate_ugc(args, argv):
    frames = load_frames(args.in_dir, args.format, args.width, args.height)
    spec = SynthSpec(args.severity, args.noise_sigma, args.seed)
    ugc = synthesize_ugc(frames, spec, jobs=resolve_jobs(args.jobs))
    save_frames(ugc, args.out_dir, format=args.format or "pgm")
    write_manifest(args.out_dir, args, argv)
    return 0


def cmd_encode(args, argv):
    frames = _load_inputs(args)
    w, h = args.patch_size
    grid, patches = partition(frames, w, h)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if args.dump_bitstreams:
        (out / "bitstreams").mkdir(exist_ok=True)

    recon = patches.copy()
    rows = []
    for k, patch in enumerate(patches):
        enc = encode_patch(patch, args.qv)
        recon[k] = enc.recon
        f, r, c = grid.location(k)
        err = int(((enc.recon.astype(int) - patch) ** 2).sum())
        rows.append((f, k, r, c, args.qv, enc.rate_bits, err))
        if args.dump_bitstreams:
            (out / "bitstreams" / f"frame{f:05d}_patch{k:05d}.bin").write_bytes(enc.bitstream)

    frames_out = grid.assemble(recon)
    save_frames(FrameSet(tuple(Frame(p) for p in frames_out), frames.source_indices),
                out / "recon", format="pgm", prefix="recon")
    with open(out / "stats.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(("frame", "patch", "row", "col", "qv", "rate_bits", "sse"))
        wr.writerows(rows)
    write_manifest(out, args, argv, total_rate_bits=sum(r[5] for r in rows))
    return 0


COMMANDS = {
    "detect": cmd_detect,
    "rd-curve": cmd_rd_curve,
    "generate-ugc": cmd_generate_ugc,
    "encode": cmd_encode,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, argv)
    except (UsageError, ValueError, OSError) as exc:
        print(f"satrdo {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
