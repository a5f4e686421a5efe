"""Compare the compiled and pure-numpy kernel paths.

Bit counting is timed in-process on the quantized coefficients of the
synthetic fixture. The full RD-table build is timed in a subprocess per mode,
since the ``SATRDO_NO_NUMBA`` flag is read at import time.

    python3 benchmarks/bench_kernels.py [--frames 5] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

BUILD_SNIPPET = """
import json, sys, time
from satrdo._accel import NUMBA_ENABLED
from satrdo.denoise import DenoiserSpec, denoise
from satrdo.rdo import build_rd_table
from satrdo.ugc_synth import SynthSpec, make_pristine_frames, synthesize_ugc
frames, repeat = int(sys.argv[1]), int(sys.argv[2])
U = synthesize_ugc(make_pristine_frames(count=frames), SynthSpec(25))
Z = denoise(U, DenoiserSpec("deblock", 20))
build_rd_table(U, Z, 48, 40)  # warm-up (JIT compile or cache load)
times = []
for _ in range(repeat):
    t0 = time.perf_counter()
    build_rd_table(U, Z, 48, 40)
    times.append(time.perf_counter() - t0)
print(json.dumps({"numba": NUMBA_ENABLED, "best": min(times)}))
"""


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_count_bits(frames, repeat):
    from satrdo.codec import kernels
    from satrdo.codec.core import forward_blocks, quality_to_qtable, quantize, zigzag
    from satrdo.frame_io import partition
    from satrdo.ugc_synth import SynthSpec, make_pristine_frames, synthesize_ugc

    U = synthesize_ugc(make_pristine_frames(count=frames), SynthSpec(25))
    _, patches = partition(U, 48, 40)
    coeffs = forward_blocks(patches)
    zz = np.ascontiguousarray(zigzag(quantize(coeffs, quality_to_qtable(75))), dtype=np.int32)
    dc, ac = kernels._DC_LEN, kernels._AC_LEN

    results = {"patches": len(zz)}
    ref = kernels._count_bits_numpy(zz)
    results["numpy"] = best_of(lambda: kernels._count_bits_numpy(zz), repeat)
    if hasattr(kernels._count_bits_loop, "signatures"):
        kernels._count_bits_loop(zz[:1], dc, ac)
        assert np.array_equal(kernels._count_bits_loop(zz, dc, ac), ref)
        results["numba"] = best_of(lambda: kernels._count_bits_loop(zz, dc, ac), repeat)
    sub = zz[:20]
    py_t = best_of(lambda: kernels._count_bits_loop.py_func(sub, dc, ac), 1)
    results["python_loop_extrapolated"] = py_t * len(zz) / len(sub)
    return results


def bench_build(frames, repeat):
    out = {}
    for label, flag in (("numba", None), ("numpy", "1")):
        env = dict(os.environ)
        env.pop("SATRDO_NO_NUMBA", None)
        if flag:
            env["SATRDO_NO_NUMBA"] = flag
        proc = subprocess.run([sys.executable, "-c", BUILD_SNIPPET, str(frames), str(repeat)],
                              env=env, capture_output=True, text=True, check=True)
        out[label] = json.loads(proc.stdout.strip().splitlines()[-1])
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    cb = bench_count_bits(args.frames, args.repeat)
    print(f"count_bits over {cb['patches']} patches (48x40, QV 75):")
    for key in ("numba", "numpy", "python_loop_extrapolated"):
        if key in cb:
            print(f"  {key:<26s} {cb[key] * 1e3:9.2f} ms")

    build = bench_build(args.frames, args.repeat)
    print(f"build_rd_table, {args.frames} frames 480x360, 20 QVs:")
    for label, r in build.items():
        active = "active" if r["numba"] else "inactive"
        print(f"  {label:<26s} {r['best']:9.3f} s   (numba {active})")


if __name__ == "__main__":
    main()
