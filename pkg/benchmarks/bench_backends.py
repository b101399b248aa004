"""Compare the compiled and pure-NumPy kernel backends.

    python benchmarks/bench_backends.py [--cells 200000] [--repeats 5]

Times correlation and each CFAR kernel on the same random input with both
backends, checks that their outputs agree, and prints a table.  A full
detector run on a synthetic 6 s scene is timed as well.
"""

import argparse
import os
import time

import numpy as np

from whistler import _core_py

try:
    from whistler import _core
except ImportError:
    _core = None


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def scene_time(pure, repeats):
    # the backend is chosen at import, so run in a child process
    import subprocess
    import sys

    code = (
        "import time\n"
        "from whistler import CcswDetector, SceneSpec, generate_scene, BACKEND\n"
        "from whistler.scenegen import ScenePlan\n"
        "ts, _ = generate_scene(ScenePlan().scene(7))\n"
        "det = CcswDetector(); det.analyse(ts)\n"
        "best = min((lambda t: (det.analyse(ts), time.perf_counter() - t)[1])(time.perf_counter())"
        f" for _ in range({repeats}))\n"
        "print(BACKEND, best)\n"
    )
    env = dict(os.environ, WHISTLER_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    name, secs = out.stdout.split()
    return name, float(secs)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=200_000)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if _core is None:
        print("compiled backend not built; only the NumPy backend is available")
        return 1

    rng = np.random.default_rng(args.seed)
    power = rng.exponential(size=args.cells)
    spec = rng.uniform(size=(52, 940))
    kernel = np.zeros((52, 184))
    kernel[np.arange(52), np.linspace(183, 0, 52).astype(int)] = 1.0

    cases = [
        ("xcorr 52x940 * 52x184", lambda m: m.xcorr_valid(spec, kernel)),
        (f"CA  n=12 g=10 ({args.cells} cells)", lambda m: m.cfar_ca(power, 12, 10)),
        (f"OS  k=13 ({args.cells} cells)", lambda m: m.cfar_os(power, 12, 10, 13)),
        (f"TM  5/3 ({args.cells} cells)", lambda m: m.cfar_tm(power, 12, 10, 5, 3)),
    ]
    print(f"{'kernel':34s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}  max rel diff")
    for name, fn in cases:
        t_py, ref = best_of(lambda: fn(_core_py), args.repeats)
        t_c, got = best_of(lambda: fn(_core), args.repeats)
        ok = np.isfinite(ref)
        diff = np.max(np.abs(got[ok] - ref[ok]) / np.maximum(np.abs(ref[ok]), 1e-300))
        print(f"{name:34s} {1e3 * t_py:10.2f} {1e3 * t_c:10.2f} {t_py / t_c:8.1f}x  {diff:.1e}")

    for pure in (True, False):
        backend, secs = scene_time(pure, args.repeats)
        print(f"full detector, 6 s scene, {backend:6s}: {1e3 * secs:8.1f} ms  (r = {secs / 6.0:.4f})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
