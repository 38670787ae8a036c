"""Compare the numba and numpy kernel backends.

Run: ``python benchmarks/bench_kernels.py [--repeat N]``
"""

import argparse
import time

import numpy as np

from dropflow import _kernels as K
from dropflow.metrics import pseudo_dist_sq
from dropflow.shapes import RadialShape, check_rho_reflection


def best_of(fn, repeat):
    fn()  # warm-up (includes JIT compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    shape = RadialShape.perturbed_ball(1.0, 0.1, 3, 256)
    vx, vy = shape.dense_points(2)
    px, py = rng.uniform(-1.2, 1.2, (2, 20000))
    ts = np.linspace(0.0, 1.1, 65)

    cases = {
        "nearest_on_polyline (20k pts, 512 segs)": (
            lambda: K.nearest_on_polyline_nb(px, py, vx, vy),
            lambda: K.nearest_on_polyline_np(px, py, vx, vy)),
        "reflection_excess (65 offsets)": (
            lambda: K.reflection_excess_nb(vx, vy, 0.6, 0.8, ts, shape.radii),
            lambda: K.reflection_excess_np(vx, vy, 0.6, 0.8, ts, shape.radii)),
    }
    print(f"backend in use: {K.backend()}")
    print(f"{'kernel':45s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, (nb, npy) in cases.items():
        a, b = best_of(nb, args.repeat), best_of(npy, args.repeat)
        print(f"{name:45s} {1e3 * a:11.3f} {1e3 * b:11.3f} {b / a:8.1f}")

    other = RadialShape.ball(1.1, 256)
    for label, fn in [("pseudo_dist_sq with gradient (m=256)", lambda: pseudo_dist_sq(shape, other, return_grad=True)),
                      ("check_rho_reflection (256 directions)", lambda: check_rho_reflection(shape, 0.1))]:
        print(f"{label:45s} {1e3 * best_of(fn, args.repeat):11.3f}  (active backend)")


if __name__ == "__main__":
    main()
