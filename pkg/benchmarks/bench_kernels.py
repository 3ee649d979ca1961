"""Numba vs pure-numpy timing for the geometry kernels.

Runs every operation in artforge.kernels under both backends on the same
workloads, checks the outputs agree, and prints a table of best-of-N wall
times. The numpy fallback evaluates dense pair grids in chunks, so keep the
default sizes in mind before cranking them up: its cost grows with the full
cross product while the jit side walks the BVH.

Usage:
    python3 benchmarks/bench_kernels.py [--grid 24] [--points 4000]
                                        [--pairs 50000] [--repeats 3]
"""
import argparse
import time

import numpy as np

from artforge import kernels as K
from artforge.kernels import build_accel


def height_field(n):
    """Triangulated sin/cos sheet: spatially coherent, so the BVH earns its keep."""
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs)
    Z = 0.2 * np.sin(6.0 * X) * np.cos(5.0 * Y)
    V = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)
    idx = np.arange((n + 1) * (n + 1)).reshape(n + 1, n + 1)
    a, b, c, d = idx[:-1, :-1], idx[:-1, 1:], idx[1:, :-1], idx[1:, 1:]
    f = np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3),
                        np.stack([b, d, c], -1).reshape(-1, 3)])
    return V[f]


def make_cases(grid, points, pairs, seed=0):
    rng = np.random.default_rng(seed)
    sheet = height_field(grid)
    accel = build_accel(sheet)
    soup = height_field(max(4, grid // 3)) + [0.0, 0.0, 0.8]

    pts = rng.uniform([-0.2, -0.2, -0.5], [1.2, 1.2, 0.7], size=(points, 3))
    dirs = rng.normal(size=(points, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    down = np.array([0.0, 0.0, -1.0])

    A = rng.normal(size=(pairs, 3, 3))
    B = rng.normal(size=(pairs, 3, 3)) + [2.0, 0.0, 0.0]

    # perspective projection of the sheet onto a 512x512 screen
    z = 2.0 + sheet[:, :, 2]
    xy = np.stack([(sheet[:, :, 0] / z + 0.5) * 511.0,
                   (sheet[:, :, 1] / z + 0.5) * 511.0], axis=-1)
    fv = np.arange(len(sheet), dtype=np.int32)

    return [
        (f"min_dist_between {len(soup)}x{len(sheet)}",
         lambda: K.min_dist_between(soup, accel)),
        (f"points_min_dist {points}x{len(sheet)}",
         lambda: K.points_min_dist(pts, accel)),
        (f"points_within {points}x{len(sheet)}",
         lambda: K.points_within(pts, accel, 0.05)),
        (f"ray_first_hits {points}x{len(sheet)}",
         lambda: K.ray_first_hits(pts, dirs, accel)),
        (f"ray_crossings {points}x{len(sheet)}",
         lambda: K.ray_crossings(pts, down, accel)),
        (f"point_tri_dist_sq {pairs}",
         lambda: K.point_tri_dist_sq(A[:, 0], B[:, 0], B[:, 1], B[:, 2])),
        (f"seg_seg_dist_sq {pairs}",
         lambda: K.seg_seg_dist_sq(A[:, 0], A[:, 1], B[:, 0], B[:, 1])),
        (f"tri_tri_dist_sq {pairs}",
         lambda: K.tri_tri_dist_sq(A, B)),
        (f"rasterize_ids {len(sheet)}@512^2",
         lambda: K.rasterize_ids(xy, z, fv, 512, 512, True)),
    ]


def max_delta(a, b):
    """Largest absolute disagreement; matching infinities count as equal."""
    if isinstance(a, tuple):
        return max(max_delta(x, y) for x, y in zip(a, b))
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0
    with np.errstate(invalid="ignore"):     # inf-inf on shared ray misses
        d = np.abs(a - b)
    d[np.isinf(a) & np.isinf(b) & (np.sign(a) == np.sign(b))] = 0.0
    return float(d.max())


def best_ms(fn, repeats):
    fn()    # warm-up: jit compilation and any lazy caches stay off the clock
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=24, help="height-field resolution")
    ap.add_argument("--points", type=int, default=4000)
    ap.add_argument("--pairs", type=int, default=50000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    backends = K.available_backends()
    if backends != ["numba", "numpy"]:
        print(f"note: backends available here: {backends}")

    cases = make_cases(args.grid, args.points, args.pairs)
    rows = []
    for label, fn in cases:
        t, out = {}, {}
        for name in backends:
            K.set_backend(name)
            out[name] = fn()
            t[name] = best_ms(fn, args.repeats)
        delta = max_delta(out[backends[0]], out[backends[-1]]) if len(backends) > 1 else 0.0
        rows.append((label, t, delta))

    w = max(len(r[0]) for r in rows)
    header = f"{'kernel':<{w}}  " + "".join(f"{n + ' ms':>12}" for n in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}{'max|delta|':>12}"
    print(header)
    print("-" * len(header))
    for label, t, delta in rows:
        line = f"{label:<{w}}  " + "".join(f"{t[n]:>12.3f}" for n in backends)
        if len(backends) > 1:
            line += f"{t['numpy'] / t['numba']:>9.1f}x{delta:>12.3g}"
        print(line)


if __name__ == "__main__":
    main()
