"""Kernel backends: correctness against brute geometric oracles, and the two
backends (numba jit / pure numpy) producing bit-identical results.

Oracles here avoid both production code paths: point-triangle distance via a
dense barycentric grid, ray tests via analytic slab intersection with
axis-aligned boxes.
"""
import os
import subprocess
import sys

import numpy as np
import pytest

from artforge import kernels as K
from artforge.errors import ConfigInvalid

from shapes import box_mesh


# --- oracles -----------------------------------------------------------------

def grid_point_tri_dist(p, a, b, c, n=220):
    """Min distance from p to triangle abc via a dense barycentric grid."""
    u = np.linspace(0.0, 1.0, n)
    uu, vv = np.meshgrid(u, u)
    keep = uu + vv <= 1.0
    uu, vv = uu[keep], vv[keep]
    pts = (np.outer(1 - uu - vv, a) + np.outer(uu, b) + np.outer(vv, c))
    return float(np.sqrt(((pts - p) ** 2).sum(1).min()))


def slab_ray_box(origin, direction, lo, hi):
    """Entry/exit parameters of a ray against an AABB; None when it misses."""
    t0, t1 = -np.inf, np.inf
    for k in range(3):
        if abs(direction[k]) < 1e-300:
            if origin[k] < lo[k] or origin[k] > hi[k]:
                return None
            continue
        ta = (lo[k] - origin[k]) / direction[k]
        tb = (hi[k] - origin[k]) / direction[k]
        t0, t1 = max(t0, min(ta, tb)), min(t1, max(ta, tb))
    return (t0, t1) if t0 <= t1 else None


def box_tris(center=(0, 0, 0), size=(1, 1, 1)):
    v, f = box_mesh(size=size, center=center)
    return v[f]


# --- correctness ---------------------------------------------------------------

def test_point_tri_dist_matches_grid_oracle():
    rng = np.random.default_rng(0)
    tris = rng.normal(size=(25, 3, 3))
    pts = rng.normal(size=(25, 3)) * 1.5
    got = np.sqrt(K.point_tri_dist_sq(pts, tris[:, 0], tris[:, 1], tris[:, 2]))
    for i in range(25):
        ref = grid_point_tri_dist(pts[i], *tris[i])
        assert got[i] <= ref + 1e-12        # grid point is a feasible witness
        assert got[i] >= ref - 2e-2         # grid resolution bound


def test_points_within_matches_point_distances():
    rng = np.random.default_rng(1)
    tris = rng.normal(size=(30, 3, 3))
    accel = K.build_accel(tris)
    pts = rng.normal(size=(300, 3)) * 2
    d = K.points_min_dist(pts, accel)
    assert np.array_equal(K.points_within(pts, accel, 0.4), d <= 0.4)


def test_ray_first_hit_against_slab_test():
    lo, hi = np.array([-0.5, -0.5, -0.5]), np.array([0.5, 0.5, 0.5])
    accel = K.build_accel(box_tris())
    rng = np.random.default_rng(2)
    origins = rng.uniform(-3, 3, size=(200, 3))
    dirs = rng.normal(size=(200, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    t = K.ray_first_hits(origins, dirs, accel)
    for i in range(200):
        ref = slab_ray_box(origins[i], dirs[i], lo, hi)
        if ref is None or ref[1] <= 1e-9:
            assert not np.isfinite(t[i])
        else:
            expect = ref[0] if ref[0] > 1e-9 else ref[1]
            assert t[i] == pytest.approx(expect, abs=1e-9)


def test_ray_crossing_parity_classifies_inside():
    accel = K.build_accel(box_tris(size=(1.0, 0.8, 1.3)))
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1.2, 1.2, size=(500, 3))
    d = np.array([0.3, 0.52, 0.8])
    d /= np.linalg.norm(d)
    parity = K.ray_crossings(pts, d, accel) % 2
    inside = (np.abs(pts[:, 0]) < 0.5) & (np.abs(pts[:, 1]) < 0.4) \
        & (np.abs(pts[:, 2]) < 0.65)
    assert np.array_equal(parity == 1, inside)


def test_ray_crossing_parity_nested_shells():
    # wall region between two nested boxes is "inside"; the inner cavity is not
    tris = np.concatenate([box_tris(size=(2, 2, 2)), box_tris(size=(1, 1, 1))])
    accel = K.build_accel(tris)
    pts = np.array([[0.0, 0, 0], [0.75, 0, 0], [1.5, 0, 0]])
    d = np.array([0.123, 0.456, 0.789])
    d /= np.linalg.norm(d)
    parity = K.ray_crossings(pts, d, accel) % 2
    assert parity.tolist() == [0, 1, 0]


def test_min_dist_between_gap_exact():
    a = box_tris(center=(0, 0, 0))
    b = box_tris(center=(1.35, 0.2, 0))
    assert K.min_dist_between(a, K.build_accel(b)) == pytest.approx(0.35, abs=1e-12)


def test_min_dist_stop_below_early_exit():
    a = box_tris(center=(0, 0, 0))
    accel = K.build_accel(box_tris(center=(1.35, 0, 0)))
    full = K.min_dist_between(a, accel)
    stopped = K.min_dist_between(a, accel, stop_below=1.0)
    assert stopped <= 1.0 or stopped == full


# --- backend agreement -----------------------------------------------------------

@pytest.fixture
def both_backends():
    if "numba" not in K.available_backends():
        pytest.skip("numba backend unavailable")
    prev = K.active_backend()
    yield
    K.set_backend(prev)


def test_backends_bit_identical(both_backends):
    rng = np.random.default_rng(7)
    A = rng.normal(size=(40, 3, 3))
    B = rng.normal(size=(55, 3, 3)) + 0.5
    accel = K.build_accel(B)
    pts = rng.normal(size=(200, 3)) * 2.0
    dirs = rng.normal(size=(200, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    shared = np.array([0.123, 0.456, 0.789])
    shared /= np.linalg.norm(shared)

    out = {}
    for name in K.available_backends():
        K.set_backend(name)
        out[name] = {
            "min": K.min_dist_between(A, accel),
            "pmd": K.points_min_dist(pts, accel),
            "within": K.points_within(pts, accel, 0.3),
            "fh": K.ray_first_hits(pts, dirs, accel),
            "cross": K.ray_crossings(pts, shared, accel),
            "pt": K.point_tri_dist_sq(pts[:40], A[:, 0], A[:, 1], A[:, 2]),
            "ss": K.seg_seg_dist_sq(A[:, 0], A[:, 1], B[:40, 0], B[:40, 1]),
            "tt": K.tri_tri_dist_sq(A[:40], B[:40]),
        }
    a, b = out["numpy"], out["numba"]
    assert a["min"] == b["min"]
    for key in ("pmd", "within", "cross", "pt", "ss", "tt"):
        assert np.array_equal(a[key], b[key]), key
    fa, fb = a["fh"], b["fh"]
    assert np.array_equal(np.isfinite(fa), np.isfinite(fb))
    assert np.array_equal(fa[np.isfinite(fa)], fb[np.isfinite(fb)])


def test_rasterize_backends_identical(both_backends):
    xy = np.array([[[2.0, 2.0], [40.0, 5.0], [10.0, 30.0]],
                   [[5.0, 1.0], [45.0, 25.0], [8.0, 28.0]]])
    z = np.array([[1.0, 2.0, 3.0], [2.5, 1.5, 2.0]])
    fv = np.array([7, 9], np.int32)
    outs = {}
    for name in K.available_backends():
        K.set_backend(name)
        outs[name] = K.rasterize_ids(xy, z, fv, 48, 32, True)
    ids_a, dep_a = outs["numpy"]
    ids_b, dep_b = outs["numba"]
    assert np.array_equal(ids_a, ids_b)
    fin = np.isfinite(dep_a)
    assert np.array_equal(fin, np.isfinite(dep_b))
    assert np.array_equal(dep_a[fin], dep_b[fin])
    assert (ids_a >= 0).any()


# --- selection ---------------------------------------------------------------

def test_env_var_selects_backend():
    code = "import artforge.kernels as K; print(K.active_backend())"
    for want in ("numpy", "numba"):
        if want not in K.available_backends():
            continue
        r = subprocess.run([sys.executable, "-c", code],
                           env={**os.environ, "FORGE_BACKEND": want},
                           capture_output=True, text=True, timeout=120)
        assert r.stdout.strip() == want, r.stderr


def test_unknown_backend_rejected():
    with pytest.raises(ConfigInvalid):
        K.set_backend("cuda")
