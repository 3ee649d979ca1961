"""Pure-numpy kernel implementations.

This is the fallback backend: every operation is a vectorized brute-force
scan (the BVH arrays on a TriAccel are ignored). Formulas mirror the numba
backend op-for-op so the two produce matching values.
"""

from __future__ import annotations

import numpy as np

from .bvh import TriAccel

_PAIR_CHUNK = 1 << 18
_TINY = 1e-300


def _dot(u, v):
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] + u[..., 2] * v[..., 2]


def _cross(u, v):
    out = np.empty(np.broadcast_shapes(u.shape, v.shape), dtype=np.float64)
    out[..., 0] = u[..., 1] * v[..., 2] - u[..., 2] * v[..., 1]
    out[..., 1] = u[..., 2] * v[..., 0] - u[..., 0] * v[..., 2]
    out[..., 2] = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    return out


def _point_seg_dist_sq(p, a, b):
    ab = b - a
    denom = _dot(ab, ab)
    t = np.where(denom > _TINY, _dot(p - a, ab) / np.where(denom > _TINY, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = a + t[..., None] * ab
    return _dot(p - q, p - q)


def point_tri_dist_sq(p, a, b, c):
    """Squared distance from points to triangles, lane-wise (Ericson regions)."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    bp = p - b
    d3 = _dot(ab, bp)
    d4 = _dot(ac, bp)
    cp = p - c
    d5 = _dot(ab, cp)
    d6 = _dot(ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4
    s = va + vb + vc

    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = d1 / (d1 - d3)
        q_ab = a + v_ab[..., None] * ab
        w_ac = d2 / (d2 - d6)
        q_ac = a + w_ac[..., None] * ac
        den_bc = (d4 - d3) + (d5 - d6)
        w_bc = (d4 - d3) / den_bc
        q_bc = b + w_bc[..., None] * (c - b)
        inv_s = 1.0 / s
        q_in = a + ab * (vb * inv_s)[..., None] + ac * (vc * inv_s)[..., None]

    d_interior = _dot(p - q_in, p - q_in)
    d_degen = np.minimum(
        _point_seg_dist_sq(p, a, b),
        np.minimum(_point_seg_dist_sq(p, b, c), _point_seg_dist_sq(p, c, a)),
    )
    out = np.where(np.abs(s) > _TINY, d_interior, d_degen)
    # overwrite in reverse priority so the scalar backend's first-match wins
    out = np.where((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), _dot(p - q_bc, p - q_bc), out)
    out = np.where((vb <= 0) & (d2 >= 0) & (d6 <= 0), _dot(p - q_ac, p - q_ac), out)
    out = np.where((d6 >= 0) & (d5 <= d6), _dot(cp, cp), out)
    out = np.where((vc <= 0) & (d1 >= 0) & (d3 <= 0), _dot(p - q_ab, p - q_ab), out)
    out = np.where((d3 >= 0) & (d4 <= d3), _dot(bp, bp), out)
    out = np.where((d1 <= 0) & (d2 <= 0), _dot(ap, ap), out)
    return out


def seg_seg_dist_sq(p1, q1, p2, q2):
    """Squared distance between segment pairs, lane-wise (Ericson 5.1.9)."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = _dot(d1, d1)
    e = _dot(d2, d2)
    f = _dot(d2, r)
    c = _dot(d1, r)

    with np.errstate(divide="ignore", invalid="ignore"):
        b = _dot(d1, d2)
        denom = a * e - b * b
        s_general = np.where(denom > _TINY, np.clip((b * f - c * e) / np.where(denom > _TINY, denom, 1.0), 0.0, 1.0), 0.0)
        t_general = (b * s_general + f) / e
        s_tlow = np.clip(-c / a, 0.0, 1.0)
        s_thigh = np.clip((b - c) / a, 0.0, 1.0)

        s = s_general.copy()
        t = t_general.copy()
        low = t_general < 0.0
        high = t_general > 1.0
        s = np.where(low, s_tlow, s)
        t = np.where(low, 0.0, t)
        s = np.where(high, s_thigh, s)
        t = np.where(high, 1.0, t)

        # degenerate segments
        seg2_pt = e <= _TINY
        s = np.where(seg2_pt, np.clip(-c / a, 0.0, 1.0), s)
        t = np.where(seg2_pt, 0.0, t)
        seg1_pt = a <= _TINY
        s = np.where(seg1_pt, 0.0, s)
        t = np.where(seg1_pt, np.clip(f / np.where(e > _TINY, e, 1.0), 0.0, 1.0), t)
        both_pt = (a <= _TINY) & (e <= _TINY)
        s = np.where(both_pt, 0.0, s)
        t = np.where(both_pt, 0.0, t)

    c1 = p1 + s[..., None] * d1
    c2 = p2 + t[..., None] * d2
    return _dot(c1 - c2, c1 - c2)


def _edges_cross_tri(e0, e1, e2, t0, t1, t2):
    """True where any edge of triangle E transversally crosses triangle T."""
    n = _cross(t1 - t0, t2 - t0)
    nn = _dot(n, n)
    valid = nn > _TINY
    hit = np.zeros(e0.shape[:-1], dtype=bool)
    for p, q in ((e0, e1), (e1, e2), (e2, e0)):
        dp = _dot(n, p - t0)
        dq = _dot(n, q - t0)
        crossing = (dp * dq < 0.0) & valid
        # non-crossing lanes still evaluate: x may be inf there, and the
        # grid-aligned edges carry exact zeros, so keep the dots guarded too
        with np.errstate(divide="ignore", invalid="ignore"):
            x = p + ((dp / (dp - dq))[..., None]) * (q - p)
            # barycentric inside test for x in T
            v0 = t1 - t0
            v1 = t2 - t0
            v2 = x - t0
            d00 = _dot(v0, v0)
            d01 = _dot(v0, v1)
            d11 = _dot(v1, v1)
            d20 = _dot(v2, v0)
            d21 = _dot(v2, v1)
            den = d00 * d11 - d01 * d01
            bv = (d11 * d20 - d01 * d21) / den
            bw = (d00 * d21 - d01 * d20) / den
        inside = (bv >= 0.0) & (bw >= 0.0) & (bv + bw <= 1.0) & (np.abs(den) > _TINY)
        hit |= crossing & inside & ~np.isnan(bv)
    return hit


def tri_tri_dist_sq(A, B):
    """Squared distance between triangle pairs (P,3,3) x (P,3,3) -> (P,)."""
    a0, a1, a2 = A[:, 0], A[:, 1], A[:, 2]
    b0, b1, b2 = B[:, 0], B[:, 1], B[:, 2]
    best = point_tri_dist_sq(a0, b0, b1, b2)
    best = np.minimum(best, point_tri_dist_sq(a1, b0, b1, b2))
    best = np.minimum(best, point_tri_dist_sq(a2, b0, b1, b2))
    best = np.minimum(best, point_tri_dist_sq(b0, a0, a1, a2))
    best = np.minimum(best, point_tri_dist_sq(b1, a0, a1, a2))
    best = np.minimum(best, point_tri_dist_sq(b2, a0, a1, a2))
    edges_a = ((a0, a1), (a1, a2), (a2, a0))
    edges_b = ((b0, b1), (b1, b2), (b2, b0))
    for pa, qa in edges_a:
        for pb, qb in edges_b:
            best = np.minimum(best, seg_seg_dist_sq(pa, qa, pb, qb))
    crossing = _edges_cross_tri(a0, a1, a2, b0, b1, b2) | _edges_cross_tri(b0, b1, b2, a0, a1, a2)
    return np.where(crossing, 0.0, best)


def min_dist_between(tris_a: np.ndarray, accel_b: TriAccel, stop_below: float = 0.0) -> float:
    tris_b = accel_b.tris
    na, nb = len(tris_a), len(tris_b)
    if na == 0 or nb == 0:
        return np.inf
    best = np.inf
    rows = max(1, _PAIR_CHUNK // nb)
    for lo in range(0, na, rows):
        A = np.repeat(tris_a[lo:lo + rows], nb, axis=0)
        B = np.tile(tris_b, (len(tris_a[lo:lo + rows]), 1, 1))
        best = min(best, float(np.sqrt(tri_tri_dist_sq(A, B).min())))
        if best <= stop_below:
            return best
    return best


def points_min_dist(points: np.ndarray, accel: TriAccel) -> np.ndarray:
    tris = accel.tris
    n = len(points)
    if len(tris) == 0:
        return np.full(n, np.inf)
    out = np.full(n, np.inf)
    cols = max(1, _PAIR_CHUNK // max(n, 1))
    for lo in range(0, len(tris), cols):
        t = tris[lo:lo + cols]
        p = points[:, None, :]
        d = point_tri_dist_sq(p, t[None, :, 0], t[None, :, 1], t[None, :, 2])
        out = np.minimum(out, d.min(axis=1))
    return np.sqrt(out)


def points_within(points: np.ndarray, accel: TriAccel, eps: float) -> np.ndarray:
    if len(accel.tris) == 0:
        return np.zeros(len(points), dtype=bool)
    return points_min_dist(points, accel) <= eps


def _moller_trumbore(orig, d, tris):
    """Hit parameters for rays (N,3) against triangles (F,3,3): (N,F) t, inf=miss."""
    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    e1 = v1 - v0
    e2 = v2 - v0
    pvec = _cross(d[:, None, :], e2[None, :, :])
    det = _dot(e1[None, :, :], pvec)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        tvec = orig[:, None, :] - v0[None, :, :]
        u = _dot(tvec, pvec) * inv
        qvec = _cross(tvec, e1[None, :, :])
        v = _dot(d[:, None, :], qvec) * inv
        t = _dot(e2[None, :, :], qvec) * inv
    ok = (np.abs(det) > 1e-12) & (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0) & (t > 1e-12)
    return np.where(ok, t, np.inf)


def ray_first_hits(origins: np.ndarray, dirs: np.ndarray, accel: TriAccel,
                   t_max: float = np.inf) -> np.ndarray:
    tris = accel.tris
    n = len(origins)
    if len(tris) == 0:
        return np.full(n, np.inf)
    out = np.full(n, np.inf)
    cols = max(1, _PAIR_CHUNK // max(n, 1))
    for lo in range(0, len(tris), cols):
        t = _moller_trumbore(origins, dirs, tris[lo:lo + cols])
        out = np.minimum(out, t.min(axis=1))
    out[out > t_max] = np.inf
    return out


def ray_crossings(origins: np.ndarray, direction: np.ndarray, accel: TriAccel) -> np.ndarray:
    tris = accel.tris
    n = len(origins)
    if len(tris) == 0:
        return np.zeros(n, dtype=np.int64)
    d = np.broadcast_to(direction, (n, 3))
    out = np.zeros(n, dtype=np.int64)
    cols = max(1, _PAIR_CHUNK // max(n, 1))
    for lo in range(0, len(tris), cols):
        t = _moller_trumbore(origins, d, tris[lo:lo + cols])
        out += np.isfinite(t).sum(axis=1)
    return out


def rasterize_ids(xy: np.ndarray, z: np.ndarray, face_values: np.ndarray,
                  width: int, height: int, perspective: bool):
    """Z-buffered id rasterization at pixel centers.

    xy: (F,3,2) screen coords (x right, y down), z: (F,3) positive camera depth,
    face_values: (F,) int32 written to covered pixels. Faces must be supplied in
    ascending original-index order; depth ties keep the earlier face.
    """
    ids = np.full((height, width), -1, dtype=np.int32)
    depth = np.full((height, width), np.inf)
    for f in range(xy.shape[0]):
        x0, y0 = xy[f, 0]
        x1, y1 = xy[f, 1]
        x2, y2 = xy[f, 2]
        area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area2 == 0.0:
            continue
        sgn = 1.0 if area2 > 0.0 else -1.0
        cx0 = max(0, int(np.ceil(min(x0, x1, x2) - 0.5)))
        cx1 = min(width - 1, int(np.floor(max(x0, x1, x2) - 0.5)))
        cy0 = max(0, int(np.ceil(min(y0, y1, y2) - 0.5)))
        cy1 = min(height - 1, int(np.floor(max(y0, y1, y2) - 0.5)))
        if cx0 > cx1 or cy0 > cy1:
            continue
        px = np.arange(cx0, cx1 + 1) + 0.5
        py = (np.arange(cy0, cy1 + 1) + 0.5)[:, None]
        w0 = ((x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)) * sgn
        w1 = ((x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)) * sgn
        w2 = ((x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)) * sgn
        inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        if not inside.any():
            continue
        inv_area = 1.0 / (area2 * sgn)
        l0 = w0 * inv_area
        l1 = w1 * inv_area
        l2 = w2 * inv_area
        if perspective:
            zp = 1.0 / (l0 / z[f, 0] + l1 / z[f, 1] + l2 / z[f, 2])
        else:
            zp = l0 * z[f, 0] + l1 * z[f, 1] + l2 * z[f, 2]
        win = depth[cy0:cy1 + 1, cx0:cx1 + 1]
        upd = inside & (zp < win)
        win[upd] = zp[upd]
        ids[cy0:cy1 + 1, cx0:cx1 + 1][upd] = face_values[f]
    return ids, depth
