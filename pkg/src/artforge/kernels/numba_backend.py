"""Numba kernel implementations.

Scalar twins of the numpy backend, traversing the shared flat-array BVH in
nopython mode. Arithmetic matches numpy_backend op-for-op: same expressions,
same branch priority, so cross-backend results agree bit-for-bit on the
boundary-free inputs this package feeds them.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .bvh import MAX_STACK, TriAccel

_TINY = 1e-300


@njit(cache=True)
def _pt_seg_sq(px, py, pz, ax, ay, az, bx, by, bz):
    abx = bx - ax
    aby = by - ay
    abz = bz - az
    denom = abx * abx + aby * aby + abz * abz
    if denom > _TINY:
        t = ((px - ax) * abx + (py - ay) * aby + (pz - az) * abz) / denom
    else:
        t = 0.0
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    qx = ax + t * abx
    qy = ay + t * aby
    qz = az + t * abz
    dx = px - qx
    dy = py - qy
    dz = pz - qz
    return dx * dx + dy * dy + dz * dz


@njit(cache=True)
def _pt_tri_sq(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    abx = bx - ax
    aby = by - ay
    abz = bz - az
    acx = cx - ax
    acy = cy - ay
    acz = cz - az
    apx = px - ax
    apy = py - ay
    apz = pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx = px - bx
    bpy = py - by
    bpz = pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        dx = px - (ax + v * abx)
        dy = py - (ay + v * aby)
        dz = pz - (az + v * abz)
        return dx * dx + dy * dy + dz * dz
    cpx = px - cx
    cpy = py - cy
    cpz = pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        dx = px - (ax + w * acx)
        dy = py - (ay + w * acy)
        dz = pz - (az + w * acz)
        return dx * dx + dy * dy + dz * dz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        dx = px - (bx + w * (cx - bx))
        dy = py - (by + w * (cy - by))
        dz = pz - (bz + w * (cz - bz))
        return dx * dx + dy * dy + dz * dz
    s = va + vb + vc
    if abs(s) <= _TINY:
        d = _pt_seg_sq(px, py, pz, ax, ay, az, bx, by, bz)
        d2_ = _pt_seg_sq(px, py, pz, bx, by, bz, cx, cy, cz)
        if d2_ < d:
            d = d2_
        d3_ = _pt_seg_sq(px, py, pz, cx, cy, cz, ax, ay, az)
        if d3_ < d:
            d = d3_
        return d
    inv_s = 1.0 / s
    dx = px - (ax + abx * (vb * inv_s) + acx * (vc * inv_s))
    dy = py - (ay + aby * (vb * inv_s) + acy * (vc * inv_s))
    dz = pz - (az + abz * (vb * inv_s) + acz * (vc * inv_s))
    return dx * dx + dy * dy + dz * dz


@njit(cache=True)
def _seg_seg_sq(p1x, p1y, p1z, q1x, q1y, q1z, p2x, p2y, p2z, q2x, q2y, q2z):
    d1x = q1x - p1x
    d1y = q1y - p1y
    d1z = q1z - p1z
    d2x = q2x - p2x
    d2y = q2y - p2y
    d2z = q2z - p2z
    rx = p1x - p2x
    ry = p1y - p2y
    rz = p1z - p2z
    a = d1x * d1x + d1y * d1y + d1z * d1z
    e = d2x * d2x + d2y * d2y + d2z * d2z
    f = d2x * rx + d2y * ry + d2z * rz
    c = d1x * rx + d1y * ry + d1z * rz
    if a <= _TINY and e <= _TINY:
        s = 0.0
        t = 0.0
    elif a <= _TINY:
        s = 0.0
        t = f / e
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    elif e <= _TINY:
        t = 0.0
        s = -c / a
        if s < 0.0:
            s = 0.0
        elif s > 1.0:
            s = 1.0
    else:
        b = d1x * d2x + d1y * d2y + d1z * d2z
        denom = a * e - b * b
        if denom > _TINY:
            s = (b * f - c * e) / denom
            if s < 0.0:
                s = 0.0
            elif s > 1.0:
                s = 1.0
        else:
            s = 0.0
        t = (b * s + f) / e
        if t < 0.0:
            t = 0.0
            s = -c / a
            if s < 0.0:
                s = 0.0
            elif s > 1.0:
                s = 1.0
        elif t > 1.0:
            t = 1.0
            s = (b - c) / a
            if s < 0.0:
                s = 0.0
            elif s > 1.0:
                s = 1.0
    dx = (p1x + s * d1x) - (p2x + t * d2x)
    dy = (p1y + s * d1y) - (p2y + t * d2y)
    dz = (p1z + s * d1z) - (p2z + t * d2z)
    return dx * dx + dy * dy + dz * dz


@njit(cache=True)
def _edges_cross_tri(E, T):
    ux = T[1, 0] - T[0, 0]
    uy = T[1, 1] - T[0, 1]
    uz = T[1, 2] - T[0, 2]
    vx = T[2, 0] - T[0, 0]
    vy = T[2, 1] - T[0, 1]
    vz = T[2, 2] - T[0, 2]
    nx = uy * vz - uz * vy
    ny = uz * vx - ux * vz
    nz = ux * vy - uy * vx
    if nx * nx + ny * ny + nz * nz <= _TINY:
        return False
    d00 = ux * ux + uy * uy + uz * uz
    d01 = ux * vx + uy * vy + uz * vz
    d11 = vx * vx + vy * vy + vz * vz
    den = d00 * d11 - d01 * d01
    if abs(den) <= _TINY:
        return False
    for k in range(3):
        i = k
        j = (k + 1) % 3
        dp = nx * (E[i, 0] - T[0, 0]) + ny * (E[i, 1] - T[0, 1]) + nz * (E[i, 2] - T[0, 2])
        dq = nx * (E[j, 0] - T[0, 0]) + ny * (E[j, 1] - T[0, 1]) + nz * (E[j, 2] - T[0, 2])
        if dp * dq < 0.0:
            r = dp / (dp - dq)
            xx = E[i, 0] + r * (E[j, 0] - E[i, 0])
            xy = E[i, 1] + r * (E[j, 1] - E[i, 1])
            xz = E[i, 2] + r * (E[j, 2] - E[i, 2])
            wx = xx - T[0, 0]
            wy = xy - T[0, 1]
            wz = xz - T[0, 2]
            d20 = wx * ux + wy * uy + wz * uz
            d21 = wx * vx + wy * vy + wz * vz
            bv = (d11 * d20 - d01 * d21) / den
            bw = (d00 * d21 - d01 * d20) / den
            if bv >= 0.0 and bw >= 0.0 and bv + bw <= 1.0:
                return True
    return False


@njit(cache=True)
def _tri_tri_sq(A, B):
    best = _pt_tri_sq(A[0, 0], A[0, 1], A[0, 2], B[0, 0], B[0, 1], B[0, 2],
                      B[1, 0], B[1, 1], B[1, 2], B[2, 0], B[2, 1], B[2, 2])
    for i in range(1, 3):
        d = _pt_tri_sq(A[i, 0], A[i, 1], A[i, 2], B[0, 0], B[0, 1], B[0, 2],
                       B[1, 0], B[1, 1], B[1, 2], B[2, 0], B[2, 1], B[2, 2])
        if d < best:
            best = d
    for i in range(3):
        d = _pt_tri_sq(B[i, 0], B[i, 1], B[i, 2], A[0, 0], A[0, 1], A[0, 2],
                       A[1, 0], A[1, 1], A[1, 2], A[2, 0], A[2, 1], A[2, 2])
        if d < best:
            best = d
    for i in range(3):
        j = (i + 1) % 3
        for k in range(3):
            m = (k + 1) % 3
            d = _seg_seg_sq(A[i, 0], A[i, 1], A[i, 2], A[j, 0], A[j, 1], A[j, 2],
                            B[k, 0], B[k, 1], B[k, 2], B[m, 0], B[m, 1], B[m, 2])
            if d < best:
                best = d
    if _edges_cross_tri(A, B) or _edges_cross_tri(B, A):
        return 0.0
    return best


@njit(cache=True)
def _box_node_sq(bmin, bmax, node_min, node_max, i):
    d = 0.0
    for k in range(3):
        if bmax[k] < node_min[i, k]:
            t = node_min[i, k] - bmax[k]
            d += t * t
        elif bmin[k] > node_max[i, k]:
            t = bmin[k] - node_max[i, k]
            d += t * t
    return d


@njit(cache=True)
def _min_dist_impl(tris_a, tris_b, node_min, node_max, node_left, node_right,
                   node_start, node_count, face_order, stop_below):
    best = np.inf
    stop_sq = stop_below * stop_below
    stack = np.empty(MAX_STACK, np.int32)
    bmin = np.empty(3)
    bmax = np.empty(3)
    A = np.empty((3, 3))
    for ia in range(tris_a.shape[0]):
        for r in range(3):
            for k in range(3):
                A[r, k] = tris_a[ia, r, k]
        for k in range(3):
            bmin[k] = min(A[0, k], min(A[1, k], A[2, k]))
            bmax[k] = max(A[0, k], max(A[1, k], A[2, k]))
        stack[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            i = stack[sp]
            if _box_node_sq(bmin, bmax, node_min, node_max, i) >= best:
                continue
            left = node_left[i]
            if left == -1:
                for kk in range(node_start[i], node_start[i] + node_count[i]):
                    d = _tri_tri_sq(A, tris_b[face_order[kk]])
                    if d < best:
                        best = d
            else:
                right = node_right[i]
                dl = _box_node_sq(bmin, bmax, node_min, node_max, left)
                dr = _box_node_sq(bmin, bmax, node_min, node_max, right)
                if dl <= dr:
                    if dr < best:
                        stack[sp] = right
                        sp += 1
                    if dl < best:
                        stack[sp] = left
                        sp += 1
                else:
                    if dl < best:
                        stack[sp] = left
                        sp += 1
                    if dr < best:
                        stack[sp] = right
                        sp += 1
        if best <= stop_sq:
            return np.sqrt(best)
    return np.sqrt(best)


@njit(cache=True)
def _pt_node_sq(p, node_min, node_max, i):
    d = 0.0
    for k in range(3):
        if p[k] < node_min[i, k]:
            t = node_min[i, k] - p[k]
            d += t * t
        elif p[k] > node_max[i, k]:
            t = p[k] - node_max[i, k]
            d += t * t
    return d


@njit(cache=True)
def _points_min_dist_impl(points, tris, node_min, node_max, node_left, node_right,
                          node_start, node_count, face_order):
    n = points.shape[0]
    out = np.empty(n)
    stack = np.empty(MAX_STACK, np.int32)
    for ip in range(n):
        p = points[ip]
        best = np.inf
        stack[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            i = stack[sp]
            if _pt_node_sq(p, node_min, node_max, i) >= best:
                continue
            left = node_left[i]
            if left == -1:
                for kk in range(node_start[i], node_start[i] + node_count[i]):
                    f = face_order[kk]
                    d = _pt_tri_sq(p[0], p[1], p[2],
                                   tris[f, 0, 0], tris[f, 0, 1], tris[f, 0, 2],
                                   tris[f, 1, 0], tris[f, 1, 1], tris[f, 1, 2],
                                   tris[f, 2, 0], tris[f, 2, 1], tris[f, 2, 2])
                    if d < best:
                        best = d
            else:
                right = node_right[i]
                dl = _pt_node_sq(p, node_min, node_max, left)
                dr = _pt_node_sq(p, node_min, node_max, right)
                if dl <= dr:
                    if dr < best:
                        stack[sp] = right
                        sp += 1
                    if dl < best:
                        stack[sp] = left
                        sp += 1
                else:
                    if dl < best:
                        stack[sp] = left
                        sp += 1
                    if dr < best:
                        stack[sp] = right
                        sp += 1
        out[ip] = np.sqrt(best)
    return out


@njit(cache=True)
def _ray_tri_t(ox, oy, oz, dx, dy, dz, tri):
    e1x = tri[1, 0] - tri[0, 0]
    e1y = tri[1, 1] - tri[0, 1]
    e1z = tri[1, 2] - tri[0, 2]
    e2x = tri[2, 0] - tri[0, 0]
    e2y = tri[2, 1] - tri[0, 1]
    e2z = tri[2, 2] - tri[0, 2]
    pvx = dy * e2z - dz * e2y
    pvy = dz * e2x - dx * e2z
    pvz = dx * e2y - dy * e2x
    det = e1x * pvx + e1y * pvy + e1z * pvz
    if abs(det) <= 1e-12:
        return np.inf
    inv = 1.0 / det
    tvx = ox - tri[0, 0]
    tvy = oy - tri[0, 1]
    tvz = oz - tri[0, 2]
    u = (tvx * pvx + tvy * pvy + tvz * pvz) * inv
    if u < 0.0 or u > 1.0:
        return np.inf
    qvx = tvy * e1z - tvz * e1y
    qvy = tvz * e1x - tvx * e1z
    qvz = tvx * e1y - tvy * e1x
    v = (dx * qvx + dy * qvy + dz * qvz) * inv
    if v < 0.0 or u + v > 1.0:
        return np.inf
    t = (e2x * qvx + e2y * qvy + e2z * qvz) * inv
    if t > 1e-12:
        return t
    return np.inf


@njit(cache=True)
def _ray_node_hits(o, d, node_min, node_max, i, t_hi):
    tmin = 1e-12
    tmax = t_hi
    for k in range(3):
        if abs(d[k]) < _TINY:
            if o[k] < node_min[i, k] or o[k] > node_max[i, k]:
                return False
        else:
            inv = 1.0 / d[k]
            t1 = (node_min[i, k] - o[k]) * inv
            t2 = (node_max[i, k] - o[k]) * inv
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tmin:
                tmin = t1
            if t2 < tmax:
                tmax = t2
            if tmin > tmax:
                return False
    return True


@njit(cache=True)
def _ray_first_hits_impl(origins, dirs, tris, node_min, node_max, node_left,
                         node_right, node_start, node_count, face_order, t_max):
    n = origins.shape[0]
    out = np.empty(n)
    stack = np.empty(MAX_STACK, np.int32)
    for ir in range(n):
        o = origins[ir]
        d = dirs[ir]
        best = np.inf
        stack[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            i = stack[sp]
            hi = best if best < t_max else t_max
            if not _ray_node_hits(o, d, node_min, node_max, i, hi):
                continue
            left = node_left[i]
            if left == -1:
                for kk in range(node_start[i], node_start[i] + node_count[i]):
                    t = _ray_tri_t(o[0], o[1], o[2], d[0], d[1], d[2],
                                   tris[face_order[kk]])
                    if t < best and t <= t_max:
                        best = t
            else:
                stack[sp] = node_right[i]
                sp += 1
                stack[sp] = left
                sp += 1
        out[ir] = best
    return out


@njit(cache=True)
def _ray_crossings_impl(origins, d, tris, node_min, node_max, node_left,
                        node_right, node_start, node_count, face_order):
    n = origins.shape[0]
    out = np.zeros(n, np.int64)
    stack = np.empty(MAX_STACK, np.int32)
    for ir in range(n):
        o = origins[ir]
        count = 0
        stack[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            i = stack[sp]
            if not _ray_node_hits(o, d, node_min, node_max, i, np.inf):
                continue
            left = node_left[i]
            if left == -1:
                for kk in range(node_start[i], node_start[i] + node_count[i]):
                    t = _ray_tri_t(o[0], o[1], o[2], d[0], d[1], d[2],
                                   tris[face_order[kk]])
                    if t < np.inf:
                        count += 1
            else:
                stack[sp] = node_right[i]
                sp += 1
                stack[sp] = left
                sp += 1
        out[ir] = count
    return out


@njit(cache=True)
def _rasterize_impl(xy, z, face_values, width, height, perspective):
    ids = np.full((height, width), -1, np.int32)
    depth = np.full((height, width), np.inf)
    for f in range(xy.shape[0]):
        x0 = xy[f, 0, 0]
        y0 = xy[f, 0, 1]
        x1 = xy[f, 1, 0]
        y1 = xy[f, 1, 1]
        x2 = xy[f, 2, 0]
        y2 = xy[f, 2, 1]
        area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area2 == 0.0:
            continue
        sgn = 1.0 if area2 > 0.0 else -1.0
        cx0 = int(math.ceil(min(x0, min(x1, x2)) - 0.5))
        cx1 = int(math.floor(max(x0, max(x1, x2)) - 0.5))
        cy0 = int(math.ceil(min(y0, min(y1, y2)) - 0.5))
        cy1 = int(math.floor(max(y0, max(y1, y2)) - 0.5))
        if cx0 < 0:
            cx0 = 0
        if cx1 > width - 1:
            cx1 = width - 1
        if cy0 < 0:
            cy0 = 0
        if cy1 > height - 1:
            cy1 = height - 1
        if cx0 > cx1 or cy0 > cy1:
            continue
        inv_area = 1.0 / (area2 * sgn)
        for yy in range(cy0, cy1 + 1):
            py = yy + 0.5
            for xx in range(cx0, cx1 + 1):
                px = xx + 0.5
                w0 = ((x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)) * sgn
                w1 = ((x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)) * sgn
                w2 = ((x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)) * sgn
                if w0 >= 0.0 and w1 >= 0.0 and w2 >= 0.0:
                    l0 = w0 * inv_area
                    l1 = w1 * inv_area
                    l2 = w2 * inv_area
                    if perspective:
                        zp = 1.0 / (l0 / z[f, 0] + l1 / z[f, 1] + l2 / z[f, 2])
                    else:
                        zp = l0 * z[f, 0] + l1 * z[f, 1] + l2 * z[f, 2]
                    if zp < depth[yy, xx]:
                        depth[yy, xx] = zp
                        ids[yy, xx] = face_values[f]
    return ids, depth


@njit(cache=True)
def _pt_tri_batch(p, a, b, c):
    n = p.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = _pt_tri_sq(p[i, 0], p[i, 1], p[i, 2], a[i, 0], a[i, 1], a[i, 2],
                            b[i, 0], b[i, 1], b[i, 2], c[i, 0], c[i, 1], c[i, 2])
    return out


@njit(cache=True)
def _seg_seg_batch(p1, q1, p2, q2):
    n = p1.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = _seg_seg_sq(p1[i, 0], p1[i, 1], p1[i, 2], q1[i, 0], q1[i, 1], q1[i, 2],
                             p2[i, 0], p2[i, 1], p2[i, 2], q2[i, 0], q2[i, 1], q2[i, 2])
    return out


@njit(cache=True)
def _tri_tri_batch(A, B):
    n = A.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = _tri_tri_sq(A[i], B[i])
    return out


def _lanes(*arrays):
    shape = np.broadcast_shapes(*(a.shape for a in arrays))
    return shape, [np.ascontiguousarray(np.broadcast_to(a, shape).reshape(-1, 3),
                                        dtype=np.float64) for a in arrays]


def point_tri_dist_sq(p, a, b, c):
    shape, (p, a, b, c) = _lanes(p, a, b, c)
    return _pt_tri_batch(p, a, b, c).reshape(shape[:-1])


def seg_seg_dist_sq(p1, q1, p2, q2):
    shape, (p1, q1, p2, q2) = _lanes(p1, q1, p2, q2)
    return _seg_seg_batch(p1, q1, p2, q2).reshape(shape[:-1])


def tri_tri_dist_sq(A, B):
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    return _tri_tri_batch(A, B)


def min_dist_between(tris_a: np.ndarray, accel_b: TriAccel, stop_below: float = 0.0) -> float:
    if len(tris_a) == 0 or accel_b.n_faces == 0:
        return np.inf
    tris_a = np.ascontiguousarray(tris_a, dtype=np.float64)
    return float(_min_dist_impl(tris_a, accel_b.tris, accel_b.node_min, accel_b.node_max,
                                accel_b.node_left, accel_b.node_right, accel_b.node_start,
                                accel_b.node_count, accel_b.face_order, float(stop_below)))


def points_min_dist(points: np.ndarray, accel: TriAccel) -> np.ndarray:
    if accel.n_faces == 0:
        return np.full(len(points), np.inf)
    points = np.ascontiguousarray(points, dtype=np.float64)
    return _points_min_dist_impl(points, accel.tris, accel.node_min, accel.node_max,
                                 accel.node_left, accel.node_right, accel.node_start,
                                 accel.node_count, accel.face_order)


def points_within(points: np.ndarray, accel: TriAccel, eps: float) -> np.ndarray:
    if accel.n_faces == 0:
        return np.zeros(len(points), dtype=bool)
    return points_min_dist(points, accel) <= eps


def ray_first_hits(origins: np.ndarray, dirs: np.ndarray, accel: TriAccel,
                   t_max: float = np.inf) -> np.ndarray:
    if accel.n_faces == 0:
        return np.full(len(origins), np.inf)
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    dirs = np.ascontiguousarray(np.broadcast_to(dirs, origins.shape), dtype=np.float64)
    return _ray_first_hits_impl(origins, dirs, accel.tris, accel.node_min, accel.node_max,
                                accel.node_left, accel.node_right, accel.node_start,
                                accel.node_count, accel.face_order, float(t_max))


def ray_crossings(origins: np.ndarray, direction: np.ndarray, accel: TriAccel) -> np.ndarray:
    if accel.n_faces == 0:
        return np.zeros(len(origins), dtype=np.int64)
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    direction = np.ascontiguousarray(direction, dtype=np.float64)
    return _ray_crossings_impl(origins, direction, accel.tris, accel.node_min,
                               accel.node_max, accel.node_left, accel.node_right,
                               accel.node_start, accel.node_count, accel.face_order)


def rasterize_ids(xy: np.ndarray, z: np.ndarray, face_values: np.ndarray,
                  width: int, height: int, perspective: bool):
    xy = np.ascontiguousarray(xy, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64)
    face_values = np.ascontiguousarray(face_values, dtype=np.int32)
    return _rasterize_impl(xy, z, face_values, int(width), int(height), bool(perspective))
