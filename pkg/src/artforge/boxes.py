"""Bounding-box descriptors: axis-aligned, PCA-oriented, gravity-aligned.

PCA runs on the exact area-weighted surface covariance (closed-form triangle
integrals) rather than a point sample: symmetric selections then produce
exactly equal eigenvalues, which is what the degeneracy fallback keys on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import TriMesh

AABB = "AABB"
POBB = "POBB"
GOBB = "GOBB"

_GAP_EPS = 1e-9
_WORLD = np.eye(3)


@dataclass(frozen=True)
class OrientedBox:
    center: np.ndarray    # (3,)
    axes: np.ndarray      # (3, 3) orthonormal rows, right-handed
    extents: np.ndarray   # (3,) side lengths along axes
    kind: str
    degenerate: bool = False   # PCA spread was ambiguous; world axes substituted

    @property
    def volume(self) -> float:
        return float(self.extents[0] * self.extents[1] * self.extents[2])

    def corners(self) -> np.ndarray:
        half = 0.5 * self.extents
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
                         dtype=np.float64)
        return self.center + (signs * half) @ self.axes

    def contains(self, points: np.ndarray, tol: float = 1e-6) -> bool:
        local = (np.atleast_2d(points) - self.center) @ self.axes.T
        return bool(np.all(np.abs(local) <= 0.5 * self.extents + tol))


def surface_moments(mesh: TriMesh, faces):
    """Total area, centroid, covariance of the selection's surface measure."""
    tris = mesh.triangles(np.asarray(list(faces), dtype=np.int64))
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    total = areas.sum()
    if total <= 0.0:
        ctr = tris.reshape(-1, 3).mean(axis=0)
        return 0.0, ctr, np.zeros((3, 3))
    w = areas / total
    centroids = (a + b + c) / 3.0
    mean = w @ centroids
    s = a + b + c
    # E[pp^T] over one triangle = (aa^T + bb^T + cc^T + ss^T) / 12
    second = np.einsum("f,fi,fj->ij", w, a, a)
    second += np.einsum("f,fi,fj->ij", w, b, b)
    second += np.einsum("f,fi,fj->ij", w, c, c)
    second += np.einsum("f,fi,fj->ij", w, s, s)
    second /= 12.0
    return float(total), mean, second - np.outer(mean, mean)


def _canon(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def _complete_from_major(a0: np.ndarray):
    e = _WORLD[int(np.argmin(np.abs(a0)))]
    a1 = e - np.dot(e, a0) * a0
    a1 /= np.linalg.norm(a1)
    return np.stack([a0, a1, np.cross(a0, a1)])


def _complete_from_minor(a2: np.ndarray):
    e = _WORLD[int(np.argmin(np.abs(a2)))]
    a0 = e - np.dot(e, a2) * a2
    a0 /= np.linalg.norm(a0)
    return np.stack([a0, np.cross(a2, a0), a2])


def _pca_axes(cov: np.ndarray):
    lam, vec = np.linalg.eigh(cov)          # ascending
    lam = lam[::-1]
    vec = vec[:, ::-1].T                    # rows, descending variance
    if lam[0] - lam[1] < _GAP_EPS and lam[1] - lam[2] < _GAP_EPS:
        return _WORLD.copy(), True
    if lam[1] - lam[2] < _GAP_EPS:
        return _complete_from_major(_canon(vec[0])), True
    if lam[0] - lam[1] < _GAP_EPS:
        return _complete_from_minor(_canon(vec[2])), True
    a0 = _canon(vec[0])
    a1 = _canon(vec[1])
    return np.stack([a0, a1, np.cross(a0, a1)]), False


def _fit(mesh: TriMesh, faces, axes: np.ndarray, kind: str, degenerate: bool) -> OrientedBox:
    idx = np.asarray(list(faces), dtype=np.int64)
    verts = mesh.vertices[np.unique(mesh.faces[idx])]
    local = verts @ axes.T
    lo = local.min(axis=0)
    hi = local.max(axis=0)
    center = (0.5 * (lo + hi)) @ axes
    return OrientedBox(center=center, axes=axes, extents=hi - lo,
                       kind=kind, degenerate=degenerate)


def _hull2d(pts: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, counter-clockwise, no collinear points."""
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    p = pts[order]
    keep = np.concatenate([[True], np.any(np.diff(p, axis=0) != 0, axis=1)])
    p = p[keep]
    if len(p) <= 2:
        return p

    def chain(points):
        out = []
        for q in points:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (q[1] - o[1]) - (a[1] - o[1]) * (q[0] - o[0]) > 0:
                    break
                out.pop()
            out.append(q)
        return out

    lower = chain(p)
    upper = chain(p[::-1])
    return np.asarray(lower[:-1] + upper[:-1])


def _min_rect_angle(pts2: np.ndarray):
    """Rotation (radians, in [0, pi/2)) of the minimal-area enclosing rectangle."""
    hull = _hull2d(pts2)
    if len(hull) < 3:
        d = hull[-1] - hull[0] if len(hull) == 2 else np.array([1.0, 0.0])
        angles = [np.arctan2(d[1], d[0]) % (np.pi / 2)]
    else:
        e = np.roll(hull, -1, axis=0) - hull
        angles = sorted(set(np.arctan2(e[:, 1], e[:, 0]) % (np.pi / 2)))
    best = (np.inf, 0.0)
    for t in angles:
        ct, st = np.cos(t), np.sin(t)
        x = pts2[:, 0] * ct + pts2[:, 1] * st
        y = -pts2[:, 0] * st + pts2[:, 1] * ct
        area = (x.max() - x.min()) * (y.max() - y.min())
        if area < best[0] - 1e-12:
            best = (area, t)
    return best


def _refine_axes(axes: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Shrink the box by rotating axis pairs to each projection's minimal rectangle."""
    axes = axes.copy()
    for _ in range(2):
        improved = False
        for k in range(3):
            u = axes[(k + 1) % 3].copy()
            v = axes[(k + 2) % 3].copy()
            pts2 = np.stack([verts @ u, verts @ v], axis=1)
            cur = ((pts2[:, 0].max() - pts2[:, 0].min())
                   * (pts2[:, 1].max() - pts2[:, 1].min()))
            area, t = _min_rect_angle(pts2)
            if area < cur - 1e-12:
                ct, st = np.cos(t), np.sin(t)
                axes[(k + 1) % 3] = ct * u + st * v
                axes[(k + 2) % 3] = -st * u + ct * v
                improved = True
        if not improved:
            break
    return np.stack([_canon(axes[0]), _canon(axes[1]),
                     np.cross(_canon(axes[0]), _canon(axes[1]))])


def bounding_box(mesh: TriMesh, faces, kind: str) -> OrientedBox:
    """Box of the requested kind enclosing every vertex of the selection."""
    if kind == AABB:
        return _fit(mesh, faces, _WORLD.copy(), AABB, False)
    _, _, cov = surface_moments(mesh, faces)
    if kind == POBB:
        # PCA initializes; a caliper refinement handles selections whose
        # covariance is too symmetric to orient (cube, sphere).
        axes, degen = _pca_axes(cov)
        idx = np.asarray(list(faces), dtype=np.int64)
        verts = mesh.vertices[np.unique(mesh.faces[idx])]
        cands = [_refine_axes(axes, verts), _refine_axes(_WORLD.copy(), verts)]
        fitted = [_fit(mesh, faces, a, POBB, degen) for a in cands]
        return fitted[0] if fitted[0].volume <= fitted[1].volume + 1e-12 else fitted[1]
    if kind == GOBB:
        cov2 = cov[np.ix_((0, 2), (0, 2))]
        lam, vec = np.linalg.eigh(cov2)
        if lam[1] - lam[0] < _GAP_EPS:
            h = np.array([1.0, 0.0, 0.0])
            degen = True
        else:
            v = vec[:, 1]  # major horizontal direction
            h3 = _canon(np.array([v[0], 0.0, v[1]]))
            h = h3 / np.linalg.norm(h3)
            degen = False
        up = np.array([0.0, 1.0, 0.0])
        axes = np.stack([h, up, np.cross(h, up)])
        return _fit(mesh, faces, axes, GOBB, degen)
    raise ValueError(f"unknown box kind {kind!r}")


def select_descriptor_box(mesh: TriMesh, faces, gobb_tolerance: float = 0.05) -> OrientedBox:
    """Smallest-volume box of the three kinds, with GOBB preferred on near-ties."""
    boxes = [bounding_box(mesh, faces, k) for k in (AABB, POBB, GOBB)]
    vmin = min(b.volume for b in boxes)
    gobb = boxes[2]
    if gobb.volume <= (1.0 + gobb_tolerance) * vmin:
        return gobb
    return min(boxes, key=lambda b: b.volume)
