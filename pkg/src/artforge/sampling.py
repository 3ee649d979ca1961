"""Area-weighted surface point sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroAreaSelection
from .mesh import TriMesh


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray        # (N, 3)
    source_face: np.ndarray   # (N,) int64 face index per point
    seed: int


def face_areas(mesh: TriMesh, faces) -> np.ndarray:
    tris = mesh.triangles(faces)
    cr = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    return 0.5 * np.linalg.norm(cr, axis=1)


def sample_surface(mesh: TriMesh, faces, count: int, seed: int) -> PointSet:
    """Draw `count` points over the selection, per-face counts multinomial in area."""
    faces_idx = np.unique(np.asarray(list(faces) if isinstance(faces, (set, frozenset)) else faces,
                                     dtype=np.int64))
    areas = face_areas(mesh, faces_idx)
    total = areas.sum()
    if total <= 0.0:
        raise ZeroAreaSelection(f"selection of {len(faces_idx)} faces has zero area")

    rng = np.random.default_rng(seed)
    per_face = rng.multinomial(count, areas / total)
    source = np.repeat(faces_idx, per_face)
    tris = mesh.triangles(source)
    u = rng.random(count)
    v = rng.random(count)
    flip = u + v > 1.0
    u = np.where(flip, 1.0 - u, u)
    v = np.where(flip, 1.0 - v, v)
    pts = (tris[:, 0]
           + u[:, None] * (tris[:, 1] - tris[:, 0])
           + v[:, None] * (tris[:, 2] - tris[:, 0]))
    return PointSet(points=pts, source_face=source, seed=int(seed))
