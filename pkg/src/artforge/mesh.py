"""Triangle mesh core: representation, vertex welding, oversegmentation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree


class UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]  # path halving
            x = p[x]
        return int(x)

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if rb < ra:  # smaller root wins: keeps ids stable
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh, +Y up, bounds centered at the origin after load."""

    vertices: np.ndarray              # (V, 3) float64
    faces: np.ndarray                 # (F, 3) int32
    unit_scale: float = 1.0           # meters per model unit
    up_axis: str = "+Y"
    face_material: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "vertices",
                           np.ascontiguousarray(self.vertices, dtype=np.float64))
        object.__setattr__(self, "faces",
                           np.ascontiguousarray(self.faces, dtype=np.int32))
        mat = self.face_material
        if mat is None:
            mat = np.zeros(self.faces.shape[0], dtype=np.int32)
        object.__setattr__(self, "face_material",
                           np.ascontiguousarray(mat, dtype=np.int32))

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def face_count(self) -> int:
        return self.faces.shape[0]

    def triangles(self, faces=None) -> np.ndarray:
        """Corner positions (N, 3, 3) for the given face indices (all by default)."""
        idx = self.faces if faces is None else self.faces[np.asarray(faces, dtype=np.int64)]
        return self.vertices[idx]

    def extent(self) -> np.ndarray:
        if self.vertex_count == 0:
            return np.zeros(3)
        return self.vertices.max(axis=0) - self.vertices.min(axis=0)

    def with_unit_scale(self, unit_scale: float) -> "TriMesh":
        return TriMesh(self.vertices, self.faces, float(unit_scale),
                       self.up_axis, self.face_material)


@dataclass(frozen=True)
class OverSegmentation:
    """Partition of faces into edge-connected segments."""

    segment_of_face: np.ndarray   # (F,) int32
    segments: tuple               # tuple of ascending int64 face-index arrays

    @property
    def segment_count(self) -> int:
        return len(self.segments)


def weld_map(vertices: np.ndarray, tolerance: float) -> np.ndarray:
    """Map each vertex to a representative id, identifying vertices within tolerance."""
    n = len(vertices)
    if tolerance <= 0.0 or n == 0:
        return np.arange(n, dtype=np.int64)
    pairs = cKDTree(vertices).query_pairs(tolerance, output_type="ndarray")
    uf = UnionFind(n)
    for a, b in pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]:
        uf.union(int(a), int(b))
    return np.array([uf.find(i) for i in range(n)], dtype=np.int64)


def oversegment(mesh: TriMesh, weld_tolerance: float = 1e-6) -> OverSegmentation:
    """Connected components of the face graph; faces touch iff they share a welded edge.

    Segment ids are ordered by the smallest face index each contains.
    """
    nf = mesh.face_count
    if nf == 0:
        return OverSegmentation(np.zeros(0, np.int32), ())

    vmap = weld_map(mesh.vertices, weld_tolerance)
    fw = vmap[mesh.faces]
    edges = np.concatenate([fw[:, (0, 1)], fw[:, (1, 2)], fw[:, (2, 0)]], axis=0)
    edges.sort(axis=1)
    owner = np.tile(np.arange(nf, dtype=np.int64), 3)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges = edges[order]
    owner = owner[order]

    uf = UnionFind(nf)
    same = np.concatenate([[False], np.all(edges[1:] == edges[:-1], axis=1)])
    run_first = 0
    for i in range(len(edges)):
        if not same[i]:
            run_first = i
        else:
            uf.union(int(owner[run_first]), int(owner[i]))

    roots = np.array([uf.find(i) for i in range(nf)], dtype=np.int64)
    seg_of_root = {}
    segment_of_face = np.empty(nf, dtype=np.int32)
    for f in range(nf):
        r = roots[f]
        if r not in seg_of_root:
            seg_of_root[r] = len(seg_of_root)
        segment_of_face[f] = seg_of_root[r]
    segments = tuple(np.flatnonzero(segment_of_face == s)
                     for s in range(len(seg_of_root)))
    return OverSegmentation(segment_of_face, segments)
