"""Distance queries between face selections."""

from __future__ import annotations

import numpy as np

from . import kernels
from .kernels import TriAccel, build_accel
from .mesh import TriMesh


def selection_accel(mesh: TriMesh, faces) -> TriAccel:
    return build_accel(mesh.triangles(np.sort(np.asarray(list(faces), dtype=np.int64))))


def min_segment_distance(mesh: TriMesh, a, b, accel_b: TriAccel = None) -> float:
    """Exact minimum triangle-triangle distance between two face selections.

    Without a prebuilt accel the selections are put in a canonical order first
    so the result is symmetric in (a, b) bit-for-bit.
    """
    a_idx = np.sort(np.asarray(list(a), dtype=np.int64))
    if accel_b is not None:
        return kernels.min_dist_between(mesh.triangles(a_idx), accel_b)
    b_idx = np.sort(np.asarray(list(b), dtype=np.int64))
    ka = (len(a_idx), int(a_idx[0]) if len(a_idx) else -1)
    kb = (len(b_idx), int(b_idx[0]) if len(b_idx) else -1)
    if kb < ka:
        a_idx, b_idx = b_idx, a_idx
    return kernels.min_dist_between(mesh.triangles(a_idx),
                                    build_accel(mesh.triangles(b_idx)))
