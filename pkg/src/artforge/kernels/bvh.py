"""Flat-array bounding volume hierarchy shared by both kernel backends.

The tree is stored as parallel arrays so the numba backend can traverse it
in nopython mode. Construction is deterministic: median split on the longest
axis of the centroid bounds with a stable sort.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF_SIZE = 4
MAX_STACK = 128  # median splits keep depth ~log2(F); 128 is far beyond any input here


@dataclass(frozen=True)
class TriAccel:
    """Triangle set plus its BVH, ready for kernel traversal."""

    tris: np.ndarray        # (F, 3, 3) float64, C-contiguous
    node_min: np.ndarray    # (N, 3) float64
    node_max: np.ndarray    # (N, 3) float64
    node_left: np.ndarray   # (N,) int32, -1 for leaves
    node_right: np.ndarray  # (N,) int32
    node_start: np.ndarray  # (N,) int32, leaf range into face_order
    node_count: np.ndarray  # (N,) int32
    face_order: np.ndarray  # (F,) int32

    @property
    def n_faces(self) -> int:
        return self.tris.shape[0]


def build_accel(tris: np.ndarray) -> TriAccel:
    tris = np.ascontiguousarray(tris, dtype=np.float64)
    n = tris.shape[0]
    if n == 0:
        z3 = np.zeros((1, 3))
        return TriAccel(tris, z3, z3, np.full(1, -1, np.int32), np.full(1, -1, np.int32),
                        np.zeros(1, np.int32), np.zeros(1, np.int32), np.zeros(0, np.int32))

    tmin = tris.min(axis=1)
    tmax = tris.max(axis=1)
    cent = (tmin + tmax) * 0.5

    cap = 2 * n + 1
    node_min = np.empty((cap, 3))
    node_max = np.empty((cap, 3))
    node_left = np.full(cap, -1, np.int32)
    node_right = np.full(cap, -1, np.int32)
    node_start = np.zeros(cap, np.int32)
    node_count = np.zeros(cap, np.int32)
    order = np.arange(n, dtype=np.int32)

    n_nodes = 1
    stack = [(0, 0, n)]  # (node index, start, end) over `order`
    while stack:
        node, lo, hi = stack.pop()
        idx = order[lo:hi]
        node_min[node] = tmin[idx].min(axis=0)
        node_max[node] = tmax[idx].max(axis=0)

        count = hi - lo
        c = cent[idx]
        spread = c.max(axis=0) - c.min(axis=0)
        if count <= LEAF_SIZE or spread.max() <= 0.0:
            node_start[node] = lo
            node_count[node] = count
            continue

        axis = int(np.argmax(spread))
        local = np.argsort(c[:, axis], kind="stable")
        order[lo:hi] = idx[local]
        mid = lo + count // 2

        left, right = n_nodes, n_nodes + 1
        n_nodes += 2
        node_left[node] = left
        node_right[node] = right
        stack.append((left, lo, mid))
        stack.append((right, mid, hi))

    return TriAccel(
        tris,
        np.ascontiguousarray(node_min[:n_nodes]),
        np.ascontiguousarray(node_max[:n_nodes]),
        node_left[:n_nodes].copy(),
        node_right[:n_nodes].copy(),
        node_start[:n_nodes].copy(),
        node_count[:n_nodes].copy(),
        order,
    )
