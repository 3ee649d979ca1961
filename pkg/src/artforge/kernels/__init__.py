"""Geometry kernels with a switchable execution backend.

Two implementations of the same operation set: a numba one (scalar loops over
the flat-array BVH, jit-compiled) and a pure-numpy fallback. The backend is
picked at import from the FORGE_BACKEND env var ("numba" or "numpy"); when
unset, numba is used if it imports. set_backend() switches at runtime, which
the benchmark and the cross-backend tests rely on.
"""

from __future__ import annotations

import os

from ..errors import ConfigInvalid
from . import numpy_backend
from .bvh import TriAccel, build_accel

_BACKENDS = {"numpy": numpy_backend}
try:
    from . import numba_backend
    _BACKENDS["numba"] = numba_backend
except ImportError:  # numba not installed: numpy fallback only
    pass


def _initial() -> str:
    env = os.environ.get("FORGE_BACKEND", "").strip().lower()
    if env:
        if env not in _BACKENDS:
            raise ConfigInvalid(f"FORGE_BACKEND={env!r}: expected one of {sorted(_BACKENDS)}")
        return env
    return "numba" if "numba" in _BACKENDS else "numpy"


_active_name = _initial()


def available_backends() -> list:
    return sorted(_BACKENDS)


def active_backend() -> str:
    return _active_name


def set_backend(name: str) -> None:
    global _active_name
    if name not in _BACKENDS:
        raise ConfigInvalid(f"unknown kernel backend {name!r}: expected one of {sorted(_BACKENDS)}")
    _active_name = name


def _b():
    return _BACKENDS[_active_name]


def point_tri_dist_sq(p, a, b, c):
    """Squared point-triangle distance, broadcasting over leading dims."""
    return _b().point_tri_dist_sq(p, a, b, c)


def seg_seg_dist_sq(p1, q1, p2, q2):
    """Squared segment-segment distance, broadcasting over leading dims."""
    return _b().seg_seg_dist_sq(p1, q1, p2, q2)


def tri_tri_dist_sq(A, B):
    """Squared triangle-triangle distance for paired (P,3,3) arrays."""
    return _b().tri_tri_dist_sq(A, B)


def min_dist_between(tris_a, accel_b: TriAccel, stop_below: float = 0.0) -> float:
    """Minimum surface distance from a triangle soup to an accelerated one.

    Returns early (with a value <= stop_below) once the bound is reached,
    which is what the contact queries use: stop_below=0 stops at first touch.
    """
    return _b().min_dist_between(tris_a, accel_b, stop_below)


def points_min_dist(points, accel: TriAccel):
    """Distance from each point to the triangle set."""
    return _b().points_min_dist(points, accel)


def points_within(points, accel: TriAccel, eps: float):
    """Boolean mask: point lies within eps of the triangle set."""
    return _b().points_within(points, accel, eps)


def ray_first_hits(origins, dirs, accel: TriAccel, t_max: float = float("inf")):
    """Parameter t of the first hit (> 1e-12) per ray; inf on miss."""
    return _b().ray_first_hits(origins, dirs, accel, t_max)


def ray_crossings(origins, direction, accel: TriAccel):
    """Number of surface crossings along a shared direction per origin."""
    return _b().ray_crossings(origins, direction, accel)


def rasterize_ids(xy, z, face_values, width: int, height: int, perspective: bool = True):
    """Z-buffered rasterization of per-face int ids at pixel centers."""
    return _b().rasterize_ids(xy, z, face_values, width, height, perspective)
