"""View specs, id-raster file format, and segment-id rendering.

The renderer is a deterministic software rasterizer: pixel centers at
(x+0.5, y+0.5) from the top-left, nearer depth wins, depth ties keep the
lower face index. Label rasters produced by an external model are aligned
to these images pixel-for-pixel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from . import kernels
from .errors import MalformedFile
from .mesh import OverSegmentation, TriMesh

ORTHOGRAPHIC = "orthographic"
PERSPECTIVE = "perspective"


@dataclass(frozen=True)
class ViewSpec:
    view_id: str
    position: tuple
    look_at: tuple
    up: tuple
    projection: str = PERSPECTIVE
    fov_deg: float = 45.0          # vertical, perspective only
    half_extent: float = 1.0       # half height in world units, orthographic only
    width: int = 512
    height: int = 512


@dataclass(frozen=True)
class IdRaster:
    width: int
    height: int
    data: np.ndarray  # (height, width) int32, -1 = background

    def __post_init__(self):
        object.__setattr__(self, "data", np.ascontiguousarray(self.data, dtype=np.int32))


def write_id_raster(raster: IdRaster) -> bytes:
    header = f"IRAST {raster.width} {raster.height}\n".encode("ascii")
    return header + raster.data.astype("<i4").tobytes()


def read_id_raster(blob: bytes) -> IdRaster:
    nl = blob.find(b"\n")
    if nl < 0:
        raise MalformedFile("id raster: missing header line")
    parts = blob[:nl].split()
    if len(parts) != 3 or parts[0] != b"IRAST":
        raise MalformedFile("id raster: bad header")
    try:
        w, h = int(parts[1]), int(parts[2])
    except ValueError as exc:
        raise MalformedFile("id raster: bad dimensions") from exc
    if w <= 0 or h <= 0:
        raise MalformedFile("id raster: non-positive dimensions")
    body = blob[nl + 1:]
    if len(body) != w * h * 4:
        raise MalformedFile(f"id raster: expected {w * h * 4} payload bytes, got {len(body)}")
    data = np.frombuffer(body, dtype="<i4").reshape(h, w).astype(np.int32)
    if data.min(initial=0) < -1:
        raise MalformedFile("id raster: value below -1")
    return IdRaster(w, h, data)


def dump_views(views) -> str:
    return json.dumps([asdict(v) for v in views], indent=2, sort_keys=True)


def load_views(text: str):
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"view specs: {exc}") from exc
    if not isinstance(records, list):
        raise MalformedFile("view specs: expected a JSON array")
    out = []
    for rec in records:
        try:
            out.append(ViewSpec(
                view_id=str(rec["view_id"]),
                position=tuple(float(x) for x in rec["position"]),
                look_at=tuple(float(x) for x in rec["look_at"]),
                up=tuple(float(x) for x in rec["up"]),
                projection=rec.get("projection", PERSPECTIVE),
                fov_deg=float(rec.get("fov_deg", 45.0)),
                half_extent=float(rec.get("half_extent", 1.0)),
                width=int(rec.get("width", 512)),
                height=int(rec.get("height", 512)),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFile(f"view specs: bad record: {exc}") from exc
    return out


def camera_basis(view: ViewSpec):
    pos = np.asarray(view.position, dtype=np.float64)
    fwd = np.asarray(view.look_at, dtype=np.float64) - pos
    n = np.linalg.norm(fwd)
    if n == 0.0:
        raise MalformedFile(f"view {view.view_id}: camera direction degenerate")
    fwd = fwd / n
    right = np.cross(fwd, np.asarray(view.up, dtype=np.float64))
    rn = np.linalg.norm(right)
    if rn == 0.0:
        raise MalformedFile(f"view {view.view_id}: up parallel to view direction")
    right = right / rn
    true_up = np.cross(right, fwd)
    return pos, right, true_up, fwd


def render_segment_ids(mesh: TriMesh, overseg: OverSegmentation, view: ViewSpec) -> IdRaster:
    """Project every face and z-buffer its segment id per covered pixel."""
    w, h = view.width, view.height
    if mesh.face_count == 0:
        return IdRaster(w, h, np.full((h, w), -1, np.int32))

    pos, right, true_up, fwd = camera_basis(view)
    cam = mesh.vertices - pos
    x = cam @ right
    y = cam @ true_up
    z = cam @ fwd

    aspect = w / h
    if view.projection == ORTHOGRAPHIC:
        hy = view.half_extent
        hx = hy * aspect
        u = 0.5 + x / (2.0 * hx)
        v = 0.5 - y / (2.0 * hy)
        keep = np.ones(mesh.face_count, dtype=bool)
        perspective = False
    elif view.projection == PERSPECTIVE:
        t = np.tan(np.radians(view.fov_deg) * 0.5)
        zs = np.where(z > 1e-9, z, 1.0)
        u = 0.5 + x / (zs * t * aspect * 2.0)
        v = 0.5 - y / (zs * t * 2.0)
        # a face with any vertex at/behind the eye cannot be projected linearly
        keep = np.all(z[mesh.faces] > 1e-9, axis=1)
        perspective = True
    else:
        raise MalformedFile(f"view {view.view_id}: unknown projection {view.projection!r}")

    xy = np.stack([u * w, v * h], axis=-1)[mesh.faces]
    zf = z[mesh.faces]
    face_ids = np.flatnonzero(keep)
    values = overseg.segment_of_face[face_ids].astype(np.int32)
    ids, _ = kernels.rasterize_ids(xy[face_ids], zf[face_ids], values, w, h, perspective)
    return IdRaster(w, h, ids)


def turntable_views(mesh: TriMesh, count_azimuth: int = 8,
                    elevations_deg=(30.0, -10.0), width: int = 512,
                    height: int = 512, fov_deg: float = 45.0):
    """Default capture rig: azimuth ring(s) around +Y aimed at the origin."""
    ext = mesh.extent()
    diag = float(np.linalg.norm(ext))
    radius = max(1.5 * diag, 1e-3)
    views = []
    for ei, el in enumerate(elevations_deg):
        for ai in range(count_azimuth):
            az = 2.0 * np.pi * ai / count_azimuth
            el_r = np.radians(el)
            p = (radius * np.cos(el_r) * np.cos(az),
                 radius * np.sin(el_r),
                 radius * np.cos(el_r) * np.sin(az))
            views.append(ViewSpec(
                view_id=f"v{ei * count_azimuth + ai:02d}",
                position=p, look_at=(0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0),
                projection=PERSPECTIVE, fov_deg=fov_deg, width=width, height=height))
    return views
