"""URDF emission: one link per part, multi-DoF joints decomposed.

URDF has no cylindrical or universal joints, so those become chains through a
massless intermediate link (revolute+prismatic sharing the axis, or two
revolute joints on the orthogonal axis pair).  Limits are radians/meters end
to end; no unit conversion happens here.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from typing import Dict, Optional, Tuple

import numpy as np

from .annotation import AnnotationDocument, JointRecord, PartRecord
from .errors import MissingPhysical, UntypedJoint
from .meshio import write_obj
from .templates import (CONTINUOUS, CYLINDRICAL, FIXED, MOTION_TYPES, PRISMATIC,
                        REVOLUTE, UNIVERSAL)

_DEFAULT_EFFORT = 100.0
_DEFAULT_VELOCITY = 1.0


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]+", "_", text).strip("_") or "part"


def _link_name(p: PartRecord) -> str:
    return f"{_slug(p.label)}_{p.part_id}"


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _fmt3(v) -> str:
    return " ".join(_fmt(float(x)) for x in v)


def _inertia_for(mass: float, extents) -> Dict[str, str]:
    # solid-box diagonal approximation about the part frame
    a, b, c = (float(x) for x in extents)
    return {"ixx": _fmt(mass * (b * b + c * c) / 12.0),
            "iyy": _fmt(mass * (a * a + c * c) / 12.0),
            "izz": _fmt(mass * (a * a + b * b) / 12.0),
            "ixy": "0", "ixz": "0", "iyz": "0"}


def _add_link(robot, name: str, mass: float, extents, mesh_file: Optional[str],
              mesh_offset) -> None:
    link = ET.SubElement(robot, "link", name=name)
    inertial = ET.SubElement(link, "inertial")
    ET.SubElement(inertial, "origin", xyz="0 0 0", rpy="0 0 0")
    ET.SubElement(inertial, "mass", value=_fmt(mass))
    ET.SubElement(inertial, "inertia", **_inertia_for(mass, extents))
    if mesh_file is not None:
        for tag in ("visual", "collision"):
            sec = ET.SubElement(link, tag)
            ET.SubElement(sec, "origin", xyz=_fmt3(mesh_offset), rpy="0 0 0")
            geom = ET.SubElement(sec, "geometry")
            ET.SubElement(geom, "mesh", filename=mesh_file)


def _add_massless_link(robot, name: str) -> None:
    robot.append(ET.Comment(
        "massless intermediate link: URDF lacks this multi-DoF joint type"))
    link = ET.SubElement(robot, "link", name=name)
    inertial = ET.SubElement(link, "inertial")
    ET.SubElement(inertial, "origin", xyz="0 0 0", rpy="0 0 0")
    ET.SubElement(inertial, "mass", value="0")
    ET.SubElement(inertial, "inertia", ixx="0", iyy="0", izz="0",
                  ixy="0", ixz="0", iyz="0")


def _add_joint(robot, name: str, jtype: str, parent: str, child: str,
               origin_xyz, axis=None, limits: Optional[Tuple[float, float]] = None) -> None:
    j = ET.SubElement(robot, "joint", name=name, type=jtype)
    ET.SubElement(j, "origin", xyz=_fmt3(origin_xyz), rpy="0 0 0")
    ET.SubElement(j, "parent", link=parent)
    ET.SubElement(j, "child", link=child)
    if axis is not None:
        ET.SubElement(j, "axis", xyz=_fmt3(axis))
    if jtype in ("revolute", "prismatic"):
        lo, hi = limits if limits is not None else (0.0, 0.0)
        ET.SubElement(j, "limit", lower=_fmt(lo), upper=_fmt(hi),
                      effort=_fmt(_DEFAULT_EFFORT), velocity=_fmt(_DEFAULT_VELOCITY))


def export_urdf(doc: AnnotationDocument, parts, mesh=None,
                mesh_dir: str = "meshes") -> Tuple[bytes, Dict[str, bytes]]:
    """Emit URDF bytes plus relative per-link OBJ files (when a mesh is given).

    Every link frame is axis-aligned with the object frame and anchored at its
    joint origin (root at the world origin), so joint <origin> tags are simple
    frame-to-frame offsets and mesh vertices are rebased per link.
    """
    by_id = {p.part_id: p for p in doc.parts}
    for p in doc.parts:
        if p.joint is not None and p.joint.motion not in MOTION_TYPES:
            raise UntypedJoint(f"part {p.part_id}: motion {p.joint.motion!r}")
        if p.mass is None or p.volume is None or p.density is None:
            raise MissingPhysical(f"part {p.part_id} lacks physical attributes")

    frame_origin: Dict[int, np.ndarray] = {doc.root_id: np.zeros(3)}
    order = [doc.root_id]
    graph = doc.to_graph()
    for pid in order:
        for c in graph.children_of(pid):
            j = by_id[c].joint
            frame_origin[c] = (np.asarray(j.origin, float) if j.origin is not None
                               else frame_origin[pid])
            order.append(c)

    robot = ET.Element("robot", name=_slug(doc.info.uuid))
    meshes: Dict[str, bytes] = {}
    for pid in order:
        p = by_id[pid]
        mesh_file = None
        offset = -frame_origin[pid]
        if mesh is not None and parts is not None:
            part = parts[pid]
            sub_faces = mesh.faces[np.asarray(part.faces, dtype=np.int64)]
            used, local = np.unique(sub_faces, return_inverse=True)
            verts = mesh.vertices[used] - frame_origin[pid]
            mesh_file = f"{mesh_dir}/{_link_name(p)}.obj"
            meshes[mesh_file] = write_obj(verts, local.reshape(-1, 3)).encode()
            offset = np.zeros(3)
        extents = parts[pid].box.extents if parts is not None else np.ones(3)
        _add_link(robot, _link_name(p), p.mass, extents, mesh_file, offset)

    for pid in order:
        p = by_id[pid]
        if p.joint is None:
            continue
        j = p.joint
        parent_name = _link_name(by_id[j.parent])
        child_name = _link_name(p)
        jname = f"{parent_name}__{child_name}"
        origin = frame_origin[pid] - frame_origin[j.parent]
        limits = j.limits or {}

        if j.motion in (REVOLUTE, CONTINUOUS, PRISMATIC, FIXED):
            _add_joint(robot, jname, j.motion, parent_name, child_name, origin,
                       axis=j.axis if j.motion != FIXED else None,
                       limits=limits.get("rotation") if j.motion == REVOLUTE
                       else limits.get("translation"))
        elif j.motion == CYLINDRICAL:
            mid = f"{child_name}_spin"
            _add_massless_link(robot, mid)
            rot = limits.get("rotation")
            _add_joint(robot, f"{jname}_rot", CONTINUOUS if rot is None else REVOLUTE,
                       parent_name, mid, origin, axis=j.axis, limits=rot)
            _add_joint(robot, f"{jname}_slide", PRISMATIC, mid, child_name,
                       np.zeros(3), axis=j.axis, limits=limits.get("translation"))
        elif j.motion == UNIVERSAL:
            mid = f"{child_name}_cross"
            _add_massless_link(robot, mid)
            _add_joint(robot, f"{jname}_rot1", REVOLUTE, parent_name, mid, origin,
                       axis=j.axis, limits=limits.get("rotation"))
            _add_joint(robot, f"{jname}_rot2", REVOLUTE, mid, child_name, np.zeros(3),
                       axis=j.axis2, limits=limits.get("rotation2"))

    ET.indent(robot)
    body = ET.tostring(robot, encoding="unicode")
    return (f'<?xml version="1.0"?>\n{body}\n').encode(), meshes
