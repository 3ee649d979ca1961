"""Two-level annotation document: object metadata + per-part records.

The serialized form is canonical — sorted keys, no whitespace, floats at 9
significant digits — so re-exports diff cleanly and byte-compare in tests.
Floats are rounded once at construction, which is what makes
``parse(export(x)) == x`` an identity rather than an approximation.
"""

from __future__ import annotations

import json
from collections import namedtuple
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .articulation import FIXED, JointProposal, KinematicGraph, validate_graph
from .errors import MalformedFile, UnvalidatedGraph
from .templates import MOTION_TYPES, CategoryTemplate

PROV_AUTO = "auto"
PROV_HUMAN = "human-corrected"


def _r9(x) -> float:
    """Canonical 9-significant-digit rounding (idempotent)."""
    return float(f"{float(x):.9g}")


def _vec(v) -> Optional[Tuple[float, float, float]]:
    if v is None:
        return None
    a = np.asarray(v, dtype=float).reshape(3)
    return (_r9(a[0]), _r9(a[1]), _r9(a[2]))


@dataclass(frozen=True)
class ObjectInfo:
    uuid: str
    source_dataset: str
    source_model: str
    category: Tuple[str, str, str]          # super / main / sub
    unit_scale: float
    up_axis: str
    front_axis: str
    bounds: Tuple[Tuple[float, float, float], Tuple[float, float, float]]

    def __post_init__(self):
        object.__setattr__(self, "category", tuple(self.category))
        object.__setattr__(self, "unit_scale", _r9(self.unit_scale))
        lo, hi = self.bounds
        object.__setattr__(self, "bounds", (_vec(lo), _vec(hi)))


@dataclass(frozen=True)
class JointRecord:
    """Plain-Python mirror of a JointProposal, safe to compare and serialize."""
    parent: int
    motion: str
    origin: Optional[Tuple[float, float, float]] = None
    axis: Optional[Tuple[float, float, float]] = None
    axis2: Optional[Tuple[float, float, float]] = None
    limits: Optional[Dict[str, Tuple[float, float]]] = None
    provenance: str = ""
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "origin", _vec(self.origin))
        object.__setattr__(self, "axis", _vec(self.axis))
        object.__setattr__(self, "axis2", _vec(self.axis2))
        if self.limits is not None:
            object.__setattr__(self, "limits", {
                k: (_r9(v[0]), _r9(v[1])) for k, v in sorted(self.limits.items())})
        object.__setattr__(self, "flags", tuple(self.flags))

    @classmethod
    def from_proposal(cls, jp: JointProposal) -> "JointRecord":
        return cls(parent=jp.parent, motion=jp.motion, origin=jp.origin,
                   axis=jp.axis, axis2=jp.axis2, limits=jp.limits,
                   provenance=jp.provenance, flags=jp.flags)

    def to_proposal(self, child: int) -> JointProposal:
        return JointProposal(
            child=child, parent=self.parent, motion=self.motion,
            origin=None if self.origin is None else np.asarray(self.origin),
            axis=None if self.axis is None else np.asarray(self.axis),
            axis2=None if self.axis2 is None else np.asarray(self.axis2),
            limits=None if self.limits is None else dict(self.limits),
            provenance=self.provenance, flags=self.flags)


@dataclass(frozen=True)
class PartRecord:
    part_id: int
    label: str
    segment_ids: Tuple[int, ...]
    joint: Optional[JointRecord]             # None marks the root
    material: Optional[str] = None
    density: Optional[float] = None
    volume: Optional[float] = None
    mass: Optional[float] = None
    affordance: Tuple[str, ...] = ()
    flags: Tuple[str, ...] = (PROV_AUTO,)

    def __post_init__(self):
        object.__setattr__(self, "segment_ids", tuple(int(s) for s in self.segment_ids))
        for name in ("density", "volume", "mass"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _r9(v))
        object.__setattr__(self, "affordance", tuple(self.affordance))
        object.__setattr__(self, "flags", tuple(self.flags))


@dataclass(frozen=True)
class AnnotationDocument:
    info: ObjectInfo
    parts: Tuple[PartRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        ids = [p.part_id for p in self.parts]
        if len(set(ids)) != len(ids):
            raise MalformedFile(f"duplicate part ids: {sorted(ids)}")
        roots = [p.part_id for p in self.parts if p.joint is None]
        if len(roots) != 1:
            raise MalformedFile(f"need exactly one root part, found {roots}")
        known = set(ids)
        for p in self.parts:
            if p.joint is not None and p.joint.parent not in known:
                raise MalformedFile(f"part {p.part_id}: parent {p.joint.parent} "
                                    "does not exist")

    @property
    def root_id(self) -> int:
        return next(p.part_id for p in self.parts if p.joint is None)

    def part(self, part_id: int) -> PartRecord:
        for p in self.parts:
            if p.part_id == part_id:
                return p
        raise KeyError(part_id)

    def to_graph(self) -> KinematicGraph:
        parent_of = {p.part_id: p.joint.parent for p in self.parts if p.joint is not None}
        joints = {p.part_id: p.joint.to_proposal(p.part_id)
                  for p in self.parts if p.joint is not None}
        return KinematicGraph(root=self.root_id, parent_of=parent_of, joints=joints)

    def labels(self) -> Dict[int, str]:
        return {p.part_id: p.label for p in self.parts}


_LabelShim = namedtuple("_LabelShim", "instance_id label_name")


def check_document(doc: AnnotationDocument, template: CategoryTemplate) -> list:
    """validate_graph over the document's own graph and labels."""
    shims = tuple(_LabelShim(p.part_id, p.label) for p in doc.parts)
    return validate_graph(doc.to_graph(), template, shims)


# --- serialization -----------------------------------------------------------

def _joint_payload(j: Optional[JointRecord]):
    if j is None:
        return None
    out = {"parent": j.parent, "motion": j.motion, "provenance": j.provenance,
           "flags": list(j.flags)}
    for k in ("origin", "axis", "axis2"):
        v = getattr(j, k)
        if v is not None:
            out[k] = list(v)
    if j.limits is not None:
        out["limits"] = {k: list(v) for k, v in j.limits.items()}
    return out


def document_payload(doc: AnnotationDocument) -> dict:
    info = doc.info
    return {
        "object": {
            "uuid": info.uuid,
            "source_dataset": info.source_dataset,
            "source_model": info.source_model,
            "category": list(info.category),
            "unit_scale": info.unit_scale,
            "up_axis": info.up_axis,
            "front_axis": info.front_axis,
            "bounds": [list(info.bounds[0]), list(info.bounds[1])],
        },
        "parts": [{
            "id": p.part_id,
            "label": p.label,
            "segment_ids": list(p.segment_ids),
            "joint": _joint_payload(p.joint),
            "material": p.material,
            "density": p.density,
            "volume": p.volume,
            "mass": p.mass,
            "affordance": list(p.affordance),
            "flags": list(p.flags),
        } for p in sorted(doc.parts, key=lambda p: p.part_id)],
    }


def export_annotation(doc: AnnotationDocument, template: CategoryTemplate) -> bytes:
    """Canonical JSON bytes; refuses documents whose graph fails validation."""
    report = check_document(doc, template)
    if report:
        raise UnvalidatedGraph(json.dumps(report))
    return (json.dumps(document_payload(doc), sort_keys=True,
                       separators=(",", ":"), allow_nan=False) + "\n").encode()


def _parse_joint(rec) -> Optional[JointRecord]:
    if rec is None:
        return None
    if rec.get("motion") not in MOTION_TYPES:
        raise MalformedFile(f"unknown motion type {rec.get('motion')!r}")
    return JointRecord(
        parent=int(rec["parent"]), motion=rec["motion"],
        origin=rec.get("origin"), axis=rec.get("axis"), axis2=rec.get("axis2"),
        limits={k: tuple(v) for k, v in rec["limits"].items()}
        if rec.get("limits") is not None else None,
        provenance=rec.get("provenance", ""), flags=tuple(rec.get("flags", ())))


def parse_annotation(data) -> AnnotationDocument:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise MalformedFile(f"annotation is not JSON: {e}") from None
    _check_schema(doc)
    obj = doc["object"]
    info = ObjectInfo(uuid=obj["uuid"], source_dataset=obj["source_dataset"],
                      source_model=obj["source_model"],
                      category=tuple(obj["category"]),
                      unit_scale=obj["unit_scale"], up_axis=obj["up_axis"],
                      front_axis=obj["front_axis"],
                      bounds=(tuple(obj["bounds"][0]), tuple(obj["bounds"][1])))
    parts = tuple(PartRecord(
        part_id=int(p["id"]), label=p["label"],
        segment_ids=tuple(p.get("segment_ids", ())),
        joint=_parse_joint(p.get("joint")),
        material=p.get("material"), density=p.get("density"),
        volume=p.get("volume"), mass=p.get("mass"),
        affordance=tuple(p.get("affordance", ())),
        flags=tuple(p.get("flags", (PROV_AUTO,)))) for p in doc["parts"])
    return AnnotationDocument(info=info, parts=parts)


def _check_schema(doc: dict) -> None:
    import jsonschema
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as e:
        raise MalformedFile(f"annotation schema violation: {e.message}") from None


_schema_cache = None


def load_schema() -> dict:
    global _schema_cache
    if _schema_cache is None:
        from importlib import resources
        text = resources.files("artforge").joinpath(
            "schemas/annotation.schema.json").read_text()
        _schema_cache = json.loads(text)
    return _schema_cache


# --- assembly from pipeline state ---------------------------------------------

def build_annotation(info: ObjectInfo, parts, graph: KinematicGraph,
                     physical=None, affordances: Dict[str, Tuple[str, ...]] = None
                     ) -> AnnotationDocument:
    """Assemble the document from segmentation, articulation and physics state.

    ``physical`` maps part id -> PhysicalRecord (or None before that stage);
    ``affordances`` maps label -> tags, typically from the category template.
    """
    physical = physical or {}
    affordances = affordances or {}
    records = []
    for p in parts:
        jp = graph.joints.get(p.instance_id)
        joint = None if p.instance_id == graph.root else (
            JointRecord.from_proposal(jp) if jp is not None else
            JointRecord(parent=graph.parent_of[p.instance_id], motion=FIXED))
        phys = physical.get(p.instance_id)
        records.append(PartRecord(
            part_id=p.instance_id, label=p.label_name,
            segment_ids=p.segment_ids, joint=joint,
            material=getattr(phys, "material", None),
            density=getattr(phys, "density", None),
            volume=getattr(phys, "volume", None),
            mass=getattr(phys, "mass", None),
            affordance=affordances.get(p.label_name, ()),
            flags=(PROV_AUTO,)))
    return AnnotationDocument(info=info, parts=tuple(records))
