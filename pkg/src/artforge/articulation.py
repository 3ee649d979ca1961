"""Joint inference: contact regions, motion axes, collision-sweep limits, graph.

Limits come from sweeping the moving part (plus its kinematic descendants)
against everything else while counting sample points that touch or penetrate
the static geometry. A rotational bound is the start of the first sustained
count ramp; a prismatic outward bound is where collisions vanish. Soft
failure modes (ambiguous axis, jammed part, no detachment) are flags on the
proposal, not exceptions — they feed the human verification queue.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import (AmbiguousRoot, ConfigInvalid, CycleDetected, NoContact,
                     NoValidParent, UnknownLabel, ZeroVector)
from .mesh import TriMesh, UnionFind
from .segmentation import PartInstance, PartSet
from .templates import (CONTINUOUS, CYLINDRICAL, FIXED, PRISMATIC, REVOLUTE,
                        ROOT_DEP, UNIVERSAL, CategoryTemplate, resolve_motion_type)

# fixed skew direction for parity ray casts: avoids axis-aligned edge grazing
_PARITY_DIR = np.array([0.29763432, 0.59526864, 0.74628067])
_PARITY_DIR = _PARITY_DIR / np.linalg.norm(_PARITY_DIR)

FLAG_AMBIGUOUS_AXIS = "AmbiguousAxis"
FLAG_DEGENERATE_RANGE = "DegenerateRange"
FLAG_NO_DETACHMENT = "NoDetachment"
FLAG_DETACHED = "NoContact"
FLAG_BOUNDED_CONTINUOUS = "BoundedContinuous"


@dataclass(frozen=True)
class SweepParams:
    angle_step_deg: float = 1.0
    linear_step_fraction: float = 0.01   # of the child descriptor box's max extent
    ramp_window: int = 3
    threshold_factor: float = 2.0
    count_floor: int = 5
    safe_fraction: float = 0.8
    eps_fraction: float = 0.005          # collision epsilon, of object bounds diagonal


@dataclass(frozen=True)
class ContactCluster:
    centroid: np.ndarray
    points: np.ndarray   # (k, 3) member points


@dataclass(frozen=True)
class ContactRegion:
    clusters: Tuple[ContactCluster, ...]
    contact_threshold: float


@dataclass(frozen=True)
class AxisProposal:
    origin: np.ndarray
    axis: np.ndarray
    axis2: Optional[np.ndarray]
    provenance: str
    flags: Tuple[str, ...] = ()


@dataclass(frozen=True)
class JointProposal:
    child: int
    parent: int
    motion: str
    origin: Optional[np.ndarray] = None
    axis: Optional[np.ndarray] = None
    axis2: Optional[np.ndarray] = None
    limits: Optional[Dict[str, Tuple[float, float]]] = None
    provenance: str = ""
    flags: Tuple[str, ...] = ()


@dataclass
class KinematicGraph:
    root: int
    parent_of: Dict[int, int]                 # child id -> parent id (root absent)
    joints: Dict[int, JointProposal] = field(default_factory=dict)

    @property
    def nodes(self) -> Tuple[int, ...]:
        return tuple(sorted({self.root, *self.parent_of.keys(), *self.parent_of.values()}))

    def children_of(self, part_id: int) -> Tuple[int, ...]:
        return tuple(sorted(c for c, p in self.parent_of.items() if p == part_id))

    def subtree(self, part_id: int) -> Tuple[int, ...]:
        out = [part_id]
        i = 0
        while i < len(out):
            out.extend(self.children_of(out[i]))
            i += 1
        return tuple(sorted(out))


def canonical_direction(v: np.ndarray) -> np.ndarray:
    """Unit direction with nonnegative +Y component; ties fall to +X, then +Z."""
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ZeroVector("cannot canonicalize a zero direction")
    v = v / n
    for c in (v[1], v[0], v[2]):
        if c > 1e-12:
            return v
        if c < -1e-12:
            return -v
    return v


def detect_contact_regions(mesh: TriMesh, child: PartInstance, parent: PartInstance,
                           contact_threshold: float) -> ContactRegion:
    """Child sample points near the parent, single-linkage clustered."""
    accel = kernels.build_accel(mesh.triangles(parent.faces))
    pts = child.samples.points
    near = kernels.points_within(pts, accel, contact_threshold)
    if not near.any():
        raise NoContact(
            f"part {child.instance_id} has no samples within {contact_threshold} "
            f"of part {parent.instance_id}")
    sel = pts[near]
    uf = UnionFind(len(sel))
    pairs = cKDTree(sel).query_pairs(2.0 * contact_threshold, output_type="ndarray")
    for a, b in pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]:
        uf.union(int(a), int(b))
    groups: Dict[int, list] = {}
    for i in range(len(sel)):
        groups.setdefault(uf.find(i), []).append(i)
    ordered = sorted(groups.values(), key=lambda g: (-len(g), g[0]))
    clusters = tuple(ContactCluster(centroid=sel[g].mean(axis=0), points=sel[g])
                     for g in ordered)
    return ContactRegion(clusters=clusters, contact_threshold=contact_threshold)


def _most_parallel(box_axes: np.ndarray, direction: np.ndarray):
    d = direction / np.linalg.norm(direction)
    dots = np.abs(box_axes @ d)
    order = np.argsort(-dots, kind="stable")
    margin = float(dots[order[0]] - dots[order[1]])
    axis = box_axes[order[0]]
    if axis @ d < 0:
        axis = -axis
    return axis, margin


def _most_orthogonal(box_axes: np.ndarray, direction: np.ndarray):
    d = direction / np.linalg.norm(direction)
    dots = np.abs(box_axes @ d)
    order = np.argsort(dots, kind="stable")
    return box_axes[order[0]].copy(), float(dots[order[1]] - dots[order[0]])


def _elongation(points: np.ndarray) -> np.ndarray:
    c = points - points.mean(axis=0)
    cov = c.T @ c / max(len(points), 1)
    lam, vec = np.linalg.eigh(cov)
    return vec[:, -1]


def propose_axis(child: PartInstance, parent: PartInstance, motion: str,
                 contact: ContactRegion, object_context: PartSet = None) -> AxisProposal:
    """Origin/axis (and axis2 for universal) from contacts and descriptor boxes."""
    if motion == FIXED:
        raise ConfigInvalid("propose_axis called for a fixed joint")
    flags = []

    rotational = motion in (REVOLUTE, CONTINUOUS, CYLINDRICAL, UNIVERSAL)
    if rotational:
        if len(contact.clusters) >= 2:
            c0 = contact.clusters[0].centroid
            c1 = contact.clusters[1].centroid
            axis = canonical_direction(c0 - c1)
            origin = 0.5 * (c0 + c1)
            provenance = "two-cluster-centroid-line"
        else:
            cl = contact.clusters[0]
            elong = _elongation(cl.points)
            cand, margin = _most_parallel(child.box.axes, elong)
            if margin < 1e-3:
                flags.append(FLAG_AMBIGUOUS_AXIS)
            axis = canonical_direction(cand)
            origin = cl.centroid
            provenance = "single-cluster-elongation"
    else:  # prismatic
        pull = child.box.center - parent.box.center
        if np.linalg.norm(pull) == 0.0:
            pull = child.box.axes[0]
            flags.append(FLAG_AMBIGUOUS_AXIS)
        cand, margin = _most_parallel(child.box.axes, pull)
        if margin < 1e-3:
            flags.append(FLAG_AMBIGUOUS_AXIS)
        axis = canonical_direction(cand)
        origin = child.box.center.copy()
        provenance = "pull-out-direction"

    axis2 = None
    if motion == UNIVERSAL:
        cand2, margin2 = _most_orthogonal(child.box.axes, axis)
        if margin2 < 1e-3:
            flags.append(FLAG_AMBIGUOUS_AXIS)
        cand2 = cand2 - (cand2 @ axis) * axis
        axis2 = canonical_direction(cand2)
        allpts = np.concatenate([c.points for c in contact.clusters])
        origin = allpts.mean(axis=0)
        provenance += "+orthogonal-axis2"

    return AxisProposal(origin=origin, axis=axis, axis2=axis2,
                        provenance=provenance, flags=tuple(flags))


# --- collision counting ---

def _edges_closed(mesh: TriMesh, faces: np.ndarray) -> bool:
    fw = mesh.faces[faces]
    edges = np.concatenate([fw[:, (0, 1)], fw[:, (1, 2)], fw[:, (2, 0)]], axis=0)
    edges.sort(axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return bool(len(counts) and np.all(counts == 2))


@dataclass(frozen=True)
class CollisionContext:
    accel: object
    closed: bool
    eps: float
    points: np.ndarray   # moving sample points at rest


def make_collision_context(mesh: TriMesh, parts: PartSet, moving_ids,
                           params: SweepParams) -> CollisionContext:
    moving = set(int(m) for m in (moving_ids if hasattr(moving_ids, "__iter__") else [moving_ids]))
    static_faces = [p.faces for p in parts if p.instance_id not in moving]
    static = np.sort(np.concatenate(static_faces)) if static_faces else np.zeros(0, np.int64)
    accel = kernels.build_accel(mesh.triangles(static))
    closed = _edges_closed(mesh, static) if len(static) else False
    diag = float(np.linalg.norm(mesh.extent()))
    pts = np.concatenate([parts[m].samples.points for m in sorted(moving)])
    return CollisionContext(accel=accel, closed=closed,
                            eps=params.eps_fraction * diag, points=pts)


def _count_against(ctx: CollisionContext, pts: np.ndarray) -> int:
    if ctx.accel.n_faces == 0:
        return 0
    near = kernels.points_within(pts, ctx.accel, ctx.eps)
    if ctx.closed and not near.all():
        far = ~near
        odd = kernels.ray_crossings(pts[far], _PARITY_DIR, ctx.accel) % 2 == 1
        return int(near.sum() + odd.sum())
    return int(near.sum())


def count_collision_points(mesh: TriMesh, parts: PartSet, moving: int,
                           pose: np.ndarray, params: SweepParams = SweepParams()) -> int:
    """Moving part's samples touching or inside the union of the other parts."""
    ctx = make_collision_context(mesh, parts, moving, params)
    pts = ctx.points @ pose[:3, :3].T + pose[:3, 3]
    return _count_against(ctx, pts)


def _rotate(pts: np.ndarray, origin: np.ndarray, axis: np.ndarray,
            angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    k = axis
    rel = pts - origin
    return (origin + rel * c + np.cross(k, rel) * s
            + np.outer(rel @ k, k) * (1.0 - c))


def _ramp_bound(counts: np.ndarray, params: SweepParams) -> Optional[int]:
    """Index (step units from rest) where a sustained ramp starts, else None."""
    c0 = counts[0]
    thresh = max(params.threshold_factor * c0, c0 + params.count_floor)
    rw = params.ramp_window
    for k in range(rw, len(counts)):
        if counts[k] <= thresh:
            continue
        if all(counts[k - j] > counts[k - j - 1] for j in range(rw)):
            return k - rw
    return None


def _zero_run(counts: np.ndarray, rw: int) -> Optional[int]:
    run = 0
    for k in range(len(counts)):
        run = run + 1 if counts[k] == 0 else 0
        if run >= rw:
            return k - rw + 1
    return None


def _sweep_counts(ctx: CollisionContext, pose_at, n_steps: int) -> np.ndarray:
    counts = np.empty(n_steps + 1, dtype=np.int64)
    counts[0] = _count_against(ctx, ctx.points)
    for k in range(1, n_steps + 1):
        counts[k] = _count_against(ctx, pose_at(k))
    return counts


def estimate_range_revolute(mesh: TriMesh, parts: PartSet, joint: JointProposal,
                            params: SweepParams = SweepParams(),
                            ctx: CollisionContext = None):
    """Rotational limits (radians, 0 = rest) or None when the full turn is clean.

    Returns (limits dict | None, flags). A bound is reported at the start of
    the first sustained count ramp; collision-bounded ends are trimmed to
    safe_fraction of the swept span, rest-pose ends stay at 0.
    """
    if ctx is None:
        ctx = make_collision_context(mesh, parts, joint.child, params)
    step = np.radians(params.angle_step_deg)
    n = int(round(2.0 * np.pi / step))
    origin, axis = joint.origin, joint.axis

    pos = _sweep_counts(ctx, lambda k: _rotate(ctx.points, origin, axis, k * step), n)
    neg = _sweep_counts(ctx, lambda k: _rotate(ctx.points, origin, axis, -k * step), n)
    bp = _ramp_bound(pos, params)
    bn = _ramp_bound(neg, params)
    if bp is None and bn is None:
        return None, ()

    flags = []
    if bp is None:
        bp = n - (bn or 0)        # same obstruction seen from the other side
    if bn is None:
        bn = n - bp
    hi_raw = bp * step
    lo_raw = -bn * step
    if bp <= 2 and bn <= 2:
        flags.append(FLAG_DEGENERATE_RANGE)

    span = hi_raw - lo_raw
    trim = (1.0 - params.safe_fraction) * span
    pinned_lo = bn <= 1
    pinned_hi = bp <= 1
    if pinned_lo and pinned_hi:
        lo, hi = 0.0, 0.0
    elif pinned_lo:
        lo, hi = 0.0, hi_raw - trim
    elif pinned_hi:
        lo, hi = lo_raw + trim, 0.0
    else:
        lo, hi = lo_raw + trim * 0.5, hi_raw - trim * 0.5
    return {"rotation": (min(lo, 0.0), max(hi, 0.0))}, tuple(flags)


def estimate_range_prismatic(mesh: TriMesh, parts: PartSet, joint: JointProposal,
                             params: SweepParams = SweepParams(),
                             ctx: CollisionContext = None,
                             retention: float = 0.9,
                             non_recessing: bool = False):
    """Translational limits (meters, 0 = rest): detach outward, ramp inward.

    Returns (limits dict, flags). The detachment side is whichever direction
    loses all collisions first; retention shrinks both ends; non_recessing
    clamps the blocked (inward) end to 0.
    """
    box = parts[joint.child].box
    step = params.linear_step_fraction * float(np.max(box.extents))
    if step <= 0.0:
        raise ConfigInvalid(f"part {joint.child}: zero-extent box, cannot derive step")
    n = int(np.ceil(3.0 * float(np.max(box.extents)) / step))
    if ctx is None:
        ctx = make_collision_context(mesh, parts, joint.child, params)
    axis = joint.axis

    pos = _sweep_counts(ctx, lambda k: ctx.points + (k * step) * axis, n)
    neg = _sweep_counts(ctx, lambda k: ctx.points - (k * step) * axis, n)

    flags = []
    if pos[0] == 0:
        flags.append(FLAG_DEGENERATE_RANGE)
        return {"translation": (0.0, 0.0)}, tuple(flags)

    zp = _zero_run(pos, params.ramp_window)
    zn = _zero_run(neg, params.ramp_window)
    rp = _ramp_bound(pos, params)
    rn = _ramp_bound(neg, params)

    # a side "detaches" if its zero-run comes before any ramp on that side
    det_p = zp is not None and (rp is None or zp <= rp)
    det_n = zn is not None and (rn is None or zn <= rn)
    if det_p:
        blocked_end = "lower"
        hi_raw = zp * step
        lo_raw = -rn * step if rn is not None else 0.0
    elif det_n:
        blocked_end = "upper"
        lo_raw = -zn * step
        hi_raw = rp * step if rp is not None else 0.0
    else:
        flags.append(FLAG_NO_DETACHMENT)
        blocked_end = "lower"
        hi_raw = (rp if rp is not None else n) * step
        lo_raw = -rn * step if rn is not None else 0.0

    lo = retention * min(lo_raw, 0.0)
    hi = retention * max(hi_raw, 0.0)
    if non_recessing:
        if blocked_end == "lower":
            lo = 0.0
        else:
            hi = 0.0
    return {"translation": (lo, hi)}, tuple(flags)


# --- kinematic graph ---

def _part_label(part: PartInstance) -> str:
    if part.label_name is None:
        raise UnknownLabel(f"part {part.instance_id} has no label name attached")
    return part.label_name


def _sample_distance(a: PartInstance, b: PartInstance) -> float:
    d, _ = cKDTree(b.samples.points).query(a.samples.points, k=1)
    return float(d.min())


def build_kinematic_graph(parts: PartSet, template: CategoryTemplate,
                          mesh: TriMesh = None) -> KinematicGraph:
    """Closest valid parent per part, subject to template link dependencies."""
    root_labels = template.root_labels()
    if not root_labels:
        raise AmbiguousRoot(f"template {template.main_category!r} has no root entry")
    if len(root_labels) > 1:
        raise AmbiguousRoot(f"template {template.main_category!r} has several root "
                            f"candidates: {list(root_labels)}")
    root_label = root_labels[0]

    for p in parts:
        if not template.has(_part_label(p)):
            raise UnknownLabel(f"part {p.instance_id} label {_part_label(p)!r} "
                               f"not in template {template.main_category!r}")

    roots = [p for p in parts if _part_label(p) == root_label]
    if not roots:
        raise NoValidParent(f"no part carries the root label {root_label!r}")
    # several base fragments: the largest one anchors the tree
    root = max(roots, key=lambda p: (len(p.faces), -p.instance_id)).instance_id

    parent_of: Dict[int, int] = {}
    for p in parts:
        if p.instance_id == root:
            continue
        deps = template.entry(_part_label(p)).link_dependency
        allowed = {root_label if d == ROOT_DEP else d for d in deps} or {root_label}
        cands = [q for q in parts
                 if q.instance_id != p.instance_id and _part_label(q) in allowed]
        if not cands:
            raise NoValidParent(
                f"part {p.instance_id} ({_part_label(p)!r}): no part with a label in "
                f"{sorted(allowed)}")
        dists = [( _sample_distance(p, q), q.instance_id) for q in cands]
        dmin = min(d for d, _ in dists)
        parent_of[p.instance_id] = min(i for d, i in dists if d <= dmin + 1e-9)

    for start in parent_of:
        seen = {start}
        cur = start
        while cur in parent_of:
            cur = parent_of[cur]
            if cur in seen:
                raise CycleDetected(f"kinematic cycle through part {cur}")
            seen.add(cur)
    return KinematicGraph(root=root, parent_of=parent_of)


def validate_graph(graph: KinematicGraph, template: CategoryTemplate,
                   parts: PartSet = None) -> list:
    """Report template/structure violations; empty list means valid."""
    report = []
    roots = [n for n in graph.nodes if n not in graph.parent_of]
    if len(roots) > 1:
        report.append({"code": "multiple_roots", "detail": f"parentless nodes {roots}"})
    if graph.root in graph.parent_of:
        report.append({"code": "root_has_parent", "detail": f"root {graph.root}"})

    for start in graph.parent_of:
        seen = {start}
        cur = start
        while cur in graph.parent_of:
            cur = graph.parent_of[cur]
            if cur in seen:
                report.append({"code": "cycle", "detail": f"through part {cur}"})
                break
            seen.add(cur)

    label_of = {}
    if parts is not None:
        label_of = {p.instance_id: p.label_name for p in parts}
    root_labels = set(template.root_labels())
    for child, parent in sorted(graph.parent_of.items()):
        cl, pl = label_of.get(child), label_of.get(parent)
        if cl is None or pl is None or not template.has(cl):
            continue
        deps = template.entry(cl).link_dependency
        allowed = {next(iter(root_labels)) if d == ROOT_DEP else d for d in deps}
        if deps and pl not in allowed:
            report.append({"code": "dependency_violation",
                           "detail": f"edge {parent}->{child}: {pl!r} not in {sorted(allowed)}"})

    for child, joint in sorted(graph.joints.items()):
        cl = label_of.get(child)
        if cl is not None and template.has(cl):
            entry = template.entry(cl)
            allowed_types = set(entry.joint_type) | ({FIXED} if not entry.articulatable else set())
            if entry.articulatable and joint.motion not in entry.joint_type:
                report.append({"code": "motion_type_violation",
                               "detail": f"part {child}: {joint.motion!r} not in "
                                         f"{list(entry.joint_type)}"})
            elif not entry.articulatable and joint.motion != FIXED:
                report.append({"code": "motion_type_violation",
                               "detail": f"part {child}: non-articulatable but {joint.motion!r}"})
        if joint.motion == UNIVERSAL and joint.axis is not None and joint.axis2 is not None:
            if abs(float(joint.axis @ joint.axis2)) > 1e-6:
                report.append({"code": "universal_axes_not_orthogonal",
                               "detail": f"part {child}"})
    return report


def infer_joints(mesh: TriMesh, parts: PartSet, template: CategoryTemplate,
                 params: SweepParams = SweepParams(),
                 retention: float = 0.9, sweep: bool = True) -> KinematicGraph:
    """Full motion annotation: graph topology, then per-edge type/axis/limits.

    With sweep=False only topology and axis proposals are produced (limits stay
    None), which is what interior completion needs before ranges make sense.
    """
    graph = build_kinematic_graph(parts, template, mesh)
    diag = float(np.linalg.norm(mesh.extent()))
    contact_threshold = params.eps_fraction * diag

    for child_id in sorted(p.instance_id for p in parts):
        if child_id == graph.root:
            continue
        child = parts[child_id]
        parent = parts[graph.parent_of[child_id]]
        entry = template.entry(_part_label(child))
        motion = resolve_motion_type(child, template)
        if motion == FIXED:
            graph.joints[child_id] = JointProposal(
                child=child_id, parent=parent.instance_id, motion=FIXED,
                origin=child.box.center.copy(), provenance="template-fixed")
            continue

        try:
            contact = detect_contact_regions(mesh, child, parent, contact_threshold)
        except NoContact:
            graph.joints[child_id] = JointProposal(
                child=child_id, parent=parent.instance_id, motion=FIXED,
                origin=child.box.center.copy(), provenance="detached-fallback",
                flags=(FLAG_DETACHED,))
            continue

        prop = propose_axis(child, parent, motion, contact, parts)
        flags = list(prop.flags)
        joint = JointProposal(child=child_id, parent=parent.instance_id, motion=motion,
                              origin=prop.origin, axis=prop.axis, axis2=prop.axis2,
                              provenance=prop.provenance)
        if not sweep:
            graph.joints[child_id] = replace(joint, flags=tuple(flags))
            continue
        ctx = make_collision_context(mesh, parts, graph.subtree(child_id), params)

        limits: Optional[Dict[str, Tuple[float, float]]] = {}
        if motion in (REVOLUTE, CONTINUOUS):
            rot, fl = estimate_range_revolute(mesh, parts, joint, params, ctx)
            flags += fl
            if rot is None:
                motion, limits = CONTINUOUS, None
            else:
                if motion == CONTINUOUS:
                    flags.append(FLAG_BOUNDED_CONTINUOUS)
                motion, limits = REVOLUTE, rot
        elif motion == PRISMATIC:
            limits, fl = estimate_range_prismatic(
                mesh, parts, joint, params, ctx, retention=retention,
                non_recessing=entry.non_recessing)
            flags += fl
        elif motion == CYLINDRICAL:
            rot, fl = estimate_range_revolute(mesh, parts, joint, params, ctx)
            flags += fl
            tr, fl2 = estimate_range_prismatic(
                mesh, parts, joint, params, ctx, retention=retention,
                non_recessing=entry.non_recessing)
            flags += fl2
            limits = dict(tr)
            if rot is not None:
                limits.update(rot)
        elif motion == UNIVERSAL:
            rot, fl = estimate_range_revolute(mesh, parts, joint, params, ctx)
            flags += fl
            joint2 = replace(joint, axis=joint.axis2)
            rot2, fl2 = estimate_range_revolute(mesh, parts, joint2, params, ctx)
            flags += fl2
            limits = {}
            if rot is not None:
                limits["rotation"] = rot["rotation"]
            if rot2 is not None:
                limits["rotation2"] = rot2["rotation"]

        graph.joints[child_id] = replace(joint, motion=motion,
                                         limits=limits if limits else None,
                                         flags=tuple(flags))
    return graph
