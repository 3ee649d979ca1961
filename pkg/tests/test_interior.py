"""Interior completion: cavity probing, drawer boxes, shelves, inserted parts.

The drawer-completion oracle is the carcass itself: every generated vertex
must clear every wall (and the sloped back wedge, checked against its exact
plane equation), and the finished drawer must still slide the fixture's full
depth without its collision count ever rising above the rest pose — the
"plausible over the full motion range" requirement stated operationally.
"""
import json

import numpy as np
import pytest

from artforge.articulation import (JointProposal, SweepParams,
                                   build_kinematic_graph, count_collision_points,
                                   estimate_range_prismatic)
from artforge.boxes import OrientedBox
from artforge.errors import NoCavity, NoGenerator, UnknownLabel
from artforge.interior import (DeltaPiece, GeometryDelta, apply_delta,
                               complete_translational_part,
                               insert_affordance_interiors,
                               insert_missing_articulated, probe_body_cavity)
from artforge.mesh import TriMesh
from artforge.meshio import write_glb
from artforge.sampling import PointSet
from artforge.segmentation import PartInstance, PartSet
from artforge.templates import load_template

from conftest import CABINET_TEMPLATE, parts_from_labels
from shapes import (DRAWER_DEPTH, DRAWER_WALLS, box_mesh, box_vf,
                    panel_drawer_fixture, shell_fixture, stack)

_PANEL = ((-0.21, 0.04, -0.007), (0.21, 0.26, 0.003))   # the fixture's front panel

_WARDROBE = {"main_category": "wardrobe", "content": [
    {"name": "body", "gloss": "shell",
     "kinematic": {"articulatable": False, "link_dependency": [], "joint_type": []}},
    {"name": "shelf", "gloss": "board", "interior": "shelf",
     "kinematic": {"articulatable": False, "link_dependency": ["body"], "joint_type": []}},
    {"name": "rail", "gloss": "hanging rail", "interior": "rail",
     "kinematic": {"articulatable": False, "link_dependency": ["body"], "joint_type": []}}]}

_MICROWAVE = {"main_category": "microwave", "content": [
    {"name": "body", "gloss": "shell",
     "kinematic": {"articulatable": False, "link_dependency": [], "joint_type": []}},
    {"name": "turntable", "gloss": "rotating plate", "interior": "turntable",
     "kinematic": {"articulatable": True, "link_dependency": ["body"],
                   "joint_type": ["continuous"]}}]}

_FREEZER = {"main_category": "freezer", "content": [
    {"name": "body", "gloss": "shell",
     "kinematic": {"articulatable": False, "link_dependency": [], "joint_type": []}},
    {"name": "basket", "gloss": "sliding basket", "interior": "basket",
     "kinematic": {"articulatable": True, "link_dependency": ["body"],
                   "joint_type": ["prismatic"]}}]}


def _box_dist(pts, lo, hi):
    d = np.maximum(np.maximum(np.asarray(lo) - pts, pts - np.asarray(hi)), 0.0)
    return np.linalg.norm(d, axis=1)


def _wedge_face_z(y):
    return -0.400 - 0.078 * (np.asarray(y) - 0.02)


def _stub_part(iid, name, at=(0.0, 0.0, 0.0)):
    pts = np.asarray(at, float)[None, :]
    box = OrientedBox(center=pts[0], axes=np.eye(3),
                      extents=np.full(3, 1e-3), kind="aabb")
    return PartInstance(instance_id=iid, label_id=0, segment_ids=(),
                        faces=np.zeros(0, dtype=np.int64), box=box,
                        samples=PointSet(points=pts,
                                         source_face=np.zeros(1, np.int64), seed=0),
                        label_name=name)


@pytest.fixture(scope="module")
def completed():
    """Panel-only drawer, completed and merged back into the scene."""
    raw, labels = panel_drawer_fixture()
    mats = np.where(np.arange(raw.face_count) < 12, 3, 1).astype(np.int32)
    mesh = TriMesh(raw.vertices, raw.faces, face_material=mats)
    parts = parts_from_labels(mesh, labels, {0: "body", 1: "drawer"})
    panel = next(p for p in parts if p.label_name == "drawer")
    body = next(p for p in parts if p.label_name == "body")
    joint = JointProposal(child=panel.instance_id, parent=body.instance_id,
                          motion="prismatic", origin=panel.box.center,
                          axis=np.array([0.0, 0.0, 1.0]))
    delta = complete_translational_part(mesh, parts, panel.instance_id, joint)
    new_mesh, new_parts, _ = apply_delta(mesh, parts, delta)
    return mesh, parts, panel.instance_id, joint, delta, new_mesh, new_parts


# ----------------------------------------------------------- cavity probe ---

class TestCavityProbe:
    def test_open_shell_measured_exactly(self):
        mesh, labels = shell_fixture(0.8, 1.6, 0.5)
        parts = parts_from_labels(mesh, labels, {0: "body"}, sample_count=512)
        cav = probe_body_cavity(mesh, parts, parts[0].instance_id)
        assert cav.depth == pytest.approx(1.6, abs=1e-6)
        assert cav.lo == pytest.approx([-0.4, 0.0, 0.0], abs=1e-6)
        assert cav.hi == pytest.approx([0.4, 1.6, 0.5], abs=1e-6)
        assert np.allclose(cav.open_axis, [0.0, 0.0, 1.0])

    def test_unenclosed_geometry_raises(self):
        v, f, labels = stack([(0, box_vf((0.0, 0.0, 0.0), (0.5, 0.05, 0.5))),
                              (0, box_vf((0.0, 0.05, 0.0), (0.05, 0.5, 0.5)))])
        mesh = TriMesh(v, f)
        parts = parts_from_labels(mesh, labels, {0: "body"}, sample_count=512)
        with pytest.raises(NoCavity):
            probe_body_cavity(mesh, parts, parts[0].instance_id)


# ------------------------------------------------------- drawer completion ---

class TestDrawerCompletion:
    def test_emits_five_clearance_inset_panels(self, completed):
        _, _, pid, _, delta, _, _ = completed
        assert delta.owner == pid
        assert len(delta.pieces) == 5
        assert all(p.provenance == "drawer_completion" for p in delta.pieces)
        assert all(len(p.faces) == 12 and len(p.vertices) == 8
                   for p in delta.pieces)

        verts = delta.vertices
        # sides hug the carcass walls at exactly the configured clearance
        assert verts[:, 0].min() == pytest.approx(-0.217, abs=1e-6)
        assert verts[:, 0].max() == pytest.approx(0.217, abs=1e-6)
        # bottom rides clearance above the rails, top clears the carcass roof
        assert verts[:, 1].min() == pytest.approx(0.041, abs=1e-6)
        assert verts[:, 1].max() == pytest.approx(0.277, abs=1e-6)
        # nothing pokes past the panel's back face; the back panel sits just
        # short of the probed wedge (10th-percentile hit minus clearance)
        assert verts[:, 2].max() == pytest.approx(-0.007, abs=1e-9)
        assert -0.404 <= verts[:, 2].min() <= -0.399

    def test_panels_clear_the_carcass_everywhere(self, completed):
        _, _, _, _, delta, _, _ = completed
        verts = delta.vertices
        for lo, hi in DRAWER_WALLS:
            assert _box_dist(verts, lo, hi).min() >= 0.003 - 1e-6
        in_wedge_footprint = (np.abs(verts[:, 0]) <= 0.22) & \
                             (verts[:, 1] >= 0.02) & (verts[:, 1] <= 0.28)
        margin = verts[in_wedge_footprint, 2] - _wedge_face_z(verts[in_wedge_footprint, 1])
        assert margin.min() > 1e-6

    def test_completed_drawer_slides_full_depth(self, completed):
        _, _, pid, joint, _, new_mesh, new_parts = completed
        limits, flags = estimate_range_prismatic(new_mesh, new_parts, joint,
                                                 non_recessing=True)
        assert flags == ()
        lo, hi = limits["translation"]
        assert lo == 0.0
        step = 0.01 * float(np.max(new_parts[pid].box.extents))
        detach = hi / 0.9
        assert DRAWER_DEPTH - step <= detach <= DRAWER_DEPTH + 0.01 + step

    def test_full_range_sweep_adds_nothing(self, completed):
        """Every step of the retained range stays within the count floor of rest."""
        _, _, pid, joint, _, new_mesh, new_parts = completed
        limits, _ = estimate_range_prismatic(new_mesh, new_parts, joint,
                                             non_recessing=True)
        hi = limits["translation"][1]
        step = 0.01 * float(np.max(new_parts[pid].box.extents))
        axis = np.asarray(joint.axis)

        def count_at(d):
            pose = np.eye(4)
            pose[:3, 3] = d * axis
            return count_collision_points(new_mesh, new_parts, pid, pose)

        rest = count_at(0.0)
        floor = SweepParams().count_floor
        worst = max(count_at(k * step) - rest
                    for k in range(1, int(hi / step) + 1))
        assert worst <= floor

    def test_deep_part_already_modeled(self, drawer_case):
        """The fully-modeled drawer tray needs nothing: empty delta."""
        delta = complete_translational_part(drawer_case.mesh, drawer_case.parts,
                                            drawer_case.mover.instance_id,
                                            drawer_case.joint)
        assert delta.owner == drawer_case.mover.instance_id
        assert delta.pieces == ()
        assert delta.face_count == 0

    def test_no_cavity_when_rays_escape(self):
        v, f, labels = stack([(1, box_vf(*_PANEL)),
                              (0, box_vf((5.0, 5.0, 5.0), (5.2, 5.2, 5.2)))])
        mesh = TriMesh(v, f)
        parts = parts_from_labels(mesh, labels, {0: "body", 1: "drawer"},
                                  sample_count=512)
        panel = next(p for p in parts if p.label_name == "drawer")
        joint = JointProposal(child=panel.instance_id, parent=0, motion="prismatic",
                              origin=panel.box.center, axis=np.array([0.0, 0.0, 1.0]))
        with pytest.raises(NoCavity, match="escape"):
            complete_translational_part(mesh, parts, panel.instance_id, joint)

    def test_no_cavity_when_volume_is_solid(self):
        # block face coincident with the panel back: rays tunnel into solid
        v, f, labels = stack([(1, box_vf(*_PANEL)),
                              (0, box_vf((-0.23, 0.03, -0.30), (0.23, 0.27, -0.007)))])
        mesh = TriMesh(v, f)
        parts = parts_from_labels(mesh, labels, {0: "body", 1: "drawer"},
                                  sample_count=512)
        panel = next(p for p in parts if p.label_name == "drawer")
        joint = JointProposal(child=panel.instance_id, parent=0, motion="prismatic",
                              origin=panel.box.center, axis=np.array([0.0, 0.0, 1.0]))
        with pytest.raises(NoCavity, match="solid"):
            complete_translational_part(mesh, parts, panel.instance_id, joint)

    def test_no_cavity_when_too_shallow(self):
        # wall 4 mm behind the panel: probed depth dies under the clearance
        v, f, labels = stack([(1, box_vf(*_PANEL)),
                              (0, box_vf((-0.23, 0.03, -0.30), (0.23, 0.27, -0.011)))])
        mesh = TriMesh(v, f)
        parts = parts_from_labels(mesh, labels, {0: "body", 1: "drawer"},
                                  sample_count=512)
        panel = next(p for p in parts if p.label_name == "drawer")
        joint = JointProposal(child=panel.instance_id, parent=0, motion="prismatic",
                              origin=panel.box.center, axis=np.array([0.0, 0.0, 1.0]))
        with pytest.raises(NoCavity, match="depth"):
            complete_translational_part(mesh, parts, panel.instance_id, joint)


# ------------------------------------------------------------- affordances ---

class TestAffordanceInteriors:
    def _wardrobe(self):
        mesh, labels = shell_fixture(0.8, 1.6, 0.5)
        parts = parts_from_labels(mesh, labels, {0: "body"}, sample_count=512)
        return mesh, parts, load_template(json.dumps(_WARDROBE))

    def test_wardrobe_gets_shelves_and_rail(self):
        mesh, parts, tpl = self._wardrobe()
        delta = insert_affordance_interiors(mesh, parts, tpl)
        assert delta.owner is None
        shelves = [p for p in delta.pieces if p.provenance == "shelf"]
        rails = [p for p in delta.pieces if p.provenance == "rail"]
        assert len(shelves) == 4 and len(rails) == 1

        # (1.6 - 0.05 headroom) / 0.35 spacing -> 4 boards, evenly spaced
        ys = sorted(p.vertices[:, 1].min() for p in shelves)
        assert ys == pytest.approx([0.35, 0.70, 1.05, 1.40], abs=1e-6)
        for p in shelves:
            assert p.label == "shelf"
            assert p.vertices[:, 0].min() == pytest.approx(-0.397, abs=1e-6)
            assert p.vertices[:, 0].max() == pytest.approx(0.397, abs=1e-6)
            assert p.vertices[:, 2].min() == pytest.approx(0.003, abs=1e-6)
            assert p.vertices[:, 2].max() == pytest.approx(0.497, abs=1e-6)
            assert np.ptp(p.vertices[:, 1]) == pytest.approx(0.015, abs=1e-9)

        rail = rails[0]
        assert rail.label == "rail"
        assert rail.vertices[:, 1].max() <= 1.55 + 0.015 + 1e-9
        assert rail.vertices[:, 1].min() >= 1.55 - 0.015 - 1e-9
        assert np.abs(rail.vertices[:, 2] - 0.25).max() <= 0.015 + 1e-9
        assert rail.vertices[:, 0].min() == pytest.approx(-0.397, abs=1e-6)

    def test_existing_parts_suppress_generation(self):
        mesh, parts, tpl = self._wardrobe()
        with_shelf = PartSet((parts[0], _stub_part(1, "shelf", (0, 0.8, 0.25))))
        delta = insert_affordance_interiors(mesh, with_shelf, tpl)
        assert [p.provenance for p in delta.pieces] == ["rail"]

        with_both = PartSet((parts[0], _stub_part(1, "shelf"), _stub_part(2, "rail")))
        assert insert_affordance_interiors(mesh, with_both, tpl).pieces == ()

    def test_divider_splits_the_cavity(self):
        mesh, parts, _ = self._wardrobe()
        doc = {"main_category": "cellar", "content": [
            _WARDROBE["content"][0],
            {"name": "partition", "gloss": "", "interior": "divider",
             "kinematic": {"articulatable": False, "link_dependency": ["body"],
                           "joint_type": []}}]}
        delta = insert_affordance_interiors(mesh, parts, load_template(json.dumps(doc)))
        assert [p.provenance for p in delta.pieces] == ["divider"]
        verts = delta.pieces[0].vertices
        assert verts[:, 0].min() == pytest.approx(-0.0075, abs=1e-6)
        assert verts[:, 0].max() == pytest.approx(0.0075, abs=1e-6)
        assert verts[:, 1].min() == pytest.approx(0.003, abs=1e-6)
        assert verts[:, 1].max() == pytest.approx(1.597, abs=1e-6)

    def test_missing_root_label_raises(self):
        mesh, labels = shell_fixture(0.8, 1.6, 0.5)
        parts = parts_from_labels(mesh, labels, {0: "panel"}, sample_count=512)
        doc = {"main_category": "wardrobe", "content": [
            {"name": "panel", "gloss": "",
             "kinematic": {"articulatable": False, "link_dependency": ["shelf"],
                           "joint_type": []}},
            {"name": "shelf", "gloss": "", "interior": "shelf",
             "kinematic": {"articulatable": False, "link_dependency": [],
                           "joint_type": []}}]}
        # "shelf" is the only root-capable label and no part carries it
        with pytest.raises(UnknownLabel):
            insert_affordance_interiors(mesh, parts, load_template(json.dumps(doc)))


# ----------------------------------------------------- inserted moving parts ---

class TestInsertedArticulated:
    def _oven(self):
        mesh, labels = shell_fixture(0.5, 0.3, 0.4)
        parts = parts_from_labels(mesh, labels, {0: "body"}, sample_count=512)
        return mesh, parts

    def test_turntable_disc_and_spin_joint(self):
        mesh, parts = self._oven()
        delta, joints = insert_missing_articulated(
            mesh, parts, load_template(json.dumps(_MICROWAVE)))
        assert len(delta.pieces) == 1 and len(joints) == 1
        piece = delta.pieces[0]
        assert piece.provenance == "parametric_part"
        assert piece.label == "turntable"
        radial = np.hypot(piece.vertices[:, 0], piece.vertices[:, 2] - 0.2)
        assert radial.max() == pytest.approx(0.4 * 0.4, abs=1e-6)   # 40% of depth
        assert piece.vertices[:, 1].min() == pytest.approx(0.003, abs=1e-6)

        j = joints[0]
        assert j.motion == "continuous"
        assert np.allclose(j.axis, [0.0, 1.0, 0.0])
        assert j.origin == pytest.approx([0.0, 0.0, 0.2], abs=1e-6)
        assert j.provenance == "generated-interior"

    def test_basket_tub_and_slide_joint(self):
        mesh, parts = self._oven()
        delta, joints = insert_missing_articulated(
            mesh, parts, load_template(json.dumps(_FREEZER)))
        piece = delta.pieces[0]
        assert piece.label == "basket"
        assert len(piece.faces) == 60   # five walls, no lid
        assert piece.vertices[:, 0].min() == pytest.approx(-0.225, abs=1e-6)
        assert piece.vertices[:, 0].max() == pytest.approx(0.225, abs=1e-6)
        assert piece.vertices[:, 1].min() == pytest.approx(0.003, abs=1e-6)
        assert piece.vertices[:, 1].max() == pytest.approx(0.078, abs=1e-6)

        j = joints[0]
        assert j.motion == "prismatic"
        assert np.allclose(j.axis, [0.0, 0.0, 1.0])   # toward the open face
        lo, hi = j.limits["translation"]
        assert lo == 0.0
        assert hi == pytest.approx(0.9 * 0.4, abs=1e-6)

    def test_template_order_preserved(self):
        doc = {"main_category": "combi", "content": [
            _MICROWAVE["content"][0],
            _MICROWAVE["content"][1],
            _FREEZER["content"][1]]}
        mesh, parts = self._oven()
        delta, joints = insert_missing_articulated(
            mesh, parts, load_template(json.dumps(doc)))
        assert [p.label for p in delta.pieces] == ["turntable", "basket"]
        assert [j.motion for j in joints] == ["continuous", "prismatic"]

    def test_existing_part_suppresses_insertion(self):
        mesh, parts = self._oven()
        with_table = PartSet((parts[0], _stub_part(1, "turntable", (0, 0.05, 0.2))))
        delta, joints = insert_missing_articulated(
            mesh, with_table, load_template(json.dumps(_MICROWAVE)))
        assert delta.pieces == () and joints == ()

    def test_unknown_interior_kind_raises(self):
        doc = {"main_category": "oddity", "content": [
            _MICROWAVE["content"][0],
            {"name": "carousel", "gloss": "", "interior": "carousel",
             "kinematic": {"articulatable": True, "link_dependency": ["body"],
                           "joint_type": ["continuous"]}}]}
        mesh, parts = self._oven()
        with pytest.raises(NoGenerator):
            insert_missing_articulated(mesh, parts, load_template(json.dumps(doc)))

    def test_exemplar_scaled_into_cavity(self, tmp_path):
        lib = tmp_path / "exemplars"
        root = lib / "microwave" / "turntable"
        root.mkdir(parents=True)
        va, fa = box_mesh(size=(1.0, 1.0, 1.0))
        vb, fb = box_mesh(size=(1.0, 2.0, 1.0))
        (root / "a.glb").write_bytes(write_glb([("a", va, fa)]))
        (root / "b.glb").write_bytes(write_glb([("b", vb, fb)]))

        mesh, parts = self._oven()
        tpl = load_template(json.dumps(_MICROWAVE))
        delta, joints = insert_missing_articulated(mesh, parts, tpl, library=lib,
                                                   seed=0)
        piece = delta.pieces[0]
        assert piece.provenance == "exemplar"
        ext = np.ptp(piece.vertices, axis=0)
        # 95% fit against the tightest cavity dimension, uniform scale
        fits_a = np.allclose(ext, [0.285, 0.285, 0.285], atol=1e-5)
        fits_b = np.allclose(ext, [0.1425, 0.285, 0.1425], atol=1e-5)
        assert fits_a or fits_b
        assert piece.vertices[:, 1].min() == pytest.approx(0.003, abs=1e-5)
        mid = 0.5 * (piece.vertices.min(axis=0) + piece.vertices.max(axis=0))
        assert mid[[0, 2]] == pytest.approx([0.0, 0.2], abs=1e-5)
        assert joints[0].motion == "continuous"

        again, _ = insert_missing_articulated(mesh, parts, tpl, library=lib, seed=0)
        assert np.array_equal(again.pieces[0].vertices, piece.vertices)


# ------------------------------------------------------------- apply_delta ---

class TestApplyDelta:
    def test_owner_extension_bookkeeping(self, completed):
        mesh, parts, pid, _, delta, new_mesh, new_parts = completed
        assert new_mesh.face_count == mesh.face_count + delta.face_count
        assert new_mesh.vertex_count == mesh.vertex_count + len(delta.vertices)

        old = parts[pid]
        new = new_parts[pid]
        assert len(new.faces) == len(old.faces) + delta.face_count
        assert np.array_equal(new.faces[:len(old.faces)], old.faces)
        assert len(new.samples.points) == len(old.samples.points)
        assert new.samples.seed == old.samples.seed
        # samples and the descriptor box now cover the full drawer depth
        assert np.ptp(new.samples.points[:, 2]) > 0.35
        assert float(np.max(new.box.extents)) > 0.42

        # appended faces inherit the owner's dominant material, not the body's
        appended = new_mesh.face_material[mesh.face_count:]
        assert np.all(appended == 3)
        assert np.array_equal(new_mesh.face_material[:mesh.face_count],
                              mesh.face_material)

    def test_new_parts_get_labels_joints_and_edges(self):
        mesh, labels = shell_fixture(0.8, 1.6, 0.5)
        parts = parts_from_labels(mesh, labels, {0: "body"}, sample_count=512)
        tpl = load_template(json.dumps(_WARDROBE))
        graph = build_kinematic_graph(parts, tpl)
        delta = insert_affordance_interiors(mesh, parts, tpl)

        new_mesh, new_parts, new_graph = apply_delta(mesh, parts, delta, graph,
                                                     sample_count=256)
        assert len(new_parts) == len(parts) + 5
        shelves = [p for p in new_parts if p.label_name == "shelf"]
        rails = [p for p in new_parts if p.label_name == "rail"]
        assert len(shelves) == 4 and len(rails) == 1
        assert len({p.label_id for p in shelves}) == 1
        assert rails[0].label_id != shelves[0].label_id

        for p in shelves + rails:
            assert p.instance_id == new_parts.instances.index(p)
            assert len(p.samples.points) == 256
            assert p.samples.seed == p.instance_id
            assert new_graph.parent_of[p.instance_id] == graph.root
            j = new_graph.joints[p.instance_id]
            assert j.child == p.instance_id
            assert j.motion == "fixed"
            assert j.provenance == "generated-interior"
        assert new_mesh.face_count == mesh.face_count + delta.face_count

    def test_inserted_joint_child_id_patched(self):
        mesh, labels = shell_fixture(0.5, 0.3, 0.4)
        parts = parts_from_labels(mesh, labels, {0: "body"}, sample_count=512)
        tpl = load_template(json.dumps(_MICROWAVE))
        graph = build_kinematic_graph(parts, tpl)
        delta, proposals = insert_missing_articulated(mesh, parts, tpl)
        assert proposals[0].child == -1   # unassigned until applied

        _, new_parts, new_graph = apply_delta(mesh, parts, delta, graph,
                                              sample_count=256)
        table = next(p for p in new_parts if p.label_name == "turntable")
        j = new_graph.joints[table.instance_id]
        assert j.child == table.instance_id
        assert j.motion == "continuous"
        assert j.parent == graph.root

    def test_unslotted_material_id_survives(self):
        v, f = box_vf((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
        mesh = TriMesh(v, np.asarray(f), face_material=np.full(12, -1, np.int32))
        parts = parts_from_labels(mesh, [0] * 12, {0: "body"}, sample_count=256)
        pv, pf = box_vf((0.0, 1.2, 0.0), (1.0, 1.4, 1.0))
        delta = GeometryDelta(owner=0, pieces=(
            DeltaPiece(vertices=pv, faces=np.asarray(pf), provenance="shelf"),))
        new_mesh, _, _ = apply_delta(mesh, parts, delta)
        assert np.all(new_mesh.face_material == -1)

    def test_empty_delta_is_identity(self):
        v, f = box_vf((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
        mesh = TriMesh(v, np.asarray(f))
        parts = parts_from_labels(mesh, [0] * 12, {0: "body"}, sample_count=256)
        out_mesh, out_parts, out_graph = apply_delta(
            mesh, parts, GeometryDelta(owner=None, pieces=()))
        assert out_mesh is mesh and out_parts is parts and out_graph is None
