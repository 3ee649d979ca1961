"""Shared fixtures.

The expensive pieces — joint inference on the door/drawer fixtures and the
on-disk pipeline corpus — are session-scoped so module tests and the
acceptance suite share one computation.
"""
import json

import numpy as np
import pytest

from artforge.articulation import SweepParams, infer_joints
from artforge.mesh import TriMesh, oversegment
from artforge.meshio import load_mesh, write_glb
from artforge.raster import (IdRaster, dump_views, render_segment_ids,
                             turntable_views, write_id_raster)
from artforge.segmentation import ClusteringParams, cluster_instances
from artforge.templates import load_template

from shapes import (box_vf, door_fixture, drawer_fixture, panel_drawer_fixture,
                    stack)

DOOR_TEMPLATE = {"main_category": "door_unit", "content": [
    {"name": "body", "gloss": "frame",
     "kinematic": {"articulatable": False, "link_dependency": [], "joint_type": []}},
    {"name": "door", "gloss": "swing door",
     "kinematic": {"articulatable": True, "link_dependency": ["body"],
                   "joint_type": ["revolute"]}}]}

CABINET_TEMPLATE = {"main_category": "cabinet", "content": [
    {"name": "body", "gloss": "carcass",
     "kinematic": {"articulatable": False, "link_dependency": [], "joint_type": []}},
    {"name": "drawer", "gloss": "sliding drawer",
     "kinematic": {"articulatable": True, "link_dependency": ["body"],
                   "joint_type": ["prismatic"], "non_recessing": True}}]}

STOOL_TEMPLATE = {"main_category": "stool", "content": [
    {"name": "body", "gloss": "base",
     "kinematic": {"articulatable": False, "link_dependency": [], "joint_type": []}},
    {"name": "seat", "gloss": "seat slab",
     "kinematic": {"articulatable": False, "link_dependency": ["body"],
                   "joint_type": []}}]}


def parts_from_labels(mesh, labels, vocab, sample_count=8192, seed=0):
    """Segment + cluster a fixture whose per-face labels are ground truth."""
    seg = oversegment(mesh)
    seg_labels = {s: labels[faces[0]] for s, faces in enumerate(seg.segments)}
    ps = cluster_instances(mesh, seg, seg_labels, ClusteringParams(0.001),
                           sample_count=sample_count, sample_seed=seed)
    return ps.with_names(vocab)


class ArticulationCase:
    def __init__(self, mesh, parts, template, graph, mover_label):
        self.mesh = mesh
        self.parts = parts
        self.template = template
        self.graph = graph
        self.mover = next(p for p in parts if p.label_name == mover_label)
        self.joint = graph.joints[self.mover.instance_id]


@pytest.fixture(scope="session")
def door_case():
    mesh, labels = door_fixture()
    parts = parts_from_labels(mesh, labels, {0: "body", 1: "door"})
    template = load_template(json.dumps(DOOR_TEMPLATE))
    graph = infer_joints(mesh, parts, template, SweepParams())
    return ArticulationCase(mesh, parts, template, graph, "door")


@pytest.fixture(scope="session")
def drawer_case():
    mesh, labels = drawer_fixture()
    parts = parts_from_labels(mesh, labels, {0: "body", 1: "drawer"})
    template = load_template(json.dumps(CABINET_TEMPLATE))
    graph = infer_joints(mesh, parts, template, SweepParams())
    return ArticulationCase(mesh, parts, template, graph, "drawer")


def _emit_object(root, oid, mesh, labels, category, vocab, n_views=6):
    blob = write_glb([("whole", mesh.vertices, mesh.faces)])
    (root / "meshes" / f"{oid}.glb").write_bytes(blob)
    # rasters must target the mesh as the loader normalizes it (recentered)
    mesh = load_mesh(blob, "glb")
    assert mesh.face_count == len(labels)
    odir = root / "rasters" / oid
    odir.mkdir()
    views = turntable_views(mesh, count_azimuth=n_views, elevations_deg=(25.0,),
                            width=320, height=320)
    (odir / "views.json").write_text(dump_views(views))
    seg = oversegment(mesh)
    seg_label = np.array([labels[fs[0]] for fs in seg.segments], np.int32)
    for v in views:
        sr = render_segment_ids(mesh, seg, v)
        data = np.where(sr.data >= 0, seg_label[np.clip(sr.data, 0, None)], -1)
        (odir / f"{v.view_id}.irast").write_bytes(
            write_id_raster(IdRaster(sr.width, sr.height, data)))
    (odir / "meta.json").write_text(json.dumps({
        "category": category, "sub_category": category,
        "super_category": "furniture", "source_dataset": "fixtures",
        "source_model": oid, "labels": {str(k): v for k, v in vocab.items()}}))


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Three-object input tree: completable cabinet, trivial stool, broken file."""
    root = tmp_path_factory.mktemp("corpus")
    for d in ("meshes", "rasters", "templates"):
        (root / d).mkdir()

    mesh, labels = panel_drawer_fixture()
    _emit_object(root, "cab01", mesh, labels, "cabinet", {0: "body", 1: "drawer"})

    v, f, labels = stack([(0, box_vf((-0.2, 0.0, -0.2), (0.2, 0.35, 0.2))),
                          (1, box_vf((-0.22, 0.35, -0.22), (0.22, 0.40, 0.22)))])
    _emit_object(root, "stool01", TriMesh(v, f), labels, "stool",
                 {0: "body", 1: "seat"})

    (root / "meshes" / "broken01.glb").write_bytes(b"glTF garbage not a real file")
    bdir = root / "rasters" / "broken01"
    bdir.mkdir()
    (bdir / "meta.json").write_text(json.dumps(
        {"category": "stool", "labels": {"0": "body"}}))
    (bdir / "views.json").write_text("[]")

    (root / "templates" / "cabinet.json").write_text(json.dumps(CABINET_TEMPLATE))
    (root / "templates" / "stool.json").write_text(json.dumps(STOOL_TEMPLATE))
    (root / "materials.json").write_text(json.dumps({
        "densities": {"wood": [400, 700], "steel": [7700, 7900]},
        "assignments": {"*": {"*": "wood"}},
        "solidity": {"cabinet": {"body": "hollow"}}}))
    (root / "config.json").write_text(json.dumps({
        "paths": {"mesh_dir": "meshes", "raster_dir": "rasters",
                  "template_dir": "templates", "material_table": "materials.json",
                  "output_dir": "out"},
        "seed": 7,
        "overrides": {"clustering": {"connect_threshold": 0.001},
                      "sample_count": 8192},
        "workers": 2}))
    return root


@pytest.fixture(scope="session")
def first_run(corpus):
    """Manifest + output dir of one full pipeline run over the corpus."""
    from artforge.pipeline import load_config, run_pipeline

    cfg = load_config((corpus / "config.json").read_text(), corpus)
    manifest = run_pipeline(cfg)
    return manifest, corpus / "out"


@pytest.fixture(scope="session")
def second_run(corpus):
    """Same corpus and seed, separate output dir: the reproducibility pair."""
    from artforge.pipeline import load_config, run_pipeline

    doc = json.loads((corpus / "config.json").read_text())
    doc["paths"]["output_dir"] = "out2"
    manifest = run_pipeline(load_config(json.dumps(doc), corpus))
    return manifest, corpus / "out2"
