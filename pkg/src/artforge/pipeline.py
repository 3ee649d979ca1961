"""Batch orchestration: segment -> complete -> articulate -> physics -> export.

Inputs are laid out as::

    mesh_dir/<id>.glb|.obj
    raster_dir/<id>/meta.json     {"category", "labels": {label_id: name}, ...}
    raster_dir/<id>/views.json    camera specs (raster.ViewSpec list)
    raster_dir/<id>/<view>.irast  per-view part-label rasters
    template_dir/<category>.json

Each object lands in ``output_dir/<id>/`` (annotation.json, model.urdf,
meshes/, mesh.glb, flags.json), staged in a scratch directory and renamed into
place so a killed run never leaves a half-written object.  Failures are
recorded in the manifest and never abort the batch.  Wall-clock numbers go to
a separate timings.json so the manifest itself is a pure function of config
plus inputs.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .annotation import ObjectInfo, build_annotation, export_annotation
from .articulation import (PRISMATIC, JointProposal, SweepParams, infer_joints)
from .errors import ConfigInvalid, ForgeError, NoCavity, NoGenerator
from .interior import (PlacementConfig, apply_delta, complete_translational_part,
                       insert_affordance_interiors, insert_missing_articulated)
from .mesh import TriMesh, oversegment
from .meshio import load_mesh, write_glb
from .physics import (MaterialTable, annotate_physics, apply_metric_scale,
                      load_material_table, load_size_specs)
from .raster import load_views, read_id_raster, render_segment_ids
from .segmentation import (ClusteringParams, assign_semantic_labels,
                           aggregate_votes, cluster_instances, propagate_unlabeled)
from .templates import CategoryTemplate, load_template
from .urdf import export_urdf

STAGES = ("segment", "complete", "articulate", "physics", "export")

_UUID_NS = uuid.uuid5(uuid.NAMESPACE_URL, "artforge-object")


@dataclass(frozen=True)
class PipelineConfig:
    mesh_dir: Path
    raster_dir: Path
    template_dir: Path
    output_dir: Path
    material_table: Optional[Path] = None
    size_specs: Optional[Path] = None
    exemplar_library: Optional[Path] = None
    stages: Tuple[str, ...] = STAGES
    seed: int = 0
    clustering: ClusteringParams = ClusteringParams()
    sweep: SweepParams = SweepParams()
    placement: PlacementConfig = PlacementConfig()
    retention: float = 0.9
    sample_count: int = 8192
    workers: int = 4

    def snapshot(self) -> dict:
        """Parameter snapshot for the manifest (paths excluded: not parameters)."""
        return {
            "stages": list(self.stages), "seed": self.seed,
            "clustering": asdict(self.clustering), "sweep": asdict(self.sweep),
            "placement": asdict(self.placement), "retention": self.retention,
            "sample_count": self.sample_count,
        }


def load_config(text: str, base: Path = Path(".")) -> PipelineConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigInvalid(f"config is not JSON: {e}") from None
    paths = doc.get("paths", {})

    def path_of(key, required=False):
        if key not in paths or paths[key] is None:
            if required:
                raise ConfigInvalid(f"config paths.{key} is required")
            return None
        return (base / paths[key]).resolve()

    stages_doc = doc.get("stages", {})
    unknown = set(stages_doc) - set(STAGES)
    if unknown:
        raise ConfigInvalid(f"unknown stages {sorted(unknown)}")
    stages = tuple(s for s in STAGES if stages_doc.get(s, True))

    over = doc.get("overrides", {})
    try:
        cfg = PipelineConfig(
            mesh_dir=path_of("mesh_dir", required=True),
            raster_dir=path_of("raster_dir", required=True),
            template_dir=path_of("template_dir", required=True),
            output_dir=path_of("output_dir", required=True),
            material_table=path_of("material_table"),
            size_specs=path_of("size_specs"),
            exemplar_library=path_of("exemplar_library"),
            stages=stages,
            seed=int(doc.get("seed", 0)),
            clustering=ClusteringParams(**over.get("clustering", {})),
            sweep=SweepParams(**over.get("sweep", {})),
            placement=PlacementConfig(**over.get("placement", {})),
            retention=float(over.get("retention", 0.9)),
            sample_count=int(over.get("sample_count", 8192)),
            workers=int(doc.get("workers", 4)),
        )
    except (TypeError, ValueError) as e:
        raise ConfigInvalid(f"bad config value: {e}") from None
    for name in ("mesh_dir", "raster_dir", "template_dir"):
        p = getattr(cfg, name)
        if not p.is_dir():
            raise ConfigInvalid(f"{name} does not exist: {p}")
    for name in ("material_table", "size_specs"):
        p = getattr(cfg, name)
        if p is not None and not p.is_file():
            raise ConfigInvalid(f"{name} does not exist: {p}")
    if cfg.exemplar_library is not None and not cfg.exemplar_library.is_dir():
        raise ConfigInvalid(f"exemplar_library does not exist: {cfg.exemplar_library}")
    return cfg


def object_uuid(source_dataset: str, object_id: str) -> str:
    return str(uuid.uuid5(_UUID_NS, f"{source_dataset}/{object_id}"))


def object_seed(global_seed: int, object_id: str) -> int:
    digest = hashlib.sha256(f"{global_seed}:{object_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


@dataclass
class ObjectState:
    object_id: str
    category: str
    meta: dict
    mesh: TriMesh
    template: CategoryTemplate
    seed: int
    parts: object = None               # PartSet after segmentation
    graph: object = None               # KinematicGraph after articulation
    physical: Optional[dict] = None
    preset_joints: Dict[int, JointProposal] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)


def _load_object(cfg: PipelineConfig, object_id: str) -> ObjectState:
    mesh_path = next((p for p in (cfg.mesh_dir / f"{object_id}{ext}"
                                  for ext in (".glb", ".obj")) if p.exists()), None)
    if mesh_path is None:
        raise ConfigInvalid(f"no mesh for object {object_id!r} under {cfg.mesh_dir}")
    mesh = load_mesh(mesh_path.read_bytes(), mesh_path.suffix[1:])
    meta = json.loads((cfg.raster_dir / object_id / "meta.json").read_text())
    category = meta["category"]
    template = load_template((cfg.template_dir / f"{category}.json").read_text())
    state = ObjectState(object_id=object_id, category=category, meta=meta,
                        mesh=mesh, template=template,
                        seed=object_seed(cfg.seed, object_id))
    if cfg.size_specs is not None:
        specs = load_size_specs(cfg.size_specs.read_text())
        spec = specs.get(meta.get("sub_category", category), specs.get(category))
        if spec is not None:
            # metric scale first: later geometric stages assume meters
            state.mesh, _ = apply_metric_scale(
                mesh, replace(spec, seed=state.seed))
    return state


def stage_segment(state: ObjectState, cfg: PipelineConfig) -> None:
    overseg = oversegment(state.mesh)
    obj_dir = cfg.raster_dir / state.object_id
    views = load_views((obj_dir / "views.json").read_text())
    pairs = []
    for view in views:
        blob = (obj_dir / f"{view.view_id}.irast").read_bytes()
        pairs.append((render_segment_ids(state.mesh, overseg, view),
                      read_id_raster(blob)))
    labels = assign_semantic_labels(aggregate_votes(pairs), overseg)
    labels = propagate_unlabeled(state.mesh, overseg, labels)
    parts = cluster_instances(state.mesh, overseg, labels, cfg.clustering,
                              sample_count=cfg.sample_count, sample_seed=state.seed)
    vocabulary = {int(k): v for k, v in state.meta["labels"].items()}
    state.parts = parts.with_names(vocabulary)


def stage_complete(state: ObjectState, cfg: PipelineConfig) -> None:
    pre = infer_joints(state.mesh, state.parts, state.template, cfg.sweep,
                       sweep=False)
    pc = cfg.placement
    for pid in sorted(pre.joints):
        joint = pre.joints[pid]
        if joint.motion != PRISMATIC or joint.axis is None:
            continue
        try:
            delta = complete_translational_part(
                state.mesh, state.parts, pid, joint,
                panel_thickness=pc.panel_thickness, clearance=pc.clearance,
                grid=pc.grid)
        except NoCavity as e:
            state.flags.append(f"NoCavity:{pid}:{e}")
            continue
        state.mesh, state.parts, _ = apply_delta(
            state.mesh, state.parts, delta, sample_count=cfg.sample_count)

    try:
        delta = insert_affordance_interiors(state.mesh, state.parts,
                                            state.template, pc)
        state.mesh, state.parts, _ = apply_delta(
            state.mesh, state.parts, delta, sample_count=cfg.sample_count)
    except (NoCavity, ForgeError) as e:
        state.flags.append(f"{type(e).__name__}:affordance:{e}")

    try:
        delta, joints = insert_missing_articulated(
            state.mesh, state.parts, state.template,
            library=cfg.exemplar_library, seed=state.seed, config=pc)
        before = {p.instance_id for p in state.parts}
        state.mesh, state.parts, _ = apply_delta(
            state.mesh, state.parts, delta, sample_count=cfg.sample_count)
        new_ids = [p.instance_id for p in state.parts
                   if p.instance_id not in before]
        for pid, piece in zip(new_ids, delta.pieces):
            if piece.joint is not None:
                state.preset_joints[pid] = replace(piece.joint, child=pid)
    except (NoCavity, NoGenerator) as e:
        state.flags.append(f"{type(e).__name__}:articulated:{e}")


def stage_articulate(state: ObjectState, cfg: PipelineConfig) -> None:
    graph = infer_joints(state.mesh, state.parts, state.template, cfg.sweep,
                         retention=cfg.retention)
    # generated parts ship with authoritative joints; contact inference
    # would see their placement clearance as detachment
    for pid, joint in state.preset_joints.items():
        graph.parent_of[pid] = joint.parent
        graph.joints[pid] = joint
    state.graph = graph
    for pid in sorted(graph.joints):
        for fl in graph.joints[pid].flags:
            state.flags.append(f"{fl}:{pid}")


def stage_physics(state: ObjectState, cfg: PipelineConfig) -> None:
    if cfg.material_table is None:
        raise ConfigInvalid("physics stage needs paths.material_table")
    table = load_material_table(cfg.material_table.read_text())
    records = annotate_physics(state.mesh, state.parts, state.category, table,
                               seed=state.seed)
    state.physical = {r.part_id: r for r in records}


def _fallback_graph(state: ObjectState):
    """Topology without sweeps, for exporting objects whose articulate stage
    was disabled or failed."""
    return infer_joints(state.mesh, state.parts, state.template,
                        SweepParams(), sweep=False)


def stage_export(state: ObjectState, cfg: PipelineConfig, target: Path) -> None:
    graph = state.graph if state.graph is not None else _fallback_graph(state)
    lo = state.mesh.vertices.min(axis=0)
    hi = state.mesh.vertices.max(axis=0)
    info = ObjectInfo(
        uuid=object_uuid(state.meta.get("source_dataset", ""), state.object_id),
        source_dataset=state.meta.get("source_dataset", ""),
        source_model=state.meta.get("source_model", state.object_id),
        category=(state.meta.get("super_category", ""), state.category,
                  state.meta.get("sub_category", state.category)),
        unit_scale=state.mesh.unit_scale, up_axis=state.mesh.up_axis,
        front_axis=state.meta.get("front_axis", "+Z"),
        bounds=(tuple(lo), tuple(hi)))
    affordances = {e.name: e.affordance for e in state.template.entries}
    doc = build_annotation(info, state.parts, graph, state.physical, affordances)

    target.mkdir(parents=True, exist_ok=True)
    _atomic_write(target / "annotation.json", export_annotation(doc, state.template))
    urdf_bytes, meshfiles = export_urdf(doc, state.parts, state.mesh)
    _atomic_write(target / "model.urdf", urdf_bytes)
    for rel, data in sorted(meshfiles.items()):
        path = target / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(path, data)
    glb = write_glb([(f"{p.label_name}_{p.instance_id}",
                      *_submesh(state.mesh, p.faces)) for p in state.parts])
    _atomic_write(target / "mesh.glb", glb)
    part_flags = {str(pid): list(graph.joints[pid].flags)
                  for pid in sorted(graph.joints)}
    flags_doc = {"object": sorted(state.flags), "parts": part_flags}
    _atomic_write(target / "flags.json",
                  (json.dumps(flags_doc, sort_keys=True, indent=2) + "\n").encode())
    _atomic_write(target / "version.txt", b"1\n")


def _submesh(mesh: TriMesh, faces):
    sub = mesh.faces[np.asarray(faces, dtype=np.int64)]
    used, local = np.unique(sub, return_inverse=True)
    return mesh.vertices[used], local.reshape(-1, 3).astype(np.int32)


def discover_objects(cfg: PipelineConfig) -> List[str]:
    ids = sorted(p.stem for p in cfg.mesh_dir.iterdir()
                 if p.suffix in (".glb", ".obj"))
    if not ids:
        raise ConfigInvalid(f"no meshes under {cfg.mesh_dir}")
    return ids


def process_object(cfg: PipelineConfig, object_id: str) -> Tuple[dict, dict]:
    """Run the enabled stages for one object; returns (outcomes, timings)."""
    outcomes = {s: "skipped" for s in STAGES}
    timings: Dict[str, float] = {}
    scratch = cfg.output_dir / ".scratch" / object_id
    final = cfg.output_dir / object_id
    flags: List[str] = []

    def run(stage, state, fn, *args):
        before = len(state.flags)
        t0 = time.perf_counter()
        try:
            fn(state, *args)
        except Exception:
            outcomes[stage] = "error"
            raise
        finally:
            timings[stage] = round(time.perf_counter() - t0, 3)
        outcomes[stage] = ("flagged-for-verification"
                           if len(state.flags) > before else "ok")

    try:
        state = _load_object(cfg, object_id)
        flags = state.flags
        if "segment" in cfg.stages:
            run("segment", state, stage_segment, cfg)
        if state.parts is not None:
            if "complete" in cfg.stages:
                run("complete", state, stage_complete, cfg)
            if "articulate" in cfg.stages:
                run("articulate", state, stage_articulate, cfg)
            if "physics" in cfg.stages:
                run("physics", state, stage_physics, cfg)
            if "export" in cfg.stages:
                shutil.rmtree(scratch, ignore_errors=True)
                run("export", state, stage_export, cfg, scratch)
                shutil.rmtree(final, ignore_errors=True)
                final.parent.mkdir(parents=True, exist_ok=True)
                os.replace(scratch, final)
        return ({"stages": outcomes, "flags": sorted(state.flags), "error": None},
                timings)
    except Exception as e:           # record, never abort the batch
        shutil.rmtree(scratch, ignore_errors=True)
        return ({"stages": outcomes, "flags": sorted(flags),
                 "error": f"{type(e).__name__}: {e}"}, timings)


def run_pipeline(cfg: PipelineConfig, only: Optional[List[str]] = None) -> dict:
    """Process every discovered object (or the ``only`` subset); returns the manifest."""
    ids = discover_objects(cfg)
    if only is not None:
        missing = sorted(set(only) - set(ids))
        if missing:
            raise ConfigInvalid(f"unknown object ids {missing}")
        ids = sorted(set(only))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    results: Dict[str, Tuple[dict, dict]] = {}
    if cfg.workers > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {oid: pool.submit(process_object, cfg, oid) for oid in ids}
            results = {oid: f.result() for oid, f in futures.items()}
    else:
        results = {oid: process_object(cfg, oid) for oid in ids}

    manifest = {
        "tool": f"artforge {__version__}",
        "parameters": cfg.snapshot(),
        "objects": {oid: results[oid][0] for oid in ids},
    }
    timings = {oid: results[oid][1] for oid in ids}
    shutil.rmtree(cfg.output_dir / ".scratch", ignore_errors=True)
    _atomic_write(cfg.output_dir / "manifest.json",
                  (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode())
    _atomic_write(cfg.output_dir / "timings.json",
                  (json.dumps(timings, sort_keys=True, indent=2) + "\n").encode())
    return manifest
