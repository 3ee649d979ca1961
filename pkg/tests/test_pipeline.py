"""Batch runs over the on-disk corpus: config, manifest, outputs, determinism.

The corpus (conftest) holds a completable cabinet, a trivial stool, and a
deliberately corrupt GLB; a run must finish all three, record the failure,
and produce byte-reproducible outputs for the rest.
"""
import json
import uuid as uuid_mod

import pytest

from artforge import __version__
from artforge.annotation import parse_annotation
from artforge.errors import ConfigInvalid
from artforge.pipeline import (STAGES, discover_objects, load_config,
                               object_seed, object_uuid, run_pipeline)

from test_urdf import UrdfModel


class TestLoadConfig:
    def test_corpus_config(self, corpus):
        cfg = load_config((corpus / "config.json").read_text(), corpus)
        assert cfg.mesh_dir == (corpus / "meshes").resolve()
        assert cfg.output_dir == (corpus / "out").resolve()
        assert cfg.stages == STAGES
        assert cfg.seed == 7 and cfg.workers == 2
        assert cfg.clustering.connect_threshold == 0.001
        assert cfg.retention == 0.9

    def test_not_json(self):
        with pytest.raises(ConfigInvalid, match="not JSON"):
            load_config("{nope")

    def test_missing_required_path(self):
        with pytest.raises(ConfigInvalid, match="paths.mesh_dir"):
            load_config(json.dumps({"paths": {}}))

    def test_unknown_stage(self, corpus):
        doc = json.loads((corpus / "config.json").read_text())
        doc["stages"] = {"polish": True}
        with pytest.raises(ConfigInvalid, match="unknown stages"):
            load_config(json.dumps(doc), corpus)

    def test_stage_toggle_preserves_order(self, corpus):
        doc = json.loads((corpus / "config.json").read_text())
        doc["stages"] = {"physics": False, "export": False}
        cfg = load_config(json.dumps(doc), corpus)
        assert cfg.stages == ("segment", "complete", "articulate")

    def test_missing_directory(self, corpus):
        doc = json.loads((corpus / "config.json").read_text())
        doc["paths"]["mesh_dir"] = "no_such_dir"
        with pytest.raises(ConfigInvalid, match="mesh_dir does not exist"):
            load_config(json.dumps(doc), corpus)

    def test_missing_material_file(self, corpus):
        doc = json.loads((corpus / "config.json").read_text())
        doc["paths"]["material_table"] = "gone.json"
        with pytest.raises(ConfigInvalid, match="material_table does not exist"):
            load_config(json.dumps(doc), corpus)

    def test_bad_override_key(self, corpus):
        doc = json.loads((corpus / "config.json").read_text())
        doc["overrides"] = {"clustering": {"bogus_knob": 1}}
        with pytest.raises(ConfigInvalid, match="bad config value"):
            load_config(json.dumps(doc), corpus)

    def test_non_numeric_seed(self, corpus):
        doc = json.loads((corpus / "config.json").read_text())
        doc["seed"] = "lucky"
        with pytest.raises(ConfigInvalid, match="bad config value"):
            load_config(json.dumps(doc), corpus)


class TestIdentity:
    def test_object_uuid_stable_and_distinct(self):
        a = object_uuid("fixtures", "cab01")
        assert a == object_uuid("fixtures", "cab01")
        assert a != object_uuid("fixtures", "cab02")
        assert a != object_uuid("other", "cab01")
        assert uuid_mod.UUID(a).version == 5

    def test_object_seed_stable_and_bounded(self):
        s = object_seed(7, "cab01")
        assert s == object_seed(7, "cab01")
        assert s != object_seed(7, "stool01")
        assert s != object_seed(8, "cab01")
        assert 0 <= s < 2 ** 63


class TestManifest:
    def test_every_object_accounted(self, first_run):
        manifest, _ = first_run
        assert set(manifest["objects"]) == {"cab01", "stool01", "broken01"}
        for oid in ("cab01", "stool01"):
            rec = manifest["objects"][oid]
            assert rec["error"] is None
            assert all(rec["stages"][s] in ("ok", "flagged-for-verification")
                       for s in STAGES)

    def test_broken_object_recorded_not_fatal(self, first_run):
        manifest, out = first_run
        rec = manifest["objects"]["broken01"]
        assert rec["error"].startswith("MalformedFile")
        assert all(v == "skipped" for v in rec["stages"].values())
        assert not (out / "broken01").exists()

    def test_tool_and_parameters(self, first_run):
        manifest, _ = first_run
        assert manifest["tool"] == f"artforge {__version__}"
        params = manifest["parameters"]
        assert params["seed"] == 7
        assert params["clustering"]["connect_threshold"] == 0.001
        assert params["sample_count"] == 8192
        assert "output_dir" not in json.dumps(params)

    def test_timings_split_from_manifest(self, first_run):
        manifest, out = first_run
        assert "timings" not in json.dumps(manifest)
        timings = json.loads((out / "timings.json").read_text())
        assert set(timings) == set(manifest["objects"])
        assert all(t >= 0 for t in timings["cab01"].values())
        assert not timings["broken01"]          # failed before any stage ran


class TestOutputs:
    def test_output_tree_layout(self, first_run):
        _, out = first_run
        for oid in ("cab01", "stool01"):
            d = out / oid
            for name in ("annotation.json", "model.urdf", "mesh.glb",
                         "flags.json", "version.txt"):
                assert (d / name).is_file(), f"{oid}/{name}"
            assert list((d / "meshes").glob("*.obj"))
        assert (out / "manifest.json").is_file()
        assert not (out / ".scratch").exists()

    def test_cabinet_annotation(self, first_run):
        _, out = first_run
        doc = parse_annotation((out / "cab01" / "annotation.json").read_bytes())
        assert doc.info.uuid == object_uuid("fixtures", "cab01")
        assert doc.info.category == ("furniture", "cabinet", "cabinet")
        labels = sorted(doc.labels().values())
        assert labels == ["body", "drawer"]

        drawer = next(p for p in doc.parts if p.label == "drawer")
        assert drawer.joint.motion == "prismatic"
        lo, hi = drawer.joint.limits["translation"]
        assert lo == 0.0                        # non-recessing template rule
        assert 0.3 < hi < 0.45
        assert drawer.material == "wood"
        assert drawer.mass == pytest.approx(drawer.density * drawer.volume)

    def test_urdf_consumable(self, first_run):
        _, out = first_run
        for oid in ("cab01", "stool01"):
            doc = parse_annotation((out / oid / "annotation.json").read_bytes())
            model = UrdfModel.parse((out / oid / "model.urdf").read_bytes())
            assert model.validate() == []
            assert len(model.links) == len(doc.parts)       # no multi-DoF here
            assert len(model.joints) == len(doc.parts) - 1
            for link in model.links.values():
                rel = link["visual_mesh"]
                assert rel and (out / oid / rel).is_file()

    def test_flags_and_version_files(self, first_run):
        _, out = first_run
        flags = json.loads((out / "cab01" / "flags.json").read_text())
        assert set(flags) == {"object", "parts"}
        assert flags["object"] == sorted(flags["object"])
        assert all(isinstance(v, list) for v in flags["parts"].values())
        assert (out / "cab01" / "version.txt").read_bytes() == b"1\n"


def _tree(root):
    return {str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestDeterminism:
    def test_trees_byte_identical(self, first_run, second_run):
        _, out_a = first_run
        _, out_b = second_run
        ta, tb = _tree(out_a), _tree(out_b)
        ta.pop("timings.json")                  # wall clock, excluded by design
        tb.pop("timings.json")
        assert sorted(ta) == sorted(tb)
        for rel in ta:
            assert ta[rel] == tb[rel], f"{rel} differs between identical runs"

    def test_manifests_equal(self, first_run, second_run):
        assert first_run[0] == second_run[0]


class TestSelection:
    def test_only_subset(self, corpus):
        doc = json.loads((corpus / "config.json").read_text())
        doc["paths"]["output_dir"] = "out_only"
        cfg = load_config(json.dumps(doc), corpus)
        manifest = run_pipeline(cfg, only=["stool01"])
        assert set(manifest["objects"]) == {"stool01"}
        assert manifest["objects"]["stool01"]["error"] is None
        assert (corpus / "out_only" / "stool01").is_dir()
        assert not (corpus / "out_only" / "cab01").exists()

    def test_only_unknown_id(self, corpus):
        cfg = load_config((corpus / "config.json").read_text(), corpus)
        with pytest.raises(ConfigInvalid, match="unknown object ids"):
            run_pipeline(cfg, only=["ghost99"])

    def test_disabled_stages_skip_outputs(self, corpus):
        doc = json.loads((corpus / "config.json").read_text())
        doc["paths"]["output_dir"] = "out_partial"
        doc["stages"] = {"physics": False, "export": False}
        cfg = load_config(json.dumps(doc), corpus)
        manifest = run_pipeline(cfg, only=["stool01"])
        rec = manifest["objects"]["stool01"]
        assert rec["stages"]["segment"] == "ok"
        assert rec["stages"]["physics"] == "skipped"
        assert rec["stages"]["export"] == "skipped"
        assert not (corpus / "out_partial" / "stool01").exists()

    def test_empty_mesh_dir(self, corpus, tmp_path):
        (tmp_path / "meshes").mkdir()
        doc = json.loads((corpus / "config.json").read_text())
        cfg = load_config(json.dumps(doc), corpus)
        import dataclasses
        cfg = dataclasses.replace(cfg, mesh_dir=tmp_path / "meshes")
        with pytest.raises(ConfigInvalid, match="no meshes"):
            discover_objects(cfg)
