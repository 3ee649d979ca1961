"""HTTP document store backing the annotation verification UI.

Serves pipeline output directories read-only (mesh, flags) and accepts
validated, versioned annotation writes.  The store never serves a document
that fails graph validation: the pipeline only exports validated documents
and every PUT is re-checked before it replaces the file on disk.

Versioning is per object id: ``version.txt`` holds a monotonically increasing
integer, a PUT must carry the version it read, and a stale version is rejected
with 409 so last-writer-wins races are impossible to hit silently.  Writes per
object are serialized with a lock; reads are unguarded (os.replace is atomic).
"""
from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import JSONResponse, Response

from .annotation import check_document, export_annotation, parse_annotation
from .errors import ForgeError
from .templates import CategoryTemplate, load_template

ANNOTATION_NAME = "annotation.json"
VERSION_NAME = "version.txt"
FLAGS_NAME = "flags.json"

# empty template: structural graph checks still apply, label/motion-type
# checks are skipped for ids with no usable template file
_PERMISSIVE = CategoryTemplate(main_category="")


def _read_version(obj_dir: Path) -> int:
    try:
        return int((obj_dir / VERSION_NAME).read_text().strip())
    except (OSError, ValueError):
        return 1


class ObjectStore:
    """Filesystem access + per-object write locks for one output directory."""

    def __init__(self, output_dir, template_dir=None):
        self.root = Path(output_dir)
        self.template_dir = Path(template_dir) if template_dir else None
        self._locks: dict = {}
        self._locks_guard = threading.Lock()

    def lock(self, object_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(object_id, threading.Lock())

    def object_dir(self, object_id: str) -> Path:
        # ids come from directory scans or URL paths; refuse separators so a
        # crafted id cannot escape the store root
        if not object_id or "/" in object_id or "\\" in object_id or object_id.startswith("."):
            raise HTTPException(status_code=404, detail=f"unknown object {object_id!r}")
        d = self.root / object_id
        if not (d / ANNOTATION_NAME).is_file():
            raise HTTPException(status_code=404, detail=f"unknown object {object_id!r}")
        return d

    def list_objects(self) -> list:
        out = []
        for d in sorted(self.root.iterdir()) if self.root.is_dir() else []:
            if not (d / ANNOTATION_NAME).is_file():
                continue
            flags = []
            try:
                flags = json.loads((d / FLAGS_NAME).read_text()).get("object", [])
            except (OSError, ValueError):
                pass
            out.append({"id": d.name, "flags": flags})
        return out

    def template_for(self, doc) -> CategoryTemplate:
        if self.template_dir is not None:
            path = self.template_dir / f"{doc.info.category[1]}.json"
            if path.is_file():
                return load_template(path.read_text())
        return _PERMISSIVE


def create_app(output_dir, template_dir=None) -> FastAPI:
    store = ObjectStore(output_dir, template_dir)
    app = FastAPI(title="artforge verification service")
    app.state.store = store

    @app.get("/objects")
    def list_objects():
        return {"objects": store.list_objects()}

    @app.get("/objects/{object_id}/annotation")
    def get_annotation(object_id: str):
        obj_dir = store.object_dir(object_id)
        payload = json.loads((obj_dir / ANNOTATION_NAME).read_text())
        return {"version": _read_version(obj_dir), "annotation": payload}

    @app.put("/objects/{object_id}/annotation")
    def put_annotation(object_id: str, payload: dict = Body(...)):
        obj_dir = store.object_dir(object_id)
        if "annotation" not in payload:
            raise HTTPException(status_code=422, detail="missing 'annotation' field")
        try:
            client_version = int(payload["version"])
        except (KeyError, TypeError, ValueError):
            raise HTTPException(status_code=422, detail="missing or non-integer 'version'")

        try:
            doc = parse_annotation(json.dumps(payload["annotation"]).encode())
        except ForgeError as exc:
            return JSONResponse(status_code=422, content={
                "errors": [{"code": type(exc).__name__, "detail": str(exc)}]})
        template = store.template_for(doc)
        report = check_document(doc, template)
        if report:
            return JSONResponse(status_code=422, content={"errors": report})

        with store.lock(object_id):
            current = _read_version(obj_dir)
            if client_version != current:
                return JSONResponse(status_code=409, content={
                    "error": "version conflict", "current": current})
            data = export_annotation(doc, template)
            tmp = obj_dir / (ANNOTATION_NAME + ".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, obj_dir / ANNOTATION_NAME)
            tmp = obj_dir / (VERSION_NAME + ".tmp")
            tmp.write_bytes(f"{current + 1}\n".encode())
            os.replace(tmp, obj_dir / VERSION_NAME)
            return {"version": current + 1}

    @app.get("/objects/{object_id}/mesh.glb")
    def get_mesh(object_id: str):
        obj_dir = store.object_dir(object_id)
        path = obj_dir / "mesh.glb"
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"no mesh for {object_id!r}")
        return Response(content=path.read_bytes(), media_type="model/gltf-binary")

    @app.get("/objects/{object_id}/flags")
    def get_flags(object_id: str):
        obj_dir = store.object_dir(object_id)
        try:
            return json.loads((obj_dir / FLAGS_NAME).read_text())
        except (OSError, ValueError):
            return {"object": [], "parts": {}}

    return app
