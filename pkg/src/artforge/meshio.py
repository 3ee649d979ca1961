"""Mesh file ingestion and emission: glTF binary (GLB) and Wavefront OBJ.

Readers flatten the scene into a single indexed triangle mesh (transforms
applied, sub-meshes merged, recentered, +Y up). Writers are deterministic:
the same arrays always produce the same bytes.
"""

from __future__ import annotations

import base64
import json
import struct

import numpy as np

from .errors import EmptyGeometry, MalformedFile, NonTriangulatable
from .mesh import TriMesh

_GLB_MAGIC = 0x46546C67
_CHUNK_JSON = 0x4E4F534A
_CHUNK_BIN = 0x004E4942

_COMPONENT_DTYPES = {
    5120: np.int8, 5121: np.uint8, 5122: np.int16,
    5123: np.uint16, 5125: np.uint32, 5126: np.float32,
}
_TYPE_WIDTH = {"SCALAR": 1, "VEC2": 2, "VEC3": 3, "VEC4": 4, "MAT4": 16}


def load_mesh(document: bytes, format: str) -> TriMesh:
    """Parse GLB or OBJ bytes into a merged, recentered, +Y-up TriMesh."""
    fmt = format.strip().upper()
    if fmt == "GLB":
        verts, faces, mats = _parse_glb(document)
    elif fmt == "OBJ":
        verts, faces, mats = _parse_obj(document)
    else:
        raise MalformedFile(f"unknown mesh format {format!r}")

    if len(faces) == 0:
        raise EmptyGeometry("no faces in input")
    keep = ((faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2])
            & (faces[:, 0] != faces[:, 2]))
    faces = faces[keep]
    mats = mats[keep]
    if len(faces) == 0:
        raise EmptyGeometry("all faces degenerate")
    if faces.min() < 0 or faces.max() >= len(verts):
        raise MalformedFile("face index out of range")

    verts = verts - (verts.min(axis=0) + verts.max(axis=0)) * 0.5
    return TriMesh(vertices=verts, faces=faces.astype(np.int32),
                   face_material=mats.astype(np.int32))


# --- GLB ---

def _parse_glb(data: bytes):
    if len(data) < 12:
        raise MalformedFile("GLB shorter than header")
    magic, version, length = struct.unpack_from("<III", data, 0)
    if magic != _GLB_MAGIC:
        raise MalformedFile("bad GLB magic")
    if version != 2:
        raise MalformedFile(f"unsupported glTF version {version}")

    gltf = None
    bin_chunk = b""
    off = 12
    while off + 8 <= min(length, len(data)):
        clen, ctype = struct.unpack_from("<II", data, off)
        off += 8
        chunk = data[off:off + clen]
        if len(chunk) < clen:
            raise MalformedFile("truncated GLB chunk")
        off += clen
        if ctype == _CHUNK_JSON:
            try:
                gltf = json.loads(chunk.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise MalformedFile(f"bad GLB JSON chunk: {exc}") from exc
        elif ctype == _CHUNK_BIN:
            bin_chunk = chunk
    if gltf is None:
        raise MalformedFile("GLB missing JSON chunk")
    return _flatten_gltf(gltf, bin_chunk)


def _buffer_bytes(gltf, index, bin_chunk):
    try:
        buf = gltf["buffers"][index]
    except (KeyError, IndexError) as exc:
        raise MalformedFile(f"missing buffer {index}") from exc
    uri = buf.get("uri")
    if uri is None:
        return bin_chunk
    if uri.startswith("data:"):
        try:
            return base64.b64decode(uri.split(",", 1)[1])
        except Exception as exc:
            raise MalformedFile("bad data: URI in buffer") from exc
    raise MalformedFile("external buffer URIs are not supported")


def _read_accessor(gltf, index, bin_chunk):
    try:
        acc = gltf["accessors"][index]
    except (KeyError, IndexError) as exc:
        raise MalformedFile(f"missing accessor {index}") from exc
    if "sparse" in acc:
        raise MalformedFile("sparse accessors are not supported")
    dtype = _COMPONENT_DTYPES.get(acc.get("componentType"))
    width = _TYPE_WIDTH.get(acc.get("type"))
    if dtype is None or width is None:
        raise MalformedFile(f"accessor {index}: unsupported layout")
    count = int(acc.get("count", 0))
    if "bufferView" not in acc:
        return np.zeros((count, width), dtype=dtype)
    view = gltf["bufferViews"][acc["bufferView"]]
    raw = _buffer_bytes(gltf, view.get("buffer", 0), bin_chunk)
    base = view.get("byteOffset", 0) + acc.get("byteOffset", 0)
    itemsize = np.dtype(dtype).itemsize
    natural = itemsize * width
    stride = view.get("byteStride", natural) or natural
    need = base + stride * (count - 1) + natural if count else base
    if need > len(raw):
        raise MalformedFile(f"accessor {index} overruns its buffer")
    if stride == natural:
        out = np.frombuffer(raw, dtype=dtype, count=count * width, offset=base)
        return out.reshape(count, width)
    rows = np.frombuffer(raw, dtype=np.uint8, count=stride * count, offset=base)
    rows = rows.reshape(count, stride)[:, :natural].copy()
    return rows.view(dtype).reshape(count, width)


def _node_matrix(node):
    if "matrix" in node:
        return np.array(node["matrix"], dtype=np.float64).reshape(4, 4).T
    m = np.eye(4)
    if "rotation" in node:
        x, y, z, w = node["rotation"]
        m[:3, :3] = np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ])
    if "scale" in node:
        m[:3, :3] = m[:3, :3] * np.asarray(node["scale"], dtype=np.float64)
    if "translation" in node:
        m[:3, 3] = node["translation"]
    return m


def _flatten_gltf(gltf, bin_chunk):
    nodes = gltf.get("nodes", [])
    meshes = gltf.get("meshes", [])
    scenes = gltf.get("scenes", [])
    if scenes:
        roots = scenes[gltf.get("scene", 0)].get("nodes", [])
    else:
        roots = list(range(len(nodes)))

    all_v, all_f, all_m = [], [], []
    offset = 0
    stack = [(i, np.eye(4)) for i in reversed(roots)]
    visited = set()
    while stack:
        idx, parent = stack.pop()
        if idx in visited:
            raise MalformedFile("node cycle in scene graph")
        visited.add(idx)
        try:
            node = nodes[idx]
        except IndexError as exc:
            raise MalformedFile(f"missing node {idx}") from exc
        world = parent @ _node_matrix(node)
        for child in reversed(node.get("children", [])):
            stack.append((child, world))
        if "mesh" not in node:
            continue
        try:
            mesh = meshes[node["mesh"]]
        except IndexError as exc:
            raise MalformedFile(f"missing mesh {node['mesh']}") from exc
        for prim in mesh.get("primitives", []):
            mode = prim.get("mode", 4)
            if mode != 4:
                raise NonTriangulatable(f"primitive mode {mode}")
            attrs = prim.get("attributes", {})
            if "POSITION" not in attrs:
                raise MalformedFile("primitive without POSITION")
            pos = _read_accessor(gltf, attrs["POSITION"], bin_chunk).astype(np.float64)
            if pos.shape[1] != 3:
                raise MalformedFile("POSITION is not VEC3")
            if "indices" in prim:
                idxs = _read_accessor(gltf, prim["indices"], bin_chunk).reshape(-1)
                if len(idxs) % 3:
                    raise NonTriangulatable("index count not a multiple of 3")
                tris = idxs.reshape(-1, 3).astype(np.int64)
            else:
                if len(pos) % 3:
                    raise NonTriangulatable("vertex count not a multiple of 3")
                tris = np.arange(len(pos), dtype=np.int64).reshape(-1, 3)
            world_pos = pos @ world[:3, :3].T + world[:3, 3]
            if np.linalg.det(world[:3, :3]) < 0:
                tris = tris[:, ::-1]
            all_v.append(world_pos)
            all_f.append(tris + offset)
            all_m.append(np.full(len(tris), prim.get("material", -1), np.int64))
            offset += len(pos)

    if not all_v:
        raise EmptyGeometry("scene contains no mesh geometry")
    return (np.concatenate(all_v), np.concatenate(all_f), np.concatenate(all_m))


# --- OBJ ---

def _parse_obj(data: bytes):
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedFile("OBJ is not valid UTF-8") from exc

    verts, faces, mats = [], [], []
    material_ids = {}
    current_mat = -1
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if head == "v":
            if len(rest) < 3:
                raise MalformedFile(f"OBJ line {lineno}: short vertex")
            try:
                verts.append([float(rest[0]), float(rest[1]), float(rest[2])])
            except ValueError as exc:
                raise MalformedFile(f"OBJ line {lineno}: bad number") from exc
        elif head == "usemtl":
            name = rest[0] if rest else ""
            current_mat = material_ids.setdefault(name, len(material_ids))
        elif head == "f":
            if len(rest) < 3:
                raise MalformedFile(f"OBJ line {lineno}: face with <3 vertices")
            idx = []
            for field in rest:
                tok = field.split("/")[0]
                try:
                    i = int(tok)
                except ValueError as exc:
                    raise MalformedFile(f"OBJ line {lineno}: bad index {tok!r}") from exc
                idx.append(i - 1 if i > 0 else len(verts) + i)
            for k in range(1, len(idx) - 1):  # fan triangulation
                faces.append((idx[0], idx[k], idx[k + 1]))
                mats.append(current_mat)

    if not verts:
        raise EmptyGeometry("OBJ contains no vertices")
    return (np.asarray(verts, dtype=np.float64),
            np.asarray(faces, dtype=np.int64).reshape(-1, 3),
            np.asarray(mats, dtype=np.int64))


# --- writers ---

def _pad(buf: bytearray, align: int, fill: bytes) -> None:
    while len(buf) % align:
        buf.extend(fill)


def write_glb(parts) -> bytes:
    """Serialize named sub-meshes as a GLB with one node+mesh per part.

    parts: sequence of (name, vertices (V,3), faces (F,3)). Output bytes are
    a pure function of the inputs (fixed generator string, sorted JSON keys).
    """
    bin_buf = bytearray()
    views, accessors, meshes, nodes = [], [], [], []
    for name, verts, faces in parts:
        v32 = np.ascontiguousarray(verts, dtype=np.float32)
        f32 = np.ascontiguousarray(faces, dtype=np.uint32)
        _pad(bin_buf, 4, b"\x00")
        voff = len(bin_buf)
        bin_buf.extend(v32.tobytes())
        views.append({"buffer": 0, "byteOffset": voff, "byteLength": v32.nbytes,
                      "target": 34962})
        accessors.append({
            "bufferView": len(views) - 1, "componentType": 5126, "count": len(v32),
            "type": "VEC3",
            "min": [float(x) for x in v32.min(axis=0)] if len(v32) else [0.0, 0.0, 0.0],
            "max": [float(x) for x in v32.max(axis=0)] if len(v32) else [0.0, 0.0, 0.0],
        })
        pos_acc = len(accessors) - 1
        _pad(bin_buf, 4, b"\x00")
        ioff = len(bin_buf)
        bin_buf.extend(f32.tobytes())
        views.append({"buffer": 0, "byteOffset": ioff, "byteLength": f32.nbytes,
                      "target": 34963})
        accessors.append({"bufferView": len(views) - 1, "componentType": 5125,
                          "count": f32.size, "type": "SCALAR"})
        meshes.append({"name": name, "primitives": [
            {"attributes": {"POSITION": pos_acc}, "indices": len(accessors) - 1,
             "mode": 4}]})
        nodes.append({"mesh": len(meshes) - 1, "name": name})

    _pad(bin_buf, 4, b"\x00")
    gltf = {
        "asset": {"generator": "artforge", "version": "2.0"},
        "buffers": [{"byteLength": len(bin_buf)}],
        "bufferViews": views,
        "accessors": accessors,
        "meshes": meshes,
        "nodes": nodes,
        "scenes": [{"nodes": list(range(len(nodes)))}],
        "scene": 0,
    }
    payload = bytearray(json.dumps(gltf, sort_keys=True, separators=(",", ":")).encode())
    _pad(payload, 4, b" ")

    total = 12 + 8 + len(payload) + 8 + len(bin_buf)
    out = bytearray()
    out.extend(struct.pack("<III", _GLB_MAGIC, 2, total))
    out.extend(struct.pack("<II", len(payload), _CHUNK_JSON))
    out.extend(payload)
    out.extend(struct.pack("<II", len(bin_buf), _CHUNK_BIN))
    out.extend(bin_buf)
    return bytes(out)


def write_obj(vertices, faces) -> str:
    lines = []
    for v in np.asarray(vertices, dtype=np.float64):
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for f in np.asarray(faces):
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    return "\n".join(lines) + "\n"
