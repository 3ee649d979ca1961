"""Metric scale, per-part volume, material lookup, and mass.

Volume strategy is picked by solidity and surface closedness:

* solid + closed  -> signed tetrahedra (divergence theorem), exact
* solid + open    -> voxel grid + exterior flood fill
* hollow          -> inward-offset shell, area x feasible thickness

Densities come from an operator-supplied table; nothing here invents
physical constants.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import ConfigInvalid, DegeneratePart, Unresolvable, ZeroExtent
from .mesh import TriMesh
from .segmentation import PartInstance, PartSet
from .templates import CategoryTemplate

SOLID = "solid"
HOLLOW = "hollow"

# hollow wall default: 2% of the smallest box extent, clamped to [2 mm, 2 cm]
WALL_FRACTION = 0.02
WALL_MIN = 0.002
WALL_MAX = 0.02

_VOXEL_RES = 64
_VOXEL_CELL_CAP = 48_000_000


@dataclass(frozen=True)
class SizeSpec:
    """Metric target for one bounding-box axis: a known dimension or a range.

    ``meters`` wins when both are given; a range is sampled uniformly with
    ``seed`` so rescaling is reproducible.
    """
    axis: int
    meters: Optional[float] = None
    range: Optional[Tuple[float, float]] = None
    seed: int = 0

    def __post_init__(self):
        if self.axis not in (0, 1, 2):
            raise ConfigInvalid(f"axis must be 0, 1 or 2, got {self.axis}")
        if self.meters is None and self.range is None:
            raise ConfigInvalid("SizeSpec needs either meters or a range")
        if self.meters is not None and self.meters <= 0:
            raise ConfigInvalid(f"dimension must be positive, got {self.meters}")
        if self.range is not None:
            lo, hi = self.range
            if not (0 < lo <= hi):
                raise ConfigInvalid(f"need 0 < min <= max, got [{lo}, {hi}]")

    def target(self) -> float:
        if self.meters is not None:
            return float(self.meters)
        lo, hi = self.range
        if lo == hi:
            return float(lo)
        return float(np.random.default_rng(self.seed).uniform(lo, hi))


def load_size_specs(text: str) -> Dict[str, SizeSpec]:
    """Parse the per-sub-category size document.

    ``{"wardrobe": {"axis": 1, "range": [1.8, 2.2]}, "microwave": {...}}``
    """
    doc = json.loads(text)
    out = {}
    for key, rec in doc.items():
        out[key] = SizeSpec(axis=int(rec["axis"]),
                            meters=rec.get("meters"),
                            range=tuple(rec["range"]) if "range" in rec else None,
                            seed=int(rec.get("seed", 0)))
    return out


@dataclass(frozen=True)
class MaterialTable:
    """Densities plus (category, part label) -> material routing.

    All four mappings are nested ``category -> label -> value`` with ``"*"``
    as the wildcard at either level.  Ships empty; tests and deployments
    inject real values.
    """
    densities: Dict[str, Tuple[float, float]]
    assignments: Dict[str, Dict[str, str]]
    solidity: Dict[str, Dict[str, str]]
    wall_thickness: Dict[str, Dict[str, float]]

    def _route(self, table, category: str, label: str):
        for cat, lab, path in ((category, label, "exact"),
                               (category, "*", "category_default"),
                               ("*", label, "global_label"),
                               ("*", "*", "global_default")):
            val = table.get(cat, {}).get(lab)
            if val is not None:
                return val, path
        return None, None

    def material_for(self, category: str, label: str):
        return self._route(self.assignments, category, label)

    def solidity_for(self, category: str, label: str) -> str:
        val, _ = self._route(self.solidity, category, label)
        return val if val in (SOLID, HOLLOW) else SOLID

    def wall_for(self, category: str, label: str) -> Optional[float]:
        val, _ = self._route(self.wall_thickness, category, label)
        return None if val is None else float(val)


def load_material_table(text: str) -> MaterialTable:
    doc = json.loads(text)
    densities = {}
    for name, rng in doc.get("densities", {}).items():
        lo, hi = float(rng[0]), float(rng[1])
        if not (0 < lo <= hi):
            raise ConfigInvalid(f"density range for {name!r}: need 0 < min <= max")
        densities[name] = (lo, hi)
    return MaterialTable(densities=densities,
                         assignments=doc.get("assignments", {}),
                         solidity=doc.get("solidity", {}),
                         wall_thickness=doc.get("wall_thickness", {}))


@dataclass(frozen=True)
class PhysicalRecord:
    part_id: int
    material: str
    density: float            # kg/m^3, the sampled value
    volume: float             # m^3
    mass: float               # kg
    solidity: str
    method: str               # closed_form | voxel_fallback | shell_offset

    def __post_init__(self):
        if min(self.density, self.volume, self.mass) <= 0:
            raise ConfigInvalid("density, volume and mass must be positive")
        if abs(self.mass - self.density * self.volume) > 1e-9 * self.mass:
            raise ConfigInvalid("mass must equal density x volume")


def apply_metric_scale(mesh: TriMesh, spec: SizeSpec) -> Tuple[TriMesh, float]:
    """Uniformly scale so the chosen axis extent hits the spec target.

    Returns the rescaled mesh (vertices now in meters, unit_scale 1.0) and
    the applied factor.
    """
    extent = float(mesh.extent()[spec.axis])
    if extent <= 0:
        raise ZeroExtent(f"mesh is flat along axis {spec.axis}")
    scale = spec.target() / extent
    return TriMesh(mesh.vertices * scale, mesh.faces, 1.0, mesh.up_axis,
                   mesh.face_material), scale


def is_closed_surface(mesh: TriMesh, faces: np.ndarray) -> bool:
    """Every directed edge used exactly once with its reverse also present.

    Index-based: duplicated (unwelded) vertices along seams read as open,
    which correctly routes such parts to the voxel fallback.
    """
    f = mesh.faces[np.asarray(faces, dtype=np.int64)]
    if len(f) == 0:
        return False
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    keys = edges[:, 0].astype(np.int64) * mesh.vertex_count + edges[:, 1]
    rev = edges[:, 1].astype(np.int64) * mesh.vertex_count + edges[:, 0]
    uniq, counts = np.unique(keys, return_counts=True)
    if counts.max() > 1:
        return False
    return bool(np.isin(rev, uniq).all())


def _signed_volume(tris: np.ndarray) -> float:
    # one tetrahedron per face against the origin; abs() forgives inward winding
    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    return abs(float(np.einsum("ij,ij->i", v0, np.cross(v1, v2)).sum()) / 6.0)


def _face_areas_normals(tris: np.ndarray):
    cr = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    areas = 0.5 * np.linalg.norm(cr, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = cr / np.where(areas[:, None] > 0, 2.0 * areas[:, None], 1.0)
    return areas, normals


def _surface_cells(tris: np.ndarray, origin: np.ndarray, h: float, shape) -> np.ndarray:
    """Boolean grid of cells touched by the surface (barycentric point seeding)."""
    grid = np.zeros(shape, dtype=bool)
    edge = np.linalg.norm(tris - np.roll(tris, 1, axis=1), axis=2).max(axis=1)
    density = np.maximum(1, np.ceil(edge / (0.5 * h)).astype(np.int64))
    for n in np.unique(density):
        batch = tris[density == n]
        ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = (ii + jj) <= n
        a = (ii[keep] / n)
        b = (jj[keep] / n)
        c = 1.0 - a - b
        pts = (a[:, None] * batch[:, None, 0] + b[:, None] * batch[:, None, 1]
               + c[:, None] * batch[:, None, 2]).reshape(-1, 3)
        idx = np.floor((pts - origin) / h).astype(np.int64)
        np.clip(idx, 0, np.asarray(shape) - 1, out=idx)
        grid[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    return grid


def _voxel_volume(tris: np.ndarray) -> float:
    flat = tris.reshape(-1, 3)
    lo, hi = flat.min(axis=0), flat.max(axis=0)
    extent = hi - lo
    h = float(extent[extent > 0].min()) / _VOXEL_RES
    while np.prod(np.ceil(extent / h) + 2) > _VOXEL_CELL_CAP:
        h *= 2.0   # elongated parts: coarsen rather than exhaust memory
    shape = tuple((np.ceil(extent / h) + 2).astype(int))
    origin = lo - 0.5 * (np.asarray(shape) * h - extent)   # center grid slack

    wall = _surface_cells(tris, origin, h, shape)
    # exterior = every open region touching the grid border
    labels, _ = ndimage.label(~wall)
    border = np.unique(np.concatenate([
        labels[0].ravel(), labels[-1].ravel(), labels[:, 0].ravel(),
        labels[:, -1].ravel(), labels[:, :, 0].ravel(), labels[:, :, -1].ravel()]))
    exterior = np.isin(labels, border[border > 0])
    interior = ~wall & ~exterior
    # wall cells straddle the surface: half in, half out on average
    return (float(interior.sum()) + 0.5 * float(wall.sum())) * h ** 3


def _shell_volume(mesh: TriMesh, part: PartInstance, wall: float) -> float:
    tris = mesh.triangles(part.faces)
    areas, normals = _face_areas_normals(tris)
    keep = areas > 0
    if not keep.any():
        raise DegeneratePart(f"part {part.instance_id} has zero surface area")
    tris, areas, normals = tris[keep], areas[keep], normals[keep]

    accel = kernels.build_accel(tris)
    centroids = tris.mean(axis=1)
    eps = 1e-6 * float(np.linalg.norm(mesh.extent()))
    origins = centroids - (eps * normals)
    t = kernels.ray_first_hits(origins, -normals, accel)
    # an opposing wall at distance t leaves t/2 of feasible inward offset
    feasible = np.where(np.isfinite(t), 0.5 * (t + eps), np.inf)
    return float(np.sum(areas * np.minimum(wall, feasible)))


def default_wall_thickness(part: PartInstance) -> float:
    return float(np.clip(WALL_FRACTION * part.box.extents.min(), WALL_MIN, WALL_MAX))


def estimate_volume(mesh: TriMesh, part: PartInstance, solidity: str = SOLID,
                    wall_thickness: Optional[float] = None) -> Tuple[float, str]:
    """Part volume in cubic model units plus the method tag used."""
    if len(part.faces) == 0:
        raise DegeneratePart(f"part {part.instance_id} has no faces")
    tris = mesh.triangles(part.faces)
    areas, _ = _face_areas_normals(tris)
    if float(areas.sum()) <= 0:
        raise DegeneratePart(f"part {part.instance_id} has zero surface area")

    closed = is_closed_surface(mesh, part.faces)
    if solidity == HOLLOW:
        wall = default_wall_thickness(part) if wall_thickness is None else wall_thickness
        shell = _shell_volume(mesh, part, wall)
        if closed:
            # face-wise sums double-count edge strips; material can never
            # exceed the space it encloses
            shell = min(shell, _signed_volume(tris))
        return shell, "shell_offset"
    if closed:
        return _signed_volume(tris), "closed_form"
    return _voxel_volume(tris), "voxel_fallback"


def assign_material(category: str, label: str, table: MaterialTable):
    """(material, density range, resolution path) via exact -> defaults chain."""
    material, path = table.material_for(category, label)
    if material is None:
        raise Unresolvable(f"no material for ({category!r}, {label!r}) "
                           "and no default anywhere")
    rng = table.densities.get(material)
    if rng is None:
        raise Unresolvable(f"material {material!r} has no density range")
    return material, rng, path


def compute_mass(volume: float, density_range: Tuple[float, float],
                 seed: int = 0) -> Tuple[float, float]:
    """Sample a density in the range and return (density, mass)."""
    lo, hi = density_range
    if volume <= 0 or not (0 < lo <= hi):
        raise ConfigInvalid("volume and density range must be positive")
    density = lo if lo == hi else float(np.random.default_rng(seed).uniform(lo, hi))
    return density, density * volume


def annotate_physics(mesh: TriMesh, parts: PartSet, category: str,
                     table: MaterialTable, seed: int = 0):
    """Full per-part pass: solidity, volume, material, seeded mass.

    The per-part seed folds the instance id into the object seed so adding a
    part never perturbs its siblings' densities.
    """
    records = []
    for part in parts:
        label = part.label_name or str(part.label_id)
        solidity = table.solidity_for(category, label)
        wall = table.wall_for(category, label)
        volume, method = estimate_volume(mesh, part, solidity, wall)
        material, rng, _ = assign_material(category, label, table)
        density, mass = compute_mass(
            volume, rng, seed=_fold_seed(seed, part.instance_id))
        records.append(PhysicalRecord(part_id=part.instance_id, material=material,
                                      density=density, volume=volume, mass=mass,
                                      solidity=solidity, method=method))
    return records


def _fold_seed(seed: int, part_id: int) -> int:
    return int(np.random.SeedSequence([seed, part_id]).generate_state(1)[0])
