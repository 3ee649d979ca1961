"""Label-vote aggregation, distance propagation, and part-instance clustering."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Optional

import numpy as np

from . import kernels
from .boxes import OrientedBox, select_descriptor_box
from .errors import DimensionMismatch, NoLabeledSegments, UnknownLabel
from .mesh import OverSegmentation, TriMesh, UnionFind
from .raster import IdRaster
from .sampling import PointSet, sample_surface


@dataclass(frozen=True)
class ClusteringParams:
    connect_threshold: float = 0.001  # meters; segments closer than this merge


@dataclass(frozen=True)
class PartInstance:
    instance_id: int
    label_id: int
    segment_ids: tuple
    faces: np.ndarray          # ascending int64
    box: OrientedBox
    samples: PointSet
    label_name: Optional[str] = None

    def named(self, name: str) -> "PartInstance":
        return replace(self, label_name=name)


@dataclass(frozen=True)
class PartSet:
    instances: tuple

    def __getitem__(self, instance_id: int) -> PartInstance:
        return self.instances[instance_id]

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def with_names(self, vocabulary) -> "PartSet":
        missing = sorted({p.label_id for p in self.instances} - set(vocabulary))
        if missing:
            raise UnknownLabel(f"label ids {missing} not in vocabulary")
        return PartSet(tuple(p.named(vocabulary[p.label_id]) for p in self.instances))


def aggregate_votes(pairs) -> Dict[int, Dict[int, int]]:
    """Sum pixel votes: votes[segment][label] += 1 per pixel covered in both rasters."""
    votes: Dict[int, Dict[int, int]] = {}
    for seg_r, lab_r in pairs:
        if (seg_r.width, seg_r.height) != (lab_r.width, lab_r.height):
            raise DimensionMismatch(
                f"segment raster {seg_r.width}x{seg_r.height} vs "
                f"label raster {lab_r.width}x{lab_r.height}")
        s = seg_r.data.ravel()
        l = lab_r.data.ravel()
        mask = (s >= 0) & (l >= 0)
        if not mask.any():
            continue
        keys, counts = np.unique(np.stack([s[mask], l[mask]]), axis=1, return_counts=True)
        for (seg, lab), n in zip(keys.T, counts):
            votes.setdefault(int(seg), {})
            votes[int(seg)][int(lab)] = votes[int(seg)].get(int(lab), 0) + int(n)
    return votes


def assign_semantic_labels(votes, overseg: OverSegmentation) -> Dict[int, int]:
    """Argmax label per voted segment; ties go to the smaller label id."""
    out = {}
    for seg in sorted(votes):
        table = votes[seg]
        out[seg] = min(table, key=lambda lab: (-table[lab], lab))
    return out


def _segment_accels(mesh: TriMesh, overseg: OverSegmentation):
    return [kernels.build_accel(mesh.triangles(faces)) for faces in overseg.segments]


def _seg_dist(mesh, overseg, accels, a: int, b: int, stop_below: float = 0.0) -> float:
    tris = mesh.triangles(overseg.segments[a])
    return kernels.min_dist_between(tris, accels[b], stop_below)


def propagate_unlabeled(mesh: TriMesh, overseg: OverSegmentation,
                        labels: Dict[int, int]) -> Dict[int, int]:
    """Complete a partial labeling: closest unlabeled segment inherits first.

    Resolution is sequential so freshly labeled segments become sources for
    the rest (a chain hanging off one labeled segment all inherits its label).
    Ties break toward the smaller segment id on both sides.
    """
    n = overseg.segment_count
    labeled = {s: lab for s, lab in labels.items() if 0 <= s < n}
    pending = [s for s in range(n) if s not in labeled]
    if not pending:
        return dict(labels)
    if not labeled:
        raise NoLabeledSegments("cannot propagate: no labeled segments")

    accels = _segment_accels(mesh, overseg)
    # nearest labeled source per pending segment, refreshed as segments resolve
    best = {}
    for u in pending:
        d_best, src = np.inf, -1
        for s in sorted(labeled):
            d = _seg_dist(mesh, overseg, accels, u, s)
            if d < d_best:
                d_best, src = d, s
        best[u] = (d_best, src)

    out = dict(labeled)
    while pending:
        u = min(pending, key=lambda s: (best[s][0], s))
        d, src = best[u]
        out[u] = out[src]
        pending.remove(u)
        for v in pending:
            dv = _seg_dist(mesh, overseg, accels, v, u)
            if dv < best[v][0]:
                best[v] = (dv, u)
    return out


def cluster_instances(mesh: TriMesh, overseg: OverSegmentation, labels: Dict[int, int],
                      params: ClusteringParams = ClusteringParams(),
                      sample_count: int = 2048, sample_seed: int = 0) -> PartSet:
    """Union same-label segments closer than the threshold into part instances."""
    n = overseg.segment_count
    if n == 0:
        return PartSet(())
    thr = params.connect_threshold
    stop = float(np.nextafter(thr, 0.0))  # early exit strictly below the threshold
    accels = _segment_accels(mesh, overseg)
    seg_lo = np.array([mesh.triangles(f).reshape(-1, 3).min(axis=0) for f in overseg.segments])
    seg_hi = np.array([mesh.triangles(f).reshape(-1, 3).max(axis=0) for f in overseg.segments])

    uf = UnionFind(n)
    by_label: Dict[int, list] = {}
    for s in range(n):
        by_label.setdefault(labels[s], []).append(s)
    for label in sorted(by_label):
        segs = by_label[label]
        for i, a in enumerate(segs):
            for b in segs[i + 1:]:
                gap = np.maximum(seg_lo[b] - seg_hi[a], seg_lo[a] - seg_hi[b])
                if float(np.linalg.norm(np.maximum(gap, 0.0))) >= thr:
                    continue
                if _seg_dist(mesh, overseg, accels, a, b, stop_below=stop) < thr:
                    uf.union(a, b)

    groups: Dict[int, list] = {}
    for s in range(n):
        groups.setdefault(uf.find(s), []).append(s)
    clusters = sorted(groups.values(), key=lambda segs: int(overseg.segments[segs[0]][0]))

    instances = []
    for iid, segs in enumerate(clusters):
        faces = np.sort(np.concatenate([overseg.segments[s] for s in segs]))
        instances.append(PartInstance(
            instance_id=iid,
            label_id=labels[segs[0]],
            segment_ids=tuple(segs),
            faces=faces,
            box=select_descriptor_box(mesh, faces),
            samples=sample_surface(mesh, faces, sample_count, seed=sample_seed + iid),
        ))
    return PartSet(tuple(instances))
