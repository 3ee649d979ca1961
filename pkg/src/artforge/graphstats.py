"""Kinematic-graph signatures, diversity statistics, and near-duplicate scan.

A signature flattens the labeled tree into a canonical string: children are
ordered by their own signatures, so isomorphic graphs collide regardless of
how part ids were assigned.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from collections import Counter
from typing import Dict, Iterable, List, Mapping, Tuple

import numpy as np

from .articulation import FIXED, KinematicGraph
from .errors import DimensionMismatch, EmptyInput, MalformedFile, ZeroVector

EMB_MAGIC = b"EMB"


def graph_signature(graph: KinematicGraph, labels: Mapping[int, str]) -> str:
    """``label[motion](child,child,...)`` recursively; the root omits motion."""
    def rec(nid: int) -> str:
        inner = ",".join(sorted(rec(c) for c in graph.children_of(nid)))
        if nid == graph.root:
            return f"{labels[nid]}({inner})"
        joint = graph.joints.get(nid)
        motion = joint.motion if joint is not None else FIXED
        return f"{labels[nid]}[{motion}]({inner})"
    return rec(graph.root)


def signature_of_document(doc) -> str:
    return graph_signature(doc.to_graph(), doc.labels())


def dataset_graph_stats(signatures: Iterable[str]) -> dict:
    """Distribution stats: unique count, Shannon entropy (nats), perplexity."""
    counts = Counter(signatures)
    n = sum(counts.values())
    if n == 0:
        raise EmptyInput("no signatures")
    # fsum: exactly rounded, so input order cannot wiggle the last ulp
    entropy = -math.fsum((c / n) * math.log(c / n) for c in counts.values())
    return {"count": n, "unique": len(counts), "entropy_nats": entropy,
            "perplexity": math.exp(entropy)}


def find_near_duplicates(vectors: Mapping, threshold: float = 0.99
                         ) -> List[Tuple[object, object, float]]:
    """Unordered id pairs with cosine similarity above the threshold.

    Output is sorted by similarity descending (ties by id pair) and agrees
    with a direct O(n^2) scan — the matrix product below *is* that scan.
    """
    ids = sorted(vectors)
    if not ids:
        return []
    rows = [np.asarray(vectors[i], dtype=np.float64).ravel() for i in ids]
    dims = {r.size for r in rows}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed embedding sizes: {sorted(dims)}")
    mat = np.asarray(rows)
    norms = np.linalg.norm(mat, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ZeroVector(f"zero embedding for ids {[ids[i] for i in zero]}")
    unit = mat / norms[:, None]
    sims = unit @ unit.T
    ia, ib = np.triu_indices(len(ids), k=1)
    keep = sims[ia, ib] > threshold
    pairs = [(ids[a], ids[b], float(sims[a, b]))
             for a, b in zip(ia[keep], ib[keep])]
    return sorted(pairs, key=lambda p: (-p[2], str(p[0]), str(p[1])))


# --- embedding ingestion -------------------------------------------------------

def write_embeddings(matrix: np.ndarray) -> bytes:
    mat = np.ascontiguousarray(matrix, dtype="<f4")
    header = f"EMB {mat.shape[0]} {mat.shape[1]}\n".encode("ascii")
    return header + mat.tobytes()


def read_embeddings(data: bytes) -> Dict[object, np.ndarray]:
    """Binary ``EMB <count> <dim>`` + LE float32, or CSV ``id,x0,x1,...``."""
    if data[:3] == EMB_MAGIC:
        nl = data.find(b"\n")
        if nl < 0:
            raise MalformedFile("embedding header has no newline")
        fields = data[:nl].split()
        if len(fields) != 3:
            raise MalformedFile(f"bad embedding header {data[:nl]!r}")
        count, dim = int(fields[1]), int(fields[2])
        body = data[nl + 1:]
        expect = count * dim * 4
        if len(body) < expect:
            raise MalformedFile(f"embedding payload truncated: {len(body)} < {expect}")
        mat = np.frombuffer(body[:expect], dtype="<f4").reshape(count, dim)
        return {i: mat[i].astype(np.float64) for i in range(count)}
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise MalformedFile("embeddings are neither EMB binary nor text CSV") from None
    out = {}
    for row in csv.reader(io.StringIO(text)):
        if not row:
            continue
        out[row[0]] = np.array([float(x) for x in row[1:]], dtype=np.float64)
    if not out:
        raise MalformedFile("no rows in embedding CSV")
    return out


# --- stats emission ------------------------------------------------------------

def stats_to_json(stats: dict) -> str:
    import json
    return json.dumps(stats, sort_keys=True, indent=2) + "\n"


def stats_to_csv(stats: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["metric", "value"])
    for key in sorted(stats):
        w.writerow([key, stats[key]])
    return buf.getvalue()
