"""Spatial adjacency, connectivity profiles, and the similarity graph.

Voxels are linked when their lattice coordinates lie within a Euclidean
radius (default 2, giving at most 32 neighbors). Each voxel's
connectivity profile sums its connection weights into the regions of a
reference parcellation; spatial edges are then weighted by the Pearson
correlation of the endpoint profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

from .core import Parcellation, SparseSymMatrix, VoxelMask

__all__ = [
    "neighbor_offsets",
    "build_adjacency",
    "compute_profiles",
    "pearson",
    "SimilarityGraph",
    "build_similarity",
]


def neighbor_offsets(r: float = 2.0):
    """Integer offsets (dx, dy, dz) with 0 < |d|^2 <= r^2, sorted.

    For r = 2 there are exactly 32 of them; the list is closed under
    negation and excludes the origin.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    rad = int(math.floor(r))
    out = []
    for dx in range(-rad, rad + 1):
        for dy in range(-rad, rad + 1):
            for dz in range(-rad, rad + 1):
                q = dx * dx + dy * dy + dz * dz
                if 0 < q <= r * r:
                    out.append((dx, dy, dz))
    return np.array(sorted(out), dtype=np.int64).reshape(-1, 3)


def _half_offsets(offsets):
    # one representative per +/- pair: first nonzero component positive
    d = offsets
    pos = (d[:, 0] > 0) | ((d[:, 0] == 0) & (d[:, 1] > 0)) | (
        (d[:, 0] == 0) & (d[:, 1] == 0) & (d[:, 2] > 0)
    )
    return d[pos]


def _offset_pairs(mask: VoxelMask, offsets):
    """Dense-index pairs (i, j) one per unordered spatial neighbor pair."""
    grid = mask.grid
    dims = np.array(mask.dims, dtype=np.int64)
    v = mask.voxels
    out_i, out_j = [], []
    for off in _half_offsets(offsets):
        q = v + off
        valid = ((q >= 0) & (q < dims)).all(axis=1)
        if not valid.any():
            continue
        j = grid[q[valid, 0], q[valid, 1], q[valid, 2]]
        keep = j >= 0
        if not keep.any():
            continue
        out_i.append(np.flatnonzero(valid)[keep])
        out_j.append(j[keep])
    if not out_i:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(out_i), np.concatenate(out_j)


def build_adjacency(mask: VoxelMask, r: float = 2.0):
    """Undirected spatial edge list as an (m, 2) array with i < j."""
    i, j = _offset_pairs(mask, neighbor_offsets(r))
    a = np.minimum(i, j)
    b = np.maximum(i, j)
    order = np.lexsort((b, a))
    return np.column_stack([a[order], b[order]])


def compute_profiles(conn: SparseSymMatrix, p: Parcellation):
    """Per-voxel region profile matrix of shape (n, k).

    Entry (v, t) is the total connection weight from voxel v into region
    t+1. Contributions from excluded voxels are dropped, and excluded
    voxels get all-zero profiles of their own.
    """
    if conn.n != p.n:
        raise ValueError(f"connectivity n={conn.n} does not match parcellation n={p.n}")
    labeled = np.flatnonzero(p.labels > 0)
    indicator = sp.csr_matrix(
        (np.ones(labeled.size), (labeled, p.labels[labeled] - 1)),
        shape=(p.n, p.k),
    )
    profiles = np.asarray(conn.matmat(indicator).todense())
    profiles[p.labels == 0] = 0.0
    return profiles


def pearson(a, b) -> float:
    """Pearson correlation; 0 when either argument has zero variance."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("need vectors of length >= 2")
    ac = a - a.mean()
    bc = b - b.mean()
    sa = float(ac @ ac)
    sb = float(bc @ bc)
    if sa <= 0.0 or sb <= 0.0:
        return 0.0
    r = float(ac @ bc) / math.sqrt(sa * sb)
    return min(1.0, max(-1.0, r))


@dataclass
class SimilarityGraph:
    """Voxel similarity graph plus bookkeeping needed by clustering.

    ``isolated`` marks voxels with no surviving edge; ``n_components``
    counts connected components among the non-isolated voxels.
    """

    matrix: SparseSymMatrix
    isolated: np.ndarray
    n_components: int

    @property
    def n(self) -> int:
        return self.matrix.n

    @classmethod
    def from_matrix(cls, m: SparseSymMatrix) -> "SimilarityGraph":
        r, c, _ = m.triples()
        touched = np.zeros(m.n, dtype=bool)
        touched[r] = True
        touched[c] = True
        n_all, _ = _cc(m._csr, directed=False)
        n_isolated = int((~touched).sum())
        return cls(m, ~touched, n_all - n_isolated)


def _standardized_rows(profiles):
    x = profiles - profiles.mean(axis=1, keepdims=True)
    norms = np.sqrt((x * x).sum(axis=1))
    z = np.zeros_like(x)
    ok = norms > 0
    z[ok] = x[ok] / norms[ok, None]
    return z


def build_similarity(
    mask: VoxelMask,
    conn: SparseSymMatrix,
    profile_parcellation: Parcellation,
    r: float = 2.0,
    negative_mode: str = "clamp",
) -> SimilarityGraph:
    """Spatial graph weighted by profile correlations.

    ``negative_mode`` controls what happens to non-positive
    correlations: "clamp" (default) drops them, "shift" maps r to
    (r+1)/2, "abs" takes |r|. Zero-weight edges are always dropped, so
    voxels whose every edge dies come back flagged as isolated.
    """
    if conn.n != len(mask):
        raise ValueError(f"connectivity n={conn.n} does not match mask n={len(mask)}")
    profiles = compute_profiles(conn, profile_parcellation)
    edges = build_adjacency(mask, r)
    z = _standardized_rows(profiles)
    if edges.shape[0]:
        w = np.einsum("ij,ij->i", z[edges[:, 0]], z[edges[:, 1]])
        np.clip(w, -1.0, 1.0, out=w)
    else:
        w = np.empty(0)
    if negative_mode == "clamp":
        pass
    elif negative_mode == "shift":
        w = 0.5 * (w + 1.0)
    elif negative_mode == "abs":
        w = np.abs(w)
    else:
        raise ValueError(f"unknown negative_mode {negative_mode!r}")
    keep = w > 0
    m = SparseSymMatrix(len(mask), edges[keep, 0], edges[keep, 1], w[keep])
    return SimilarityGraph.from_matrix(m)
