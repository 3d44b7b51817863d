"""Region-level structural networks.

Two edge-weight conventions over a parcellation: the max voxel-pair
weight between two regions (a lower bound on the streamline count that
avoids double counting), and a normalized variant that divides cross-
region mass by the geometric mean of within-region mass. Preprocessing
turns a weighted network into a sparse unweighted graph: strip
self-loops, row-normalize, threshold at eps, OR-symmetrize, drop
isolated nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import FormatError, Parcellation, SparseSymMatrix, format_float

__all__ = [
    "BrainNetwork",
    "BinaryNetwork",
    "build_network_max",
    "build_network_normalized",
    "preprocess",
    "threshold_weighted",
    "write_network",
    "read_network",
]


@dataclass
class BrainNetwork:
    """Weighted undirected region network (dense k x k, nonnegative)."""

    weights: np.ndarray
    sizes: np.ndarray  # voxel count per region

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weights must be a square matrix")
        if not np.array_equal(w, w.T):
            raise ValueError("weights must be symmetric")
        if w.size and w.min() < 0:
            raise ValueError("weights must be nonnegative")
        sizes = np.asarray(self.sizes, dtype=np.int64)
        if sizes.shape != (w.shape[0],):
            raise ValueError("sizes length must equal node count")
        self.weights = w
        self.sizes = sizes

    @property
    def k(self) -> int:
        return int(self.weights.shape[0])


@dataclass
class BinaryNetwork:
    """Unweighted undirected graph left by preprocessing.

    ``kept``/``removed`` record the original node indices so metrics can
    be mapped back to region ids.
    """

    adjacency: np.ndarray
    kept: np.ndarray = None
    removed: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        a = np.asarray(self.adjacency).astype(bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if a.size and np.diag(a).any():
            raise ValueError("adjacency must have a zero diagonal")
        self.adjacency = a
        if self.kept is None:
            self.kept = np.arange(a.shape[0], dtype=np.int64)
        self.kept = np.asarray(self.kept, dtype=np.int64)
        self.removed = np.asarray(self.removed, dtype=np.int64)

    @property
    def k(self) -> int:
        return int(self.adjacency.shape[0])


def _region_pairs(conn: SparseSymMatrix, p: Parcellation):
    if conn.n != p.n:
        raise ValueError(f"connectivity n={conn.n} does not match parcellation n={p.n}")
    r, c, v = conn.triples()
    lr = p.labels[r]
    lc = p.labels[c]
    keep = (lr > 0) & (lc > 0)
    return lr[keep] - 1, lc[keep] - 1, v[keep], (r == c)[keep]


def build_network_max(conn: SparseSymMatrix, p: Parcellation) -> BrainNetwork:
    """Edge weight = max voxel-pair weight between the two regions."""
    a, b, w, _ = _region_pairs(conn, p)
    weights = np.zeros((p.k, p.k))
    np.maximum.at(weights, (a, b), w)
    np.maximum.at(weights, (b, a), w)
    return BrainNetwork(weights, p.region_sizes())


def build_network_normalized(conn: SparseSymMatrix, p: Parcellation) -> BrainNetwork:
    """Edge weight = C_ij / sqrt(C_ii * C_jj) over ordered voxel-pair sums.

    C sums connection weights over ordered voxel pairs (diagonal pairs
    included as stored), so within-region mass counts both directions.
    Accumulation runs over canonical pairs and mirrors afterwards, which
    keeps C bitwise symmetric. Regions with zero internal mass get
    zero-weight edges.
    """
    a, b, w, vox_diag = _region_pairs(conn, p)
    k = p.k
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    upper = np.zeros((k, k))
    cross = a != b
    np.add.at(upper, (lo[cross], hi[cross]), w[cross])
    c = upper + upper.T
    diag = np.zeros(k)
    within = ~cross & ~vox_diag
    np.add.at(diag, a[within], 2.0 * w[within])
    np.add.at(diag, a[vox_diag], w[vox_diag])
    c[np.diag_indices(k)] = diag
    denom = np.sqrt(np.outer(diag, diag))
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = np.where(denom > 0, c / denom, 0.0)
    return BrainNetwork(weights, p.region_sizes())


def _survival_mask(weights, eps: float):
    """Symmetric edge-survival mask for the eps threshold rule.

    Row-normalizes a self-loop-free copy, keeps directed edges whose
    normalized weight is >= eps (and whose raw weight is positive, which
    matters only at eps = 0), then ORs the two directions.
    """
    a = np.array(weights, dtype=np.float64)
    np.fill_diagonal(a, 0.0)
    rows = a.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        wn = np.where(rows[:, None] > 0, a / rows[:, None], 0.0)
    d = (a > 0) & (wn >= eps)
    return d | d.T


def preprocess(net: BrainNetwork, eps: float = 0.01) -> BinaryNetwork:
    """Weighted network -> sparse unweighted graph, isolated nodes removed."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    u = _survival_mask(net.weights, eps)
    keep = u.any(axis=1)
    if not keep.any():
        raise ValueError("all nodes isolated after thresholding")
    kept = np.flatnonzero(keep)
    removed = np.flatnonzero(~keep)
    return BinaryNetwork(u[np.ix_(kept, kept)], kept=kept, removed=removed)


def threshold_weighted(net: BrainNetwork, eps: float = 0.01):
    """Zero sub-threshold edges but keep surviving weights.

    Applies the same survival rule as ``preprocess`` without binarizing;
    returns (network, removed original node indices). Used to study how
    the weighted spectrum reacts to the threshold.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    u = _survival_mask(net.weights, eps)
    a = np.array(net.weights, dtype=np.float64)
    np.fill_diagonal(a, 0.0)
    a[~u] = 0.0
    keep = a.sum(axis=1) > 0
    if not keep.any():
        raise ValueError("all nodes isolated after thresholding")
    kept = np.flatnonzero(keep)
    removed = np.flatnonzero(~keep)
    return BrainNetwork(a[np.ix_(kept, kept)], net.sizes[kept]), removed


def write_network(net: BrainNetwork, path, removed=()) -> None:
    """Serialize in the shared sparse text format plus sidecar headers."""
    removed = np.asarray(removed, dtype=np.int64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# network k={net.k}\n")
        fh.write("# sizes=" + ",".join(str(int(s)) for s in net.sizes) + "\n")
        fh.write("# removed=" + (",".join(str(int(i)) for i in removed) or "-") + "\n")
        iu = np.triu_indices(net.k)
        w = net.weights[iu]
        for i, j, x in zip(iu[0].tolist(), iu[1].tolist(), w.tolist()):
            if x != 0:
                fh.write(f"{i} {j} {format_float(x)}\n")


def read_network(path):
    """Inverse of write_network: returns (BrainNetwork, removed indices)."""
    k = None
    sizes = None
    removed = np.empty(0, dtype=np.int64)
    triples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("network k="):
                    k = int(body.split("=", 1)[1])
                elif body.startswith("sizes="):
                    text = body.split("=", 1)[1]
                    sizes = np.array(
                        [int(t) for t in text.split(",") if t], dtype=np.int64
                    )
                elif body.startswith("removed="):
                    text = body.split("=", 1)[1]
                    if text != "-":
                        removed = np.array(
                            [int(t) for t in text.split(",") if t], dtype=np.int64
                        )
                continue
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise FormatError(path, lineno, f"expected 'i j w', got {line!r}")
            triples.append((int(parts[0]), int(parts[1]), float(parts[2])))
    if k is None:
        raise FormatError(path, 0, "missing '# network k=...' header")
    if sizes is None:
        sizes = np.zeros(k, dtype=np.int64)
    weights = np.zeros((k, k))
    for i, j, w in triples:
        if not (0 <= i < k and 0 <= j < k):
            raise FormatError(path, 0, f"index ({i}, {j}) out of range for k={k}")
        weights[i, j] = w
        weights[j, i] = w
    return BrainNetwork(weights, sizes), removed
