"""Parcellation: k-means on eigenvector rows, one-shot spectral
clustering of the similarity graph, the iterative connectivity-driven
refinement loop, and the random spatially-contiguous baseline.
"""

from __future__ import annotations

import time
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import Parcellation, Rng, SparseSymMatrix, VoxelMask
from .eigensolve import dense_sym_eig, smallest_k, sym_normalized_laplacian
from .spatial import SimilarityGraph, build_adjacency, build_similarity

__all__ = [
    "KMeansResult",
    "kmeans",
    "spectral_cluster",
    "random_parcellation",
    "adjusted_rand_index",
    "parcellation_similarity",
    "RegionCollapseError",
    "ParcellationRun",
    "parcellate_iterative",
    "discontiguous_regions",
]


@dataclass
class KMeansResult:
    labels: np.ndarray      # values in 1..k, every cluster non-empty
    centroids: np.ndarray   # (k, d)
    inertia: float          # sum of squared distances to assigned centroid
    iterations: int


def _dist2(points, centroids):
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * (points @ centroids.T)
        + (centroids * centroids).sum(axis=1)[None, :]
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def _cluster_means(points, assign, k):
    d = points.shape[1]
    sums = np.zeros((k, d))
    np.add.at(sums, assign, points)
    counts = np.bincount(assign, minlength=k)
    return sums / counts[:, None]


def kmeans(points, k: int, rng: Rng, max_iter: int = 300) -> KMeansResult:
    """Lloyd iterations from k random rows until labels are stationary.

    Nearest-centroid ties break toward the lowest centroid index; an
    empty cluster is reseeded with the point currently farthest from its
    assigned centroid (which keeps the objective non-increasing).
    """
    v = np.asarray(points, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    n, _ = v.shape
    if not np.isfinite(v).all():
        raise ValueError("non-finite input")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    centroids = v[rng.choice(n, size=k, replace=False)].copy()
    prev_assign = None
    prev_inertia = np.inf
    assign = np.zeros(n, dtype=np.int64)
    it = 0
    while it < max_iter:
        it += 1
        d2 = _dist2(v, centroids)
        assign = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(n), assign]
        counts = np.bincount(assign, minlength=k)
        for c in np.flatnonzero(counts == 0):
            cand = np.where(counts[assign] > 1, point_d2, -np.inf)
            j = int(np.argmax(cand))
            counts[assign[j]] -= 1
            assign[j] = c
            counts[c] += 1
            point_d2[j] = 0.0
            centroids[c] = v[j]
        inertia = float(point_d2.sum())
        assert inertia <= prev_inertia * (1.0 + 1e-9) + 1e-12, "objective increased"
        prev_inertia = inertia
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        prev_assign = assign
        centroids = _cluster_means(v, assign, k)
    final = _cluster_means(v, assign, k)
    inertia = float(((v - final[assign]) ** 2).sum())
    return KMeansResult(assign + 1, final, inertia, it)


def spectral_cluster(
    sim,
    k: int,
    rng: Rng,
    row_normalize: bool = True,
    n_init: int = 10,
    timings: dict | None = None,
) -> Parcellation:
    """Cluster a similarity graph into k regions.

    Builds the symmetric normalized Laplacian, takes its k smallest
    eigenvectors, maps them to random-walk eigenvectors (D^{-1/2} u),
    optionally normalizes each row to unit length, and runs k-means on
    the rows. Random-rows initialization is fragile at small k, so
    ``n_init`` restarts are drawn from ``rng`` and the lowest-inertia
    labeling wins. The graph must have no zero-degree nodes.
    """
    if isinstance(sim, SparseSymMatrix):
        sim = SimilarityGraph.from_matrix(sim)
    if sim.isolated.any():
        raise ValueError(
            f"{int(sim.isolated.sum())} zero-degree nodes; exclude them before clustering"
        )
    n = sim.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    t0 = time.perf_counter()
    lap, deg = sym_normalized_laplacian(sim.matrix)
    if k < n:
        eig = smallest_k(lap, k, rng=rng)
        u = eig.eigenvectors
    else:
        u = dense_sym_eig(lap.to_dense()).eigenvectors[:, :k]
    t1 = time.perf_counter()
    v = u / np.sqrt(deg)[:, None]
    if row_normalize:
        norms = np.linalg.norm(v, axis=1)
        ok = norms > 0
        v[ok] /= norms[ok, None]
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    result = kmeans(v, k, rng)
    for _ in range(n_init - 1):
        trial = kmeans(v, k, rng)
        if trial.inertia < result.inertia:
            result = trial
    t2 = time.perf_counter()
    if timings is not None:
        timings["eigensolve"] = timings.get("eigensolve", 0.0) + (t1 - t0)
        timings["kmeans"] = timings.get("kmeans", 0.0) + (t2 - t1)
    return Parcellation(result.labels, k)


def _neighbor_lists(n, edges):
    nbrs = [[] for _ in range(n)]
    for a, b in edges.tolist():
        nbrs[a].append(b)
        nbrs[b].append(a)
    return nbrs


def random_parcellation(mask: VoxelMask, k: int, rng: Rng, r: float = 2.0) -> Parcellation:
    """Grow k regions from random seeds by round-robin breadth-first search.

    Each region claims one frontier voxel per turn, which yields
    spatially contiguous regions of comparable size. Mask components
    that contain no seed are attached to the nearest seed (lowest seed
    index on ties) and reported with a warning.
    """
    n = len(mask)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    edges = build_adjacency(mask, r)
    nbrs = _neighbor_lists(n, edges)
    labels = np.zeros(n, dtype=np.int64)
    seeds = np.asarray(rng.choice(n, size=k, replace=False))
    queues = []
    for c, s in enumerate(seeds.tolist(), start=1):
        labels[s] = c
        queues.append(deque(nbrs[s]))
    active = deque(range(k))
    while active:
        c = active.popleft()
        q = queues[c]
        while q:
            u = q.popleft()
            if labels[u] == 0:
                labels[u] = c + 1
                q.extend(nbrs[u])
                active.append(c)
                break
    if (labels == 0).any():
        _attach_leftover_components(mask, labels, seeds, nbrs)
    return Parcellation(labels, k)


def _attach_leftover_components(mask, labels, seeds, nbrs):
    coords = mask.voxels.astype(np.float64)
    seed_xyz = coords[seeds]
    n_extra = 0
    for start in np.flatnonzero(labels == 0).tolist():
        if labels[start] != 0:
            continue
        comp = [start]
        labels[start] = -1
        stack = [start]
        while stack:
            u = stack.pop()
            for w in nbrs[u]:
                if labels[w] == 0:
                    labels[w] = -1
                    comp.append(w)
                    stack.append(w)
        d = np.linalg.norm(coords[comp][:, None, :] - seed_xyz[None, :, :], axis=2)
        best = int(np.argmin(d.min(axis=0)))
        labels[comp] = best + 1
        n_extra += 1
    warnings.warn(
        f"{n_extra} mask component(s) without a seed attached to the nearest seed region",
        RuntimeWarning,
        stacklevel=3,
    )


def adjusted_rand_index(a, b) -> float:
    """ARI between two labelings of the same items (1 = identical)."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.size != b.size or a.size == 0:
        raise ValueError("labelings must be non-empty and equally long")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    na = int(ai.max()) + 1
    nb = int(bi.max()) + 1
    cont = np.bincount(ai * nb + bi, minlength=na * nb).reshape(na, nb)

    def comb2(x):
        x = x.astype(np.float64)
        return x * (x - 1.0) / 2.0

    sum_ij = comb2(cont).sum()
    sum_a = comb2(cont.sum(axis=1)).sum()
    sum_b = comb2(cont.sum(axis=0)).sum()
    total = a.size * (a.size - 1) / 2.0
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def parcellation_similarity(p1: Parcellation, p2: Parcellation) -> float:
    """ARI over the labeled voxels; excluded sets must coincide."""
    if p1.n != p2.n:
        raise ValueError(f"size mismatch: {p1.n} vs {p2.n}")
    if not np.array_equal(p1.excluded, p2.excluded):
        raise ValueError("excluded voxel sets differ")
    keep = ~p1.excluded
    if not keep.any():
        raise ValueError("no labeled voxels")
    return adjusted_rand_index(p1.labels[keep], p2.labels[keep])


class RegionCollapseError(RuntimeError):
    """Refinement could no longer sustain k regions."""

    def __init__(self, round_number: int, message: str):
        super().__init__(message)
        self.round_number = round_number


@dataclass
class ParcellationRun:
    parcellation: Parcellation
    round_similarity: list      # ARI of each round's result vs the previous one
    stage_seconds: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return len(self.round_similarity)


def parcellate_iterative(
    mask: VoxelMask,
    conn: SparseSymMatrix,
    k: int,
    init: Parcellation,
    rng: Rng,
    sim_threshold: float = 0.9,
    max_rounds: int = 10,
    r: float = 2.0,
    row_normalize: bool = True,
) -> ParcellationRun:
    """Iterate profile -> similarity graph -> spectral clustering.

    Each round recomputes connectivity profiles against the previous
    parcellation, rebuilds the similarity graph, reclusters, and stops
    once the ARI between consecutive parcellations reaches
    ``sim_threshold`` (or after ``max_rounds``). Voxels isolated in the
    similarity graph are excluded (label 0) for that round; the round
    ARI is computed over voxels labeled in both rounds.
    """
    if init.n != conn.n or init.n != len(mask):
        raise ValueError("mask, connectivity and initial parcellation sizes differ")
    if init.k < 2:
        raise ValueError("initial segmentation needs at least 2 regions")
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    timers: dict = {}
    prev = init
    log: list = []
    for rnd in range(1, max_rounds + 1):
        t0 = time.perf_counter()
        sim = build_similarity(mask, conn, prev, r=r)
        timers["similarity"] = timers.get("similarity", 0.0) + (time.perf_counter() - t0)
        survivors = ~sim.isolated
        m = int(survivors.sum())
        if m < k:
            raise RegionCollapseError(
                rnd, f"round {rnd}: only {m} connected voxels left for k={k} regions"
            )
        if survivors.all():
            sub = sim
        else:
            sub = SimilarityGraph.from_matrix(sim.matrix.submatrix(survivors))
        part = spectral_cluster(sub, k, rng, row_normalize=row_normalize, timings=timers)
        labels = np.zeros(len(mask), dtype=np.int64)
        labels[survivors] = part.labels
        cur = Parcellation(labels, k)
        both = (prev.labels > 0) & (labels > 0)
        ari = adjusted_rand_index(prev.labels[both], labels[both]) if both.any() else 0.0
        log.append(ari)
        prev = cur
        if ari >= sim_threshold:
            break
    return ParcellationRun(prev, log, timers)


def discontiguous_regions(p: Parcellation, mask: VoxelMask, r: float = 2.0):
    """Labels of regions that are not connected under spatial adjacency."""
    if p.n != len(mask):
        raise ValueError("parcellation does not match mask")
    edges = build_adjacency(mask, r)
    nbrs = _neighbor_lists(len(mask), edges)
    bad = []
    for label in range(1, p.k + 1):
        members = p.members(label)
        inside = np.zeros(p.n, dtype=bool)
        inside[members] = True
        seen = {int(members[0])}
        stack = [int(members[0])]
        while stack:
            u = stack.pop()
            for w in nbrs[u]:
                if inside[w] and w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != members.size:
            bad.append(label)
    return bad
