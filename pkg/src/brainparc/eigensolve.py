"""Symmetric eigensolvers.

``dense_sym_eig`` wraps LAPACK for full spectra of small dense
matrices. ``smallest_k`` finds the k smallest eigenpairs of a sparse
symmetric normalized Laplacian with an implicitly restarted Krylov
method that only touches the matrix through matvec: because the
spectrum lives in [0, 2], the shift 2I - L turns "smallest" into
"largest", where such methods converge fastest, without any factorized
shift-invert step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .core import Rng, SparseSymMatrix

__all__ = [
    "EigResult",
    "ConvergenceError",
    "dense_sym_eig",
    "smallest_k",
    "sym_normalized_laplacian",
]


class ConvergenceError(RuntimeError):
    """Iterative solve failed; carries the residual norms reached."""

    def __init__(self, message, residual_norms=None):
        super().__init__(message)
        self.residual_norms = residual_norms


@dataclass
class EigResult:
    eigenvalues: np.ndarray    # ascending
    eigenvectors: np.ndarray   # one unit-norm column per eigenvalue
    residual_norms: np.ndarray


def _fix_signs(vectors):
    # deterministic orientation: largest-magnitude component positive
    idx = np.argmax(np.abs(vectors), axis=0)
    flip = vectors[idx, np.arange(vectors.shape[1])] < 0
    out = vectors.copy()
    out[:, flip] *= -1.0
    return out


def dense_sym_eig(a, sym_tol: float = 1e-10) -> EigResult:
    """Full spectrum of a dense symmetric matrix (ascending)."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    asym = float(np.abs(a - a.T).max()) if a.size else 0.0
    if asym > sym_tol:
        raise ValueError(f"matrix asymmetry {asym:.3e} exceeds tolerance {sym_tol:.1e}")
    s = 0.5 * (a + a.T)
    vals, vecs = np.linalg.eigh(s)
    vecs = _fix_signs(vecs)
    res = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
    return EigResult(vals, vecs, res)


def sym_normalized_laplacian(w: SparseSymMatrix):
    """(I - D^{-1/2} W D^{-1/2}, degrees) for a nonnegative weight matrix.

    Shares its spectrum with the random-walk form I - D^{-1}W; random-walk
    eigenvectors are recovered as D^{-1/2} u. A zero-degree row is a hard
    error: callers must exclude isolated nodes first.
    """
    deg = w.degrees()
    if (deg <= 0).any():
        i = int(np.flatnonzero(deg <= 0)[0])
        raise ValueError(f"zero-degree node {i}; exclude isolated nodes first")
    s = 1.0 / np.sqrt(deg)
    r, c, v = w.triples()
    off = r != c
    diag = np.ones(w.n)
    dg = ~off
    if dg.any():
        diag[r[dg]] -= v[dg] * s[r[dg]] ** 2
    rows = np.concatenate([np.arange(w.n), r[off]])
    cols = np.concatenate([np.arange(w.n), c[off]])
    vals = np.concatenate([diag, -(v[off] * s[r[off]] * s[c[off]])])
    keep = vals != 0
    return SparseSymMatrix(w.n, rows[keep], cols[keep], vals[keep]), deg


def _component_order(lap: SparseSymMatrix):
    """Connected components of the off-diagonal pattern, in order of
    their smallest member index (deterministic merge order)."""
    import scipy.sparse as sp
    from scipy.sparse.csgraph import connected_components

    r, c, v = lap.triples()
    off = (r != c) & (v != 0)
    pattern = sp.csr_matrix(
        (np.ones(int(off.sum())), (r[off], c[off])), shape=(lap.n, lap.n)
    )
    n_comp, labels = connected_components(pattern, directed=False)
    groups = [np.flatnonzero(labels == i) for i in range(n_comp)]
    groups.sort(key=lambda g: int(g[0]))
    return groups


def _component_smallest(sub: SparseSymMatrix, m: int, max_iter: int, rng: Rng):
    """m smallest eigenpairs of one connected diagonal block.

    Small blocks (or full-spectrum requests) go dense; large blocks use
    restarted Lanczos on the shifted operator 2I - L, where the sought
    eigenvalues are largest. Within a connected block the 0 eigenvalue
    is simple, so the single-vector iteration cannot skip multiplicity.
    """
    nc = sub.n
    if nc <= max(4 * m, 64) or m >= nc - 1:
        res = dense_sym_eig(sub.to_dense())
        return res.eigenvalues[:m], res.eigenvectors[:, :m]
    v0 = rng.standard_normal(nc)
    ncv = min(nc, max(2 * m + 1, 40))
    shifted = LinearOperator(
        (nc, nc), matvec=lambda x: 2.0 * x - sub.matvec(x), dtype=np.float64
    )
    try:
        mu, u = eigsh(shifted, k=m, which="LA", v0=v0, ncv=ncv, maxiter=max_iter, tol=0)
    except ArpackNoConvergence as exc:
        raise ConvergenceError(f"no convergence within {max_iter} restarts: {exc}") from exc
    vals = 2.0 - mu
    order = np.argsort(vals, kind="stable")
    return vals[order], u[:, order]


def smallest_k(
    lap: SparseSymMatrix,
    k: int,
    tol: float = 1e-8,
    max_iter: int = 1000,
    rng: Rng | None = None,
) -> EigResult:
    """k smallest eigenpairs of a normalized Laplacian, matvec access only.

    The matrix is split along its connected components (where the zero
    eigenvalue is simple, so a disconnected graph's multiplicity-c zero
    cannot be missed); each block is solved by restarted Lanczos on the
    shifted operator 2I - L seeded from ``rng``, or densely when small,
    and the union of block spectra is merged. Raises ConvergenceError
    when any residual ||L v - lambda v|| exceeds ``tol``.
    """
    n = lap.n
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if rng is None:
        rng = Rng(0)
    all_vals = []
    all_vecs = []
    for comp in _component_order(lap):
        m = min(k, comp.size)
        if comp.size == n:
            vals, vecs_local = _component_smallest(lap, m, max_iter, rng)
            vecs = vecs_local
        else:
            vals, vecs_local = _component_smallest(lap.submatrix(comp), m, max_iter, rng)
            vecs = np.zeros((n, m))
            vecs[comp] = vecs_local
        all_vals.append(vals)
        all_vecs.append(vecs)
    vals = np.concatenate(all_vals)
    vecs = np.hstack(all_vecs)
    order = np.argsort(vals, kind="stable")[:k]
    vals = vals[order]
    vecs = _fix_signs(vecs[:, order])
    lv = lap.matmat(vecs)
    res = np.linalg.norm(lv - vecs * vals, axis=0)
    if (res > tol).any():
        raise ConvergenceError(
            f"residual norms exceed tol={tol:g}: max {float(res.max()):.3e}",
            residual_norms=res,
        )
    # consistency of the shift mapping: Rayleigh quotients must agree
    rq = np.einsum("ij,ij->j", vecs, lv)
    if np.abs(rq - vals).max() > 10.0 * max(tol, 1e-12):
        raise ConvergenceError("eigenvalues inconsistent with Rayleigh quotients")
    return EigResult(vals, vecs, res)
