"""Core domain types and text file formats.

Everything downstream shares these types: the voxel mask with its dense
index <-> coordinate bijection, symmetric sparse matrices (voxel
connectivity, similarity graphs, Laplacians), region labelings, and a
seeded random source. Instances are immutable after construction and
safe to share read-only across threads.

File formats (plain text, ``#`` starts a comment, blank lines ignored):

* mask:          ``nx ny nz`` header, then one ``x y z`` line per voxel;
                 dense voxel indices follow file order.
* sparse matrix: one ``i j w`` triple per line, 0-based, each unordered
                 pair stored once with ``i <= j``.
* parcellation:  ``n k`` header, then one label per line in voxel order.

Floats are written with 17 significant digits so 64-bit values
round-trip exactly.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

__all__ = [
    "FormatError",
    "Rng",
    "VoxelMask",
    "SparseSymMatrix",
    "Parcellation",
    "format_float",
    "read_mask",
    "write_mask",
    "read_sparse",
    "write_sparse",
    "read_parcellation",
    "write_parcellation",
]

FLOAT_FMT = "%.17g"


def format_float(x: float) -> str:
    """Render a float with 17 significant digits (exact round trip)."""
    return FLOAT_FMT % float(x)


class FormatError(ValueError):
    """Malformed input file. ``line`` is 1-based; 0 means whole-file."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = int(line)
        where = f"{self.path}:{self.line}" if line else self.path
        super().__init__(f"{where}: {message}")


class Rng:
    """Seeded PCG64 stream: one seed, one reproducible run.

    The generator algorithm is pinned (numpy's PCG64) so identical seeds
    produce identical streams regardless of platform.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high=high, size=size)

    def choice(self, n, size=None, replace=True):
        return self._gen.choice(n, size=size, replace=replace)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def permutation(self, x):
        return self._gen.permutation(x)


class VoxelMask:
    """Ordered set of in-mask voxels on an (nx, ny, nz) integer lattice.

    Dense indices follow the order the voxels were supplied (file
    order), so per-voxel arrays stay aligned across every file that
    references the same mask. ``grid`` maps lattice coordinates back to
    dense indices (-1 outside the mask).
    """

    def __init__(self, dims, voxels):
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3 or min(dims) <= 0:
            raise ValueError(f"dims must be three positive integers, got {dims}")
        v = np.array(voxels, dtype=np.int64)
        if v.size == 0:
            raise ValueError("empty mask")
        v = v.reshape(-1, 3)
        bad = (v < 0) | (v >= np.array(dims, dtype=np.int64))
        if bad.any():
            i = int(np.flatnonzero(bad.any(axis=1))[0])
            raise ValueError(f"voxel {tuple(v[i])} outside dims {dims}")
        flat = np.ravel_multi_index((v[:, 0], v[:, 1], v[:, 2]), dims)
        if np.unique(flat).size != flat.size:
            order = np.argsort(flat, kind="stable")
            dup = order[1:][flat[order][1:] == flat[order][:-1]][0]
            raise ValueError(f"duplicate voxel coordinate {tuple(v[dup])}")
        grid = np.full(dims, -1, dtype=np.int64)
        grid.flat[flat] = np.arange(v.shape[0])
        v.setflags(write=False)
        grid.setflags(write=False)
        self.dims = dims
        self.voxels = v
        self.grid = grid

    def __len__(self) -> int:
        return int(self.voxels.shape[0])

    @property
    def n(self) -> int:
        return len(self)

    def index_of(self, coord) -> int:
        x, y, z = (int(c) for c in coord)
        nx, ny, nz = self.dims
        if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
            raise ValueError(f"coordinate ({x}, {y}, {z}) outside dims {self.dims}")
        i = int(self.grid[x, y, z])
        if i < 0:
            raise ValueError(f"coordinate ({x}, {y}, {z}) not in mask")
        return i

    @classmethod
    def full_cuboid(cls, dims) -> "VoxelMask":
        """Mask covering every lattice point of the given dims."""
        dims = tuple(int(d) for d in dims)
        xx, yy, zz = np.meshgrid(*(np.arange(d) for d in dims), indexing="ij")
        return cls(dims, np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()]))


class SparseSymMatrix:
    """Sparse symmetric matrix; each unordered index pair stored once.

    Canonical triples keep ``i <= j`` in lexicographic order, which
    makes serialization deterministic and logical symmetry exact. A CSR
    copy of the full symmetric matrix backs row iteration and
    matrix-vector products.
    """

    def __init__(self, n, rows, cols, vals, require_nonnegative=False):
        n = int(n)
        if n <= 0:
            raise ValueError("dimension must be positive")
        r = np.asarray(rows, dtype=np.int64).ravel()
        c = np.asarray(cols, dtype=np.int64).ravel()
        v = np.array(vals, dtype=np.float64).ravel()
        if not (r.size == c.size == v.size):
            raise ValueError("triple arrays must have equal length")
        if r.size:
            if min(r.min(), c.min()) < 0 or max(r.max(), c.max()) >= n:
                raise ValueError(f"index out of range for dimension {n}")
            if not np.isfinite(v).all():
                raise ValueError("non-finite weight")
            if require_nonnegative and v.min() < 0:
                i = int(np.flatnonzero(v < 0)[0])
                raise ValueError(f"negative weight {v[i]} at ({r[i]}, {c[i]})")
        swap = r > c
        r2 = np.where(swap, c, r)
        c2 = np.where(swap, r, c)
        order = np.lexsort((c2, r2))
        r2, c2, v2 = r2[order], c2[order], v[order]
        if r2.size > 1:
            same = (r2[1:] == r2[:-1]) & (c2[1:] == c2[:-1])
            if same.any():
                i = int(np.flatnonzero(same)[0])
                if v2[i] == v2[i + 1]:
                    raise ValueError(f"duplicate entry for pair ({r2[i]}, {c2[i]})")
                raise ValueError(
                    f"conflicting weights for pair ({r2[i]}, {c2[i]}): "
                    f"{v2[i]} vs {v2[i + 1]}"
                )
        for a in (r2, c2, v2):
            a.setflags(write=False)
        self.n = n
        self._rows, self._cols, self._vals = r2, c2, v2
        off = r2 != c2
        fr = np.concatenate([r2, c2[off]])
        fc = np.concatenate([c2, r2[off]])
        fv = np.concatenate([v2, v2[off]])
        self._csr = sp.csr_matrix((fv, (fr, fc)), shape=(n, n))

    @property
    def nnz(self) -> int:
        return int(self._vals.size)

    def triples(self):
        """Canonical (rows, cols, vals) arrays with i <= j, sorted."""
        return self._rows, self._cols, self._vals

    def entries(self):
        for i, j, w in zip(self._rows.tolist(), self._cols.tolist(), self._vals.tolist()):
            yield i, j, w

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise ValueError(f"vector length {x.shape} does not match n={self.n}")
        return self._csr @ x

    def matmat(self, b):
        return self._csr @ b

    def to_dense(self):
        return self._csr.toarray()

    def value(self, i, j) -> float:
        return float(self._csr[i, j])

    def row(self, i):
        """Column indices and values of row i (compressed-row view)."""
        s, e = self._csr.indptr[i], self._csr.indptr[i + 1]
        return self._csr.indices[s:e], self._csr.data[s:e]

    def degrees(self):
        return np.asarray(self._csr.sum(axis=1)).ravel()

    def submatrix(self, idx) -> "SparseSymMatrix":
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        m = self._csr[idx][:, idx].tocoo()
        keep = m.row <= m.col
        return SparseSymMatrix(idx.size, m.row[keep], m.col[keep], m.data[keep])

    @classmethod
    def from_dense(cls, a, tol=1e-12) -> "SparseSymMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        if a.size and np.abs(a - a.T).max() > tol:
            raise ValueError("matrix is not symmetric")
        iu = np.triu_indices(a.shape[0])
        w = a[iu]
        keep = w != 0
        return cls(a.shape[0], iu[0][keep], iu[1][keep], w[keep])


class Parcellation:
    """Region labels for n voxels: values in 1..k, with 0 = excluded."""

    def __init__(self, labels, k):
        k = int(k)
        if k < 1:
            raise ValueError("k must be >= 1")
        lab = np.array(labels, dtype=np.int64).ravel()
        if lab.size == 0:
            raise ValueError("empty labeling")
        if lab.min() < 0 or lab.max() > k:
            raise ValueError(f"labels must lie in 0..{k}")
        counts = np.bincount(lab, minlength=k + 1)
        if (counts[1:] == 0).any():
            missing = int(np.flatnonzero(counts[1:] == 0)[0]) + 1
            raise ValueError(f"region {missing} is empty")
        lab.setflags(write=False)
        self.labels = lab
        self.k = k

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def excluded(self):
        return self.labels == 0

    def region_sizes(self):
        return np.bincount(self.labels, minlength=self.k + 1)[1:]

    def members(self, label: int):
        if not 1 <= label <= self.k:
            raise ValueError(f"label {label} outside 1..{self.k}")
        return np.flatnonzero(self.labels == label)


def _data_lines(path):
    """Yield (lineno, text) for non-empty lines with comments stripped."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                yield lineno, text


def _parse_ints(path, lineno, text, count):
    parts = text.split()
    if len(parts) != count:
        raise FormatError(path, lineno, f"expected {count} fields, got {len(parts)}")
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise FormatError(path, lineno, f"invalid integer in {text!r}") from None


def read_mask(path) -> VoxelMask:
    it = _data_lines(path)
    header = next(it, None)
    if header is None:
        raise FormatError(path, 0, "empty file")
    dims = _parse_ints(path, header[0], header[1], 3)
    if min(dims) <= 0:
        raise FormatError(path, header[0], f"dims must be positive, got {dims}")
    seen = set()
    coords = []
    for lineno, text in it:
        x, y, z = _parse_ints(path, lineno, text, 3)
        if not (0 <= x < dims[0] and 0 <= y < dims[1] and 0 <= z < dims[2]):
            raise FormatError(
                path, lineno, f"coordinate ({x}, {y}, {z}) outside dims {tuple(dims)}"
            )
        if (x, y, z) in seen:
            raise FormatError(path, lineno, f"duplicate coordinate ({x}, {y}, {z})")
        seen.add((x, y, z))
        coords.append((x, y, z))
    if not coords:
        raise FormatError(path, 0, "empty mask")
    return VoxelMask(dims, coords)


def write_mask(mask: VoxelMask, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("%d %d %d\n" % mask.dims)
        for x, y, z in mask.voxels.tolist():
            fh.write(f"{x} {y} {z}\n")


def read_sparse(path, n: int, require_nonnegative=False) -> SparseSymMatrix:
    rows, cols, vals = [], [], []
    for lineno, text in _data_lines(path):
        parts = text.split()
        if len(parts) != 3:
            raise FormatError(path, lineno, f"expected 'i j w', got {text!r}")
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise FormatError(path, lineno, f"invalid field in {text!r}") from None
        if not (0 <= i < n and 0 <= j < n):
            raise FormatError(path, lineno, f"index ({i}, {j}) out of range for n={n}")
        if require_nonnegative and w < 0:
            raise FormatError(path, lineno, f"negative weight {w}")
        rows.append(i)
        cols.append(j)
        vals.append(w)
    try:
        return SparseSymMatrix(n, rows, cols, vals, require_nonnegative=require_nonnegative)
    except ValueError as exc:
        raise FormatError(path, 0, str(exc)) from None


def write_sparse(m: SparseSymMatrix, path, comments=()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        r, c, v = m.triples()
        for i, j, w in zip(r.tolist(), c.tolist(), v.tolist()):
            fh.write(f"{i} {j} {format_float(w)}\n")


def read_parcellation(path, n=None) -> Parcellation:
    it = _data_lines(path)
    header = next(it, None)
    if header is None:
        raise FormatError(path, 0, "empty file")
    n_file, k = _parse_ints(path, header[0], header[1], 2)
    if n is not None and n_file != n:
        raise FormatError(path, header[0], f"file declares n={n_file}, expected {n}")
    labels = []
    for lineno, text in it:
        (val,) = _parse_ints(path, lineno, text, 1)
        if not 0 <= val <= k:
            raise FormatError(path, lineno, f"label {val} outside 0..{k}")
        labels.append(val)
    if len(labels) != n_file:
        raise FormatError(
            path, 0, f"expected {n_file} labels, got {len(labels)} (missing voxel line?)"
        )
    try:
        return Parcellation(labels, k)
    except ValueError as exc:
        raise FormatError(path, 0, str(exc)) from None


def write_parcellation(p: Parcellation, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{p.n} {p.k}\n")
        for lab in p.labels.tolist():
            fh.write(f"{lab}\n")
