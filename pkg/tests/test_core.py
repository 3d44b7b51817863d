import numpy as np
import pytest

from brainparc.core import (
    FormatError,
    Parcellation,
    Rng,
    SparseSymMatrix,
    VoxelMask,
    read_mask,
    read_parcellation,
    read_sparse,
    write_mask,
    write_parcellation,
    write_sparse,
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestMaskIO:
    def test_basic_parse(self, tmp_path):
        p = write(tmp_path / "m.txt", "4 4 4\n0 0 0\n1 2 3\n3 3 3\n")
        mask = read_mask(p)
        assert len(mask) == 3
        assert mask.dims == (4, 4, 4)
        assert mask.index_of((1, 2, 3)) == 1

    def test_comments_and_blanks(self, tmp_path):
        p = write(tmp_path / "m.txt", "# header\n4 4 4\n\n0 0 0  # origin\n1 1 1\n")
        assert len(read_mask(p)) == 2

    def test_duplicate_coordinate(self, tmp_path):
        p = write(tmp_path / "m.txt", "4 4 4\n1 1 1\n1 1 1\n")
        with pytest.raises(FormatError, match="duplicate"):
            read_mask(p)

    def test_empty_mask(self, tmp_path):
        p = write(tmp_path / "m.txt", "4 4 4\n")
        with pytest.raises(FormatError, match="empty mask"):
            read_mask(p)

    def test_out_of_bounds(self, tmp_path):
        p = write(tmp_path / "m.txt", "4 4 4\n0 0 9\n")
        with pytest.raises(FormatError, match="outside dims") as exc:
            read_mask(p)
        assert exc.value.line == 2

    def test_parse_error_has_line(self, tmp_path):
        p = write(tmp_path / "m.txt", "4 4 4\n0 0\n")
        with pytest.raises(FormatError) as exc:
            read_mask(p)
        assert exc.value.line == 2

    def test_round_trip(self, tmp_path):
        mask = VoxelMask((5, 4, 3), [(0, 0, 0), (4, 3, 2), (2, 1, 1)])
        path = tmp_path / "m.txt"
        write_mask(mask, path)
        back = read_mask(path)
        assert back.dims == mask.dims
        assert np.array_equal(back.voxels, mask.voxels)


class TestSparseIO:
    def test_basic(self, tmp_path):
        p = write(tmp_path / "s.txt", "0 1 5.0\n")
        m = read_sparse(p, 2)
        assert m.value(0, 1) == 5.0
        assert m.value(1, 0) == 5.0

    def test_asymmetry_conflict(self, tmp_path):
        p = write(tmp_path / "s.txt", "0 1 5.0\n1 0 4.0\n")
        with pytest.raises(FormatError, match="conflicting"):
            read_sparse(p, 2)

    def test_index_out_of_range(self, tmp_path):
        p = write(tmp_path / "s.txt", "0 7 1.0\n")
        with pytest.raises(FormatError, match="out of range"):
            read_sparse(p, 3)

    def test_negative_rejected_when_strict(self, tmp_path):
        p = write(tmp_path / "s.txt", "0 1 -2.0\n")
        with pytest.raises(FormatError, match="negative"):
            read_sparse(p, 2, require_nonnegative=True)
        m = read_sparse(p, 2)
        assert m.value(0, 1) == -2.0

    def test_duplicate_entry(self, tmp_path):
        p = write(tmp_path / "s.txt", "0 1 5.0\n0 1 5.0\n")
        with pytest.raises(FormatError, match="duplicate"):
            read_sparse(p, 2)

    def test_float_round_trip_exact(self, tmp_path):
        rng = Rng(11)
        vals = rng.standard_normal(50) * 10.0 ** rng.integers(-8, 8, size=50).astype(float)
        m = SparseSymMatrix(50, np.arange(50), np.arange(50), vals)
        path = tmp_path / "s.txt"
        write_sparse(m, path)
        back = read_sparse(path, 50)
        assert np.array_equal(back.triples()[2], m.triples()[2])


class TestParcellationIO:
    def test_round_trip(self, tmp_path):
        p = Parcellation([1, 1, 2], 2)
        path = tmp_path / "p.txt"
        write_parcellation(p, path)
        back = read_parcellation(path, 3)
        assert back.k == p.k
        assert np.array_equal(back.labels, p.labels)

    def test_excluded_round_trip(self, tmp_path):
        p = Parcellation([1, 0, 2, 0], 2)
        path = tmp_path / "p.txt"
        write_parcellation(p, path)
        back = read_parcellation(path, 4)
        assert np.array_equal(back.labels, [1, 0, 2, 0])

    def test_label_above_k(self, tmp_path):
        p = write(tmp_path / "p.txt", "3 2\n1\n2\n3\n")
        with pytest.raises(FormatError, match="label 3"):
            read_parcellation(p, 3)

    def test_missing_voxel_line(self, tmp_path):
        p = write(tmp_path / "p.txt", "3 2\n1\n2\n")
        with pytest.raises(FormatError, match="missing voxel line"):
            read_parcellation(p, 3)

    def test_empty_region_rejected(self, tmp_path):
        p = write(tmp_path / "p.txt", "2 2\n1\n1\n")
        with pytest.raises(FormatError, match="region 2 is empty"):
            read_parcellation(p, 2)


class TestRoundTripProperty:
    def test_random_instances(self, tmp_path):
        for seed in range(20):
            rng = Rng(500 + seed)
            dims = tuple(int(d) for d in rng.integers(3, 8, size=3))
            n_all = dims[0] * dims[1] * dims[2]
            n = int(rng.integers(1, n_all + 1))
            flat = rng.choice(n_all, size=n, replace=False)
            coords = np.column_stack(np.unravel_index(flat, dims))
            mask = VoxelMask(dims, coords)
            mpath = tmp_path / f"m{seed}.txt"
            write_mask(mask, mpath)
            back = read_mask(mpath)
            assert back.dims == mask.dims and np.array_equal(back.voxels, mask.voxels)

            nnz = int(rng.integers(0, 3 * n))
            i = rng.integers(0, n, size=nnz)
            j = rng.integers(0, n, size=nnz)
            pairs = {(min(a, b), max(a, b)) for a, b in zip(i.tolist(), j.tolist())}
            rows = np.array([p[0] for p in pairs], dtype=int)
            cols = np.array([p[1] for p in pairs], dtype=int)
            vals = rng.standard_normal(len(pairs))
            m = SparseSymMatrix(n, rows, cols, vals)
            spath = tmp_path / f"s{seed}.txt"
            write_sparse(m, spath)
            mb = read_sparse(spath, n)
            for a, b in zip(m.triples(), mb.triples()):
                assert np.array_equal(a, b)

            k = int(rng.integers(1, n + 1))
            labels = np.zeros(n, dtype=int)
            labels[: n - k] = rng.integers(0, k + 1, size=n - k)
            labels[n - k :] = np.arange(1, k + 1)  # force non-empty regions
            p = Parcellation(labels, k)
            ppath = tmp_path / f"p{seed}.txt"
            write_parcellation(p, ppath)
            pb = read_parcellation(ppath, n)
            assert pb.k == p.k and np.array_equal(pb.labels, p.labels)


class TestSparseSymMatrix:
    def test_matvec_matches_dense(self):
        for seed in range(10):
            rng = Rng(900 + seed)
            n = int(rng.integers(2, 200))
            dense = rng.standard_normal((n, n))
            dense = dense + dense.T
            dense[np.abs(dense) < 1.0] = 0.0
            m = SparseSymMatrix.from_dense(dense)
            x = rng.standard_normal(n)
            assert np.abs(m.matvec(x) - dense @ x).max() <= 1e-12

    def test_row_iteration(self):
        m = SparseSymMatrix(3, [0, 1], [1, 2], [5.0, 7.0])
        idx, vals = m.row(1)
        got = dict(zip(idx.tolist(), vals.tolist()))
        assert got == {0: 5.0, 2: 7.0}

    def test_degrees_and_submatrix(self):
        m = SparseSymMatrix(4, [0, 1, 2], [1, 2, 3], [1.0, 2.0, 3.0])
        assert np.allclose(m.degrees(), [1, 3, 5, 3])
        sub = m.submatrix(np.array([1, 2, 3]))
        assert sub.n == 3
        assert sub.value(0, 1) == 2.0

    def test_symmetry_exact(self):
        m = SparseSymMatrix(5, [0, 2], [3, 4], [0.1234567890123, 9.87])
        d = m.to_dense()
        assert np.array_equal(d, d.T)

    def test_canonicalizes_lower_triangle_input(self):
        m = SparseSymMatrix(3, [2], [0], [4.0])
        r, c, v = m.triples()
        assert r.tolist() == [0] and c.tolist() == [2] and v.tolist() == [4.0]


class TestVoxelMask:
    def test_invariants(self):
        mask = VoxelMask((3, 3, 3), [(0, 0, 0), (2, 2, 2), (1, 0, 2)])
        for i in range(len(mask)):
            assert mask.index_of(mask.voxels[i]) == i

    def test_rejects_bad_coordinates(self):
        with pytest.raises(ValueError, match="outside dims"):
            VoxelMask((2, 2, 2), [(0, 0, 2)])
        with pytest.raises(ValueError, match="duplicate"):
            VoxelMask((2, 2, 2), [(0, 0, 0), (0, 0, 0)])
        with pytest.raises(ValueError, match="empty"):
            VoxelMask((2, 2, 2), [])

    def test_full_cuboid(self):
        mask = VoxelMask.full_cuboid((2, 3, 2))
        assert len(mask) == 12
        assert mask.index_of((0, 0, 0)) == 0


class TestRng:
    def test_determinism(self):
        a = Rng(123).standard_normal(10)
        b = Rng(123).standard_normal(10)
        assert np.array_equal(a, b)

    def test_distinct_seeds_differ(self):
        assert not np.array_equal(Rng(1).standard_normal(10), Rng(2).standard_normal(10))

    def test_seed_validation(self):
        with pytest.raises(ValueError):
            Rng(-1)
