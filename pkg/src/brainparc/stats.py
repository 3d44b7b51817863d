"""Evaluation statistics and the synthetic phantom generator.

The phantom plants spatially contiguous blocks on a cuboid mask and
draws voxel-pair connection weights from a rectified normal whose mean
depends on whether the pair shares a block, restricted to pairs within
a spatial radius (tract weight falls off with distance, so the matrix
stays sparse). Phantoms carry their ground truth, which grounds
recovery and consistency experiments.

Regional consistency averages the pairwise profile correlation within
each region. Group comparisons use Welch's two-sample t-test with the
two-sided p-value evaluated through the continued fraction of the
regularized incomplete beta function. Classification runs a linear
soft-margin SVM trained by deterministic dual coordinate descent under
leave-one-out cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Parcellation, Rng, SparseSymMatrix, VoxelMask
from .parcellate import random_parcellation
from .spatial import compute_profiles, neighbor_offsets, _half_offsets, _standardized_rows

__all__ = [
    "Phantom",
    "generate_phantom",
    "ConsistencyReport",
    "regional_consistency_report",
    "regional_consistency",
    "welch_t_test",
    "regularized_incomplete_beta",
    "GroupSample",
    "read_group_csv",
    "LoocvResult",
    "loocv_linear_svm",
    "ComparisonReport",
    "compare_parcellations",
]


@dataclass
class Phantom:
    mask: VoxelMask
    ground_truth: Parcellation
    conn: SparseSymMatrix


def generate_phantom(
    dims,
    k_blocks: int,
    within_mean: float,
    cross_mean: float,
    noise_sd: float,
    rng: Rng,
    r_conn: float = 6.0,
) -> Phantom:
    """Cuboid phantom with planted contiguous blocks.

    Weights for voxel pairs within ``r_conn`` are drawn from
    N(mean, noise_sd) rectified at zero, with mean ``within_mean`` for
    same-block pairs and ``cross_mean`` otherwise; zero draws are
    dropped from the sparse matrix.
    """
    if not within_mean > cross_mean >= 0:
        raise ValueError("need within_mean > cross_mean >= 0")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    mask = VoxelMask.full_cuboid(dims)
    if not 1 <= k_blocks <= len(mask):
        raise ValueError(f"k_blocks must be in 1..{len(mask)}")
    truth = random_parcellation(mask, k_blocks, rng)
    labels = truth.labels
    grid = mask.grid
    dim_arr = np.array(mask.dims, dtype=np.int64)
    v = mask.voxels
    rows, cols, vals = [], [], []
    for off in _half_offsets(neighbor_offsets(r_conn)):
        q = v + off
        valid = ((q >= 0) & (q < dim_arr)).all(axis=1)
        if not valid.any():
            continue
        j = grid[q[valid, 0], q[valid, 1], q[valid, 2]]
        keep = j >= 0
        i = np.flatnonzero(valid)[keep]
        j = j[keep]
        if i.size == 0:
            continue
        mean = np.where(labels[i] == labels[j], within_mean, cross_mean).astype(np.float64)
        if noise_sd > 0:
            w = mean + noise_sd * rng.standard_normal(i.size)
        else:
            w = mean
        np.maximum(w, 0.0, out=w)
        pos = w > 0
        rows.append(i[pos])
        cols.append(j[pos])
        vals.append(w[pos])
    if rows:
        conn = SparseSymMatrix(
            len(mask), np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
        )
    else:
        conn = SparseSymMatrix(len(mask), [], [], [])
    return Phantom(mask, truth, conn)


@dataclass
class ConsistencyReport:
    value: float
    per_region: np.ndarray   # one consistency value per region
    n_small_regions: int     # regions with < 2 usable voxels (count 1 by convention)
    n_excluded_voxels: int   # voxels dropped for having all-zero profiles


def regional_consistency_report(
    conn: SparseSymMatrix,
    p: Parcellation,
    profile_parcellation: Parcellation,
) -> ConsistencyReport:
    """Mean within-region pairwise correlation of connectivity profiles.

    Voxels whose profile is all zero are eliminated first. A region left
    with fewer than 2 voxels contributes 1 by convention and is counted
    in ``n_small_regions``; it is an error for every region to end up
    that small.
    """
    if conn.n != p.n or profile_parcellation.n != p.n:
        raise ValueError("connectivity and parcellation sizes differ")
    profiles = compute_profiles(conn, profile_parcellation)
    usable = np.abs(profiles).sum(axis=1) > 0
    z = _standardized_rows(profiles)
    per_region = np.empty(p.k)
    n_small = 0
    for label in range(1, p.k + 1):
        members = p.members(label)
        members = members[usable[members]]
        m = members.size
        if m < 2:
            per_region[label - 1] = 1.0
            n_small += 1
            continue
        zm = z[members]
        gram = zm @ zm.T
        per_region[label - 1] = (gram.sum() - np.trace(gram)) / (m * (m - 1))
    if n_small == p.k:
        raise ValueError("every region has fewer than 2 usable voxels")
    return ConsistencyReport(
        value=float(per_region.mean()),
        per_region=per_region,
        n_small_regions=n_small,
        n_excluded_voxels=int((~usable).sum()),
    )


def regional_consistency(conn, p, profile_parcellation) -> float:
    return regional_consistency_report(conn, p, profile_parcellation).value


def _beta_cf(a: float, b: float, x: float, max_iter: int = 500, eps: float = 1e-15) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by continued fraction; absolute error below 1e-10."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def welch_t_test(a, b, pooled: bool = False):
    """Two-sample t statistic and two-sided p-value.

    Welch's unequal-variance form with Welch-Satterthwaite degrees of
    freedom by default; ``pooled=True`` switches to the equal-variance
    classic. Identical samples give t = 0 and p = 1 exactly.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise ValueError("both samples need at least 2 observations")
    va = float(a.var(ddof=1))
    vb = float(b.var(ddof=1))
    if va == 0.0 and vb == 0.0:
        raise ValueError("degenerate samples: both variances are zero")
    if pooled:
        sp2 = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2)
        se2 = sp2 * (1.0 / na + 1.0 / nb)
        df = float(na + nb - 2)
    else:
        sa = va / na
        sb = vb / nb
        se2 = sa + sb
        df = se2**2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
    t = (float(a.mean()) - float(b.mean())) / math.sqrt(se2)
    x = df / (df + t * t)
    p = regularized_incomplete_beta(df / 2.0, 0.5, x)
    return t, p


@dataclass
class GroupSample:
    """Per-subject feature rows for two groups."""

    feature_names: list
    group1: np.ndarray  # (n1, n_features)
    group2: np.ndarray  # (n2, n_features)
    group_labels: tuple = ("1", "2")

    def __post_init__(self):
        self.group1 = np.asarray(self.group1, dtype=np.float64)
        self.group2 = np.asarray(self.group2, dtype=np.float64)
        f = len(self.feature_names)
        if self.group1.ndim != 2 or self.group1.shape[1] != f:
            raise ValueError("group1 shape does not match feature names")
        if self.group2.ndim != 2 or self.group2.shape[1] != f:
            raise ValueError("group2 shape does not match feature names")

    def columns(self, features):
        idx = []
        for name in features:
            if name not in self.feature_names:
                raise ValueError(f"unknown feature {name!r}")
            idx.append(self.feature_names.index(name))
        return self.group1[:, idx], self.group2[:, idx]


def read_group_csv(path) -> GroupSample:
    """Parse 'subject,group,feature1,...' rows into a two-group sample."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty group CSV")
    header = [h.strip() for h in lines[0].split(",")]
    if len(header) < 3 or header[0] != "subject" or header[1] != "group":
        raise ValueError(f"{path}: header must start with 'subject,group,'")
    names = header[2:]
    groups: dict = {}
    for ln in lines[1:]:
        parts = [p.strip() for p in ln.split(",")]
        if len(parts) != len(header):
            raise ValueError(f"{path}: row has {len(parts)} fields, expected {len(header)}")
        groups.setdefault(parts[1], []).append([float(x) for x in parts[2:]])
    if len(groups) != 2:
        raise ValueError(f"{path}: expected exactly 2 groups, found {sorted(groups)}")
    g1, g2 = sorted(groups)
    return GroupSample(names, np.array(groups[g1]), np.array(groups[g2]), (g1, g2))


def _svm_dual_cd(x, y, c: float, gap_tol: float = 1e-6, max_sweeps: int = 100000):
    """Hinge-loss linear SVM in the dual by cyclic coordinate descent.

    The intercept rides along as an appended constant feature. Sweeps
    are cyclic in index order, so the solve is deterministic; iteration
    stops once the primal-dual gap drops below ``gap_tol``.
    """
    xa = np.hstack([x, np.ones((x.shape[0], 1))])
    n = xa.shape[0]
    q = (xa * xa).sum(axis=1)
    alpha = np.zeros(n)
    w = np.zeros(xa.shape[1])
    for _ in range(max_sweeps):
        for i in range(n):
            g = y[i] * float(w @ xa[i]) - 1.0
            a_old = alpha[i]
            a_new = min(max(a_old - g / q[i], 0.0), c)
            if a_new != a_old:
                w += (a_new - a_old) * y[i] * xa[i]
                alpha[i] = a_new
        margins = 1.0 - y * (xa @ w)
        primal = 0.5 * float(w @ w) + c * float(np.clip(margins, 0.0, None).sum())
        dual = float(alpha.sum()) - 0.5 * float(w @ w)
        if primal - dual <= gap_tol:
            return w[:-1], float(w[-1])
    raise RuntimeError(f"dual coordinate descent did not reach gap {gap_tol:g}")


@dataclass
class LoocvResult:
    accuracy_group1: float
    accuracy_group2: float
    n_group1: int
    n_group2: int

    @property
    def overall(self) -> float:
        n = self.n_group1 + self.n_group2
        return (self.accuracy_group1 * self.n_group1 + self.accuracy_group2 * self.n_group2) / n


def loocv_linear_svm(
    sample: GroupSample,
    features,
    c: float = 1.0,
    rng: Rng | None = None,
) -> LoocvResult:
    """Leave-one-out accuracy per group of a linear soft-margin SVM.

    Features are z-scored on each training fold. The solver is
    deterministic, so ``rng`` is accepted only for interface symmetry
    with the other drivers.
    """
    del rng  # solve is deterministic
    g1, g2 = sample.columns(list(features))
    n1, n2 = g1.shape[0], g2.shape[0]
    if n1 < 3 or n2 < 3:
        raise ValueError("LOOCV needs at least 3 subjects per class")
    x = np.vstack([g1, g2])
    y = np.concatenate([np.ones(n1), -np.ones(n2)])
    n = n1 + n2
    correct = np.zeros(n, dtype=bool)
    for i in range(n):
        tr = np.arange(n) != i
        ytr = y[tr]
        if np.unique(ytr).size < 2:
            raise ValueError("single-class training fold")
        xtr = x[tr]
        mu = xtr.mean(axis=0)
        sd = xtr.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        w, b = _svm_dual_cd((xtr - mu) / sd, ytr, c)
        score = float(w @ ((x[i] - mu) / sd)) + b
        pred = 1.0 if score >= 0 else -1.0
        correct[i] = pred == y[i]
    return LoocvResult(
        accuracy_group1=float(correct[:n1].mean()),
        accuracy_group2=float(correct[n1:].mean()),
        n_group1=n1,
        n_group2=n2,
    )


@dataclass
class ComparisonReport:
    conn_consistency: float
    random_consistencies: np.ndarray
    n_exceeded: int          # random parcellations beaten by the connectivity one
    t: float
    p_one_sided: float       # H1: connectivity-based consistency is higher


def compare_parcellations(
    conn: SparseSymMatrix,
    p_conn: Parcellation,
    p_rand_list,
    profile_parcellation: Parcellation,
) -> ComparisonReport:
    """Consistency of one parcellation against a random-baseline set.

    All parcellations must share n and k. The one-sided Welch test runs
    on per-region consistency values: the connectivity-based
    parcellation's k values against the pooled values of every random
    parcellation.
    """
    p_rand_list = list(p_rand_list)
    if not p_rand_list:
        raise ValueError("need at least one random parcellation")
    for p in p_rand_list:
        if p.n != p_conn.n or p.k != p_conn.k:
            raise ValueError("parcellations must share n and k")
    ref = regional_consistency_report(conn, p_conn, profile_parcellation)
    rand_reports = [
        regional_consistency_report(conn, p, profile_parcellation) for p in p_rand_list
    ]
    rand_values = np.array([r.value for r in rand_reports])
    pooled = np.concatenate([r.per_region for r in rand_reports])
    t, p_two = welch_t_test(ref.per_region, pooled)
    p_one = p_two / 2.0 if t > 0 else 1.0 - p_two / 2.0
    return ComparisonReport(
        conn_consistency=ref.value,
        random_consistencies=rand_values,
        n_exceeded=int((ref.value > rand_values).sum()),
        t=t,
        p_one_sided=p_one,
    )
