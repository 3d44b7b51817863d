"""Normalized-Laplacian spectra of weighted region networks.

The spectrum of I - D^{-1}W (computed through the similar symmetric
form) lives in [0, 2]; lambda_2 vanishes exactly when the network is
disconnected and lambda_max hits 2 exactly when it is bipartite. The
count of eigenvalues below a threshold gamma serves as a modularity
parameter, and 1-Wasserstein distance between eigenvalue distributions
quantifies how much a spectrum moves under perturbations such as edge
thresholding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import format_float
from .eigensolve import dense_sym_eig
from .network import BrainNetwork

__all__ = [
    "DENSE_SPECTRUM_CAP",
    "Spectrum",
    "spectrum",
    "spectral_histogram",
    "wasserstein_1d",
    "spectral_distance",
    "write_spectrum_csv",
    "write_histogram_csv",
]

DENSE_SPECTRUM_CAP = 4096


@dataclass
class Spectrum:
    eigenvalues: np.ndarray  # ascending
    gamma: float = 0.3

    @property
    def k(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def lambda2(self) -> float:
        if self.k < 2:
            raise ValueError("spectrum has fewer than 2 eigenvalues")
        return float(self.eigenvalues[1])

    @property
    def lambda3(self) -> float:
        if self.k < 3:
            raise ValueError("spectrum has fewer than 3 eigenvalues")
        return float(self.eigenvalues[2])

    @property
    def modularity(self) -> int:
        return int((self.eigenvalues < self.gamma).sum())

    @property
    def near_bipartite_gap(self) -> float:
        return float(2.0 - self.eigenvalues[-1])


def spectrum(net: BrainNetwork, gamma: float = 0.3, dense_cap: int = DENSE_SPECTRUM_CAP) -> Spectrum:
    """Full normalized-Laplacian spectrum of a weighted network.

    Requires a zero diagonal and strictly positive degrees; refuses
    networks beyond ``dense_cap`` nodes (full spectra need the dense
    path).
    """
    w = net.weights
    k = net.k
    if k > dense_cap:
        raise ValueError(f"full spectrum refused for k={k} > {dense_cap} nodes")
    if k and np.abs(np.diag(w)).max() > 0:
        raise ValueError("self-loops present; strip the diagonal first")
    deg = w.sum(axis=1)
    if (deg <= 0).any():
        i = int(np.flatnonzero(deg <= 0)[0])
        raise ValueError(f"zero-degree node {i}; remove isolated nodes first")
    s = 1.0 / np.sqrt(deg)
    lsym = -(w * s[:, None]) * s[None, :]
    np.fill_diagonal(lsym, 1.0)
    res = dense_sym_eig(lsym, sym_tol=1e-8)
    return Spectrum(res.eigenvalues, float(gamma))


def spectral_histogram(s: Spectrum, bins: int = 40):
    """Counts over equal-width bins spanning [0, 2]; returns (lefts, counts)."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    vals = np.clip(s.eigenvalues, 0.0, 2.0)
    counts, edges = np.histogram(vals, bins=bins, range=(0.0, 2.0))
    return edges[:-1], counts


def wasserstein_1d(a, b) -> float:
    """1-Wasserstein distance between two empirical distributions.

    Integrates |F_a - F_b| over the merged support (equivalently the
    sorted-quantile integral).
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    merged = np.sort(np.concatenate([a, b]))
    deltas = np.diff(merged)
    if deltas.size == 0:
        return 0.0
    ca = np.searchsorted(a, merged[:-1], side="right") / a.size
    cb = np.searchsorted(b, merged[:-1], side="right") / b.size
    return float(np.sum(np.abs(ca - cb) * deltas))


def spectral_distance(s1: Spectrum, s2: Spectrum) -> float:
    return wasserstein_1d(s1.eigenvalues, s2.eigenvalues)


def write_spectrum_csv(s: Spectrum, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in s.eigenvalues.tolist():
            fh.write(format_float(v) + "\n")


def write_histogram_csv(lefts, counts, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("bin_left,count\n")
        for left, count in zip(np.asarray(lefts).tolist(), np.asarray(counts).tolist()):
            fh.write(f"{format_float(left)},{int(count)}\n")
