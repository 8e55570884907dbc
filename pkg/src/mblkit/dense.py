"""Exact diagonalization at small sizes and mid-spectrum state selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .entanglement import TwoSiteDensityMatrix, two_site_rdm_dense
from .model import DenseOperator

HERMITICITY_TOL = 1e-10


@dataclass(frozen=True)
class EigenPair:
    energy: float
    vector: np.ndarray


@dataclass(frozen=True)
class SpectrumSlice:
    pairs: tuple[EigenPair, ...]
    selection: str = "middle_by_index"

    def energies(self) -> np.ndarray:
        return np.array([p.energy for p in self.pairs])

    def vectors(self) -> np.ndarray:
        return np.column_stack([p.vector for p in self.pairs])


def _as_matrix(op) -> np.ndarray:
    mat = op.entries if isinstance(op, DenseOperator) else np.asarray(op)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(mat - mat.conj().T)) > HERMITICITY_TOL:
        raise ValueError("operator is not Hermitian")
    return mat


def full_spectrum(op) -> list[EigenPair]:
    """Complete orthonormal eigenbasis, sorted by energy."""
    mat = _as_matrix(op)
    energies, vectors = np.linalg.eigh(mat)
    return [EigenPair(float(e), vectors[:, k]) for k, e in enumerate(energies)]


def mid_indices(n: int, k: int) -> range:
    """The k sorted indices centered on floor(n/2), ties toward lower index."""
    if k > n:
        raise ValueError(f"cannot select {k} states out of {n}")
    start = n // 2 - k // 2
    return range(start, start + k)


def mid_spectrum_selection(pairs, k: int) -> SpectrumSlice:
    """Middle-of-the-spectrum slice of an already computed eigenbasis."""
    pairs = list(pairs)
    chosen = mid_indices(len(pairs), k)
    return SpectrumSlice(pairs=tuple(pairs[i] for i in chosen))


def mid_spectrum_dense(op, k: int) -> SpectrumSlice:
    """Middle slice computed directly (LAPACK index-range driver); equals
    mid_spectrum_selection(full_spectrum(H), k) up to eigenvector phase."""
    mat = _as_matrix(op)
    idx = mid_indices(mat.shape[0], k)
    energies, vectors = scipy.linalg.eigh(
        mat, subset_by_index=(idx.start, idx.stop - 1)
    )
    return SpectrumSlice(
        pairs=tuple(
            EigenPair(float(e), vectors[:, m]) for m, e in enumerate(energies)
        )
    )


def dense_reduced_density_matrix(
    state, i: int, j: int, local_dim: int = 2
) -> TwoSiteDensityMatrix:
    """Two-site reduced density matrix of a dense state vector."""
    return two_site_rdm_dense(state, i, j, local_dim=local_dim)


def total_sz_sector_indices(length: int, local_dim: int, total_sz: float) -> np.ndarray:
    """Basis indices of the total-Sz sector (optional filter, off by default).

    Site basis state k carries Sz = s - k with s = (d - 1) / 2 (in units of
    hbar for spin-1; the spin-1/2 chain uses Pauli operators, so its local
    values are +-1).
    """
    if local_dim == 2:
        local = np.array([1.0, -1.0])
    elif local_dim == 3:
        local = np.array([1.0, 0.0, -1.0])
    else:
        raise ValueError("unsupported local dimension")
    totals = np.zeros(local_dim**length)
    for site in range(length):
        reps = local_dim ** (length - site - 1)
        tile = np.repeat(local, reps)
        totals += np.tile(tile, local_dim**site)
    return np.flatnonzero(np.abs(totals - total_sz) < 1e-9)


def full_spectrum_sector(op, length: int, local_dim: int, total_sz: float) -> list[EigenPair]:
    """Eigenbasis of one total-Sz block, embedded back into the full space."""
    mat = _as_matrix(op)
    idx = total_sz_sector_indices(length, local_dim, total_sz)
    if idx.size == 0:
        raise ValueError(f"empty Sz = {total_sz} sector")
    block = mat[np.ix_(idx, idx)]
    energies, vectors = np.linalg.eigh(block)
    pairs = []
    for k, e in enumerate(energies):
        full = np.zeros(mat.shape[0], dtype=vectors.dtype)
        full[idx] = vectors[:, k]
        pairs.append(EigenPair(float(e), full))
    return pairs
