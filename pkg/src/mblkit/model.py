"""Disordered Heisenberg chains (spin-1/2 and spin-1) as dense matrices and MPOs.

The Hamiltonian is

    H = sum_i (1/2) (Sx_i Sx_{i+1} + Sy_i Sy_{i+1} + Sz_i Sz_{i+1}) + sum_i h_i Sz_i

with open boundaries.  For the spin-1/2 chain the S operators are the Pauli
matrices; for spin-1 they are the standard 3x3 spin matrices.  Random fields
h_i are drawn i.i.d. uniform on [-W, W] (or [0, W] in ``positive`` mode) from
a counter-based generator keyed by the realization seed, so a realization is
a pure function of (seed, site index) regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mps import MatrixProductOperator

SPIN_HALF = "half"
SPIN_ONE = "one"

FIELD_SYMMETRIC = "symmetric"
FIELD_POSITIVE = "positive"

#: refuse dense builds above this many basis states unless overridden
DEFAULT_DENSE_CAP = 2**16

_U64 = (1 << 64) - 1

# Pauli matrices (the spin-1/2 chain couples full Pauli operators)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

_S1 = 1.0 / np.sqrt(2.0)
SPIN1_X = _S1 * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
SPIN1_Y = _S1 * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
SPIN1_Z = np.array([[1, 0, 0], [0, 0, 0], [0, 0, -1]], dtype=complex)


class DimensionCapError(ValueError):
    """Raised when a dense build would exceed the configured state cap."""


def local_dim(local_spin: str) -> int:
    if local_spin == SPIN_HALF:
        return 2
    if local_spin == SPIN_ONE:
        return 3
    raise ValueError(f"unknown local_spin {local_spin!r}")


def site_operators(local_spin: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Sx, Sy, Sz) for one site of the requested spin species."""
    if local_spin == SPIN_HALF:
        return PAULI_X, PAULI_Y, PAULI_Z
    if local_spin == SPIN_ONE:
        return SPIN1_X, SPIN1_Y, SPIN1_Z
    raise ValueError(f"unknown local_spin {local_spin!r}")


@dataclass(frozen=True)
class ChainSpec:
    """Model family, size, disorder strength and sampling mode for one chain."""

    length: int
    local_spin: str = SPIN_HALF
    disorder_strength: float = 0.0
    field_distribution: str = FIELD_SYMMETRIC
    seed: int = 0

    def __post_init__(self):
        if self.length < 2:
            raise ValueError(f"length must be >= 2, got {self.length}")
        if self.disorder_strength < 0:
            raise ValueError("disorder_strength must be nonnegative")
        if self.local_spin not in (SPIN_HALF, SPIN_ONE):
            raise ValueError(f"unknown local_spin {self.local_spin!r}")
        if self.field_distribution not in (FIELD_SYMMETRIC, FIELD_POSITIVE):
            raise ValueError(f"unknown field_distribution {self.field_distribution!r}")

    @property
    def local_dim(self) -> int:
        return local_dim(self.local_spin)

    @property
    def hilbert_dim(self) -> int:
        return self.local_dim**self.length


@dataclass(frozen=True)
class DisorderRealization:
    """One sample {h_i} of the random fields for a given chain spec."""

    spec: ChainSpec
    fields: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.fields, dtype=float)
        object.__setattr__(self, "fields", h)
        if h.shape != (self.spec.length,):
            raise ValueError("fields must have one entry per site")
        w = self.spec.disorder_strength
        lo = -w if self.spec.field_distribution == FIELD_SYMMETRIC else 0.0
        if np.any(h < lo - 1e-12) or np.any(h > w + 1e-12):
            raise ValueError("fields outside the configured support")


@dataclass(frozen=True)
class DenseOperator:
    """Dense matrix carrier for H.  Stored real symmetric (these models are
    real in the Sz product basis); treat as Hermitian."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def sample_disorder(spec: ChainSpec) -> DisorderRealization:
    """Draw the random fields for one realization.

    Uses a Philox counter-based generator keyed by ``spec.seed``; the i-th
    field is a pure function of (seed, i).
    """
    rng = np.random.Generator(np.random.Philox(key=spec.seed & _U64))
    w = spec.disorder_strength
    if spec.field_distribution == FIELD_SYMMETRIC:
        h = rng.uniform(-w, w, size=spec.length)
    else:
        h = rng.uniform(0.0, w, size=spec.length)
    return DisorderRealization(spec=spec, fields=h)


def build_dense_hamiltonian(
    r: DisorderRealization, dense_cap: int = DEFAULT_DENSE_CAP
) -> DenseOperator:
    """Full d^L x d^L matrix of H for one realization (open boundaries)."""
    spec = r.spec
    d = spec.local_dim
    n = spec.hilbert_dim
    if n > dense_cap:
        raise DimensionCapError(
            f"dense build needs {n} basis states, above the cap {dense_cap}"
        )
    sx, sy, sz = site_operators(spec.local_spin)
    # Two-site coupling and the field operator are real in this basis.
    coupling = 0.5 * (np.kron(sx, sx) + np.kron(sy, sy) + np.kron(sz, sz)).real
    szr = sz.real

    ham = np.zeros((n, n))
    for i in range(spec.length - 1):
        left = d**i
        right = d ** (spec.length - i - 2)
        term = np.kron(np.kron(np.eye(left), coupling), np.eye(right))
        ham += term
    for i in range(spec.length):
        left = d**i
        right = d ** (spec.length - i - 1)
        ham += r.fields[i] * np.kron(np.kron(np.eye(left), szr), np.eye(right))
    return DenseOperator(entries=ham)


def _mpo_site_tensors(r: DisorderRealization, shift: float) -> list[np.ndarray]:
    """Bond-5 MPO tensors for H - shift * identity, the shift spread evenly
    over sites.

    The transverse coupling is written with raising/lowering operators,
    (Sx Sx + Sy Sy)/2 = (S+ S- + S- S+)/4, so every site tensor is real.
    """
    spec = r.spec
    d = spec.local_dim
    sx, sy, sz = site_operators(spec.local_spin)
    sp = sx + 1j * sy
    sm = sx - 1j * sy
    eye = np.eye(d, dtype=complex)
    per_site_shift = shift / spec.length

    tensors = []
    for i in range(spec.length):
        w = np.zeros((5, d, d, 5), dtype=complex)
        w[0, :, :, 0] = eye
        w[1, :, :, 0] = sp
        w[2, :, :, 0] = sm
        w[3, :, :, 0] = sz
        w[4, :, :, 0] = r.fields[i] * sz - per_site_shift * eye
        w[4, :, :, 1] = 0.25 * sm
        w[4, :, :, 2] = 0.25 * sp
        w[4, :, :, 3] = 0.5 * sz
        w[4, :, :, 4] = eye
        if i == 0:
            w = w[4:5]
        if i == spec.length - 1:
            w = w[:, :, :, 0:1]
        tensors.append(w)
    return tensors


def build_hamiltonian_mpo(r: DisorderRealization) -> MatrixProductOperator:
    """Open-boundary MPO of H; contracts to the dense Hamiltonian exactly."""
    return MatrixProductOperator(_mpo_site_tensors(r, shift=0.0))


def build_shifted_mpo(r: DisorderRealization, lam: float) -> MatrixProductOperator:
    """MPO of H - lam * identity (the operator inverted by the SIMPS solver)."""
    return MatrixProductOperator(_mpo_site_tensors(r, shift=lam))
