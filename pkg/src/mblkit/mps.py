"""Matrix product state / operator machinery.

Conventions:
  * MPS site tensor  A[a, s, b]      (left bond, physical, right bond)
  * MPO site tensor  W[w, s, t, v]   (left bond, phys out, phys in, right bond)
  * boundary bonds have dimension 1; v_left / v_right are the trivial
    boundary vectors contracted into the first and last bond.

Scalars are complex throughout.  Every dense-facing operation is capped so a
stray large chain cannot silently allocate d^L memory.
"""

from __future__ import annotations

import numpy as np

from .entanglement import TwoSiteDensityMatrix

DEFAULT_DENSE_CAP = 2**16
DEFAULT_SVD_TOL = 1e-12


class MatrixProductState:
    """Open-boundary MPS: a list of rank-3 site tensors."""

    def __init__(self, tensors, canonical_center=None, max_bond=None):
        tensors = [np.asarray(t, dtype=complex) for t in tensors]
        if not tensors:
            raise ValueError("need at least one site tensor")
        d = tensors[0].shape[1]
        for i, t in enumerate(tensors):
            if t.ndim != 3:
                raise ValueError(f"site {i}: tensor must be rank 3")
            if t.shape[1] != d:
                raise ValueError(f"site {i}: inconsistent physical dimension")
            if i > 0 and t.shape[0] != tensors[i - 1].shape[2]:
                raise ValueError(f"bond mismatch between sites {i - 1} and {i}")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        self.tensors = tensors
        self.v_left = np.ones(1, dtype=complex)
        self.v_right = np.ones(1, dtype=complex)
        self.canonical_center = canonical_center
        self.max_bond = max_bond if max_bond is not None else max(self.bond_dims)

    @property
    def length(self) -> int:
        return len(self.tensors)

    @property
    def local_dim(self) -> int:
        return self.tensors[0].shape[1]

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> "MatrixProductState":
        out = MatrixProductState(
            [t.copy() for t in self.tensors],
            canonical_center=self.canonical_center,
            max_bond=self.max_bond,
        )
        return out

    def norm(self) -> float:
        return float(np.sqrt(abs(overlap(self, self))))


class MatrixProductOperator:
    """Open-boundary MPO: a list of rank-4 site tensors."""

    def __init__(self, tensors):
        tensors = [np.asarray(t, dtype=complex) for t in tensors]
        if not tensors:
            raise ValueError("need at least one site tensor")
        d = tensors[0].shape[1]
        for i, t in enumerate(tensors):
            if t.ndim != 4:
                raise ValueError(f"site {i}: tensor must be rank 4")
            if t.shape[1] != d or t.shape[2] != d:
                raise ValueError(f"site {i}: inconsistent physical dimensions")
            if i > 0 and t.shape[0] != tensors[i - 1].shape[3]:
                raise ValueError(f"bond mismatch between sites {i - 1} and {i}")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[3] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        self.tensors = tensors
        self.v_left = np.ones(1, dtype=complex)
        self.v_right = np.ones(1, dtype=complex)

    @property
    def length(self) -> int:
        return len(self.tensors)

    @property
    def local_dim(self) -> int:
        return self.tensors[0].shape[1]

    def dagger(self) -> "MatrixProductOperator":
        return MatrixProductOperator(
            [np.conj(np.transpose(t, (0, 2, 1, 3))) for t in self.tensors]
        )

    def to_dense(self, dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
        """Contract to the full d^L x d^L matrix (testing aid)."""
        d = self.local_dim
        if d**self.length > dense_cap:
            raise ValueError("dense contraction above the state cap")
        mat = np.ones((1, 1, 1), dtype=complex)
        for w in self.tensors:
            mat = np.einsum("abw,wstv->asbtv", mat, w)
            mat = mat.reshape(mat.shape[0] * d, mat.shape[2] * d, mat.shape[4])
        return mat[:, :, 0]


def identity_mpo(length: int, d: int) -> MatrixProductOperator:
    eye = np.eye(d, dtype=complex).reshape(1, d, d, 1)
    return MatrixProductOperator([eye.copy() for _ in range(length)])


def mpo_add_identity(op: MatrixProductOperator, coeff: complex) -> MatrixProductOperator:
    """op + coeff * identity as an MPO (direct-sum construction, bond + 1)."""
    d = op.local_dim
    eye = np.eye(d, dtype=complex)
    out = []
    for i, w in enumerate(op.tensors):
        wl, _, _, wr = w.shape
        first, last = i == 0, i == op.length - 1
        nl = wl + (0 if first else 1)
        nr = wr + (0 if last else 1)
        t = np.zeros((nl, d, d, nr), dtype=complex)
        t[:wl, :, :, :wr] = w
        scale = coeff if first else 1.0
        t[0 if first else nl - 1, :, :, 0 if last else nr - 1] = scale * eye
        out.append(t)
    return MatrixProductOperator(out)


def capped_bond_dims(length: int, d: int, max_bond: int) -> list[int]:
    """Bond dimensions min(max_bond, d^i, d^(L-i)) along the chain."""
    dims = []
    for i in range(1, length):
        dims.append(int(min(max_bond, d ** min(i, length - i))))
    return dims


def random_mps(length: int, d: int, max_bond: int, seed: int) -> MatrixProductState:
    """Normalized random MPS with i.i.d. Gaussian entries, then canonicalized.

    Entries are real Gaussians (the chains here are real in the product
    basis); tensors are stored complex like every other state.
    """
    if max_bond < 1:
        raise ValueError("max_bond must be >= 1")
    rng = np.random.default_rng(seed)
    dims = [1] + capped_bond_dims(length, d, max_bond) + [1]
    tensors = [rng.standard_normal((dims[i], d, dims[i + 1])) for i in range(length)]
    psi = MatrixProductState(tensors, max_bond=max_bond)
    psi = canonicalize(psi, 0)
    psi.tensors[0] /= np.linalg.norm(psi.tensors[0])
    return psi


def product_mps(site_vectors) -> MatrixProductState:
    """Bond-1 MPS from one d-vector per site (not normalized)."""
    tensors = [np.asarray(v, dtype=complex).reshape(1, -1, 1) for v in site_vectors]
    return MatrixProductState(tensors, canonical_center=0, max_bond=1)


def basis_product_mps(length: int, d: int, indices) -> MatrixProductState:
    vecs = []
    for k in indices:
        v = np.zeros(d)
        v[k] = 1.0
        vecs.append(v)
    return product_mps(vecs)


def _move_center_right(tensors, site):
    """QR the tensor at ``site`` and absorb R into site+1."""
    a, d, b = tensors[site].shape
    q, rmat = np.linalg.qr(tensors[site].reshape(a * d, b))
    k = q.shape[1]
    tensors[site] = q.reshape(a, d, k)
    tensors[site + 1] = np.einsum("ab,bsc->asc", rmat, tensors[site + 1])


def _move_center_left(tensors, site):
    """RQ the tensor at ``site`` (via QR of the transpose) and absorb into site-1."""
    a, d, b = tensors[site].shape
    mat = tensors[site].reshape(a, d * b)
    q, rmat = np.linalg.qr(mat.conj().T)
    k = q.shape[1]
    tensors[site] = q.conj().T.reshape(k, d, b)
    tensors[site - 1] = np.einsum("asb,bc->asc", tensors[site - 1], rmat.conj().T)


def canonicalize(psi: MatrixProductState, center: int) -> MatrixProductState:
    """Mixed-canonical form: left-isometries below ``center``, right-isometries
    above, the norm carried by the center tensor.  Equal to the input up to
    global phase."""
    if not 0 <= center < psi.length:
        raise ValueError("center out of range")
    tensors = [t.copy() for t in psi.tensors]
    for i in range(center):
        _move_center_right(tensors, i)
    for i in range(psi.length - 1, center, -1):
        _move_center_left(tensors, i)
    return MatrixProductState(tensors, canonical_center=center, max_bond=psi.max_bond)


def overlap(phi: MatrixProductState, psi: MatrixProductState) -> complex:
    """<phi|psi> by left-to-right transfer contraction."""
    if phi.length != psi.length or phi.local_dim != psi.local_dim:
        raise ValueError("overlap requires equal length and local dimension")
    env = np.ones((1, 1), dtype=complex)
    for a, b in zip(phi.tensors, psi.tensors):
        env = np.einsum("ab,asc,bsd->cd", env, np.conj(a), b, optimize=True)
    return complex(env[0, 0])


def mps_to_dense(psi: MatrixProductState, dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Full coefficient vector (site 0 is the most significant index)."""
    d = psi.local_dim
    if d**psi.length > dense_cap:
        raise ValueError("dense conversion above the state cap")
    vec = np.ones((1, 1), dtype=complex)
    for t in psi.tensors:
        vec = np.einsum("pa,asb->psb", vec, t)
        vec = vec.reshape(-1, t.shape[2])
    return vec[:, 0]


def mps_from_dense(
    vec,
    length: int,
    d: int,
    max_bond: int | None = None,
    svd_tol: float = 0.0,
) -> MatrixProductState:
    """MPS by successive SVDs of the coefficient tensor (exact by default)."""
    vec = np.asarray(vec, dtype=complex)
    if vec.size != d**length:
        raise ValueError("vector size does not match d^L")
    tensors = []
    rest = vec.reshape(1, -1)
    left = 1
    for i in range(length - 1):
        mat = rest.reshape(left * d, -1)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep = s > (svd_tol * s[0] if s[0] > 0 else 0.0)
        k = max(1, int(np.count_nonzero(keep)))
        if max_bond is not None:
            k = min(k, max_bond)
        u, s, vh = u[:, :k], s[:k], vh[:k]
        tensors.append(u.reshape(left, d, k))
        rest = (s[:, None] * vh).reshape(k, -1)
        left = k
    tensors.append(rest.reshape(left, d, 1))
    return MatrixProductState(tensors, canonical_center=length - 1)


def _transfer_mpo_left(env, bra_t, w_t, ket_t):
    """Push a 3-layer (bra, MPO, ket) left environment E[a,w,b] through one site."""
    tmp = np.tensordot(env, np.conj(bra_t), axes=([0], [0]))  # w b s c
    tmp = np.tensordot(tmp, w_t, axes=([0, 2], [0, 1]))  # b c t v
    return np.tensordot(tmp, ket_t, axes=([0, 2], [0, 1]))  # c v d


def _transfer_mpo_right(env, bra_t, w_t, ket_t):
    """Push a right environment E[c,v,d] (bonds at the left edge of the
    processed sites) one site further left."""
    tmp = np.tensordot(np.conj(bra_t), env, axes=([2], [0]))  # a s v d
    tmp = np.tensordot(tmp, w_t, axes=([1, 2], [1, 3]))  # a d w t
    return np.tensordot(tmp, ket_t, axes=([1, 3], [2, 1]))  # a w b


def _transfer_mpo2_left(env, bra_t, w1_t, w2_t, ket_t):
    """Push a 4-layer (bra, MPO, MPO, ket) left environment through one site."""
    tmp = np.tensordot(env, np.conj(bra_t), axes=([0], [0]))  # x y b s c
    tmp = np.tensordot(tmp, w1_t, axes=([0, 3], [0, 1]))  # y b c p v
    tmp = np.tensordot(tmp, w2_t, axes=([0, 3], [0, 1]))  # b c v t u
    return np.tensordot(tmp, ket_t, axes=([0, 3], [0, 1]))  # c v u d


def _transfer_mpo2_right(env, bra_t, w1_t, w2_t, ket_t):
    tmp = np.tensordot(np.conj(bra_t), env, axes=([2], [0]))  # a s v u d
    tmp = np.tensordot(tmp, w1_t, axes=([1, 2], [1, 3]))  # a u d x p
    tmp = np.tensordot(tmp, w2_t, axes=([4, 1], [1, 3]))  # a d x y t
    return np.tensordot(tmp, ket_t, axes=([4, 1], [1, 2]))  # a x y b


def _mpo_quadratic_form(psi: MatrixProductState, op: MatrixProductOperator) -> complex:
    env = np.ones((1, 1, 1), dtype=complex)
    for a, w in zip(psi.tensors, op.tensors):
        env = _transfer_mpo_left(env, a, w, a)
    return complex(env[0, 0, 0])


def _mpo2_quadratic_form(
    psi: MatrixProductState, op1: MatrixProductOperator, op2: MatrixProductOperator
) -> complex:
    env = np.ones((1, 1, 1, 1), dtype=complex)
    for a, w1, w2 in zip(psi.tensors, op1.tensors, op2.tensors):
        env = _transfer_mpo2_left(env, a, w1, w2, a)
    return complex(env[0, 0, 0, 0])


def expectation(op: MatrixProductOperator, psi: MatrixProductState) -> float:
    """<psi|op|psi> / <psi|psi>, real part; imaginary part must be noise."""
    if op.length != psi.length or op.local_dim != psi.local_dim:
        raise ValueError("operator/state shape mismatch")
    val = _mpo_quadratic_form(psi, op)
    nrm = overlap(psi, psi).real
    val = val / nrm
    if abs(val.imag) > 1e-10 * (1.0 + abs(val.real)):
        raise ValueError(f"expectation has a non-negligible imaginary part {val.imag}")
    return float(val.real)


def energy_variance(op: MatrixProductOperator, psi: MatrixProductState) -> float:
    """<op^2> - <op>^2, contracting two MPO layers (op^2 is never formed).

    Tiny negative round-off (within -1e-12) is clamped to zero.
    """
    if op.length != psi.length or op.local_dim != psi.local_dim:
        raise ValueError("operator/state shape mismatch")
    nrm = overlap(psi, psi).real
    mean = _mpo_quadratic_form(psi, op).real / nrm
    second = _mpo2_quadratic_form(psi, op, op).real / nrm
    var = second - mean * mean
    if -1e-12 <= var < 0.0:
        var = 0.0
    return float(var)


def two_site_rdm_mps(psi: MatrixProductState, i: int, j: int) -> TwoSiteDensityMatrix:
    """Reduced density matrix of sites (i, j), i < j, by transfer contraction."""
    if not (0 <= i < j < psi.length):
        raise ValueError("need 0 <= i < j < L")
    work = canonicalize(psi, i)
    nrm2 = float(np.linalg.norm(work.tensors[i]) ** 2)
    d = psi.local_dim

    a = work.tensors[i]
    # open physical legs at site i; left environment is the identity
    env = np.einsum("asb,atc->stbc", np.conj(a), a, optimize=True)
    for k in range(i + 1, j):
        t = work.tensors[k]
        env = np.einsum("stbc,bpd,cpe->stde", env, np.conj(t), t, optimize=True)
    t = work.tensors[j]
    # right environment is the identity in right-canonical gauge
    rho = np.einsum("stbc,bpd,cqd->sptq", env, np.conj(t), t, optimize=True)
    rho = rho.reshape(d * d, d * d).conj() / nrm2
    return TwoSiteDensityMatrix(entries=rho, site_pair=(i, j), local_dim=d)


def compress(
    psi: MatrixProductState,
    max_bond: int,
    svd_tol: float = DEFAULT_SVD_TOL,
) -> tuple[MatrixProductState, list[float]]:
    """Truncate every bond to ``max_bond`` and drop relative singular values
    below ``svd_tol``.  Returns the normalized state and the discarded
    singular-value weight (sum of squares, relative) per bond."""
    if max_bond < 1:
        raise ValueError("max_bond must be >= 1")
    work = canonicalize(psi, 0)
    nrm = np.linalg.norm(work.tensors[0])
    if nrm == 0:
        raise ValueError("cannot compress the zero state")
    work.tensors[0] = work.tensors[0] / nrm

    tensors = work.tensors
    discarded = []
    for i in range(work.length - 1):
        a, d, b = tensors[i].shape
        u, s, vh = np.linalg.svd(tensors[i].reshape(a * d, b), full_matrices=False)
        total = float(np.sum(s**2))
        keep = s > svd_tol * s[0]
        k = max(1, min(int(np.count_nonzero(keep)), max_bond))
        discarded.append(float(np.sum(s[k:] ** 2)) / total if total > 0 else 0.0)
        u, s, vh = u[:, :k], s[:k], vh[:k]
        s = s / np.linalg.norm(s)
        tensors[i] = u.reshape(a, d, k)
        tensors[i + 1] = np.einsum(
            "ab,bsc->asc", s[:, None] * vh, tensors[i + 1], optimize=True
        )
    out = MatrixProductState(tensors, canonical_center=work.length - 1, max_bond=max_bond)
    last = out.tensors[-1]
    out.tensors[-1] = last / np.linalg.norm(last)
    return out, discarded
