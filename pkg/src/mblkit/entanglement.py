"""Entanglement indicators: concurrence, negativity, geometric entanglement,
participation ratios, and distance profiles with exponential-decay fits.

Concurrence is defined for two-qubit reduced states only; negativity works
for local dimension 2 and 3 alike.  Geometric entanglement comes in two
flavors: an alternating optimizer on the dense coefficient vector (the
oracle) and the equivalent bond-1 sweep optimizer for matrix product states.
Both march a whole batch of random restarts in lockstep.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .mps import MatrixProductState

logger = logging.getLogger(__name__)

_SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_YY = np.kron(_SIGMA_Y, _SIGMA_Y)

#: eigenvalues this far below zero are treated as round-off
EIG_CLAMP = 1e-12


@dataclass(frozen=True)
class TwoSiteDensityMatrix:
    """State of a pair of sites after tracing out the rest of the chain."""

    entries: np.ndarray
    site_pair: tuple[int, int] = (0, 1)
    local_dim: int = 2

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        object.__setattr__(self, "entries", m)
        d2 = self.local_dim**2
        if m.shape != (d2, d2):
            raise ValueError(f"expected a {d2}x{d2} matrix, got {m.shape}")

    def check(self, tol: float = 1e-10) -> None:
        m = self.entries
        if np.max(np.abs(m - m.conj().T)) > tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > tol:
            raise ValueError("density matrix does not have unit trace")
        if np.min(np.linalg.eigvalsh(m)) < -tol:
            raise ValueError("density matrix is not positive semidefinite")


def two_site_rdm_dense(state, i: int, j: int, local_dim: int = 2) -> TwoSiteDensityMatrix:
    """Partial trace of |psi><psi| keeping sites (i, j), index order i then j."""
    state = np.asarray(state)
    d = local_dim
    length = int(round(np.log(state.size) / np.log(d)))
    if d**length != state.size:
        raise ValueError("state size is not a power of the local dimension")
    if i == j or not (0 <= i < length) or not (0 <= j < length):
        raise ValueError("need two distinct sites inside the chain")
    psi = state.reshape((d,) * length)
    psi = np.moveaxis(psi, (i, j), (0, 1)).reshape(d * d, -1)
    rho = psi @ psi.conj().T
    nrm = np.trace(rho).real
    return TwoSiteDensityMatrix(entries=rho / nrm, site_pair=(i, j), local_dim=d)


def spin_flip(rho: TwoSiteDensityMatrix) -> TwoSiteDensityMatrix:
    """(sigma_y x sigma_y) rho* (sigma_y x sigma_y); an involution on qubit pairs."""
    if rho.local_dim != 2:
        raise ValueError("spin flip is defined for qubit pairs only")
    flipped = _YY @ rho.entries.conj() @ _YY
    return TwoSiteDensityMatrix(entries=flipped, site_pair=rho.site_pair, local_dim=2)


def concurrence(rho: TwoSiteDensityMatrix) -> float:
    """Wootters concurrence max(0, sqrt(l1) - sqrt(l2) - sqrt(l3) - sqrt(l4))
    from the descending eigenvalues l_i of rho * rho_tilde.

    The sqrt(l_i) are evaluated as the singular values of
    B = sqrt(rho) (sy x sy) sqrt(rho)^T, which has B B^dag similar to
    rho * rho_tilde; unlike a direct eigendecomposition of that non-Hermitian
    product this keeps full precision for the near-zero roots.
    """
    if rho.local_dim != 2:
        raise ValueError("concurrence is defined for qubit pairs only")
    vals, vecs = np.linalg.eigh(rho.entries)
    if vals.min() < -EIG_CLAMP:
        raise ValueError("density matrix has a significantly negative eigenvalue")
    sqrt_rho = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T
    roots = np.linalg.svd(sqrt_rho @ _YY @ sqrt_rho.T, compute_uv=False)
    return float(max(0.0, roots[0] - roots[1] - roots[2] - roots[3]))


def partial_transpose(rho, subsystem: str = "first") -> np.ndarray:
    """Transpose the indices of one tensor factor of a two-site density matrix."""
    if isinstance(rho, TwoSiteDensityMatrix):
        mat, d = rho.entries, rho.local_dim
    else:
        mat = np.asarray(rho)
        d = int(round(np.sqrt(mat.shape[0])))
    t = mat.reshape(d, d, d, d)
    if subsystem == "first":
        t = t.transpose(2, 1, 0, 3)
    elif subsystem == "second":
        t = t.transpose(0, 3, 2, 1)
    else:
        raise ValueError("subsystem must be 'first' or 'second'")
    return t.reshape(d * d, d * d)


def negativity(rho: TwoSiteDensityMatrix) -> float:
    """Sum of the magnitudes of the negative partial-transpose eigenvalues.

    The result does not depend on which subsystem is transposed; both are
    computed and must agree to 1e-10.
    """
    vals = []
    for subsystem in ("first", "second"):
        lam = np.linalg.eigvalsh(partial_transpose(rho, subsystem))
        vals.append(float(np.sum((np.abs(lam) - lam) / 2.0)))
    if abs(vals[0] - vals[1]) > 1e-10:
        raise ValueError("negativity differs between transposed subsystems")
    return vals[0]


def negativity_lower_bound(c: float) -> float:
    """Two-qubit lower bound on the trace-norm negativity ||rho^T||_1 - 1
    (twice the negative-eigenvalue sum) at a given concurrence."""
    return float(np.sqrt((1.0 - c) ** 2 + c**2) - (1.0 - c))


def total_nn(measure: str, rdms: Sequence[TwoSiteDensityMatrix]) -> float:
    """Sum of a pair measure over the adjacent-pair density matrices."""
    if measure == "concurrence":
        return float(sum(concurrence(r) for r in rdms))
    if measure == "negativity":
        return float(sum(negativity(r) for r in rdms))
    raise ValueError(f"unknown measure {measure!r}")


def npr(state, normalize_by_dim: bool = False) -> float:
    """Participation ratio (sum |c|^2)^2 / sum |c|^4 over the configuration
    basis; optionally divided by the Hilbert-space dimension."""
    c2 = np.abs(np.asarray(state).ravel()) ** 2
    p = float(np.sum(c2) ** 2 / np.sum(c2**2))
    if normalize_by_dim:
        p /= c2.size
    return p


@dataclass
class EntanglementProfile:
    """Pair measure vs site separation, averaged over pairs and states."""

    distances: np.ndarray
    mean_concurrence: np.ndarray | None
    mean_negativity: np.ndarray | None
    counts: np.ndarray


def _pair_rdm(state, d: int, i: int, j: int) -> TwoSiteDensityMatrix:
    from .mps import MatrixProductState, two_site_rdm_mps

    if isinstance(state, MatrixProductState):
        return two_site_rdm_mps(state, i, j)
    return two_site_rdm_dense(state, i, j, local_dim=d)


def _state_geometry(state, local_dim: int | None):
    from .mps import MatrixProductState

    if isinstance(state, MatrixProductState):
        return state.length, state.local_dim
    vec = np.asarray(state)
    d = 2 if local_dim is None else local_dim
    length = int(round(np.log(vec.size) / np.log(d)))
    return length, d


def pair_profile(
    states: Iterable, measure: str = "both", local_dim: int | None = None
) -> EntanglementProfile:
    """Average a pair measure over all (i, i+dist) pairs and all states,
    for separations up to L/2."""
    if measure not in ("concurrence", "negativity", "both"):
        raise ValueError(f"unknown measure {measure!r}")
    states = list(states)
    if not states:
        raise ValueError("empty ensemble")
    length, d = _state_geometry(states[0], local_dim)
    if measure in ("concurrence", "both") and d != 2:
        if measure == "concurrence":
            raise ValueError("concurrence requires local dimension 2")
        measure = "negativity"

    max_dist = length // 2
    dists = np.arange(1, max_dist + 1)
    sum_c = np.zeros(max_dist)
    sum_n = np.zeros(max_dist)
    counts = np.zeros(max_dist, dtype=int)
    for state in states:
        for k, dist in enumerate(dists):
            for i in range(length - dist):
                rho = _pair_rdm(state, d, i, i + dist)
                if measure in ("concurrence", "both"):
                    sum_c[k] += concurrence(rho)
                if measure in ("negativity", "both"):
                    sum_n[k] += negativity(rho)
                counts[k] += 1
    mean_c = sum_c / counts if measure in ("concurrence", "both") else None
    mean_n = sum_n / counts if measure in ("negativity", "both") else None
    return EntanglementProfile(
        distances=dists, mean_concurrence=mean_c, mean_negativity=mean_n, counts=counts
    )


@dataclass(frozen=True)
class DecayFit:
    slope: float
    xi: float
    stderr: float
    r_squared: float
    excluded_distances: tuple[int, ...]


def fit_entanglement_length(distances, means, min_points: int = 3) -> DecayFit:
    """Least-squares line through (distance, log mean).  Returns the raw slope
    and the decay length xi = -1/slope.  Distances with nonpositive means are
    excluded (and reported)."""
    distances = np.asarray(distances, dtype=float)
    means = np.asarray(means, dtype=float)
    good = means > 0
    excluded = tuple(int(x) for x in distances[~good])
    if excluded:
        logger.info("decay fit excluded distances with nonpositive means: %s", excluded)
    x = distances[good]
    y = np.log(means[good])
    if x.size < min_points:
        raise ValueError(f"need at least {min_points} distances with positive means")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = x.size - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = float(np.sqrt(np.sum(resid**2) / dof / sxx)) if dof > 0 else 0.0
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    xi = -1.0 / slope if slope != 0 else np.inf
    return DecayFit(
        slope=float(slope),
        xi=float(xi),
        stderr=stderr,
        r_squared=r2,
        excluded_distances=excluded,
    )


def _s_g_from_lambda(lam: float, log_base: float | None) -> float:
    s_g = -np.log(lam)
    if log_base is not None:
        s_g /= np.log(log_base)
    return float(s_g)


def _random_product_batch(rng, restarts: int, length: int, d: int) -> np.ndarray:
    vecs = rng.standard_normal((restarts, length, d)) + 1j * rng.standard_normal(
        (restarts, length, d)
    )
    return vecs / np.linalg.norm(vecs, axis=2, keepdims=True)


def geometric_entanglement_dense(
    state,
    restarts: int = 200,
    tol: float = 1e-10,
    max_sweeps: int = 500,
    local_dim: int = 2,
    seed: int | None = None,
    log_base: float | None = None,
) -> tuple[float, float]:
    """Best squared overlap Lambda with any product state, by alternating
    single-site updates on the dense vector (each update is the normalized
    environment contraction).  Returns (Lambda, S_G)."""
    vec = np.asarray(state, dtype=complex).ravel()
    d = local_dim
    length = int(round(np.log(vec.size) / np.log(d)))
    if d**length != vec.size:
        raise ValueError("state size is not a power of the local dimension")
    vec = vec / np.linalg.norm(vec)

    rng = np.random.default_rng(seed)
    phi = _random_product_batch(rng, restarts, length, d)
    psi_bar = np.conj(vec)

    lam_prev = np.zeros(restarts)
    lam = np.zeros(restarts)
    converged = False
    for _ in range(max_sweeps):
        # rights[i]: psi* contracted with phi on sites >= i, a d^i tensor
        rights = [None] * (length + 1)
        rights[length] = np.broadcast_to(psi_bar, (restarts, vec.size))
        for i in range(length - 1, 0, -1):
            blk = rights[i + 1].reshape(restarts, d**i, d)
            rights[i] = np.einsum("rxs,rs->rx", blk, phi[:, i], optimize=True)

        left = np.ones((restarts, 1), dtype=complex)
        amp = None
        for i in range(length):
            blk = rights[i + 1].reshape(restarts, left.shape[1], d)
            env = np.einsum("rx,rxs->rs", left, blk, optimize=True)
            amp = np.linalg.norm(env, axis=1)
            phi[:, i] = np.conj(env) / amp[:, None]
            left = np.einsum("rx,rs->rxs", left, phi[:, i], optimize=True).reshape(
                restarts, -1
            )
        lam = amp**2
        if np.max(np.abs(lam - lam_prev)) < tol:
            converged = True
            break
        lam_prev = lam
    if not converged:
        logger.info("product-state optimizer hit max_sweeps; keeping best so far")
    best = float(np.max(lam))
    return best, _s_g_from_lambda(best, log_base)


def geometric_entanglement_mps(
    psi: "MatrixProductState",
    restarts: int = 200,
    tol: float = 1e-10,
    max_sweeps: int = 500,
    seed: int | None = None,
    log_base: float | None = None,
) -> tuple[float, float]:
    """Same alternating optimization against an MPS, the candidate kept at
    bond dimension 1 throughout.  Returns (Lambda, S_G)."""
    from .mps import overlap

    tensors = psi.tensors
    length, d = psi.length, psi.local_dim
    norm2 = float(overlap(psi, psi).real)

    rng = np.random.default_rng(seed)
    phi = _random_product_batch(rng, restarts, length, d)

    lam_prev = np.zeros(restarts)
    lam = np.zeros(restarts)
    converged = False
    for _ in range(max_sweeps):
        rights = [None] * (length + 1)
        rights[length] = np.ones((restarts, 1), dtype=complex)
        for i in range(length - 1, 0, -1):
            rights[i] = np.einsum(
                "asb,rs,rb->ra", np.conj(tensors[i]), phi[:, i], rights[i + 1],
                optimize=True,
            )

        left = np.ones((restarts, 1), dtype=complex)
        amp = None
        for i in range(length):
            env = np.einsum(
                "ra,asb,rb->rs", left, np.conj(tensors[i]), rights[i + 1], optimize=True
            )
            amp = np.linalg.norm(env, axis=1)
            phi[:, i] = np.conj(env) / amp[:, None]
            left = np.einsum(
                "ra,asb,rs->rb", left, np.conj(tensors[i]), phi[:, i], optimize=True
            )
        lam = amp**2 / norm2
        if np.max(np.abs(lam - lam_prev)) < tol:
            converged = True
            break
        lam_prev = lam
    if not converged:
        logger.info("product-state optimizer hit max_sweeps; keeping best so far")
    best = float(np.max(lam))
    return best, _s_g_from_lambda(best, log_base)
