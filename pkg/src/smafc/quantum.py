"""Complex linear algebra and quantum-information primitives.

Density matrices are plain ``numpy`` complex arrays. Functions that need a
physical state validate it with :func:`check_density_matrix` and raise
``ValueError`` on violation. Process matrices are carried by
:class:`ProcessMatrix`, whose ``chi`` is expressed in the generator basis
returned by :func:`su_generators`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
EIG_CLIP = 1e-12
TP_TOL = 1e-6
MAX_DIM = 16


# ---------------------------------------------------------------------------
# validation helpers

def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.allclose(m, m.conj().T, atol=tol, rtol=0)


def check_density_matrix(rho, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``rho`` as a complex array, raising ``ValueError`` if it is not a state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix has non-finite entries")
    if not is_hermitian(rho, tol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > max(tol, TRACE_TOL):
        raise ValueError(f"density matrix trace {np.trace(rho).real!r} != 1")
    if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def normalize_ket(amplitudes) -> np.ndarray:
    psi = np.asarray(amplitudes, dtype=complex).ravel()
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("zero state vector")
    return psi / norm


def check_pure_state(amplitudes, tol: float = 1e-12) -> np.ndarray:
    psi = np.asarray(amplitudes, dtype=complex).ravel()
    if abs(np.vdot(psi, psi).real - 1.0) > tol:
        raise ValueError("state vector is not normalized")
    return psi


def ket_to_dm(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    return np.outer(psi, psi.conj())


def basis_ket(d: int, n: int) -> np.ndarray:
    psi = np.zeros(d, dtype=complex)
    psi[n] = 1.0
    return psi


def maximally_mixed(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex) / d


def max_entangled_ket(d: int) -> np.ndarray:
    """``sum_i |ii> / sqrt(d)`` with the reference system as the first factor."""
    return np.eye(d, dtype=complex).ravel() / np.sqrt(d)


# ---------------------------------------------------------------------------
# Hermitian spectral helpers

def hermitian_eigh(m: np.ndarray):
    m = np.asarray(m, dtype=complex)
    if not is_hermitian(m, 1e-8):
        raise ValueError("matrix is not Hermitian")
    return np.linalg.eigh((m + m.conj().T) / 2)


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian PSD matrix through its eigendecomposition."""
    w, v = hermitian_eigh(m)
    if w.min() < -1e-8 * max(1.0, abs(w).max()):
        raise ValueError("matrix is not positive semidefinite")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / abs(np.diag(r))
    return q * ph


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


# ---------------------------------------------------------------------------
# generator basis

@lru_cache(maxsize=None)
def _su_generators_cached(d: int) -> np.ndarray:
    ops = [np.eye(d, dtype=complex)]
    pairs = list(combinations(range(d), 2))
    for n, m in pairs:
        s = np.zeros((d, d), dtype=complex)
        s[n, m] = s[m, n] = 1.0
        ops.append(s)
    for n, m in pairs:
        a = np.zeros((d, d), dtype=complex)
        a[n, m] = -1j
        a[m, n] = 1j
        ops.append(a)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        ops.append(np.sqrt(2.0 / (l * (l + 1))) * np.diag(diag).astype(complex))
    out = np.array(ops)
    out.setflags(write=False)
    return out


def su_generators(d: int) -> np.ndarray:
    """Identity followed by the ``d**2 - 1`` generalized Gell-Mann matrices.

    Returns an array of shape ``(d**2, d, d)``. Index 0 is the identity; then
    come the symmetric matrices for pairs ``(n, m)``, ``n < m``, in
    lexicographic order, then the antisymmetric ones in the same pair order,
    then the ``d - 1`` diagonal ones. The non-identity members satisfy
    ``Tr(l_i l_j) = 2 delta_ij``.

    The returned array is read-only and shared between calls.
    """
    if not isinstance(d, (int, np.integer)) or not 2 <= d <= MAX_DIM:
        raise ValueError(f"dimension must be an integer in [2, {MAX_DIM}], got {d!r}")
    return _su_generators_cached(int(d))


def generator_family_sizes(d: int) -> dict:
    k = d * (d - 1) // 2
    return {"identity": 1, "symmetric": k, "antisymmetric": k, "diagonal": d - 1}


def generator_coefficients(m: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Coefficients ``c`` with ``m = sum_i c_i basis[i]`` (real for Hermitian ``m``)."""
    d = basis.shape[1]
    norms = np.array([d] + [2] * (basis.shape[0] - 1), dtype=float)
    # generators are Hermitian, so Tr(l_k^dagger m) = Tr(l_k m)
    return np.einsum("kij,ji->k", basis, np.asarray(m, dtype=complex)) / norms


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    """Real coefficients ``r`` with ``rho = sum_i r_i l_i / d``.

    ``r_0 = Tr(rho) = 1``. With the ``Tr(l_i l_j) = 2 delta_ij`` normalization
    the remaining entries are ``(d / 2) Tr(rho l_i)``; both conventions have to
    be used together to reproduce ``rho``.
    """
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    return d * generator_coefficients(rho, su_generators(d)).real


def rho_from_bloch(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    d = int(round(np.sqrt(r.size)))
    return np.einsum("k,kij->ij", r, su_generators(d)) / d


# ---------------------------------------------------------------------------
# state measures

def fidelity(a, b) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))**2``."""
    a = check_density_matrix(a, tol=1e-8)
    b = check_density_matrix(b, tol=1e-8)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    sa = psd_sqrt(a)
    inner = sa @ b @ sa
    w = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    f = float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)
    return min(max(f, 0.0), 1.0)


def pure_fidelity(psi, rho) -> float:
    psi = np.asarray(psi, dtype=complex).ravel()
    return float(np.real(np.vdot(psi, np.asarray(rho) @ psi)))


def von_neumann_entropy(rho) -> float:
    """Entropy in bits; eigenvalues below ``EIG_CLIP`` contribute nothing."""
    rho = check_density_matrix(rho, tol=1e-8)
    w = np.linalg.eigvalsh(rho)
    w = w[w > EIG_CLIP]
    return float(max(0.0, -np.sum(w * np.log2(w))))


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def binary_entropy(p: float) -> float:
    return shannon_entropy([p, 1.0 - p])


def partial_trace(rho: np.ndarray, dims: tuple[int, int], keep: int) -> np.ndarray:
    da, db = dims
    r = np.asarray(rho).reshape(da, db, da, db)
    if keep == 0:
        return np.einsum("ijkj->ik", r)
    return np.einsum("ijil->jl", r)


# ---------------------------------------------------------------------------
# process matrices

@dataclass(frozen=True)
class ProcessMatrix:
    """Process matrix ``chi`` of ``E(rho) = sum chi_mn l_m rho l_n^dagger``."""

    chi: np.ndarray

    def __post_init__(self):
        chi = np.asarray(self.chi, dtype=complex)
        if chi.ndim != 2 or chi.shape[0] != chi.shape[1]:
            raise ValueError("chi must be square")
        d = int(round(np.sqrt(chi.shape[0])))
        if d * d != chi.shape[0]:
            raise ValueError(f"chi size {chi.shape[0]} is not a perfect square")
        if not np.all(np.isfinite(chi)):
            raise ValueError("chi has non-finite entries")
        chi = chi.copy()
        chi.setflags(write=False)
        object.__setattr__(self, "chi", chi)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.chi.shape[0])))

    @property
    def basis(self) -> np.ndarray:
        return su_generators(self.dim)

    def tp_operator(self) -> np.ndarray:
        """``sum_mn chi_mn l_n^dagger l_m``; the identity for a trace-preserving map."""
        b = self.basis
        return np.einsum("mn,nij,mjk->ik", self.chi, b.conj().transpose(0, 2, 1), b)

    def tp_residual(self) -> float:
        return float(np.linalg.norm(self.tp_operator() - np.eye(self.dim)))

    def is_trace_preserving(self, tol: float = TP_TOL) -> bool:
        return self.tp_residual() <= tol

    def is_completely_positive(self, tol: float = 1e-8) -> bool:
        return is_hermitian(self.chi, tol) and np.linalg.eigvalsh(self.chi).min() >= -tol

    def process_fidelity(self) -> float:
        """Entanglement fidelity with the identity channel, i.e. ``chi_00``."""
        return float(self.chi[0, 0].real)


def chi_from_kraus(kraus) -> ProcessMatrix:
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    d = kraus[0].shape[0]
    basis = su_generators(d)
    coeffs = np.array([generator_coefficients(k, basis) for k in kraus])
    return ProcessMatrix(coeffs.T @ coeffs.conj())


def chi_from_unitary(u) -> ProcessMatrix:
    return chi_from_kraus([u])


def identity_chi(d: int) -> ProcessMatrix:
    chi = np.zeros((d * d, d * d), dtype=complex)
    chi[0, 0] = 1.0
    return ProcessMatrix(chi)


def depolarizing_chi(d: int, p: float = 1.0) -> ProcessMatrix:
    """``(1 - p) rho + p Tr(rho) I / d``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing weight must lie in [0, 1]")
    full = np.diag([1.0 / d**2] + [1.0 / (2 * d)] * (d * d - 1)).astype(complex)
    return ProcessMatrix((1 - p) * identity_chi(d).chi + p * full)


def depolarizing_weight_for_fidelity(d: int, process_fidelity: float) -> float:
    """Depolarizing weight whose ``chi_00`` equals ``process_fidelity``."""
    return (1.0 - process_fidelity) / (1.0 - 1.0 / d**2)


def dephasing_chi(p: float) -> ProcessMatrix:
    """Qubit dephasing ``(1 - p) rho + p Z rho Z``."""
    z = np.diag([1.0, -1.0]).astype(complex)
    return chi_from_kraus([np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * z])


def classical_channel_chi(transition) -> ProcessMatrix:
    """Measure-and-prepare embedding of a classical channel ``Q[y, x]``."""
    q = np.asarray(transition, dtype=float)
    d = q.shape[0]
    kraus = []
    for y in range(d):
        for x in range(d):
            if q[y, x] > 0:
                k = np.zeros((d, d), dtype=complex)
                k[y, x] = np.sqrt(q[y, x])
                kraus.append(k)
    return chi_from_kraus(kraus)


def apply_process(chi: ProcessMatrix, rho: np.ndarray) -> np.ndarray:
    """Unchecked ``sum chi_mn l_m rho l_n^dagger``."""
    b = chi.basis
    left = np.einsum("mij,jk->mik", b, rho)
    return np.einsum("mn,mik,nlk->il", chi.chi, left, b.conj())


def apply_to_subsystem(chi: ProcessMatrix, joint: np.ndarray, d_ref: int) -> np.ndarray:
    """Apply the channel to the second factor of a ``d_ref x d`` joint operator."""
    d = chi.dim
    b = chi.basis
    j = np.asarray(joint, dtype=complex).reshape(d_ref, d, d_ref, d)
    left = np.einsum("mij,ajbk->maibk", b, j)
    out = np.einsum("mn,maibk,nlk->aibl", chi.chi, left, b.conj())
    return out.reshape(d_ref * d, d_ref * d)


def choi_state(chi: ProcessMatrix, tol: float = TP_TOL) -> np.ndarray:
    """``(I x E)(|Phi><Phi|)`` with the reference system as the first factor.

    Trace one for trace-preserving maps; positive semidefinite exactly when
    the map is completely positive.
    """
    if not chi.is_trace_preserving(tol):
        raise ValueError(f"process is not trace preserving (residual {chi.tp_residual():.3g})")
    d = chi.dim
    phi = max_entangled_ket(d)
    return apply_to_subsystem(chi, np.outer(phi, phi.conj()), d)
