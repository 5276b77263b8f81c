"""Classical-storage benchmarks and channel-capacity lower bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import poisson

from .quantum import (ProcessMatrix, apply_process, apply_to_subsystem, choi_state, hermitian_eigh,
                      max_entangled_ket, random_unitary, von_neumann_entropy)
from .tomography import OptimizationError, rho_from_t, t_from_rho

TAIL_TOL = 1e-12
NMIN_RTOL = 1e-12
CPTP_TOL = 1e-6
MAX_Q1_DIM = 5
LOG_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# classical fidelity bound for weak coherent inputs

@dataclass(frozen=True)
class BoundParams:
    d: int
    mu: float
    eta: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError("dimension must be an integer >= 2")
        if not self.mu > 0:
            raise ValueError("mean photon number must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError("memory efficiency must lie in (0, 1]")


def optimal_estimation_fidelity(n, d: int):
    """Best measure-and-prepare fidelity from ``n`` copies of a ``d``-level pure state."""
    n = np.asarray(n, dtype=float)
    return (n + 1) / (n + d)


def _photon_numbers(mu: float) -> np.ndarray:
    n_max = int(poisson.isf(TAIL_TOL, mu)) + 2
    return np.arange(n_max + 1)


def classical_bound_unit_efficiency(d: int, mu: float) -> float:
    """Post-selected classical fidelity with unit memory efficiency."""
    BoundParams(d, mu)
    n = _photon_numbers(mu)[1:]
    p = poisson.pmf(n, mu)
    return float(np.sum(optimal_estimation_fidelity(n, d) * p) / -math.expm1(-mu))


@dataclass(frozen=True)
class ClassicalBound:
    fidelity: float
    n_min: int
    gamma: float


def classical_bound_details(d: int, mu: float, eta: float) -> ClassicalBound:
    """Classical fidelity when a measure-and-prepare strategy may discard low photon numbers.

    The adversary keeps every pulse with more than ``n_min`` photons plus a
    fraction ``gamma`` of the ``n_min`` events so that the overall success
    probability matches the memory efficiency ``eta``.
    """
    BoundParams(d, mu, eta)
    budget = -math.expm1(-mu) * eta
    n = _photon_numbers(mu)
    tails = poisson.sf(n, mu)  # P(N >= n + 1)
    ok = np.nonzero(tails <= budget * (1 + NMIN_RTOL))[0]
    n_min = int(ok[0])
    gamma = budget - float(tails[n_min])
    if gamma < 0:
        gamma = 0.0
    p_nmin = float(poisson.pmf(n_min, mu))
    assert gamma <= p_nmin * (1 + 1e-9) + 1e-300, (gamma, p_nmin)
    hi = n[n_min + 1:]
    p_hi = poisson.pmf(hi, mu)
    num = optimal_estimation_fidelity(n_min, d) * gamma + np.sum(optimal_estimation_fidelity(hi, d) * p_hi)
    den = gamma + np.sum(p_hi)
    return ClassicalBound(float(num / den), n_min, gamma)


def classical_bound(d: int, mu: float, eta: float = 1.0) -> float:
    return classical_bound_details(d, mu, eta).fidelity


def classical_bound_curve(d: int, mu: float, etas) -> list[tuple[float, float]]:
    return [(float(e), classical_bound(d, mu, float(e))) for e in etas]


# ---------------------------------------------------------------------------
# coherent information

def _check_cptp(chi: ProcessMatrix, tol: float = CPTP_TOL):
    if not chi.is_trace_preserving(tol):
        raise ValueError(f"process is not trace preserving (residual {chi.tp_residual():.3g})")
    if not chi.is_completely_positive(tol):
        raise ValueError("process is not completely positive")


def purification(rho: np.ndarray) -> np.ndarray:
    """``sum_k sqrt(w_k) |k>_R |e_k>`` with the reference first."""
    w, v = hermitian_eigh(rho)
    w = np.clip(w, 0.0, None)
    d = rho.shape[0]
    return np.einsum("k,ak->ka", np.sqrt(w), v).reshape(d * d)


def _coherent_information(chi: ProcessMatrix, rho: np.ndarray) -> float:
    d = chi.dim
    out = apply_process(chi, rho)
    psi = purification(rho)
    joint = apply_to_subsystem(chi, np.outer(psi, psi.conj()), d)
    return von_neumann_entropy(0.5 * (out + out.conj().T)) - von_neumann_entropy(0.5 * (joint + joint.conj().T))


def coherent_information(chi: ProcessMatrix, rho) -> float:
    """``S(E(rho)) - S((I x E)(|Psi_rho><Psi_rho|))`` in bits; may be negative."""
    _check_cptp(chi)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (chi.dim, chi.dim):
        raise ValueError("state and channel dimensions differ")
    return _coherent_information(chi, rho)


@dataclass
class Q1Result:
    q1: float  # clamped at zero
    raw: float
    state: np.ndarray
    converged: bool
    message: str = ""


def q1_lower_bound(chi: ProcessMatrix, restarts: int = 5, seed: int = 0) -> Q1Result:
    """Maximum coherent information over input states, clamped at zero."""
    _check_cptp(chi)
    d = chi.dim
    if d > MAX_Q1_DIM:
        raise ValueError(f"q1 search is limited to d <= {MAX_Q1_DIM}")

    def fun(t):
        if not np.any(t):
            return math.log2(d) + 1.0  # worse than any state
        return -_coherent_information(chi, rho_from_t(t, d))

    rng = np.random.default_rng(seed)
    starts = [t_from_rho(np.eye(d) / d)] + [rng.standard_normal(d * d) for _ in range(restarts)]
    best = None
    for x0 in starts:
        res = minimize(fun, x0, method="L-BFGS-B", options={"maxiter": 2000, "ftol": 1e-14, "gtol": 1e-9})
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise OptimizationError("coherent-information search produced no finite value")
    raw = -float(best.fun)
    return Q1Result(max(raw, 0.0), raw, rho_from_t(best.x, d), bool(best.success), str(best.message))


# ---------------------------------------------------------------------------
# one-shot accessible information

def adjoint_process(chi: ProcessMatrix, op: np.ndarray) -> np.ndarray:
    """``E^dagger(op) = sum_mn chi_mn l_n^dagger op l_m``."""
    b = chi.basis
    return np.einsum("mn,nij,jk,mkl->il", chi.chi, b.conj().transpose(0, 2, 1), op, b)


def mutual_information(p, q) -> float:
    """``I(X:Y)`` in bits for input distribution ``p[x]`` and channel ``q[x, y]``."""
    p = np.asarray(p, dtype=float)
    q = np.clip(np.asarray(q, dtype=float), 0.0, None)
    qy = p @ q
    joint = p[:, None] * q
    mask = joint > 0
    ratio = q / np.where(qy > 0, qy, 1.0)[None, :]
    return float(np.sum(joint[mask] * np.log2(ratio[mask])))


def blahut_arimoto(q, p0=None, iters: int = 200, tol: float = 1e-13):
    """Capacity-achieving input distribution for the classical channel ``q[x, y]``."""
    q = np.clip(np.asarray(q, dtype=float), 0.0, None)
    p = np.full(q.shape[0], 1.0 / q.shape[0]) if p0 is None else np.asarray(p0, dtype=float)
    for _ in range(iters):
        qy = p @ q
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.where(q > 0, np.log(q / np.where(qy > 0, qy, 1.0)), 0.0)
        c = np.exp(np.sum(q * lr, axis=1))
        new = p * c / np.dot(p, c)
        if np.max(np.abs(new - p)) < tol:
            return new
        p = new
    return p


def _inv_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = hermitian_eigh(m)
    w = np.where(w > 1e-14, w, np.inf)
    return (v / np.sqrt(w)) @ v.conj().T


def square_root_measurement(probs, outputs) -> np.ndarray:
    weighted = np.asarray(probs)[:, None, None] * outputs
    s = _inv_sqrt(weighted.sum(axis=0))
    povm = np.einsum("ij,xjk,kl->xil", s, weighted, s)
    return _complete_povm(povm)


def _complete_povm(povm: np.ndarray) -> np.ndarray:
    """Fold any missing weight (from a singular average state) into the first element."""
    d = povm.shape[1]
    rest = np.eye(d) - povm.sum(axis=0)
    povm = povm.copy()
    povm[0] += 0.5 * (rest + rest.conj().T)
    return povm


def _transition(outputs: np.ndarray, povm: np.ndarray) -> np.ndarray:
    return np.clip(np.einsum("xij,yji->xy", outputs, povm).real, 0.0, None)


def _measurement_step(probs, outputs, povm, info):
    """One monotone POVM update along ``R_y = sum_x p_x s_x log(Q[x,y] / q_y)``."""
    q = _transition(outputs, povm)
    qy = probs @ q
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.where(q > 0, np.log(np.clip(q, LOG_FLOOR, None) / np.where(qy > 0, qy, 1.0)), 0.0)
    R = np.einsum("x,xy,xij->yij", probs, lr, outputs)
    scale = max(np.max(np.abs(np.linalg.eigvalsh(R))), 1e-12)
    eps = 0.5 / scale
    d = povm.shape[1]
    for _ in range(30):
        A = np.eye(d) + eps * R
        cand = np.einsum("yij,yjk,ykl->yil", A, povm, A)
        s = _inv_sqrt(cand.sum(axis=0))
        cand = np.einsum("ij,yjk,kl->yil", s, cand, s)
        cand = 0.5 * (cand + cand.conj().transpose(0, 2, 1))
        val = mutual_information(probs, _transition(outputs, cand))
        if val > info:
            return cand, val
        eps *= 0.5
    return povm, info


def _state_step(chi, probs, states, povm):
    """Top eigenvectors of the linearized mutual information; monotone by convexity."""
    outputs = np.array([apply_process(chi, np.outer(s, s.conj())) for s in states])
    q = _transition(outputs, povm)
    qy = probs @ q
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.where(q > 0, np.log(np.clip(q, LOG_FLOOR, None) / np.where(qy > 0, qy, 1.0)), 0.0)
    pulled = np.array([adjoint_process(chi, e) for e in povm])
    new = []
    for x in range(len(states)):
        g = np.einsum("y,yij->ij", lr[x], pulled)
        w, v = hermitian_eigh(g)
        new.append(v[:, -1])
    return np.array(new)


@dataclass
class C1Result:
    c1: float
    probabilities: np.ndarray
    states: np.ndarray
    povm: np.ndarray
    iterations: int
    converged: bool


def _c1_single(chi, states, max_iter, tol):
    probs = np.full(len(states), 1.0 / len(states))
    outputs = np.array([apply_process(chi, np.outer(s, s.conj())) for s in states])
    povm = square_root_measurement(probs, outputs)
    info = mutual_information(probs, _transition(outputs, povm))
    for it in range(1, max_iter + 1):
        prev = info
        povm, info = _measurement_step(probs, outputs, povm, info)
        probs = blahut_arimoto(_transition(outputs, povm), probs)
        info = max(info, mutual_information(probs, _transition(outputs, povm)))
        cand = _state_step(chi, probs, states, povm)
        cand_out = np.array([apply_process(chi, np.outer(s, s.conj())) for s in cand])
        val = mutual_information(probs, _transition(cand_out, povm))
        if val >= info:
            states, outputs, info = cand, cand_out, val
        if info - prev < tol:
            return C1Result(info, probs, states, povm, it, True)
    return C1Result(info, probs, states, povm, max_iter, False)


def c1_lower_bound(chi: ProcessMatrix, k: int | None = None, restarts: int = 5, seed: int = 0,
                   max_iter: int = 300, tol: float = 1e-10) -> C1Result:
    """One-shot accessible information by alternating maximization.

    Each round improves the POVM (starting from the square-root measurement),
    then the input probabilities (Blahut-Arimoto), then the pure input states.
    The first start uses the computational basis; the rest use ``k`` Haar
    random states. The best value over all starts is returned; ``converged``
    is false when that start hit ``max_iter``.
    """
    _check_cptp(chi)
    d = chi.dim
    k = d if k is None else int(k)
    if k < d:
        raise ValueError("ensemble size must be at least the dimension")
    rng = np.random.default_rng(seed)
    starts = [np.vstack([np.eye(d, dtype=complex), random_unitary(d, rng)[:, : k - d].T])]
    for _ in range(restarts):
        starts.append(np.array([random_unitary(d, rng)[:, 0] for _ in range(k)]))
    best = None
    for s in starts:
        r = _c1_single(chi, s, max_iter, tol)
        if best is None or r.c1 > best.c1:
            best = r
    return best


# ---------------------------------------------------------------------------
# entanglement certificate

@dataclass(frozen=True)
class SchmidtCertificate:
    fidelity: float
    dimension: int
    thresholds: tuple


def schmidt_threshold(k: int, d: int) -> float:
    """Fidelity with ``|Phi_d>`` above which the Schmidt number exceeds ``k - 1``."""
    return (k - 1) / d


def certified_schmidt_number(f: float, d: int) -> int:
    return max(k for k in range(1, d + 1) if f > schmidt_threshold(k, d))


def schmidt_certificate(chi: ProcessMatrix) -> SchmidtCertificate:
    """Fidelity of ``(I x E)(|Phi><Phi|)`` with ``|Phi>`` and the Schmidt number it certifies."""
    _check_cptp(chi)
    d = chi.dim
    phi = max_entangled_ket(d)
    f = float(np.real(phi.conj() @ choi_state(chi) @ phi))
    f = min(max(f, 0.0), 1.0)
    return SchmidtCertificate(f, certified_schmidt_number(f, d),
                              tuple(schmidt_threshold(k, d) for k in range(2, d + 1)))
