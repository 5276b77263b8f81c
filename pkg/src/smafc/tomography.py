"""Maximum-likelihood state and process tomography.

States are parameterized as ``rho = T^dagger T / Tr(T^dagger T)`` with ``T``
upper triangular; a real vector ``t`` of length ``d**2`` holds the ``d`` real
diagonal entries followed by the real and imaginary parts of the
off-diagonal entries in row-major order. Process matrices use the same
layout at size ``d**2``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import minimize

from .array import CountRecord, simulate_counts
from .quantum import (TP_TOL, ProcessMatrix, apply_process, check_density_matrix, check_pure_state,
                      hermitian_eigh, su_generators)

PROB_FLOOR = 1e-12
RANK_TOL = 1e-9
DEFAULT_RESTARTS = 5


class OptimizationError(RuntimeError):
    """The optimizer failed to produce a usable estimate."""


# ---------------------------------------------------------------------------
# measurement sets

@dataclass(frozen=True)
class MeasurementSet:
    dim: int
    settings: np.ndarray  # (k, d) kets
    labels: tuple = ()

    def __post_init__(self):
        s = np.array([check_pure_state(v) for v in np.asarray(self.settings, dtype=complex)])
        if s.ndim != 2 or s.shape[1] != self.dim:
            raise ValueError(f"settings must be kets of dimension {self.dim}")
        labels = tuple(self.labels) or tuple(f"s{i}" for i in range(len(s)))
        if len(labels) != len(s):
            raise ValueError("one label per setting required")
        s.setflags(write=False)
        object.__setattr__(self, "settings", s)
        object.__setattr__(self, "labels", labels)
        rank = np.linalg.matrix_rank(self.design_matrix(), tol=RANK_TOL)
        if rank < self.dim**2:
            raise ValueError(f"measurement set is not informationally complete (rank {rank} < {self.dim**2})")

    def __len__(self):
        return len(self.settings)

    def design_matrix(self) -> np.ndarray:
        """Rows ``A[i, j] = <psi_i| l_j |psi_i>`` (real for Hermitian generators)."""
        b = su_generators(self.dim)
        return np.einsum("ia,jab,ib->ij", self.settings.conj(), b, self.settings).real

    def projectors(self) -> np.ndarray:
        return np.einsum("ia,ib->iab", self.settings, self.settings.conj())

    def probabilities(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return np.einsum("ia,ab,ib->i", self.settings.conj(), rho, self.settings).real

    def orthonormal_subset(self) -> list[int] | None:
        """Indices of ``d`` mutually orthogonal settings, if there are any."""
        g = np.abs(self.settings.conj() @ self.settings.T)
        chosen = []
        for i in range(len(self)):
            if all(g[i, j] < 1e-9 for j in chosen):
                chosen.append(i)
            if len(chosen) == self.dim:
                return chosen
        return None


def paper_settings(d: int, channels=None) -> MeasurementSet:
    """``|C_n>``, then ``(|C_n> + |C_m>)/sqrt2``, then ``(|C_n> + i|C_m>)/sqrt2`` for ``n < m``."""
    channels = list(range(1, d + 1)) if channels is None else list(channels)
    if len(channels) != d:
        raise ValueError("one channel label per dimension required")
    eye = np.eye(d, dtype=complex)
    kets = [eye[n] for n in range(d)]
    labels = [f"C{channels[n]}" for n in range(d)]
    pairs = list(combinations(range(d), 2))
    for n, m in pairs:
        kets.append((eye[n] + eye[m]) / np.sqrt(2))
        labels.append(f"C{channels[n]}+C{channels[m]}")
    for n, m in pairs:
        kets.append((eye[n] + 1j * eye[m]) / np.sqrt(2))
        labels.append(f"C{channels[n]}+iC{channels[m]}")
    return MeasurementSet(d, np.array(kets), tuple(labels))


# ---------------------------------------------------------------------------
# triangular parameterization

def _triu_offdiag(d: int):
    return np.triu_indices(d, 1)


def t_to_matrix(t, d: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.shape != (d * d,):
        raise ValueError(f"parameter vector must have length {d * d}")
    T = np.zeros((d, d), dtype=complex)
    T[np.diag_indices(d)] = t[:d]
    iu = _triu_offdiag(d)
    k = len(iu[0])
    T[iu] = t[d:d + 2 * k:2] + 1j * t[d + 1:d + 2 * k:2]
    return T


def matrix_to_t(T: np.ndarray) -> np.ndarray:
    d = T.shape[0]
    iu = _triu_offdiag(d)
    off = T[iu]
    return np.concatenate([T[np.diag_indices(d)].real, np.column_stack([off.real, off.imag]).ravel()])


def _grad_to_t(G: np.ndarray) -> np.ndarray:
    """Real gradient of a real function from its derivative ``dF/dT*``."""
    return matrix_to_t(2 * G.real + 2j * G.imag)


def rho_from_t(t, d: int) -> np.ndarray:
    T = t_to_matrix(t, d)
    m = T.conj().T @ T
    tr = np.trace(m).real
    if tr <= 0:
        raise ValueError("parameter vector is zero; normalization undefined")
    return m / tr


def t_from_rho(rho, jitter: float = 0.0) -> np.ndarray:
    """Parameters whose ``rho_from_t`` is ``rho`` (Cholesky, optionally regularized)."""
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    L = np.linalg.cholesky(rho + jitter * np.eye(d))
    return matrix_to_t(L.conj().T)


def _psd_project(m: np.ndarray, floor: float) -> np.ndarray:
    w, v = hermitian_eigh(m)
    w = np.clip(w, floor, None)
    return (v * w) @ v.conj().T


# ---------------------------------------------------------------------------
# state tomography

def counts_vector(counts) -> np.ndarray:
    if len(counts) and isinstance(counts[0], CountRecord):
        n = np.array([c.total for c in counts], dtype=float)
    else:
        n = np.asarray(counts, dtype=float)
    if np.any(~np.isfinite(n)) or np.any(n < 0):
        raise ValueError("counts must be finite and non-negative")
    return n


def linear_inversion(counts, meas: MeasurementSet) -> tuple[np.ndarray, float]:
    """Least-squares Hermitian ``X`` with ``n_i = <psi_i|X|psi_i>``; returns ``(X / Tr X, Tr X)``."""
    n = counts_vector(counts)
    d = meas.dim
    coef, *_ = np.linalg.lstsq(meas.design_matrix(), n, rcond=None)
    x = np.einsum("k,kij->ij", coef, su_generators(d))
    tr = np.trace(x).real
    if tr <= 0:
        raise ValueError("counts carry no signal")
    return x / tr, tr


def qst_objective(t, meas: MeasurementSet, n: np.ndarray):
    """``sum (m_i - n_i)^2 / (2 m_i)`` with ``m_i = |T psi_i|^2`` and its gradient."""
    d = meas.dim
    T = t_to_matrix(t, d)
    tp = meas.settings @ T.T  # rows T psi_i
    m = np.sum(np.abs(tp) ** 2, axis=1)
    floored = m < PROB_FLOOR
    mm = np.where(floored, PROB_FLOOR, m)
    f = float(np.sum((mm - n) ** 2 / (2 * mm)))
    fp = np.where(floored, 0.0, 0.5 * (1.0 - (n / mm) ** 2))
    G = T @ np.einsum("i,ia,ib->ab", fp, meas.settings, meas.settings.conj())
    return f, _grad_to_t(G)


@dataclass
class FitResult:
    estimate: np.ndarray
    objective: float
    scale: float
    params: np.ndarray
    grad_norm: float
    restarts: list = field(default_factory=list)  # (objective, converged, nit) per start
    history: list = field(default_factory=list)  # objective trace of the winning start


def _run_starts(fun, starts, options, bounds=None) -> tuple:
    best = None
    summary = []
    for x0 in starts:
        hist = [fun(x0)[0]]
        res = minimize(fun, x0, jac=True, method="L-BFGS-B", options=options, bounds=bounds,
                       callback=lambda xk: hist.append(fun(xk)[0]))
        if not np.all(np.isfinite(res.x)) or not np.isfinite(res.fun):
            summary.append((float("nan"), False, int(res.nit)))
            continue
        summary.append((float(res.fun), bool(res.success), int(res.nit)))
        key = (round(float(res.fun), 10), float(np.linalg.norm(res.x)))
        if best is None or key < best[0]:
            best = (key, res, hist)
    if best is None:
        raise OptimizationError(f"all {len(starts)} starts diverged: {summary}")
    return best[1], best[2], summary


_OPTIONS = {"maxiter": 20000, "maxfun": 50000, "ftol": 1e-16, "gtol": 1e-10, "maxcor": 30}
_QPT_OPTIONS = {"maxiter": 3000, "maxfun": 6000, "ftol": 1e-15, "gtol": 1e-8, "maxcor": 30}
LOG_SCALE_SPAN = 5.0


def qst_mle(counts, meas: MeasurementSet, seed: int = 0, restarts: int = DEFAULT_RESTARTS) -> FitResult:
    """Maximum-likelihood density matrix from counts aligned with ``meas``.

    The count scale ``N`` is fitted jointly as ``Tr(T^dagger T)``. Starts are
    the PSD-projected linear inversion plus ``restarts`` random points drawn
    from ``seed``; the lowest objective wins.
    """
    n = counts_vector(counts)
    if n.shape != (len(meas),):
        raise ValueError(f"expected {len(meas)} counts, got {n.shape}")
    d = meas.dim
    sub = meas.orthonormal_subset()
    rho_lin, tr_lin = linear_inversion(n, meas)
    n0 = n[sub].sum() if sub is not None and n[sub].sum() > 0 else tr_lin
    starts = [t_from_rho(n0 * _psd_project(rho_lin, 1e-3) / np.trace(_psd_project(rho_lin, 1e-3)).real)]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        starts.append(rng.standard_normal(d * d) * np.sqrt(n0 / d))
    fun = lambda t: qst_objective(t, meas, n)
    res, hist, summary = _run_starts(fun, starts, _OPTIONS)
    T = t_to_matrix(res.x, d)
    scale = float(np.trace(T.conj().T @ T).real)
    return FitResult(rho_from_t(res.x, d), float(res.fun), scale, res.x, float(np.linalg.norm(res.jac)),
                     summary, hist)


def simulate_state_counts(rho, meas: MeasurementSet, trials: int, mu: float, seed: int,
                          efficiency: float = 1.0, dark_counts: float = 0.0) -> list[CountRecord]:
    """One Poisson count record per projective setting."""
    p = efficiency * np.clip(meas.probabilities(check_density_matrix(rho, tol=1e-8)), 0.0, 1.0)
    seeds = np.random.SeedSequence(seed).generate_state(len(meas))
    return [simulate_counts([pi], trials, mu, int(s), dark_counts=dark_counts, setting_id=lab)
            for pi, s, lab in zip(p, seeds, meas.labels)]


def expected_state_counts(rho, meas: MeasurementSet, total: float) -> np.ndarray:
    """Noiseless (mean) counts ``total * <psi_i|rho|psi_i>``."""
    return total * meas.probabilities(rho)


# ---------------------------------------------------------------------------
# process tomography

def apply_channel(chi: ProcessMatrix, rho, tol: float = TP_TOL) -> np.ndarray:
    """``sum chi_mn l_m rho l_n^dagger``, renormalized when the trace is off by less than ``tol``."""
    rho = check_density_matrix(rho, tol=1e-8)
    if rho.shape[0] != chi.dim:
        raise ValueError(f"state dimension {rho.shape[0]} does not match channel dimension {chi.dim}")
    out = apply_process(chi, rho)
    tr = np.trace(out).real
    if abs(tr - 1.0) > tol:
        raise ValueError(f"output trace {tr:.8g} deviates from 1; chi is not trace preserving")
    out = out / tr
    return 0.5 * (out + out.conj().T)


def _qpt_vectors(inputs: MeasurementSet, meas: MeasurementSet) -> np.ndarray:
    """``v[i, j, m] = conj(<psi_j| l_m |phi_i>)`` so that ``p_ij = v^dagger chi v``."""
    b = su_generators(inputs.dim)
    a = np.einsum("ja,mab,ib->ijm", meas.settings.conj(), b, inputs.settings)
    return a.conj().reshape(-1, b.shape[0])


def _tp_tensors(d: int) -> np.ndarray:
    """``W[k, n, m] = Tr(l_k l_n l_m)``."""
    b = su_generators(d)
    return np.einsum("kab,nbc,mca->knm", b, b, b)


def process_probabilities(chi: ProcessMatrix, inputs: MeasurementSet, meas: MeasurementSet) -> np.ndarray:
    v = _qpt_vectors(inputs, meas)
    p = np.einsum("pm,mn,pn->p", v.conj(), chi.chi, v).real
    return p.reshape(len(inputs), len(meas))


def _chi_norms(d: int) -> np.ndarray:
    """``Tr(l_n l_n)``: ``d`` for the identity, 2 for the generators."""
    return np.array([d] + [2] * (d * d - 1), dtype=float)


def chi_from_t(t, d: int) -> np.ndarray:
    """``T^dagger T`` scaled so that ``sum_mn chi_mn Tr(l_n l_m) = d``."""
    D = d * d
    T = t_to_matrix(t, D)
    a = T.conj().T @ T
    s = float(np.real(np.diag(a) @ _chi_norms(d))) / d
    if s <= 0:
        raise ValueError("parameter vector is zero; normalization undefined")
    return a / s


@dataclass
class _QPTProblem:
    c: np.ndarray  # flat counts
    v: np.ndarray
    W: np.ndarray  # k >= 1 slices only; k = 0 is fixed by the normalization
    norms: np.ndarray
    penalty: float
    d: int

    def __call__(self, x):
        d, D = self.d, self.d * self.d
        T = t_to_matrix(x[:-1], D)
        C = np.exp(x[-1])
        a = T.conj().T @ T
        s = float(np.real(np.diag(a) @ self.norms)) / d
        chi = a / s
        tv = self.v @ T.T
        p = np.sum(np.abs(tv) ** 2, axis=1) / s
        r = self.c - C * p
        g = np.einsum("mn,knm->k", chi, self.W)
        f = float(np.sum(r**2) / C) + self.penalty * float(np.sum(np.abs(g) ** 2))
        # df = Tr(M dchi); chain through chi = a / s(a)
        M = np.einsum("p,pm,pn->mn", -2 * r, self.v, self.v.conj())
        M += self.penalty * (np.einsum("k,knm->nm", g.conj(), self.W)
                             + np.einsum("k,kmn->nm", g, self.W.conj()))
        Ma = (M - np.real(np.trace(M @ chi)) * np.diag(self.norms) / d) / s
        dlogc = -np.sum(self.c**2) / C + C * np.sum(p**2)
        return f, np.append(_grad_to_t(T @ Ma), dlogc)


def counts_matrix(records, inputs: MeasurementSet, meas: MeasurementSet) -> np.ndarray:
    """Arrange records into ``c[i, j]`` by ``input_id`` and ``setting_id`` labels."""
    idx_in = {lab: i for i, lab in enumerate(inputs.labels)}
    idx_m = {lab: j for j, lab in enumerate(meas.labels)}
    c = np.full((len(inputs), len(meas)), np.nan)
    for r in records:
        c[idx_in[r.input_id], idx_m[r.setting_id]] = r.total
    if np.isnan(c).any():
        raise ValueError("count records do not cover every input/setting pair")
    return c


def qpt_mle(counts, inputs: MeasurementSet, meas: MeasurementSet, penalty: float | None = None,
            seed: int = 0, restarts: int = DEFAULT_RESTARTS) -> tuple[ProcessMatrix, FitResult]:
    """Maximum-likelihood process matrix from counts ``c[i, j]`` (input ``i``, setting ``j``).

    ``chi`` is ``T^dagger T`` with ``T`` upper triangular, scaled so the
    identity component of trace preservation holds exactly; the count scale
    ``C`` is fitted jointly. The remaining trace-preservation conditions
    enter as the penalty ``penalty * sum_k |sum_mn chi_mn Tr(l_k l_n l_m)|^2``
    over ``k >= 1``; the default weight is ten times the total count.
    """
    c = np.asarray(counts, dtype=float)
    d = inputs.dim
    if meas.dim != d:
        raise ValueError("input and measurement dimensions differ")
    if len(inputs) < d * d:
        raise ValueError(f"need {d * d} input states, got {len(inputs)}")
    if c.shape != (len(inputs), len(meas)):
        raise ValueError(f"count matrix must have shape {(len(inputs), len(meas))}, got {c.shape}")
    if np.any(~np.isfinite(c)) or np.any(c < 0):
        raise ValueError("counts must be finite and non-negative")
    total = c.sum()
    if total <= 0:
        raise ValueError("counts carry no signal")
    penalty = 10.0 * total if penalty is None else float(penalty)
    if penalty < 0:
        raise ValueError("penalty weight must be non-negative")
    D = d * d
    v = _qpt_vectors(inputs, meas)
    prob = _QPTProblem(c.ravel(), v, _tp_tensors(d)[1:], _chi_norms(d), penalty, d)

    sub = meas.orthonormal_subset()
    c0 = c[:, sub].sum(axis=1).mean() if sub is not None else total / len(inputs)
    c0 = max(c0, 1.0)
    B = np.einsum("pm,pn->pmn", v.conj(), v).reshape(len(v), -1)
    chi_lin, *_ = np.linalg.lstsq(B, c.ravel() / c0, rcond=None)
    chi_lin = chi_lin.reshape(D, D)
    chi_lin = _psd_project(0.5 * (chi_lin + chi_lin.conj().T), 1e-4)
    starts = [np.append(t_from_rho(chi_lin), np.log(c0))]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        starts.append(np.append(rng.standard_normal(D * D), np.log(c0)))
    bounds = [(None, None)] * (D * D) + [(np.log(c0) - LOG_SCALE_SPAN, np.log(c0) + LOG_SCALE_SPAN)]
    res, hist, summary = _run_starts(prob, starts, _QPT_OPTIONS, bounds)
    chi = ProcessMatrix(chi_from_t(res.x[:-1], d))
    fit = FitResult(chi.chi, float(res.fun), float(np.exp(res.x[-1])), res.x, float(np.linalg.norm(res.jac)),
                    summary, hist)
    return chi, fit


def simulate_process_counts(chi: ProcessMatrix, inputs: MeasurementSet, meas: MeasurementSet, trials: int,
                            mu: float, seed: int, efficiency: float = 1.0,
                            dark_counts: float = 0.0) -> list[CountRecord]:
    p = efficiency * np.clip(process_probabilities(chi, inputs, meas), 0.0, 1.0)
    seeds = np.random.SeedSequence(seed).generate_state(p.size).reshape(p.shape)
    return [simulate_counts([p[i, j]], trials, mu, int(seeds[i, j]), dark_counts=dark_counts,
                            setting_id=meas.labels[j], input_id=inputs.labels[i])
            for i in range(len(inputs)) for j in range(len(meas))]


# ---------------------------------------------------------------------------
# export

def matrix_csv(m: np.ndarray) -> str:
    """``row, col, abs, phase`` per element, for bar-chart rendering."""
    m = np.asarray(m, dtype=complex)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "col", "abs", "phase"])
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            w.writerow([i, j, repr(float(abs(m[i, j]))), repr(float(np.angle(m[i, j])))])
    return buf.getvalue()
