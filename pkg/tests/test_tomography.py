import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smafc import tomography as tomo
from smafc.quantum import (ProcessMatrix, apply_process, apply_to_subsystem, chi_from_unitary,
                           depolarizing_chi, fidelity, identity_chi, ket_to_dm, max_entangled_ket,
                           random_density_matrix, random_unitary)

SEEDS = st.integers(0, 2**32 - 1)


def channel_fidelity(a: ProcessMatrix, b: ProcessMatrix) -> float:
    """Fidelity of the normalized Choi states; tolerant of tiny trace errors."""
    d = a.dim
    phi = ket_to_dm(max_entangled_ket(d))
    ca, cb = apply_to_subsystem(a, phi, d), apply_to_subsystem(b, phi, d)
    ca, cb = ca / np.trace(ca).real, cb / np.trace(cb).real
    ca, cb = (ca + ca.conj().T) / 2, (cb + cb.conj().T) / 2
    return fidelity(ca, cb)


# ---------------------------------------------------------------------------
# parameterization

def test_rho_from_t_examples():
    d = 2
    t = np.zeros(4)
    t[0] = 1.0
    np.testing.assert_allclose(tomo.rho_from_t(t, d), [[1, 0], [0, 0]])
    t = np.array([1.0, 1.0, 0.0, 0.0])
    np.testing.assert_allclose(tomo.rho_from_t(t, d), np.eye(2) / 2)
    with pytest.raises(ValueError):
        tomo.rho_from_t(np.zeros(4), d)
    with pytest.raises(ValueError):
        tomo.t_to_matrix(np.zeros(5), 2)


@settings(deadline=None, max_examples=40)
@given(st.integers(2, 5), SEEDS)
def test_any_parameter_vector_gives_a_state(d, seed):
    t = np.random.default_rng(seed).standard_normal(d * d)
    rho = tomo.rho_from_t(t, d)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(rho).min() >= -1e-12
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-14)


@settings(deadline=None, max_examples=20)
@given(st.integers(2, 5), SEEDS)
def test_cholesky_round_trip(d, seed):
    rho = random_density_matrix(d, np.random.default_rng(seed))
    np.testing.assert_allclose(tomo.rho_from_t(tomo.t_from_rho(rho), d), rho, atol=1e-10)
    # numpy's lower Cholesky factor is the conjugate transpose of ours
    L = np.linalg.cholesky(rho)
    np.testing.assert_allclose(tomo.t_to_matrix(tomo.t_from_rho(rho), d), L.conj().T, atol=1e-12)


# ---------------------------------------------------------------------------
# measurement sets

@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_settings_informationally_complete(d):
    m = tomo.paper_settings(d)
    assert len(m) == d * d
    assert np.linalg.matrix_rank(m.design_matrix()) == d * d
    assert m.orthonormal_subset() == list(range(d))


def test_labels_use_channel_names():
    m = tomo.paper_settings(4, [5, 6, 7, 8])
    assert m.labels[:4] == ("C5", "C6", "C7", "C8")
    assert "C5+C8" in m.labels and "C5+iC8" in m.labels


def test_incomplete_set_rejected():
    full = tomo.paper_settings(3)
    kets = np.vstack([full.settings[:6], full.settings[:3]])  # drop the "+i" family
    with pytest.raises(ValueError):
        tomo.MeasurementSet(3, kets)


# ---------------------------------------------------------------------------
# state tomography

def test_noiseless_basis_state():
    m = tomo.paper_settings(4, [5, 6, 7, 8])
    rho = ket_to_dm([1, 0, 0, 0])
    fit = tomo.qst_mle(tomo.expected_state_counts(rho, m, 1e5), m, restarts=1)
    assert fidelity(fit.estimate, rho) >= 0.9999
    assert fit.scale == pytest.approx(1e5, rel=1e-3)


def test_noiseless_two_channel_superposition():
    m = tomo.paper_settings(4)
    rho = ket_to_dm(np.array([1, 0, 0, 1]) / math.sqrt(2))
    fit = tomo.qst_mle(tomo.expected_state_counts(rho, m, 1e5), m, restarts=1)
    assert fidelity(fit.estimate, rho) >= 0.999


def test_mixed_state_gradient_and_history():
    m = tomo.paper_settings(3)
    rho = random_density_matrix(3, np.random.default_rng(2))
    fit = tomo.qst_mle(tomo.expected_state_counts(rho, m, 1e5), m, restarts=0)
    assert fit.grad_norm < 1e-6
    h = np.array(fit.history)
    assert np.all(np.diff(h) <= 1e-9 * max(1.0, h[0]))
    np.testing.assert_allclose(fit.estimate, rho, atol=1e-6)


def test_matches_linear_inversion_for_interior_qubit():
    m = tomo.paper_settings(2)
    rho = np.array([[0.6, 0.1 - 0.2j], [0.1 + 0.2j, 0.4]])
    n = tomo.expected_state_counts(rho, m, 1e4)
    lin, tr = tomo.linear_inversion(n, m)
    fit = tomo.qst_mle(n, m, restarts=0)
    np.testing.assert_allclose(fit.estimate, lin, atol=1e-6)
    assert tr == pytest.approx(1e4, rel=1e-9)


def test_estimate_is_a_state_under_noise():
    m = tomo.paper_settings(4)
    rho = ket_to_dm(np.ones(4) / 2)
    recs = tomo.simulate_state_counts(rho, m, 2_000, 0.5, seed=4)
    fit = tomo.qst_mle(recs, m, seed=1, restarts=2)
    assert np.trace(fit.estimate).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(fit.estimate).min() >= -1e-10


def test_objective_gradient_matches_finite_differences():
    m = tomo.paper_settings(3)
    rng = np.random.default_rng(8)
    n = rng.integers(10, 1000, len(m)).astype(float)
    t = rng.standard_normal(9) * 10
    f, g = tomo.qst_objective(t, m, n)
    h = 1e-6
    for k in range(9):
        e = np.zeros(9)
        e[k] = h
        num = (tomo.qst_objective(t + e, m, n)[0] - tomo.qst_objective(t - e, m, n)[0]) / (2 * h)
        assert num == pytest.approx(g[k], rel=1e-5, abs=1e-6)


def test_infidelity_shrinks_with_counts():
    m = tomo.paper_settings(4)
    rho = ket_to_dm(np.array([1, 1j, 0, 1]) / math.sqrt(3))
    means = []
    for trials in (1_000, 10_000, 100_000):
        f = [fidelity(tomo.qst_mle(tomo.simulate_state_counts(rho, m, trials, 1.0, s), m, restarts=0).estimate,
                      rho) for s in range(10)]
        means.append(1 - np.mean(f))
    assert means[0] > means[1] > means[2]


def test_qst_deterministic():
    m = tomo.paper_settings(3)
    recs = tomo.simulate_state_counts(ket_to_dm([1, 1, 0] / np.sqrt(2)), m, 5_000, 1.0, seed=6)
    a = tomo.qst_mle(recs, m, seed=3, restarts=2)
    b = tomo.qst_mle(recs, m, seed=3, restarts=2)
    np.testing.assert_array_equal(a.estimate, b.estimate)


def test_count_validation():
    m = tomo.paper_settings(2)
    with pytest.raises(ValueError):
        tomo.qst_mle([-1, 2, 3, 4], m)
    with pytest.raises(ValueError):
        tomo.qst_mle([1, 2, 3], m)
    with pytest.raises(ValueError):
        tomo.linear_inversion([0, 0, 0, 0], m)


# ---------------------------------------------------------------------------
# channel application

def test_apply_channel_examples():
    rho = ket_to_dm([1, 0])
    np.testing.assert_allclose(tomo.apply_channel(identity_chi(2), rho), rho, atol=1e-14)
    # full depolarizer written with Pauli Kraus operators
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    expect = sum(p @ rho @ p.conj().T for p in paulis) / 4
    np.testing.assert_allclose(tomo.apply_channel(depolarizing_chi(2, 1.0), rho), expect, atol=1e-14)


def test_apply_channel_rejects_trace_violation():
    with pytest.raises(ValueError):
        tomo.apply_channel(ProcessMatrix(1.5 * identity_chi(2).chi), ket_to_dm([1, 0]))
    with pytest.raises(ValueError):
        tomo.apply_channel(identity_chi(2), ket_to_dm([1, 0, 0]))


# ---------------------------------------------------------------------------
# process tomography

def test_qpt_gradient_matches_finite_differences():
    d = 2
    sets = tomo.paper_settings(d)
    rng = np.random.default_rng(1)
    c = rng.integers(100, 1000, (4, 4)).astype(float)
    prob = tomo._QPTProblem(c.ravel(), tomo._qpt_vectors(sets, sets), tomo._tp_tensors(d)[1:],
                            tomo._chi_norms(d), 50.0, d)
    x = np.append(rng.standard_normal(16), math.log(500.0))
    f, g = prob(x)
    h = 1e-6
    for k in range(len(x)):
        e = np.zeros(len(x))
        e[k] = h
        num = (prob(x + e)[0] - prob(x - e)[0]) / (2 * h)
        assert num == pytest.approx(g[k], rel=1e-5, abs=1e-4)


def test_chi_normalization_fixes_identity_component():
    t = np.random.default_rng(0).standard_normal(16 * 16)
    chi = ProcessMatrix(tomo.chi_from_t(t, 4))
    # identity component of sum chi_mn l_n^dagger l_m equals the identity
    assert np.trace(chi.tp_operator()).real == pytest.approx(4.0, abs=1e-10)
    assert chi.is_completely_positive()


def test_qpt_noiseless_identity_qubit():
    sets = tomo.paper_settings(2)
    c = 1e5 * tomo.process_probabilities(identity_chi(2), sets, sets)
    chi, fit = tomo.qpt_mle(c, sets, sets, restarts=1)
    assert chi.process_fidelity() >= 0.9999
    assert chi.tp_residual() < 1e-4
    assert fit.scale == pytest.approx(1e5, rel=1e-3)


def test_qpt_depolarized_qubit_noiseless():
    sets = tomo.paper_settings(2)
    truth = depolarizing_chi(2, 0.02)
    c = 1e6 * tomo.process_probabilities(truth, sets, sets)
    chi, _ = tomo.qpt_mle(c, sets, sets, restarts=1)
    assert chi.process_fidelity() == pytest.approx(1 - 0.02 + 0.02 / 4, abs=1e-4)


def test_qpt_random_unitary_qutrit():
    d = 3
    sets = tomo.paper_settings(d)
    truth = chi_from_unitary(random_unitary(d, np.random.default_rng(11)))
    rng = np.random.default_rng(12)
    c = rng.poisson(1e6 * tomo.process_probabilities(truth, sets, sets)).astype(float)
    chi, _ = tomo.qpt_mle(c, sets, sets, restarts=1)
    assert channel_fidelity(chi, truth) >= 0.995


def test_trace_preservation_improves_with_penalty():
    sets = tomo.paper_settings(2)
    truth = depolarizing_chi(2, 0.1)
    rng = np.random.default_rng(3)
    c = rng.poisson(2_000 * tomo.process_probabilities(truth, sets, sets)).astype(float)
    residuals = [tomo.qpt_mle(c, sets, sets, penalty=lam, restarts=1)[0].tp_residual()
                 for lam in (0.0, 1e2, 1e4, 1e6)]
    assert all(b <= a * 1.000001 for a, b in zip(residuals, residuals[1:]))
    assert residuals[-1] < 1e-3 * residuals[0]


def test_reconstructed_channel_preserves_states():
    sets = tomo.paper_settings(2)
    truth = depolarizing_chi(2, 0.04)
    c = np.random.default_rng(2).poisson(1e5 * tomo.process_probabilities(truth, sets, sets)).astype(float)
    chi, _ = tomo.qpt_mle(c, sets, sets, restarts=1)
    rho = ket_to_dm(np.array([1, 1]) / math.sqrt(2))
    out = tomo.apply_channel(chi, rho, tol=1e-3)
    assert fidelity(out, rho) >= chi.process_fidelity() - 0.01
    np.testing.assert_allclose(out, apply_process(truth, rho), atol=0.02)


def test_counts_matrix_from_records():
    sets = tomo.paper_settings(2)
    recs = tomo.simulate_process_counts(identity_chi(2), sets, sets, 1000, 1.0, seed=0)
    c = tomo.counts_matrix(recs, sets, sets)
    assert c.shape == (4, 4)
    assert c[0, 1] == 0  # |C1> never projects on |C2>
    with pytest.raises(ValueError):
        tomo.counts_matrix(recs[:-1], sets, sets)


def test_qpt_input_validation():
    sets = tomo.paper_settings(2)
    with pytest.raises(ValueError):
        tomo.qpt_mle(np.ones((3, 4)), sets, sets)
    with pytest.raises(ValueError):
        tomo.qpt_mle(-np.ones((4, 4)), sets, sets)
    with pytest.raises(ValueError):
        tomo.qpt_mle(np.zeros((4, 4)), sets, sets)
    with pytest.raises(ValueError):
        tomo.qpt_mle(np.ones((4, 4)), sets, sets, penalty=-1.0)


def test_matrix_csv_layout():
    text = tomo.matrix_csv(np.array([[1, 1j], [0, -1]]))
    lines = text.splitlines()
    assert lines[0] == "row,col,abs,phase"
    assert len(lines) == 5
    row, col, a, ph = lines[2].split(",")
    assert (row, col) == ("0", "1") and float(a) == 1.0 and float(ph) == pytest.approx(math.pi / 2)
