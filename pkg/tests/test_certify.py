import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smafc import certify
from smafc.quantum import (ProcessMatrix, apply_process, binary_entropy, classical_channel_chi, dephasing_chi,
                           depolarizing_chi, identity_chi, random_density_matrix)


def poisson_pmf(n, mu):
    return math.exp(-mu + n * math.log(mu) - math.lgamma(n + 1))


def oracle_bound(d, mu, eta, n_max=80):
    """Direct photon-number sum with the post-selection budget, no shared code."""
    budget = (1 - math.exp(-mu)) * eta
    pmf = [poisson_pmf(n, mu) for n in range(n_max + 1)]
    tail = lambda k: sum(pmf[k + 1:])  # P(N > k)
    k = 0
    while tail(k) > budget * (1 + 1e-12):
        k += 1
    gamma = max(budget - tail(k), 0.0)
    num = gamma * (k + 1) / (k + d) + sum(pmf[n] * (n + 1) / (n + d) for n in range(k + 1, n_max + 1))
    den = gamma + tail(k)
    return num / den


def oracle_unit_efficiency(d, mu, n_max=80):
    return sum(poisson_pmf(n, mu) * (n + 1) / (n + d) for n in range(1, n_max + 1)) / (1 - math.exp(-mu))


# ---------------------------------------------------------------------------
# classical bound

def test_single_photon_limit():
    assert certify.classical_bound(2, 1e-8, 1.0) == pytest.approx(2 / 3, abs=1e-6)
    assert certify.classical_bound(5, 1e-8, 1.0) == pytest.approx(2 / 6, abs=1e-6)


@pytest.mark.parametrize("d", [2, 3, 4, 5, 8])
@pytest.mark.parametrize("mu", [0.05, 0.38, 0.76, 0.98, 2.0])
def test_unit_efficiency_identity(d, mu):
    assert certify.classical_bound(d, mu, 1.0) == pytest.approx(certify.classical_bound_unit_efficiency(d, mu),
                                                                abs=1e-12)
    assert certify.classical_bound_unit_efficiency(d, mu) == pytest.approx(oracle_unit_efficiency(d, mu), abs=1e-12)


@pytest.mark.parametrize("d,mu,eta", [(5, 0.38, 0.3), (2, 0.76, 0.029), (2, 0.76, 0.187), (4, 0.98, 0.09),
                                      (3, 0.5, 0.6), (2, 0.14, 0.01)])
def test_bound_against_oracle(d, mu, eta):
    assert certify.classical_bound(d, mu, eta) == pytest.approx(oracle_bound(d, mu, eta), abs=1e-12)


def test_frozen_values():
    # frozen outputs, confirmed by the photon-number oracle above
    assert certify.classical_bound(5, 0.38, 0.3) == pytest.approx(0.39541, abs=5e-5)
    assert certify.classical_bound(2, 0.76, 0.029) == pytest.approx(oracle_bound(2, 0.76, 0.029), abs=1e-12)
    assert 0.80 < certify.classical_bound(2, 0.76, 0.029) < 0.83


@settings(deadline=None, max_examples=60)
@given(st.integers(2, 8), st.floats(0.01, 3.0), st.floats(0.001, 1.0))
def test_bound_structure(d, mu, eta):
    det = certify.classical_bound_details(d, mu, eta)
    assert 0 < det.fidelity < 1
    assert 0.0 <= det.gamma <= poisson_pmf(det.n_min, mu) * (1 + 1e-9)
    assert certify.classical_bound(d + 1, mu, eta) <= det.fidelity + 1e-12


@settings(deadline=None, max_examples=40)
@given(st.integers(2, 6), st.floats(0.05, 2.0), st.floats(0.05, 2.0), st.floats(0.01, 1.0))
def test_bound_non_decreasing_in_mu(d, mu1, mu2, eta):
    lo, hi = sorted((mu1, mu2))
    assert certify.classical_bound(d, lo, eta) <= certify.classical_bound(d, hi, eta) + 1e-12


def test_bound_non_increasing_in_efficiency():
    curve = certify.classical_bound_curve(5, 0.38, np.linspace(0.01, 1.0, 200))
    f = [x for _, x in curve]
    assert all(b <= a + 1e-12 for a, b in zip(f, f[1:]))


@pytest.mark.parametrize("args", [(1, 0.5, 0.5), (2, 0.0, 0.5), (2, 0.5, 0.0), (2, 0.5, 1.2), (2.5, 0.5, 0.5)])
def test_bound_rejects_bad_parameters(args):
    with pytest.raises(ValueError):
        certify.classical_bound(*args)


# ---------------------------------------------------------------------------
# coherent information and q1

@pytest.mark.parametrize("p", [0.0, 0.01, 0.1, 0.25, 0.5])
def test_dephasing_coherent_information(p):
    ic = certify.coherent_information(dephasing_chi(p), np.eye(2) / 2)
    assert ic == pytest.approx(1 - binary_entropy(p), abs=1e-9)


def test_identity_coherent_information_is_entropy():
    rho = random_density_matrix(3, np.random.default_rng(0))
    w = np.linalg.eigvalsh(rho)
    s = -float(np.sum(w * np.log2(w)))
    assert certify.coherent_information(identity_chi(3), rho) == pytest.approx(s, abs=1e-9)


def test_coherent_information_rejects_non_cptp():
    with pytest.raises(ValueError):
        certify.coherent_information(ProcessMatrix(2 * identity_chi(2).chi), np.eye(2) / 2)


def test_q1_identity_and_full_depolarizer():
    assert certify.q1_lower_bound(identity_chi(4), restarts=1).q1 == pytest.approx(2.0, abs=1e-3)
    r = certify.q1_lower_bound(depolarizing_chi(2, 1.0), restarts=1)
    assert r.q1 == 0.0 and r.raw < 0


def test_q1_monotone_in_depolarization():
    vals = [certify.q1_lower_bound(depolarizing_chi(2, p), restarts=1).q1 for p in (0.0, 0.05, 0.1, 0.2, 0.3)]
    assert all(b <= a + 1e-6 for a, b in zip(vals, vals[1:]))
    # the maximally mixed input is optimal for the depolarizing channel by symmetry
    for p, v in zip((0.0, 0.05, 0.1, 0.2, 0.3), vals):
        ref = max(certify.coherent_information(depolarizing_chi(2, p), np.eye(2) / 2), 0.0)
        assert v == pytest.approx(ref, abs=1e-5)


def test_q1_dimension_limit():
    with pytest.raises(ValueError):
        certify.q1_lower_bound(identity_chi(6))


# ---------------------------------------------------------------------------
# accessible information

def test_c1_identity():
    r = certify.c1_lower_bound(identity_chi(4), restarts=1)
    assert r.c1 == pytest.approx(2.0, abs=1e-6)


def test_c1_binary_symmetric_channel():
    p = 0.1
    chi = classical_channel_chi([[1 - p, p], [p, 1 - p]])
    r = certify.c1_lower_bound(chi, restarts=2)
    assert r.c1 == pytest.approx(1 - binary_entropy(p), abs=1e-6)


def test_c1_depolarizing_matches_symmetric_ensemble():
    d, p = 4, 0.028
    chi = depolarizing_chi(d, p)
    r = certify.c1_lower_bound(chi, restarts=2)
    # basis ensemble read in the same basis: a d-ary symmetric channel
    keep = 1 - p + p / d
    flip = p / d
    ref = math.log2(d) + keep * math.log2(keep) + (d - 1) * flip * math.log2(flip)
    assert r.c1 == pytest.approx(ref, abs=1e-4)
    assert r.c1 <= math.log2(d) + 1e-9


def test_c1_bounded_and_valid_povm():
    chi = depolarizing_chi(3, 0.3)
    r = certify.c1_lower_bound(chi, k=4, restarts=1)
    assert 0 <= r.c1 <= math.log2(3)
    np.testing.assert_allclose(r.povm.sum(axis=0), np.eye(3), atol=1e-8)
    assert r.probabilities.sum() == pytest.approx(1.0)


def test_c1_rejects_small_ensembles():
    with pytest.raises(ValueError):
        certify.c1_lower_bound(identity_chi(3), k=2)


def test_blahut_arimoto_binary_symmetric():
    p = 0.2
    q = np.array([[1 - p, p], [p, 1 - p]])
    probs = certify.blahut_arimoto(q, np.array([0.9, 0.1]))
    assert certify.mutual_information(probs, q) == pytest.approx(1 - binary_entropy(p), abs=1e-9)


def test_adjoint_duality():
    rng = np.random.default_rng(4)
    chi = depolarizing_chi(3, 0.2)
    rho = random_density_matrix(3, rng)
    op = random_density_matrix(3, rng)
    lhs = np.trace(op @ apply_process(chi, rho))
    rhs = np.trace(certify.adjoint_process(chi, op) @ rho)
    assert lhs == pytest.approx(rhs, abs=1e-12)


# ---------------------------------------------------------------------------
# Schmidt certificate

def test_schmidt_identity():
    cert = certify.schmidt_certificate(identity_chi(4))
    assert cert.fidelity == pytest.approx(1.0) and cert.dimension == 4
    assert cert.thresholds == (0.25, 0.5, 0.75)


@pytest.mark.parametrize("f,k", [(0.975, 4), (0.76, 4), (0.74, 3), (0.70, 3), (0.5, 2), (0.3, 2), (0.2, 1)])
def test_schmidt_ladder(f, k):
    assert certify.certified_schmidt_number(f, 4) == k


def test_schmidt_threshold_is_strict():
    assert certify.certified_schmidt_number(0.75, 4) == 3
