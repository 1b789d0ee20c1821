import json
from math import factorial, pi, sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import polynomial as P
from scipy.special import eval_hermite

from padua_tomo.estimator import (
    CONVERGENCE_ADVICE,
    comb_factor,
    d_coeff,
    d_coeff_hermite,
    dm_constants,
    estimate_with_errors,
    hermite_at_zero,
    leibniz_coeff,
    nearest_psd,
    rho_element,
    rho_matrix,
    sigma_bound,
)
from padua_tomo.experiments import sample_state
from padua_tomo.padua import padua_points
from padua_tomo.polar import PolarPoly, polar_from_record
from padua_tomo.states import DensityMatrix, as_density_matrix, coherent_state, fock_state, test_state


def exact_polar(rho: np.ndarray, q_max: int) -> PolarPoly:
    """Taylor coefficients of Q = exp(-r^2)/pi sum rho_mn conj(a)^m a^n / sqrt(m! n!) in polar form."""
    c = np.zeros((q_max + 1, 2 * q_max + 1), dtype=complex)
    dim = rho.shape[0]
    for m in range(dim):
        for n in range(dim):
            for l in range((q_max - m - n) // 2 + 1):
                deg = m + n + 2 * l
                if deg > q_max:
                    continue
                c[deg, n - m + q_max] += rho[m, n] * (-1) ** l / factorial(l) / sqrt(factorial(m) * factorial(n)) / pi
    return PolarPoly(q_max, q_max, 3.0, c)


def random_real_polar(rng, q_max):
    c = np.zeros((q_max + 1, 2 * q_max + 1), dtype=complex)
    for m in range(q_max + 1):
        for p in range(0, m + 1):
            if (m - p) % 2:
                continue
            z = complex(*rng.standard_normal(2)) if p else rng.standard_normal()
            c[m, p + q_max] = z
            c[m, -p + q_max] = np.conj(z)
    return PolarPoly(q_max, q_max, 1.0, c)


# --- constants ---------------------------------------------------------------


@pytest.mark.parametrize("q, s, expected", [(2, 2, 1), (0, 2, -2), (0, 1, 0), (1, 3, -6), (0, 4, 12)])
def test_d_coeff_examples(q, s, expected):
    assert d_coeff(q, s) == expected


def test_d_table_matches_hermite_recurrence():
    for s in range(11):
        for q in range(s + 1):
            assert d_coeff(q, s) == d_coeff_hermite(q, s)
            assert isinstance(d_coeff(q, s), int)


def test_d_table_identities():
    for s in range(13):
        assert d_coeff(s, s) == 1
        for q in range(s + 1):
            if (s - q) % 2:
                assert d_coeff(q, s) == 0 and leibniz_coeff(q, s) == 0


@pytest.mark.parametrize("n", range(12))
def test_hermite_at_zero(n):
    assert hermite_at_zero(n) == eval_hermite(n, 0.0)


def test_d_coeff_rejects_bad_indices():
    with pytest.raises(ValueError):
        d_coeff(3, 2)
    with pytest.raises(ValueError):
        d_coeff(-1, 2)


def _derivative_at_zero(coeffs, s):
    return factorial(s) * (coeffs[s] if s < len(coeffs) else 0.0)


@given(st.integers(0, 2**32 - 1), st.integers(0, 10))
@settings(max_examples=30, deadline=None)
def test_leibniz_rule_for_gaussians(seed, s):
    """Both tables weigh g^(q)(0) in d^s/dr^s [exp(-+r^2) g(r)] at r = 0."""
    g = np.random.default_rng(seed).uniform(-1, 1, 11)
    g_derivs = [_derivative_at_zero(g, q) for q in range(s + 1)]
    for sign, table in ((-1, d_coeff), (1, leibniz_coeff)):
        gauss = np.zeros(2 * s + 2)
        for l in range(s + 1):
            gauss[2 * l] = sign**l / factorial(l)
        lhs = _derivative_at_zero(P.polymul(gauss, g), s)
        rhs = sum(table(q, s) * g_derivs[q] for q in range(s + 1))
        assert rhs == pytest.approx(lhs, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("j, k, expected", [(0, 0, 0.5), (2, 2, 1 / 24), (0, 4, 0.1020621)])
def test_comb_factor_examples(j, k, expected):
    assert comb_factor(j, k) == pytest.approx(expected, rel=1e-6)
    assert comb_factor(k, j) == comb_factor(j, k)


def test_dm_constants_cached_and_read_only():
    c = dm_constants(4)
    assert c is dm_constants(4)
    np.testing.assert_array_equal(c.C, c.C.T)
    assert c.d[4, 4] == 1 and c.d[0, 2] == -2
    with pytest.raises(ValueError):
        c.d[0, 0] = 5.0


# --- element estimates -------------------------------------------------------


@pytest.mark.parametrize(
    "state",
    [test_state(), fock_state(0), fock_state(3), coherent_state(0.4 - 0.3j, 12)],
    ids=["test_state", "vacuum", "fock3", "coherent"],
)
def test_exact_taylor_coefficients_recover_rho(state):
    rho = as_density_matrix(state).entries
    d = 4
    est = rho_matrix(exact_polar(rho, 2 * d), d)
    ideal = np.zeros((d + 1, d + 1), dtype=complex)
    m = min(d + 1, rho.shape[0])
    ideal[:m, :m] = rho[:m, :m]
    np.testing.assert_allclose(est, ideal, atol=1e-13)


def test_test_state_sign_conventions():
    est = rho_matrix(exact_polar(as_density_matrix(test_state()).entries, 8), 4)
    assert est[2, 4] == pytest.approx(1j / (2 * sqrt(2)), abs=1e-14)
    assert est[0, 2] == pytest.approx(-1j / (2 * sqrt(2)), abs=1e-14)
    assert est[1, 1] == pytest.approx(0.0, abs=1e-14)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_hermiticity_for_real_inputs(seed):
    poly = random_real_polar(np.random.default_rng(seed), 8)
    for j in range(5):
        for k in range(5):
            assert rho_element(poly, j, k) == pytest.approx(np.conj(rho_element(poly, k, j)), rel=1e-14, abs=1e-14)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_linearity_in_coefficients(seed):
    poly = random_real_polar(np.random.default_rng(seed), 6)
    np.testing.assert_array_equal(rho_matrix(poly.scaled(2.0), 3), 2 * rho_matrix(poly, 3))


def test_rho_element_rejects_insufficient_order():
    poly = exact_polar(np.eye(1, dtype=complex), 4)
    with pytest.raises(ValueError, match="radial order"):
        rho_element(poly, 3, 2)
    with pytest.raises(ValueError, match="q_max"):
        rho_matrix(poly, 3)


def test_vacuum_pipeline_converges():
    errs = []
    for n in (11, 20, 35):
        est = rho_matrix(polar_from_record(sample_state(fock_state(0), padua_points(n)), 4), 2)
        errs.append(np.abs(est - np.diag([1, 0, 0])).max())
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-4


@pytest.mark.parametrize("m", range(4))
def test_fock_pipeline_converges(m):
    ideal = np.zeros((4, 4))
    ideal[m, m] = 1.0
    errs = [
        np.abs(rho_matrix(polar_from_record(sample_state(fock_state(m), padua_points(n)), 6), 3) - ideal).max()
        for n in (16, 24, 35)
    ]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.025


def test_test_state_pipeline_is_hermitian_and_converges():
    ideal = as_density_matrix(test_state()).entries
    est20 = rho_matrix(polar_from_record(sample_state(test_state(), padua_points(20)), 8), 4)
    est35 = rho_matrix(polar_from_record(sample_state(test_state(), padua_points(35)), 8), 4)
    np.testing.assert_allclose(est20, est20.conj().T, atol=1e-12)
    assert np.abs(est35 - ideal).max() < np.abs(est20 - ideal).max()
    assert est35[2, 4] == pytest.approx(1j / (2 * sqrt(2)), abs=1e-2)
    assert est35[2, 2] == pytest.approx(0.5, abs=5e-3)


# --- error bars --------------------------------------------------------------


@pytest.mark.parametrize(
    "j, k, eps, bracket",
    [(0, 0, 0.01, 0.5), (2, 2, 0.1, 2.5), (0, 0, 1e-3, 0.5), (1, 0, 1.0, 0.5), (0, 2, 1.0, sqrt(2) / 2 * 2)],
)
def test_sigma_bound_values(j, k, eps, bracket):
    # the bracket sqrt(k!j!)/2 * sum 1/((j+k-q)/2)! times eps, with the 2 pi of the element normalization
    assert sigma_bound(j, k, 1.0, eps) == pytest.approx(2 * pi * eps * bracket)


def test_sigma_bound_zero_noise_and_validation():
    assert sigma_bound(3, 1, 5.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        sigma_bound(0, 0, -1.0, 0.1)


def test_sigma_bound_is_exact_for_uniform_coefficient_errors():
    # every admissible c_{q, k-j} off by K*eps with aligned phases attains the bound
    for j, k in [(0, 0), (1, 3), (2, 2), (4, 1)]:
        K, eps = 2.0, 1e-3
        s = j + k
        c = np.zeros((s + 1, 2 * s + 1), dtype=complex)
        for q in range(s % 2, s + 1, 2):
            c[q, (k - j) + s] = K * eps
        got = abs(rho_element(PolarPoly(s, s, 1.0, c), j, k))
        assert got == pytest.approx(sigma_bound(j, k, K, eps), rel=1e-12)


def test_estimate_noiseless_with_oracle():
    rec = sample_state(test_state(), padua_points(20))
    est = estimate_with_errors(rec, oracle=test_state(), d_max=4)
    ideal = as_density_matrix(test_state()).entries
    assert len(est.results) == 25
    for r in est.results:
        assert r.sigma_bound == 0.0
        assert r.recon_bound == pytest.approx(abs(ideal[r.j, r.k] - r.value), abs=1e-15)
        assert (r.n_used, r.N_used, r.K_used) == (20, 231, 1.0)
    assert "recon_bound" not in est.metadata


def test_recon_bound_shrinks_with_order():
    b = [
        estimate_with_errors(sample_state(test_state(), padua_points(n)), oracle=test_state())[4, 4].recon_bound
        for n in (20, 35)
    ]
    assert b[1] < b[0]


def test_estimate_without_oracle_flags_recon_bound():
    est = estimate_with_errors(sample_state(fock_state(0), padua_points(12)), d_max=2)
    assert all(r.recon_bound is None for r in est.results)
    assert est.metadata["recon_bound"] == CONVERGENCE_ADVICE
    table = est.table()
    assert table.count("n/a") == 9
    rows = json.loads(est.to_json())
    assert rows[0].keys() == {"j", "k", "re", "im", "sigma_bound", "recon_bound", "n", "N", "epsilon", "K"}
    assert rows[0]["recon_bound"] is None


def test_estimate_sigma_bound_uses_record_noise():
    rec = sample_state(test_state(), padua_points(20), epsilon=1e-3, seed=1)
    with pytest.warns(UserWarning, match="noise-dominated"):
        est = estimate_with_errors(rec, d_max=4, K=1.0)
    assert est[0, 0].sigma_bound == pytest.approx(2 * pi * 5e-4)
    assert est[0, 0].epsilon == 1e-3


def test_estimate_rejects_wigner_records_and_bad_K():
    rec = sample_state(fock_state(0), padua_points(8), function_tag="wigner")
    with pytest.raises(ValueError, match="Husimi"):
        estimate_with_errors(rec, d_max=2)
    with pytest.raises(ValueError):
        estimate_with_errors(sample_state(fock_state(0), padua_points(8)), d_max=2, K=0)


def test_nearest_psd():
    m = np.array([[1.0, 0.9], [0.9, 0.2]])
    out = nearest_psd(m)
    assert np.linalg.eigvalsh(out).min() >= -1e-15
    np.testing.assert_allclose(out, out.T)
    assert DensityMatrix(out, physical=False).cutoff == 1
