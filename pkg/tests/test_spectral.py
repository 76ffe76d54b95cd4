import math
import warnings

import numpy as np
import pytest
import scipy.integrate

from rbmlab.ensemble import EntryLaw, build_profile, goe_like, sample_band
from rbmlab.spectral import (ConditioningWarning, RegularityParams, eigh, free_convolution, generalized_resolvent,
                             householder_tridiagonal, m_sc, resolvent, schur_corner, semicircle_cdf,
                             semicircle_density, typical_locations, ward_check, ward_violation)


@pytest.mark.parametrize("symmetry", ["symmetric", "hermitian"])
def test_native_matches_lapack(symmetry):
    s = sample_band(build_profile(60, 8), EntryLaw.uniform(), symmetry, seed=5)
    a, b = eigh(s, "native"), eigh(s, "lapack")
    assert np.abs(a.eigenvalues - b.eigenvalues).max() < 1e-12
    assert a.residual < 1e-12 and a.orth_defect < 1e-12
    # eigenvectors agree up to phase
    overlap = np.abs(np.sum(a.eigenvectors.conj() * b.eigenvectors, axis=0))
    assert np.allclose(overlap, 1.0, atol=1e-9)
    assert a.source_seed == 5


def test_householder_is_unitary_similarity():
    h = goe_like(12, "hermitian", 2)
    d, e, q = householder_tridiagonal(h)
    t = q.conj().T @ h @ q
    assert np.allclose(np.diag(t).real, d) and np.allclose(np.abs(np.diag(t, -1)), e)
    assert np.abs(np.triu(t, 2)).max() < 1e-12


def test_unknown_backend():
    with pytest.raises(ValueError):
        eigh(np.eye(3), "magic")


def test_resolvent_matches_inverse_and_ward():
    h = goe_like(40, "symmetric", 1)
    z = 0.3 + 0.05j
    g = resolvent(h, z)
    assert np.allclose(g, np.linalg.inv(h - z * np.eye(40)), atol=1e-10)
    assert ward_check(h, z) < 1e-10
    with pytest.raises(ValueError):
        resolvent(h, 0.3)


def test_generalized_resolvent_corner_equals_schur():
    h = sample_band(build_profile(50, 10), EntryLaw.gaussian(), seed=3).entries
    z, e = 0.1 + 0.2j, 0.37
    g = generalized_resolvent(h, z, e, 10)
    assert np.allclose(g[:10, :10], schur_corner(h, z, e, 10), atol=1e-10)
    assert ward_violation(h, z, e, 10) > 1.0


def test_generalized_resolvent_warns_near_pole():
    h = sample_band(build_profile(30, 5), EntryLaw.gaussian(), seed=3).entries
    pole = np.linalg.eigvalsh(h[5:, 5:])[3]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        generalized_resolvent(h, 0.1j, pole, 5)
    assert any(issubclass(c.category, ConditioningWarning) for c in caught)


def test_semicircle_cdf_against_quadrature():
    for x in [-2.0, -1.3, 0.0, 0.4, 1.99, 2.0]:
        # x = 2 cos(th) removes the square-root endpoint behaviour
        q, _ = scipy.integrate.quad(lambda th: 2 / math.pi * math.sin(th) ** 2, math.acos(x / 2), math.pi)
        assert abs(semicircle_cdf(x) - q) < 1e-12
    assert semicircle_cdf(-5) == 0 and semicircle_cdf(5) == 1


def test_m_sc_root_and_branch():
    z = np.array([0.3 + 1e-3j, -1.5 + 0.2j, 3 + 1j, 0.5j])
    m = m_sc(z)
    assert np.abs(m * m + z * m + 1).max() < 1e-13
    assert np.all(m.imag > 0)
    assert abs(m_sc(0.0) - 1j) < 1e-12


def test_m_sc_against_stieltjes_integral():
    z = 0.7 + 0.3j
    re, _ = scipy.integrate.quad(lambda x: (semicircle_density(x) / (x - z)).real, -2, 2)
    im, _ = scipy.integrate.quad(lambda x: (semicircle_density(x) / (x - z)).imag, -2, 2)
    assert abs(complex(re, im) - m_sc(z)) < 1e-10


def test_free_convolution_of_point_mass_is_scaled_semicircle():
    t, z = 0.5, 0.4 + 0.1j
    got = free_convolution(np.zeros(7), t, z)
    want = m_sc(z / math.sqrt(t)) / math.sqrt(t)
    assert abs(got - want) < 1e-10


def test_free_convolution_t_zero_is_empirical():
    lam = np.array([-1.0, 0.5, 2.0])
    z = 0.2 + 0.3j
    assert abs(free_convolution(lam, 0.0, z) - np.mean(1 / (lam - z))) < 1e-15


def test_typical_locations_symmetric():
    lam = np.linspace(-1, 1, 21)
    g = typical_locations(lam, 0.1)
    assert np.all(np.diff(g) > 0)
    assert np.abs(g[:-1] + g[:-1][::-1]).max() < 0.02


def test_regularity_params_chain():
    n = 1000
    good = RegularityParams(eta_star=n ** -0.5, eta_upper=n ** -0.1, r=n ** -0.3, T=0.1, E0=0.0)
    assert good.check(n) == []
    bad = RegularityParams(eta_star=1e-6, eta_upper=0.9, r=0.5, T=0.1, E0=0.0)
    assert len(bad.check(n)) >= 2
