import math

import numpy as np
import pytest

from rbmlab.emf import poly, symbolic
from rbmlab.emf.configs import Configuration, count_configs, enumerate_configs
from rbmlab.emf.generator import (ConfigSpace, dirichlet_check, equilibrium_measure, flow_speed, generator_matrix,
                                  measure_vector, phi, propagation_profile, rk4_solve)
from rbmlab.emf.matchings import enumerate_matchings, matching_count, normalizer
from rbmlab.emf.numeric import (monte_carlo_f, random_instance, random_orthogonal, verify_identity_numeric,
                                young_bound_probe, young_constants)
from rbmlab.emf.observables import OverlapSet, evaluate_g, observable_g, overlaps


def test_config_enumeration_counts():
    assert len(enumerate_configs(4, 3)) == count_configs(4, 3) == 20
    eta = Configuration.from_counts({0: 2, 3: 1}, 4)
    assert eta.move(0, 1) == Configuration((1, 1, 0, 1))
    assert eta.move(2, 1) is eta


@pytest.mark.parametrize("cls", ["symmetric", "hermitian"])
def test_matching_counts(cls):
    eta = Configuration.from_counts({0: 2, 1: 1}, 3)
    assert len(enumerate_matchings(eta, cls)) == matching_count(eta, cls)
    assert matching_count(eta, "symmetric") == 15 and matching_count(eta, "hermitian") == 6
    assert normalizer(eta, "symmetric") == 3 and normalizer(eta, "hermitian") == 2


def test_g_of_single_particle_is_overlap():
    # one particle at site i: g = p_ii
    gen = np.random.default_rng(3)
    u = random_orthogonal(5, gen)
    spec = OverlapSet(index_set=[0, 2])
    p = overlaps(u, spec)
    assert math.isclose(observable_g(u, spec, Configuration.from_counts({1: 1}, 5)), p[1, 1])
    assert math.isclose(p[1, 1], u[0, 1] ** 2 + u[2, 1] ** 2 - 0.4)


def test_g_two_particles_gaussian_moment():
    # two particles at i: g = (3 p_ii^2) / 3 = p_ii^2
    gen = np.random.default_rng(1)
    u = random_orthogonal(4, gen)
    spec = OverlapSet(index_set=[1])
    p = overlaps(u, spec)
    assert math.isclose(observable_g(u, spec, Configuration.from_counts({0: 2}, 4)), p[0, 0] ** 2)


def test_projection_overlaps_match_index_set():
    u = random_orthogonal(6, np.random.default_rng(2))
    a = overlaps(u, OverlapSet(index_set=[1, 4]))
    b = overlaps(u, OverlapSet(projections=np.eye(6)[:, [1, 4]]))
    assert np.allclose(a, b)


@pytest.mark.parametrize("cls", ["symmetric", "hermitian"])
def test_symbolic_identity_small(cls):
    reports = symbolic.verify_all(3, 3, cls)
    assert reports and all(r.equal for r in reports)


def test_wrong_rate_is_detected(monkeypatch):
    monkeypatch.setattr(symbolic, "jump_rate", lambda eta, k, l, cls: 2 * eta[k] * (1 + eta[l]))
    reports = symbolic.verify_all(3, 2, "symmetric")
    assert not all(r.summed_equal for r in reports)


def test_misprinted_hermitian_rule_is_detected(monkeypatch):
    # replace X p_ll = p_kl by X p_ll = p_kk; the identity must then fail
    good = poly.hermitian_rotation

    def bad(k, l, conjugate=False):
        rule = good(k, l, conjugate)
        if conjugate:
            return rule
        return lambda var: [(1, (k, k))] if var == (l, l) else rule(var)

    monkeypatch.setattr(poly, "hermitian_rotation", bad)
    symbolic._second_order_monomial.cache_clear()
    try:
        reports = symbolic.verify_all(2, 2, "hermitian")
        assert not all(r.equal for r in reports)
    finally:
        symbolic._second_order_monomial.cache_clear()


def test_numeric_rotation_route():
    gen = np.random.default_rng(11)
    for _ in range(30):
        u, spec, eta, k, l = random_instance(gen, max_n=6, max_d=3)
        rep = verify_identity_numeric(u, spec, eta, k, l)
        assert rep.passed, (eta, k, l, rep)


def test_generator_rows_sum_to_zero_and_reversible():
    lam = np.array([-1.0, 0.0, 0.7, 2.0])
    for cls in ("symmetric", "hermitian"):
        space = ConfigSpace(4, 2)
        b = generator_matrix(space, lam, cls)
        assert np.abs(b.sum(axis=1)).max() < 1e-12
        pi = measure_vector(space, cls)
        flux = pi[:, None] * b
        assert np.abs(flux - flux.T).max() < 1e-12


def test_phi_values():
    assert phi(0) == 1 and phi(1) == 0.5 and phi(2) == 0.375
    assert equilibrium_measure(Configuration((2, 1, 0))) == 0.375 * 0.5


def test_dirichlet_constant_reported():
    space = ConfigSpace(3, 2)
    f = np.random.default_rng(0).standard_normal(len(space))
    rep = dirichlet_check(space, [0.0, 1.0, 3.0], f)
    assert rep["form"] > 0 and math.isclose(rep["constant"], 0.5, rel_tol=1e-10)


def test_rk4_matches_expm():
    import scipy.linalg
    space = ConfigSpace(3, 2)
    b = generator_matrix(space, [0.0, 1.0, 3.0])
    f0 = np.arange(len(space), dtype=float)
    got, _ = rk4_solve(b, f0, 0.7)
    exact = scipy.linalg.expm(0.7 * b) @ f0
    # step 0.1/||B||: fourth-order truncation leaves a few 1e-9
    assert np.abs(got - exact).max() < 1e-8


def test_flow_speeds():
    assert flow_speed("symmetric") == 0.5 and flow_speed("hermitian") == 1.0


def test_monte_carlo_needs_speed_factor():
    n, t = 4, 0.3
    lam = np.array([-1.5, -0.5, 0.5, 1.5])
    u0 = random_orthogonal(n, np.random.default_rng(7))
    spec = OverlapSet(index_set=[0, 1])
    space = ConfigSpace(n, 1)
    f0 = np.array([evaluate_g(overlaps(u0, spec), e) for e in space.configs])
    b = generator_matrix(space, lam)
    right, _ = rk4_solve(flow_speed("symmetric") * b, f0, t)
    literal, _ = rk4_solve(b, f0, t)
    mc = monte_carlo_f(lam, u0, spec, space.configs, t, 20000, 0.005, seed=3)
    z = np.array([(mc[e][0] - right[i]) / mc[e][1] for i, e in enumerate(space.configs)])
    zl = np.array([(mc[e][0] - literal[i]) / mc[e][1] for i, e in enumerate(space.configs)])
    assert np.abs(z).max() < 4.0
    assert np.abs(zl).max() > 10.0


def test_propagation_decays_with_distance():
    prof = propagation_profile(np.linspace(-2, 2, 12), 1, 5, 2, 0.05, shells=3)
    assert prof[0] > prof[1] > prof[2] >= 0


def test_young_bound_holds_pointwise():
    gen = np.random.default_rng(4)
    us = np.stack([random_orthogonal(6, gen) for _ in range(200)])
    rep = young_bound_probe(us, OverlapSet(index_set=[0, 1, 2]), 0, 1, 4)
    assert rep["holds"] and rep["min_pointwise_slack"] >= -1e-12
    with pytest.raises(ValueError):
        young_constants(0, 1, 3, 6)
