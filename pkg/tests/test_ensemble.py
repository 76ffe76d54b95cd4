import math

import numpy as np
import pytest

from rbmlab.ensemble import (EntryLaw, MomentMatchError, build_profile, circular_distance, gaussian_divisible,
                             goe_like, interpolate, match_four_moments, regularize, sample_band, shift_potential,
                             block_potential, divisible_variance)
from rbmlab.harness.acceptance import moment_quadrature


def test_uniform_profile_values():
    p = build_profile(10, 2)
    assert np.allclose(p.f[[0, 1, 2, 8, 9]], 0.2)
    assert np.all(p.f[3:8] == 0)


def test_halfwidth_profile_normalized():
    p = build_profile(10, 5)
    assert abs(p.f.sum() - 1) < 1e-15 and np.allclose(p.f, 0.1)


def test_too_wide_profile_rejected():
    with pytest.raises(ValueError):
        build_profile(10, 6)


def test_triangular_profile():
    p = build_profile(50, 4, "triangular")
    raw = np.clip(5 - circular_distance(np.arange(50), 50), 0, None)
    assert np.allclose(p.f, raw / raw.sum())
    assert p.variance_matrix()[3, 3] == p.f[0]


@pytest.mark.parametrize("law", [EntryLaw.gaussian(), EntryLaw.uniform(), EntryLaw.rademacher(),
                                 EntryLaw.three_point(0.3, 0.5)])
def test_laws_are_standardized(law):
    gen = np.random.default_rng(1)
    x = law.sample_uniforms(gen.uniform(size=400_000), gen.uniform(size=400_000))
    assert abs(x.mean()) < 0.01 and abs(x.var() - 1) < 0.01
    assert abs(np.mean(x ** 4) - law.m4) < 0.05 * law.m4 + 0.02


def test_three_point_moments():
    p, a = 0.25, 0.7
    law = EntryLaw.three_point(p, a)
    x, w = np.asarray(law.values), np.asarray(law.probs)
    assert math.isclose(np.sum(w * x ** 3), a / math.sqrt(p), rel_tol=1e-12)
    assert math.isclose(np.sum(w * x ** 4), (a * a + 1) / p, rel_tol=1e-12)
    assert math.isclose(law.gap, 1 / p - 1, rel_tol=1e-12)


@pytest.mark.parametrize("law", [EntryLaw.uniform(), EntryLaw.three_point(0.3, 0.4), EntryLaw.three_point(0.5, 0.0)])
def test_matched_moments_against_quadrature(law):
    m = match_four_moments(law, 0.1, 0.1, 30, 300)
    got = moment_quadrature(m)
    want = [law.m1, law.m2, law.m3, law.m4]
    assert max(abs(a - b) for a, b in zip(got, want)) < 1e-12
    assert math.isclose(m.gauss_var, 0.1 * 300 ** -0.1, rel_tol=1e-14)


def test_gaussian_matches_itself():
    g = EntryLaw.gaussian()
    assert match_four_moments(g, 0.1, 0.1, 10, 100) is g


@pytest.mark.parametrize("law", [EntryLaw.rademacher(), EntryLaw.discrete([(-0.5, 0.8), (2.0, 0.2)])])
def test_two_point_laws_rejected(law):
    with pytest.raises(MomentMatchError, match="if and only if"):
        match_four_moments(law, 0.1, 0.1, 10, 100)


def test_matcher_feasibility_boundary():
    # gap 1/p - 1 against s(m4+3) - 6 s^2 + 2 s^3 with s = c N^-eps
    law = EntryLaw.three_point(0.9, 0.0)
    s_ok, s_bad = 0.02, 0.5
    match_four_moments(law, 0.0, s_ok, 10, 100)
    with pytest.raises(MomentMatchError):
        match_four_moments(law, 0.0, s_bad, 10, 100)


def test_sample_band_invariants():
    p = build_profile(40, 5)
    s = sample_band(p, EntryLaw.gaussian(), seed=3)
    h = s.entries
    assert np.array_equal(h, h.T)
    outside = circular_distance(np.subtract.outer(np.arange(40), np.arange(40)), 40) > 5
    assert np.all(h[outside] == 0)
    assert np.array_equal(h, sample_band(p, EntryLaw.gaussian(), seed=3).entries)
    assert not np.array_equal(h, sample_band(p, EntryLaw.gaussian(), seed=4).entries)
    with pytest.raises(ValueError):
        h[0, 0] = 1.0


def test_hermitian_sample():
    s = sample_band(build_profile(30, 4), EntryLaw.gaussian(), "hermitian", seed=1)
    assert np.allclose(s.entries, s.entries.conj().T)
    assert np.all(np.diag(s.entries).imag == 0)


def test_band_variance_by_monte_carlo():
    p = build_profile(20, 3)
    acc = np.zeros((20, 20))
    for i in range(800):
        acc += sample_band(p, EntryLaw.uniform(), seed=i).entries ** 2
    acc /= 800
    off = ~np.eye(20, dtype=bool)
    assert np.allclose(acc[off], p.variance_matrix()[off], atol=0.02)


def test_gaussian_divisible_total_variance():
    p = build_profile(20, 4)
    law = match_four_moments(EntryLaw.uniform(), 0.1, 0.1, 4, 20)
    acc = np.zeros((20, 20))
    for i in range(1500):
        acc += gaussian_divisible(p, law, 0.1, 0.1, seed=i).entries ** 2
    acc /= 1500
    off = ~np.eye(20, dtype=bool)
    assert np.allclose(acc[off], p.variance_matrix()[off], atol=0.015)


def test_gaussian_divisible_rejects_large_c():
    with pytest.raises(ValueError, match="too large"):
        gaussian_divisible(build_profile(50, 5), EntryLaw.gaussian(), 0.0, 2.0, seed=0)


def test_divisible_variance_inside_band():
    g = divisible_variance(build_profile(30, 3), 0.2, 0.1)
    assert np.allclose(g[[0, 1, 3, 27]], 0.1 / 3 * 30 ** -0.2) and g[10] == 0


def test_goe_like_scaling():
    acc_off, acc_diag = 0.0, 0.0
    for i in range(200):
        h = goe_like(30, "symmetric", i)
        acc_off += np.mean(h[np.triu_indices(30, 1)] ** 2)
        acc_diag += np.mean(np.diag(h) ** 2)
    assert abs(acc_off / 200 * 30 - 1) < 0.05 and abs(acc_diag / 200 * 30 - 2) < 0.1


def test_regularize_none_is_identity():
    s = sample_band(build_profile(20, 3), EntryLaw.gaussian(), seed=0)
    assert np.array_equal(regularize(s, None).entries, s.entries)
    assert np.array_equal(regularize(s, math.inf).entries, s.entries)
    r = regularize(s, 2.0, seed=1)
    assert np.abs(r.entries - s.entries).max() > 0
    assert r.provenance[-1]["A"] == 2.0


def test_shift_potential_block():
    s = sample_band(build_profile(20, 3), EntryLaw.gaussian(), seed=0)
    g = block_potential(20, 3, 0.5)
    d = np.diag(shift_potential(s, g).entries - s.entries)
    assert np.allclose(d, -g)


def test_interpolate_endpoints():
    p = build_profile(30, 4)
    a = sample_band(p, EntryLaw.gaussian(), seed=1)
    b = sample_band(p, EntryLaw.uniform(), seed=2)
    assert np.array_equal(interpolate(a, b, 0.0, 5).entries, a.entries)
    assert np.array_equal(interpolate(a, b, 1.0, 5).entries, b.entries)
    mid = interpolate(a, b, 0.5, 5).entries
    assert np.array_equal(mid, mid.T)
    assert np.all((mid == a.entries) | (mid == b.entries))
