import math

import numpy as np
import pytest

from rbmlab import selfconsistent as sc
from rbmlab.ensemble import EntryLaw, build_profile, goe_like, sample_band
from rbmlab.spectral import RegularityParams, m_sc


@pytest.fixture(scope="module")
def prof():
    return build_profile(120, 20)


def test_boundary_encoding():
    assert sc.boundary(0.3) == complex(0.3, 1e-8)
    assert sc.boundary(0.3 + 0.1j) == 0.3 + 0.1j
    q = sc.MQuery(build_profile(30, 5), 0.2, 0.2)
    assert q.z == q.z_tilde


def test_degenerate_point_is_semicircle(prof):
    for z in (0.2, 0.4 + 0.05j):
        q = sc.solve_M(sc.MQuery(prof, z, z))
        assert np.abs(q.M - m_sc(q.z)).max() < 1e-9


def test_solution_satisfies_equation_by_hand(prof):
    q = sc.solve_M(sc.MQuery(prof, 0.1 + 0.05j, 0.13, zeta=0.02))
    s = prof.variance_matrix().astype(float)
    s[:20, :20] -= 0.02 / 20 * (1 + np.eye(20))
    shift = np.where(np.arange(120) < 20, q.z, q.z_tilde)
    assert np.abs(1 / q.M + shift + s @ q.M).max() < 1e-9
    assert np.all(q.M.imag > 0)


def test_half_sum_symmetry(prof):
    q = sc.solve_M(sc.MQuery(prof, 0.1 + 0.05j, 0.15))
    assert sc.half_sum_defect(q) < 1e-9
    # the reflection i -> W - 1 - i (0-based) fixes M on the first block
    assert np.abs(q.M[:20] - q.M[:20][::-1]).max() < 1e-9


def test_half_sum_needs_even_block():
    q = sc.solve_M(sc.MQuery(build_profile(60, 7), 0.1 + 0.05j, 0.12))
    with pytest.raises(ValueError):
        sc.half_sum_defect(q)


def test_guards(prof):
    with pytest.raises(ValueError, match="smallness"):
        sc.solve_M(sc.MQuery(prof, 0.0, 0.5))
    with pytest.raises(ValueError, match="bulk"):
        sc.solve_M(sc.MQuery(prof, 2.5, 2.5))


def test_lipschitz_constants_settle(prof):
    out = sc.lipschitz_probe(sc.MQuery(prof, 0.1 + 0.05j, 0.12))
    assert out["relative_spread"] < 0.05 and all(c > 0 for c in out["constants"])


def test_resolvent_bound_value():
    assert math.isclose(sc.resolvent_bound(900, 300, 0.1, 0.1),
                        900 ** 0.1 * (30 / 300 + 1 / math.sqrt(30)))


def test_compare_empirical_average_matches():
    p = build_profile(400, 100)
    accum = []
    for i in range(3):
        s = sample_band(p, EntryLaw.gaussian(), seed=i)
        q = sc.solve_M(sc.MQuery(p, 0.1 + 0.2j, 0.1 + 0.2j))
        out = sc.compare_empirical(s, q)
        assert out["bound"] > 0 and np.isfinite(out["max_dev"])
        accum.append(out["diag_dev"])
    assert np.mean(accum) < 0.5


def test_regularity_audit_on_full_matrix():
    n = 400
    h = goe_like(n, "symmetric", 3)
    params = RegularityParams(eta_star=n ** -0.5, eta_upper=n ** -0.1, r=n ** -0.3, T=0.1, E0=0.0)
    rows, summary = sc.regularity_audit(h, params, [0.0], w=n)
    assert summary["points"] == 15
    assert summary["diag_im"] == 1.0 and summary["trace_msc"] == 1.0 and summary["half_trace"] == 1.0
