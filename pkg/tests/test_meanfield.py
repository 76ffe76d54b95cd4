import numpy as np
import pytest

from rbmlab import meanfield as mf
from rbmlab.ensemble import EntryLaw, build_profile, sample_band


@pytest.fixture(scope="module")
def band():
    return sample_band(build_profile(60, 12), EntryLaw.gaussian(), seed=21)


def test_block_diagonal_gives_upper_block():
    h = np.diag(np.arange(6.0))
    h[0, 1] = h[1, 0] = 0.3
    assert np.array_equal(mf.build_Q(h, 10.0, w=2), h[:2, :2])


def test_two_by_two_closed_form():
    a, b, d, e = 0.4, 0.7, -0.2, 0.9
    q = mf.build_Q(np.array([[a, b], [b, d]]), e, w=1)
    assert abs(q[0, 0] - (a - b * b / (d - e))) < 1e-15


def test_full_width_is_the_matrix(band):
    assert np.array_equal(mf.build_Q(band.entries, 0.3, w=60), band.entries)


def test_q_eigenvalues_are_shifted_eigenvalues(band):
    # xi in spec(Q_e)  <=>  xi in spec(H - (e - xi) 1_{j > W})
    e = 0.17
    xi = np.linalg.eigvalsh(mf.build_Q(band, e))
    for x in xi[::3]:
        lam = np.linalg.eigvalsh(mf.shifted(band, e - x))
        assert np.abs(lam - x).min() < 1e-10


def test_pole_error_names_the_eigenvalue(band):
    pole = mf.d_spectrum(band)[7]
    with pytest.raises(mf.PoleError, match="lower-block eigenvalue"):
        mf.build_Q(band, pole)
    _, info = mf.build_Q(band, pole + 1e-3, details=True)
    assert info["asymmetry"] < 1e-10 and abs(info["pole_distance"] - 1e-3) < 1e-9


def test_g_vanishes_at_eigenvalue(band):
    lam = np.linalg.eigvalsh(band.entries)
    for k in (5, 30, 51):
        sol = mf.solve_g_for_e(band, k, lam[k])
        assert abs(sol.g) < 1e-9 and abs(sol.value - lam[k]) < 1e-9
        assert 0 < sol.weight <= 1


def test_full_width_is_degenerate():
    s = sample_band(build_profile(20, 10), EntryLaw.gaussian(), seed=1)
    sol = mf.solve_g_for_e(s, 4, 0.3, w=20)
    lam = np.linalg.eigvalsh(s.entries)[4]
    assert sol.degenerate and sol.weight == 1.0 and abs(sol.value - lam) < 1e-14


def test_projection_ratio_is_one_without_lower_block():
    s = sample_band(build_profile(20, 10), EntryLaw.gaussian(), seed=1)
    rows = mf.projection_check(s, 0.0, 1.0, w=20)
    assert rows and all(abs(r["r"] - 1) < 1e-12 for r in rows)


def test_slope_formula(band):
    lam = np.linalg.eigvalsh(band.entries)
    rep = mf.slope_check(band, 30, lam[30] + 1e-3)
    assert rep.rel_err < 1e-6 and rep.fd_slope < 0


def test_slope_window_crossing_pole(band):
    pole = mf.d_spectrum(band)[20]
    with pytest.raises(mf.PoleError):
        mf.slope_check(band, 30, pole, fd_step=1e-4)


def test_curve_values_are_decreasing_offset(band):
    vals = mf.curve_values_at(band, 0.05)
    vals2 = mf.curve_values_at(band, 0.06)
    common = set(vals) & set(vals2)
    assert common
    for k in common:
        assert vals2[k] - 0.06 < vals[k] - 0.05


def test_small_trace_hits_all_eigenvalues(band):
    lo, hi = -0.4, 0.4
    curve = mf.trace_curves(band, lo, hi, 0.005)
    lam = np.linalg.eigvalsh(band.entries)
    inside = [k for k in range(60) if lo < lam[k] < hi]
    assert set(inside) <= set(curve.diagonal_hits)
    for k in inside:
        assert abs(curve.diagonal_hits[k] - lam[k]) < 1e-10
    poles = curve.d_spectrum
    for e, k, c, kp in curve.rows():
        assert kp == k - mf.pole_count(poles, e)


def test_good_grid_pigeonhole(band):
    pts, seps, flagged, counts = mf.good_grid(band, 1.0, 60 ** 3, (-1.0, 1.0))
    width = 60 ** -1.0
    assert np.all(seps >= width / (2 * (counts + 1)) - 1e-15)
    assert flagged.sum() == 0
    # the chosen point is the best within its cell
    poles = mf.d_spectrum(band)
    for c in range(0, len(pts), 7):
        grid = np.linspace(-1 + c * width, -1 + (c + 1) * width, 2001)
        best = np.abs(grid[:, None] - poles[None, :]).min(axis=1).max()
        assert seps[c] >= best - 1e-6 * width
