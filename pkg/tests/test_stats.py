import math

import numpy as np
import pytest

from rbmlab import stats
from rbmlab.spectral import SpectralData, semicircle_cdf


def _spec(vecs, vals=None):
    n = vecs.shape[0]
    vals = np.linspace(-1, 1, vecs.shape[1]) if vals is None else vals
    return SpectralData(vals, vecs, 0.0, 0.0)


def test_deloc_extremes():
    n = 50
    flat = _spec(np.full((n, n), 1 / math.sqrt(n)))
    basis = _spec(np.eye(n))
    assert abs(stats.deloc_sup(flat)["max"] - 1) < 1e-12
    assert abs(stats.deloc_sup(basis)["max"] - n) < 1e-12


def test_window_masses_indicator():
    n, w = 40, 8
    v = np.zeros((n, 1))
    v[:w, 0] = 1 / math.sqrt(w)
    m = stats.window_masses(v, w)
    assert abs(m[0, 0] - 1) < 1e-14 and abs(m[w, 0]) < 1e-14
    assert abs(m.sum() - w) < 1e-12  # each site lies in W windows
    shifts = np.stack([np.roll(v[:, 0], j) for j in range(n)], axis=1)
    dev = stats.que_windows(_spec(shifts, np.zeros(n)), w)
    assert np.allclose(dev["per_k"], n / w - 1)


def test_local_law_target():
    n = 1000
    out = stats.local_law_counts(np.zeros(n), -0.1, 0.1)
    assert abs(out["target"] - n * (semicircle_cdf(0.1) - semicircle_cdf(-0.1))) < 1e-9
    exact = (2 * math.asin(0.05) + 0.1 * math.sqrt(4 - 0.01) / 2) / math.pi
    assert abs(out["target"] / n - exact) < 1e-12


def test_gap_ratio_reference_values():
    assert abs(stats.gap_ratios(np.linspace(-1, 1, 101))["mean"] - 1) < 1e-12
    r = stats.gap_ratios(np.sort(np.random.default_rng(0).uniform(-1.5, 1.5, 200000)))["mean"]
    assert abs(r - (2 * math.log(2) - 1)) < 0.005
    with pytest.raises(ValueError):
        stats.gap_ratios(np.array([0.0, 0.1]))


def test_zero_gaps_are_counted():
    out = stats.gap_ratios(np.array([0.0, 0.0, 0.0, 0.5, 1.0]))
    assert out["excluded_zero_gaps"] == 1


def test_level_repulsion_poisson_and_goe():
    gen = np.random.default_rng(1)
    pois = stats.level_repulsion([stats.poisson_surrogate(400, gen) for _ in range(30)])
    assert abs(pois["exponent"] - 1) < 0.2
    goe = stats.goe_baseline(300, 20, seed=2)["repulsion"]
    assert abs(goe["exponent"] - 2) < 0.3


def test_repulsion_refuses_small_samples():
    out = stats.level_repulsion(np.sort(np.random.default_rng(0).uniform(size=50)))
    assert out["exponent"] is None and "refused" in out


def test_goe_baseline_records():
    out = stats.goe_baseline(200, 4, seed=1, vectors=True)
    rec = out["gap_ratio"]
    assert len(rec.values) == 4 and len(set(rec.seeds)) == 4
    assert abs(rec.aggregate["mean"] - 0.5307) < 0.03
    # sup-norm of GOE bulk vectors grows like 2 log N
    assert out["deloc"].aggregate["mean"] < 4 * math.log(200)
    with pytest.raises(ValueError):
        stats.goe_baseline(3, 1, seed=0)


def test_stat_record_serializes():
    rec = stats.StatRecord("x", "e", [1.0, 3.0], seeds=[1, 2])
    d = rec.as_dict()
    assert d["aggregate"]["mean"] == 2.0 and d["aggregate"]["median"] == 2.0
    assert math.isnan(stats.StatRecord("x", "e", []).aggregate["mean"])


def test_semicircle_mass():
    assert abs(stats.semicircle_mass(-2, 2) - 1) < 1e-12
    assert stats.semicircle_mass(0.3, 0.3) == 0.0
