import math

import numpy as np
import pytest

from rbmlab import dbm
from rbmlab.seeding import stream


def test_brownian_variances():
    b = dbm.brownian_matrix(stream(1, "t"), 4, 0.3, batch=(40000,))
    assert abs(b[:, 0, 1].var() - 0.3) < 0.01 and abs(b[:, 2, 2].var() - 0.6) < 0.02
    assert np.array_equal(b, np.swapaxes(b, 1, 2))
    c = dbm.brownian_matrix(stream(1, "t"), 3, 0.3, "hermitian", batch=(40000,))
    assert abs(c[:, 0, 1].real.var() - 0.3) < 0.01 and abs(c[:, 0, 1].imag.var() - 0.3) < 0.01
    assert np.all(c[:, 1, 1].imag == 0)


def test_matrix_dbm_trace_square():
    v = np.diag([0.0, 1.0, -1.0])
    k = dbm.matrix_dbm(v, 0.2, seed=3, batch=(50000,))
    est = np.einsum("pij,pji->p", k, k).mean()
    assert abs(est - (2.0 + 0.2 * 4)) < 0.02
    assert np.array_equal(dbm.matrix_dbm(v, 0.0), v)


def test_drift_only_step_is_deterministic():
    st = dbm.FlowState.from_matrix(np.diag([-1.0, 0.0, 2.0]))
    out = dbm.sde_step(st, 0.01, noise=np.zeros((3, 3)))
    lam = np.array([-1.0, 0.0, 2.0])
    want = lam + 0.01 * np.array([sum(1 / (a - b) for b in lam if b != a) for a in lam]) / 3
    assert np.allclose(out.lambdas, want)
    assert out.orth_defect() < 1e-14


def test_sde_keeps_orthonormality():
    st = dbm.FlowState.from_matrix(np.diag(np.arange(5.0)))
    final, traj = dbm.simulate_sde(st, 0.05, 0.005, seed=2)
    assert abs(final.time - 0.05) < 1e-12 and final.orth_defect() < 1e-12
    assert len(traj) == final.step_count + 1


def test_gram_schmidt_orthonormal():
    q = dbm.gram_schmidt(np.random.default_rng(0).standard_normal((6, 6)))
    assert np.abs(q.T @ q - np.eye(6)).max() < 1e-13


def test_coupling_rates():
    c = dbm.coupling_rates([0.0, 1.0, 3.0])
    assert math.isclose(c[0, 1], 1 / 3) and math.isclose(c[0, 2], 1 / 27) and c[1, 1] == 0
    with pytest.raises(ValueError):
        dbm.coupling_rates([0.0, 0.0, 1.0])


def test_frozen_flow_guards_and_orthonormality():
    lam = np.array([0.0, 1.0, 2.0])
    u = dbm.frozen_lambda_flow(lam, np.eye(3), 0.1, 0.01, paths=50, seed=1)
    gram = np.einsum("pki,pkj->pij", u, u)
    assert np.abs(gram - np.eye(3)).max() < 1e-12
    with pytest.raises(ValueError):
        dbm.frozen_lambda_flow(lam, np.eye(3), 0.1, 0.5)
    with pytest.raises(ValueError):
        dbm.frozen_lambda_flow(lam[::-1], np.eye(3), 0.1, 0.01)


def test_coupling_audit_agrees():
    rep = dbm.coupling_audit(np.diag([-1.0, 0.0, 1.5, 3.0]), 0.1, 0.002, 20000, seed=4)
    for name, row in rep["statistics"].items():
        assert abs(row["z"]) < 4.5, name


def test_weak_order_exact_value():
    v = np.diag([1.0, 2.0])
    trend = dbm.weak_order_trend(v, 0.1, [0.05], 2000, seed=1)
    assert math.isclose(trend["exact"], 5.0 + 0.3)
