"""Dyson Brownian motion: the matrix process, the coupled eigenvalue and
eigenvector SDEs, and the frozen-eigenvalue eigenvector diffusion."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .seeding import seed_derive, stream

SYMMETRIC = "symmetric"
HERMITIAN = "hermitian"


class GapCollisionError(RuntimeError):
    pass


def brownian_matrix(gen: np.random.Generator, n: int, var: float, cls: str = SYMMETRIC, batch=()):
    """Increment of the driving Brownian matrix over a time ``var``.

    Symmetric class: off-diagonal N(0, var), diagonal N(0, 2 var).  Hermitian
    class: real and imaginary off-diagonal parts each N(0, var), diagonal
    N(0, 2 var) (so that B_ii / sqrt 2 is a standard Brownian motion).
    """
    shape = tuple(batch) + (n, n)
    x = gen.standard_normal(shape) * math.sqrt(var)
    if cls == SYMMETRIC:
        b = np.triu(x, 1)
        b = b + np.swapaxes(b, -1, -2)
        idx = np.arange(n)
        b[..., idx, idx] = math.sqrt(2.0) * x[..., idx, idx]
        return b
    y = gen.standard_normal(shape) * math.sqrt(var)
    upper = np.triu(x + 1j * y, 1)
    b = upper + np.conj(np.swapaxes(upper, -1, -2))
    idx = np.arange(n)
    b[..., idx, idx] = math.sqrt(2.0) * x[..., idx, idx]
    return b


def noise_scale(n: int, cls: str) -> float:
    return 1.0 / math.sqrt(n) if cls == SYMMETRIC else 1.0 / math.sqrt(2.0 * n)


def matrix_dbm(v, t: float, seed: int = 0, cls: str = SYMMETRIC, batch=()):
    """K(t) = V + B(t)/sqrt(n) (symmetric) or V + B(t)/sqrt(2n) (Hermitian), exact in law."""
    v = np.asarray(v)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return np.broadcast_to(v, tuple(batch) + v.shape).copy()
    n = v.shape[0]
    b = brownian_matrix(stream(seed, "matrix_dbm"), n, t, cls, batch)
    return v + noise_scale(n, cls) * b


@dataclass
class FlowState:
    time: float
    lambdas: np.ndarray
    vectors: np.ndarray
    cls: str = SYMMETRIC
    step_count: int = 0
    reorth_drift: float = 0.0

    @staticmethod
    def from_matrix(v, cls: str = SYMMETRIC) -> "FlowState":
        lam, u = np.linalg.eigh(np.asarray(v))
        return FlowState(0.0, lam, u, cls)

    def orth_defect(self) -> float:
        u = self.vectors
        return float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())


def gram_schmidt(u: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt on the columns of ``u``."""
    q = np.array(u)
    for k in range(q.shape[1]):
        for j in range(k):
            q[:, k] -= (q[:, j].conj() @ q[:, k]) * q[:, j]
        q[:, k] /= np.linalg.norm(q[:, k])
    return q


def gap_floor(lambdas: np.ndarray) -> float:
    n = lambdas.size
    return 1e-6 * (lambdas[-1] - lambdas[0]) / n if n > 1 else 0.0


def _inverse_gaps(lam):
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, np.inf)
    return 1.0 / diff


def drift(lambdas: np.ndarray) -> np.ndarray:
    """(1/n) sum_{l != k} 1/(lambda_k - lambda_l)."""
    return _inverse_gaps(lambdas).sum(axis=1) / lambdas.size


def _euler(state: FlowState, dt: float, db: np.ndarray):
    lam, u = state.lambdas, state.vectors
    n = lam.size
    scale = noise_scale(n, state.cls)
    inv = _inverse_gaps(lam)  # inv[k, l] = 1/(lambda_k - lambda_l)
    new_lam = lam + scale * np.real(np.diag(db)) + drift(lam) * dt
    # column k receives sum_l u_l dB_lk / (lambda_k - lambda_l)
    a = scale * db * inv.T
    np.fill_diagonal(a, 0.0)
    damp = (inv ** 2).sum(axis=1) * dt / (2.0 * n)
    new_u = u + u @ a - u * damp[None, :]
    return new_lam, new_u


def sde_step(state: FlowState, dt: float, seed: int = 0, max_retries: int = 8,
             noise=None) -> FlowState:
    """One Euler-Maruyama step of the coupled eigenvalue/eigenvector SDEs.

    Both updates use the same Brownian increment.  Eigenvectors are then
    re-orthonormalized by modified Gram-Schmidt and the size of that
    correction is added to ``reorth_drift``.  If the step would bring two
    eigenvalues closer than the gap floor it is retried with half the time
    step (fresh noise) up to ``max_retries`` times.  ``noise`` overrides the
    Brownian increment, e.g. with zeros for a drift-only step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = state.lambdas.size
    floor = gap_floor(state.lambdas)
    gen = stream(seed, f"sde/{state.step_count}")
    h = dt
    for attempt in range(max_retries + 1):
        db = noise if noise is not None else brownian_matrix(gen, n, h, state.cls)
        lam, u = _euler(state, h, db)
        if n == 1 or np.min(np.diff(lam)) > floor:
            q = gram_schmidt(u)
            drift_inc = float(np.abs(q - u).max())
            return replace(state, time=state.time + h, lambdas=lam, vectors=q,
                           step_count=state.step_count + 1,
                           reorth_drift=state.reorth_drift + drift_inc)
        if noise is not None:
            break
        h /= 2.0
    raise GapCollisionError(f"eigenvalue gap fell below {floor:.3g} after {attempt} retries "
                            f"at t={state.time:.6g}")


def simulate_sde(state: FlowState, t: float, dt: float, seed: int = 0):
    """Advance ``state`` to time ``t``; returns the final state and the trajectory."""
    traj = [(state.time, state.lambdas.copy())]
    while state.time < t - 1e-14:
        state = sde_step(state, min(dt, t - state.time), seed)
        traj.append((state.time, state.lambdas.copy()))
    return state, traj


def coupling_rates(lambdas) -> np.ndarray:
    """c_kl = 1/(n (lambda_k - lambda_l)^2), zero on the diagonal."""
    lam = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(np.sort(lam)) == 0):
        raise ValueError("coincident eigenvalues make the rates singular")
    inv = _inverse_gaps(lam)
    return inv ** 2 / lam.size


def frozen_lambda_flow(lambdas, u0, t: float, dt: float, seed: int = 0, cls: str = SYMMETRIC,
                       paths: int = 1, check_dt: bool = True):
    """Eigenvector diffusion with the eigenvalues held fixed.

    Runs ``paths`` independent copies started at ``u0`` and returns an array
    of shape (paths, n, n).  Each step is Euler-Maruyama followed by
    re-orthonormalization (a QR factorization with positive diagonal, which
    equals Gram-Schmidt on the columns).
    """
    lam = np.asarray(lambdas, dtype=float)
    n = lam.size
    u0 = np.asarray(u0)
    if np.any(np.diff(lam) <= 0):
        raise ValueError("lambdas must be strictly increasing")
    if check_dt and n > 1 and dt > np.min(np.diff(lam)) ** 2 * n / 10:
        raise ValueError("dt exceeds min_gap^2 n / 10")
    dtype = complex if (cls == HERMITIAN or np.iscomplexobj(u0)) else float
    u = np.broadcast_to(u0.astype(dtype), (paths, n, n)).copy()
    if t == 0:
        return u
    steps = max(1, int(math.ceil(t / dt - 1e-9)))
    h = t / steps
    inv_t = _inverse_gaps(lam).T  # [l, k] = 1/(lambda_k - lambda_l)
    damp = (_inverse_gaps(lam) ** 2).sum(axis=1) * h / (2.0 * n)
    scale = noise_scale(n, cls)
    gen = stream(seed, "frozen_flow")
    for _ in range(steps):
        db = brownian_matrix(gen, n, h, cls, (paths,))
        a = scale * db * inv_t
        idx = np.arange(n)
        a[:, idx, idx] = 0.0
        u = u + u @ a - u * damp[None, None, :]
        q, r = np.linalg.qr(u)
        sign = np.diagonal(r, axis1=-2, axis2=-1)
        sign = sign / np.abs(sign)
        u = q * sign[:, None, :]
    return u


def trace_square_estimator(v, t: float, dt: float, paths: int, seed: int = 0):
    """Monte Carlo estimate of E Tr K(t)^2 along the eigenvalue SDE, with a
    martingale control variate.

    Tr K^2 = sum lambda_k^2.  The Euler increments of the martingale part,
    2 sum_k lambda_k dB_kk/sqrt(n) and (dB_kk^2 - 2 dt)/n, have mean zero
    exactly (the integrands are known at the start of each step), so they
    are subtracted path by path.  The estimator keeps the discretization
    bias of the scheme and loses most of the sampling noise.
    Returns (mean, stderr, rejected_steps).
    """
    lam0 = np.sort(np.linalg.eigvalsh(np.asarray(v)))
    n = lam0.size
    gen = stream(seed, "trace_square")
    steps = int(round(t / dt))
    lam = np.broadcast_to(lam0, (paths, n)).copy()
    cv = np.zeros(paths)
    scale = 1.0 / math.sqrt(n)
    for _ in range(steps):
        diff = lam[:, :, None] - lam[:, None, :]
        idx = np.arange(n)
        diff[:, idx, idx] = np.inf
        dr = (1.0 / diff).sum(axis=2) / n
        db = gen.standard_normal((paths, n)) * math.sqrt(2.0 * dt)
        cv += np.sum(2.0 * lam * db * scale + (db * db - 2.0 * dt) / n, axis=1)
        lam = lam + scale * db + dr * dt
    order_breaks = int(np.sum(np.any(np.diff(lam, axis=1) <= 0, axis=1)))
    y = np.sum(lam * lam, axis=1) - cv
    return float(y.mean()), float(y.std(ddof=1) / math.sqrt(paths)), order_breaks


def simulate_sde_batch(v, t: float, dt: float, paths: int, seed: int = 0, cls: str = SYMMETRIC):
    """Euler-Maruyama for the coupled SDEs on many independent paths at once.

    Returns (lambdas (paths, n), vectors (paths, n, n), order_breaks) where
    ``order_breaks`` counts paths whose eigenvalues lost their ordering.
    """
    lam0, u0 = np.linalg.eigh(np.asarray(v))
    n = lam0.size
    lam = np.broadcast_to(lam0, (paths, n)).copy()
    u = np.broadcast_to(u0, (paths, n, n)).astype(complex if cls == HERMITIAN else float)
    scale = noise_scale(n, cls)
    gen = stream(seed, "sde_batch")
    steps = max(1, int(round(t / dt)))
    h = t / steps
    idx = np.arange(n)
    broken = np.zeros(paths, dtype=bool)
    for _ in range(steps):
        diff = lam[:, :, None] - lam[:, None, :]
        diff[:, idx, idx] = np.inf
        inv = 1.0 / diff
        db = brownian_matrix(gen, n, h, cls, (paths,))
        a = scale * db * np.swapaxes(inv, 1, 2)
        a[:, idx, idx] = 0.0
        damp = (inv ** 2).sum(axis=2) * h / (2.0 * n)
        lam = lam + scale * np.real(db[:, idx, idx]) + inv.sum(axis=2) / n * h
        u = u + u @ a - u * damp[:, None, :]
        q, r = np.linalg.qr(u)
        sign = np.diagonal(r, axis1=-2, axis2=-1)
        u = q * (sign / np.abs(sign))[:, None, :]
        broken |= np.any(np.diff(lam, axis=1) <= 0, axis=1)
    return lam, u, int(broken.sum())


AUDIT_STATISTICS = {
    "tr_k2": lambda k: np.real(np.einsum("pij,pji->p", k, k)),
    "k11": lambda k: np.real(k[:, 0, 0]),
    "k2_11": lambda k: np.real(np.einsum("pi,pi->p", k[:, 0, :], np.conj(k[:, 0, :]))),
    "tr_k3": lambda k: np.real(np.einsum("pij,pjk,pki->p", k, k, k)),
}


def coupling_audit(v, t: float, dt: float, paths: int, seed: int = 0, cls: str = SYMMETRIC):
    """Compare smooth statistics of K(t) between the exact matrix route and
    the eigenvalue/eigenvector SDE route (K = u diag(lambda) u^*).

    Reports means, variances and two-sample z-scores of the means and of the
    variances.  Report-only.
    """
    v = np.asarray(v)
    n = v.shape[0]
    if n > 12:
        raise ValueError("coupling audit is meant for n <= 12")
    exact = matrix_dbm(v, t, seed=seed_derive(seed, ["matrix"]), cls=cls, batch=(paths,))
    if t == 0:
        sde, breaks = exact, 0
    else:
        lam, u, breaks = simulate_sde_batch(v, t, dt, paths, seed_derive(seed, ["sde"]), cls)
        sde = (u * lam[:, None, :]) @ np.conj(np.swapaxes(u, 1, 2))
    report = {"order_breaks": breaks, "statistics": {}}
    for name, f in AUDIT_STATISTICS.items():
        a, b = f(exact), f(sde)
        se = math.sqrt(a.var(ddof=1) / paths + b.var(ddof=1) / paths)
        ca, cb = (a - a.mean()) ** 2, (b - b.mean()) ** 2
        se2 = math.sqrt(ca.var(ddof=1) / paths + cb.var(ddof=1) / paths)
        report["statistics"][name] = {
            "matrix_mean": float(a.mean()), "sde_mean": float(b.mean()),
            "matrix_var": float(a.var(ddof=1)), "sde_var": float(b.var(ddof=1)),
            "z": float((b.mean() - a.mean()) / se) if se > 0 else 0.0,
            "z_var": float((cb.mean() - ca.mean()) / se2) if se2 > 0 else 0.0}
    return report


def weak_order_trend(v, t: float, dts, paths: int, seed: int = 0):
    """Bias of E Tr K(t)^2 along the SDE route for each dt, against the exact
    value Tr V^2 + t (n + 1) of the matrix route.  Returns a list of records
    and the successive bias ratios."""
    v = np.asarray(v)
    n = v.shape[0]
    exact = float(np.trace(v @ v)) + t * (n + 1)
    rows = []
    for i, dt in enumerate(dts):
        mean, se, breaks = trace_square_estimator(v, t, dt, paths, seed=seed_derive(seed, ["level", i]))
        rows.append({"dt": dt, "mean": mean, "stderr": se, "bias": mean - exact,
                     "order_breaks": breaks})
    ratios = [rows[i]["bias"] / rows[i + 1]["bias"] for i in range(len(rows) - 1)]
    return {"exact": exact, "levels": rows, "ratios": ratios}
