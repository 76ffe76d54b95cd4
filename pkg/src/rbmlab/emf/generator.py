"""Moment-flow generator on configuration space, its reversible measure
and the master equation."""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..dbm import coupling_rates
from .configs import Configuration, enumerate_configs
from .matchings import HERMITIAN, SYMMETRIC
from .symbolic import jump_rate


class ConfigSpace:
    """Enumerated d-particle configurations with an index."""

    def __init__(self, n_sites: int, d: int):
        self.n_sites, self.d = n_sites, d
        self.configs = enumerate_configs(n_sites, d)
        self.index = {c: i for i, c in enumerate(self.configs)}

    def __len__(self):
        return len(self.configs)

    def vector(self, fvals: dict) -> np.ndarray:
        return np.array([fvals[c] for c in self.configs])

    def mapping(self, vec) -> dict:
        return {c: vec[i] for i, c in enumerate(self.configs)}


def generator_matrix(space: ConfigSpace, lambdas, cls: str = SYMMETRIC,
                     range_cutoff: Optional[int] = None) -> np.ndarray:
    """Matrix of (B f)(eta) = sum_{k != l} c_kl rate(eta, k, l) (f(eta^{kl}) - f(eta)).

    With ``range_cutoff`` only pairs with 0 < |k - l| <= cutoff contribute.
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.size != space.n_sites:
        raise ValueError("need one eigenvalue per site")
    c = coupling_rates(lam)
    n = lam.size
    b = np.zeros((len(space), len(space)))
    for row, eta in enumerate(space.configs):
        for k in eta.counts:
            for l in range(n):
                if l == k or (range_cutoff is not None and abs(l - k) > range_cutoff):
                    continue
                w = c[k, l] * jump_rate(eta, k, l, cls)
                b[row, space.index[eta.move(k, l)]] += w
                b[row, row] -= w
    return b


def generator_apply(fvals: dict, lambdas, cls: str = SYMMETRIC, range_cutoff: Optional[int] = None) -> dict:
    some = next(iter(fvals))
    space = ConfigSpace(some.n_sites, some.total)
    vec = space.vector(fvals)
    return space.mapping(generator_matrix(space, lambdas, cls, range_cutoff) @ vec)


def phi(k: int) -> float:
    out = 1.0
    for i in range(1, k + 1):
        out *= 1.0 - 1.0 / (2 * i)
    return out


def equilibrium_measure(eta: Configuration, cls: str = SYMMETRIC) -> float:
    """Unnormalized reversible measure: prod_p phi(eta_p) in the symmetric
    class; in the Hermitian class the rates eta_k (1 + eta_l) are reversible
    for the constant measure."""
    if cls == HERMITIAN:
        return 1.0
    return math.prod(phi(k) for k in eta.occupation)


def measure_vector(space: ConfigSpace, cls: str = SYMMETRIC) -> np.ndarray:
    return np.array([equilibrium_measure(c, cls) for c in space.configs])


def dirichlet_check(space: ConfigSpace, lambdas, f: np.ndarray, cls: str = SYMMETRIC) -> dict:
    """<f, -B f>_pi against sum_eta pi(eta) sum_{k != l} c_kl rate (f(eta^{kl}) - f(eta))^2.

    Returns both numbers and their ratio, the empirical constant."""
    b = generator_matrix(space, lambdas, cls)
    pi = measure_vector(space, cls)
    form = float(-(pi * f) @ (b @ f))
    total = 0.0
    for row in range(len(space)):
        for col in range(len(space)):
            if col != row and b[row, col] != 0:
                total += pi[row] * b[row, col] * (f[col] - f[row]) ** 2
    return {"form": form, "jump_sum": total, "constant": form / total if total else float("nan")}


def rk4_solve(b: np.ndarray, f0: np.ndarray, t: float, times=None):
    """RK4 for df/dt = B f with step at most 0.1 / ||B||_row."""
    norm = float(np.abs(b).sum(axis=1).max()) if b.size else 0.0
    if t == 0 or norm == 0:
        return f0.copy(), [(0.0, f0.copy())]
    steps = max(1, int(math.ceil(t * norm / 0.1)))
    h = t / steps
    if h < 1e-14 * t:
        raise RuntimeError("RK4 step underflow")
    f = f0.astype(float).copy()
    record = [(0.0, f.copy())]
    for s in range(steps):
        k1 = b @ f
        k2 = b @ (f + 0.5 * h * k1)
        k3 = b @ (f + 0.5 * h * k2)
        k4 = b @ (f + h * k3)
        f = f + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if times is not None:
            record.append(((s + 1) * h, f.copy()))
    return f, record


def flow_speed(cls: str) -> float:
    """Speed at which the frozen-eigenvalue eigenvector SDE runs the flow.

    For du_k = n^(-1/2) sum_l dB_kl/(lambda_k - lambda_l) u_l - ... with
    E dB_kl^2 = dt, each pair (k, l) rotates by an angle of variance
    c_kl dt, so the generator is (1/2) sum_{k<l} c_kl X_kl^2 and the
    observables obey df/dt = (1/2) B f.  In the Hermitian class the
    1/sqrt(2n) normalization gives exactly (1/2) sum c (X Xbar + Xbar X),
    so df/dt = B f.
    """
    return 0.5 if cls == SYMMETRIC else 1.0


def master_equation_solve(f0: dict, lambdas, cls: str = SYMMETRIC, t: float = 1.0,
                          range_cutoff: Optional[int] = None, speed: float = 1.0) -> dict:
    """Solve df/dt = speed * B f; pass ``speed=flow_speed(cls)`` to match the
    eigenvector SDE."""
    some = next(iter(f0))
    space = ConfigSpace(some.n_sites, some.total)
    b = generator_matrix(space, lambdas, cls, range_cutoff)
    out, _ = rk4_solve(speed * b, space.vector(f0), t)
    return space.mapping(out)


def propagation_profile(lambdas, cutoff: int, center: int, d: int, t: float, shells: int = 4,
                        cls: str = SYMMETRIC) -> list:
    """Short-range flow from a point mass at ``d`` particles on ``center``.

    Returns, for k = 1..shells, the total |f_t| mass on configurations with
    some particle farther than k * cutoff from the center.
    """
    n = len(lambdas)
    space = ConfigSpace(n, d)
    b = generator_matrix(space, lambdas, cls, cutoff)
    f0 = np.zeros(len(space))
    f0[space.index[Configuration.from_counts({center: d}, n)]] = 1.0
    ft, _ = rk4_solve(b, f0, t)
    far = np.array([max(abs(i - center) for i in c.counts) for c in space.configs])
    return [float(np.abs(ft[far > k * cutoff]).sum()) for k in range(1, shells + 1)]
