"""Numerical routes to the moment flow: finite-difference rotation
derivatives, frozen-eigenvalue Monte Carlo and the moment inequality probe."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..dbm import frozen_lambda_flow
from ..seeding import seed_derive
from .configs import Configuration, enumerate_configs
from .matchings import SYMMETRIC, enumerate_matchings, normalizer
from .observables import OverlapSet, evaluate_g, observable_g, overlaps, rotate
from .symbolic import jump_rate


def second_derivative(f, h: float) -> float:
    """Five-point central second derivative with one Richardson level."""
    def stencil(step):
        return (-f(2 * step) + 16 * f(step) - 30 * f(0.0) + 16 * f(-step) - f(-2 * step)) / (12 * step * step)

    coarse, fine = stencil(h), stencil(h / 2)
    return (16 * fine - coarse) / 15, coarse, fine


@dataclass
class NumericReport:
    lhs: float
    rhs: float
    scale: float
    max_rel_err: float
    coarse_err: float
    passed: bool


def verify_identity_numeric(u: np.ndarray, spec: OverlapSet, eta: Configuration, k: int, l: int,
                            theta0: float = 1e-3, tol: float = 1e-6) -> NumericReport:
    """Compare d^2/dtheta^2 g(eta)(R_theta u) at 0 with the jump-rate side.

    The relative error is taken against the sum of the magnitudes of the
    terms on the rate side, which is the natural size of both sides (either
    side alone can vanish by cancellation).  ``coarse_err`` is the error of
    the unextrapolated stencil; a genuine identity failure does not shrink
    when the step is refined, a numerical breakdown does.
    """
    g = lambda theta: float(observable_g(rotate(u, k, l, theta), spec, eta))
    lhs, coarse, _ = second_derivative(g, theta0)
    g0 = g(0.0)
    rhs, scale = 0.0, 0.0
    for a, b in ((k, l), (l, k)):
        rate = jump_rate(eta, a, b, SYMMETRIC)
        if rate:
            moved = float(observable_g(u, spec, eta.move(a, b)))
            rhs += rate * (moved - g0)
            scale += rate * (abs(moved) + abs(g0))
    if scale == 0.0:
        err, cerr = abs(lhs), abs(coarse)
    else:
        err, cerr = abs(lhs - rhs) / scale, abs(coarse - rhs) / scale
    return NumericReport(lhs, rhs, scale, err, cerr, err <= tol)


def random_instance(gen: np.random.Generator, max_n: int = 8, max_d: int = 4):
    """A random (u, overlap spec, eta, k, l) case for the rotation oracle.

    The index set is a proper nonempty subset of the coordinates: with every
    coordinate and the default centering all overlaps vanish identically and
    the comparison carries no information.
    """
    n = int(gen.integers(3, max_n + 1))
    u = random_orthogonal(n, gen)
    size = int(gen.integers(1, n))
    index = sorted(int(x) for x in gen.choice(n, size, replace=False))
    c0 = [None, 0.0, size / n + 1.0][int(gen.integers(0, 3))]
    d = int(gen.integers(1, max_d + 1))
    occ = [0] * n
    k, l = (int(x) for x in gen.choice(n, 2, replace=False))
    for site in gen.choice([k, l] + list(range(n)), d):
        occ[int(site)] += 1
    return u, OverlapSet(index_set=index, c0=c0), Configuration(tuple(occ)), k, l


def random_orthogonal(n: int, gen: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(gen.standard_normal((n, n)))
    return q * np.sign(np.diag(r))[None, :]


# -- Monte Carlo of the frozen-eigenvalue flow ---------------------------------


def monte_carlo_f(lambdas, u0, spec: OverlapSet, etas, t: float, paths: int, dt: float,
                  seed: int = 0, cls: str = SYMMETRIC, chunk: int = 20000) -> dict:
    """Estimate f_t(eta) = E g(eta)(u_t) for each eta over independent paths.

    Returns {eta: (mean, stderr)}.  Paths are processed in chunks with their
    own derived seeds; per-chunk sums are combined in chunk order.
    """
    etas = list(etas)
    sums = {eta: [0.0, 0.0] for eta in etas}
    done = 0
    idx = 0
    while done < paths:
        m = min(chunk, paths - done)
        u = frozen_lambda_flow(lambdas, u0, t, dt, seed_derive(seed, ["chunk", idx]), cls, paths=m)
        p = overlaps(u, spec)
        for eta in etas:
            val = np.real(evaluate_g(p, eta, cls)) * np.ones(m)
            sums[eta][0] += float(val.sum())
            sums[eta][1] += float((val * val).sum())
        done += m
        idx += 1
    out = {}
    for eta, (s1, s2) in sums.items():
        mean = s1 / paths
        var = max(s2 / paths - mean * mean, 0.0) * paths / max(paths - 1, 1)
        out[eta] = (mean, math.sqrt(var / paths) if t > 0 else 0.0)
    return out


# -- moment inequality ---------------------------------------------------------


def young_constants(i: int, j: int, d: int, n_sites: int) -> dict:
    """Constants in E p_ij^d <= C1 f(d at i) + C2 f(d at j) + C f(d/2 at i and j).

    g for eta = (d/2 at i, d/2 at j) expands as sum_a w_a p_ij^a (p_ii p_jj)^((d-a)/2).
    Solving for the a = d term and bounding every mixed monomial with
    |x|^a |y|^b |z|^c <= (a/d) e |x|^d + (b/d) e^(-a/(b+c)) |y|^d + (c/d) e^(-a/(b+c)) |z|^d
    (weighted AM-GM) gives the constants below with e = 1/(2S), S the total
    weight on |p_ij|^d from the mixed terms.
    """
    if i == j:
        raise ValueError("young bound needs i != j")
    if d % 2:
        raise ValueError("d must be even")
    eta = Configuration.from_counts({i: d // 2, j: d // 2}, n_sites)
    counts = defaultdict(int)
    for graph in enumerate_matchings(eta, SYMMETRIC):
        transverse = sum(1 for a, b in graph.edges if a[0] != b[0])
        counts[transverse] += 1
    norm = normalizer(eta, SYMMETRIC)
    weights = {a: Fraction(c, norm) for a, c in counts.items()}
    top = weights[d]
    mixed = {a: w for a, w in weights.items() if a < d}
    s = sum(float(w / top) * a / d for a, w in mixed.items())
    eps = 1.0 / (2.0 * s) if s > 0 else 1.0
    factor = 2.0 if s > 0 else 1.0
    c1 = factor * sum(float(w / top) * ((d - a) / 2) / d * eps ** (-a / (d - a)) for a, w in mixed.items())
    return {"C": factor / float(top), "C1": c1, "C2": c1, "epsilon": eps,
            "weights": {a: float(w) for a, w in sorted(weights.items())}}


def young_bound_probe(u_samples: np.ndarray, spec: OverlapSet, i: int, j: int, d: int) -> dict:
    """Check the moment inequality on a set of eigenvector samples (P, N, n)."""
    u_samples = np.asarray(u_samples)
    n = u_samples.shape[-1]
    const = young_constants(i, j, d, n)
    p = overlaps(u_samples, spec)
    eta1 = Configuration.from_counts({i: d}, n)
    eta2 = Configuration.from_counts({j: d}, n)
    eta = Configuration.from_counts({i: d // 2, j: d // 2}, n)
    lhs = p[:, i, j] ** d
    f1, f2, f = (evaluate_g(p, e) * np.ones(len(p)) for e in (eta1, eta2, eta))
    rhs = const["C1"] * f1 + const["C2"] * f2 + const["C"] * f
    return {"lhs": float(lhs.mean()), "rhs": float(rhs.mean()), "slack": float(rhs.mean() - lhs.mean()),
            "min_pointwise_slack": float((rhs - lhs).min()), "holds": bool(rhs.mean() >= lhs.mean()),
            "constants": const, "samples": int(len(p))}
