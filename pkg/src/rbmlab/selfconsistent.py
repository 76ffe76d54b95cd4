"""Deformed self-consistent equation for the diagonal of generalized resolvents.

M solves, entrywise,
    1/M_i = -(zt - z) 1_{i > W} - z - g_i - sum_j s_zeta[i, j] M_j
where s_zeta is the band variance profile with zeta(1 + delta_ij)/W removed
on the leading W x W block.  A real shift e is encoded as zt = e + 1e-8 i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ensemble import BandProfile, as_matrix
from .spectral import RegularityParams, m_sc, generalized_resolvent

BOUNDARY_ETA = 1e-8
SMALLNESS = 0.1


class ConvergenceError(RuntimeError):
    pass


class BranchEscape(RuntimeError):
    pass


def boundary(e) -> complex:
    """Real e -> e + 1e-8 i; complex values pass through."""
    e = complex(e)
    return e if e.imag > 0 else complex(e.real, BOUNDARY_ETA)


def deflated_variance(profile: BandProfile, zeta: float = 0.0, w: Optional[int] = None) -> np.ndarray:
    s = profile.variance_matrix().astype(float)
    if zeta:
        w = profile.band_width if w is None else w
        blk = np.full((w, w), zeta / w)
        blk[np.diag_indices(w)] *= 2
        s[:w, :w] -= blk
    return s


@dataclass
class MQuery:
    profile: BandProfile
    z: complex
    z_tilde: complex
    zeta: float = 0.0
    g: Optional[np.ndarray] = None
    w: Optional[int] = None
    M: Optional[np.ndarray] = None
    iterations: int = 0
    residual: float = math.inf
    alpha: float = 0.5
    history: list = field(default_factory=list)

    def __post_init__(self):
        # a real z takes the same boundary encoding, so z = zt stays degenerate
        self.z = boundary(self.z)
        self.z_tilde = boundary(self.z_tilde)
        if self.w is None:
            self.w = self.profile.band_width
        if self.g is None:
            self.g = np.zeros(self.profile.n_dim)
        self.g = np.asarray(self.g, dtype=float)

    @property
    def smallness(self) -> float:
        return self.zeta + float(np.abs(self.g).max(initial=0.0)) + abs(self.z - self.z_tilde)

    def shift_vector(self) -> np.ndarray:
        n = self.profile.n_dim
        spec = np.full(n, self.z, dtype=complex)
        spec[self.w:] = self.z_tilde
        return spec + self.g

    def record(self) -> dict:
        return {"z": self.z, "z_tilde": self.z_tilde, "boundary_eta": BOUNDARY_ETA,
                "zeta": self.zeta, "g_max": float(np.abs(self.g).max(initial=0.0)),
                "iterations": self.iterations, "residual": self.residual, "alpha": self.alpha}


def residual(M: np.ndarray, query: MQuery, s: Optional[np.ndarray] = None) -> float:
    s = deflated_variance(query.profile, query.zeta, query.w) if s is None else s
    return float(np.abs(1.0 / M + query.shift_vector() + s @ M).max())


def solve_M(query: MQuery, tol: float = 1e-10, max_iter: int = 100000, alpha: float = 0.5,
            smallness: float = SMALLNESS, ball: float = 0.5, burn_in: int = 5) -> MQuery:
    """Damped fixed-point iteration started on the semicircle branch.

    The damping is halved whenever the residual grows after the burn-in;
    leaving the ball of radius ``ball`` around m_sc(zt) raises BranchEscape.
    """
    if abs(query.z_tilde.real) > 2:
        raise ValueError(f"Re z_tilde = {query.z_tilde.real} outside the bulk")
    if query.smallness > smallness:
        raise ValueError(f"zeta + |g| + |z - zt| = {query.smallness:.4g} exceeds the smallness constant {smallness}")
    s = deflated_variance(query.profile, query.zeta, query.w)
    shift = query.shift_vector()
    m0 = complex(m_sc(query.z_tilde))
    M = np.full(query.profile.n_dim, m0, dtype=complex)
    res = float(np.abs(1.0 / M + shift + s @ M).max())
    history = [res]
    for it in range(1, max_iter + 1):
        update = -1.0 / (shift + s @ M)
        M = (1 - alpha) * M + alpha * update
        new = float(np.abs(1.0 / M + shift + s @ M).max())
        if it > burn_in and new > res:
            alpha *= 0.5
            if alpha < 1e-6:
                raise ConvergenceError("damping collapsed without convergence")
        res = new
        if it % 50 == 0 or res <= tol:
            history.append(res)
        dist = float(np.abs(M - m0).max())
        if dist > ball:
            raise BranchEscape(f"iterate left the semicircle branch (distance {dist:.3g} > {ball})")
        if res <= tol:
            break
    else:
        raise ConvergenceError(f"no convergence after {max_iter} iterations (residual {res:.3g})")
    res = residual(M, query, s)  # re-verify by direct substitution
    if res > tol or np.any(M.imag < -1e-14):
        raise ConvergenceError(f"substitution check failed: residual {res:.3g}")
    query.M, query.iterations, query.residual, query.alpha, query.history = M, it, res, alpha, history
    return query


def half_sum_defect(query: MQuery) -> float:
    """|sum_{i<=W/2} M_i - (1/2) sum_{i<=W} M_i| (W even)."""
    w = query.w
    if w % 2:
        raise ValueError("half-sum symmetry needs an even block size")
    M = query.M
    return float(abs(M[: w // 2].sum() - 0.5 * M[:w].sum()))


def lipschitz_probe(query: MQuery, direction: complex = 1j * 1e-3, halvings: int = 4) -> dict:
    """Finite-difference Lipschitz constants ||M(z + h) - M(z)|| / |h| as h is halved."""
    base = solve_M(MQuery(query.profile, query.z, query.z_tilde, query.zeta, query.g, query.w)).M
    steps, consts = [], []
    h = complex(direction)
    for _ in range(halvings):
        moved = solve_M(MQuery(query.profile, query.z + h, query.z_tilde, query.zeta, query.g, query.w)).M
        steps.append(abs(h))
        consts.append(float(np.abs(moved - base).max() / abs(h)))
        h /= 2
    consts = np.array(consts)
    spread = float(np.abs(np.diff(consts)).max() / consts.max()) if consts.size > 1 else 0.0
    return {"steps": steps, "constants": consts.tolist(), "relative_spread": spread}


def resolvent_bound(n: int, w: int, eta: float, tau: float) -> float:
    return float(n) ** tau * (math.sqrt(n) / w + 1.0 / math.sqrt(w * eta))


def compare_empirical(sample, query: MQuery, tau: float = 0.1) -> dict:
    """Deviation of G(z, e) = (H - g - diag(z I_W, e I_rest))^-1 from diag(M)."""
    if query.M is None:
        solve_M(query)
    h = as_matrix(sample)
    n, w = h.shape[0], query.w
    if np.any(query.g):
        h = h - np.diag(query.g)
    e = query.z_tilde.real if abs(query.z_tilde.imag - BOUNDARY_ETA) < 1e-15 else query.z_tilde
    G = generalized_resolvent(h, query.z, e, w)
    diff = G - np.diag(query.M)
    max_dev = float(np.abs(diff).max())
    bound = resolvent_bound(n, w, query.z.imag, tau)
    return {"max_dev": max_dev, "diag_dev": float(np.abs(np.diag(diff)).max()),
            "bound": bound, "ratio": max_dev / bound, "query": query.record()}


# -- regularity audit ------------------------------------------------------------


def regularity_audit(sample, params: RegularityParams, e_values, g=None, w: Optional[int] = None,
                     energies: int = 5, etas: int = 3, tau: float = 0.1, sep: Optional[float] = None):
    """Measure the three regularity checks for K = Q_e of H^g on a (E, eta) grid.

    Checks: max_k |Im R_kk| against (2/W) Im Tr R, |Tr R / W - m_sc| against
    eta_upper^(1/2), and the half-trace balance against the generalized
    resolvent bound.  Shifts e closer than 1/sep to spec(D) are skipped.
    Returns (rows, summary) with rows (E, eta, check, value, bound, pass).
    """
    from . import meanfield

    h = as_matrix(sample)
    n = h.shape[0]
    w = sample.profile.band_width if w is None and hasattr(sample, "profile") else (w or n)
    sep = float(n) ** 3 if sep is None else sep
    if g is not None:
        h = meanfield.shifted(h, g, w)
    poles = meanfield.d_spectrum(h, w)
    rows, skipped = [], []
    for e in e_values:
        if poles.size and np.abs(poles - e).min() < 1.0 / sep:
            skipped.append(float(e))
            continue
        q = meanfield.build_Q(h, float(e), w=w)
        lam, vec = np.linalg.eigh(q)
        for E in np.linspace(e - params.r, e + params.r, energies):
            for eta in np.geomspace(params.eta_star, params.eta_upper, etas):
                z = complex(E, eta)
                coef = 1.0 / (lam - z)
                diag = (np.abs(vec) ** 2) @ coef
                tr = coef.sum()
                val = float(np.abs(diag.imag).max())
                bnd = 2.0 / w * tr.imag
                rows.append((float(E), float(eta), "diag_im", val, float(bnd), val <= bnd))
                dev = float(abs(tr / w - m_sc(z)))
                bnd = params.eta_upper ** 0.5
                rows.append((float(E), float(eta), "trace_msc", dev, bnd, dev <= bnd))
                half = float(abs(diag[: w // 2].sum() / w - tr / (2 * w)))
                bnd = resolvent_bound(n, w, eta, tau)
                rows.append((float(E), float(eta), "half_trace", half, bnd, half <= bnd))
    summary = {"skipped_e": skipped, "points": len(rows) // 3}
    for name in ("diag_im", "trace_msc", "half_trace"):
        flags = [r[5] for r in rows if r[2] == name]
        summary[name] = float(np.mean(flags)) if flags else math.nan
    return rows, summary
