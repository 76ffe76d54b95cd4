"""Mean-field reduction to the W x W block.

For the split H = [[A, B^*], [B, D]] (first W indices = A) and a real shift e,
Q_e = A - B^* (D - e)^-1 B.  An eigenvalue xi of Q_e is an eigenvalue of
H^g = H - g 1_{j > W} with g = e - xi.  Writing lambda_k^g for the k-th
eigenvalue of H^g, the curve C_k(e) = lambda_k^g at the g solving
lambda_k^g + g = e.  Curve k exists for e between the (k-W)-th and k-th
eigenvalue of D, and inside spec(Q_e) it sits at sorted position
k' = k - #{lambda^D < e}.  Labels and positions here are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import brentq, linear_sum_assignment

from .ensemble import BandMatrixSample, as_matrix

POLE_FLOOR = 1e-8


class PoleError(ValueError):
    pass


class BracketError(RuntimeError):
    pass


class AmbiguousContinuation(RuntimeError):
    pass


def _split(h, w):
    m = as_matrix(h)
    if w is None:
        w = h.profile.band_width
    return m, int(w)


def shifted(h, g, w: Optional[int] = None) -> np.ndarray:
    """H^g = H - diag(g); a scalar ``g`` means g 1_{j > W}."""
    m, w = _split(h, w)
    if np.isscalar(g):
        vec = np.zeros(m.shape[0])
        vec[w:] = g
    else:
        vec = np.asarray(g, dtype=float)
    return m - np.diag(vec)


def d_spectrum(h, w: Optional[int] = None) -> np.ndarray:
    m, w = _split(h, w)
    return scipy.linalg.eigvalsh(m[w:, w:]) if m.shape[0] > w else np.zeros(0)


def build_Q(h, e: float, g=None, w: Optional[int] = None, floor: float = POLE_FLOOR,
            details: bool = False):
    """Schur complement Q_e of the lower block on H^g.

    Raises PoleError when e is within ``floor`` of spec(D).  With
    ``details`` also returns the asymmetry removed by symmetrization and the
    distance to the nearest pole.
    """
    m, w = _split(h, w)
    if g is not None:
        m = shifted(m, g, w)
    a, b, d = m[:w, :w], m[w:, :w], m[w:, w:]
    if d.size == 0:
        q = np.array(a)
        info = {"asymmetry": 0.0, "pole_distance": math.inf}
        return (q, info) if details else q
    poles = scipy.linalg.eigvalsh(d)
    j = int(np.argmin(np.abs(poles - e)))
    dist = float(abs(poles[j] - e))
    if dist < floor:
        raise PoleError(f"e = {e!r} is within {dist:.2e} of the lower-block eigenvalue {poles[j]!r}")
    q = a - b.conj().T @ np.linalg.solve(d - e * np.eye(d.shape[0]), b)
    asym = float(np.abs(q - q.conj().T).max())
    q = 0.5 * (q + q.conj().T)
    info = {"asymmetry": asym, "pole_distance": dist}
    return (q, info) if details else q


def pole_count(poles: np.ndarray, e: float) -> int:
    return int(np.searchsorted(poles, e, side="left"))


# -- the curves C_k(e) -----------------------------------------------------------


@dataclass
class GSolution:
    g: float
    value: float  # C_k(e) = lambda_k^g
    weight: float  # sum_{i <= W} |psi_k^g(i)|^2 = d(g + lambda_k^g)/dg
    iterations: int
    degenerate: bool = False


def _eig_k(m, w, g, k):
    vals, vecs = scipy.linalg.eigh(shifted(m, g, w), subset_by_index=[k, k])
    return vals[0], float(np.sum(np.abs(vecs[:w, 0]) ** 2))


def solve_g_for_e(h, k: int, e: float, w: Optional[int] = None, tol: float = 1e-10,
                  max_iter: int = 200) -> GSolution:
    """Root g of lambda_k^g + g = e by safeguarded Newton with bisection.

    The map g -> g + lambda_k^g is nondecreasing with derivative equal to
    the block-A weight of the eigenvector.  Without a lower block the map
    is g + lambda_k and the curve is flat; this case is flagged.
    """
    m, w = _split(h, w)
    n = m.shape[0]
    if w >= n:
        lam = scipy.linalg.eigvalsh(m, subset_by_index=[k, k])[0]
        return GSolution(e - lam, lam, 1.0, 0, degenerate=True)
    phi = lambda g: _eig_k(m, w, g, k)
    g = e - scipy.linalg.eigvalsh(m, subset_by_index=[k, k])[0]
    lam, wt = phi(g)
    val = g + lam - e
    lo = hi = None
    f_lo = f_hi = None
    if val <= 0:
        lo, f_lo = g, val
    else:
        hi, f_hi = g, val
    step = max(abs(val), 1e-3)
    tries = 0
    while lo is None or hi is None:
        tries += 1
        if tries > 80:
            raise BracketError(f"no bracket for curve {k} at e={e}: e lies outside the domain of the curve")
        probe = (g + step) if hi is None else (g - step)
        pl, pw = phi(probe)
        pv = probe + pl - e
        if pv <= 0:
            lo, f_lo = probe, pv
        else:
            hi, f_hi = probe, pv
        step *= 2.0
    # safeguarded Newton
    g = lo if abs(f_lo) < abs(f_hi) else hi
    lam, wt = phi(g)
    for it in range(1, max_iter + 1):
        val = g + lam - e
        if abs(val) <= tol:
            if wt < 1e-12:
                raise BracketError(f"eigenvector weight collapsed on block A for curve {k}")
            return GSolution(g, lam, wt, it)
        if val < 0:
            lo = g
        else:
            hi = g
        newton = g - val / wt if wt > 1e-12 else None
        g = newton if newton is not None and lo < newton < hi else 0.5 * (lo + hi)
        lam, wt = phi(g)
        if hi - lo < 1e-15 * max(1.0, abs(g)):
            break
    if abs(g + lam - e) <= 10 * tol:
        return GSolution(g, lam, wt, max_iter)
    raise BracketError(f"g solver stalled for curve {k} at e={e}: residual {g + lam - e:.3g}")


def curve_value(h, k: int, e: float, w: Optional[int] = None) -> float:
    return solve_g_for_e(h, k, e, w).value


@dataclass
class SlopeReport:
    fd_slope: float
    formula_slope: float
    rel_err: float
    weight: float


def slope_check(h, k: int, e: float, fd_step: float = 1e-5, w: Optional[int] = None) -> SlopeReport:
    """Centered difference of C_k against 1 - 1/sum_{i<=W}|psi_k^g(i)|^2."""
    m, w = _split(h, w)
    if m.shape[0] > w:
        poles = d_spectrum(m, w)
        if pole_count(poles, e - fd_step) != pole_count(poles, e + fd_step):
            raise PoleError("finite-difference window crosses the lower-block spectrum")
    mid = solve_g_for_e(m, k, e, w)
    plus = solve_g_for_e(m, k, e + fd_step, w).value
    minus = solve_g_for_e(m, k, e - fd_step, w).value
    fd = (plus - minus) / (2 * fd_step)
    formula = 1.0 - 1.0 / mid.weight
    scale = max(abs(formula), 1e-12)
    return SlopeReport(fd, formula, abs(fd - formula) / scale if formula != 0 else abs(fd), mid.weight)


# -- tracing -------------------------------------------------------------------


@dataclass
class MFCurve:
    e_grid: np.ndarray
    curves: dict  # label -> array over e_grid (nan where the curve is absent)
    index_map: dict  # (label, grid position) -> k'
    d_spectrum: np.ndarray
    diagonal_hits: dict = field(default_factory=dict)  # label -> e with C_k(e) = e
    refinements: int = 0

    def rows(self):
        for (label, pos), kp in sorted(self.index_map.items(), key=lambda x: (x[0][1], x[0][0])):
            yield (float(self.e_grid[pos]), label, float(self.curves[label][pos]), kp)


def _nudge(e, poles, floor):
    if poles.size == 0:
        return e
    j = int(np.argmin(np.abs(poles - e)))
    if abs(poles[j] - e) >= floor:
        return e
    return poles[j] + math.copysign(2 * floor, e - poles[j] if e != poles[j] else 1.0)


def _q_eig(m, w, e):
    q = build_Q(m, e, w=w)
    return np.linalg.eigh(q)


def _match(prev_vecs, new_vecs, dying: bool, born: bool, threshold: float):
    """Assign previous curve positions to new positions by eigenvector overlap.

    Returns (mapping old position -> new position, ambiguous flag).  When a
    pole is crossed the lowest old curve leaves and a new top curve enters.
    """
    old_idx = np.arange(prev_vecs.shape[1])[1:] if dying else np.arange(prev_vecs.shape[1])
    new_idx = np.arange(new_vecs.shape[1])[:-1] if born else np.arange(new_vecs.shape[1])
    ov = np.abs(prev_vecs[:, old_idx].conj().T @ new_vecs[:, new_idx])
    rows, cols = linear_sum_assignment(-ov)
    ambiguous = False
    for r, c in zip(rows, cols):
        others = np.delete(ov[r], c)
        if others.size and ov[r, c] - others.max() < threshold:
            ambiguous = True
    return {int(old_idx[r]): int(new_idx[c]) for r, c in zip(rows, cols)}, ambiguous


def trace_curves(h, e_lo: float, e_hi: float, step: float, labels=None, w: Optional[int] = None,
                 floor: float = POLE_FLOOR, threshold: float = 0.1, max_refine: int = 12) -> MFCurve:
    """Trace C_k(e) on a grid by eigenvector-overlap continuation.

    Grid points closer than ``floor`` to spec(D) are nudged.  When two
    overlaps of a row are within ``threshold`` the step is halved locally;
    persistent ambiguity raises.  Labels are checked against the pole-count
    rule k' = k - #{lambda^D < e}.  Diagonal intersections are located by
    Brent's method on C_k(e) - e.
    """
    m, w = _split(h, w)
    poles = d_spectrum(m, w)
    base = np.arange(e_lo, e_hi + 0.5 * step, step)
    grid = [_nudge(float(e), poles, floor) for e in base]
    vals, vecs = _q_eig(m, w, grid[0])
    j0 = pole_count(poles, grid[0])
    pos_label = {kp: kp + j0 for kp in range(w)}  # current sorted position -> label
    index_map, samples = {}, {}
    refinements = 0

    def record(pos, e_vals, mapping):
        for kp, lab in mapping.items():
            index_map[(lab, pos)] = kp
            samples.setdefault(lab, {})[pos] = e_vals[kp]

    record(0, vals, pos_label)
    prev_e, prev_vecs = grid[0], vecs
    for pos in range(1, len(grid)):
        target = grid[pos]
        cur_e, cur_vecs = prev_e, prev_vecs
        depth = 0
        while cur_e < target:
            h_step = (target - cur_e) if depth == 0 else min((target - cur_e), step / 2 ** depth)
            nxt = _nudge(cur_e + h_step, poles, floor)
            if nxt <= cur_e:
                nxt = target
            n_vals, n_vecs = _q_eig(m, w, nxt)
            crossed = pole_count(poles, nxt) - pole_count(poles, cur_e)
            if crossed > 1:
                mapping, amb = None, True
            else:
                mapping, amb = _match(cur_vecs, n_vecs, crossed == 1, crossed == 1, threshold)
            if not amb:
                trial = {mapping[o]: lab for o, lab in pos_label.items() if o in mapping}
                if crossed == 1:
                    trial[w - 1] = max(pos_label.values()) + 1
                # curves never cross, so a sorting mismatch means the step was too coarse
                expected = pole_count(poles, nxt)
                amb = any(lab - expected != kp for kp, lab in trial.items())
            if amb:
                depth += 1
                refinements += 1
                if depth > max_refine:
                    raise AmbiguousContinuation(f"overlap continuation ambiguous near e={cur_e:.6g}")
                continue
            pos_label = trial
            cur_e, cur_vecs, vals = nxt, n_vecs, n_vals
        expected = pole_count(poles, cur_e)
        for kp, lab in pos_label.items():
            if lab - expected != kp:
                raise AmbiguousContinuation(f"label {lab} at position {kp} breaks the pole-count rule at e={cur_e:.6g}")
        record(pos, vals, pos_label)
        prev_e, prev_vecs = cur_e, cur_vecs
    grid_arr = np.array(grid)
    wanted = sorted(samples) if labels is None else list(labels)
    curves = {}
    for lab in wanted:
        arr = np.full(len(grid), np.nan)
        for pos, v in samples.get(lab, {}).items():
            arr[pos] = v
        curves[lab] = arr
    index_map = {key: kp for key, kp in index_map.items() if key[0] in curves}
    out = MFCurve(grid_arr, curves, index_map, poles, refinements=refinements)
    out.diagonal_hits = diagonal_hits(m, out, w)
    return out


def _c_minus_e(m, w, poles, k, e):
    # C_k is continuous through poles inside its domain; only Q_e is not
    e = _nudge(e, poles, POLE_FLOOR)
    kp = k - pole_count(poles, e)
    if not 0 <= kp < w:
        return math.nan
    return float(scipy.linalg.eigvalsh(build_Q(m, e, w=w), subset_by_index=[kp, kp])[0]) - e


def diagonal_hits(h, curve: MFCurve, w: Optional[int] = None) -> dict:
    m, w = _split(h, w)
    poles = curve.d_spectrum
    hits = {}
    for lab, arr in curve.curves.items():
        diff = arr - curve.e_grid
        for p in range(len(diff) - 1):
            a, b = diff[p], diff[p + 1]
            if not (np.isfinite(a) and np.isfinite(b)) or a * b > 0:
                continue
            e0, e1 = curve.e_grid[p], curve.e_grid[p + 1]
            if a == 0:
                hits[lab] = float(e0)
                break
            hits[lab] = brentq(lambda e: _c_minus_e(m, w, poles, lab, e), e0, e1, xtol=1e-14, rtol=4 * np.finfo(float).eps)
            break
    return hits


def curve_values_at(h, e: float, w: Optional[int] = None) -> dict:
    """{label k: C_k(e)} for all curves alive at e (via the pole-count rule)."""
    m, w = _split(h, w)
    poles = d_spectrum(m, w)
    j = pole_count(poles, e)
    xi = scipy.linalg.eigvalsh(build_Q(m, e, w=w))
    return {kp + j: float(x) for kp, x in enumerate(xi)}


def projection_check(h, e0: float, window: float, w: Optional[int] = None, eigenvalues=None) -> list:
    """r_j = (C_j(e0) - e0) / ((N/W)(lambda_j - e0)) for eigenvalues within ``window`` of e0."""
    m, w = _split(h, w)
    n = m.shape[0]
    lam = scipy.linalg.eigvalsh(m) if eigenvalues is None else np.asarray(eigenvalues)
    values = curve_values_at(m, e0, w)
    out = []
    for j in np.nonzero(np.abs(lam - e0) <= window)[0]:
        j = int(j)
        if lam[j] == e0 or j not in values:
            continue
        r = (values[j] - e0) / ((n / w) * (lam[j] - e0))
        out.append({"j": j, "lambda": float(lam[j]), "C": values[j], "r": float(r)})
    return out


# -- good grid -------------------------------------------------------------------


def good_grid(h, spacing_exp: float, sep: float, e_range, w: Optional[int] = None, poles=None):
    """One point per cell [E_n, E_{n+1}], E_n = n N^(-spacing_exp), maximizing
    the distance to spec(D); cells whose best separation is below 1/sep are
    flagged.  Returns (points, separations, flagged mask, local counts)."""
    m, w = _split(h, w)
    n = m.shape[0]
    poles = d_spectrum(m, w) if poles is None else np.sort(np.asarray(poles))
    delta = float(n) ** (-spacing_exp)
    lo, hi = e_range
    first, last = int(math.ceil(lo / delta - 1e-9)), int(math.floor(hi / delta + 1e-9))
    left = np.arange(first, last) * delta
    right = left + delta

    def separation(x):
        if poles.size == 0:
            return np.full(np.shape(x), np.inf)
        idx = np.searchsorted(poles, x)
        below = poles[np.clip(idx - 1, 0, poles.size - 1)]
        above = poles[np.clip(idx, 0, poles.size - 1)]
        return np.minimum(np.abs(x - below), np.abs(x - above))

    # without interior poles the distance is a tent between the neighbours
    idx_l = np.searchsorted(poles, left)
    idx_r = np.searchsorted(poles, right)
    counts = idx_r - idx_l
    below = np.where(idx_l > 0, poles[np.clip(idx_l - 1, 0, max(poles.size - 1, 0))], -np.inf) if poles.size else np.full(left.shape, -np.inf)
    above = np.where(idx_l < poles.size, poles[np.clip(idx_l, 0, max(poles.size - 1, 0))], np.inf) if poles.size else np.full(left.shape, np.inf)
    peak = np.where(np.isfinite(below) & np.isfinite(above), 0.5 * (below + above),
                    np.where(np.isfinite(above), -np.inf, np.inf))
    points = np.clip(peak, left, right)
    # cells containing poles: compare endpoints and interior midpoints
    for c in np.nonzero(counts > 0)[0]:
        inside = poles[idx_l[c]:idx_r[c]]
        cand = np.concatenate([[left[c], right[c]], 0.5 * (inside[1:] + inside[:-1])])
        sep_c = separation(cand)
        points[c] = cand[int(np.argmax(sep_c))]
    seps = separation(points)
    return points, seps, seps < 1.0 / sep, counts
