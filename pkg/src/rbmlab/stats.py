"""Desk-scale spectral statistics for band matrices and a GOE reference."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.integrate

from .spectral import SpectralData, semicircle_cdf, semicircle_density

DEFAULT_KAPPA = 0.1


@dataclass
class StatRecord:
    name: str
    ensemble: str
    values: list
    kappa: float = DEFAULT_KAPPA
    seeds: list = field(default_factory=list)
    thresholds: dict = field(default_factory=dict)

    @property
    def aggregate(self) -> dict:
        v = np.asarray(self.values, dtype=float)
        if v.size == 0:
            return {"mean": math.nan, "median": math.nan, "stderr": math.nan}
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
        return {"mean": float(v.mean()), "median": float(np.median(v)), "stderr": se}

    def as_dict(self) -> dict:
        return {"name": self.name, "ensemble": self.ensemble, "values": list(map(float, self.values)),
                "kappa": self.kappa, "seeds": list(self.seeds), "thresholds": dict(self.thresholds),
                "aggregate": self.aggregate}


def _eigs(spec) -> np.ndarray:
    return np.asarray(spec.eigenvalues if isinstance(spec, SpectralData) else spec, dtype=float)


def _bulk_vectors(spec: SpectralData, kappa: float):
    idx = spec.bulk(kappa)
    return idx, spec.eigenvectors[:, idx]


# -- delocalization and QUE --------------------------------------------------------


def deloc_sup(spec: SpectralData, kappa: float = DEFAULT_KAPPA, tau: float = 0.3) -> dict:
    """N max_i |psi_k(i)|^2 for bulk eigenvectors."""
    idx, vecs = _bulk_vectors(spec, kappa)
    vals = spec.n * np.max(np.abs(vecs) ** 2, axis=0)
    top = float(vals.max()) if vals.size else math.nan
    return {"k": idx.tolist(), "values": vals, "max": top,
            "threshold": float(spec.n) ** tau, "pass": bool(top <= float(spec.n) ** tau)}


def window_masses(vectors: np.ndarray, w: int) -> np.ndarray:
    """Mass of each vector on the circular windows {l, ..., l + W - 1}, shape (N, K)."""
    p = np.abs(np.atleast_2d(vectors.T).T) ** 2
    n = p.shape[0]
    ext = np.concatenate([np.zeros((1, p.shape[1])), np.cumsum(np.concatenate([p, p[:w]]), axis=0)])
    return ext[w:w + n] - ext[:n]


def que_windows(spec: SpectralData, w: int, kappa: float = DEFAULT_KAPPA) -> dict:
    """max over bulk j and shifts l of |(N/W) mass_l(psi_j) - 1| with W-site windows."""
    idx, vecs = _bulk_vectors(spec, kappa)
    dev = np.abs(spec.n / w * window_masses(vecs, w) - 1.0)
    per_j = dev.max(axis=0) if dev.size else np.zeros(0)
    return {"k": idx.tolist(), "per_k": per_j, "max": float(per_j.max()) if per_j.size else math.nan}


def localization_metrics(spec: SpectralData, kappa: float = DEFAULT_KAPPA) -> dict:
    """Inverse participation ratio sum_i |psi_k(i)|^4 of bulk eigenvectors."""
    idx, vecs = _bulk_vectors(spec, kappa)
    ipr = np.sum(np.abs(vecs) ** 4, axis=0)
    return {"k": idx.tolist(), "ipr": ipr, "median": float(np.median(ipr)) if ipr.size else math.nan}


# -- counting ----------------------------------------------------------------------


def semicircle_mass(e1: float, e2: float) -> float:
    """Quadrature of the semicircle density on [e1, e2]."""
    if e1 == e2:
        return 0.0
    val, _ = scipy.integrate.quad(lambda x: float(semicircle_density(x)), e1, e2, epsabs=1e-14, epsrel=1e-13)
    return val


def local_law_counts(spec, e1: float, e2: float, tau: float = 0.1, eps: float = 0.1) -> dict:
    eigs = _eigs(spec)
    n = eigs.size
    count = int(np.count_nonzero((eigs >= e1) & (eigs <= e2)))
    target = n * semicircle_mass(e1, e2)
    dev = abs(count - target)
    bound = float(n) ** tau + abs(e2 - e1) * float(n) ** (1 - eps)
    return {"count": count, "target": target, "deviation": dev, "bound": bound, "pass": bool(dev <= bound)}


# -- spacing statistics ------------------------------------------------------------


def gap_ratios(spec, kappa: float = DEFAULT_KAPPA) -> dict:
    """r_k = min(d_k, d_{k+1}) / max(d_k, d_{k+1}) over consecutive bulk spacings."""
    eigs = np.sort(_eigs(spec))
    bulk = eigs[np.abs(eigs) <= 2 - kappa]
    if bulk.size < 3:
        raise ValueError("gap ratios need at least 3 bulk eigenvalues")
    d = np.diff(bulk)
    lo, hi = np.minimum(d[:-1], d[1:]), np.maximum(d[:-1], d[1:])
    good = hi > 0
    r = lo[good] / hi[good]
    return {"r_values": r, "mean": float(r.mean()) if r.size else math.nan,
            "excluded_zero_gaps": int(np.count_nonzero(~good))}


def unfolded_spacings(spec, kappa: float = DEFAULT_KAPPA) -> np.ndarray:
    """Nearest-neighbour spacings after unfolding by the semicircle CDF (mean 1 in the bulk)."""
    eigs = np.sort(_eigs(spec))
    bulk = eigs[np.abs(eigs) <= 2 - kappa]
    return np.diff(eigs.size * semicircle_cdf(bulk))


def level_repulsion(values: Sequence, w: float = 1.0, fit_range=(0.05, 0.5), min_gaps: int = 100) -> dict:
    """Empirical CDF of W |xi_{k+1} - xi_k| and a power fit near zero.

    ``values`` is one sorted spectrum or a list of them.  Spacings are
    scaled by their mean before fitting log F(x) against log x on
    ``fit_range``; below ``min_gaps`` spacings only the CDF is returned.
    """
    arrays = [values] if np.ndim(values[0]) == 0 else values
    gaps = np.concatenate([w * np.diff(np.sort(np.asarray(v, dtype=float))) for v in arrays])
    gaps = np.sort(gaps)
    cdf = np.arange(1, gaps.size + 1) / gaps.size
    out = {"x": gaps, "cdf": cdf, "exponent": None, "count": int(gaps.size)}
    if gaps.size < min_gaps:
        out["refused"] = f"only {gaps.size} gaps (< {min_gaps}); fit refused"
        return out
    x = gaps / gaps.mean()
    grid = np.geomspace(fit_range[0], fit_range[1], 12)
    frac = np.searchsorted(x, grid, side="right") / x.size
    keep = frac > 0
    if keep.sum() < 3:
        out["refused"] = "too little mass in the fit range"
        return out
    slope, _ = np.polyfit(np.log(grid[keep]), np.log(frac[keep]), 1)
    out["exponent"] = float(slope)
    return out


def poisson_surrogate(n: int, gen: np.random.Generator) -> np.ndarray:
    """Ordered iid uniforms on [-2, 2] (no level repulsion)."""
    return np.sort(gen.uniform(-2.0, 2.0, n))


# -- GOE reference -----------------------------------------------------------------


def goe_baseline(n: int, samples: int, seed: int, kappa: float = DEFAULT_KAPPA,
                 symmetry: str = "symmetric", vectors: bool = False) -> dict:
    """Monte Carlo reference records on the full Gaussian ensemble."""
    from .ensemble import goe_like
    from .seeding import seed_derive
    from .spectral import eigh

    if n < 4:
        raise ValueError("the GOE baseline needs n >= 4 so that gap ratios are defined")
    ratio_means, deloc, spacings, spectra, seeds = [], [], [], [], []
    for i in range(samples):
        s = seed_derive(seed, ["goe", i])
        h = goe_like(n, symmetry, s)
        seeds.append(s)
        if vectors:
            sd = eigh(h)
            deloc.append(deloc_sup(sd, kappa)["max"])
            eigs = sd.eigenvalues
        else:
            eigs = np.linalg.eigvalsh(h)
        ratio_means.append(gap_ratios(eigs, kappa)["mean"])
        spacings.append(unfolded_spacings(eigs, kappa))
        spectra.append(eigs)
    desc = f"goe(n={n},{symmetry})"
    out = {"gap_ratio": StatRecord("gap_ratio_mean", desc, ratio_means, kappa, seeds),
           "spacings": np.concatenate(spacings) if spacings else np.zeros(0),
           "repulsion": level_repulsion([np.sort(u) for u in (n * semicircle_cdf(e[np.abs(e) <= 2 - kappa]) for e in spectra)])}
    if vectors:
        out["deloc"] = StatRecord("deloc_sup", desc, deloc, kappa, seeds)
    return out


def spacing_histogram(spacings: np.ndarray, bins=None) -> tuple:
    bins = np.linspace(0, 4, 41) if bins is None else bins
    hist, edges = np.histogram(spacings, bins=bins, density=True)
    return hist, edges


# -- interpolated ensemble --------------------------------------------------------


def interpolation_continuity(h0, h1, thetas, samples: int, seed: int, kappa: float = DEFAULT_KAPPA,
                             max_sigma: float = 5.0) -> dict:
    """Gap-ratio means of H^theta on a theta grid and the largest adjacent jump in sigma units.

    ``h0`` and ``h1`` are callables i -> sample so that each theta sees the
    same pair of matrices.
    """
    from .ensemble import interpolate
    from .seeding import seed_derive

    means, ses = [], []
    for th in thetas:
        vals = []
        for i in range(samples):
            a, b = h0(i), h1(i)
            ht = interpolate(a, b, th, seed_derive(seed, ["theta", i]))
            vals.append(gap_ratios(np.linalg.eigvalsh(ht.entries), kappa)["mean"])
        v = np.asarray(vals)
        means.append(float(v.mean()))
        ses.append(float(v.std(ddof=1) / math.sqrt(v.size)))
    jumps = [abs(means[i + 1] - means[i]) / math.hypot(ses[i], ses[i + 1]) for i in range(len(means) - 1)]
    worst = float(max(jumps)) if jumps else 0.0
    return {"thetas": list(thetas), "means": means, "stderr": ses, "jumps_sigma": jumps,
            "max_jump_sigma": worst, "pass": worst <= max_sigma}
