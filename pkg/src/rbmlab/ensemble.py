"""Random band matrix ensembles.

Indices live on the cycle Z_N and the band test uses circular distance.  The
first ``W`` indices form block A, the remaining ``N - W`` form block D.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .seeding import open_uniforms, seed_derive, stream

SYMMETRIC = "symmetric"
HERMITIAN = "hermitian"


def circular_distance(x, n: int):
    x = np.mod(x, n)
    return np.minimum(x, n - x)


@dataclass(frozen=True)
class BandProfile:
    """Variance profile ``f`` on Z_N, so that Var(H_ij) = f(i - j)."""

    n_dim: int
    band_width: int
    f: np.ndarray
    c_lower: float
    c_upper: float
    shape: str = "custom"

    @property
    def support_radius(self) -> int:
        dist = circular_distance(np.arange(self.n_dim), self.n_dim)
        nz = dist[self.f > 0]
        return int(nz.max()) if nz.size else 0

    def variance_matrix(self) -> np.ndarray:
        idx = np.arange(self.n_dim)
        return self.f[(idx[None, :] - idx[:, None]) % self.n_dim]

    def check(self, tol: float = 1e-12) -> None:
        n, w, f = self.n_dim, self.band_width, self.f
        if f.shape != (n,) or np.any(f < 0):
            raise ValueError("profile must be a nonnegative vector of length N")
        if abs(f.sum() - 1.0) > tol:
            raise ValueError(f"profile sums to {f.sum()!r}, expected 1")
        if not np.allclose(f, f[(-np.arange(n)) % n], rtol=0, atol=tol):
            raise ValueError("profile is not symmetric under x -> -x")
        dist = circular_distance(np.arange(n), n)
        lower = np.where(dist <= w, self.c_lower / w, 0.0)
        upper = np.where(dist <= self.c_upper * w, self.c_upper / w, 0.0)
        if np.any(f < lower - tol) or np.any(f > upper + tol):
            raise ValueError("profile violates its band bounds")


def build_profile(n_dim: int, band_width: int, shape: str = "uniform") -> BandProfile:
    n, w = int(n_dim), int(band_width)
    if w < 1 or 2 * w > n:
        raise ValueError(f"band width {w} must satisfy 1 <= W <= N/2 (N={n})")
    dist = circular_distance(np.arange(n), n)
    if shape == "uniform":
        # 2W+1 sites, except W = N/2 where the two ends of the window coincide
        f = np.where(dist <= w, 1.0 / np.count_nonzero(dist <= w), 0.0)
    elif shape == "triangular":
        raw = np.clip(w + 1 - dist, 0, None).astype(float)
        f = raw / raw.sum()
    else:
        raise ValueError(f"unknown profile shape {shape!r}")
    c_lower = w * f[dist <= w].min()
    c_upper = max(w * f.max(), 1.0)
    prof = BandProfile(n, w, f, float(c_lower), float(c_upper), shape)
    prof.check()
    return prof


# ---------------------------------------------------------------------------
# entry laws


def two_point(skew: float):
    """Standardized two-point law with the given third moment."""
    root = math.sqrt(skew * skew + 4.0)
    lo, hi = (skew - root) / 2.0, (skew + root) / 2.0
    return np.array([lo, hi]), np.array([hi / (hi - lo), -lo / (hi - lo)])


@dataclass(frozen=True)
class EntryLaw:
    """Standardized entry distribution ``sqrt(gauss_var) Z + R``.

    ``R`` is discrete with the given atoms; the pure kinds are special cases
    (``gaussian`` has ``gauss_var = 1`` and a single atom at 0).
    """

    kind: str
    values: tuple = (0.0,)
    probs: tuple = (1.0,)
    gauss_var: float = 0.0
    params: tuple = ()

    def _atom_moment(self, k: int) -> float:
        v, p = np.asarray(self.values), np.asarray(self.probs)
        return float(np.sum(p * v ** k))

    @property
    def m1(self) -> float:
        return self._atom_moment(1)

    @property
    def m2(self) -> float:
        if self.kind == "uniform":
            return 1.0
        return self.gauss_var + self._atom_moment(2)

    @property
    def m3(self) -> float:
        if self.kind == "uniform":
            return 0.0
        return self._atom_moment(3)

    @property
    def m4(self) -> float:
        if self.kind == "uniform":
            return 1.8
        s = self.gauss_var
        return 3 * s * s + 6 * s * self._atom_moment(2) + self._atom_moment(4)

    @property
    def gap(self) -> float:
        return self.m4 - self.m3 ** 2 - 1.0

    @property
    def tail_scale(self) -> float:
        """A delta with E exp(delta xi^2) finite; inf for bounded laws."""
        if self.gauss_var > 0:
            return 1.0 / (4.0 * self.gauss_var)
        return math.inf

    def moments(self):
        return (self.m1, self.m2, self.m3, self.m4)

    def is_two_point(self) -> bool:
        v = np.asarray(self.values)[np.asarray(self.probs) > 0]
        return self.gauss_var == 0 and self.kind != "uniform" and np.unique(v).size == 2

    def sample_uniforms(self, u_atom: np.ndarray, u_gauss: Optional[np.ndarray]) -> np.ndarray:
        """Inverse-CDF map from uniforms in (0, 1) to draws of the law."""
        if self.kind == "uniform":
            return (2.0 * u_atom - 1.0) * math.sqrt(3.0)
        if self.kind == "gaussian":
            return ndtri(u_atom)
        v, p = np.asarray(self.values), np.asarray(self.probs)
        cdf = np.cumsum(p)
        cdf[-1] = 1.0
        x = v[np.minimum(np.searchsorted(cdf, u_atom, side="right"), v.size - 1)]
        if self.gauss_var > 0:
            x = x + math.sqrt(self.gauss_var) * ndtri(u_gauss)
        return x

    @property
    def needs_gauss_stream(self) -> bool:
        return self.gauss_var > 0 and self.kind != "gaussian"

    @staticmethod
    def gaussian() -> "EntryLaw":
        return EntryLaw("gaussian", (0.0,), (1.0,), 1.0)

    @staticmethod
    def uniform() -> "EntryLaw":
        return EntryLaw("uniform")

    @staticmethod
    def rademacher() -> "EntryLaw":
        return EntryLaw("rademacher", (-1.0, 1.0), (0.5, 0.5))

    @staticmethod
    def three_point(p: float, a: float) -> "EntryLaw":
        """Zero with probability 1 - p, else a two-point law of skewness ``a``
        rescaled by 1/sqrt(p).  Then m3 = a/sqrt(p), m4 = (a^2 + 1)/p and
        gap = 1/p - 1.
        """
        if not 0 < p <= 1:
            raise ValueError("three_point needs 0 < p <= 1")
        vals, probs = two_point(a)
        values = (0.0,) + tuple(vals / math.sqrt(p))
        weights = (1.0 - p,) + tuple(p * probs)
        return EntryLaw("three_point", values, weights, 0.0, (p, a))

    @staticmethod
    def discrete(pairs) -> "EntryLaw":
        values = tuple(float(v) for v, _ in pairs)
        probs = tuple(float(q) for _, q in pairs)
        law = EntryLaw("discrete", values, probs)
        if abs(sum(probs) - 1) > 1e-12 or min(probs) < 0:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        if abs(law.m1) > 1e-12 or abs(law.m2 - 1) > 1e-12:
            raise ValueError("discrete law must have mean 0 and variance 1")
        return law

    @staticmethod
    def from_name(name: str) -> "EntryLaw":
        name = name.strip().lower()
        if name in ("gaussian", "normal"):
            return EntryLaw.gaussian()
        if name == "uniform":
            return EntryLaw.uniform()
        if name in ("rademacher", "bernoulli"):
            return EntryLaw.rademacher()
        if name.startswith("three_point"):
            inner = name[name.index("(") + 1 : name.rindex(")")]
            p, a = (float(x) for x in inner.split(","))
            return EntryLaw.three_point(p, a)
        raise ValueError(f"unknown law {name!r}")

    def describe(self) -> dict:
        return {"kind": self.kind, "params": list(self.params), "gauss_var": self.gauss_var,
                "m3": self.m3, "m4": self.m4, "gap": self.gap}


class MomentMatchError(ValueError):
    pass


def match_four_moments(law: EntryLaw, eps_m: float, c: float, W: int, N: int) -> EntryLaw:
    """Law of the form (Gaussian of variance s) + (independent discrete part)
    with the same first four moments as ``law``, where s = c N^(-eps_m).

    Such a law exists iff
        gap >= s (m4 + 3) - 6 s^2 + 2 s^3,
    which is the Hankel-determinant condition for the remainder.  Two-point
    laws have gap 0 and can never be matched with s > 0.
    """
    s = c * float(N) ** (-eps_m)
    if not 0 < s < 1:
        raise MomentMatchError(f"Gaussian fraction s = {s} must lie in (0, 1)")
    if law.gap <= 1e-14:
        raise MomentMatchError(
            "fourth-moment gap is zero: the law is a two-point (Bernoulli) law, and a law "
            "with given first four moments contains a Gaussian component if and only if "
            "it is not Bernoulli")
    m3, m4 = law.m3, law.m4
    need = s * (m4 + 3) - 6 * s * s + 2 * s ** 3
    if law.gap < need:
        raise MomentMatchError(
            f"gap {law.gap:.3g} below the matchable threshold {need:.3g} at s = {s:.3g}")
    if law.kind == "gaussian":
        return law
    v = 1.0 - s
    m4r = m4 - 3 * s * s - 6 * s * v
    y3, y4 = m3 / v ** 1.5, m4r / v ** 2
    p = min(1.0, 1.0 / (y4 - y3 * y3))
    base = EntryLaw.three_point(p, y3 * math.sqrt(p))
    values = tuple(math.sqrt(v) * np.asarray(base.values))
    return EntryLaw("matched", values, base.probs, s, (eps_m, c, W, N))


# ---------------------------------------------------------------------------
# samples


@dataclass(frozen=True)
class BandMatrixSample:
    profile: BandProfile
    law: EntryLaw
    symmetry: str
    entries: np.ndarray
    seed: int
    provenance: tuple = field(default=())

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def w(self) -> int:
        return self.profile.band_width

    def with_entries(self, entries: np.ndarray, step: dict) -> "BandMatrixSample":
        entries = np.array(entries)
        entries.setflags(write=False)
        return replace(self, entries=entries, provenance=self.provenance + (step,))

    def provenance_list(self) -> list:
        return [dict(s) for s in self.provenance]


def as_matrix(h) -> np.ndarray:
    return h.entries if isinstance(h, BandMatrixSample) else np.asarray(h)


def band_pairs(n: int, radius: int):
    """Unordered pairs (i <= j) within circular distance ``radius``,
    sorted row-major.  This fixes the stream position of every entry."""
    radius = min(radius, n // 2)
    rows, cols = [], []
    base = np.arange(n)
    for x in range(radius + 1):
        i = base if 2 * x != n else base[: n // 2]
        j = (i + x) % n
        rows.append(np.minimum(i, j))
        cols.append(np.maximum(i, j))
    r, c = np.concatenate(rows), np.concatenate(cols)
    order = np.lexsort((c, r))
    return r[order], c[order]


def _draw(n, variance_by_residue, law, symmetry, seed, tag, diag_factor=1.0):
    """Dense self-adjoint matrix with entry variance taken from a residue table."""
    radius = int(circular_distance(np.nonzero(variance_by_residue)[0], n).max(initial=0))
    rows, cols = band_pairs(n, radius)
    var = variance_by_residue[(cols - rows) % n] * np.where(rows == cols, diag_factor, 1.0)
    draw = lambda part: law.sample_uniforms(
        open_uniforms(stream(seed, f"{tag}/{part}"), rows.size),
        open_uniforms(stream(seed, f"{tag}/{part}/gauss"), rows.size) if law.needs_gauss_stream else None)
    if symmetry == SYMMETRIC:
        vals = np.sqrt(var) * draw("re")
        h = np.zeros((n, n))
    elif symmetry == HERMITIAN:
        off = rows != cols
        re, im = draw("re"), draw("im")
        vals = np.sqrt(var) * np.where(off, (re + 1j * im) / math.sqrt(2.0), re)
        h = np.zeros((n, n), dtype=complex)
    else:
        raise ValueError(f"unknown symmetry {symmetry!r}")
    h[rows, cols] = vals
    h[cols, rows] = np.conj(vals)
    return h


def _freeze(a):
    a.setflags(write=False)
    return a


def sample_band(profile: BandProfile, law: EntryLaw, symmetry: str = SYMMETRIC, seed: int = 0) -> BandMatrixSample:
    h = _draw(profile.n_dim, profile.f, law, symmetry, seed, "band")
    return BandMatrixSample(profile, law, symmetry, _freeze(h), int(seed), ({"step": "sample_band"},))


def divisible_variance(profile: BandProfile, eps_m: float, c: float) -> np.ndarray:
    n, w = profile.n_dim, profile.band_width
    dist = circular_distance(np.arange(n), n)
    return np.where(dist <= w, c / w * float(n) ** (-eps_m), 0.0)


def gaussian_divisible(profile: BandProfile, law1: EntryLaw, eps_m: float, c: float,
                       seed: int = 0, symmetry: str = SYMMETRIC) -> BandMatrixSample:
    """H = H1 + H2 with H2 Gaussian of variance (1 + delta_ij) c/W N^(-eps_m)
    inside the band and H1 drawn from the deflated profile."""
    if not 0 <= eps_m < 0.5 or c <= 0:
        raise ValueError("need 0 <= eps_m < 1/2 and c > 0")
    g = divisible_variance(profile, eps_m, c)
    deflated = profile.f - g * np.where(np.arange(profile.n_dim) == 0, 2.0, 1.0)
    if deflated.min() < -1e-15:
        x = int(np.argmin(deflated))
        raise ValueError(f"c = {c} too large: deflated variance {deflated[x]:.3g} < 0 at offset {x}")
    deflated = np.clip(deflated, 0.0, None)
    h1 = _draw(profile.n_dim, deflated, law1, symmetry, seed_derive(seed, ["h1"]), "band")
    h2 = _draw(profile.n_dim, g, EntryLaw.gaussian(), symmetry, seed_derive(seed, ["h2"]), "band",
               diag_factor=2.0)
    step = {"step": "gaussian_divisible", "eps_m": eps_m, "c": c}
    return BandMatrixSample(profile, law1, symmetry, _freeze(h1 + h2), int(seed), (step,))


def goe_like(n: int, symmetry: str, seed: int, tag: str = "goe") -> np.ndarray:
    """Full Gaussian matrix with off-diagonal variance 1/N; the diagonal has
    variance 2/N in the symmetric class and 1/N in the Hermitian class."""
    var = np.full(n, 1.0 / n)
    return _draw(n, var, EntryLaw.gaussian(), symmetry, seed, tag,
                 diag_factor=2.0 if symmetry == SYMMETRIC else 1.0)


def regularize(sample: BandMatrixSample, A: Optional[float], seed: int = 0) -> BandMatrixSample:
    """Add N^(-A) times a GOE (GUE) matrix.  ``A=None`` or ``inf`` adds nothing."""
    if A is None or math.isinf(A):
        return sample.with_entries(sample.entries, {"step": "regularize", "A": "none"})
    if A <= 0:
        raise ValueError("A must be positive")
    n = sample.n
    hg = goe_like(n, sample.symmetry, seed)
    return sample.with_entries(sample.entries + float(n) ** (-A) * hg,
                               {"step": "regularize", "A": A, "seed": int(seed)})


def block_potential(n: int, w: int, g: float) -> np.ndarray:
    """g * 1_{j > W}: zero on block A, g on block D."""
    out = np.zeros(n)
    out[w:] = g
    return out


def shift_potential(sample: BandMatrixSample, g) -> BandMatrixSample:
    g = np.broadcast_to(np.asarray(g, dtype=float), (sample.n,))
    return sample.with_entries(sample.entries - np.diag(g).astype(sample.entries.dtype),
                               {"step": "shift_potential", "g": g.tolist()})


def interpolate(h0: BandMatrixSample, h1: BandMatrixSample, theta: float, seed: int = 0) -> BandMatrixSample:
    """Entrywise Bernoulli(theta) choice of H1 over H0, one coin per unordered pair."""
    if h0.entries.shape != h1.entries.shape:
        raise ValueError("interpolation needs matrices of equal size")
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    n = h0.n
    rows, cols = np.triu_indices(n)
    pick = open_uniforms(stream(seed, "interpolate"), rows.size) < theta
    chi = np.zeros((n, n), dtype=bool)
    chi[rows, cols] = pick
    chi[cols, rows] = pick
    out = np.where(chi, h1.entries, h0.entries)
    step = {"step": "interpolate", "theta": theta, "seed": int(seed),
            "fraction_h1": float(pick.mean())}
    return h0.with_entries(out, step)
