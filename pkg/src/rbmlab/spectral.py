"""Dense spectral engine: eigendecompositions, resolvents, semicircle law and
free convolution with a semicircle."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .ensemble import BandMatrixSample, as_matrix

EPS = np.finfo(float).eps


class EigenSolverError(RuntimeError):
    pass


class ConditioningWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float
    orth_defect: float
    source_seed: Optional[int] = None
    backend: str = "lapack"

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    def bulk(self, kappa: float = 0.1) -> np.ndarray:
        return np.nonzero(np.abs(self.eigenvalues) <= 2 - kappa)[0]


# -- self-contained path: Householder tridiagonalization + implicit QL ------


def householder_tridiagonal(a: np.ndarray):
    """Return (diag, offdiag, Q) with Q^* A Q real symmetric tridiagonal.

    Complex Hermitian input is reduced to a complex tridiagonal matrix and
    then made real by a diagonal unitary rescaling, folded into Q.
    """
    a = np.array(a, dtype=complex if np.iscomplexobj(a) else float)
    n = a.shape[0]
    q = np.eye(n, dtype=a.dtype)
    for k in range(n - 2):
        x = a[k + 1:, k].copy()
        norm = np.linalg.norm(x)
        if norm == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * norm
        v /= np.linalg.norm(v)
        sub = slice(k + 1, n)
        a[sub, :] -= 2.0 * np.outer(v, v.conj() @ a[sub, :])
        a[:, sub] -= 2.0 * np.outer(a[:, sub] @ v, v.conj())
        q[:, sub] -= 2.0 * np.outer(q[:, sub] @ v, v.conj())
    diag = np.real(np.diag(a)).copy()
    off = np.diag(a, -1).copy()
    if np.iscomplexobj(a):
        phases = np.ones(n, dtype=complex)
        for k in range(n - 1):
            mag = abs(off[k])
            phases[k + 1] = phases[k] * (off[k] / mag if mag > 0 else 1.0)
        q = q * phases[None, :]
    return diag, np.abs(off) if np.iscomplexobj(off) else off, q


def tridiagonal_ql(d: np.ndarray, e: np.ndarray, z: np.ndarray, max_iter: int = 60):
    """Implicit-shift QL on a symmetric tridiagonal matrix.

    ``d`` diagonal, ``e`` subdiagonal (length n-1); the rotations are applied
    to the columns of ``z``.  Returns (eigenvalues, vectors), unsorted.
    """
    d = np.array(d, dtype=float)
    n = d.size
    e = np.concatenate([np.asarray(e, dtype=float), [0.0]])
    zt = np.array(z.T)  # rows of zt are columns of z; rotations touch two rows
    anorm = max(np.abs(d).max(initial=0.0) + 2 * np.abs(e).max(initial=0.0), 1e-300)
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= EPS * dd or abs(e[m]) <= 1e-3 * EPS * anorm:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise EigenSolverError(f"QL iteration did not converge at index {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            deflated = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s, c = f / r, g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                upper = zt[i + 1].copy()
                zt[i + 1] = s * zt[i] + c * upper
                zt[i] = c * zt[i] - s * upper
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, zt.T


def _native_eigh(h: np.ndarray):
    d, e, q = householder_tridiagonal(h)
    vals, z = tridiagonal_ql(d, e, np.eye(h.shape[0]))
    vecs = q @ z
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def validate_decomposition(h, vals, vecs):
    n = h.shape[0]
    if n == 0:
        return 0.0, 0.0
    residual = float(np.linalg.norm(h @ vecs - vecs * vals[None, :], axis=0).max())
    orth = float(np.abs(vecs.conj().T @ vecs - np.eye(n)).max())
    return residual, orth


def eigh(h, backend: str = "lapack", check: bool = True) -> SpectralData:
    """Full eigendecomposition with residual and orthonormality validation.

    ``backend="native"`` uses the Householder/QL path in this module,
    ``"lapack"`` the LAPACK driver via scipy.  Both are held to the same
    tolerances: orthonormality defect <= 1e-10 and residual <= 1e-9 ||H||.
    """
    m = as_matrix(h)
    if backend == "native":
        vals, vecs = _native_eigh(m)
    elif backend == "lapack":
        vals, vecs = scipy.linalg.eigh(m)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    residual, orth = validate_decomposition(m, vals, vecs)
    scale = float(np.abs(vals).max(initial=0.0))
    if check and (residual > 1e-9 * scale or orth > 1e-10):
        raise EigenSolverError(f"decomposition failed validation: residual {residual:.3g} "
                               f"(||H|| = {scale:.3g}), orthonormality defect {orth:.3g}")
    seed = h.seed if isinstance(h, BandMatrixSample) else None
    return SpectralData(vals, vecs, residual, orth, seed, backend)


# -- resolvents ---------------------------------------------------------------


def resolvent(h, z: complex, spectral: Optional[SpectralData] = None) -> np.ndarray:
    """G(z) = (H - z)^-1 assembled from the eigendecomposition."""
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("resolvent needs Im z > 0")
    sd = spectral if spectral is not None else eigh(h)
    v = sd.eigenvectors
    return (v / (sd.eigenvalues - z)[None, :]) @ v.conj().T


def lower_block_spectrum(h, w: int) -> np.ndarray:
    m = as_matrix(h)
    return scipy.linalg.eigvalsh(m[w:, w:]) if m.shape[0] > w else np.zeros(0)


def generalized_resolvent(h, z: complex, e: complex, w: Optional[int] = None,
                          floor: float = 1e-8) -> np.ndarray:
    """Inverse of H - diag(z I_W, e I_{N-W})."""
    m = as_matrix(h)
    if w is None:
        w = h.profile.band_width
    n = m.shape[0]
    shift = np.concatenate([np.full(w, complex(z)), np.full(n - w, complex(e))])
    if abs(complex(e).imag) == 0 and n > w:
        dist = float(np.abs(lower_block_spectrum(m, w) - complex(e).real).min())
        if dist < floor:
            warnings.warn(f"e = {complex(e).real!r} lies within {dist:.2e} of the lower-block "
                          "spectrum; the generalized resolvent is ill-conditioned",
                          ConditioningWarning, stacklevel=2)
    try:
        return np.linalg.solve(m - np.diag(shift), np.eye(n, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"H - diag(z, e) is singular at z={z}, e={e}") from exc


def schur_q(h, e: float, w: int) -> np.ndarray:
    """Q_e = A - B^* (D - e)^-1 B for the block split at ``w``."""
    m = as_matrix(h)
    a, b, d = m[:w, :w], m[w:, :w], m[w:, w:]
    if d.size == 0:
        return np.array(a)
    solved = np.linalg.solve(d - e * np.eye(d.shape[0]), b)
    q = a - b.conj().T @ solved
    return 0.5 * (q + q.conj().T)


def schur_corner(h, z: complex, e: float, w: int) -> np.ndarray:
    """(Q_e - z)^-1, the independent route to the corner of the generalized resolvent."""
    q = schur_q(h, e, w)
    return np.linalg.inv(q - z * np.eye(w))


def ward_check(h, z: complex, spectral: Optional[SpectralData] = None) -> float:
    """max_i | sum_j |G_ij|^2 - Im G_ii / Im z |."""
    g = resolvent(h, z, spectral)
    lhs = np.sum(np.abs(g) ** 2, axis=1)
    return float(np.abs(lhs - g.diagonal().imag / complex(z).imag).max())


def ward_violation(h, z: complex, e: float, w: int) -> float:
    """max_i of sum_j |G_ij|^2 divided by Im G_ii / Im z for the generalized
    resolvent.  Equal to 1 for ordinary resolvents."""
    g = generalized_resolvent(h, z, e, w)
    lhs = np.sum(np.abs(g) ** 2, axis=1)
    rhs = np.abs(g.diagonal().imag) / complex(z).imag
    return float(np.max(lhs / np.maximum(rhs, 1e-300)))


# -- semicircle ---------------------------------------------------------------


def semicircle_density(x):
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / (2.0 * np.pi)


def semicircle_cdf(x):
    """Closed-form CDF of the semicircle law."""
    x = np.clip(np.asarray(x, dtype=float), -2.0, 2.0)
    anti = (x * np.sqrt(4.0 - x * x) / 2.0 + 2.0 * np.arcsin(x / 2.0)) / (2.0 * np.pi)
    return anti + 0.5


def m_sc(z):
    """Stieltjes transform of the semicircle: root of m^2 + z m + 1 = 0 with Im m > 0.

    Real ``z`` is read as z + i0.
    """
    z = np.asarray(z, dtype=complex)
    z = np.where(z.imag == 0, z + 1e-300j, z)
    root = np.sqrt(z * z - 4.0)
    m1, m2 = (-z + root) / 2.0, (-z - root) / 2.0
    out = np.where(m1.imag > 0, m1, m2)
    return out if out.ndim else complex(out)


@dataclass
class FixedPointResult:
    value: complex
    iterations: int
    residual: float


class ConvergenceError(RuntimeError):
    pass


def free_convolution(lambda0, t: float, z: complex, tol: float = 1e-12, alpha: float = 0.5,
                     max_iter: int = 200000, details: bool = False):
    """Stieltjes transform of the free convolution of the empirical measure of
    ``lambda0`` with a semicircle of variance ``t``.

    Damped iteration of m = mean(1/(lambda0 - z - t m)) started at m_sc(z).
    """
    lam = np.asarray(lambda0, dtype=float)
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("free_convolution needs Im z > 0")
    F = lambda m: np.mean(1.0 / (lam - z - t * m))
    if t == 0:
        out = FixedPointResult(complex(F(0.0)), 0, 0.0)
        return out if details else out.value
    m = complex(m_sc(z))
    for it in range(1, max_iter + 1):
        new = (1 - alpha) * m + alpha * F(m)
        step = abs(new - m)
        m = new
        if step <= tol * max(1.0, abs(m)):
            res = abs(F(m) - m)
            if res <= 10 * tol * max(1.0, abs(m)):
                out = FixedPointResult(m, it, res)
                return out if details else out.value
    raise ConvergenceError(f"free convolution fixed point did not converge at z={z}, t={t}: "
                           f"last step {step:.3g} after {max_iter} iterations")


def free_convolution_density(lambda0, t: float, grid, eta: Optional[float] = None) -> np.ndarray:
    lam = np.asarray(lambda0, dtype=float)
    if eta is None:
        eta = max(1e-4, 2.0 / lam.size)
    rho = np.array([free_convolution(lam, t, complex(x, eta), tol=1e-11).imag / np.pi for x in grid])
    if rho.min() < -1e-10:
        raise ConvergenceError(f"reconstructed density is negative ({rho.min():.3g})")
    return np.clip(rho, 0.0, None)


def typical_locations(lambda0, t: float, count: Optional[int] = None, grid_size: int = 4001) -> np.ndarray:
    """Quantiles gamma_i with CDF(gamma_i) = i/n of the free-convolution density.

    The density is read off at height eta = max(1e-4, 2/n) above the real axis
    on a uniform grid.  Values below 1e-3 of the peak are treated as smoothing
    tails and dropped, so the top quantile lands on the support edge instead
    of the end of the grid.  The CDF is integrated by the trapezoid rule,
    normalized and inverted at the first crossing of each level.
    """
    lam = np.asarray(lambda0, dtype=float)
    n = lam.size
    count = n if count is None else int(count)
    eta = max(1e-4, 2.0 / n)
    pad = 2.5 * math.sqrt(t) + 10 * eta + 1e-3
    grid = np.linspace(lam.min() - pad, lam.max() + pad, grid_size)
    rho = free_convolution_density(lam, t, grid, eta)
    rho = np.where(rho >= 1e-3 * rho.max(), rho, 0.0)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    levels = np.arange(1, count + 1) / count
    hi = np.minimum(np.searchsorted(cdf, levels - 1e-12, side="left"), grid.size - 1)
    lo = np.maximum(hi - 1, 0)
    span = cdf[hi] - cdf[lo]
    frac = np.where(span > 0, (levels - cdf[lo]) / np.where(span > 0, span, 1.0), 1.0)
    return grid[lo] + np.clip(frac, 0.0, 1.0) * (grid[hi] - grid[lo])


@dataclass(frozen=True)
class RegularityParams:
    eta_star: float
    eta_upper: float
    r: float
    T: float
    E0: float
    a: float = 0.05

    def check(self, n: int) -> list:
        """Violated links of the parameter chain, empty when regular."""
        na = float(n) ** self.a
        failures = []
        if not n ** (-1 + self.a) <= self.eta_star:
            failures.append("eta_star below n^(-1+a)")
        if not self.eta_star * na <= self.r:
            failures.append("r below eta_star n^a")
        if not self.r <= self.eta_upper / na:
            failures.append("r above eta_upper n^-a")
        if not self.eta_upper * na <= 1:
            failures.append("eta_upper above n^-a")
        return failures
