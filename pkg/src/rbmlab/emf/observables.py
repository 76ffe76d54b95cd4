"""Eigenvector overlaps and the perfect-matching observables g(eta)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import poly
from .configs import Configuration
from .matchings import HERMITIAN, SYMMETRIC, g_poly


@dataclass(frozen=True)
class OverlapSet:
    """Projection data for p_ij = sum_alpha <u_i, q_alpha> conj(<u_j, q_alpha>) - C0 delta_ij.

    Either ``index_set`` (q_alpha = coordinate vectors) or ``projections``
    (an N x |Q| matrix of arbitrary vectors, not necessarily orthogonal).
    ``c0=None`` means the default |I| / N.
    """

    index_set: Optional[Sequence[int]] = None
    projections: Optional[np.ndarray] = None
    c0: Optional[float] = None

    def centering(self, n_dim: int) -> float:
        if self.c0 is not None:
            return float(self.c0)
        size = len(self.index_set) if self.index_set is not None else self.projections.shape[1]
        return size / n_dim

    def values(self, u: np.ndarray) -> np.ndarray:
        return overlaps(u, self)


def overlaps(u: np.ndarray, spec: OverlapSet) -> np.ndarray:
    """Overlap matrix for one eigenvector matrix (N, n) or a batch (P, N, n).

    Eigenvectors are the columns of ``u``.
    """
    u = np.asarray(u)
    n_dim = u.shape[-2]
    if spec.index_set is not None:
        proj = u[..., list(spec.index_set), :]
    else:
        proj = np.swapaxes(np.conj(spec.projections), 0, 1) @ u
    # p[a, b] = sum_alpha proj[alpha, a] conj(proj[alpha, b])
    p = np.einsum("...xa,...xb->...ab", proj, np.conj(proj))
    if not np.iscomplexobj(u):
        p = p.real
    idx = np.arange(u.shape[-1])
    p[..., idx, idx] -= spec.centering(n_dim)
    return p


def evaluate_g(p: np.ndarray, eta: Configuration, cls: str = SYMMETRIC):
    """g(eta) evaluated on an overlap matrix (or a batch of them)."""
    return poly.evaluate(g_poly(eta, cls), p)


def observable_g(u: np.ndarray, spec: OverlapSet, eta: Configuration, cls: str = SYMMETRIC):
    return evaluate_g(overlaps(u, spec), eta, cls)


def rotate(u: np.ndarray, k: int, l: int, theta: float) -> np.ndarray:
    """u_k <- cos u_k + sin u_l, u_l <- -sin u_k + cos u_l."""
    out = np.array(u, dtype=float if not np.iscomplexobj(u) else complex)
    c, s = np.cos(theta), np.sin(theta)
    uk, ul = u[..., :, k].copy(), u[..., :, l].copy()
    out[..., :, k] = c * uk + s * ul
    out[..., :, l] = -s * uk + c * ul
    return out
