"""Exact verification of the moment-flow generator identity.

Two checks per (eta, k, l):

* per matching: the second-order rotation operator applied to P(G) equals
  sum over ordered vertex pairs (v, w) at sites k, l of eps(v, w) P(S_vw G)
  minus (2 eta_k + 2 eta_l) P(G) in the symmetric class, and half that sum
  minus (eta_k + eta_l) P(G) in the Hermitian class;
* summed: applied to g(eta) it equals the jump-rate expression
  rate(k->l) (g(eta^{kl}) - g(eta)) + rate(l->k) (g(eta^{lk}) - g(eta)).

All arithmetic is exact (integers and fractions).
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache

from . import poly
from .configs import Configuration, enumerate_configs
from .matchings import HERMITIAN, SYMMETRIC, enumerate_matchings, g_poly


def jump_rate(eta: Configuration, k: int, l: int, cls: str) -> int:
    if cls == SYMMETRIC:
        return 2 * eta[k] * (1 + 2 * eta[l])
    return eta[k] * (1 + eta[l])


@lru_cache(maxsize=200000)
def _second_order_monomial(mono: tuple, k: int, l: int, hermitian: bool) -> tuple:
    return tuple(poly.second_order({mono: 1}, k, l, hermitian, doubled=True).items())


def _moved_monomial(graph, v, w, jump: bool, dst: int) -> tuple:
    """Weight monomial of S_vw G without building the graph."""
    def site(x):
        if jump:
            return dst if x in (v, w) else x[0]
        if x == v:
            return w[0]
        if x == w:
            return v[0]
        return x[0]

    out = []
    for a, b in graph.edges:
        if graph.cls == SYMMETRIC:
            out.append(poly.canon(site(a), site(b), False))
        else:
            black, white = (a, b) if a[2] == "b" else (b, a)
            out.append((site(black), site(white)))
    return poly.monomial(out)


def graph_rhs(graph, eta: Configuration, k: int, l: int) -> dict:
    """Right side of the per-matching identity; Hermitian values are doubled."""
    cls = graph.cls
    local = [x for x in graph.vertices if x[0] in (k, l)]
    out = defaultdict(int)
    for v, w in itertools.permutations(local, 2):
        same_site = v[0] == w[0]
        if cls == SYMMETRIC:
            eps, jump = (1, True) if same_site else (-1, False)
        elif same_site and v[2] != w[2]:
            eps, jump = 1, True
        elif not same_site and v[2] == w[2]:
            eps, jump = -1, False
        else:
            continue
        dst = (l if v[0] == k else k) if jump else None
        out[_moved_monomial(graph, v, w, jump, dst)] += eps
    diag = 2 * (eta[k] + eta[l])
    out[graph.weight_variables()] -= diag
    return poly.clean(out)


@dataclass
class IdentityReport:
    eta: Configuration
    k: int
    l: int
    cls: str
    n_graphs: int
    graph_equal: bool
    summed_equal: bool
    lhs_poly: dict = field(repr=False)
    rhs_poly: dict = field(repr=False)
    first_mismatch: object = None

    @property
    def equal(self) -> bool:
        return self.graph_equal and self.summed_equal

    def as_record(self) -> dict:
        return {"eta": self.eta.label(), "k": self.k, "l": self.l, "class": self.cls,
                "route": "symbolic", "pass": self.equal, "n_graphs": self.n_graphs,
                "graph_equal": self.graph_equal, "summed_equal": self.summed_equal,
                "lhs": poly.to_string(self.lhs_poly), "rhs": poly.to_string(self.rhs_poly),
                "max_err": 0.0 if self.equal else 1.0}


def summed_sides(eta: Configuration, k: int, l: int, cls: str):
    herm = cls == HERMITIAN
    lhs = poly.second_order(g_poly(eta, cls), k, l, herm)
    g0 = g_poly(eta, cls)
    rhs = {}
    for a, b in ((k, l), (l, k)):
        rate = jump_rate(eta, a, b, cls)
        if rate:
            poly.add_into(rhs, g_poly(eta.move(a, b), cls), rate)
            poly.add_into(rhs, g0, -rate)
    return lhs, poly.clean(rhs)


def verify_identity_symbolic(eta: Configuration, k: int, l: int, cls: str = SYMMETRIC) -> IdentityReport:
    if k == l:
        raise ValueError("k and l must differ")
    herm = cls == HERMITIAN
    graphs = enumerate_matchings(eta, cls)
    graph_ok, mismatch = True, None
    for graph in graphs:
        lhs = dict(_second_order_monomial(graph.weight_variables(), k, l, herm))
        rhs = graph_rhs(graph, eta, k, l)
        if lhs != rhs:
            graph_ok, mismatch = False, {"graph": graph.edges, "lhs": poly.to_string(lhs),
                                         "rhs": poly.to_string(rhs)}
            break
    lhs_sum, rhs_sum = summed_sides(eta, k, l, cls)
    return IdentityReport(eta, k, l, cls, len(graphs), graph_ok, lhs_sum == rhs_sum,
                          lhs_sum, rhs_sum, mismatch)


def verify_all(n_sites: int, max_d: int, cls: str = SYMMETRIC, min_d: int = 1) -> list:
    """Every configuration with min_d <= d <= max_d and every ordered pair k != l."""
    reports = []
    for d in range(min_d, max_d + 1):
        for eta in enumerate_configs(n_sites, d):
            for k, l in itertools.permutations(range(n_sites), 2):
                reports.append(verify_identity_symbolic(eta, k, l, cls))
    return reports
