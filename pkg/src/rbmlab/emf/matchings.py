"""Perfect matchings of the particle vertex sets.

Symmetric class: site i carries 2 eta_i vertices (i, c), c = 0..2 eta_i - 1,
and all perfect matchings of the complete graph on them are used.
Hermitian class: site i carries eta_i black and eta_i white vertices
(i, c, "b") / (i, c, "w"), and only black-white edges are allowed.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .configs import Configuration
from .poly import canon, monomial

SYMMETRIC = "symmetric"
HERMITIAN = "hermitian"
MATCHING_CAP = 10 ** 6


def odd_double_factorial(m: int) -> int:
    """1 * 3 * ... * (2m - 1), the number of perfect matchings of 2m points."""
    out = 1
    for k in range(1, 2 * m, 2):
        out *= k
    return out


def normalizer(eta: Configuration, cls: str) -> int:
    out = 1
    for k in eta.occupation:
        out *= odd_double_factorial(k) if cls == SYMMETRIC else math.factorial(k)
    return out


def matching_count(eta: Configuration, cls: str) -> int:
    d = eta.total
    return odd_double_factorial(d) if cls == SYMMETRIC else math.factorial(d)


def vertex_set(eta: Configuration, cls: str) -> tuple:
    if cls == SYMMETRIC:
        return tuple((i, c) for i, k in enumerate(eta.occupation) for c in range(2 * k))
    return tuple((i, c, col) for col in ("b", "w") for i, k in enumerate(eta.occupation)
                 for c in range(k))


@dataclass(frozen=True)
class MatchingGraph:
    vertices: tuple
    edges: tuple  # sorted tuple of sorted vertex pairs
    cls: str = SYMMETRIC

    @staticmethod
    def build(vertices, edges, cls: str) -> "MatchingGraph":
        es = tuple(sorted(tuple(sorted(e)) for e in edges))
        return MatchingGraph(tuple(sorted(vertices)), es, cls)

    def is_perfect(self) -> bool:
        seen = [v for e in self.edges for v in e]
        if sorted(seen) != sorted(self.vertices) or len(set(seen)) != len(seen):
            return False
        if self.cls == HERMITIAN:
            return all(a[2] != b[2] for a, b in self.edges)
        return True

    def weight_variables(self) -> tuple:
        """Overlap variables p(e) of the edges; Hermitian edges read
        p_{black site, white site}."""
        out = []
        for a, b in self.edges:
            if self.cls == SYMMETRIC:
                out.append(canon(a[0], b[0], False))
            else:
                black, white = (a, b) if a[2] == "b" else (b, a)
                out.append((black[0], white[0]))
        return monomial(out)


def _symmetric_matchings(vertices):
    if not vertices:
        yield ()
        return
    first, rest = vertices[0], vertices[1:]
    for i, partner in enumerate(rest):
        remaining = rest[:i] + rest[i + 1:]
        for tail in _symmetric_matchings(remaining):
            yield ((first, partner),) + tail


def enumerate_matchings(eta: Configuration, cls: str = SYMMETRIC) -> list:
    if matching_count(eta, cls) > MATCHING_CAP:
        raise ValueError(f"{matching_count(eta, cls)} matchings exceed the cap {MATCHING_CAP}")
    return list(_matchings_cached(eta, cls))


@lru_cache(maxsize=4096)
def _matchings_cached(eta: Configuration, cls: str) -> tuple:
    verts = vertex_set(eta, cls)
    if cls == SYMMETRIC:
        return tuple(MatchingGraph.build(verts, m, cls) for m in _symmetric_matchings(list(verts)))
    blacks = [v for v in verts if v[2] == "b"]
    whites = [v for v in verts if v[2] == "w"]
    return tuple(MatchingGraph.build(verts, zip(blacks, perm), cls)
                 for perm in itertools.permutations(whites))


@lru_cache(maxsize=4096)
def matching_polynomial(eta: Configuration, cls: str = SYMMETRIC, normalized: bool = True) -> tuple:
    """g(eta) as a polynomial, returned as a tuple of (monomial, coeff) items
    (a tuple so that it can be cached).  Use ``dict(...)`` for algebra."""
    acc = defaultdict(int)
    for graph in enumerate_matchings(eta, cls):
        acc[graph.weight_variables()] += 1
    norm = normalizer(eta, cls) if normalized else 1
    return tuple(sorted((m, Fraction(c, norm)) for m, c in acc.items()))


def g_poly(eta: Configuration, cls: str = SYMMETRIC) -> dict:
    return dict(matching_polynomial(eta, cls))


# -- the moves S_vw ------------------------------------------------------------


def _relabel_graph(graph: MatchingGraph, mapping: dict, vertices) -> MatchingGraph:
    edges = [(mapping.get(a, a), mapping.get(b, b)) for a, b in graph.edges]
    return MatchingGraph.build(vertices, edges, graph.cls)


def jump_map(eta: Configuration, v, w, k: int, l: int, cls: str) -> dict:
    """Vertex map for moving the pair (v, w) from site k to site l.

    v and w become the new top copies at site l, the remaining copies at
    site k are renumbered in order (separately per color in the Hermitian
    class).  The map is a bijection V_eta -> V_{eta^{kl}}.
    """
    mapping = {}
    if cls == SYMMETRIC:
        top = 2 * eta[l]
        mapping[v] = (l, top)
        mapping[w] = (l, top + 1)
        for c in range(2 * eta[k]):
            old = (k, c)
            if old in (v, w):
                continue
            shift = (c > v[1]) + (c > w[1])
            mapping[old] = (k, c - shift)
        return mapping
    top = eta[l]
    for x in (v, w):
        mapping[x] = (l, top, x[2])
    for col, removed in ((v[2], v[1]), (w[2], w[1])):
        for c in range(eta[k]):
            old = (k, c, col)
            if old in (v, w):
                continue
            mapping[old] = (k, c - (c > removed), col)
    return mapping


def move_graph(graph: MatchingGraph, eta: Configuration, v, w, k: int, l: int):
    """Return (epsilon, S_vw G) for an ordered pair of distinct vertices at
    sites k, l.  epsilon = 0 pairs return (0, None)."""
    cls = graph.cls
    same_site = v[0] == w[0]
    if cls == SYMMETRIC:
        if same_site:
            src, dst = (k, l) if v[0] == k else (l, k)
            new_eta = eta.move(src, dst)  # one particle = two vertices
            mapping = jump_map(eta, v, w, src, dst, cls)
            return 1, _relabel_graph(graph, mapping, vertex_set(new_eta, cls))
        return -1, _relabel_graph(graph, {v: w, w: v}, graph.vertices)
    if same_site and v[2] != w[2]:
        src, dst = (k, l) if v[0] == k else (l, k)
        new_eta = eta.move(src, dst)
        mapping = jump_map(eta, v, w, src, dst, cls)
        return 1, _relabel_graph(graph, mapping, vertex_set(new_eta, cls))
    if not same_site and v[2] == w[2]:
        return -1, _relabel_graph(graph, {v: w, w: v}, graph.vertices)
    return 0, None

