"""Exact polynomials in overlap variables.

A polynomial is a dict mapping a monomial to its coefficient.  A monomial is
a sorted tuple of variables with repetition; a variable is a pair of sites.
Symmetric-class variables are sorted pairs (p_ab = p_ba); Hermitian-class
variables are ordered pairs.
"""
from collections import Counter, defaultdict
from fractions import Fraction


def canon(a: int, b: int, ordered: bool):
    return (a, b) if ordered or a <= b else (b, a)


def monomial(variables) -> tuple:
    return tuple(sorted(variables))


def add_into(dst: dict, src: dict, scale=1) -> dict:
    for m, c in src.items():
        v = dst.get(m, 0) + scale * c
        if v:
            dst[m] = v
        else:
            dst.pop(m, None)
    return dst


def scaled(p: dict, scale) -> dict:
    return {m: scale * c for m, c in p.items() if scale * c}


def clean(p: dict) -> dict:
    return {m: c for m, c in p.items() if c}


def apply_derivation(p: dict, rule) -> dict:
    """Extend ``rule`` (variable -> list of (coeff, variable)) to polynomials
    by linearity and the Leibniz rule."""
    out = defaultdict(int)
    for mono, coeff in p.items():
        counts = Counter(mono)
        for var, mult in counts.items():
            rest = list(mono)
            rest.remove(var)
            for c, new in rule(var):
                out[monomial(rest + [new])] += coeff * mult * c
    return clean(out)


def symmetric_rotation(k: int, l: int):
    """Derivation X_kl on symmetric overlaps p_ab.

    The rotation generator sends u_l to u_k and u_k to -u_l, so
    X p_ab = [a=l] p_kb - [a=k] p_lb + [b=l] p_ak - [b=k] p_al.
    Centering constants on the diagonal cancel in every case.
    """
    def rule(var):
        a, b = var
        terms = defaultdict(int)
        if a == l:
            terms[canon(k, b, False)] += 1
        if a == k:
            terms[canon(l, b, False)] -= 1
        if b == l:
            terms[canon(a, k, False)] += 1
        if b == k:
            terms[canon(a, l, False)] -= 1
        return [(c, v) for v, c in terms.items() if c]
    return rule


def hermitian_rotation(k: int, l: int, conjugate: bool = False):
    """Derivations X_kl and its conjugate on Hermitian overlaps
    p_ab = sum_alpha u_a(alpha) conj(u_b(alpha)):
        X p_ab    = [a=l] p_kb - [b=k] p_al
        Xbar p_ab = [b=l] p_ak - [a=k] p_lb
    """
    def rule(var):
        a, b = var
        terms = defaultdict(int)
        if not conjugate:
            if a == l:
                terms[(k, b)] += 1
            if b == k:
                terms[(a, l)] -= 1
        else:
            if b == l:
                terms[(a, k)] += 1
            if a == k:
                terms[(l, b)] -= 1
        return [(c, v) for v, c in terms.items() if c]
    return rule


def second_order(p: dict, k: int, l: int, hermitian: bool, doubled: bool = False) -> dict:
    """X^2 p (symmetric) or (X Xbar + Xbar X)/2 p (Hermitian).

    With ``doubled`` the Hermitian result is multiplied by 2 so that all
    coefficients stay integral.
    """
    if not hermitian:
        x = symmetric_rotation(k, l)
        return apply_derivation(apply_derivation(p, x), x)
    x, xb = hermitian_rotation(k, l), hermitian_rotation(k, l, True)
    both = add_into(apply_derivation(apply_derivation(p, xb), x),
                    apply_derivation(apply_derivation(p, x), xb))
    return both if doubled else scaled(both, Fraction(1, 2))


def evaluate(p: dict, overlaps):
    """Evaluate on an overlap array of shape (..., n, n)."""
    import numpy as np

    total = 0
    for mono, coeff in p.items():
        term = float(coeff) if not isinstance(coeff, complex) else coeff
        for a, b in mono:
            term = term * overlaps[..., a, b]
        total = total + term
    if isinstance(total, int):
        return np.zeros(overlaps.shape[:-2])
    return total


def to_string(p: dict) -> str:
    if not p:
        return "0"
    parts = []
    for mono in sorted(p):
        c = p[mono]
        factors = Counter(mono)
        body = "*".join(f"p[{a},{b}]" + (f"^{e}" if e > 1 else "") for (a, b), e in sorted(factors.items()))
        parts.append(f"{c}" + (f"*{body}" if body else ""))
    return " + ".join(parts).replace("+ -", "- ")
