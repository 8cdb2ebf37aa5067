"""Exact polynomials in the X-coordinates with Gaussian-rational coefficients.

Thin wrapper over ``sympy`` sparse polynomial rings over ``QQ_I``; all
operations are exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import sympy
from sympy import QQ_I
from sympy.polys.rings import ring

__all__ = ["PolyExpr", "poly_ring", "variables", "norm_squared", "theta_poly"]


@lru_cache(maxsize=None)
def poly_ring(k: int):
    """Ring ``QQ_I[x1..xk]`` and its generators."""
    names = ",".join(f"x{i + 1}" for i in range(k))
    R, *gens = ring(names, QQ_I)
    return R, tuple(gens)


def _coerce(R, c):
    if isinstance(c, complex):
        return R.domain.from_sympy(sympy.nsimplify(c.real) + sympy.I * sympy.nsimplify(c.imag))
    return R.domain.from_sympy(sympy.sympify(c))


@dataclass(frozen=True, eq=False)
class PolyExpr:
    """Polynomial in ``x_1..x_k`` with exact ``QQ(i)`` coefficients."""

    k: int
    poly: object

    @classmethod
    def from_dict(cls, k: int, terms: dict) -> "PolyExpr":
        """``terms`` maps exponent tuples to numbers (ints, Fractions, sympy)."""
        R, _ = poly_ring(k)
        p = R.zero
        for e, c in terms.items():
            if len(e) != k:
                raise ValueError("exponent tuple has the wrong length")
            p += R({tuple(int(x) for x in e): _coerce(R, c)})
        return cls(k, p)

    @classmethod
    def zero(cls, k: int) -> "PolyExpr":
        return cls(k, poly_ring(k)[0].zero)

    @classmethod
    def one(cls, k: int) -> "PolyExpr":
        return cls(k, poly_ring(k)[0].one)

    # arithmetic
    def _wrap(self, p) -> "PolyExpr":
        return PolyExpr(self.k, p)

    def _other(self, o):
        if isinstance(o, PolyExpr):
            if o.k != self.k:
                raise ValueError("dimension mismatch")
            return o.poly
        return _coerce(self.poly.ring, o)

    def __add__(self, o):
        return self._wrap(self.poly + self._other(o))

    __radd__ = __add__

    def __sub__(self, o):
        return self._wrap(self.poly - self._other(o))

    def __rsub__(self, o):
        return self._wrap(self._other(o) - self.poly)

    def __mul__(self, o):
        return self._wrap(self.poly * self._other(o))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.poly)

    def __pow__(self, n: int):
        return self._wrap(self.poly ** n)

    def __eq__(self, o):
        if isinstance(o, PolyExpr):
            return self.k == o.k and self.poly == o.poly
        return self.poly == self._other(o)

    def __hash__(self):
        return hash((self.k, self.canonical()))

    def diff(self, i: int) -> "PolyExpr":
        return self._wrap(self.poly.diff(poly_ring(self.k)[1][i]))

    def is_zero(self) -> bool:
        return not self.poly

    @property
    def degree(self) -> int:
        if not self.poly:
            return -1
        return max(sum(m) for m in self.poly.keys())

    def is_homogeneous(self) -> bool:
        return len({sum(m) for m in self.poly.keys()}) <= 1

    def terms(self):
        """``(exponents, sympy coefficient)`` in canonical (sorted) order."""
        dom = self.poly.ring.domain
        return [(m, dom.to_sympy(c)) for m, c in sorted(self.poly.items())]

    def canonical(self) -> str:
        """Deterministic text form ``coef*x^e + ...``, sorted by exponents."""
        parts = []
        for m, c in self.terms():
            mon = "*".join(f"x{i + 1}^{e}" if e > 1 else f"x{i + 1}" for i, e in enumerate(m) if e)
            parts.append(f"({c})" + (f"*{mon}" if mon else ""))
        return " + ".join(parts) if parts else "0"

    def __repr__(self):
        return f"PolyExpr(k={self.k}, {self.canonical()})"

    def evaluate(self, X) -> np.ndarray:
        """Floating-point values at rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(X.shape[0], dtype=complex)
        for m, c in self.terms():
            out += complex(c) * np.prod(X ** np.array(m), axis=1)
        return out


def variables(k: int) -> tuple:
    R, gens = poly_ring(k)
    return tuple(PolyExpr(k, g) for g in gens)


def norm_squared(k: int) -> PolyExpr:
    return sum((x * x for x in variables(k)), PolyExpr.zero(k))


def theta_poly(Q: Sequence[int], JQ: Sequence, conj: bool = False) -> PolyExpr:
    """``<Q, X> +- i <J Q, X>`` for exact (integer or rational) vectors."""
    k = len(Q)
    xs = variables(k)
    s = -1 if conj else 1
    p = PolyExpr.zero(k)
    for i in range(k):
        c = sympy.nsimplify(Q[i]) + s * sympy.I * sympy.nsimplify(JQ[i])
        if c != 0:
            p = p + xs[i] * c
    return p
