"""Differential operators on the X- and Z-variables.

Two modes are provided and kept independent:

* symbolic: exact operators on :class:`PolyExpr` and integrand-level
  operators on :class:`TwistedFunction` term lists;
* finite differences: second-order centered stencils on point values of any
  vectorized callable ``f(X, Z)``.

Comparing the two is how the identities are checked.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Callable

import numpy as np
import sympy

from .algebra import EndomorphismSpace, j_of
from .funcspace import EigenSumFactor, GramFactor, LambdaSqFactor, Term, TwistedFunction
from .polyexpr import PolyExpr, norm_squared, variables

__all__ = [
    "apply_delta_X",
    "harmonic_projection",
    "projection_coefficients",
    "apply_D_V_symbolic",
    "theta_eigen_sign",
    "apply_D_V",
    "apply_M",
    "delta_X_fd",
    "delta_Z_fd",
    "radial_X_fd",
    "apply_full_laplacian",
    "integrand_delta_X",
    "integrand_radial_X",
    "integrand_delta_Z",
    "integrand_M",
    "integrand_quarter",
    "integrand_laplacian",
    "integrand_euler",
    "harmonic_twisted",
    "HermiteBasisSpec",
    "level_states",
    "box_matrix",
    "DEFAULT_STEP",
]

DEFAULT_STEP = 1e-3

# ---------------------------------------------------------------------------
# Exact polynomial operators


def apply_delta_X(p: PolyExpr) -> PolyExpr:
    """Exact Euclidean Laplacian in ``x_1..x_k``."""
    out = PolyExpr.zero(p.k)
    for i in range(p.k):
        out = out + p.diff(i).diff(i)
    return out


def harmonic_projection(p: PolyExpr) -> PolyExpr:
    """Harmonic part ``sum_j B_j |X|^{2j} Delta^j p`` of a homogeneous ``p``.

    The coefficients ``B_1..B_m`` (``B_0 = 1``) are found by requiring every
    coefficient of ``Delta(sum_j B_j |X|^{2j} Delta^j p)`` to vanish and
    solving the resulting linear system exactly.

    Raises
    ------
    ValueError
        If ``p`` is not homogeneous.
    """
    if not p.is_homogeneous():
        raise ValueError("harmonic projection needs a homogeneous polynomial")
    if p.is_zero():
        return p
    n = p.degree
    r2 = norm_squared(p.k)
    pieces = [p]
    lap = p
    rpow = PolyExpr.one(p.k)
    for _ in range(1, n // 2 + 1):
        lap = apply_delta_X(lap)
        rpow = rpow * r2
        if lap.is_zero():
            break
        pieces.append(rpow * lap)
    if len(pieces) == 1:
        return p
    images = [apply_delta_X(q) for q in pieces]
    monos = sorted({m for g in images for m in g.poly.keys()})
    dom = p.poly.ring.domain
    A = sympy.Matrix([[dom.to_sympy(g.poly.get(m, dom.zero)) for g in images[1:]] for m in monos])
    b = sympy.Matrix([-dom.to_sympy(images[0].poly.get(m, dom.zero)) for m in monos])
    sol, params = A.gauss_jordan_solve(b)
    if params.shape[0]:
        sol = sol.subs({s: 0 for s in params})
    out = pieces[0]
    for c, q in zip(sol, pieces[1:]):
        out = out + q * sympy.nsimplify(c)
    return out


def projection_coefficients(n: int, k: int) -> list:
    """``B_j`` for a generic homogeneous polynomial of degree ``n`` in ``k`` variables.

    Harmonicity of ``sum_j B_j r^{2j} Delta^j p`` gives, coefficient by
    coefficient of ``r^{2j} Delta^{j+1} p``, the bidiagonal system
    ``B_j + d_{j+1} B_{j+1} = 0`` with ``d_j = 2j(k - 2 + 2n - 2j)``.  It is
    solved here by forward substitution in exact fractions.
    """
    B = [Fraction(1)]
    for j in range(1, n // 2 + 1):
        d = 2 * j * (k - 2 + 2 * n - 2 * j)
        if d == 0:
            break
        B.append(-B[-1] / d)
    return B


def apply_D_V_symbolic(p: PolyExpr, J: np.ndarray) -> PolyExpr:
    """``<grad p, J X>`` for an exact (integer or rational) matrix ``J``."""
    xs = variables(p.k)
    out = PolyExpr.zero(p.k)
    J = np.asarray(J)
    for i in range(p.k):
        row = PolyExpr.zero(p.k)
        for j in range(p.k):
            if J[i, j] != 0:
                row = row + xs[j] * sympy.nsimplify(J[i, j])
        if not row.is_zero():
            out = out + p.diff(i) * row
    return out


def theta_eigen_sign(space: EndomorphismSpace, Q, V) -> int:
    """Sign ``s`` with ``D_V Theta_Q = s i (q - p)|V| Theta_Q`` at ``p=1, q=0``.

    ``V`` must have a rational norm; ``J_V`` is built from the integer
    generators so the computation is exact.
    """
    from .polyexpr import theta_poly

    V = [sympy.nsimplify(v) for v in V]
    nv = sympy.sqrt(sum(v * v for v in V))
    if not nv.is_rational:
        raise ValueError("|V| must be rational for an exact sign test")
    g = np.asarray(space.generators)
    J = sum((V[a] * sympy.Matrix(g[a].tolist()) for a in range(space.l)), sympy.zeros(space.k))
    Ju = J / nv
    Q = [sympy.nsimplify(q) for q in Q]
    JQ = list(Ju * sympy.Matrix(Q))
    th = theta_poly(Q, JQ)
    d = apply_D_V_symbolic(th, np.array(J.tolist(), dtype=object))
    # d = c * theta; read c off any nonzero coefficient
    m, c0 = th.terms()[0]
    c = sympy.nsimplify(d.poly.ring.domain.to_sympy(d.poly.get(m, d.poly.ring.domain.zero)) / c0)
    if d != th * c:
        raise ValueError("Theta_Q is not an eigenfunction of D_V")
    s = sympy.simplify(c / (-sympy.I * nv))
    if s not in (1, -1):
        raise ValueError(f"unexpected eigenvalue {c}")
    return int(s)


# ---------------------------------------------------------------------------
# Finite differences on point values


def _call(f: Callable, X, Z):
    return np.asarray(f(X, Z))


def apply_D_V(f: Callable, space: EndomorphismSpace, V, X, Z, h: float = DEFAULT_STEP):
    """Centered difference of ``f`` along the vector field ``X -> J_V X``."""
    V = np.asarray(V, dtype=float)
    if not np.any(V):
        raise ValueError("V must be nonzero")
    X = np.atleast_2d(X)
    Z = np.atleast_2d(Z)
    d = X @ j_of(space, V).T
    vals = _call(f, np.concatenate([X + h * d, X - h * d]), np.concatenate([Z, Z]))
    P = X.shape[0]
    return (vals[:P] - vals[P:]) / (2 * h)


class _Stencil:
    """Collects stencil points and evaluates ``f`` once on all of them."""

    def __init__(self, X, Z):
        self.X0 = np.atleast_2d(np.asarray(X, float))
        self.Z0 = np.atleast_2d(np.asarray(Z, float))
        self.P = self.X0.shape[0]
        self.blocks_X = []
        self.blocks_Z = []

    def add(self, dX=None, dZ=None) -> int:
        self.blocks_X.append(self.X0 if dX is None else self.X0 + dX)
        self.blocks_Z.append(self.Z0 if dZ is None else self.Z0 + dZ)
        return len(self.blocks_X) - 1

    def run(self, f):
        vals = _call(f, np.concatenate(self.blocks_X), np.concatenate(self.blocks_Z))
        self.vals = vals.reshape(len(self.blocks_X), self.P)
        return self

    def __getitem__(self, i):
        return self.vals[i]


def _add_delta_X(st: _Stencil, k: int, h: float):
    idx = []
    for i in range(k):
        e = np.zeros(k)
        e[i] = h
        idx.append((st.add(dX=e), st.add(dX=-e)))
    return idx


def _add_hessian_Z(st: _Stencil, l: int, h: float):
    diag, off = [], {}
    for a in range(l):
        e = np.zeros(l)
        e[a] = h
        diag.append((st.add(dZ=e), st.add(dZ=-e)))
    for a in range(l):
        for b in range(a + 1, l):
            ea = np.zeros(l)
            eb = np.zeros(l)
            ea[a] = h
            eb[b] = h
            off[(a, b)] = tuple(st.add(dZ=sa * ea + sb * eb) for sa, sb in
                                ((1, 1), (1, -1), (-1, 1), (-1, -1)))
    return diag, off


def _add_M(st: _Stencil, space: EndomorphismSpace, h: float):
    out = []
    for a in range(space.l):
        d = st.X0 @ np.asarray(space.generators[a], float).T
        e = np.zeros(space.l)
        e[a] = h
        out.append(tuple(st.add(dX=sx * h * d, dZ=sz * e) for sx, sz in
                         ((1, 1), (-1, 1), (1, -1), (-1, -1))))
    return out


def _eval_delta_X(st, idx, c, h):
    return sum(st[p] + st[m] - 2 * st[c] for p, m in idx) / h ** 2


def _eval_hessian(st, diag, off, c, h, l):
    H = np.zeros((st.P, l, l), dtype=complex)
    for a, (p, m) in enumerate(diag):
        H[:, a, a] = (st[p] + st[m] - 2 * st[c]) / h ** 2
    for (a, b), (pp, pm, mp, mm) in off.items():
        H[:, a, b] = H[:, b, a] = (st[pp] - st[pm] - st[mp] + st[mm]) / (4 * h ** 2)
    return H


def _eval_M(st, idx, h):
    return sum(st[pp] - st[mp] - st[pm] + st[mm] for pp, mp, pm, mm in idx) / (4 * h ** 2)


def delta_X_fd(f: Callable, X, Z, h: float = DEFAULT_STEP):
    st = _Stencil(X, Z)
    c = st.add()
    idx = _add_delta_X(st, st.X0.shape[1], h)
    st.run(f)
    return _eval_delta_X(st, idx, c, h)


def delta_Z_fd(f: Callable, X, Z, h: float = DEFAULT_STEP):
    st = _Stencil(X, Z)
    c = st.add()
    l = st.Z0.shape[1]
    idx = []
    for a in range(l):
        e = np.zeros(l)
        e[a] = h
        idx.append((st.add(dZ=e), st.add(dZ=-e)))
    st.run(f)
    return sum(st[p] + st[m] - 2 * st[c] for p, m in idx) / h ** 2


def radial_X_fd(f: Callable, X, Z, h: float = DEFAULT_STEP):
    """``d^2/dr^2 + (k-1)/r d/dr`` in ``r = |X|`` at fixed direction."""
    X = np.atleast_2d(np.asarray(X, float))
    k = X.shape[1]
    r = np.linalg.norm(X, axis=1)
    u = X / r[:, None]
    st = _Stencil(X, Z)
    c = st.add()
    p = st.add(dX=h * u)
    m = st.add(dX=-h * u)
    st.run(f)
    d2 = (st[p] + st[m] - 2 * st[c]) / h ** 2
    d1 = (st[p] - st[m]) / (2 * h)
    return d2 + (k - 1) / r * d1


def apply_M(f: Callable, space: EndomorphismSpace, X, Z, h: float = DEFAULT_STEP):
    """``M f = sum_a d/dZ_a D_a f`` by nested centered differences."""
    st = _Stencil(X, Z)
    idx = _add_M(st, space, h)
    st.run(f)
    return _eval_M(st, idx, h)


def apply_full_laplacian(space: EndomorphismSpace, f: Callable, X, Z, h: float = DEFAULT_STEP,
                         parts: bool = False):
    """Laplacian of the left-invariant metric by centered differences.

    ``Delta = Delta_X + Delta_Z + 1/4 sum_ab <J_a X, J_b X> d_a d_b + M``.
    For H-type spaces the middle terms reduce to ``(1 + |X|^2/4) Delta_Z``.

    Parameters
    ----------
    space : EndomorphismSpace
    f : callable
        Vectorized ``f(X, Z)`` with ``X`` of shape (P, k) and ``Z`` (P, l).
    X, Z : array_like
        Sample points.
    h : float
        Stencil step; truncation error is ``O(h^2)``.
    parts : bool
        Also return the three pieces ``(Delta_X, Z-part, M)``.
    """
    st = _Stencil(X, Z)
    c = st.add()
    ix = _add_delta_X(st, space.k, h)
    diag, off = _add_hessian_Z(st, space.l, h)
    im = _add_M(st, space, h)
    st.run(f)
    dx = _eval_delta_X(st, ix, c, h)
    H = _eval_hessian(st, diag, off, c, h, space.l)
    JX = np.einsum("aij,pj->pai", np.asarray(space.generators, float), st.X0)
    G = np.einsum("pai,pbi->pab", JX, JX)
    dz = np.einsum("paa->p", H) + 0.25 * np.einsum("pab,pab->p", G, H)
    m = _eval_M(st, im, h)
    tot = dx + dz + m
    return (tot, (dx, dz, m)) if parts else tot


# ---------------------------------------------------------------------------
# Integrand-level operators on twisted functions
#
# Under the integral sign, for a term e^{i<Z,V>} h(X, V):
#   Delta_X   acts on h,
#   Delta_Z   multiplies by -|V|^2,
#   quarter   multiplies by -|J_V X|^2 / 4,
#   M         acts as i D_V on h.
# Linear forms are eigenforms of D_V and Delta_X of a product of linear forms
# is a sum over pairs of their bilinear products.


def _term_delta_X(t: Term, k: int):
    out = []
    forms = Counter(t.forms)
    kinds = sorted(forms)
    for i, fi in enumerate(kinds):
        for fj in kinds[i:]:
            if fi == fj:
                if forms[fi] < 2:
                    continue
                mult = forms[fi] * (forms[fi] - 1)
            else:
                mult = 2 * forms[fi] * forms[fj]
            rest = Counter(forms)
            rest[fi] -= 1
            rest[fj] -= 1
            out.append(replace(t, coef=t.coef * mult, forms=tuple(rest.elements()),
                               factors=t.factors + (GramFactor(fi, fj),)))
    n = len(t.forms)
    j = t.radial
    c = 2 * j * n + j * (j + k - 2)
    if c:
        out.append(replace(t, coef=t.coef * c, radial=j - 2))
    return out


def integrand_delta_X(f: TwistedFunction) -> TwistedFunction:
    """Exact ``Delta_X`` under the integral sign."""
    k = f.space.k
    return f.with_terms([s for t in f.terms for s in _term_delta_X(t, k)], label=f"DX[{f.label}]")


def integrand_radial_X(f: TwistedFunction) -> TwistedFunction:
    """``d^2/dr^2 + (k-1)/r d/dr`` with ``r = |X|``.

    For ``|X|^j P`` with ``P`` homogeneous of degree ``n`` the result is
    ``(j+n)(j+n+k-2) |X|^{j-2} P``.
    """
    k = f.space.k
    out = []
    for t in f.terms:
        d = t.radial + len(t.forms)
        c = d * (d + k - 2)
        if c:
            out.append(replace(t, coef=t.coef * c, radial=t.radial - 2))
    return f.with_terms(out, label=f"DR[{f.label}]")


def integrand_delta_Z(f: TwistedFunction) -> TwistedFunction:
    """``Delta_Z F(phi) = F(-|V|^2 phi)``."""
    return f.with_terms([replace(t, coef=-t.coef, vprof=t.vprof.times_norm(2)) for t in f.terms],
                        label=f"DZ[{f.label}]")


def integrand_M(f: TwistedFunction) -> TwistedFunction:
    """``M`` as ``i D_V`` on the integrand.

    Each form ``u`` satisfies ``D_V u = c(V) u``; the eigenvalues are
    evaluated numerically through the factor space and checked to be
    eigenvalues (an error is raised otherwise).
    """
    out = []
    for t in f.terms:
        if not t.forms:
            continue
        out.append(replace(t, coef=1j * t.coef, factors=t.factors + (EigenSumFactor(t.forms),)))
    return f.with_terms(out, label=f"M[{f.label}]")


def integrand_quarter(f: TwistedFunction) -> TwistedFunction:
    """``1/4 sum_ab <J_a X, J_b X> d_a d_b`` as ``-|J_V X|^2 / 4``.

    H-type factor space: ``|J_V X|^2 = |V|^2 |X|^2``.  Otherwise the basis
    must be a changing orthonormal eigenbasis and
    ``|J_V X|^2 = sum_j |J_V Q_j|^2 z_j zbar_j``.
    """
    out = []
    if f.factor_space.h_type:
        for t in f.terms:
            out.append(replace(t, coef=-0.25 * t.coef, radial=t.radial + 2,
                               vprof=t.vprof.times_norm(2)))
    else:
        if f.basis.mode != "changing" or 2 * f.basis.n_slots != f.space.k:
            raise ValueError("non H-type spaces need a full changing basis for |J_V X|^2")
        for t in f.terms:
            for j in range(f.basis.n_slots):
                out.append(replace(t, coef=-0.25 * t.coef,
                                   forms=t.forms + ((j, "z"), (j, "zbar")),
                                   factors=t.factors + (LambdaSqFactor(j),)))
    return f.with_terms(out, label=f"Q[{f.label}]")


def integrand_laplacian(f: TwistedFunction) -> TwistedFunction:
    """Full Laplacian of a twisted function, term by term."""
    g = integrand_delta_X(f) + integrand_delta_Z(f) + integrand_quarter(f) + integrand_M(f)
    return g.with_terms(g.terms, label=f"L[{f.label}]")


def integrand_euler(f: TwistedFunction) -> TwistedFunction:
    """Replace each profile ``phi`` by ``|V| d phi / d|V|``."""
    return f.with_terms([replace(t, vprof=t.vprof.euler()) for t in f.terms], label=f"E[{f.label}]")


def harmonic_twisted(f: TwistedFunction) -> TwistedFunction:
    """Harmonic projection of the X-polynomial of each term, under the integral.

    Terms must carry no radial power; each is replaced by
    ``sum_j B_j |X|^{2j} Delta_X^j`` of itself.
    """
    k = f.space.k
    out = []
    for t in f.terms:
        if t.radial:
            raise ValueError("harmonic projection needs terms without radial factors")
        n = len(t.forms)
        B = projection_coefficients(n, k)
        cur = [t]
        out.append(t)
        for j in range(1, len(B)):
            nxt = []
            for s in cur:
                nxt.extend(u for u in _term_delta_X(s, k) if u.radial == s.radial)
            cur = nxt
            out.extend(replace(u, coef=u.coef * float(B[j]), radial=2 * j) for u in cur)
    return f.with_terms(out, label=f"H[{f.label}]")


# ---------------------------------------------------------------------------
# Zeeman operator in a Hermite basis


@dataclass(frozen=True)
class HermiteBasisSpec:
    """Scaled Hermite functions ``prod_i h_{n_i}(sqrt(omega) x_i)`` up to level ``N``.

    ``omega = pi |gamma|`` absorbs the potential ``-pi^2 |gamma|^2 |X|^2``.
    """

    omega: float
    N: int
    k: int

    @classmethod
    def for_gamma(cls, gamma, N: int, k: int) -> "HermiteBasisSpec":
        return cls(float(np.pi * np.linalg.norm(gamma)), int(N), int(k))


def level_states(k: int, N: int) -> list:
    """Multi-indices with ``|n| = N`` in lexicographic (descending) order."""
    out = []
    for combo in combinations_with_replacement(range(k), N):
        n = [0] * k
        for i in combo:
            n[i] += 1
        out.append(tuple(n))
    return out


def _level_D(J: np.ndarray, k: int, N: int) -> np.ndarray:
    """Matrix of ``D_gamma = sum_ij J_ij a_j^+ a_i`` on level ``N``."""
    states = level_states(k, N)
    index = {s: i for i, s in enumerate(states)}
    D = np.zeros((len(states), len(states)))
    nz = [(i, j, J[i, j]) for i in range(k) for j in range(k) if i != j and J[i, j] != 0]
    for col, n in enumerate(states):
        for i, j, c in nz:
            if n[i] == 0:
                continue
            m = list(n)
            m[i] -= 1
            m[j] += 1
            D[index[tuple(m)], col] += c * np.sqrt(n[i] * (n[j] + 1))
    return D


def _coupling_matrix(A: np.ndarray, k: int, N: int) -> np.ndarray:
    """Galerkin matrix of ``sum_ij A_ij (a_i + a_i^+)(a_j + a_j^+)`` on levels ``<= N``."""
    states = [s for n in range(N + 1) for s in level_states(k, n)]
    index = {s: i for i, s in enumerate(states)}
    M = np.zeros((len(states), len(states)))

    def ladder(vec: dict, i: int) -> dict:
        out: dict = {}
        for n, c in vec.items():
            if n[i] > 0:
                m = list(n)
                m[i] -= 1
                m = tuple(m)
                out[m] = out.get(m, 0.0) + c * np.sqrt(n[i])
            m = list(n)
            m[i] += 1
            m = tuple(m)
            out[m] = out.get(m, 0.0) + c * np.sqrt(n[i] + 1)
        return out

    pairs = [(i, j, A[i, j]) for i in range(k) for j in range(k) if A[i, j] != 0]
    for col, n in enumerate(states):
        for i, j, c in pairs:
            for m, v in ladder(ladder({n: 1.0}, j), i).items():
                row = index.get(m)
                if row is not None:
                    M[row, col] += c * v
    return M


def box_matrix(space: EndomorphismSpace, gamma, spec: HermiteBasisSpec) -> list:
    """Blocks of ``Delta_X + 2 pi i D_gamma - 4 pi^2 |gamma|^2 - pi^2 |J_gamma X|^2``.

    In the ladder operators of the oscillator with frequency
    ``omega = pi |gamma|``, ``x_j d_i = (a_j + a_j^+)(a_i - a_i^+)/2`` and the
    antisymmetry of ``J_gamma`` leaves ``D_gamma = sum_ij J_ij a_j^+ a_i``,
    which preserves the level ``|n|``.  For H-type spaces
    ``|J_gamma X|^2 = |gamma|^2 |X|^2`` and level ``N`` gives the block
    ``-(omega (2N + k) + 4 pi^2 |gamma|^2) I + 2 pi i D_N``.

    Otherwise the remainder ``pi^2 X^T (|gamma|^2 I + J_gamma^2) X`` couples
    levels ``N`` and ``N +- 2``; the Galerkin matrix over levels ``<= N`` is
    returned as one block per level parity.  The truncated space is invariant under ``O(k)``,
    so orthogonally conjugate pairs keep identical truncated spectra.

    Returns
    -------
    list of ndarray
        Hermitian blocks.
    """
    gamma = np.asarray(gamma, dtype=float)
    if not np.any(gamma):
        raise ValueError("gamma must be nonzero")
    if spec.k != space.k:
        raise ValueError("Hermite spec dimension differs from the space")
    J = j_of(space, gamma)
    g2 = float(gamma @ gamma)
    omega = spec.omega
    blocks = []
    for N in range(spec.N + 1):
        D = _level_D(J, space.k, N)
        diag = -(omega * (2 * N + space.k) + 4 * np.pi ** 2 * g2)
        blocks.append(diag * np.eye(D.shape[0]) + 2j * np.pi * D)
    A = g2 * np.eye(space.k) + J @ J
    if space.h_type or np.max(np.abs(A)) < 1e-14 * max(g2, 1.0):
        return blocks
    full = np.zeros((sum(b.shape[0] for b in blocks),) * 2, dtype=complex)
    o = 0
    for b in blocks:
        full[o:o + b.shape[0], o:o + b.shape[0]] = b
        o += b.shape[0]
    # x_i x_j = (a_i + a_i^+)(a_j + a_j^+) / (2 omega)
    full += np.pi ** 2 / (2 * omega) * _coupling_matrix(A, space.k, spec.N)
    # the coupling moves the level by 0 or 2, so even and odd levels separate
    parity = np.concatenate([np.full(b.shape[0], N % 2) for N, b in enumerate(blocks)])
    return [full[np.ix_(parity == r, parity == r)] for r in (0, 1) if np.any(parity == r)]
