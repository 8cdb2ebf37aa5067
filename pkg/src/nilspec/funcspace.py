"""Pole bases, Theta monomials, profiles and twisted Z-Fourier functions.

A twisted function is

    F(X, Z) = int_{R^l} e^{i<Z,V>} sum_t c_t(V) |X|^{j_t} prod_m u_{t,m}(X, V_u) dV

where each ``u`` is a linear form in ``X`` read off a pole vector ``Q``
through the complex structure at ``V_u``:

    z    = <Q + i J~ Q, X>      zbar = <Q - i J~ Q, X>
    re   = <Q, X>               im   = <J~ Q, X>

The forms are evaluated through the *bound* space; the scalar factors
``c_t(V)`` (profile values and geometric coefficients produced by the
symbolic operators) are evaluated through the *factor* space.  Re-binding
the same term list to a deformed space is the intertwining map.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from math import comb
from typing import Optional, Sequence

import numpy as np

from .algebra import EndomorphismSpace, j_of, normalized_endomorphisms
from .quadrature import QuadSpec, ball_rule, get_preset, sphere_rule

__all__ = [
    "SingularDirection",
    "theta",
    "PoleBasis",
    "constant_basis",
    "changing_basis",
    "coordinates",
    "VProfile",
    "GeneratorProfile",
    "standard_profile",
    "Term",
    "TwistedFunction",
    "GramFactor",
    "EigenSumFactor",
    "LambdaSqFactor",
    "make_plain",
    "make_one_pole",
    "make_two_pole",
    "eval_twisted",
    "eval_sphere_fourier",
    "sphere_fourier",
    "basis_rank",
    "merge_terms",
    "polar_pole_coordinates",
    "expansion_coefficient",
    "FORM_KINDS",
]

FORM_KINDS = ("z", "zbar", "re", "im")


class SingularDirection(ValueError):
    """Raised when a pole basis degenerates at the requested direction."""


def theta(space: EndomorphismSpace, Q, X, V_u) -> complex:
    """``Theta_Q(X, V_u) = <Q + i J~_{V_u} Q, X>``.

    Parameters
    ----------
    space : EndomorphismSpace
    Q, X : array_like, shape (k,)
    V_u : array_like, shape (l,)
        Unit vector; for non H-type spaces the normalized endomorphism is used.

    Returns
    -------
    complex
    """
    V_u = np.asarray(V_u, dtype=float)
    if abs(np.linalg.norm(V_u) - 1.0) > 1e-12:
        raise ValueError("V_u must be a unit vector")
    Jt = normalized_endomorphisms(space, V_u[None])[0]
    Q = np.asarray(Q, dtype=float)
    X = np.asarray(X, dtype=float)
    return complex(Q @ X + 1j * (Jt @ Q) @ X)


# ---------------------------------------------------------------------------
# Pole bases


@dataclass(frozen=True)
class PoleBasis:
    """Slot vectors for the linear forms of a twisted function.

    ``mode == "constant"``: ``vectors`` holds fixed X-vectors, one per slot.
    ``mode == "changing"``: per direction ``V_u`` the slots are an orthonormal
    complex basis of eigenvectors of ``J_{V_u}^2`` built from ``source``.
    ``b_slots`` flags slots lying in ``v^(b)``.
    """

    mode: str
    vectors: Optional[np.ndarray] = None
    source: Optional[EndomorphismSpace] = None
    blocks: tuple = ()
    b_slots: tuple = ()
    V0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mode not in ("constant", "changing"):
            raise ValueError("mode must be 'constant' or 'changing'")
        if self.mode == "constant":
            v = np.atleast_2d(np.asarray(self.vectors, dtype=float)).copy()
            v.setflags(write=False)
            object.__setattr__(self, "vectors", v)
            if not self.b_slots:
                object.__setattr__(self, "b_slots", (False,) * len(v))
        elif self.source is None:
            raise ValueError("changing basis needs a source space")

    @property
    def n_slots(self) -> int:
        if self.mode == "constant":
            return self.vectors.shape[0]
        return sum(n for _, n in self.blocks) // 2

    def slot_vectors(self, V_u: np.ndarray) -> np.ndarray:
        """Slot vectors at each direction, shape ``(N, n_slots, k)``."""
        V_u = np.atleast_2d(V_u)
        if self.mode == "constant":
            return np.broadcast_to(self.vectors, (V_u.shape[0],) + self.vectors.shape)
        return _changing_vectors(self.source, self.blocks, V_u)


def _block_layout(space: EndomorphismSpace):
    if space.has_partition():
        blocks = []
        if space.k_a:
            blocks.append((0, space.k_a))
        if space.k_b:
            blocks.append((space.k_a, space.k_b))
        return tuple(blocks)
    return ((0, space.k),)


def _changing_vectors(space: EndomorphismSpace, blocks, V_u: np.ndarray) -> np.ndarray:
    """Per-direction complex Gram-Schmidt over eigenvectors of ``-J_{V_u}^2``.

    Within each block the eigenvectors are visited in ascending eigenvalue
    order; a candidate is kept when its residual against the span of the
    accepted ``{q, J~ q}`` exceeds 0.5, and signs are fixed so the
    largest-magnitude entry is positive.
    """
    N = V_u.shape[0]
    k = space.k
    J = j_of(space, V_u)
    Jt = normalized_endomorphisms(space, V_u)
    out = []
    for start, size in blocks:
        sl = slice(start, start + size)
        Jb = J[:, sl, sl]
        Jtb = Jt[:, sl, sl]
        _, U = np.linalg.eigh(-Jb @ Jb)
        m = size // 2
        Q = np.zeros((N, m, size))
        JQ = np.zeros((N, m, size))
        count = np.zeros(N, dtype=int)
        for c in range(size):
            v = U[:, :, c]
            res = v - np.einsum("nj,nji->ni", np.einsum("nji,ni->nj", Q, v), Q) \
                - np.einsum("nj,nji->ni", np.einsum("nji,ni->nj", JQ, v), JQ)
            nrm = np.linalg.norm(res, axis=1)
            take = (nrm > 0.5) & (count < m)
            if not np.any(take):
                continue
            q = res[take] / nrm[take, None]
            idx = np.argmax(np.abs(q), axis=1)
            q *= np.sign(q[np.arange(len(q)), idx])[:, None]
            rows = np.nonzero(take)[0]
            Q[rows, count[take]] = q
            JQ[rows, count[take]] = np.einsum("nij,nj->ni", Jtb[take], q)
            count[take] += 1
        if np.any(count < m):
            raise SingularDirection("changing basis could not be completed at some direction")
        full = np.zeros((N, m, k))
        full[:, :, sl] = Q
        out.append(full)
    return np.concatenate(out, axis=1)


def constant_basis(space: EndomorphismSpace, V0=None) -> PoleBasis:
    """Greedy orthonormal complex basis for ``J~_{V0}`` from standard vectors.

    The scan runs block by block over ``v^(a)`` then ``v^(b)`` so that each
    slot lies in one component.  ``V0`` defaults to ``e_1``.
    """
    V0 = np.eye(space.l)[0] if V0 is None else np.asarray(V0, dtype=float)
    V0 = V0 / np.linalg.norm(V0)
    Jt = normalized_endomorphisms(space, V0[None])[0]
    vecs, bflags = [], []
    for start, size in _block_layout(space):
        acc, acc_j = [], []
        for i in range(start, start + size):
            v = np.zeros(space.k)
            v[i] = 1.0
            for q, jq in zip(acc, acc_j):
                v = v - (q @ v) * q - (jq @ v) * jq
            n = np.linalg.norm(v)
            if n > 0.5:
                q = v / n
                acc.append(q)
                acc_j.append(Jt @ q)
        if len(acc) != size // 2:
            raise SingularDirection("reference direction is singular for this space")
        vecs.extend(acc)
        is_b = space.has_partition() and start >= space.k_a
        bflags.extend([is_b] * len(acc))
    return PoleBasis("constant", vectors=np.array(vecs), b_slots=tuple(bflags), V0=V0)


def changing_basis(space: EndomorphismSpace) -> PoleBasis:
    """Changing orthonormal basis rule built from ``space``."""
    blocks = _block_layout(space)
    bflags = []
    for start, size in blocks:
        is_b = space.has_partition() and start >= space.k_a
        bflags.extend([is_b] * (size // 2))
    return PoleBasis("changing", source=space, blocks=blocks, b_slots=tuple(bflags))


def basis_rank(space: EndomorphismSpace, basis: PoleBasis, V_u) -> int:
    """Real rank of ``[Q_i, J~ Q_i]`` at ``V_u``."""
    V_u = np.atleast_2d(np.asarray(V_u, float))
    Q = basis.slot_vectors(V_u)[0]
    Jt = normalized_endomorphisms(space, V_u)[0]
    M = np.concatenate([Q, Q @ Jt.T], axis=0)
    return int(np.linalg.matrix_rank(M, tol=1e-8))


def coordinates(space: EndomorphismSpace, basis: PoleBasis, X, V_u) -> np.ndarray:
    """Basis coordinates ``z_i = Theta_{Q_i}(X, V_u)``.

    Raises
    ------
    SingularDirection
        If ``{Q_i, J~ Q_i}`` does not span at ``V_u``.
    """
    V_u = np.asarray(V_u, dtype=float)
    if abs(np.linalg.norm(V_u) - 1.0) > 1e-12:
        raise ValueError("V_u must be a unit vector")
    if 2 * basis.n_slots == space.k and basis_rank(space, basis, V_u) < space.k:
        raise SingularDirection("pole basis is degenerate at this direction")
    Q = basis.slot_vectors(V_u[None])[0]
    Jt = normalized_endomorphisms(space, V_u[None])[0]
    X = np.asarray(X, dtype=float)
    return Q @ X + 1j * (Q @ Jt.T) @ X


# ---------------------------------------------------------------------------
# Profiles


@dataclass(frozen=True)
class VProfile:
    """``sum_m c_m V^{e_m} |V|^{p_m} exp(-|V|^2 / (2 s))``.

    ``monomials`` is a tuple of ``(coef, exponents, norm_power)``; an empty
    exponent tuple means the constant polynomial.
    """

    width: float = 1.0
    monomials: tuple = ((1.0, (), 0),)

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("Gaussian width must be positive")
        merged: dict = {}
        for c, e, p in self.monomials:
            e = tuple(int(x) for x in e)
            while e and e[-1] == 0:
                e = e[:-1]
            key = (e, int(p))
            merged[key] = merged.get(key, 0) + complex(c)
        mons = tuple(sorted(((c, e, p) for (e, p), c in merged.items() if c != 0),
                            key=lambda t: (t[1], t[2])))
        object.__setattr__(self, "monomials", mons)

    def __call__(self, V: np.ndarray) -> np.ndarray:
        V = np.atleast_2d(V)
        rho2 = np.sum(V * V, axis=1)
        rho = np.sqrt(rho2)
        out = np.zeros(V.shape[0], dtype=complex)
        for c, e, p in self.monomials:
            term = np.full(V.shape[0], c, dtype=complex)
            for a, ea in enumerate(e):
                if ea:
                    term *= V[:, a] ** ea
            if p:
                term *= rho ** p
            out += term
        return out * np.exp(-rho2 / (2 * self.width))

    def scaled(self, c: complex) -> "VProfile":
        return VProfile(self.width, tuple((c * m, e, p) for m, e, p in self.monomials))

    def times_norm(self, power: int) -> "VProfile":
        """Multiply by ``|V|^power``."""
        return VProfile(self.width, tuple((m, e, p + power) for m, e, p in self.monomials))

    def plus(self, other: "VProfile") -> "VProfile":
        if other.width != self.width:
            raise ValueError("profiles with different widths cannot be added")
        return VProfile(self.width, self.monomials + other.monomials)

    def euler(self) -> "VProfile":
        """``|V| d/d|V|`` applied to the profile."""
        mons = []
        for c, e, p in self.monomials:
            d = sum(e) + p
            mons.append((d * c, e, p))
            mons.append((-c / self.width, e, p + 2))
        return VProfile(self.width, tuple(mons))

    def radial_second(self) -> "VProfile":
        """``|V|^2 d^2/d|V|^2 = E^2 - E`` with ``E`` the Euler operator."""
        e1 = self.euler()
        return e1.euler().plus(e1.scaled(-1.0))

    def to_dict(self) -> dict:
        return {"width": self.width,
                "monomials": [[[m.real, m.imag], list(e), p] for m, e, p in self.monomials]}


@dataclass(frozen=True)
class GeneratorProfile:
    """``phi(|X|, V) = (sum_j a_j |X|^j) * vpart(V)``."""

    radial: tuple = ((0, 1.0),)
    vpart: VProfile = field(default_factory=VProfile)

    def __post_init__(self):
        rad = Counter()
        for j, c in self.radial:
            rad[int(j)] += complex(c)
        object.__setattr__(self, "radial", tuple(sorted((j, c) for j, c in rad.items() if c != 0)))


def standard_profile(width: float = 1.0) -> GeneratorProfile:
    """``exp(-|V|^2 / 2)`` with constant radial part."""
    return GeneratorProfile(((0, 1.0),), VProfile(width))


# ---------------------------------------------------------------------------
# Scalar factors produced by the symbolic operators


class _Context:
    """Per-node geometry of one binding (space, basis, quadrature nodes)."""

    def __init__(self, space: EndomorphismSpace, basis: PoleBasis, V: np.ndarray):
        self.space = space
        self.V = V
        self.norm = np.linalg.norm(V, axis=1)
        self.V_u = V / self.norm[:, None]
        self.Q = np.ascontiguousarray(basis.slot_vectors(self.V_u))
        Jt = normalized_endomorphisms(space, self.V_u)
        self.JQ = np.einsum("nij,nsj->nsi", Jt, self.Q)
        self._J = None
        self._cache: dict = {}

    @property
    def J(self) -> np.ndarray:
        if self._J is None:
            self._J = j_of(self.space, self.V)
        return self._J

    def form(self, slot: int, kind: str) -> np.ndarray:
        key = (slot, kind)
        if key not in self._cache:
            q, jq = self.Q[:, slot], self.JQ[:, slot]
            if kind == "z":
                w = q + 1j * jq
            elif kind == "zbar":
                w = q - 1j * jq
            elif kind == "re":
                w = q.astype(complex)
            elif kind == "im":
                w = jq.astype(complex)
            else:
                raise ValueError(f"unknown form kind {kind!r}")
            self._cache[key] = w
        return self._cache[key]


@dataclass(frozen=True)
class GramFactor:
    """Bilinear product ``w_1 . w_2`` of two form vectors (no conjugation)."""

    f1: tuple
    f2: tuple

    def values(self, ctx: _Context) -> np.ndarray:
        return np.einsum("ni,ni->n", ctx.form(*self.f1), ctx.form(*self.f2))


@dataclass(frozen=True)
class EigenSumFactor:
    """``sum_m c_m(V)`` where ``D_V u_m = c_m u_m`` for each form of a term."""

    forms: tuple

    def values(self, ctx: _Context) -> np.ndarray:
        total = np.zeros(ctx.V.shape[0], dtype=complex)
        J = ctx.J
        for f, mult in Counter(self.forms).items():
            w = ctx.form(*f)
            Jw = np.einsum("nij,nj->ni", J, w)
            nw = np.einsum("ni,ni->n", w, w.conj()).real
            c = -np.einsum("ni,ni->n", Jw, w.conj()) / nw
            res = np.linalg.norm(-Jw - c[:, None] * w, axis=1) / (np.sqrt(nw) * ctx.norm)
            if res.max() > 1e-8:
                raise ValueError(f"form {f} is not an eigenform of D_V (residual {res.max():.2e})")
            total += mult * c
        return total


@dataclass(frozen=True)
class LambdaSqFactor:
    """``|J_V Q_slot|^2``."""

    slot: int

    def values(self, ctx: _Context) -> np.ndarray:
        Jq = np.einsum("nij,nj->ni", ctx.J, ctx.Q[:, self.slot])
        return np.sum(Jq * Jq, axis=1).astype(complex)


# ---------------------------------------------------------------------------
# Twisted functions


@dataclass(frozen=True)
class Term:
    """``coef * |X|^radial * prod(forms) * prod(factors)(V) * vprof(V)``."""

    coef: complex
    forms: tuple
    radial: int
    vprof: VProfile
    factors: tuple = ()

    def key(self):
        return (self.forms, self.radial, self.vprof, self.factors)


def _canon_forms(forms) -> tuple:
    return tuple(sorted((int(s), str(k)) for s, k in forms))


def merge_terms(terms: Sequence[Term]) -> tuple:
    """Combine terms with equal structure and drop zero coefficients."""
    acc: dict = {}
    order = []
    for t in terms:
        t = replace(t, forms=_canon_forms(t.forms), factors=tuple(sorted(t.factors, key=repr)))
        k = t.key()
        if k not in acc:
            acc[k] = 0j
            order.append(k)
        acc[k] += complex(t.coef)
    return tuple(Term(acc[k], k[0], k[1], k[2], k[3]) for k in order if acc[k] != 0)


@dataclass(frozen=True, eq=False)
class TwistedFunction:
    """A finite sum of twisted Z-Fourier integrals.

    Parameters
    ----------
    space : EndomorphismSpace
        Space through which the linear forms are read.
    basis : PoleBasis
    terms : tuple of Term
    factor_space : EndomorphismSpace, optional
        Space used for the scalar factors; defaults to ``space``.  It stays
        fixed under re-binding.
    quad : QuadSpec
    sphere_radius : float, optional
        When set, the integral runs over the sphere ``|V| = sphere_radius``
        with its surface measure instead of over ``R^l``.
    """

    space: EndomorphismSpace
    basis: PoleBasis
    terms: tuple
    factor_space: Optional[EndomorphismSpace] = None
    quad: QuadSpec = field(default_factory=lambda: get_preset("l3-default"))
    sphere_radius: Optional[float] = None
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.factor_space is None:
            object.__setattr__(self, "factor_space", self.space)
        if self.factor_space.k != self.space.k or self.factor_space.l != self.space.l:
            raise ValueError("factor space and bound space differ in shape")
        object.__setattr__(self, "terms", merge_terms(self.terms))

    # construction helpers -------------------------------------------------
    def with_terms(self, terms, label: Optional[str] = None) -> "TwistedFunction":
        return TwistedFunction(self.space, self.basis, tuple(terms), self.factor_space, self.quad,
                               self.sphere_radius, self.label if label is None else label)

    def rebind(self, space: EndomorphismSpace) -> "TwistedFunction":
        """Same terms and factors, forms read through ``space``."""
        return TwistedFunction(space, self.basis, self.terms, self.factor_space, self.quad,
                               self.sphere_radius, self.label)

    def with_quad(self, quad: QuadSpec) -> "TwistedFunction":
        return TwistedFunction(self.space, self.basis, self.terms, self.factor_space, quad,
                               self.sphere_radius, self.label)

    def __add__(self, other: "TwistedFunction") -> "TwistedFunction":
        self._check_compatible(other)
        return self.with_terms(self.terms + other.terms)

    def __sub__(self, other: "TwistedFunction") -> "TwistedFunction":
        return self + other.scaled(-1.0)

    def scaled(self, c: complex) -> "TwistedFunction":
        return self.with_terms([replace(t, coef=c * t.coef) for t in self.terms])

    def _check_compatible(self, other):
        if other.space is not self.space or other.basis is not self.basis \
                or other.factor_space is not self.factor_space \
                or other.sphere_radius != self.sphere_radius:
            raise ValueError("twisted functions live on different bindings")

    @property
    def degree(self) -> int:
        return max((len(t.forms) for t in self.terms), default=0)

    # evaluation -----------------------------------------------------------
    def _nodes(self):
        if "nodes" not in self._cache:
            l = self.space.l
            if self.sphere_radius is not None:
                dirs, w = sphere_rule(l, self.quad.n_s)
                V = self.sphere_radius * dirs
                w = w * self.sphere_radius ** (l - 1)
            else:
                widths = {t.vprof.width for t in self.terms} or {1.0}
                V, w = ball_rule(l, self.quad, max(widths))
            keep = np.linalg.norm(V, axis=1) > 0
            self._cache["nodes"] = (V[keep], w[keep])
        return self._cache["nodes"]

    def _contexts(self):
        if "ctx" not in self._cache:
            V, _ = self._nodes()
            bound = _Context(self.space, self.basis, V)
            fac = bound if self.factor_space is self.space else _Context(self.factor_space, self.basis, V)
            self._cache["ctx"] = (bound, fac)
        return self._cache["ctx"]

    def _term_weights(self):
        if "tw" not in self._cache:
            V, w = self._nodes()
            _, fac = self._contexts()
            fcache: dict = {}
            out = []
            for t in self.terms:
                c = t.coef * t.vprof(V) * w
                for f in t.factors:
                    if f not in fcache:
                        fcache[f] = f.values(fac)
                    c = c * fcache[f]
                out.append(c)
            self._cache["tw"] = out
        return self._cache["tw"]

    def __call__(self, X, Z, chunk: int = 256) -> np.ndarray:
        """Evaluate at paired points ``X`` (P, k) and ``Z`` (P, l)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if X.shape[0] != Z.shape[0]:
            raise ValueError("X and Z must have the same number of rows")
        V, _ = self._nodes()
        bound, _ = self._contexts()
        tw = self._term_weights()
        forms = sorted({f for t in self.terms for f in t.forms})
        out = np.empty(X.shape[0], dtype=complex)
        for s in range(0, X.shape[0], chunk):
            Xc, Zc = X[s:s + chunk], Z[s:s + chunk]
            r = np.linalg.norm(Xc, axis=1)
            vals = {f: bound.form(*f) @ Xc.T for f in forms}
            acc = np.zeros((V.shape[0], Xc.shape[0]), dtype=complex)
            for t, c in zip(self.terms, tw):
                prod = np.broadcast_to(c[:, None], acc.shape).copy()
                for f, mult in Counter(t.forms).items():
                    prod *= vals[f] ** mult
                if t.radial:
                    prod *= r[None, :] ** t.radial
                acc += prod
            phase = np.exp(1j * (V @ Zc.T))
            out[s:s + chunk] = np.sum(phase * acc, axis=0)
        return out


def eval_twisted(f: TwistedFunction, X, Z, quad: Optional[QuadSpec] = None):
    """Quadrature value of ``f`` at ``(X, Z)``; single points give a scalar."""
    if quad is not None and quad != f.quad:
        f = f.with_quad(quad)
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    val = f(np.atleast_2d(X), np.atleast_2d(Z))
    return complex(val[0]) if single else val


def _profile_terms(forms, profile: GeneratorProfile) -> list:
    return [Term(c, tuple(forms), j, profile.vpart) for j, c in profile.radial]


def make_plain(space: EndomorphismSpace, basis: PoleBasis, exponents, profile: GeneratorProfile,
               quad: Optional[QuadSpec] = None, label: str = "") -> TwistedFunction:
    """``int e^{i<Z,V>} phi prod z_i^{p_i} zbar_i^{q_i} dV`` over basis slots.

    ``exponents`` is a sequence of ``(p_i, q_i)`` per slot.
    """
    if len(exponents) != basis.n_slots:
        raise ValueError("need one (p, q) pair per basis slot")
    forms = []
    for i, (p, q) in enumerate(exponents):
        if p < 0 or q < 0:
            raise ValueError("exponents must be nonnegative")
        forms += [(i, "z")] * p + [(i, "zbar")] * q
    return TwistedFunction(space, basis, tuple(_profile_terms(forms, profile)),
                           quad=quad or get_preset("l3-default"), label=label)


def _check_in_span(basis: PoleBasis, Q: np.ndarray):
    if basis.mode != "constant":
        raise ValueError("poles need a constant basis")
    coef, *_ = np.linalg.lstsq(basis.vectors.T, Q, rcond=None)
    res = np.linalg.norm(basis.vectors.T @ coef - Q)
    if res > 1e-10 * max(1.0, np.linalg.norm(Q)):
        raise ValueError(f"invalid pole: outside the real span of the basis (residual {res:.2e})")


def make_one_pole(space: EndomorphismSpace, basis: PoleBasis, Q, p: int, q: int,
                  profile: GeneratorProfile, quad: Optional[QuadSpec] = None,
                  label: str = "") -> TwistedFunction:
    """``int e^{i<Z,V>} phi Theta_Q^p conj(Theta_Q)^q dV``.

    ``Theta_Q`` is linear in ``Q``, so with ``Q = sum c_i Q_i`` it equals
    ``sum c_i z_i``; the pole is kept as a single slot of its own, which is
    the same function evaluated without the multinomial expansion.
    """
    Q = np.asarray(Q, dtype=float)
    _check_in_span(basis, Q)
    if p < 0 or q < 0:
        raise ValueError("exponents must be nonnegative")
    pole = PoleBasis("constant", vectors=Q[None], V0=basis.V0,
                     b_slots=(_in_b(space, Q),))
    forms = [(0, "z")] * p + [(0, "zbar")] * q
    return TwistedFunction(space, pole, tuple(_profile_terms(forms, profile)),
                           quad=quad or get_preset("l3-default"), label=label)


def _in_b(space: EndomorphismSpace, Q: np.ndarray) -> bool:
    if not space.has_partition():
        return False
    return bool(np.allclose(Q[:space.k_a], 0)) and space.k_b > 0


def make_two_pole(space: EndomorphismSpace, basis: PoleBasis, Qa, Qb, exps,
                  profile: GeneratorProfile, quad: Optional[QuadSpec] = None,
                  label: str = "") -> TwistedFunction:
    """Product of ``Theta^{p_a} conj^{q_a}`` at ``Q^(a)`` and the same at ``Q^(b)``.

    ``exps = (p_a, q_a, p_b, q_b)``.
    """
    Qa = np.asarray(Qa, dtype=float)
    Qb = np.asarray(Qb, dtype=float)
    if not space.has_partition():
        raise ValueError("two-pole functions need an (a, b) partition")
    ka = space.k_a
    if np.any(Qa[ka:] != 0) or np.any(Qb[:ka] != 0):
        raise ValueError("invalid pole: Q^(a) must lie in v^(a) and Q^(b) in v^(b)")
    _check_in_span(basis, Qa)
    _check_in_span(basis, Qb)
    pa, qa, pb, qb = exps
    pole = PoleBasis("constant", vectors=np.stack([Qa, Qb]), V0=basis.V0, b_slots=(False, True))
    forms = [(0, "z")] * pa + [(0, "zbar")] * qa + [(1, "z")] * pb + [(1, "zbar")] * qb
    return TwistedFunction(space, pole, tuple(_profile_terms(forms, profile)),
                           quad=quad or get_preset("l3-default"), label=label)


def eval_sphere_fourier(space: EndomorphismSpace, Q, p: int, q: int, R_Z: float,
                        vpart: Optional[VProfile], X, Z, quad: QuadSpec) -> np.ndarray:
    """``oint_{|V| = R_Z} e^{i<Z,V>} phi(V) Theta_Q^p conj(Theta_Q)^q dV``.

    ``vpart=None`` means ``phi = 1``.
    """
    return sphere_fourier(space, Q, p, q, R_Z, vpart, quad)(np.atleast_2d(X), np.atleast_2d(Z))


def sphere_fourier(space: EndomorphismSpace, Q, p: int, q: int, R_Z: float,
                   vpart: Optional[VProfile], quad: QuadSpec) -> TwistedFunction:
    """Twisted function supported on the sphere of radius ``R_Z``."""
    if R_Z <= 0:
        raise ValueError("R_Z must be positive")
    Q = np.asarray(Q, dtype=float)
    # an infinite width switches the Gaussian factor off
    vp = vpart if vpart is not None else VProfile(width=np.inf)
    pole = PoleBasis("constant", vectors=Q[None])
    forms = [(0, "z")] * p + [(0, "zbar")] * q
    return TwistedFunction(space, pole, (Term(1.0, tuple(forms), 0, vp),), quad=quad,
                           sphere_radius=float(R_Z))


# ---------------------------------------------------------------------------
# Polar form of Theta on the pole plane


def polar_pole_coordinates(space: EndomorphismSpace, Q, X):
    """Write the ``S_Q`` component of ``X`` as ``|X_Q| (cos a Q_u + sin a J_{Z0} Q_u)``.

    ``S_Q = span{Q, J_a Q}``; requires an H-type space.

    Returns
    -------
    norm : float
        ``|X_Q|``.
    alpha : float
        Angle in ``[0, pi]``.
    Z0 : ndarray
        Unit Z-vector (arbitrary when ``sin alpha = 0``).
    """
    Q = np.asarray(Q, dtype=float)
    X = np.asarray(X, dtype=float)
    qn = np.linalg.norm(Q)
    Qu = Q / qn
    JQ = np.einsum("aij,j->ai", np.asarray(space.generators, float), Qu)
    a = Qu @ X
    y = JQ @ X
    ny = np.linalg.norm(y)
    Z0 = y / ny if ny > 0 else np.eye(space.l)[0]
    return float(np.hypot(a, ny)), float(np.arctan2(ny, a)), Z0


def expansion_coefficient(s: int, p: int, q: int) -> complex:
    """``A_spq = sum_j C(p, j) C(q, s-j) i^j (-i)^(s-j)``.

    Coefficient of ``cos^{p+q-s} a sin^s a <Z0, V_u>^s`` in
    ``Theta^p conj(Theta)^q / |X_Q|^{p+q}``.
    """
    tot = 0j
    for j in range(0, min(p, s) + 1):
        if 0 <= s - j <= q:
            tot += comb(p, j) * comb(q, s - j) * (1j) ** j * (-1j) ** (s - j)
    return complex(round(tot.real), round(tot.imag))
