"""The intertwining map between sigma-equivalent (or perturbed) spaces.

``kappa`` keeps the profile, the exponents and every scalar factor of a
twisted function and reads the linear forms through the target space.  The
checks here compare finite-difference operators on ``kappa f`` with the
re-bound symbolic images of the same operators on ``f``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from sympy import QQ_I
from sympy.polys.rings import ring

from .algebra import EndomorphismSpace, j_of
from .funcspace import GeneratorProfile, PoleBasis, Term, TwistedFunction, VProfile, make_one_pole
from .operators import (DEFAULT_STEP, apply_full_laplacian, integrand_euler, integrand_laplacian,
                        radial_X_fd)

__all__ = [
    "KappaOperator",
    "apply_kappa",
    "sample_points",
    "relative_residuals",
    "verify_intertwines_laplacian",
    "ParityTag",
    "PARITY_TAGS",
    "KAPPA_SIGNS",
    "ParityDecomposition",
    "parity_decompose",
    "numerical_rank",
    "circle_samples",
    "independence_rank_test",
    "DomainShape",
    "boundary_samples",
    "MultipliedFunction",
    "point_transformation",
    "dirichlet_check",
    "z_radial_derivative",
    "z_neumann_check",
    "z_neumann_twisted",
    "identity_check_z_neumann",
    "identity_check_second_radial",
    "Z_NEUMANN_PREFACTORS",
    "SECOND_RADIAL_CONSTANTS",
    "neumann_normal",
    "neumann_check",
    "restrict_to_sphere",
    "boundary_laplacian_fd",
    "boundary_laplacian_check",
    "RejectedInput",
]


class RejectedInput(ValueError):
    """Raised when a precondition of a boundary check does not hold."""


# ---------------------------------------------------------------------------
# kappa


@dataclass(frozen=True)
class KappaOperator:
    """Re-binding map from ``source`` to ``target``.

    For a sigma-pair ``J'_V^2 = J_V^2`` is checked on random directions.
    """

    source: EndomorphismSpace
    target: EndomorphismSpace
    basis: Optional[PoleBasis] = None
    check_squares: bool = True

    def __post_init__(self):
        if (self.source.k, self.source.l) != (self.target.k, self.target.l):
            raise ValueError("source and target differ in (k, l)")
        if self.check_squares:
            V = np.random.default_rng(0).standard_normal((16, self.source.l))
            J = j_of(self.source, V)
            Jp = j_of(self.target, V)
            if np.max(np.abs(J @ J - Jp @ Jp)) > 1e-10:
                raise ValueError("target is not a sigma-deformation: J'_V^2 != J_V^2")

    def inverse(self) -> "KappaOperator":
        return KappaOperator(self.target, self.source, self.basis, self.check_squares)


def apply_kappa(op: KappaOperator, f: TwistedFunction) -> TwistedFunction:
    """Same specification re-bound to ``op.target``."""
    if f.space is not op.source and f.factor_space is not op.source:
        raise ValueError("function is not bound to the operator's source space")
    if op.basis is not None and f.basis is not op.basis and f.basis.mode == "changing":
        raise ValueError("basis mismatch")
    return f.rebind(op.target)


def sample_points(k: int, l: int, count: int, seed: int, scale: float = 1.0):
    """Uniform samples in ``[-scale, scale]^(k+l)``."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-scale, scale, (count, k))
    Z = rng.uniform(-scale, scale, (count, l))
    return X, Z


def relative_residuals(lhs, rhs) -> np.ndarray:
    """``|lhs - rhs| / max(|lhs|, |rhs|, rms(rhs))`` per sample.

    The RMS floor keeps samples where both sides happen to be tiny from
    dominating.
    """
    lhs = np.asarray(lhs)
    rhs = np.asarray(rhs)
    floor = np.sqrt(np.mean(np.abs(rhs) ** 2))
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), floor)
    scale = np.where(scale > 0, scale, 1.0)
    return np.abs(lhs - rhs) / scale


def verify_intertwines_laplacian(op: KappaOperator, f: TwistedFunction, X, Z, tol: float = 1e-4,
                                 h: float = DEFAULT_STEP) -> dict:
    """Compare ``Delta'(kappa f)`` (stencil) with ``kappa(Delta f)`` (symbolic, re-bound).

    The report also carries the source-side consistency residual between the
    stencil Laplacian of ``f`` and its symbolic image.
    """
    kf = apply_kappa(op, f)
    lf = integrand_laplacian(f)
    lhs = apply_full_laplacian(op.target, kf, X, Z, h)
    rhs = lf.rebind(op.target)(X, Z)
    res = relative_residuals(lhs, rhs)
    src = relative_residuals(apply_full_laplacian(op.source, f, X, Z, h), lf(X, Z))
    return {
        "check": "intertwine-laplacian",
        "function": f.label,
        "lhs": lhs, "rhs": rhs, "residual": res,
        "source_residual": src,
        "max_residual": float(res.max()),
        "max_source_residual": float(src.max()),
        "tol": tol,
        "verdict": bool(res.max() <= tol and src.max() <= tol),
    }


# ---------------------------------------------------------------------------
# Parity decomposition


@dataclass(frozen=True, order=True)
class ParityTag:
    """``(parity of the J count, parity of the J^(b) count)``."""

    j: str
    b: str

    def __str__(self):
        return f"{self.j}_J,{self.b}_b"


PARITY_TAGS = (ParityTag("evn", "evn"), ParityTag("evn", "odd"),
               ParityTag("odd", "evn"), ParityTag("odd", "odd"))
# kappa flips J^(b) and fixes J^(a)
KAPPA_SIGNS = {t: (-1 if t.b == "odd" else 1) for t in PARITY_TAGS}


@dataclass(frozen=True)
class ParityDecomposition:
    parts: dict
    polys: dict
    original: object
    reconstruction_exact: bool
    kappa_signs: dict
    kappa_signs_exact: bool


def _split_basis(space: EndomorphismSpace, basis: PoleBasis):
    """Split every slot vector into its ``v^(a)`` and ``v^(b)`` components."""
    if basis.mode != "constant":
        raise ValueError("parity decomposition is only supported for constant bases")
    if not space.has_partition():
        raise ValueError("parity decomposition needs an (a, b) partition")
    ka = space.k_a
    vecs, flags, origin = [], [], []
    for s, v in enumerate(basis.vectors):
        for is_b, part in ((False, np.r_[v[:ka], np.zeros(space.k - ka)]),
                           (True, np.r_[np.zeros(ka), v[ka:]])):
            if np.any(part != 0):
                vecs.append(part)
                flags.append(is_b)
                origin.append(s)
    return PoleBasis("constant", vectors=np.array(vecs), b_slots=tuple(flags), V0=basis.V0), origin


def parity_decompose(f: TwistedFunction) -> ParityDecomposition:
    """Expand each ``Theta`` into ``<Q,X> + i<J Q, X>`` and sort terms by parity.

    The expansion is done in exact Gaussian-rational arithmetic over symbols
    ``A_s = <Q_s, X>`` and ``B_s = <J Q_s, X>`` where the slots ``s`` are the
    ``v^(a)`` and ``v^(b)`` parts of the poles.  ``kappa`` replaces
    ``B_s -> -B_s`` on ``v^(b)`` slots; its action on each part is checked
    symbolically against :data:`KAPPA_SIGNS`.
    """
    split, origin = _split_basis(f.space, f.basis)
    n = len(origin)
    names = ",".join([f"A{s}" for s in range(n)] + [f"B{s}" for s in range(n)])
    R, *gens = ring(names, QQ_I)
    A, B = gens[:n], gens[n:]
    I = QQ_I.from_sympy(__import__("sympy").I)
    lin = {}
    for s_old in range(f.basis.n_slots):
        z = R.zero
        zb = R.zero
        for s, o in enumerate(origin):
            if o == s_old:
                z += A[s] + I * B[s]
                zb += A[s] - I * B[s]
        lin[(s_old, "z")] = z
        lin[(s_old, "zbar")] = zb
    parts_terms = {t: [] for t in PARITY_TAGS}
    polys = {t: R.zero for t in PARITY_TAGS}
    original = R.zero
    bflags = split.b_slots
    for term in f.terms:
        if term.factors:
            raise ValueError("parity decomposition expects plain profile terms")
        P = R.one
        for fm in term.forms:
            if fm[1] not in ("z", "zbar"):
                raise ValueError("parity decomposition expects z/zbar forms")
            P *= lin[fm]
        original += P
        for mon, c in P.items():
            nJ = sum(mon[n:])
            nJb = sum(e for e, fb in zip(mon[n:], bflags) if fb)
            tag = ParityTag("evn" if nJ % 2 == 0 else "odd", "evn" if nJb % 2 == 0 else "odd")
            polys[tag] += R({mon: c})
            forms = []
            for s in range(n):
                forms += [(s, "re")] * mon[s] + [(s, "im")] * mon[n + s]
            cc = complex(QQ_I.to_sympy(c))
            parts_terms[tag].append(Term(term.coef * cc, tuple(forms), term.radial, term.vprof))
    recon = sum(polys.values(), R.zero) == original
    # kappa: B_s -> -B_s on b slots
    signs, exact = {}, True
    for tag, p in polys.items():
        img = R.zero
        for mon, c in p.items():
            sgn = (-1) ** sum(e for e, fb in zip(mon[n:], bflags) if fb)
            img += R({mon: c * sgn})
        if not p:
            signs[tag] = KAPPA_SIGNS[tag]
            continue
        if img == p:
            signs[tag] = 1
        elif img == -p:
            signs[tag] = -1
        else:
            signs[tag] = 0
        exact = exact and signs[tag] == KAPPA_SIGNS[tag]
    parts = {t: TwistedFunction(f.space, split, tuple(parts_terms[t]), f.factor_space, f.quad,
                                f.sphere_radius, f"{f.label}|{t}") for t in PARITY_TAGS}
    return ParityDecomposition(parts, polys, original, bool(recon), signs, exact)


# ---------------------------------------------------------------------------
# Independence by sampled rank


def numerical_rank(M: np.ndarray, threshold: float) -> int:
    """Number of singular values above ``threshold * sigma_max``."""
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > threshold * s[0]))


def _normalize_columns(M: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(M, axis=0)
    return M / np.where(n > 0, n, 1.0)


def circle_samples(k: int, R_X: float, n_circles: int, per_circle: int, seed: int) -> np.ndarray:
    """Points on random great circles of the sphere ``|X| = R_X``."""
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(n_circles):
        q, _ = np.linalg.qr(rng.standard_normal((k, 2)))
        ang = 2 * np.pi * (np.arange(per_circle) + rng.uniform()) / per_circle
        pts.append(R_X * (np.cos(ang)[:, None] * q[:, 0] + np.sin(ang)[:, None] * q[:, 1]))
    return np.concatenate(pts)


def independence_rank_test(families: dict, X: np.ndarray, Z: np.ndarray, threshold: float = 1e-8,
                           control: bool = False) -> dict:
    """Rank additivity of sampled function families.

    Parameters
    ----------
    families : dict
        Name -> list of callables ``g(X, Z)``.
    X, Z : ndarray
        Sample points; every X row is paired with every Z row.
    threshold : float
        Relative singular-value threshold.
    control : bool
        Also run the negative control where the first member of the first
        family is appended to the second family.
    """
    XX = np.repeat(X, len(Z), axis=0)
    ZZ = np.tile(Z, (len(X), 1))
    mats = {}
    for name, funcs in families.items():
        cols = [np.asarray(g(XX, ZZ)) for g in funcs]
        M = np.stack(cols, axis=1) if cols else np.zeros((len(XX), 0))
        mats[name] = _normalize_columns(np.concatenate([M.real, M.imag], axis=0))
    ranks = {name: numerical_rank(M, threshold) for name, M in mats.items()}
    joint = np.concatenate(list(mats.values()), axis=1)
    joint_rank = numerical_rank(joint, threshold)
    out = {"ranks": ranks, "joint_rank": joint_rank, "sum_of_ranks": sum(ranks.values()),
           "additive": joint_rank == sum(ranks.values()), "threshold": threshold,
           "singular_values": np.linalg.svd(joint, compute_uv=False)}
    if control:
        names = list(mats)
        dup = dict(mats)
        dup[names[1]] = np.concatenate([mats[names[1]], mats[names[0]][:, :1]], axis=1)
        cr = {n: numerical_rank(M, threshold) for n, M in dup.items()}
        cj = numerical_rank(np.concatenate(list(dup.values()), axis=1), threshold)
        out["control"] = {"ranks": cr, "joint_rank": cj, "additive": cj == sum(cr.values())}
    return out


# ---------------------------------------------------------------------------
# Domains and boundary samples


@dataclass(frozen=True)
class DomainShape:
    """Domain of (X, Z)-revolutions.

    ``kind = "ball"``: ``|X| <= R_X`` and ``|Z| <= R_Z(|X|)`` with
    ``R_Z(x) = sum_i coeffs[i] x^i``.  ``kind = "sphere-ball"``: ``|X| = R_X``
    and ``|Z| <= coeffs[0]``.
    """

    kind: str
    R_X: float
    coeffs: tuple

    def __post_init__(self):
        if self.kind not in ("ball", "sphere-ball"):
            raise ValueError("kind must be 'ball' or 'sphere-ball'")
        xs = np.linspace(0, self.R_X, 64, endpoint=False)
        if np.any(self.R_Z(xs) <= 0):
            raise ValueError("radius function must be positive on [0, R_X)")

    def R_Z(self, x):
        x = np.asarray(x)
        return sum(c * x ** i for i, c in enumerate(self.coeffs))

    def R_Z_prime(self, x):
        x = np.asarray(x)
        return sum(i * c * x ** (i - 1) for i, c in enumerate(self.coeffs) if i)

    def defining(self, X, Z):
        """``|Z| - R_Z(|X|)``, written to accept complex-step input."""
        x = np.sqrt(np.sum(X * X, axis=-1))
        return np.sqrt(np.sum(Z * Z, axis=-1)) - self.R_Z(x)


def boundary_samples(domain: DomainShape, k: int, l: int, count: int, seed: int,
                     margin: float = 0.05):
    """Stratified samples of the boundary level set ``|Z| = R_Z(|X|)``.

    ``|X|`` is stratified over ``[margin, 1 - margin] R_X`` (fixed at ``R_X``
    for sphere-ball domains); directions are Gaussian.
    """
    rng = np.random.default_rng(seed)
    Xd = rng.standard_normal((count, k))
    Xd /= np.linalg.norm(Xd, axis=1)[:, None]
    Zd = rng.standard_normal((count, l))
    Zd /= np.linalg.norm(Zd, axis=1)[:, None]
    if domain.kind == "ball":
        u = (np.arange(count) + rng.uniform(size=count)) / count
        rx = domain.R_X * (margin + (1 - 2 * margin) * u)
    else:
        rx = np.full(count, domain.R_X)
    return Xd * rx[:, None], Zd * domain.R_Z(rx)[:, None]


@dataclass(frozen=True)
class MultipliedFunction:
    """``m(X, Z) * base(X, Z)`` for a multiplier depending on ``|X|`` and ``Z``."""

    base: Callable
    multiplier: Callable
    label: str = ""

    def __call__(self, X, Z):
        X = np.atleast_2d(X)
        Z = np.atleast_2d(Z)
        return self.multiplier(X, Z) * self.base(X, Z)


def point_transformation(source: EndomorphismSpace, target: EndomorphismSpace, Q) -> np.ndarray:
    """Orthogonal ``T`` with ``T^T Q = Q`` and ``T^T J_a Q = J'_a Q``.

    For an H-type pair the vectors ``Q, J_a Q`` are orthogonal of length
    ``|Q|``, so ``T`` maps the orthonormal frame ``{Q, J'_a Q}/|Q|`` onto
    ``{Q, J_a Q}/|Q|`` and is completed on the complements.  A one-pole
    function then satisfies ``kappa F (X, Z) = F(T X, Z)``.
    """
    Q = np.asarray(Q, float)
    n = np.linalg.norm(Q)
    G = np.asarray(source.generators, float)
    Gp = np.asarray(target.generators, float)
    Aa = np.column_stack([Q] + [g @ Q for g in G]) / n
    Bb = np.column_stack([Q] + [g @ Q for g in Gp]) / n
    for M in (Aa, Bb):
        if np.max(np.abs(M.T @ M - np.eye(M.shape[1]))) > 1e-10:
            raise ValueError("pole frame is not orthonormal (H-type pair required)")

    def complete(M):
        q, _ = np.linalg.qr(np.column_stack([M, np.eye(M.shape[0])]))
        return np.column_stack([M, q[:, M.shape[1]:M.shape[0]]])

    # T B = A on the frames: T = A_full B_full^T
    return complete(Aa) @ complete(Bb).T


def dirichlet_check(f: Callable, X, Z, tol: float = 1e-8) -> dict:
    """Max ``|f|`` over boundary samples and the verdict ``max <= tol``."""
    v = np.abs(np.asarray(f(X, Z)))
    return {"check": "dirichlet", "max_abs": float(v.max()), "tol": tol,
            "verdict": bool(v.max() <= tol)}


def z_radial_derivative(f: Callable, X, Z, h: float = DEFAULT_STEP,
                        richardson: bool = False) -> np.ndarray:
    """Centered ``d/d|Z|`` at fixed ``X`` and ``Z`` direction.

    With ``richardson`` the steps ``2h`` and ``h`` are combined to an
    ``O(h^4)`` estimate.
    """
    X = np.atleast_2d(X)
    Z = np.atleast_2d(Z)
    u = Z / np.linalg.norm(Z, axis=1)[:, None]
    steps = (h, 2 * h) if richardson else (h,)
    Xs = np.concatenate([X] * (2 * len(steps)))
    Zs = np.concatenate([Z + sgn * st * u for st in steps for sgn in (1, -1)])
    v = np.asarray(f(Xs, Zs)).reshape(2 * len(steps), -1)
    d1 = (v[0] - v[1]) / (2 * h)
    if not richardson:
        return d1
    d2 = (v[2] - v[3]) / (4 * h)
    return (4 * d1 - d2) / 3


def z_radial_second(f: Callable, X, Z, h: float = DEFAULT_STEP) -> np.ndarray:
    X = np.atleast_2d(X)
    Z = np.atleast_2d(Z)
    u = Z / np.linalg.norm(Z, axis=1)[:, None]
    vals = np.asarray(f(np.concatenate([X, X, X]), np.concatenate([Z + h * u, Z - h * u, Z])))
    P = X.shape[0]
    return (vals[:P] + vals[P:2 * P] - 2 * vals[2 * P:]) / h ** 2


def z_neumann_check(f: Callable, X, Z, tol: float = 1e-6, h: float = DEFAULT_STEP) -> dict:
    """Max ``|d f / d|Z||`` over boundary samples."""
    d = np.abs(z_radial_derivative(f, X, Z, h, richardson=True))
    return {"check": "z-neumann", "max_abs": float(d.max()), "tol": tol,
            "verdict": bool(d.max() <= tol)}


Z_NEUMANN_PREFACTORS = {"-|Z|": lambda z: -z, "-1/|Z|": lambda z: -1.0 / z}
SECOND_RADIAL_CONSTANTS = {"l": lambda l: l, "l(l+1)": lambda l: l * (l + 1)}


def z_neumann_twisted(space: EndomorphismSpace, basis: PoleBasis, Q, p: int, q: int, R_Z: float,
                      R_X: float, extra: int = 1, n_samples: int = 48, seed: int = 0,
                      quad=None) -> TwistedFunction:
    """One-pole twisted function with vanishing ``d/d|Z|`` on ``|X| = R_X, |Z| = R_Z``.

    The profile is ``sum_j c_j |V|^(2j) exp(-|V|^2/2)``, ``j <= p + q + extra``.
    On the sphere the radial derivative splits into at most ``p + q + 1``
    harmonic components in ``V_u``, so the sampled constraint matrix has a
    null space of dimension ``extra``; its last right singular vector gives
    ``c``.  The result stays inside the twisted class, which the boundary
    Laplacian argument requires.
    """
    n_prof = p + q + 1 + extra
    cols = []
    sb = DomainShape("sphere-ball", R_X, (R_Z,))
    X, Z = boundary_samples(sb, space.k, space.l, n_samples, seed)
    Z = Z * (R_Z / np.linalg.norm(Z, axis=1))[:, None]
    fams = []
    for j in range(n_prof):
        prof = GeneratorProfile(((0, 1.0),), VProfile(1.0, ((1.0, (), 2 * j),)))
        g = make_one_pole(space, basis, Q, p, q, prof, quad=quad)
        fams.append(g)
        cols.append(z_radial_derivative(g, X, Z, richardson=True))
    M = np.stack(cols, axis=1)
    scale = np.linalg.norm(M, axis=0)
    _, _, vh = np.linalg.svd(M / scale)
    c = vh[-1].conj() / scale
    terms = [Term(ci * t.coef, t.forms, t.radial, t.vprof) for ci, g in zip(c, fams) for t in g.terms]
    return fams[0].with_terms(terms, label=f"zn-one-pole({p},{q})")


def identity_check_z_neumann(f: TwistedFunction, X, Z, h: float = DEFAULT_STEP) -> dict:
    """Oracle for ``d/d|Z| F(phi) = c(|Z|) (F(|V| phi') + l F(phi))``.

    Both candidate prefactors are tried; the one with the smaller maximal
    residual is selected.
    """
    l = f.space.l
    lhs = z_radial_derivative(f, X, Z, h, richardson=True)
    core = integrand_euler(f)(X, Z) + l * f(X, Z)
    zn = np.linalg.norm(np.atleast_2d(Z), axis=1)
    res = {}
    for name, c in Z_NEUMANN_PREFACTORS.items():
        res[name] = float(relative_residuals(lhs, c(zn) * core).max())
    sel = min(res, key=res.get)
    return {"check": "z-neumann-identity", "residuals": res, "selected": sel,
            "max_residual": res[sel]}


def identity_check_second_radial(f: TwistedFunction, X, Z, h: float = 1e-2) -> dict:
    """Oracle for ``d^2/d|Z|^2 F = |Z|^-2 (F(|V|^2 phi'') + 2(l+1) F(|V| phi') + c0 F(phi))``.

    The second difference uses a Richardson step (``h`` and ``h/2``).
    """
    l = f.space.l
    lhs = (4 * z_radial_second(f, X, Z, h / 2) - z_radial_second(f, X, Z, h)) / 3
    pp = f.with_terms([_with_vprof(t, t.vprof.radial_second()) for t in f.terms])
    p1 = integrand_euler(f)
    zn = np.linalg.norm(np.atleast_2d(Z), axis=1)
    base = pp(X, Z) + 2 * (l + 1) * p1(X, Z)
    f0 = f(X, Z)
    res = {}
    for name, c in SECOND_RADIAL_CONSTANTS.items():
        res[name] = float(relative_residuals(lhs, (base + c(l) * f0) / zn ** 2).max())
    sel = min(res, key=res.get)
    return {"check": "second-radial-identity", "residuals": res, "selected": sel,
            "max_residual": res[sel]}


def _with_vprof(t: Term, vprof) -> Term:
    return Term(t.coef, t.forms, t.radial, vprof, t.factors)


# ---------------------------------------------------------------------------
# Neumann normal


def _complex_step_grad(g: Callable, X: np.ndarray, Z: np.ndarray, h: float = 1e-30):
    k, l = X.size, Z.size
    gx = np.empty(k)
    gz = np.empty(l)
    for i in range(k):
        d = np.zeros(k, complex)
        d[i] = 1j * h
        gx[i] = np.imag(g(X + d, Z.astype(complex))) / h
    for a in range(l):
        d = np.zeros(l, complex)
        d[a] = 1j * h
        gz[a] = np.imag(g(X.astype(complex), Z + d)) / h
    return gx, gz


def neumann_normal(space: EndomorphismSpace, domain: DomainShape, X, Z) -> dict:
    """Unit normal of ``{|Z| = R_Z(|X|)}`` in the left-invariant orthonormal frame.

    Frame derivatives are ``X_i g = d_i g + 1/2 sum_a <J_a X, E_i> d_a g`` and
    ``Z_a g = d_a g``, with coordinate derivatives by complex step.  The
    normal is then projected on ``{X_u, J_Z X, Z_u}``.

    Returns
    -------
    dict
        ``mu_X``, ``mu_Z`` (frame components), ``coefficients`` ``(A, B, C)``
        of ``mu = A X_u + B J_Z X + C Z_u`` and the projection residual.
    """
    X = np.asarray(X, float)
    Z = np.asarray(Z, float)
    if np.linalg.norm(X) == 0 or np.linalg.norm(Z) == 0:
        raise RejectedInput("degenerate boundary point (X = 0 or Z = 0)")
    gx, gz = _complex_step_grad(domain.defining, X, Z)
    G = np.asarray(space.generators, float)
    JX = np.einsum("aij,j->ai", G, X)
    a = gx + 0.5 * JX.T @ gz
    c = gz
    nrm = np.sqrt(a @ a + c @ c)
    mu = np.concatenate([a, c]) / nrm
    Xu = X / np.linalg.norm(X)
    Zu = Z / np.linalg.norm(Z)
    JZX = j_of(space, Z) @ X
    S = np.column_stack([np.r_[Xu, np.zeros(space.l)], np.r_[JZX, np.zeros(space.l)],
                         np.r_[np.zeros(space.k), Zu]])
    coef, *_ = np.linalg.lstsq(S, mu, rcond=None)
    return {"mu_X": mu[:space.k], "mu_Z": mu[space.k:], "coefficients": coef,
            "span_residual": float(np.linalg.norm(S @ coef - mu))}


def normal_derivative(space: EndomorphismSpace, f: Callable, X, Z, mu_X, mu_Z,
                      h: float = DEFAULT_STEP) -> complex:
    """``mu f`` for the frame vector with components ``(mu_X, mu_Z)``."""
    X = np.asarray(X, float)
    Z = np.asarray(Z, float)
    JX = np.einsum("aij,j->ai", np.asarray(space.generators, float), X)
    dZ = mu_Z + 0.5 * JX @ mu_X
    dX = mu_X
    v = np.asarray(f(np.stack([X + h * dX, X - h * dX]), np.stack([Z + h * dZ, Z - h * dZ])))
    return complex((v[0] - v[1]) / (2 * h))


def neumann_check(space: EndomorphismSpace, domain: DomainShape, X, Z, f: Optional[Callable] = None,
                  tol: float = 1e-8) -> dict:
    """Normal vectors at boundary samples, their span test and ``mu f``."""
    rows = []
    for x, z in zip(np.atleast_2d(X), np.atleast_2d(Z)):
        try:
            nv = neumann_normal(space, domain, x, z)
        except RejectedInput as e:
            rows.append({"skipped": str(e)})
            continue
        row = {"span_residual": nv["span_residual"], "coefficients": nv["coefficients"]}
        if f is not None:
            row["normal_derivative"] = normal_derivative(space, f, x, z, nv["mu_X"], nv["mu_Z"])
        rows.append(row)
    worst = max((r["span_residual"] for r in rows if "span_residual" in r), default=0.0)
    return {"check": "neumann", "rows": rows, "max_span_residual": worst, "tol": tol,
            "verdict": bool(worst <= tol)}


# ---------------------------------------------------------------------------
# Boundary Laplacians


def restrict_to_sphere(f: Callable, R_X: float) -> Callable:
    """Boundary function ``(X_u, Z) -> f(R_X X_u, Z)``."""
    def g(Xu, Z):
        Xu = np.atleast_2d(Xu)
        return f(R_X * Xu / np.linalg.norm(Xu, axis=1)[:, None], Z)
    return g


def boundary_laplacian_fd(space: EndomorphismSpace, f: Callable, X, Z, kind: str = "sphere-ball",
                          h: float = DEFAULT_STEP) -> np.ndarray:
    """Laplacian of the boundary manifold by stencils on an ambient extension.

    ``"sphere-ball"``: the full Laplacian minus the X-radial part
    ``d_r^2 + (k-1)/r d_r``.  ``"sphere-sphere"``: additionally the Z-radial
    part of ``(1 + |X|^2/4) Delta_Z`` and the term ``d_|Z| D_{Z_u}`` of ``M``
    are removed (H-type spaces).
    """
    X = np.atleast_2d(np.asarray(X, float))
    Z = np.atleast_2d(np.asarray(Z, float))
    out = apply_full_laplacian(space, f, X, Z, h) - radial_X_fd(f, X, Z, h)
    if kind == "sphere-ball":
        return out
    if kind != "sphere-sphere":
        raise ValueError("kind must be 'sphere-ball' or 'sphere-sphere'")
    l = space.l
    zn = np.linalg.norm(Z, axis=1)
    Zu = Z / zn[:, None]
    d1 = z_radial_derivative(f, X, Z, h)
    d2 = z_radial_second(f, X, Z, h)
    r2 = np.sum(X * X, axis=1)
    out = out - (1 + 0.25 * r2) * (d2 + (l - 1) / zn * d1)
    # d_|Z| D_{Z_u}: nested difference with the direction Z_u frozen
    JX = np.einsum("pij,pj->pi", j_of(space, Zu), X)
    P = X.shape[0]
    Xs = np.concatenate([X + h * JX, X - h * JX, X + h * JX, X - h * JX])
    Zs = np.concatenate([Z + h * Zu, Z + h * Zu, Z - h * Zu, Z - h * Zu])
    v = np.asarray(f(Xs, Zs)).reshape(4, P)
    out = out - (v[0] - v[1] - v[2] + v[3]) / (4 * h ** 2)
    return out


def boundary_laplacian_check(source: EndomorphismSpace, target: EndomorphismSpace, Q, f: Callable,
                             X, Z, kind: str = "sphere-ball", tol: float = 1e-4,
                             neumann_tol: float = 1e-6, h: float = DEFAULT_STEP) -> dict:
    """Intertwining of boundary Laplacians for a function with fixed pole ``Q``.

    ``kappa`` acts on such functions as ``g -> g(T X, Z)`` with ``T`` from
    :func:`point_transformation`; the check compares the target boundary
    Laplacian of ``kappa f`` with ``kappa`` of the source one.  For
    ``"sphere-sphere"`` the Z-Neumann condition is required first.
    """
    X = np.atleast_2d(np.asarray(X, float))
    Z = np.atleast_2d(np.asarray(Z, float))
    if kind == "sphere-sphere":
        zc = z_neumann_check(f, X, Z, neumann_tol, h)
        if not zc["verdict"]:
            raise RejectedInput(f"Z-Neumann precondition fails (max {zc['max_abs']:.2e})")
    T = point_transformation(source, target, Q)

    def kf(XX, ZZ):
        return f(np.atleast_2d(XX) @ T.T, ZZ)

    lhs = boundary_laplacian_fd(target, kf, X, Z, kind, h)
    rhs = boundary_laplacian_fd(source, f, X @ T.T, Z, kind, h)
    res = relative_residuals(lhs, rhs)
    return {"check": f"boundary-laplacian-{kind}", "lhs": lhs, "rhs": rhs, "residual": res,
            "max_residual": float(res.max()), "tol": tol, "verdict": bool(res.max() <= tol)}
