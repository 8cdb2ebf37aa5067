"""Clifford modules and endomorphism spaces of 2-step nilpotent metric Lie algebras.

The Lie algebra is ``v + z = R^k + R^l`` with bracket fixed by
``<[X, Y], Z> = <J_Z X, Y>``.  An endomorphism space is stored as the list of
skew generators ``J_1, ..., J_l`` so that ``J_Z = sum_a Z_a J_a``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "CliffordModule",
    "EndomorphismSpace",
    "SigmaInvolution",
    "NormalizedEndomorphism",
    "build_irreducible_clifford",
    "assemble_h_type",
    "j_of",
    "bracket",
    "sigma_from_partition",
    "sigma_deform",
    "perturb_clifford",
    "clifford_defect",
    "normalized_endomorphism",
    "normalized_endomorphisms",
    "ricci_h",
    "ricci_xx",
    "ricci_zz",
    "ricci_xz",
    "space_to_json",
    "space_from_json",
    "KERNEL_THRESHOLD",
]

KERNEL_THRESHOLD = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CliffordModule:
    """Generators ``j_1..j_l`` acting on ``R^r``.

    ``epsilon`` and ``seed`` record a perturbation; for an unperturbed module
    ``epsilon == 0`` and the generators are integer valued.
    """

    l: int
    r: int
    generators: np.ndarray
    epsilon: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        g = np.asarray(self.generators)
        if g.shape != (self.l, self.r, self.r):
            raise ValueError(f"generators must have shape {(self.l, self.r, self.r)}, got {g.shape}")
        if np.max(np.abs(g + np.transpose(g, (0, 2, 1))), initial=0) > 1e-13:
            raise ValueError("Clifford generators must be skew")
        object.__setattr__(self, "generators", _frozen(g))

    @property
    def perturbed(self) -> bool:
        return self.epsilon != 0.0


@dataclass(frozen=True)
class EndomorphismSpace:
    """Skew generators ``J_1..J_l`` on ``R^k``.

    Parameters
    ----------
    generators : ndarray, shape (l, k, k)
    tag : str
        One of ``"h-type"``, ``"sigma-deformed"``, ``"perturbed"``, ``"general"``.
    a, b : int, optional
        Block counts of the ``v^(a) + v^(b)`` partition when known.
    r : int, optional
        Size of one block.
    """

    generators: np.ndarray
    tag: str = "general"
    a: Optional[int] = None
    b: Optional[int] = None
    r: Optional[int] = None
    name: str = ""
    h_type: bool = field(default=False, compare=False)

    def __post_init__(self):
        g = np.asarray(self.generators)
        if g.ndim != 3 or g.shape[1] != g.shape[2]:
            raise ValueError("generators must have shape (l, k, k)")
        if np.max(np.abs(g + np.transpose(g, (0, 2, 1))), initial=0) > 1e-13:
            raise ValueError("generators must be skew")
        if self.tag not in ("h-type", "sigma-deformed", "perturbed", "general"):
            raise ValueError(f"unknown tag {self.tag!r}")
        object.__setattr__(self, "generators", _frozen(g))
        # Clifford condition on the generators decides whether J~_V = J_V/|V|.
        anti = np.einsum("aij,bjk->abik", g, g)
        anti = anti + np.transpose(anti, (1, 0, 2, 3))
        eye = np.eye(g.shape[1])
        target = -2.0 * np.einsum("ab,ij->abij", np.eye(g.shape[0]), eye)
        object.__setattr__(self, "h_type", bool(np.max(np.abs(anti - target)) < 1e-12))

    @property
    def l(self) -> int:
        return self.generators.shape[0]

    @property
    def k(self) -> int:
        return self.generators.shape[1]

    @property
    def k_a(self) -> Optional[int]:
        return None if self.a is None else self.a * self.r

    @property
    def k_b(self) -> Optional[int]:
        return None if self.b is None else self.b * self.r

    def has_partition(self) -> bool:
        return self.a is not None and self.b is not None and self.r is not None


@dataclass(frozen=True)
class SigmaInvolution:
    """Orthogonal involution of the X-space, block signature ``(k_a, k_b)``."""

    matrix: np.ndarray
    k_a: Optional[int] = None
    k_b: Optional[int] = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        n = m.shape[0]
        if np.max(np.abs(m @ m - np.eye(n))) > 1e-12 or np.max(np.abs(m - m.T)) > 1e-12:
            raise ValueError("sigma must be a symmetric orthogonal involution")
        object.__setattr__(self, "matrix", _frozen(m))


@dataclass(frozen=True)
class NormalizedEndomorphism:
    """Eigenstructure of ``-J_V^2`` and the normalized map ``J~_V``.

    ``lambdas`` holds the nonnegative square roots of the eigenvalues of
    ``-J_V^2`` (ascending) and ``basis`` the matching orthonormal eigenvectors
    as columns.
    """

    V: np.ndarray
    lambdas: np.ndarray
    basis: np.ndarray
    matrix: np.ndarray
    kernel_dim: int


# ---------------------------------------------------------------------------
# Clifford modules


def _cd_conj(x: np.ndarray) -> np.ndarray:
    if x.size == 1:
        return x.copy()
    h = x.size // 2
    return np.concatenate([_cd_conj(x[:h]), -x[h:]])


def _cd_mul(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cayley-Dickson product ``(p,q)(r,s) = (pr - s*q, sp + q r*)``."""
    if x.size == 1:
        return x * y
    h = x.size // 2
    p, q = x[:h], x[h:]
    r, s = y[:h], y[h:]
    return np.concatenate(
        [_cd_mul(p, r) - _cd_mul(_cd_conj(s), q), _cd_mul(s, p) + _cd_mul(q, _cd_conj(r))]
    )


def _left_multiplications(dim: int, count: int) -> np.ndarray:
    basis = np.eye(dim, dtype=np.int64)
    out = np.zeros((count, dim, dim), dtype=np.int64)
    for a in range(count):
        for j in range(dim):
            out[a, :, j] = _cd_mul(basis[a + 1], basis[j])
    return out


def build_irreducible_clifford(l: int) -> CliffordModule:
    """Integer generators of an irreducible Clifford module for ``l <= 8``.

    For ``l <= 7`` the generators are left multiplications by imaginary units
    of the Cayley-Dickson algebras of dimension 2, 4 and 8 (complex numbers,
    quaternions, octonions), which are built by recursive doubling.  For
    ``l = 8`` the seven octonion generators are doubled once more as
    ``diag(g, -g)`` together with ``[[0, -I], [I, 0]]``.

    Parameters
    ----------
    l : int
        Dimension of the center, ``1 <= l <= 8``.

    Returns
    -------
    CliffordModule
    """
    if not isinstance(l, (int, np.integer)) or l < 1:
        raise ValueError("l must be a positive integer")
    if l > 8:
        raise NotImplementedError("Clifford modules are only constructed for l <= 8")
    if l <= 7:
        dim = 2 if l == 1 else 4 if l <= 3 else 8
        gens = _left_multiplications(dim, l)
    else:
        base = _left_multiplications(8, 7)
        z = np.zeros((8, 8), dtype=np.int64)
        eye = np.eye(8, dtype=np.int64)
        gens = [np.block([[g, z], [z, -g]]) for g in base]
        gens.append(np.block([[z, -eye], [eye, z]]))
        gens = np.array(gens)
    return CliffordModule(l=int(l), r=gens.shape[1], generators=gens)


def clifford_defect(module: CliffordModule) -> float:
    """Max-norm of ``j_a j_b + j_b j_a + 2 delta_ab I`` over all pairs."""
    g = np.asarray(module.generators, dtype=float)
    anti = np.einsum("aij,bjk->abik", g, g)
    anti = anti + np.transpose(anti, (1, 0, 2, 3))
    anti += 2.0 * np.einsum("ab,ij->abij", np.eye(module.l), np.eye(module.r))
    return float(np.max(np.abs(anti)))


def perturb_clifford(module: CliffordModule, epsilon: float, seed: int) -> CliffordModule:
    """Return ``j~_a = j_a + epsilon * S_a`` with seeded skew ``S_a``.

    Each ``S_a`` is ``(G - G^T)/2`` for a standard normal matrix ``G`` drawn
    from ``numpy.random.default_rng(seed)``, rescaled to unit spectral norm.
    The Clifford condition is not preserved; see :func:`clifford_defect`.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    rng = np.random.default_rng(seed)
    r = module.r
    S = np.empty((module.l, r, r))
    for a in range(module.l):
        G = rng.standard_normal((r, r))
        A = 0.5 * (G - G.T)
        S[a] = A / np.linalg.norm(A, 2)
    if epsilon == 0:
        gens = np.asarray(module.generators)
    else:
        gens = np.asarray(module.generators, dtype=float) + epsilon * S
    return CliffordModule(l=module.l, r=r, generators=gens, epsilon=float(epsilon), seed=int(seed))


# ---------------------------------------------------------------------------
# Endomorphism spaces


def assemble_h_type(module: CliffordModule, a: int, b: int) -> EndomorphismSpace:
    """Block-diagonal space ``J_a = diag(j_a x a, -j_a x b)``.

    A perturbed module yields a space tagged ``"perturbed"`` assembled by the
    same sign pattern.
    """
    if a < 0 or b < 0 or a + b < 1:
        raise ValueError("need nonnegative a, b with a + b >= 1")
    r = module.r
    k = r * (a + b)
    dtype = np.asarray(module.generators).dtype
    gens = np.zeros((module.l, k, k), dtype=dtype)
    for alpha in range(module.l):
        j = module.generators[alpha]
        for blk in range(a + b):
            sgn = 1 if blk < a else -1
            gens[alpha, blk * r:(blk + 1) * r, blk * r:(blk + 1) * r] = sgn * j
    tag = "perturbed" if module.perturbed else "h-type"
    name = f"H({a},{b},{module.l})"
    if module.perturbed:
        name += f"[eps={module.epsilon!r},seed={module.seed}]"
    return EndomorphismSpace(gens, tag=tag, a=a, b=b, r=r, name=name)


def j_of(space: EndomorphismSpace, Z) -> np.ndarray:
    """``J_Z = sum_a Z_a J_a``; ``Z`` may carry leading batch axes."""
    Z = np.asarray(Z, dtype=float)
    if Z.shape[-1] != space.l:
        raise ValueError(f"Z must have length {space.l}")
    return np.einsum("...a,aij->...ij", Z, space.generators)


def bracket(space: EndomorphismSpace, X, Y) -> np.ndarray:
    """Components ``<J_a X, Y>`` of ``[X, Y]``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[-1] != space.k or Y.shape[-1] != space.k:
        raise ValueError(f"X and Y must have length {space.k}")
    return np.einsum("aij,...j,...i->...a", space.generators, X, Y)


def sigma_from_partition(space: EndomorphismSpace) -> SigmaInvolution:
    """``sigma = diag(+I on v^(a), -I on v^(b))``."""
    if not space.has_partition():
        raise ValueError("space carries no (a, b) partition")
    d = np.concatenate([np.ones(space.k_a), -np.ones(space.k_b)])
    return SigmaInvolution(np.diag(d), k_a=space.k_a, k_b=space.k_b)


def sigma_deform(space: EndomorphismSpace, sigma: SigmaInvolution) -> EndomorphismSpace:
    """Space with generators ``sigma J_a``; ``sigma`` must commute with all ``J_a``."""
    s = np.asarray(sigma.matrix)
    if s.shape != (space.k, space.k):
        raise ValueError("sigma has the wrong size")
    g = np.asarray(space.generators)
    comm = np.einsum("ij,ajk->aik", s, g) - np.einsum("aij,jk->aik", g, s)
    if np.max(np.abs(comm)) > 1e-12:
        raise ValueError("invalid deformation: sigma does not commute with the generators")
    if np.array_equal(s, np.round(s)) and np.issubdtype(g.dtype, np.integer):
        new = np.einsum("ij,ajk->aik", s.astype(np.int64), g)
    else:
        new = np.einsum("ij,ajk->aik", s, g)
    a = b = None
    if space.has_partition() and sigma.k_a is not None:
        # the deformed space is again block structured with all blocks in v^(a)
        a, b = space.a, space.b
    return EndomorphismSpace(new, tag="sigma-deformed", a=a, b=b, r=space.r,
                             name=f"sigma*{space.name}")


# ---------------------------------------------------------------------------
# Normalized endomorphisms


def normalized_endomorphism(space: EndomorphismSpace, V) -> NormalizedEndomorphism:
    """Eigen-decompose ``-J_V^2`` and return ``J~_V``.

    On each eigenspace with eigenvalue ``lambda^2 > 0`` the map is
    ``J_V / lambda``; eigenvalues below ``KERNEL_THRESHOLD * max`` count as
    kernel, where ``J~_V`` vanishes.
    """
    V = np.asarray(V, dtype=float)
    if V.shape != (space.l,):
        raise ValueError(f"V must have length {space.l}")
    if not np.any(V):
        raise ValueError("V must be nonzero")
    J = j_of(space, V)
    w, U = np.linalg.eigh(-J @ J)
    w = np.clip(w, 0.0, None)
    ker = w < KERNEL_THRESHOLD * w.max()
    lam = np.sqrt(w)
    inv = np.where(ker, 0.0, 1.0 / np.where(ker, 1.0, lam))
    Jt = J @ (U * inv) @ U.T
    return NormalizedEndomorphism(V=V, lambdas=lam, basis=U, matrix=Jt, kernel_dim=int(ker.sum()))


def normalized_endomorphisms(space: EndomorphismSpace, V_u: np.ndarray) -> np.ndarray:
    """Batched ``J~_V`` for an array of directions, shape ``(N, k, k)``."""
    V_u = np.atleast_2d(np.asarray(V_u, dtype=float))
    J = j_of(space, V_u)
    if space.h_type:
        return J / np.linalg.norm(V_u, axis=1)[:, None, None]
    w, U = np.linalg.eigh(-J @ J)
    w = np.clip(w, 0.0, None)
    ker = w < KERNEL_THRESHOLD * w.max(axis=1, keepdims=True)
    inv = np.where(ker, 0.0, 1.0 / np.sqrt(np.where(ker, 1.0, w)))
    return J @ np.einsum("nij,nj,nkj->nik", U, inv, U)


# ---------------------------------------------------------------------------
# Ricci H-function


def ricci_h(space: EndomorphismSpace, X, Xs, Z, Zs) -> float:
    """``H(X, X*, Z, Z*) = <J_Z X, J_{Z*} X*>``."""
    return float(np.dot(j_of(space, Z) @ np.asarray(X, float), j_of(space, Zs) @ np.asarray(Xs, float)))


def ricci_xx(space: EndomorphismSpace, X, Xs) -> float:
    """``R(X, X*) = -1/2 sum_a H(X, X*, e_a, e_a)``."""
    X = np.asarray(X, float)
    Xs = np.asarray(Xs, float)
    g = np.asarray(space.generators, float)
    return float(-0.5 * np.einsum("aij,j,aik,k->", g, X, g, Xs))


def ricci_zz(space: EndomorphismSpace, Z, Zs) -> float:
    """``R(Z, Z*) = 1/4 sum_i H(E_i, E_i, Z, Z*)``."""
    return float(0.25 * np.trace(j_of(space, Z).T @ j_of(space, Zs)))


def ricci_xz(space: EndomorphismSpace, X, Z) -> float:
    """Mixed Ricci curvature, identically zero."""
    return 0.0


# ---------------------------------------------------------------------------
# JSON


def space_to_json(space: EndomorphismSpace) -> str:
    g = np.asarray(space.generators)
    gens = g.tolist()
    doc = {"l": space.l, "k": space.k, "tag": space.tag, "name": space.name,
           "a": space.a, "b": space.b, "r": space.r, "generators": gens}
    return json.dumps(doc, sort_keys=True)


def space_from_json(text: str) -> EndomorphismSpace:
    doc = json.loads(text)
    g = np.array(doc["generators"])
    if g.shape != (doc["l"], doc["k"], doc["k"]):
        raise ValueError("generator array does not match (l, k)")
    return EndomorphismSpace(g, tag=doc["tag"], a=doc.get("a"), b=doc.get("b"),
                             r=doc.get("r"), name=doc.get("name", ""))
