"""Named verification suites.

Every suite maps a :class:`~nilspec.config.RunConfig` to a list of row
dictionaries ``{check, sample, lhs, rhs, residual, verdict, ...}``.  Suites are
pure functions of the configuration, so identical configurations produce
identical rows.
"""
from __future__ import annotations

import itertools
from typing import Callable

import numpy as np
import sympy

from .algebra import (EndomorphismSpace, assemble_h_type, build_irreducible_clifford, j_of,
                      perturb_clifford, sigma_deform, sigma_from_partition)
from .config import GroupSpec, RunConfig
from .funcspace import (PoleBasis, changing_basis, constant_basis, make_one_pole, make_plain,
                        make_two_pole, standard_profile)
from .intertwine import (DomainShape, KappaOperator, MultipliedFunction, RejectedInput,
                         boundary_laplacian_check, boundary_samples, circle_samples,
                         dirichlet_check, identity_check_second_radial, identity_check_z_neumann,
                         independence_rank_test, neumann_check, parity_decompose,
                         relative_residuals, sample_points, verify_intertwines_laplacian,
                         z_neumann_check, z_neumann_twisted, KAPPA_SIGNS)
from .operators import (apply_D_V_symbolic, apply_M, apply_delta_X, delta_Z_fd, harmonic_projection,
                        integrand_M, integrand_delta_Z, theta_eigen_sign)
from .polyexpr import PolyExpr, theta_poly
from .quadrature import get_preset

__all__ = ["SUITE_FUNCTIONS", "run_suite", "build_space", "sigma_pair", "row"]


# ---------------------------------------------------------------------------
# helpers


def build_space(g: GroupSpec) -> EndomorphismSpace:
    m = build_irreducible_clifford(g.l)
    if g.epsilon > 0:
        m = perturb_clifford(m, g.epsilon, g.seed)
    return assemble_h_type(m, g.a, g.b)


def sigma_pair(g: GroupSpec):
    s = build_space(g)
    return s, sigma_deform(s, sigma_from_partition(s))


def _num(x):
    if isinstance(x, (complex, np.complexfloating)):
        return [float(np.real(x)), float(np.imag(x))]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def row(check: str, sample, lhs, rhs, residual, verdict: bool, **extra) -> dict:
    out = {"check": check, "sample": sample, "lhs": _num(lhs), "rhs": _num(rhs),
           "residual": float(residual), "verdict": bool(verdict)}
    out.update({k: _num(v) for k, v in extra.items()})
    return out


def _sample_rows(check: str, lhs, rhs, res, tol: float, **extra) -> list:
    return [row(check, i, complex(a), complex(b), r, r <= tol, **extra)
            for i, (a, b, r) in enumerate(zip(lhs, rhs, res))]


def _pole(space: EndomorphismSpace, which: str) -> np.ndarray:
    Q = np.zeros(space.k)
    if which == "a":
        Q[0] = 1.0
    elif which == "b":
        Q[space.k_a] = 1.0
    else:
        Q[0] = 1.0
        if space.k_b:
            Q[space.k_a] = 0.7
    return Q


def _htype_groups(cfg: RunConfig):
    return [g for g in cfg.groups if g.epsilon == 0 and g.b > 0]


def _pert_groups(cfg: RunConfig):
    return [g for g in cfg.groups if g.epsilon > 0 and g.b > 0]


# ---------------------------------------------------------------------------
# suites


def suite_clifford(cfg: RunConfig) -> list:
    """Anticommutation identities in integer arithmetic."""
    rows = []
    for l in sorted({1, 2, 3, 7} | {g.l for g in cfg.groups}):
        m = build_irreducible_clifford(l)
        g = np.asarray(m.generators)
        if not np.issubdtype(g.dtype, np.integer):
            rows.append(row("clifford", l, None, 0, np.inf, False, note="non-integer generators"))
            continue
        g = g.astype(np.int64)
        eye = np.eye(m.r, dtype=np.int64)
        worst = 0
        for a, b in itertools.product(range(l), repeat=2):
            d = g[a] @ g[b] + g[b] @ g[a] + (2 * eye if a == b else 0)
            worst = max(worst, int(np.max(np.abs(d))))
        rows.append(row("clifford", l, worst, 0, worst, worst <= cfg.tolerances["clifford"], r=m.r))
    return rows


def _rational_direction(l: int, which: int):
    """Integer vectors with integer norm."""
    pyth = [(3, 4, 0), (0, 3, 4), (2, 3, 6), (1, 2, 2)]
    if l == 1:
        return [2]
    if l == 2:
        return [3, 4] if which % 2 == 0 else [4, -3]
    v = [0] * l
    t = pyth[which % len(pyth)]
    for i, x in enumerate(t):
        v[(i + which) % l] = x
    return v


def suite_theta_eigen(cfg: RunConfig, max_degree: int = 6) -> list:
    """Exact ``D_V (Theta^p conj^q) = s i (q - p)|V| Theta^p conj^q`` for ``p + q <= max_degree``."""
    rows = []
    for g in _htype_groups(cfg):
        space = build_space(g)
        G = np.asarray(space.generators)
        Qi = [0] * space.k
        Qi[0] = 1
        if space.k_b:
            Qi[space.k_a] = 2
        s = theta_eigen_sign(space, Qi, _rational_direction(space.l, 0))
        rows.append(row("theta-sign-oracle", g.name, s, s, 0.0, s in (1, -1)))
        for vi in range(2):
            V = _rational_direction(space.l, vi)
            nv = sympy.sqrt(sum(v * v for v in V))
            J = sum((V[a] * sympy.Matrix(G[a].tolist()) for a in range(space.l)), sympy.zeros(space.k))
            JQ = list((J / nv) * sympy.Matrix(Qi))
            th = theta_poly(Qi, JQ)
            thb = theta_poly(Qi, JQ, conj=True)
            Jn = np.array(J.tolist(), dtype=object)
            for n in range(1, max_degree + 1):
                for p in range(n + 1):
                    q = n - p
                    P = th ** p * thb ** q
                    lhs = apply_D_V_symbolic(P, Jn)
                    rhs = P * (s * sympy.I * (q - p) * nv)
                    ok = lhs == rhs
                    rows.append(row("theta-eigen", f"{g.name}:V{vi}:p{p}q{q}", int(ok), 1,
                                    0.0 if ok else 1.0, ok))
    return rows


def suite_projection(cfg: RunConfig, max_degree: int = 6, ks=(2, 4, 8), n_terms: int = 4) -> list:
    """``Delta_X Pi^(n) p = 0`` exactly for seeded integer homogeneous ``p``."""
    rows = []
    rng = np.random.default_rng(cfg.seed)
    for k in ks:
        for n in range(max_degree + 1):
            terms = {}
            for _ in range(n_terms):
                e = np.bincount(rng.integers(0, k, n), minlength=k) if n else np.zeros(k, int)
                terms[tuple(int(x) for x in e)] = int(rng.integers(1, 6)) * int(rng.choice([-1, 1]))
            p = PolyExpr.from_dict(k, terms)
            h = harmonic_projection(p)
            ok = apply_delta_X(h).is_zero()
            rows.append(row("projection", f"k{k}:n{n}", int(ok), 1, 0.0 if ok else 1.0, ok))
    return rows


def suite_identities(cfg: RunConfig) -> list:
    """``M F(phi) = F((q - p)|V| phi)`` and ``Delta_Z F(phi) = F(-|V|^2 phi)`` on a sigma-pair."""
    rows = []
    tol = cfg.tolerances["identities"]
    quad = get_preset(cfg.quad_preset)
    for g in _htype_groups(cfg):
        s, t = sigma_pair(g)
        cb = constant_basis(s)
        X, Z = sample_points(s.k, s.l, cfg.samples, cfg.seed)
        for pq in [(1, 0), (2, 1), (0, 2)]:
            f = make_one_pole(s, cb, _pole(s, "mixed"), *pq, standard_profile(), quad=quad)
            for side, space, fun, mf, zf in (
                    ("source", s, f, integrand_M(f), integrand_delta_Z(f)),
                    ("target", t, f.rebind(t), integrand_M(f).rebind(t), integrand_delta_Z(f).rebind(t))):
                lhs = apply_M(fun, space, X, Z, cfg.step)
                rhs = mf(X, Z)
                rows += _sample_rows("identity-M", lhs, rhs, relative_residuals(lhs, rhs), tol,
                                     group=g.name, side=side, pq=list(pq))
                lhs = delta_Z_fd(fun, X, Z, cfg.step)
                rhs = zf(X, Z)
                rows += _sample_rows("identity-delta-Z", lhs, rhs, relative_residuals(lhs, rhs), tol,
                                     group=g.name, side=side, pq=list(pq))
    return rows


def suite_intertwine_laplacian(cfg: RunConfig) -> list:
    """``Delta'(kappa f) = kappa(Delta f)`` on sigma-pairs and perturbed pairs."""
    rows = []
    tol = cfg.tolerances["intertwine-laplacian"]
    quad = get_preset(cfg.quad_preset)
    for g in _htype_groups(cfg):
        s, t = sigma_pair(g)
        cb = constant_basis(s)
        op = KappaOperator(s, t, cb)
        X, Z = sample_points(s.k, s.l, cfg.samples, cfg.seed)
        funcs = [make_one_pole(s, cb, _pole(s, "mixed"), 1, 1, standard_profile(), quad=quad,
                               label="one-pole(1,1)"),
                 make_one_pole(s, cb, _pole(s, "b"), 2, 0, standard_profile(), quad=quad,
                               label="one-pole-b(2,0)"),
                 make_two_pole(s, cb, _pole(s, "a"), _pole(s, "b"), (1, 0, 0, 1), standard_profile(),
                               quad=quad, label="two-pole(1,0,0,1)")]
        for f in funcs:
            rows += _kappa_rows(op, f, X, Z, tol, cfg.step, g.name)
        if cfg.basis_mode == "changing":
            rows += _kappa_rows(KappaOperator(s, t, None), _changing_plain(s, quad), X, Z, tol,
                                cfg.step, g.name)
    for g in _pert_groups(cfg):
        s, t = sigma_pair(g)
        op = KappaOperator(s, t, None)
        X, Z = sample_points(s.k, s.l, cfg.samples, cfg.seed)
        rows += _kappa_rows(op, _changing_plain(s, quad), X, Z, tol, cfg.step, g.name)
    return rows


def _changing_plain(space, quad):
    ch = changing_basis(space)
    ex = [(0, 0)] * ch.n_slots
    ex[0] = (1, 0)
    ex[-1] = (1, 1)
    return make_plain(space, ch, ex, standard_profile(), quad=quad, label="changing-plain")


def _kappa_rows(op, f, X, Z, tol, h, group):
    r = verify_intertwines_laplacian(op, f, X, Z, tol, h)
    res = np.maximum(r["residual"], r["source_residual"])
    return _sample_rows("intertwine-laplacian", r["lhs"], r["rhs"], res, tol, group=group,
                        function=f.label, target=op.target.name)


def suite_parity(cfg: RunConfig) -> list:
    """Exact fourfold split and symbolic kappa signs; numeric cross-check of the signs."""
    rows = []
    quad = get_preset(cfg.quad_preset)
    for g in [g for g in cfg.groups if g.b > 0]:
        s, t = sigma_pair(g)
        cb = constant_basis(s) if g.epsilon == 0 else PoleBasis("constant", vectors=np.eye(s.k))
        X, Z = sample_points(s.k, s.l, 4, cfg.seed)
        funcs = [make_one_pole(s, cb, _pole(s, "a"), 1, 0, standard_profile(), quad=quad, label="a(1,0)"),
                 make_one_pole(s, cb, _pole(s, "mixed"), 2, 1, standard_profile(), quad=quad,
                               label="mixed(2,1)"),
                 make_one_pole(s, cb, _pole(s, "b"), 1, 1, standard_profile(), quad=quad, label="b(1,1)"),
                 make_two_pole(s, cb, _pole(s, "a"), _pole(s, "b"), (1, 1, 1, 0), standard_profile(),
                               quad=quad, label="two-pole(1,1,1,0)")]
        for f in funcs:
            d = parity_decompose(f)
            ok = d.reconstruction_exact and d.kappa_signs_exact
            rows.append(row("parity-symbolic", f"{g.name}:{f.label}", int(ok), 1, 0.0 if ok else 1.0,
                            ok, signs={str(k): v for k, v in d.kappa_signs.items()},
                            nonzero=[str(k) for k, v in d.polys.items() if v]))
            kf = f.rebind(t)(X, Z)
            signed = sum(KAPPA_SIGNS[k] * p(X, Z) for k, p in d.parts.items())
            res = relative_residuals(signed, kf)
            rows += _sample_rows("parity-kappa-numeric", signed, kf, res, 1e-10, group=g.name,
                                 function=f.label)
    return rows


def _parity_families(space, n, rng, quad, n_poles=3):
    basis = PoleBasis("constant", vectors=np.eye(space.k))
    ev, od = [], []
    for _ in range(n_poles):
        Q = rng.standard_normal(space.k)
        for p in range(n + 1):
            d = parity_decompose(make_one_pole(space, basis, Q, p, n - p, standard_profile(), quad=quad))
            for tag, part in d.parts.items():
                if d.polys[tag]:
                    (ev if tag.j == "evn" else od).append(part)
    return ev, od


def suite_independence(cfg: RunConfig, degrees=(2, 3, 4)) -> list:
    """Rank additivity of the evn_J and odd_J families with a negative control."""
    rows = []
    thr = cfg.tolerances["independence"]
    quad = get_preset("l3-coarse")
    spaces = []
    for g in [g for g in cfg.groups if g.l == 3 and g.b > 0]:
        s, t = sigma_pair(g)
        spaces += [(g.name, s), (g.name + "/sigma", t)]
    for name, s in spaces:
        rng = np.random.default_rng(cfg.seed + 3)
        X = circle_samples(s.k, 1.0, 3, 8, cfg.seed + 5)
        Z = np.random.default_rng(cfg.seed + 9).standard_normal((4, s.l))
        Z *= 1.5 / np.linalg.norm(Z, axis=1)[:, None]
        for n in degrees:
            ev, od = _parity_families(s, n, rng, quad)
            r = independence_rank_test({"evn": ev, "odd": od}, X, Z, thr, control=True)
            ok = r["additive"] and not r["control"]["additive"]
            rows.append(row("independence", f"{name}:n{n}", r["joint_rank"], r["sum_of_ranks"],
                            abs(r["joint_rank"] - r["sum_of_ranks"]), ok, ranks=r["ranks"],
                            control_joint=r["control"]["joint_rank"],
                            control_sum=sum(r["control"]["ranks"].values())))
    return rows


# boundary corpora ----------------------------------------------------------

BALL = DomainShape("ball", 2.0, (1.5, 0.0, -0.2))
SPHERE_BALL = DomainShape("sphere-ball", 1.2, (1.5,))


def _cutoff_corpus(space, quad):
    """Ten functions: five one-pole bases times ``m`` and ``m^2``, ``m = |Z|^2 - R_Z(|X|)^2``."""
    cb = constant_basis(space)
    specs = [("a", 1, 0), ("b", 0, 1), ("mixed", 1, 1), ("mixed", 2, 0), ("b", 2, 1)]
    bases = [make_one_pole(space, cb, _pole(space, w), p, q, standard_profile(), quad=quad,
                           label=f"{w}({p},{q})") for w, p, q in specs]

    def m1(X, Z):
        return np.sum(Z * Z, axis=1) - BALL.R_Z(np.linalg.norm(X, axis=1)) ** 2

    def m2(X, Z):
        return m1(X, Z) ** 2

    out = []
    for mult, tag in ((m1, "m"), (m2, "m^2")):
        out += [(MultipliedFunction(b, mult, f"{tag}*{b.label}"), b, mult) for b in bases]
    return out


def _paired_rows(check, corpus, t, X, Z, fn, tol, group):
    rows = []
    for mf, base, mult in corpus:
        kf = MultipliedFunction(base.rebind(t), mult, mf.label)
        a = fn(mf, X, Z, tol)
        b = fn(kf, X, Z, tol)
        agree = a["verdict"] == b["verdict"]
        rows.append(row(check, f"{group}:{mf.label}", a["max_abs"], b["max_abs"],
                        0.0 if agree else 1.0, agree,
                        verdict_f=a["verdict"], verdict_kf=b["verdict"]))
    return rows


def suite_dirichlet(cfg: RunConfig) -> list:
    rows = []
    tol = cfg.tolerances["dirichlet"]
    quad = get_preset(cfg.quad_preset)
    for g in _htype_groups(cfg):
        s, t = sigma_pair(g)
        X, Z = boundary_samples(BALL, s.k, s.l, cfg.samples, cfg.seed)
        corpus = _cutoff_corpus(s, quad)
        rows += _paired_rows("dirichlet-paired", corpus, t, X, Z,
                             lambda f, X, Z, tol: dirichlet_check(f, X, Z, tol), tol, g.name)
        base = corpus[0][1]
        c = dirichlet_check(base, X, Z, tol)
        rows.append(row("dirichlet-control", f"{g.name}:{base.label}", c["max_abs"], tol,
                        c["max_abs"], not c["verdict"], note="generic function must fail"))
    return rows


def suite_z_neumann(cfg: RunConfig) -> list:
    rows = []
    tol = cfg.tolerances["z-neumann"]
    quad = get_preset(cfg.quad_preset)
    for g in _htype_groups(cfg):
        s, t = sigma_pair(g)
        X, Z = boundary_samples(BALL, s.k, s.l, cfg.samples, cfg.seed)
        corpus = _cutoff_corpus(s, quad)
        rows += _paired_rows("z-neumann-paired", corpus, t, X, Z,
                             lambda f, X, Z, tol: z_neumann_check(f, X, Z, tol, cfg.step), tol, g.name)
        Xi, Zi = sample_points(s.k, s.l, 10, cfg.seed + 1)
        Zi = Zi * 1.3
        for space, lab in ((s, "source"), (t, "target")):
            f = make_one_pole(s, constant_basis(s), _pole(s, "mixed"), 1, 1, standard_profile(),
                              quad=quad).rebind(space)
            r = identity_check_z_neumann(f, Xi, Zi, cfg.step)
            ok = r["selected"] == "-1/|Z|" and r["max_residual"] <= cfg.tolerances["z-neumann-identity"]
            rows.append(row("z-neumann-identity", f"{g.name}:{lab}", r["max_residual"], 0.0,
                            r["max_residual"], ok, selected=r["selected"], candidates=r["residuals"]))
    return rows


def suite_neumann(cfg: RunConfig) -> list:
    rows = []
    tol = cfg.tolerances["neumann-span"]
    quad = get_preset(cfg.quad_preset)
    for g in [g for g in cfg.groups if g.epsilon == 0]:
        s = build_space(g)
        X, Z = boundary_samples(BALL, s.k, s.l, 50, cfg.seed)
        f = make_one_pole(s, constant_basis(s), _pole(s, "a"), 1, 0, standard_profile(), quad=quad)
        r = neumann_check(s, BALL, X[:5], Z[:5], f, tol)
        full = neumann_check(s, BALL, X, Z, None, tol)
        for i, rw in enumerate(full["rows"]):
            extra = {}
            if i < 5:
                extra["normal_derivative"] = r["rows"][i]["normal_derivative"]
            rows.append(row("neumann-span", f"{g.name}:{i}", rw["span_residual"], 0.0,
                            rw["span_residual"], rw["span_residual"] <= tol,
                            coefficients=[float(c) for c in rw["coefficients"]], **extra))
    return rows


def suite_boundary(cfg: RunConfig) -> list:
    rows = []
    tol = cfg.tolerances["boundary-laplacian"]
    quad = get_preset(cfg.quad_preset)
    for g in _htype_groups(cfg):
        s, t = sigma_pair(g)
        cb = constant_basis(s)
        Q = _pole(s, "mixed")
        Xi, Zi = sample_points(s.k, s.l, 10, cfg.seed + 1)
        Zi = Zi * 1.3
        f = make_one_pole(s, cb, Q, 1, 1, standard_profile(), quad=quad)
        for space, lab in ((s, "source"), (t, "target")):
            r = identity_check_second_radial(f.rebind(space), Xi, Zi)
            ok = r["selected"] == "l(l+1)" and r["max_residual"] <= cfg.tolerances["second-radial-identity"]
            rows.append(row("second-radial-identity", f"{g.name}:{lab}", r["max_residual"], 0.0,
                            r["max_residual"], ok, selected=r["selected"], candidates=r["residuals"]))
        X, Z = boundary_samples(SPHERE_BALL, s.k, s.l, 10, cfg.seed)
        Zb = Z * 0.6
        for pq in [(1, 0), (1, 1)]:
            fb = make_one_pole(s, cb, Q, *pq, standard_profile(), quad=quad)
            r = boundary_laplacian_check(s, t, Q, fb, X, Zb, "sphere-ball", tol, h=cfg.step)
            rows += _sample_rows("boundary-laplacian-sphere-ball", r["lhs"], r["rhs"], r["residual"], tol,
                                 group=g.name, pq=list(pq))
        R_Z = SPHERE_BALL.coeffs[0]
        for pq in [(1, 0), (1, 1)]:
            fz = z_neumann_twisted(s, cb, Q, *pq, R_Z, SPHERE_BALL.R_X, seed=cfg.seed, quad=quad)
            zs = z_neumann_check(fz.rebind(t), X, Z, cfg.tolerances["z-neumann"], cfg.step)
            rows.append(row("z-neumann-kappa", f"{g.name}:{pq}", zs["max_abs"], 0.0, zs["max_abs"],
                            zs["verdict"]))
            r = boundary_laplacian_check(s, t, Q, fz, X, Z, "sphere-sphere", tol,
                                         cfg.tolerances["z-neumann"], cfg.step)
            rows += _sample_rows("boundary-laplacian-sphere-sphere", r["lhs"], r["rhs"], r["residual"],
                                 tol, group=g.name, pq=list(pq))
        try:
            boundary_laplacian_check(s, t, Q, f, X, Z, "sphere-sphere", tol,
                                     cfg.tolerances["z-neumann"], cfg.step)
            rejected = False
        except RejectedInput:
            rejected = True
        rows.append(row("boundary-precondition", f"{g.name}:no-z-neumann", int(rejected), 1,
                        0.0 if rejected else 1.0, rejected))
    return rows


SUITE_FUNCTIONS: dict = {
    "clifford": suite_clifford,
    "theta-eigen": suite_theta_eigen,
    "projection": suite_projection,
    "identities": suite_identities,
    "intertwine-laplacian": suite_intertwine_laplacian,
    "parity": suite_parity,
    "independence": suite_independence,
    "dirichlet": suite_dirichlet,
    "z-neumann": suite_z_neumann,
    "neumann": suite_neumann,
    "boundary": suite_boundary,
}


def run_suite(name: str, cfg: RunConfig) -> list:
    if name not in SUITE_FUNCTIONS:
        raise KeyError(f"unknown suite {name!r}")
    return SUITE_FUNCTIONS[name](cfg)
