"""Command line driver.

Examples
--------
::

    nilspec group build --out out/groups
    nilspec verify --suite clifford --out out/clifford
    nilspec spectrum compare --pair "H(1,1,3):H(2,0,3)" --gamma e1 --level 6
    nilspec radon invert-odd --out out/radon

Exit codes: 0 all verdicts pass, 1 a verification failed, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Optional

import numpy as np

from . import __version__
from .algebra import (assemble_h_type, build_irreducible_clifford, j_of, perturb_clifford,
                      space_to_json)
from .config import (SUITES, ConfigError, GroupSpec, RunConfig, apply_overrides, default_config,
                     load_config)
from .reports import dumps, write_reports
from .spectra import (InvalidComparison, NoConjugator, box_spectrum, compare_spectra,
                      find_conjugator, torus_bundle_spectrum)
from .suites import build_space, row, run_suite, sigma_pair

__all__ = ["main", "build_parser", "parse_space", "parse_gamma"]

_SPACE_RE = re.compile(r"^H\((\d+),(\d+),(\d+)\)(?:\[eps=([0-9.eE+-]+),seed=(\d+)\])?$")


class UsageError(ValueError):
    pass


def parse_space(text: str, cfg: RunConfig):
    """``H(a,b,l)``, ``H(a,b,l)[eps=E,seed=S]`` or the name of a configured group."""
    text = text.strip().replace(" ", "")
    for g in cfg.groups:
        if g.name == text:
            return build_space(g)
    m = _SPACE_RE.match(text)
    if not m:
        raise UsageError(f"cannot parse space {text!r}; expected H(a,b,l) or a group name")
    a, b, l = (int(m.group(i)) for i in (1, 2, 3))
    if a + b == 0:
        raise UsageError("a + b = 0 gives an empty X-space")
    mod = build_irreducible_clifford(l)
    if m.group(4) is not None:
        mod = perturb_clifford(mod, float(m.group(4)), int(m.group(5)))
    return assemble_h_type(mod, a, b)


def parse_gamma(text: str, l: int, rng: np.random.Generator) -> np.ndarray:
    """``e1``, ``e1+e2``, ``random`` or comma-separated components."""
    text = text.strip()
    if text == "random":
        return rng.standard_normal(l)
    if re.fullmatch(r"e\d+(\+e\d+)*", text):
        g = np.zeros(l)
        for part in text.split("+"):
            i = int(part[1:]) - 1
            if not 0 <= i < l:
                raise UsageError(f"gamma {text!r}: index out of range for l = {l}")
            g[i] += 1.0
        return g
    try:
        g = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise UsageError(f"cannot parse gamma {text!r}") from None
    if g.shape != (l,):
        raise UsageError(f"gamma {text!r} must have {l} components")
    return g


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="INI or JSON run configuration")
    p.add_argument("--out", default="nilspec-out", help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--parallel", type=int, default=1, help="worker processes for independent checks")
    p.add_argument("--tol-override", action="append", default=[], metavar="KEY=VAL")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    p = argparse.ArgumentParser(prog="nilspec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("group", help="construct endomorphism spaces")
    gs = g.add_subparsers(dest="action", required=True)
    gs.add_parser("build", parents=[common], help="serialize configured spaces and sigma-deformations")

    v = sub.add_parser("verify", parents=[common], help="run verification suites")
    v.add_argument("--suite", action="append", default=[],
                   help=f"one of {', '.join(SUITES)} or 'all' (repeatable, comma separated)")

    s = sub.add_parser("spectrum", help="Box_gamma spectra")
    ss = s.add_subparsers(dest="mode", required=True)
    for mode in ("box", "compare", "torus"):
        m = ss.add_parser(mode, parents=[common])
        if mode == "box":
            m.add_argument("--space", default=None)
        else:
            m.add_argument("--pair", default=None, help="A:B, e.g. H(1,1,3):H(2,0,3)")
        m.add_argument("--gamma", action="append", default=[], help="e1 | e1+e2 | random | x,y,z")
        m.add_argument("--level", type=int, default=None)
        if mode == "torus":
            m.add_argument("--radius", type=float, default=1.5)
            m.add_argument("--lattice-scale", type=float, default=1.0)

    r = sub.add_parser("radon", help="dual Radon transform checks")
    rs = r.add_subparsers(dest="mode", required=True)
    for mode in ("dual", "pairing", "invert-odd", "invert-even", "tube-limit"):
        rs.add_parser(mode, parents=[common])
    return p


# ---------------------------------------------------------------------------
# commands


def cmd_group_build(cfg: RunConfig, args) -> int:
    import json

    docs, rows = [], []
    for g in cfg.groups:
        s, t = sigma_pair(g) if g.b > 0 else (build_space(g), None)
        docs.append({"group": g.name, "space": json.loads(space_to_json(s)),
                     "sigma_deformed": json.loads(space_to_json(t)) if t is not None else None})
        rows.append(row("group-build", g.name, s.k, s.l, 0.0, True, h_type=s.h_type, name=s.name))
    ok = write_reports(args.out, cfg, "group-build", rows)
    (__import__("pathlib").Path(args.out) / "groups.json").write_text(dumps(docs, indent=2) + "\n")
    return 0 if ok else 1


def _suite_list(args, cfg: RunConfig) -> list:
    names = []
    for item in args.suite:
        names += [x.strip() for x in item.split(",") if x.strip()]
    if not names:
        return list(cfg.suites)
    if "all" in names:
        return list(SUITES)
    for n in names:
        if n not in SUITES:
            raise UsageError(f"unknown suite {n!r}")
    return names


def _run_named(args_tuple):
    name, cfg = args_tuple
    return run_suite(name, cfg)


def cmd_verify(cfg: RunConfig, args) -> int:
    names = _suite_list(args, cfg)
    cfg = replace(cfg, suites=tuple(names))
    jobs = [(n, cfg) for n in names]
    if args.parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as ex:
            results = list(ex.map(_run_named, jobs))
    else:
        results = [_run_named(j) for j in jobs]
    rows = [dict(r, suite=n) for n, rs in zip(names, results) for r in rs]
    ok = write_reports(args.out, cfg, ",".join(names), rows)
    return 0 if ok else 1


def _gammas(args, cfg: RunConfig, l: int) -> list:
    rng = np.random.default_rng(cfg.seed)
    specs = args.gamma or list(cfg.spectrum["gammas"])
    return [(sp, parse_gamma(sp, l, rng)) for sp in specs]


def _pair(args, cfg: RunConfig):
    text = args.pair or cfg.spectrum["pair"]
    if ":" not in text:
        raise UsageError("--pair must look like A:B")
    a, b = text.split(":", 1)
    return parse_space(a, cfg), parse_space(b, cfg)


def cmd_spectrum(cfg: RunConfig, args) -> int:
    level = args.level if args.level is not None else int(cfg.spectrum["level"])
    tol = cfg.tolerances["spectrum"]
    rows, csvs, extra = [], {}, {}
    if args.mode == "box":
        space = parse_space(args.space, cfg) if args.space else build_space(cfg.groups[0])
        lines = ["gamma_index,block,eigenvalue,multiplicity"]
        for gi, (lab, g) in enumerate(_gammas(args, cfg, space.l)):
            rep = box_spectrum(space, g, level)
            herm = max(float(np.max(np.abs(B - B.conj().T))) for B in _blocks(space, g, level))
            rows.append(row("box-hermitian", f"{space.name}:{lab}", herm, 0.0, herm, herm <= 1e-10,
                            n_eigenvalues=len(rep.eigenvalues)))
            lines += [f"{gi},{ln.split(',', 1)[1]}" for ln in rep.to_csv().splitlines()[1:]]
            extra.setdefault("spectra", []).append(rep.to_dict())
        csvs["spectrum.csv"] = "\n".join(lines) + "\n"
    elif args.mode == "compare":
        A, B = _pair(args, cfg)
        try:
            for gi, (lab, g) in enumerate(_gammas(args, cfg, A.l)):
                ra, rb = box_spectrum(A, g, level), box_spectrum(B, g, level)
                v = compare_spectra(ra, rb, tol)
                rows.append(row("spectrum-compare", f"{lab}", v.max_residual, 0.0, v.max_residual,
                                v.verdict, pair=[A.name, B.name], n_eigenvalues=len(ra.eigenvalues)))
                try:
                    T = find_conjugator(j_of(A, g), j_of(B, g))
                    res = float(np.max(np.abs(T @ j_of(A, g) @ T.T - j_of(B, g))))
                    rows.append(row("conjugator", f"{lab}", res, 0.0, res, res <= 1e-10))
                except NoConjugator as e:
                    rows.append(row("conjugator", f"{lab}", None, 0.0, float("inf"), False, note=str(e)))
                if gi == 0:
                    csvs["spectrum.csv"] = ra.to_csv()
        except InvalidComparison as e:
            raise UsageError(f"invalid comparison: {e}") from None
    else:
        A, B = _pair(args, cfg)
        L = args.lattice_scale * np.eye(A.l)
        ra = torus_bundle_spectrum(A, L, level, args.radius)
        rb = torus_bundle_spectrum(B, L, level, args.radius)
        v = compare_spectra(ra, rb, tol)
        rows.append(row("torus-compare", f"radius={args.radius!r}", v.max_residual, 0.0, v.max_residual,
                        v.verdict, pair=[A.name, B.name], n_components=len(ra.gamma)))
        csvs["spectrum.csv"] = ra.to_csv()
        extra["notes"] = list(ra.notes)
    ok = write_reports(args.out, cfg, f"spectrum-{args.mode}", rows, extra, csvs)
    return 0 if ok else 1


def _blocks(space, g, level):
    from .operators import HermiteBasisSpec, box_matrix
    return box_matrix(space, g, HermiteBasisSpec.for_gamma(g, level, space.k))


def cmd_radon(cfg: RunConfig, args) -> int:
    from . import radon as R

    n = int(cfg.radon["n"])
    rows = []
    if args.mode == "dual":
        tol = cfg.tolerances["radon-dual"]
        one = R.PolarFunction(lambda th, r: np.ones(len(r)), 3)
        Z = np.array([[0.3, -1.0, 2.0], [0.0, 0.0, 0.5], [1.0, 1.0, 1.0]])
        for name, fn in (("hemisphere", R.dual_radon), ("thales", R.dual_radon_thales)):
            vals = fn(one, Z, n)
            for i, v in enumerate(vals):
                res = abs(v - 2 * np.pi) / (2 * np.pi)
                rows.append(row("radon-dual", f"{name}:{i}", float(v), 2 * np.pi, res, res <= tol))
    elif args.mode == "pairing":
        tol = cfg.tolerances["radon-pairing"]
        cases = {"one": R.PolarFunction(lambda th, r: np.ones(len(r)), 3),
                 "linear": R.PolarFunction(lambda th, r: 1.0 + 0.5 * th[:, 0] * r, 3)}
        for name, f in cases.items():
            lhs, rhs, res = R.duality_pairing_check(f, lambda Z: np.exp(-np.sum(Z * Z, axis=1)), 3, 6.0, n)
            rows.append(row("radon-pairing", name, lhs, rhs, res, res <= tol))
    elif args.mode == "invert-odd":
        tol = cfg.tolerances["radon-odd"]
        back, g = _round_trip(R, 3, n, cfg.seed, odd=True)
        res = float(np.linalg.norm(back - g) / np.linalg.norm(g))
        rows.append(row("radon-odd-round-trip", "l3", res, 0.0, res, res <= tol, resolution=n))
    elif args.mode == "invert-even":
        tol = cfg.tolerances["radon-even"]
        for variant in R.EVEN_CONSTANT_VARIANTS:
            back, g = _round_trip(R, 2, n, cfg.seed, odd=False, variant=variant)
            res = float(np.linalg.norm(back - g) / np.linalg.norm(g))
            ratio = float(np.dot(back, g) / np.dot(g, g))
            if variant == "derived":
                rows.append(row("radon-even-round-trip", variant, res, 0.0, res, res <= tol))
            else:
                # the nominal constant reproduces half of the input
                dev = abs(ratio - 0.5)
                rows.append(row("radon-even-nominal-ratio", variant, ratio, 0.5, dev, dev <= tol))
    else:
        space = build_space(cfg.groups[0])
        Q = np.zeros(space.k)
        Q[0] = 1.0
        rep = R.tube_concentration_limit(space, Q, (1, 0), lambda V: np.exp(-np.sum(V * V, axis=1) / 2),
                                         np.eye(space.l)[0], np.full(space.k, 0.3), np.full(space.l, 0.4))
        rows.append(row("radon-tube-limit", space.name, rep.deviations[-1], 0.0, rep.deviations[-1],
                        rep.monotone, deviations=list(rep.deviations)))
    ok = write_reports(args.out, cfg, f"radon-{args.mode}", rows)
    return 0 if ok else 1


def _round_trip(R, l: int, n: int, seed: int, odd: bool, variant: str = "derived"):
    """Invert ``g = f_tau`` for a compactly supported ``g`` and apply the dual transform again."""
    def g(Z):
        r2 = np.sum(Z * Z, axis=1)
        poly = 1 + 0.5 * Z[:, 0] + (0.3 * Z[:, 1] * Z[:, 2] if l >= 3 else 0.0)
        return poly * np.clip(1 - r2, 0, None) ** (8 if odd else 6)

    if odd:
        f = R.PolarFunction(lambda th, r: R.invert_dual_radon_odd(g, l, th, r, 1.0, n=n), l, 1.0)
    else:
        f = R.PolarFunction(lambda th, r: R.invert_dual_radon_even(g, l, th, r, 1.0, n=n,
                                                                  variant=variant), l, 1.0)
    Z = np.random.default_rng(seed).uniform(-0.6, 0.6, (12, l))
    return R.dual_radon(f, Z, n=n), g(Z)


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        cfg = apply_overrides(cfg, seed=args.seed, tol_overrides=args.tol_override)
        if args.command == "group":
            return cmd_group_build(cfg, args)
        if args.command == "verify":
            return cmd_verify(cfg, args)
        if args.command == "spectrum":
            return cmd_spectrum(cfg, args)
        return cmd_radon(cfg, args)
    except (ConfigError, UsageError) as e:
        print(f"nilspec: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
