"""Spectra of the Zeeman operators ``Box_gamma`` and their comparison.

Box spectra come from the Hermite blocks of :func:`nilspec.operators.box_matrix`;
an independent finite-difference grid oracle covers ``k = 2``.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .algebra import EndomorphismSpace, j_of
from .operators import HermiteBasisSpec, box_matrix

__all__ = [
    "NoConjugator",
    "InvalidComparison",
    "canonical_skew_form",
    "find_conjugator",
    "cluster",
    "SpectrumReport",
    "ComparisonVerdict",
    "box_spectrum",
    "compare_spectra",
    "torus_bundle_spectrum",
    "grid_box_matrix",
    "grid_oracle",
    "CLUSTER_GAP",
]

CLUSTER_GAP = 1e-8


class NoConjugator(ValueError):
    """The two skew matrices have different spectra."""


class InvalidComparison(ValueError):
    """Reports with different truncation, method or shape."""


# ---------------------------------------------------------------------------
# Orthogonal conjugators


def canonical_skew_form(J: np.ndarray):
    """Orthogonal ``U`` and rotation numbers ``b`` with ``U^T J U = canonical(b)``.

    ``canonical(b)`` is block diagonal with blocks ``[[0, b_i], [-b_i, 0]]``,
    ``b_i > 0`` in ascending order, followed by zeros.  Built from the real
    Schur form, which is block diagonal for the normal matrix ``J``.
    """
    J = np.asarray(J, dtype=float)
    if np.max(np.abs(J + J.T)) > 1e-12 * max(1.0, np.max(np.abs(J))):
        raise ValueError("matrix is not skew-symmetric")
    n = J.shape[0]
    T, U = scipy.linalg.schur(J, output="real")
    tol = 1e-12 * max(1.0, np.max(np.abs(J)))
    pairs, zeros = [], []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > tol:
            b = T[i, i + 1]
            u, v = U[:, i], U[:, i + 1]
            if b < 0:
                u, v, b = v, u, -b
            pairs.append((b, u, v))
            i += 2
        else:
            zeros.append(U[:, i])
            i += 1
    pairs.sort(key=lambda t: t[0])
    cols = [c for _, u, v in pairs for c in (u, v)] + zeros
    return np.column_stack(cols), np.array([b for b, _, _ in pairs])


def find_conjugator(J: np.ndarray, Jp: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthogonal ``T`` with ``T J T^T = J'``.

    Raises
    ------
    NoConjugator
        If the rotation numbers of ``J`` and ``J'`` differ.
    """
    J = np.asarray(J, dtype=float)
    Jp = np.asarray(Jp, dtype=float)
    if J.shape != Jp.shape:
        raise NoConjugator("matrices have different shapes")
    U, b = canonical_skew_form(J)
    Up, bp = canonical_skew_form(Jp)
    scale = max(1.0, np.max(np.abs(J)))
    if b.shape != bp.shape or np.max(np.abs(b - bp), initial=0.0) > tol * scale:
        raise NoConjugator("spectra of the two skew matrices differ")
    T = Up @ U.T
    res = np.max(np.abs(T @ J @ T.T - Jp))
    if res > tol * scale:
        raise NoConjugator(f"conjugation residual {res:.2e} above tolerance")
    return T


# ---------------------------------------------------------------------------
# Reports


def cluster(values: Sequence[float], gap: float = CLUSTER_GAP) -> list:
    """Group sorted values into ``(mean, multiplicity)`` with a relative gap."""
    vals = np.sort(np.asarray(values, dtype=float))
    out = []
    start = 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or vals[i] - vals[i - 1] > gap * max(1.0, abs(vals[i])):
            grp = vals[start:i]
            out.append((float(grp.mean()), int(len(grp))))
            start = i
    return out


@dataclass(frozen=True)
class SpectrumReport:
    """Sorted eigenvalues per block and their clustered multiplicities."""

    space_id: str
    gamma: tuple
    level: int
    method: str
    k: int
    blocks: tuple
    notes: tuple = ()
    tags: tuple = ()

    @property
    def eigenvalues(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros(0)
        return np.sort(np.concatenate([np.asarray(b) for b in self.blocks]))

    @property
    def multiplicities(self) -> list:
        return cluster(self.eigenvalues)

    def to_dict(self) -> dict:
        return {"space": self.space_id, "gamma": [list(map(float, g)) if np.ndim(g) else float(g)
                                                  for g in self.gamma],
                "level": self.level, "method": self.method, "k": self.k,
                "blocks": [[float(x) for x in b] for b in self.blocks],
                "multiplicities": [[m, c] for m, c in self.multiplicities],
                "notes": list(self.notes), "tags": [list(t) for t in self.tags]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        """Rows ``gamma_index, block, eigenvalue, multiplicity``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gamma_index", "block", "eigenvalue", "multiplicity"])
        tags = self.tags or tuple((0, b) for b in range(len(self.blocks)))
        for (gi, bi), vals in zip(tags, self.blocks):
            for val, mult in cluster(vals):
                w.writerow([gi, bi, repr(float(val)), mult])
        return buf.getvalue()


@dataclass(frozen=True)
class ComparisonVerdict:
    report_ids: tuple
    residuals: np.ndarray = field(repr=False)
    max_residual: float
    tol: float
    verdict: bool

    def to_dict(self) -> dict:
        return {"reports": list(self.report_ids), "max_residual": self.max_residual,
                "tol": self.tol, "verdict": self.verdict, "n_matched": int(len(self.residuals))}


def box_spectrum(space: EndomorphismSpace, gamma, N: int) -> SpectrumReport:
    """Eigenvalues of every Hermite block of ``Box_gamma`` up to level ``N``."""
    gamma = np.asarray(gamma, dtype=float)
    if not np.any(gamma):
        raise ValueError("gamma = 0 is unsupported (continuous spectrum)")
    spec = HermiteBasisSpec.for_gamma(gamma, N, space.k)
    blocks = tuple(tuple(np.linalg.eigvalsh(B).tolist()) for B in box_matrix(space, gamma, spec))
    return SpectrumReport(space.name, (tuple(gamma.tolist()),), N, "hermite-block", space.k, blocks,
                          tags=tuple((0, b) for b in range(len(blocks))))


def compare_spectra(a: SpectrumReport, b: SpectrumReport, tol: float = 1e-9) -> ComparisonVerdict:
    """Match sorted eigenvalue lists; residuals are relative to ``max(1, |lambda|)``."""
    if a.k != b.k:
        raise InvalidComparison(f"X-dimensions differ ({a.k} vs {b.k})")
    if a.level != b.level or a.method != b.method:
        raise InvalidComparison("reports use different truncation or method")
    ea, eb = a.eigenvalues, b.eigenvalues
    if ea.shape != eb.shape:
        return ComparisonVerdict((a.space_id, b.space_id), np.zeros(0), np.inf, tol, False)
    res = np.abs(ea - eb) / np.maximum(1.0, np.abs(ea))
    mx = float(res.max(initial=0.0))
    return ComparisonVerdict((a.space_id, b.space_id), res, mx, tol, bool(mx <= tol))


def torus_bundle_spectrum(space: EndomorphismSpace, lattice: np.ndarray, N: int,
                          radius: float) -> SpectrumReport:
    """Union of ``Box_gamma`` spectra over ``Z_gamma = lattice @ n``, ``0 < |Z_gamma| <= radius``.

    ``n`` runs over integer vectors; the ``gamma = 0`` component (continuous
    spectrum of the flat X-Laplacian) is omitted and flagged.  Components are
    ordered by ``(|Z_gamma|, n)``.
    """
    L = np.atleast_2d(np.asarray(lattice, dtype=float))
    if L.shape != (space.l, space.l) or abs(np.linalg.det(L)) < 1e-12:
        raise ValueError("degenerate lattice")
    smin = np.linalg.svd(L, compute_uv=False).min()
    m = int(np.floor(radius / smin)) if radius > 0 else 0
    cands = []
    for n in itertools.product(range(-m, m + 1), repeat=space.l):
        if not any(n):
            continue
        g = L @ np.array(n, dtype=float)
        r = float(np.linalg.norm(g))
        if r <= radius * (1 + 1e-12):
            cands.append((round(r, 12), n, g))
    cands.sort(key=lambda t: (t[0], t[1]))
    blocks, tags, gammas = [], [], []
    for gi, (_, n, g) in enumerate(cands):
        rep = box_spectrum(space, g, N)
        gammas.append(tuple(n))
        for bi, blk in enumerate(rep.blocks):
            blocks.append(blk)
            tags.append((gi, bi))
    return SpectrumReport(space.name, tuple(gammas), N, "hermite-block", space.k, tuple(blocks),
                          notes=("gamma=0 omitted: continuous spectrum of the flat X-Laplacian",),
                          tags=tuple(tags))


# ---------------------------------------------------------------------------
# Grid oracle


def _fd4(n: int, h: float):
    """Fourth-order central first and second derivative matrices (Dirichlet)."""
    o = np.ones(n)
    d1 = sp.diags([o[:-2] / 12, -8 * o[:-1] / 12, 8 * o[:-1] / 12, -o[:-2] / 12], [-2, -1, 1, 2]) / h
    d2 = sp.diags([-o[:-2] / 12, 16 * o[:-1] / 12, -30 * o / 12, 16 * o[:-1] / 12, -o[:-2] / 12],
                  [-2, -1, 0, 1, 2]) / h ** 2
    return d1, d2


def grid_box_matrix(space: EndomorphismSpace, gamma, n: int, half_width: float = 4.0):
    """Fourth-order finite-difference ``Box_gamma`` on ``[-w, w]^2`` with Dirichlet walls."""
    if space.k != 2:
        raise ValueError("the grid oracle supports k = 2 only")
    gamma = np.asarray(gamma, dtype=float)
    J = j_of(space, gamma)
    x = np.linspace(-half_width, half_width, n + 2)[1:-1]
    h = x[1] - x[0]
    I = sp.identity(n, format="csr")
    d1, d2 = _fd4(n, h)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    Dx = [sp.kron(d1, I), sp.kron(I, d1)]
    coords = [X1.ravel(), X2.ravel()]
    lap = sp.kron(d2, I) + sp.kron(I, d2)
    # D_gamma f = <J X, grad f>
    D = sum(sp.diags(J[i, j] * coords[j]) @ Dx[i] for i in range(2) for j in range(2) if J[i, j])
    JX = [sum(J[i, j] * coords[j] for j in range(2)) for i in range(2)]
    pot = -4 * np.pi ** 2 * float(gamma @ gamma) - np.pi ** 2 * (JX[0] ** 2 + JX[1] ** 2)
    return (lap + 2j * np.pi * D + sp.diags(pot)).tocsc()


def grid_oracle(space: EndomorphismSpace, gamma, targets: Sequence[float], n: int = 128,
                half_width: float = 4.0) -> np.ndarray:
    """Grid eigenvalue nearest each target (shift-invert on a fourth-order grid).

    Parameters
    ----------
    targets : sequence of float
        Shift points; for each the closest grid eigenvalue is returned.
    """
    A = grid_box_matrix(space, gamma, n, half_width)
    out = []
    for t in targets:
        ev = spla.eigsh(A, k=1, sigma=t, which="LM", return_eigenvectors=False)
        out.append(float(np.real(ev[0])))
    return np.array(out)
