"""Product quadrature rules on spheres, balls and hemispheres.

All rules are deterministic tensor products of Gauss-type rules from
``scipy.special``.  Angles use Gauss-Jacobi in the cosine of each polar angle
(exact for polynomials on the sphere up to the rule degree) and a uniform
rule for the last azimuth.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma, roots_jacobi, roots_legendre

__all__ = ["QuadSpec", "PRESETS", "get_preset", "sphere_area", "sphere_rule",
           "ball_rule", "hemisphere_rule", "gauss_legendre"]


@dataclass(frozen=True)
class QuadSpec:
    """Polar product rule for integrals over ``R^l``.

    Parameters
    ----------
    n_r : int
        Gauss-Legendre nodes on the radial interval ``[0, radius * sqrt(s)]``
        where ``s`` is the Gaussian width of the profile.
    n_s : int
        Nodes per polar angle; the azimuth gets ``2 * n_s`` uniform nodes.
    radius : float
        Radial cutoff in units of ``sqrt(s)``.  The default 9 leaves a
        Gaussian tail below ``e^-40``.
    name : str
        Preset name, for reports.
    """

    n_r: int
    n_s: int
    radius: float = 9.0
    name: str = "custom"

    def __post_init__(self):
        if self.n_r < 1 or self.n_s < 1:
            raise ValueError("quadrature spec needs at least one node per axis")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def refined(self, factor: int = 2) -> "QuadSpec":
        return QuadSpec(self.n_r * factor, self.n_s * factor, self.radius, self.name + f"x{factor}")


PRESETS = {
    "l3-coarse": QuadSpec(24, 12, 9.0, "l3-coarse"),
    "l3-default": QuadSpec(32, 16, 9.0, "l3-default"),
    "l3-fine": QuadSpec(48, 24, 9.0, "l3-fine"),
}


def get_preset(name: str) -> QuadSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown quadrature preset {name!r}; known: {sorted(PRESETS)}") from None


def sphere_area(l: int, radius: float = 1.0) -> float:
    """Area of the sphere ``S^{l-1}`` of the given radius in ``R^l``."""
    return float(2 * np.pi ** (l / 2) / gamma(l / 2) * radius ** (l - 1))


def gauss_legendre(n: int, a: float, b: float):
    x, w = roots_legendre(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


@lru_cache(maxsize=64)
def _sphere_rule_cached(l: int, n: int):
    if l == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if l == 2:
        m = 2 * n
        ang = 2 * np.pi * (np.arange(m) + 0.5) / m
        return np.stack([np.cos(ang), np.sin(ang)], axis=1), np.full(m, 2 * np.pi / m)
    gam = (l - 3) / 2
    t, wt = roots_jacobi(n, gam, gam)
    sub, wsub = _sphere_rule_cached(l - 1, n)
    s = np.sqrt(1 - t ** 2)
    pts = np.concatenate(
        [np.repeat(t, len(sub))[:, None], (s[:, None, None] * sub[None]).reshape(-1, l - 1)], axis=1)
    w = np.outer(wt, wsub).ravel()
    return pts, w


def sphere_rule(l: int, n: int):
    """Nodes and weights on the unit sphere ``S^{l-1}``; weights sum to its area."""
    pts, w = _sphere_rule_cached(int(l), int(n))
    return pts.copy(), w.copy()


def ball_rule(l: int, spec: QuadSpec, width: float = 1.0):
    """Polar product rule for ``R^l`` truncated at ``spec.radius * sqrt(width)``.

    Returns
    -------
    nodes : ndarray, shape (N, l)
    weights : ndarray, shape (N,)
    """
    R = spec.radius * np.sqrt(width)
    rho, wr = gauss_legendre(spec.n_r, 0.0, R)
    dirs, wd = sphere_rule(l, spec.n_s)
    nodes = (rho[:, None, None] * dirs[None]).reshape(-1, l)
    weights = np.outer(wr * rho ** (l - 1), wd).ravel()
    return nodes, weights


def hemisphere_rule(l: int, axis: np.ndarray, n: int):
    """Rule for ``{theta in S^{l-1}: <theta, axis> >= 0}``.

    The polar variable ``t = cos(psi)`` in ``[0, 1]`` carries the weight
    ``(1 - t^2)^((l-3)/2)``; the ``(1 - t)`` singularity is absorbed by a
    Gauss-Jacobi rule and the remaining factor is smooth.

    Returns
    -------
    theta : ndarray, shape (N, l)
    t : ndarray, shape (N,)
        ``<theta, axis>`` for each node.
    weights : ndarray, shape (N,)
    """
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    gam = (l - 3) / 2
    x, wx = roots_jacobi(n, gam, 0.0)
    t = 0.5 * (1 + x)
    # (1-t)^gam (1+t)^gam dt with dt = dx/2 and (1-t) = (1-x)/2
    wt = wx * 0.5 ** (gam + 1) * (1 + t) ** gam
    # orthonormal complement of the axis
    q, _ = np.linalg.qr(np.column_stack([axis, np.eye(l)]))
    perp = q[:, 1:l]
    if l == 1:
        return axis[None, :], np.ones(1), np.ones(1)
    sub, wsub = sphere_rule(l - 1, n)
    s = np.sqrt(1 - t ** 2)
    theta = (t[:, None, None] * axis[None, None, :]
             + s[:, None, None] * (sub @ perp.T)[None]).reshape(-1, l)
    tt = np.repeat(t, len(sub))
    w = np.outer(wt, wsub).ravel()
    return theta, tt, w
