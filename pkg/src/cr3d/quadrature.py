"""Collapsed-coordinate (Duffy) quadrature on reference simplices.

The reference d-simplex is ``{x >= 0, x_1 + ... + x_d <= 1}``.  A rule of
degree D is the image of a tensor Gauss-Jacobi rule on the unit cube under

    x_1 = u_1,  x_2 = (1 - u_1) u_2,  x_3 = (1 - u_1)(1 - u_2) u_3, ...

where the Jacobian factor ``(1 - u_i)^(d - i)`` is absorbed into the
Gauss-Jacobi weight of direction i.  Every rule is audited against the
closed-form monomial moments ``prod(a_i!) / (|a| + d)!`` before it is
returned.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

from .errors import Degenerate, ExactnessVerificationFailed, InvalidParameter
from .polylib import jacobi, legendre

__all__ = [
    "QuadRule",
    "gauss_1d",
    "simplex_rule",
    "monomial_moment",
    "audit_rule",
    "integrate_tet",
    "integrate_facet",
    "facet_rule",
    "iy_integrals",
    "REF_TET_VOLUME",
]

REF_TET_VOLUME = 1.0 / 6.0
MAX_DEGREE = 30


@dataclass(frozen=True)
class QuadRule:
    dim: int
    points: np.ndarray  # (n, dim) reference coordinates
    weights: np.ndarray  # (n,)
    exact_degree: int

    @property
    def barycentric(self) -> np.ndarray:
        """Points as barycentric coordinates (n, dim + 1); vertex 0 is the origin."""
        lam0 = 1.0 - self.points.sum(axis=1, keepdims=True)
        return np.hstack([lam0, self.points])

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def monomial_moment(a) -> float:
    """Integral of x^a over the reference simplex of dimension len(a)."""
    num = math.prod(math.factorial(int(ai)) for ai in a)
    return float(Fraction(num, math.factorial(int(sum(a)) + len(a))))


def audit_rule(rule: QuadRule, degree: int | None = None, rtol: float = 1e-12) -> float:
    """Max relative monomial error up to ``degree`` (default: the rule's)."""
    degree = rule.exact_degree if degree is None else degree
    pts = rule.points
    powers = [np.power.outer(pts[:, i], np.arange(degree + 1)) for i in range(rule.dim)]
    worst = 0.0
    for a in _multi_indices(rule.dim, degree):
        vals = np.ones(len(pts))
        for i, ai in enumerate(a):
            if ai:
                vals = vals * powers[i][:, ai]
        exact = monomial_moment(a)
        err = abs(rule.integrate(vals) - exact) / exact
        worst = max(worst, err)
    if worst > rtol:
        raise ExactnessVerificationFailed(
            f"dim={rule.dim} degree={degree}: relative monomial error {worst:.3e} > {rtol:.1e}"
        )
    return worst


def _multi_indices(dim: int, degree: int):
    for total in range(degree + 1):
        for c in itertools.combinations_with_replacement(range(dim), total):
            a = [0] * dim
            for i in c:
                a[i] += 1
            yield tuple(a)


def _gauss_jacobi_unit(n: int, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes on [0, 1] for the weight (1 - u)^alpha
    t, w = roots_jacobi(n, alpha, 0.0)
    return (1.0 + t) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def simplex_rule(dim: int, degree: int) -> QuadRule:
    if not 1 <= dim <= 4:
        raise InvalidParameter(f"dimension must be in 1..4, got {dim}")
    if degree < 0 or degree > MAX_DEGREE:
        raise InvalidParameter(f"degree must be in 0..{MAX_DEGREE}, got {degree}")
    n = degree // 2 + 1
    factors = [_gauss_jacobi_unit(n, dim - 1 - i) for i in range(dim)]
    u = np.array(list(itertools.product(*[f[0] for f in factors])))
    w = np.array([math.prod(c) for c in itertools.product(*[f[1] for f in factors])])
    x = np.empty_like(u)
    rest = np.ones(len(u))
    for i in range(dim):
        x[:, i] = rest * u[:, i]
        rest = rest * (1.0 - u[:, i])
    rule = QuadRule(dim, x, w, 2 * n - 1)
    audit_rule(rule)
    return rule


def gauss_1d(n: int) -> QuadRule:
    """n-point Gauss-Legendre rule on the reference segment [0, 1]."""
    if n < 1:
        raise InvalidParameter(f"need at least one point, got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    rule = QuadRule(1, ((x + 1.0) / 2.0)[:, None], w / 2.0, 2 * n - 1)
    audit_rule(rule)
    return rule


def integrate_tet(mesh, tet: int, f: Callable, degree: int, physical: bool = False) -> float:
    """Integrate ``f`` over a mesh tetrahedron.

    ``f`` receives barycentric coordinates (n, 4) in the tet's local vertex
    order, or physical points (n, 3) when ``physical`` is set.
    """
    vol = mesh.volumes[tet]
    if vol <= 0.0:
        raise Degenerate(f"tet {tet} has non-positive volume")
    rule = simplex_rule(3, degree)
    lam = rule.barycentric
    arg = lam @ mesh.vertices[mesh.tets[tet]] if physical else lam
    return vol / REF_TET_VOLUME * rule.integrate(f(arg))


def facet_rule(mesh, facet: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points (n, 3) on a facet (sorted vertex order) and area-scaled weights."""
    verts = mesh.vertices[list(mesh.facets[facet])]
    area = 0.5 * np.linalg.norm(np.cross(verts[1] - verts[0], verts[2] - verts[0]))
    if area <= 0.0:
        raise Degenerate(f"facet {facet} has zero area")
    rule = simplex_rule(2, degree)
    return rule.barycentric, rule.weights * (area / 0.5)


def integrate_facet(mesh, facet: int, f: Callable, degree: int, physical: bool = False) -> float:
    """Integrate ``f`` over a facet; ``f`` gets facet barycentrics or physical points."""
    lam, w = facet_rule(mesh, facet, degree)
    arg = lam @ mesh.vertices[list(mesh.facets[facet])] if physical else lam
    return float(np.dot(w, f(arg)))


def iy_integrals(k: int) -> tuple[float, float]:
    """Reference-tet integrals of P_{k-1}^(0,3)(1-2x1) (L_{k+1}-L_k)''(1-2x_j), j = 1, 2."""
    if k < 2:
        raise InvalidParameter(f"k must be >= 2, got {k}")
    rule = simplex_rule(3, 2 * k)
    x1, x2 = rule.points[:, 0], rule.points[:, 1]
    pk = jacobi(0, 3, k - 1)
    d2 = (legendre(k + 1) - legendre(k)).deriv(2)
    i_p = rule.integrate(pk(1 - 2 * x1) * d2(1 - 2 * x1))
    i_y = rule.integrate(pk(1 - 2 * x1) * d2(1 - 2 * x2))
    return i_p, i_y
