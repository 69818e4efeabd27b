"""Verification suites: identities checked numerically, one record per check."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter
from .fespace import cr_cell_function, cr_facet_function, direct_sum_audit, enumerate_space, jump_moment_audit
from .mesh import generate
from .polylib import (
    beta_coeffs,
    endpoint_system_det,
    gauss_legendre,
    gegenbauer,
    iota_k,
    jacobi,
    legendre,
    q_dk,
    q_k,
)
from .quadrature import audit_rule, iy_integrals, simplex_rule

__all__ = ["Check", "SUITES", "run_suite", "qdk_facet_residual", "jacobi_vertex_moments"]


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tol": self.tol, "passed": self.passed}


def _check(name, value, tol) -> Check:
    value = float(value)
    return Check(name, value, tol, bool(value <= tol))


# -- polylib -----------------------------------------------------------------------------------
def _suite_polylib(ks, ds):
    out = []
    for a, b in [(0, 0), (0, 2), (0, 3), (1, 1)]:
        for n in range(0, 11):
            x, w = gauss_legendre(n + (a + b) // 2 + 2)
            p = jacobi(a, b, n)
            weight = (1 - x) ** a * (1 + x) ** b
            err = max((abs(np.dot(w, p(x) * x**j * weight)) for j in range(n)), default=0.0)
            out.append(_check(f"jacobi({a},{b},{n}) orthogonality", err, 1e-12))
            top = math.comb(n + a, n)  # (a+1)_n / n!
            bot = (-1) ** n * math.comb(n + b, n)
            out.append(_check(f"jacobi({a},{b},{n}) endpoints", max(abs(p(1.0) - top), abs(p(-1.0) - bot)), 1e-12))
    for k in range(1, 11):
        d = legendre(k).deriv()
        target = math.comb(k + 1, 2)
        out.append(_check(f"L_{k}'(+-1)", max(abs(d(1.0) - target), abs(d(-1.0) - (-1) ** (k - 1) * target)), 1e-12))
        x = np.cos(np.linspace(0, np.pi, 20))
        pa, pb, pc = jacobi(0, 2, k), jacobi(0, 3, k), jacobi(0, 3, k - 1)
        # exact rational evaluation at the sample points, then float evaluation relative to size
        exact = max(abs(float((2 * k + 3) * pa.exact_value(t) - (k + 3) * pb.exact_value(t) - k * pc.exact_value(t)))
                    for t in x)
        out.append(_check(f"contiguous relation k={k}", exact, 1e-12))
        lhs = (2 * k + 3) * pa(x)
        rhs = (k + 3) * pb(x) + k * pc(x)
        out.append(_check(f"contiguous relation k={k} (float, relative)",
                          (np.abs(lhs - rhs) / np.maximum(1.0, np.abs(lhs))).max(), 1e-12))
    x = np.cos((2 * np.arange(20) + 1) * np.pi / 40)
    g = legendre(6).deriv(2)(x) - (math.factorial(4) / (4 * 2)) * gegenbauer(2.5, 4)(x)
    out.append(_check("L_6'' = 3 C_4^(5/2)", np.abs(g).max(), 1e-12))
    for k in ks:
        q = q_k(k)
        out.append(_check(f"Q_{k}(1) = 1", abs(q(1.0) - 1.0), 1e-14))
        if k % 2:
            out.append(_check(f"Q_{k}(-1) = -(k+1)", abs(q(-1.0) + (k + 1)), 1e-12))
        if k <= 8:
            out.append(_check(f"Q_3,{k} = Q_{k}", np.abs(q_dk(3, k).coeffs - q.coeffs).max(), 1e-12))
    return out


# -- quadrature ------------------------------------------------------------------------------------
def _suite_quadrature(ks, ds):
    out = []
    for dim in (1, 2, 3, 4):
        for deg in range(0, 13 if dim < 4 else 11):
            rule = simplex_rule(dim, deg)
            out.append(_check(f"simplex_rule({dim},{deg}) monomial audit", audit_rule(rule, rtol=1e-12), 1e-12))
            vol = 1.0 / math.factorial(dim)
            out.append(_check(f"simplex_rule({dim},{deg}) volume", abs(rule.weights.sum() - vol), 1e-13))
    return out


def jacobi_vertex_moments(seed: int = 0, n_tets: int = 10):
    """Max deviations of int_K P_1^(0,3)(1 - 2 l_y) l_z from -|K|/4 (y = z) and 0 (y != z), relative to |K|."""
    from .mesh import Mesh

    rng = np.random.default_rng(seed)
    rule = simplex_rule(3, 2)
    lam = rule.barycentric
    p1 = jacobi(0, 3, 1)
    diag = off = 0.0
    for _ in range(n_tets):
        while True:
            v = rng.normal(size=(4, 3))
            if abs(np.linalg.det(v[1:] - v[0])) > 1e-2:
                break
        vol = Mesh(v, [[0, 1, 2, 3]]).volumes[0]
        for y, z in itertools.product(range(4), repeat=2):
            val = vol / (1 / 6) * rule.integrate(p1(1 - 2 * lam[:, y]) * lam[:, z])
            if y == z:
                diag = max(diag, abs(val + vol / 4) / vol)
            else:
                off = max(off, abs(val) / vol)
    return diag, off


def _suite_integral_identities(ks, ds):
    out = []
    for k in ks:
        if k < 2:
            continue
        ip, iy = iy_integrals(k)
        out.append(_check(f"I_p k={k}", abs(ip - (k + 1) / 4), 1e-11))
        out.append(_check(f"I_y k={k}", abs(iy - 0.5 * (-1) ** (k - 1)), 1e-11))
    for k in range(0, 13):
        out.append(_check(f"iota_{k}", abs(iota_k(k) - 4 * (-1) ** k / (k + 2)), 1e-11))
    diag, off = jacobi_vertex_moments()
    out.append(_check("int P_1^(0,3)(1-2l_y) l_y = -|K|/4", diag, 1e-11))
    out.append(_check("int P_1^(0,3)(1-2l_y) l_z = 0", off, 1e-11))
    return out


# -- CR functions -------------------------------------------------------------------------------------
def _suite_cr_orthogonality(ks, ds):
    out = []
    for k in ks:
        if k % 2 == 0:
            mesh = generate("reference")
            space = enumerate_space("Bnc", mesh, k)
            v = np.zeros(space.dim)
            v[0] = 1.0
            out.append(_check(f"B^CR,K k={k} facet moments", jump_moment_audit(v, space), 1e-12))
            # trace on a facet is the sum over its three vertices
            rng = np.random.default_rng(k)
            lf = rng.dirichlet(np.ones(3), 10)
            lam = np.column_stack([np.zeros(10), lf])
            q = q_k(k)
            ref = sum(q(1 - 2 * lam[:, y]) for y in (1, 2, 3))
            out.append(_check(f"B^CR,K k={k} trace identity", np.abs(cr_cell_function(k)(lam) - ref).max(), 1e-12))
        else:
            mesh = generate("outer_critical_patch", iota=2)
            space = enumerate_space("Bnc", mesh, k)
            for i in range(space.dim):
                v = np.zeros(space.dim)
                v[i] = 1.0
                out.append(_check(f"B^CR,F k={k} facet {space.keys[i].entity} jump/trace moments",
                                  jump_moment_audit(v, space), 1e-12))
        lam_face = np.array([[0.0, 0.2, 0.3, 0.5], [0.0, 0.6, 0.1, 0.3]])
        out.append(_check(f"Q_{k}(1-2l_z) = 1 on F_z", np.abs(cr_facet_function(k, 0)(lam_face) - 1).max(), 1e-14))
    return out


def _suite_direct_sum(ks, ds):
    out = []
    for k in (3, 5):
        out.append(_check(f"endpoint determinant k={k}", abs(endpoint_system_det(k) + (k - 1) * (k + 2) ** 2), 0.0))
    mesh = generate("kuhn_cube", n=1)
    for k in ks:
        if k > 4:
            continue
        smin = direct_sum_audit(mesh, k)
        out.append(Check(f"direct sum k={k} min singular value", smin, 1e-8, bool(smin > 1e-8)))
    return out


# -- arbitrary dimension ------------------------------------------------------------------------------
def _simplex_facet_points(d: int, facet_vertices, degree: int):
    """Quadrature on a facet of the reference d-simplex, returned as d+1 barycentrics."""
    rule = simplex_rule(d - 1, degree)
    lam_f = rule.barycentric  # (n, d)
    lam = np.zeros((len(lam_f), d + 1))
    for j, v in enumerate(facet_vertices):
        lam[:, v] = lam_f[:, j]
    # facet measure relative to the reference (d-1)-simplex
    verts = np.vstack([np.zeros(d), np.eye(d)])[list(facet_vertices)]
    e = verts[1:] - verts[0]
    scale = math.sqrt(abs(np.linalg.det(e @ e.T)))
    return lam, lam_f, rule.weights * scale


def qdk_facet_residual(d: int, k: int, method: str = "explicit") -> tuple[float, float]:
    """Residuals of both facet conditions for Q_{d,k}(1 - 2 lambda_z) on the reference d-simplex."""
    q = q_dk(d, k, method)
    trace_err = 0.0
    moment_err = 0.0
    for z in range(d + 1):
        for opp in range(d + 1):
            fv = [v for v in range(d + 1) if v != opp]
            lam, lam_f, w = _simplex_facet_points(d, fv, 2 * k)
            vals = q(1 - 2 * lam[:, z])
            if opp == z:
                trace_err = max(trace_err, float(np.abs(vals - 1).max()))
                continue
            # monomials of degree <= k-1 in the facet's first d-1 barycentrics
            for a in itertools.product(range(k), repeat=d - 1):
                if sum(a) > k - 1:
                    continue
                test = np.prod([lam_f[:, i + 1] ** a[i] for i in range(d - 1)], axis=0)
                moment_err = max(moment_err, abs(float(np.dot(w, vals * test))))
    return trace_err, moment_err


def _suite_general_dimension(ks, ds):
    out = []
    for d in ds:
        for k in ks:
            tr, mo = qdk_facet_residual(d, k)
            out.append(_check(f"Q_{d},{k} trace on F_z", tr, 1e-11))
            out.append(_check(f"Q_{d},{k} facet moments", mo, 1e-11))
            m = d - 2
            b1, b2 = beta_coeffs(k, m, "explicit").values, beta_coeffs(k, m, "solve").values
            rel = max(abs(x - y) / max(abs(x), 1e-300) for x, y in zip(b1, b2))
            out.append(_check(f"beta k={k} m={m} solve vs explicit", rel, 1e-10))
    return out


SUITES = {
    "polylib": _suite_polylib,
    "quadrature": _suite_quadrature,
    "cr-orthogonality": _suite_cr_orthogonality,
    "direct-sum": _suite_direct_sum,
    "appendix-a": _suite_general_dimension,
    "appendix-b": _suite_integral_identities,
}


def run_suite(name: str, ks=range(1, 7), ds=range(2, 5)) -> list[Check]:
    try:
        fn = SUITES[name]
    except KeyError:
        raise InvalidParameter(f"unknown suite {name!r}; expected one of {sorted(SUITES)}") from None
    return fn(list(ks), list(ds))
