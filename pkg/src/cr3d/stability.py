"""Inf-sup constants, macroelement N-spaces, critical pressures and their elimination."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .assembly import AssembledSystem, assemble, assemble_spaces
from .eigen import cholesky_spd, eig_residuals, jacobi_eigh, sym_eig
from .errors import (
    ApexNotOnEdge,
    DisconnectedMacro,
    InvalidParameter,
    NoConvergence,
    NotCritical,
    NotSPD,
    PreconditionUnmet,
)
from .fespace import BaryPoly, cr_cell_function, enumerate_space, monomial_table, pressure_local_basis
from .mesh import CriticalEdgeRecord, Mesh, _order_patch, barycentric_gradients, detect_critical_edges
from .polylib import jacobi
from .quadrature import REF_TET_VOLUME, simplex_rule

__all__ = [
    "sym_eig",
    "InfSupReport",
    "NspaceReport",
    "CriticalPressure",
    "SpuriousCertificate",
    "EliminationCertificate",
    "infsup_constant",
    "nspace_dim",
    "edge_record",
    "build_critical_pressure",
    "certify_spurious",
    "certify_elimination",
    "even_pairing_constant",
    "cell_pairing_matrix",
]

PAIRS = {"cr": "CRk0", "conforming": "Sk0"}


# -- inf-sup --------------------------------------------------------------------------------
@dataclass
class InfSupReport:
    k: int
    pair: str
    gamma: float
    smallest_eigenvalues: list
    largest_eigenvalue: float
    spurious_modes: int
    max_residual: float
    n_velocity: int
    n_pressure: int
    mesh: dict
    tolerances: dict
    deflation: str = "M_p-orthogonal complement of the constant pressure"

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "pair": self.pair,
            "gamma_h": self.gamma,
            "smallest_eigenvalues": list(self.smallest_eigenvalues),
            "largest_eigenvalue": self.largest_eigenvalue,
            "spurious_modes": self.spurious_modes,
            "max_eigen_residual": self.max_residual,
            "n_velocity": self.n_velocity,
            "n_pressure": self.n_pressure,
            "deflation": self.deflation,
            "mesh": self.mesh,
            "tolerances": self.tolerances,
        }


def _householder_complement(y: np.ndarray) -> np.ndarray:
    """Orthonormal basis (n, n-1) of the complement of the vector y."""
    n = len(y)
    y = y / np.linalg.norm(y)
    e = np.zeros(n)
    e[0] = 1.0
    u = y - e if y[0] <= 0 else y + e
    u /= np.linalg.norm(u)
    H = np.eye(n) - 2.0 * np.outer(u, u)  # H e_0 = +-y
    return H[:, 1:]


def schur_complement(system: AssembledSystem) -> np.ndarray:
    """S = B A^{-1} B^T via a Cholesky factorization of A."""
    if system.n_velocity == 0:
        return np.zeros((system.n_pressure, system.n_pressure))
    try:
        fac = cho_factor(system.A, lower=True)
    except np.linalg.LinAlgError:
        raise NotSPD("velocity Gram matrix A is not positive definite") from None
    S = system.B @ cho_solve(fac, system.B.T)
    return 0.5 * (S + S.T)


def infsup_constant(system: AssembledSystem, pair: str | None = None, tol_rank: float = 1e-10,
                    tol_eig: float = 1e-9, n_report: int = 5) -> InfSupReport:
    """Discrete inf-sup constant from ``S q = lambda Mp q`` on mean-zero pressures."""
    S = schur_complement(system)
    L = cholesky_spd(system.Mp, "pressure mass matrix")
    C = solve_triangular(L, solve_triangular(L, S, lower=True).T, lower=True).T
    C = 0.5 * (C + C.T)
    y = L.T @ system.constant_pressure()
    Z = _householder_complement(y)
    lam, U = jacobi_eigh(Z.T @ C @ Z)
    Q = solve_triangular(L.T, Z @ U, lower=False)
    res = eig_residuals(S, system.Mp, lam, Q) if len(lam) else np.zeros(0)
    max_res = float(res.max()) if len(res) else 0.0
    if max_res > tol_eig:
        raise NoConvergence(f"eigen residual {max_res:.3e} exceeds {tol_eig:.1e}")
    lam_max = float(lam.max()) if len(lam) else 0.0
    spurious = int(np.sum(lam <= tol_rank * lam_max)) if lam_max > 0 else len(lam)
    lam_min = float(lam.min()) if len(lam) else 0.0
    return InfSupReport(
        k=system.k,
        pair=pair or system.velocity.name,
        gamma=float(np.sqrt(max(lam_min, 0.0))),
        smallest_eigenvalues=[float(v) for v in lam[:n_report]],
        largest_eigenvalue=lam_max,
        spurious_modes=spurious,
        max_residual=max_res,
        n_velocity=system.n_velocity,
        n_pressure=system.n_pressure,
        mesh=system.mesh.summary(),
        tolerances={"rank": tol_rank, "eig": tol_eig, "quad_degree": system.quad_degree},
    )


# -- macroelement N-space ---------------------------------------------------------------------
@dataclass
class NspaceReport:
    macro: list
    k: int
    space: str
    dim: int
    n_pressure: int
    rank: int
    singular_values: list

    def to_dict(self) -> dict:
        return {
            "macro": list(self.macro),
            "k": self.k,
            "space": self.space,
            "dim": self.dim,
            "n_pressure": self.n_pressure,
            "rank": self.rank,
            "singular_values": list(self.singular_values),
        }


def _facet_connected(mesh: Mesh, tets) -> bool:
    tets = set(tets)
    start = min(tets)
    seen, stack = {start}, [start]
    while stack:
        t = stack.pop()
        for f in mesh.tet_facets[t]:
            for s in mesh.facet_tets[f]:
                if s in tets and s not in seen:
                    seen.add(s)
                    stack.append(s)
    return seen == tets


def nspace_dim(mesh: Mesh, macro, k: int, space: str = "cr", tol_rank: float = 1e-10,
               margin: int = 2) -> NspaceReport:
    """Dimension of the pressures on the macroelement orthogonal to div of its velocities.

    Velocities are the functions of the chosen space on the macroelement
    itself, i.e. with zero boundary values on its boundary.
    """
    macro = sorted(set(int(t) for t in macro))
    if not macro or min(macro) < 0 or max(macro) >= mesh.n_tets:
        raise InvalidParameter(f"macroelement tets {macro} are not in the mesh")
    if not _facet_connected(mesh, macro):
        raise DisconnectedMacro(f"tets {macro} are not connected through facets")
    vname = PAIRS.get(space.lower(), space)
    sub, _ = mesh.submesh(macro)
    system = assemble_spaces(enumerate_space(vname, sub, k), enumerate_space("Pk-1", sub, k), margin)
    n_p = system.n_pressure
    if system.n_velocity == 0:
        sv = np.zeros(0)
        rank = 0
    else:
        sv = np.linalg.svd(system.B, compute_uv=False)
        rank = int(np.sum(sv > tol_rank * sv.max())) if sv.max() > 0 else 0
    return NspaceReport(macro, k, vname, n_p - rank, n_p, rank, [float(s) for s in sv])


# -- critical pressures ----------------------------------------------------------------------
@dataclass
class CriticalPressure:
    edge: int
    edge_vertices: tuple
    apex: int
    k: int
    kind: str
    tets: tuple  # ordered patch
    signs: tuple
    coefficients: np.ndarray
    mean: float
    critical: bool = True

    @property
    def mean_zero(self) -> bool:
        return abs(self.mean) <= 1e-12

    def to_dict(self) -> dict:
        return {
            "edge": self.edge,
            "edge_vertices": list(self.edge_vertices),
            "apex": self.apex,
            "k": self.k,
            "kind": self.kind,
            "tets": list(self.tets),
            "signs": list(self.signs),
            "mean": self.mean,
            "mean_zero": self.mean_zero,
            "support_size": int(np.count_nonzero(self.coefficients)),
        }


def _reference_projection(k: int, z: int) -> np.ndarray:
    """Coefficients of P_{k-1}^(0,3)(1 - 2 lambda_z) in the local pressure basis.

    The L2 projection on a tet does not depend on its shape, so the
    reference tet suffices.
    """
    _, basis = pressure_local_basis(k)
    target = BaryPoly.from_univariate(jacobi(0, 3, k - 1), z)
    rule = simplex_rule(3, 2 * k)
    lam = rule.barycentric
    phi = np.array([b.evaluate(lam) for b in basis])
    M = (phi * rule.weights) @ phi.T
    rhs = phi @ (rule.weights * target.evaluate(lam))
    c = np.linalg.solve(M, rhs)
    if np.abs(c @ phi - target.evaluate(lam)).max() > 1e-12:
        raise ArithmeticError("critical pressure is not in the local pressure space")
    return c


def edge_record(mesh: Mesh, edge, tol: float = 1e-9, require_critical: bool = True) -> CriticalEdgeRecord:
    """Critical-edge record for an edge id or vertex pair.

    With ``require_critical=False`` a record with the same ordering rules is
    returned for a non-critical edge (used to show that the construction
    fails there).
    """
    if isinstance(edge, CriticalEdgeRecord):
        return edge
    if isinstance(edge, (tuple, list)):
        key = tuple(sorted(int(v) for v in edge))
        if key not in mesh.edge_index:
            raise InvalidParameter(f"no edge with vertices {key}")
        edge = mesh.edge_index[key]
    edge = int(edge)
    for rec in detect_critical_edges(mesh, tol):
        if rec.edge == edge:
            return rec
    if require_critical:
        raise NotCritical(f"edge {mesh.edges[edge]} is not critical")
    key = mesh.edges[edge]
    fids = [f for f, fk in enumerate(mesh.facets) if key[0] in fk and key[1] in fk]
    inner = not mesh.boundary_edge[edge]
    order = _order_patch(mesh, key, mesh.edge_tets[edge], fids, inner)
    return CriticalEdgeRecord(edge, key, "inner" if inner else "outer", order, (), tuple(fids))


def build_critical_pressure(mesh: Mesh, edge, apex: int, k: int, tol: float = 1e-9,
                            require_critical: bool = True) -> CriticalPressure:
    """Alternating sum of ``P_{k-1}^(0,3)(1 - 2 lambda_{K_i, p}) / |K_i|`` over the ordered edge patch.

    The result is expressed in the global ``Pk-1`` basis of ``enumerate_space``.
    """
    rec = edge_record(mesh, edge, tol, require_critical)
    critical = bool(rec.normals)
    if apex not in rec.vertices:
        raise ApexNotOnEdge(f"vertex {apex} is not an endpoint of edge {rec.vertices}")
    pressure = enumerate_space("Pk-1", mesh, k)
    coeffs = np.zeros(pressure.dim)
    signs = []
    mean = 0.0
    cbar = _reference_mean(k)
    for i, t in enumerate(rec.tets, start=1):
        sign = (-1) ** i
        signs.append(sign)
        z = mesh.local_index(t, apex)
        idx = [j for j, _ in pressure.tet_dofs[t]]
        coeffs[idx] = sign / mesh.volumes[t] * _reference_projection(k, z)
        mean += sign * cbar
    return CriticalPressure(
        edge=rec.edge, edge_vertices=tuple(rec.vertices), apex=int(apex), k=k, kind=rec.kind,
        tets=tuple(rec.tets), signs=tuple(signs), coefficients=coeffs, mean=float(mean),
        critical=critical,
    )


def _reference_mean(k: int) -> float:
    """Integral of P_{k-1}^(0,3)(1 - 2 lambda) over a tet divided by its volume."""
    rule = simplex_rule(3, k)
    return float(rule.integrate(jacobi(0, 3, k - 1)(1 - 2 * rule.points[:, 0])) / REF_TET_VOLUME)


@dataclass
class SpuriousCertificate:
    edge: int
    apex: int
    k: int
    residual: float
    n_tested: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol

    def to_dict(self) -> dict:
        return {
            "edge": self.edge,
            "apex": self.apex,
            "k": self.k,
            "residual": self.residual,
            "n_tested": self.n_tested,
            "tol": self.tol,
            "passed": self.passed,
        }


def certify_spurious(pressure: CriticalPressure, mesh: Mesh, k: int | None = None,
                     system: AssembledSystem | None = None, tol: float = 1e-10) -> SpuriousCertificate:
    """Max of |(p, div v)| / (||p|| |v|_1) over the conforming vector basis."""
    k = pressure.k if k is None else k
    if system is None:
        system = assemble(mesh, k, "Sk0")
    p = pressure.coefficients
    if len(p) != system.n_pressure:
        raise InvalidParameter("pressure does not match the assembled system")
    n = system.n_velocity
    if n == 0:
        return SpuriousCertificate(pressure.edge, pressure.apex, k, 0.0, 0, tol)
    pnorm = float(np.sqrt(p @ system.Mp @ p))
    vnorm = np.sqrt(np.diag(system.A))
    res = np.abs(p @ system.B) / (pnorm * vnorm)
    return SpuriousCertificate(pressure.edge, pressure.apex, k, float(res.max()), n, tol)


# -- elimination ----------------------------------------------------------------------------------
def even_pairing_constant(k: int) -> float:
    return (k + 3) / (k + 1) / (2.0 * REF_TET_VOLUME)


@dataclass
class EliminationCertificate:
    edge: int
    k: int
    status: str  # passed | failed | precondition_unmet
    sigma_min: float = float("nan")
    m: list = field(default_factory=list)
    m_quadrature: list = field(default_factory=list)
    pairing_residual: float = float("nan")
    tet: int | None = None
    facets: tuple = ()
    theta: float | None = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "passed"

    def to_dict(self) -> dict:
        return {
            "edge": self.edge,
            "k": self.k,
            "status": self.status,
            "sigma_min": self.sigma_min,
            "m": self.m,
            "m_quadrature": self.m_quadrature,
            "pairing_residual": self.pairing_residual,
            "tet": self.tet,
            "facets": list(self.facets),
            "theta": self.theta,
            "detail": self.detail,
        }


def _vector_column(system: AssembledSystem, dof: int, w) -> np.ndarray:
    n = system.velocity.dim
    return sum(w[c] * system.B[:, c * n + dof] for c in range(3))


def _dof_index(space, kind: str, entity: int) -> int:
    for i, key in enumerate(space.keys):
        if key.kind == kind and key.entity == entity:
            return i
    raise KeyError((kind, entity))


def _find_odd_configuration(mesh: Mesh, rec: CriticalEdgeRecord):
    e = set(rec.vertices)
    for K in rec.tets:
        facets = [int(f) for f in mesh.tet_facets[K]]
        inner = [f for f in facets if not mesh.boundary_facet[f]]
        Fs = sorted(f for f in inner if e <= set(mesh.facets[f]))
        Gs = sorted(f for f in inner if not e <= set(mesh.facets[f]))
        if Fs and Gs:
            return K, Fs[0], Gs[0]
    return None


def certify_elimination(mesh: Mesh, edge, k: int, tol: float = 1e-9, tol_pairing: float = 1e-11,
                        system: AssembledSystem | None = None) -> EliminationCertificate:
    """Check that CR test functions separate the critical pressures of an edge.

    The 2x2 matrix ``m`` holds the closed-form pairings (rows: apexes,
    columns: two test directions), normalized to the entries used in the
    proofs; ``m_quadrature`` is the same matrix computed from the assembled
    divergence matrix.  ``pairing_residual`` is their max difference.
    """
    rec = edge_record(mesh, edge, tol)
    if k < 2:
        return EliminationCertificate(rec.edge, k, "precondition_unmet", detail="k must be >= 2")
    if system is None:
        system = assemble(mesh, k, "CRk0")
    p_vert, q_vert = rec.vertices
    press = {a: build_critical_pressure(mesh, rec, a, k, tol).coefficients for a in rec.vertices}
    sign = {t: (-1) ** i for i, t in enumerate(rec.tets, start=1)}

    if k % 2 == 0:
        K = rec.tets[0]
        grads = barycentric_gradients(mesh, K)
        loc = {a: mesh.local_index(K, a) for a in rec.vertices}
        v = next(x for x in mesh.tets[K] if x not in rec.vertices)
        s = mesh.vertices[q_vert] - mesh.vertices[p_vert]
        t = mesh.vertices[q_vert] - mesh.vertices[v]
        dof = _dof_index(system.velocity, "cr_cell", K)
        # -sign(K) generalizes the proof's K = K_1, which carries the sign -1
        const = -sign[K] * even_pairing_constant(k)
        m = np.array([[grads[loc[a]] @ r for r in (s, t)] for a in rec.vertices])
        mq = np.array([[press[a] @ _vector_column(system, dof, r) for r in (s, t)] for a in rec.vertices]) / const
        # pairings against the three coordinate directions as well
        coord = np.array([[press[a] @ _vector_column(system, dof, np.eye(3)[c]) for c in range(3)]
                          for a in rec.vertices])
        coord_exact = np.array([const * grads[loc[a]] for a in rec.vertices])
        resid = max(np.abs(coord - coord_exact).max() / abs(const), np.abs(m - mq).max())
        sig = float(np.linalg.svd(m, compute_uv=False).min())
        status = "passed" if sig > 1e-8 and resid <= tol_pairing else "failed"
        return EliminationCertificate(rec.edge, k, status, sig, m.tolist(), mq.tolist(), float(resid),
                                      tet=int(K), facets=())

    conf = _find_odd_configuration(mesh, rec)
    if conf is None:
        return EliminationCertificate(
            rec.edge, k, "precondition_unmet",
            detail="no tet of the edge patch has an inner facet through the edge and one not through it",
        )
    K, F, G = conf
    K2 = next(x for x in mesh.facet_tets[F] if x != K)
    y = next(a for a in rec.vertices if a not in mesh.facets[G])
    other = next(a for a in rec.vertices if a != y)
    gK, gK2 = barycentric_gradients(mesh, K), barycentric_gradients(mesh, K2)
    v1 = next(x for x in mesh.tets[K] if x not in mesh.facets[F])
    v2 = next(x for x in mesh.tets[K2] if x not in mesh.facets[F])
    n = mesh.facet_normal(F)
    if np.dot(n, mesh.vertices[v2] - mesh.vertices[mesh.facets[F][0]]) < 0:
        n = -n  # unit normal of F pointing into K2
    theta = float(n @ (gK[mesh.local_index(K, v1)] - gK2[mesh.local_index(K2, v2)]))
    u = other  # any vertex of K other than y
    t = mesh.vertices[y] - mesh.vertices[u]
    dt_y = float(gK[mesh.local_index(K, y)] @ t)
    norm = -sign[K] / ((k + 1) * REF_TET_VOLUME)
    m = np.array([[theta, dt_y], [theta, (k + 1) / 2 * dt_y]])
    iF = _dof_index(system.velocity, "cr_facet", F)
    iG = _dof_index(system.velocity, "cr_facet", G)
    mq = np.array([
        [press[a] @ _vector_column(system, iF, n), press[a] @ _vector_column(system, iG, t)]
        for a in (other, y)
    ]) / norm
    resid = float(np.abs(m - mq).max())
    sig = float(np.linalg.svd(m, compute_uv=False).min())
    status = "passed" if sig > 1e-8 and resid <= tol_pairing and theta < 0 else "failed"
    return EliminationCertificate(rec.edge, k, status, sig, m.tolist(), mq.tolist(), resid,
                                  tet=int(K), facets=(int(F), int(G)), theta=theta)


def cell_pairing_matrix(mesh: Mesh, tet: int, k: int = 2, apex: int = 0) -> np.ndarray:
    """Pairings ``int_K P_{k-1}^(0,3)(1 - 2 lambda_y) div(B^{CR,K} t_v)`` for even k.

    Rows run over the three directions ``t_v = v - p`` (v != p, p the local
    vertex ``apex``), columns over the four local vertices y.
    """
    if k % 2 or k < 2:
        raise InvalidParameter(f"the cell-oriented CR function needs even k >= 2, got {k}")
    rule = simplex_rule(3, 2 * k)
    lam = rule.barycentric
    scale = mesh.volumes[tet] / REF_TET_VOLUME
    grads = barycentric_gradients(mesh, tet)
    grad_b = cr_cell_function(k).gradient(lam, grads)  # (nq, 3)
    x = mesh.vertices[mesh.tets[tet]]
    p = jacobi(0, 3, k - 1)
    out = np.zeros((3, 4))
    others = [v for v in range(4) if v != apex]
    for i, v in enumerate(others):
        div = grad_b @ (x[v] - x[apex])
        for y in range(4):
            out[i, y] = scale * rule.integrate(p(1 - 2 * lam[:, y]) * div)
    return out
