"""Velocity and pressure bases on tetrahedral meshes.

Every basis function is stored per tetrahedron as a polynomial in the four
local barycentric coordinates, ``sum_j c_j * lambda^alpha_j``.  Conforming
functions are products of barycentric coordinates of the vertices of their
entity (Bernstein form, unscaled); Crouzeix-Raviart functions are built from
``Q_k(1 - 2 lambda_z)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidParameter, UnsupportedDegree
from .mesh import Mesh, barycentric_gradients
from .polylib import UnivariatePoly, jacobi, q_k
from .quadrature import REF_TET_VOLUME, simplex_rule

__all__ = [
    "DofKey",
    "BaryPoly",
    "ShapeFunction",
    "FESpace",
    "MonomialTable",
    "SPACES",
    "enumerate_space",
    "cr_cell_function",
    "cr_facet_function",
    "pressure_local_basis",
    "facet_to_tet_barycentric",
    "jump_moment_audit",
    "direct_sum_audit",
    "MAX_K",
]

MAX_K = 6
SPACES = ("Sk0", "Sk0prime", "Bnc", "CRk0", "Pk-1", "Pk-1,0")
_ALIASES = {s.lower(): s for s in SPACES}
_ALIASES.update({"cr": "CRk0", "conforming": "Sk0", "sk0'": "Sk0prime", "pk-10": "Pk-1,0"})


def _canonical_space(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise InvalidParameter(f"unknown space {name!r}; expected one of {SPACES}") from None


def _compositions(total: int, parts: int):
    """Multi-indices in N^parts with the given sum, lexicographically descending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class DofKey:
    kind: str  # vertex | edge | facet | cell | cr_cell | cr_facet | pressure
    entity: int
    mu: tuple = ()
    component: int | None = None

    def with_component(self, c: int) -> "DofKey":
        return DofKey(self.kind, self.entity, self.mu, c)

    def label(self) -> str:
        s = f"{self.kind}:{self.entity}"
        if self.mu:
            s += ":" + ".".join(str(m) for m in self.mu)
        if self.component is not None:
            s += f"@{self.component}"
        return s


class BaryPoly:
    """Polynomial in local barycentric coordinates, ``sum_j coeffs[j] * lam^exps[j]``."""

    def __init__(self, exps, coeffs):
        exps = np.asarray(exps, dtype=np.int64).reshape(-1, 4)
        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        if len(exps) != len(coeffs):
            raise InvalidParameter("exponent and coefficient counts differ")
        # merge duplicate monomials so the representation is canonical
        merged: dict[tuple, float] = {}
        for e, c in zip(map(tuple, exps.tolist()), coeffs):
            merged[e] = merged.get(e, 0.0) + c
        keys = sorted(merged)
        self.exps = np.array(keys, dtype=np.int64).reshape(-1, 4)
        self.coeffs = np.array([merged[e] for e in keys])

    @classmethod
    def monomial(cls, alpha, coeff: float = 1.0) -> "BaryPoly":
        return cls([alpha], [coeff])

    @classmethod
    def constant(cls, value: float) -> "BaryPoly":
        return cls([(0, 0, 0, 0)], [value])

    @classmethod
    def from_univariate(cls, poly: UnivariatePoly, z: int) -> "BaryPoly":
        """``poly(1 - 2 lambda_z)`` expanded in powers of lambda_z."""
        c = poly.compose_affine(1, -2).coeffs
        exps = np.zeros((len(c), 4), dtype=np.int64)
        exps[:, z] = np.arange(len(c))
        return cls(exps, c)

    @property
    def degree(self) -> int:
        return int(self.exps.sum(axis=1).max()) if len(self.exps) else 0

    def __add__(self, other):
        if not isinstance(other, BaryPoly):
            other = BaryPoly.constant(float(other))
        return BaryPoly(np.vstack([self.exps, other.exps]), np.concatenate([self.coeffs, other.coeffs]))

    def __sub__(self, other):
        if not isinstance(other, BaryPoly):
            other = BaryPoly.constant(float(other))
        return self + other * -1.0

    def __mul__(self, s):
        return BaryPoly(self.exps, self.coeffs * float(s))

    __rmul__ = __mul__

    def __call__(self, lam) -> np.ndarray:
        return self.evaluate(lam)

    def evaluate(self, lam) -> np.ndarray:
        lam = np.atleast_2d(np.asarray(lam, dtype=float))
        mono = np.prod(lam[:, None, :] ** self.exps[None, :, :], axis=2)
        return mono @ self.coeffs

    def partials(self, lam) -> np.ndarray:
        """Derivatives with respect to the four barycentric variables, shape (n, 4)."""
        lam = np.atleast_2d(np.asarray(lam, dtype=float))
        out = np.zeros((len(lam), 4))
        for i in range(4):
            e = self.exps.copy()
            fac = e[:, i].astype(float)
            e[:, i] = np.maximum(e[:, i] - 1, 0)
            mono = np.prod(lam[:, None, :] ** e[None, :, :], axis=2)
            out[:, i] = mono @ (self.coeffs * fac)
        return out

    def gradient(self, lam, grads) -> np.ndarray:
        """Physical gradient (n, 3) given the tet's barycentric gradients (4, 3)."""
        return self.partials(lam) @ np.asarray(grads)

    def __repr__(self):
        terms = " + ".join(f"{c:.6g}*l^{tuple(e)}" for e, c in zip(self.exps.tolist(), self.coeffs))
        return f"BaryPoly({terms})"


class MonomialTable:
    """All barycentric monomials of degree <= deg, evaluated at a reference rule."""

    def __init__(self, deg: int):
        self.deg = deg
        self.exps = np.array(
            [a for total in range(deg + 1) for a in _compositions(total, 4)], dtype=np.int64
        )
        self.index = {tuple(e): i for i, e in enumerate(self.exps.tolist())}

    def __len__(self):
        return len(self.exps)

    def coefficients(self, polys) -> np.ndarray:
        out = np.zeros((len(polys), len(self)))
        for r, p in enumerate(polys):
            for e, c in zip(map(tuple, p.exps.tolist()), p.coeffs):
                out[r, self.index[e]] += c
        return out

    def values(self, lam) -> np.ndarray:
        """(n_mono, n_pts) monomial values."""
        return np.prod(lam[None, :, :] ** self.exps[:, None, :], axis=2)

    def partials(self, lam) -> np.ndarray:
        """(4, n_mono, n_pts) derivatives with respect to each barycentric variable."""
        out = np.zeros((4, len(self), len(lam)))
        for i in range(4):
            e = self.exps.copy()
            fac = e[:, i].astype(float)
            e[:, i] = np.maximum(e[:, i] - 1, 0)
            out[i] = fac[:, None] * np.prod(lam[None, :, :] ** e[:, None, :], axis=2)
        return out


@lru_cache(maxsize=None)
def monomial_table(deg: int) -> MonomialTable:
    return MonomialTable(deg)


@dataclass
class ShapeFunction:
    """One global basis function: its per-tet barycentric polynomials."""

    key: DofKey
    pieces: dict = field(default_factory=dict)  # tet id -> BaryPoly

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(self.pieces))


# -- local building blocks ------------------------------------------------------------
def cr_cell_function(k: int) -> BaryPoly:
    """Tet-oriented CR function ``sum_z Q_k(1 - 2 lambda_z) - 1`` (even k)."""
    q = q_k(k)
    out = BaryPoly.constant(-1.0)
    for z in range(4):
        out = out + BaryPoly.from_univariate(q, z)
    return out


def cr_facet_function(k: int, z: int) -> BaryPoly:
    """Piece ``Q_k(1 - 2 lambda_z)`` of the facet-oriented CR function; z is opposite the facet."""
    return BaryPoly.from_univariate(q_k(k), z)


def pressure_local_basis(k: int) -> tuple[list[tuple], list[BaryPoly]]:
    """Local basis of P_{k-1} on a tet with its multi-index labels.

    k = 1: the constant; k = 2: ``P_1^(0,3)(1 - 2 lambda_z) = 1 - 5 lambda_z``
    for the four vertices; k >= 3: the monomials ``lambda^alpha``, |alpha| = k - 1.
    """
    if k == 1:
        return [()], [BaryPoly.constant(1.0)]
    if k == 2:
        p1 = jacobi(0, 3, 1)
        return [(z,) for z in range(4)], [BaryPoly.from_univariate(p1, z) for z in range(4)]
    alphas = list(_compositions(k - 1, 4))
    return alphas, [BaryPoly.monomial(a) for a in alphas]


def _bernstein(mesh: Mesh, tet: int, verts: tuple, powers: tuple) -> BaryPoly:
    alpha = [0, 0, 0, 0]
    for v, p in zip(verts, powers):
        alpha[mesh.local_index(tet, v)] = p
    return BaryPoly.monomial(alpha)


# -- spaces -------------------------------------------------------------------------------
class FESpace:
    """Enumerated scalar basis of one of the spaces in ``SPACES``.

    ``tet_dofs[t]`` is the list of (global index, BaryPoly) pairs of all basis
    functions that do not vanish on tet t.  Vector versions are component
    blocked: scalar dof i, component c has index ``c * dim + i``.
    """

    def __init__(self, name: str, mesh: Mesh, k: int, keys, tet_dofs, mean_zero: bool = False):
        self.name = name
        self.mesh = mesh
        self.k = k
        self.keys: list[DofKey] = list(keys)
        self.tet_dofs: list[list[tuple[int, BaryPoly]]] = tet_dofs
        self.mean_zero = mean_zero

    @property
    def dim(self) -> int:
        return len(self.keys)

    def __len__(self):
        return self.dim

    def vector_keys(self) -> list[DofKey]:
        return [key.with_component(c) for c in range(3) for key in self.keys]

    def shape(self, dof: int) -> ShapeFunction:
        sf = ShapeFunction(self.keys[dof])
        for t, pairs in enumerate(self.tet_dofs):
            for i, poly in pairs:
                if i == dof:
                    sf.pieces[t] = poly
        return sf

    def _piece(self, dof: int, tet: int):
        for i, poly in self.tet_dofs[tet]:
            if i == dof:
                return poly
        return None

    def evaluate(self, dof: int, tet: int, lam) -> tuple[np.ndarray, bool]:
        """Values at barycentric points of ``tet``; (zeros, False) outside the support."""
        lam = np.atleast_2d(lam)
        poly = self._piece(dof, tet)
        if poly is None:
            return np.zeros(len(lam)), False
        return poly.evaluate(lam), True

    def gradient(self, dof: int, tet: int, lam) -> tuple[np.ndarray, bool]:
        lam = np.atleast_2d(lam)
        poly = self._piece(dof, tet)
        if poly is None:
            return np.zeros((len(lam), 3)), False
        return poly.gradient(lam, barycentric_gradients(self.mesh, tet)), True

    def local(self, tet: int, table: MonomialTable) -> tuple[np.ndarray, np.ndarray]:
        """Global indices and monomial coefficient matrix of the functions living on ``tet``."""
        pairs = self.tet_dofs[tet]
        idx = np.array([i for i, _ in pairs], dtype=np.int64)
        return idx, table.coefficients([p for _, p in pairs])

    def function_values(self, coeffs, tet: int, lam) -> np.ndarray:
        """Values of the finite element function with the given coefficients."""
        lam = np.atleast_2d(lam)
        out = np.zeros(len(lam))
        for i, poly in self.tet_dofs[tet]:
            if coeffs[i] != 0.0:
                out += coeffs[i] * poly.evaluate(lam)
        return out

    def counts(self) -> dict:
        out: dict[str, int] = {}
        for key in self.keys:
            out[key.kind] = out.get(key.kind, 0) + 1
        return out


def _check_k(k: int):
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= MAX_K:
        raise UnsupportedDegree(f"k must be in 1..{MAX_K}, got {k!r}")


def _conforming(mesh: Mesh, k: int, with_vertices: bool, keys, tet_dofs):
    if with_vertices:
        for v in mesh.inner_vertices:
            idx = len(keys)
            keys.append(DofKey("vertex", v))
            for t in mesh.vertex_tets[v]:
                tet_dofs[t].append((idx, _bernstein(mesh, t, (v,), (k,))))
    if k >= 2:
        for e in mesh.inner_edges:
            verts = mesh.edges[e]
            for mu in _compositions(k - 2, 2):
                idx = len(keys)
                keys.append(DofKey("edge", e, mu))
                pw = tuple(m + 1 for m in mu)
                for t in mesh.edge_tets[e]:
                    tet_dofs[t].append((idx, _bernstein(mesh, t, verts, pw)))
    if k >= 3:
        for f in mesh.inner_facets:
            verts = mesh.facets[f]
            for mu in _compositions(k - 3, 3):
                idx = len(keys)
                keys.append(DofKey("facet", f, mu))
                pw = tuple(m + 1 for m in mu)
                for t in mesh.facet_tets[f]:
                    tet_dofs[t].append((idx, _bernstein(mesh, t, verts, pw)))
    if k >= 4:
        for t in range(mesh.n_tets):
            for mu in _compositions(k - 4, 4):
                idx = len(keys)
                keys.append(DofKey("cell", t, mu))
                tet_dofs[t].append((idx, BaryPoly.monomial(tuple(m + 1 for m in mu))))


def _nonconforming(mesh: Mesh, k: int, keys, tet_dofs):
    if k % 2 == 0:
        piece = cr_cell_function(k)
        for t in range(mesh.n_tets):
            idx = len(keys)
            keys.append(DofKey("cr_cell", t))
            tet_dofs[t].append((idx, piece))
    else:
        for f in mesh.inner_facets:
            idx = len(keys)
            keys.append(DofKey("cr_facet", f))
            for t in mesh.facet_tets[f]:
                z = next(i for i in range(4) if mesh.tets[t][i] not in mesh.facets[f])
                tet_dofs[t].append((idx, cr_facet_function(k, z)))


def enumerate_space(space: str, mesh: Mesh, k: int) -> FESpace:
    """Enumerate a scalar basis.

    Ordering: conforming keys (vertices, edges, facets, cells by entity id,
    multi-index descending) followed by CR keys.  Only inner entities carry
    velocity functions, so every velocity function has zero trace.
    """
    _check_k(k)
    space = _canonical_space(space)
    keys: list[DofKey] = []
    tet_dofs: list[list] = [[] for _ in range(mesh.n_tets)]
    if space == "Sk0":
        _conforming(mesh, k, True, keys, tet_dofs)
    elif space == "Sk0prime":
        _conforming(mesh, k, False, keys, tet_dofs)
    elif space == "Bnc":
        _nonconforming(mesh, k, keys, tet_dofs)
    elif space == "CRk0":
        _conforming(mesh, k, k % 2 == 0, keys, tet_dofs)
        _nonconforming(mesh, k, keys, tet_dofs)
    else:
        labels, polys = pressure_local_basis(k)
        for t in range(mesh.n_tets):
            for mu, poly in zip(labels, polys):
                idx = len(keys)
                keys.append(DofKey("pressure", t, tuple(mu)))
                tet_dofs[t].append((idx, poly))
        return FESpace(space, mesh, k, keys, tet_dofs, mean_zero=space == "Pk-1,0")
    return FESpace(space, mesh, k, keys, tet_dofs)


# -- audits ----------------------------------------------------------------------------------
def facet_to_tet_barycentric(mesh: Mesh, tet: int, facet: int, lam_f) -> np.ndarray:
    """Embed facet barycentrics (sorted facet vertex order) into the tet's local order."""
    lam_f = np.atleast_2d(lam_f)
    out = np.zeros((len(lam_f), 4))
    for j, v in enumerate(mesh.facets[facet]):
        out[:, mesh.local_index(tet, v)] = lam_f[:, j]
    return out


def _facet_test_monomials(lam_f, deg: int) -> np.ndarray:
    """Monomials lambda_1^a lambda_2^b (a + b <= deg): a basis of P_deg on the facet."""
    cols = [lam_f[:, 1] ** a * lam_f[:, 2] ** b for a in range(deg + 1) for b in range(deg + 1 - a)]
    return np.array(cols)


def jump_moment_audit(v, space: FESpace, normalize: bool = True) -> float:
    """Max facet moment of jumps (inner facets) and traces (boundary facets) against P_{k-1}.

    With ``normalize`` the function is scaled by its largest absolute value
    at the tet quadrature points, so the result is a relative residual.
    """
    mesh, k = space.mesh, space.k
    v = np.asarray(v, dtype=float)
    if len(v) != space.dim:
        raise InvalidParameter(f"coefficient vector has length {len(v)}, expected {space.dim}")
    scale = 1.0
    if normalize:
        lam = simplex_rule(3, 2 * k).barycentric
        peak = max((np.abs(space.function_values(v, t, lam)).max() for t in range(mesh.n_tets)), default=0.0)
        scale = 1.0 / peak if peak > 0 else 1.0
    rule = simplex_rule(2, 2 * k)
    lam_f = rule.barycentric
    tests = _facet_test_monomials(lam_f, k - 1)
    worst = 0.0
    for f in range(len(mesh.facets)):
        area = mesh.facet_area(f)
        adj = mesh.facet_tets[f]
        vals = space.function_values(v, adj[0], facet_to_tet_barycentric(mesh, adj[0], f, lam_f))
        if len(adj) == 2:
            vals = vals - space.function_values(v, adj[1], facet_to_tet_barycentric(mesh, adj[1], f, lam_f))
        mom = tests @ (rule.weights * vals) * (area / 0.5)
        worst = max(worst, float(np.abs(mom).max()))
    return worst * scale


def scalar_gram(space: FESpace, quad_margin: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Broken stiffness G and mass M of a scalar space (dense)."""
    mesh, k = space.mesh, space.k
    rule = simplex_rule(3, 2 * k + quad_margin)
    lam = rule.barycentric
    table = monomial_table(k)
    vals = table.values(lam)
    parts = table.partials(lam)
    n = space.dim
    G = np.zeros((n, n))
    M = np.zeros((n, n))
    for t in range(mesh.n_tets):
        idx, C = space.local(t, table)
        if len(idx) == 0:
            continue
        w = rule.weights * (mesh.volumes[t] / REF_TET_VOLUME)
        grads = barycentric_gradients(mesh, t)
        phi = C @ vals
        dl = np.einsum("fm,imq->fiq", C, parts)
        dphi = np.einsum("fiq,ic->fqc", dl, grads)
        G[np.ix_(idx, idx)] += np.einsum("fqc,gqc,q->fg", dphi, dphi, w)
        M[np.ix_(idx, idx)] += (phi * w) @ phi.T
    G = 0.5 * (G + G.T)
    M = 0.5 * (M + M.T)
    return G, M


def direct_sum_audit(mesh: Mesh, k: int) -> float:
    """Smallest singular value of the L2 + broken H1 Gram matrix of the CR_{k,0} basis."""
    space = enumerate_space("CRk0", mesh, k)
    if space.dim == 0:
        return math.inf
    G, M = scalar_gram(space)
    return float(np.linalg.svd(G + M, compute_uv=False).min())
