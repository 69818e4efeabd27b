"""Dense assembly of the discrete Stokes matrices.

``A`` is the broken H1 Gram matrix of the vector velocity basis, ``B`` the
pressure-divergence matrix ``B[i, j] = sum_K int_K q_i div v_j`` and ``Mp``
the pressure mass matrix.  Vector dofs are component blocked, so
``A = blockdiag(G, G, G)`` and ``B = [Bx, By, Bz]``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidParameter
from .fespace import FESpace, enumerate_space, monomial_table
from .mesh import Mesh, barycentric_gradients
from .quadrature import REF_TET_VOLUME, simplex_rule

__all__ = ["AssembledSystem", "assemble", "assemble_spaces", "pairing", "export_csv", "header"]

VELOCITY_SPACES = {"cr": "CRk0", "crk0": "CRk0", "conforming": "Sk0", "sk0": "Sk0"}


@dataclass
class AssembledSystem:
    k: int
    A: np.ndarray
    B: np.ndarray
    Mp: np.ndarray
    G: np.ndarray  # scalar stiffness block
    velocity: FESpace
    pressure: FESpace
    mesh: Mesh
    quad_degree: int
    meta: dict = field(default_factory=dict)

    @property
    def n_velocity(self) -> int:
        return self.A.shape[0]

    @property
    def n_pressure(self) -> int:
        return self.Mp.shape[0]

    @property
    def velocity_keys(self):
        return self.velocity.vector_keys()

    @property
    def pressure_keys(self):
        return self.pressure.keys

    def ordering_digest(self) -> str:
        h = hashlib.sha256()
        for key in self.velocity_keys:
            h.update(key.label().encode())
            h.update(b";")
        h.update(b"|")
        for key in self.pressure_keys:
            h.update(key.label().encode())
            h.update(b";")
        return h.hexdigest()[:16]

    def constant_pressure(self) -> np.ndarray:
        """Coefficients of the pressure 1 (L2 projection, exact since 1 is in the space)."""
        rhs = np.zeros(self.n_pressure)
        rule = simplex_rule(3, self.k + 1)
        table = monomial_table(max(self.k - 1, 0))
        vals = table.values(rule.barycentric)
        for t in range(self.mesh.n_tets):
            idx, C = self.pressure.local(t, table)
            w = rule.weights * (self.mesh.volumes[t] / REF_TET_VOLUME)
            rhs[idx] += (C @ vals) @ w
        return np.linalg.solve(self.Mp, rhs)


def _tet_matrices(C_v, C_p, vals_p, parts_v, grads, w):
    dl = np.einsum("fm,imq->fiq", C_v, parts_v)
    dphi = np.einsum("fiq,ic->fqc", dl, grads)
    G = np.einsum("fqc,gqc,q->fg", dphi, dphi, w)
    Bc = np.einsum("pq,fqc,q->cpf", C_p @ vals_p, dphi, w)
    return G, Bc


def assemble_spaces(velocity: FESpace, pressure: FESpace, margin: int = 2) -> AssembledSystem:
    """Assemble for explicitly enumerated scalar velocity and pressure spaces."""
    mesh, k = velocity.mesh, velocity.k
    if pressure.mesh is not mesh:
        raise InvalidParameter("velocity and pressure spaces live on different meshes")
    if margin < 0:
        raise InvalidParameter(f"quadrature margin must be >= 0, got {margin}")
    degree = 2 * k + margin
    rule = simplex_rule(3, degree)
    lam = rule.barycentric
    tab_v = monomial_table(k)
    tab_p = monomial_table(max(pressure.k - 1, 0))
    parts_v = tab_v.partials(lam)
    vals_p = tab_p.values(lam)
    nv, npr = velocity.dim, pressure.dim
    G = np.zeros((nv, nv))
    Bs = np.zeros((3, npr, nv))
    Mp = np.zeros((npr, npr))
    # serial loop in tet order: deterministic summation
    for t in range(mesh.n_tets):
        iv, Cv = velocity.local(t, tab_v)
        ip, Cp = pressure.local(t, tab_p)
        w = rule.weights * (mesh.volumes[t] / REF_TET_VOLUME)
        grads = barycentric_gradients(mesh, t)
        if len(ip):
            Mp[np.ix_(ip, ip)] += (Cp @ vals_p * w) @ (Cp @ vals_p).T
        if len(iv) == 0:
            continue
        Gt, Bt = _tet_matrices(Cv, Cp, vals_p, parts_v, grads, w)
        G[np.ix_(iv, iv)] += Gt
        if len(ip):
            for c in range(3):
                Bs[c][np.ix_(ip, iv)] += Bt[c]
    G = 0.5 * (G + G.T)
    Mp = 0.5 * (Mp + Mp.T)
    A = np.kron(np.eye(3), G)
    B = np.hstack(list(Bs))
    return AssembledSystem(
        k=k, A=A, B=B, Mp=Mp, G=G, velocity=velocity, pressure=pressure, mesh=mesh,
        quad_degree=degree,
        meta={"velocity_space": velocity.name, "pressure_space": pressure.name},
    )


def assemble(mesh: Mesh, k: int, velocity_space: str = "CRk0", pressure_space: str = "Pk-1",
             margin: int = 2) -> AssembledSystem:
    vname = VELOCITY_SPACES.get(velocity_space.lower())
    if vname is None:
        raise InvalidParameter(f"velocity space must be CRk0 or Sk0, got {velocity_space!r}")
    velocity = enumerate_space(vname, mesh, k)
    pressure = enumerate_space(pressure_space, mesh, k)
    if pressure.name not in ("Pk-1", "Pk-1,0"):
        raise InvalidParameter(f"pressure space must be Pk-1 or Pk-1,0, got {pressure_space!r}")
    return assemble_spaces(velocity, pressure, margin)


def pairing(q, v, system: AssembledSystem) -> float:
    """``b_h(q, v) = q^T B v`` for coefficient vectors."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if q.shape != (system.n_pressure,) or v.shape != (system.n_velocity,):
        raise DimensionMismatch(
            f"expected shapes ({system.n_pressure},) and ({system.n_velocity},), got {q.shape} and {v.shape}"
        )
    return float(q @ system.B @ v)


def header(system: AssembledSystem) -> dict:
    return {
        "k": system.k,
        "velocity_space": system.velocity.name,
        "pressure_space": system.pressure.name,
        "n_velocity": system.n_velocity,
        "n_pressure": system.n_pressure,
        "quad_degree": system.quad_degree,
        "mesh_digest": system.mesh.digest(),
        "ordering_digest": system.ordering_digest(),
        "velocity_keys": [key.label() for key in system.velocity_keys],
        "pressure_keys": [key.label() for key in system.pressure_keys],
    }


def export_csv(system: AssembledSystem, directory) -> list[Path]:
    """Write A.csv, B.csv, Mp.csv (full, row-major) and header.json."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in ("A", "B", "Mp"):
        p = out / f"{name}.csv"
        np.savetxt(p, getattr(system, name), delimiter=",", fmt="%.17g")
        paths.append(p)
    p = out / "header.json"
    p.write_text(json.dumps(header(system), indent=2) + "\n", encoding="utf-8")
    paths.append(p)
    return paths
