"""Basic Crouzeix-Raviart elements on tetrahedra: Stokes forms, inf-sup constants,
critical-edge spurious pressures and their elimination."""

__version__ = "0.1.0"

from .assembly import AssembledSystem, assemble, pairing
from .errors import Cr3dError
from .fespace import FESpace, enumerate_space
from .mesh import Mesh, detect_critical_edges, generate, load_mesh
from .polylib import jacobi, legendre, q_dk, q_k
from .quadrature import simplex_rule
from .stability import (
    build_critical_pressure,
    certify_elimination,
    certify_spurious,
    infsup_constant,
    nspace_dim,
)

__all__ = [
    "__version__",
    "AssembledSystem",
    "Cr3dError",
    "FESpace",
    "Mesh",
    "assemble",
    "build_critical_pressure",
    "certify_elimination",
    "certify_spurious",
    "detect_critical_edges",
    "enumerate_space",
    "generate",
    "infsup_constant",
    "jacobi",
    "legendre",
    "load_mesh",
    "nspace_dim",
    "pairing",
    "q_dk",
    "q_k",
    "simplex_rule",
]
