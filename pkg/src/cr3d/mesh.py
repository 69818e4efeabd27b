"""Conforming tetrahedral meshes: topology, patches, geometry, critical edges."""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import Degenerate, IndexOutOfRange, InvalidParameter, NonConforming, UnknownEntity

__all__ = [
    "Mesh",
    "CriticalEdgeRecord",
    "build",
    "generate",
    "detect_critical_edges",
    "barycentric",
    "barycentric_gradients",
    "load_mesh",
    "dump_mesh",
    "REFERENCE_VERTICES",
]

REFERENCE_VERTICES = np.array(
    [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
)

# local vertex triples of the facet opposite local vertex i
_OPPOSITE = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


def _signed_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    v = vertices[tets]
    d = v[:, 1:, :] - v[:, :1, :]
    return np.linalg.det(d) / 6.0


class Mesh:
    """Immutable conforming tetrahedral mesh.

    Tetrahedra are stored positively oriented.  Facets and edges are keyed by
    sorted vertex-index tuples and numbered in lexicographic key order.
    """

    def __init__(self, vertices, tets):
        vertices = np.array(vertices, dtype=float)
        tets = np.array(tets, dtype=np.int64).reshape(-1, 4)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise InvalidParameter("vertices must be an (n, 3) array")
        if tets.size and (tets.min() < 0 or tets.max() >= len(vertices)):
            raise IndexOutOfRange("tetrahedron references a missing vertex")
        for t in tets:
            if len(set(t.tolist())) != 4:
                raise Degenerate(f"tetrahedron {t.tolist()} repeats a vertex")
        vol = _signed_volumes(vertices, tets)
        extent = np.ptp(vertices, axis=0).max() if len(vertices) else 0.0
        bad = np.abs(vol) <= 1e-14 * extent**3
        if bad.any():
            raise Degenerate(f"tetrahedra {np.flatnonzero(bad).tolist()} have (near) zero volume")
        neg = vol < 0
        tets[neg] = tets[neg][:, [0, 1, 3, 2]]
        self.vertices = vertices
        self.tets = tets
        self.volumes = np.abs(vol)
        self.vertices.setflags(write=False)
        self.tets.setflags(write=False)
        self.volumes.setflags(write=False)
        self._build_topology()

    def _build_topology(self):
        facet_tets: dict[tuple, list[int]] = {}
        edge_tets: dict[tuple, list[int]] = {}
        vertex_tets: dict[int, list[int]] = {}
        for t, tet in enumerate(self.tets.tolist()):
            for loc in _OPPOSITE:
                facet_tets.setdefault(tuple(sorted(tet[i] for i in loc)), []).append(t)
            for a, b in itertools.combinations(tet, 2):
                edge_tets.setdefault((min(a, b), max(a, b)), []).append(t)
            for v in tet:
                vertex_tets.setdefault(v, []).append(t)
        for key, adj in facet_tets.items():
            if len(adj) > 2:
                raise NonConforming(f"facet {key} is shared by {len(adj)} tetrahedra")
        self.facets = sorted(facet_tets)
        self.facet_index = {f: i for i, f in enumerate(self.facets)}
        self.facet_tets = [tuple(facet_tets[f]) for f in self.facets]
        self.edges = sorted(edge_tets)
        self.edge_index = {e: i for i, e in enumerate(self.edges)}
        self.edge_tets = [tuple(edge_tets[e]) for e in self.edges]
        self.vertex_tets = [tuple(vertex_tets.get(v, ())) for v in range(len(self.vertices))]

        self.boundary_facet = np.array([len(adj) == 1 for adj in self.facet_tets], dtype=bool)
        self.boundary_edge = np.zeros(len(self.edges), dtype=bool)
        self.boundary_vertex = np.zeros(len(self.vertices), dtype=bool)
        for f in np.flatnonzero(self.boundary_facet):
            key = self.facets[f]
            for a, b in itertools.combinations(key, 2):
                self.boundary_edge[self.edge_index[(a, b)]] = True
            self.boundary_vertex[list(key)] = True

        # facet/edge ids per tet in local order
        self.tet_facets = np.array(
            [[self.facet_index[tuple(sorted(tet[i] for i in loc))] for loc in _OPPOSITE]
             for tet in self.tets.tolist()],
            dtype=np.int64,
        ).reshape(-1, 4)

    # -- sizes ---------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    @property
    def inner_facets(self) -> list[int]:
        return [i for i in range(len(self.facets)) if not self.boundary_facet[i]]

    @property
    def inner_edges(self) -> list[int]:
        return [i for i in range(len(self.edges)) if not self.boundary_edge[i]]

    @property
    def inner_vertices(self) -> list[int]:
        return [v for v in range(self.n_vertices) if not self.boundary_vertex[v] and self.vertex_tets[v]]

    @cached_property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.ptp(self.vertices, axis=0)))

    # -- queries ---------------------------------------------------------------
    def local_index(self, tet: int, vertex: int) -> int:
        row = self.tets[tet].tolist()
        try:
            return row.index(vertex)
        except ValueError:
            raise UnknownEntity(f"vertex {vertex} is not in tet {tet}") from None

    def patch(self, entity) -> tuple[int, ...]:
        """Tets containing a vertex (int), an edge (2-tuple) or a facet (3-tuple)."""
        if isinstance(entity, (int, np.integer)):
            if not 0 <= entity < self.n_vertices:
                raise UnknownEntity(f"vertex {entity}")
            return self.vertex_tets[entity]
        key = tuple(sorted(int(v) for v in entity))
        if len(key) == 1:
            return self.patch(key[0])
        if len(key) == 2 and key in self.edge_index:
            return self.edge_tets[self.edge_index[key]]
        if len(key) == 3 and key in self.facet_index:
            return self.facet_tets[self.facet_index[key]]
        raise UnknownEntity(f"no mesh entity with vertices {key}")

    def patch_volume(self, entity) -> float:
        return float(sum(self.volumes[t] for t in self.patch(entity)))

    def facet_area(self, facet: int) -> float:
        p = self.vertices[list(self.facets[facet])]
        return 0.5 * float(np.linalg.norm(np.cross(p[1] - p[0], p[2] - p[0])))

    def facet_normal(self, facet: int) -> np.ndarray:
        p = self.vertices[list(self.facets[facet])]
        n = np.cross(p[1] - p[0], p[2] - p[0])
        return n / np.linalg.norm(n)

    def submesh(self, tets) -> tuple["Mesh", np.ndarray]:
        """Mesh made of the given tets; returns it with the old->new tet map."""
        tets = sorted(set(int(t) for t in tets))
        used = sorted(set(self.tets[tets].ravel().tolist()))
        renum = {v: i for i, v in enumerate(used)}
        sub = Mesh(self.vertices[used], [[renum[v] for v in self.tets[t]] for t in tets])
        return sub, np.array(tets)

    def summary(self) -> dict:
        return {
            "n_vertices": self.n_vertices,
            "n_tets": self.n_tets,
            "n_facets": len(self.facets),
            "n_inner_facets": len(self.inner_facets),
            "n_edges": len(self.edges),
            "n_inner_edges": len(self.inner_edges),
            "n_inner_vertices": len(self.inner_vertices),
            "volume": float(self.volumes.sum()),
            "digest": self.digest(),
        }

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.tets).tobytes())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist(), "tets": self.tets.tolist()}

    def transformed(self, matrix=None, shift=None) -> "Mesh":
        """Image under x -> matrix @ x + shift (same tet numbering)."""
        x = self.vertices
        if matrix is not None:
            x = x @ np.asarray(matrix, dtype=float).T
        if shift is not None:
            x = x + np.asarray(shift, dtype=float)
        return Mesh(x, self.tets)


def build(vertices, tets) -> Mesh:
    return Mesh(vertices, tets)


# -- geometry -------------------------------------------------------------------
def barycentric_gradients(mesh: Mesh, tet: int) -> np.ndarray:
    """Constant gradients (4, 3) of the barycentric coordinates of a tet."""
    v = mesh.vertices[mesh.tets[tet]]
    jac = (v[1:] - v[0]).T
    try:
        inv = np.linalg.inv(jac)
    except np.linalg.LinAlgError:
        raise Degenerate(f"tet {tet} is degenerate") from None
    return np.vstack([-inv.sum(axis=0), inv])


def barycentric(mesh: Mesh, tet: int, point) -> np.ndarray:
    v = mesh.vertices[mesh.tets[tet]]
    grads = barycentric_gradients(mesh, tet)
    rest = grads[1:] @ (np.asarray(point, dtype=float) - v[0])
    return np.concatenate([[1.0 - rest.sum()], rest])


# -- critical edges -----------------------------------------------------------------
@dataclass(frozen=True)
class CriticalEdgeRecord:
    edge: int
    vertices: tuple[int, int]
    kind: str  # "inner" | "outer"
    tets: tuple[int, ...]  # cyclic (inner) or chain (outer) order
    normals: tuple[tuple[float, float, float], ...]
    facets: tuple[int, ...] = field(default=())

    @property
    def iota(self) -> int:
        return len(self.tets)

    def to_dict(self) -> dict:
        return {
            "edge": self.edge,
            "vertices": list(self.vertices),
            "kind": self.kind,
            "tets": list(self.tets),
            "normals": [list(n) for n in self.normals],
            "iota": self.iota,
        }


def _cluster_planes(mesh: Mesh, edge_key, facet_ids, tol: float) -> list[list[int]]:
    p0 = mesh.vertices[edge_key[0]]
    scale = max(np.linalg.norm(mesh.vertices[edge_key[1]] - p0), 1e-300)
    clusters: list[list[int]] = []
    reps: list[np.ndarray] = []
    for f in facet_ids:
        n = mesh.facet_normal(f)
        # the facet vertex off the edge must lie in the representative plane
        apex = next(v for v in mesh.facets[f] if v not in edge_key)
        for c, r in zip(clusters, reps):
            if np.linalg.norm(np.cross(n, r)) <= tol:
                d = abs(np.dot(mesh.vertices[apex] - p0, r))
                if d <= tol * max(scale, np.linalg.norm(mesh.vertices[apex] - p0)):
                    c.append(f)
                    break
        else:
            clusters.append([f])
            reps.append(n)
    return clusters


def _order_patch(mesh: Mesh, edge_key, tets, facet_ids, inner: bool) -> tuple[int, ...]:
    tets = sorted(tets)
    nbrs = {t: [] for t in tets}
    for f in facet_ids:
        adj = mesh.facet_tets[f]
        if len(adj) == 2:
            a, b = adj
            nbrs[a].append(b)
            nbrs[b].append(a)
    if inner:
        start = tets[0]
    else:
        ends = [t for t in tets if len(nbrs[t]) <= 1]
        start = min(ends) if ends else tets[0]
    order = [start]
    while len(order) < len(tets):
        cand = sorted(t for t in nbrs[order[-1]] if t not in order)
        if not cand:
            break
        order.append(cand[0])
    return tuple(order)


def detect_critical_edges(mesh: Mesh, tol: float = 1e-9) -> list[CriticalEdgeRecord]:
    """Edges whose containing facets lie in at most two planes."""
    edge_facets: dict[int, list[int]] = {}
    for f, key in enumerate(mesh.facets):
        for a, b in itertools.combinations(key, 2):
            edge_facets.setdefault(mesh.edge_index[(a, b)], []).append(f)
    out = []
    for e, key in enumerate(mesh.edges):
        fids = edge_facets[e]
        clusters = _cluster_planes(mesh, key, fids, tol)
        if len(clusters) > 2:
            continue
        inner = not mesh.boundary_edge[e]
        order = _order_patch(mesh, key, mesh.edge_tets[e], fids, inner)
        normals = tuple(tuple(float(v) for v in mesh.facet_normal(c[0])) for c in clusters)
        out.append(
            CriticalEdgeRecord(
                edge=e,
                vertices=key,
                kind="inner" if inner else "outer",
                tets=order,
                normals=normals,
                facets=tuple(fids),
            )
        )
    return out


# -- generators -----------------------------------------------------------------------
def _kuhn_cube(n: int) -> tuple[np.ndarray, list]:
    g = np.arange(n + 1) / n
    xs, ys, zs = np.meshgrid(g, g, g, indexing="ij")
    verts = np.column_stack([xs.ravel(), ys.ravel(), zs.ravel()])

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    tets = []
    for i, j, k in itertools.product(range(n), repeat=3):
        for perm in itertools.permutations(range(3)):
            c = [i, j, k]
            path = [vid(*c)]
            for axis in perm:
                c[axis] += 1
                path.append(vid(*c))
            tets.append(path)
    return verts, tets


def generate(kind: str, n: int = 1, iota: int = 1, perturb: float = 0.0) -> Mesh:
    """Named test meshes.

    ``reference``                 the reference tetrahedron
    ``inner_critical_patch``      four tets around the inner edge [(0,0,0), (0,0,1)]
                                  whose facets lie in the planes x=0 and y=0;
                                  ``perturb`` moves a_1 off the plane y=0
    ``outer_critical_patch``      ``iota`` = 1, 2 or 3 tets around a boundary edge
    ``octahedron``                eight tets around an interior vertex; all six
                                  edges at the centre are inner critical edges
    ``kuhn_cube``                 n^3 subcubes of [0,1]^3, six tets each
    """
    p, q = [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]
    ring = [[1.0, perturb, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]
    if kind == "reference":
        return Mesh(REFERENCE_VERTICES, [[0, 1, 2, 3]])
    if kind == "inner_critical_patch":
        return Mesh([p, q] + ring, [[0, 1, 2 + i, 2 + (i + 1) % 4] for i in range(4)])
    if kind == "outer_critical_patch":
        if iota == 1:
            return Mesh(REFERENCE_VERTICES, [[0, 1, 2, 3]])
        if iota in (2, 3):
            return Mesh([p, q] + ring[: iota + 1], [[0, 1, 2 + i, 3 + i] for i in range(iota)])
        raise InvalidParameter(f"iota must be 1, 2 or 3, got {iota}")
    if kind == "octahedron":
        r = [0.0, 0.0, -1.0]
        tets = [[0, 1, 2 + i, 2 + (i + 1) % 4] for i in range(4)]
        tets += [[6, 0, 2 + i, 2 + (i + 1) % 4] for i in range(4)]
        return Mesh([p, q] + ring + [r], tets)
    if kind == "kuhn_cube":
        if n < 1:
            raise InvalidParameter(f"n must be >= 1, got {n}")
        return Mesh(*_kuhn_cube(n))
    raise InvalidParameter(f"unknown mesh kind {kind!r}")


# -- JSON --------------------------------------------------------------------------------
def load_mesh(path) -> Mesh:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return Mesh(data["vertices"], data["tets"])
    except KeyError as exc:
        raise InvalidParameter(f"mesh file lacks field {exc}") from None


def dump_mesh(mesh: Mesh, path=None) -> str:
    text = json.dumps(mesh.to_dict())
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text
