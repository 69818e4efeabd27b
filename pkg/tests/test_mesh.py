import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from cr3d.errors import Degenerate, IndexOutOfRange, InvalidParameter, NonConforming, UnknownEntity
from cr3d.mesh import (
    Mesh,
    barycentric,
    barycentric_gradients,
    detect_critical_edges,
    dump_mesh,
    generate,
    load_mesh,
)


def test_reference_topology():
    m = generate("reference")
    assert (m.n_vertices, m.n_tets, len(m.facets), len(m.edges)) == (4, 1, 4, 6)
    assert all(m.boundary_facet) and m.inner_facets == [] and m.inner_vertices == []
    assert np.isclose(m.volumes[0], 1 / 6)


@pytest.mark.parametrize("n,tets,verts", [(1, 6, 8), (2, 48, 27), (3, 162, 64)])
def test_kuhn_counts(n, tets, verts):
    m = generate("kuhn_cube", n=n)
    assert (m.n_tets, m.n_vertices) == (tets, verts)
    assert np.isclose(m.volumes.sum(), 1.0)
    # every tet contributes four facet slots
    assert sum(len(t) for t in m.facet_tets) == 4 * m.n_tets
    assert all(len(t) in (1, 2) for t in m.facet_tets)


def test_orientation_is_positive():
    m = Mesh(generate("reference").vertices, [[0, 2, 1, 3]])
    x = m.vertices[m.tets[0]]
    assert np.linalg.det(x[1:] - x[0]) > 0


def test_validation_errors():
    v = generate("reference").vertices
    with pytest.raises(IndexOutOfRange):
        Mesh(v, [[0, 1, 2, 7]])
    with pytest.raises(Degenerate):
        Mesh(v, [[0, 1, 1, 2]])
    with pytest.raises(Degenerate):
        Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], [[0, 1, 2, 3]])
    with pytest.raises(InvalidParameter):
        Mesh(np.zeros((4, 2)), [[0, 1, 2, 3]])
    with pytest.raises(InvalidParameter):
        generate("torus")
    with pytest.raises(InvalidParameter):
        generate("outer_critical_patch", iota=4)


def test_non_conforming_detected():
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, -1], [1, 1, 1]]
    with pytest.raises(NonConforming):
        Mesh(v, [[0, 1, 2, 3], [0, 1, 2, 4], [0, 1, 2, 5]])


def test_patches_and_local_index():
    m = generate("inner_critical_patch")
    assert m.patch((0, 1)) == (0, 1, 2, 3)
    assert len(m.patch(0)) == 4
    assert np.isclose(m.patch_volume((1, 0)), m.volumes.sum())
    with pytest.raises(UnknownEntity):
        m.patch((2, 4))
    with pytest.raises(UnknownEntity):
        m.local_index(0, 5)


def test_barycentric_gradients_partition_of_unity():
    rng = np.random.default_rng(1)
    for _ in range(100):
        m = Mesh(rng.normal(size=(4, 3)), [[0, 1, 2, 3]])
        g = barycentric_gradients(m, 0)
        assert np.abs(g.sum(axis=0)).max() <= 1e-12 * np.abs(g).max()
        x = m.vertices[m.tets[0]]
        assert np.allclose(g @ (x[1:] - x[0]).T, np.vstack([-np.ones(3), np.eye(3)]), atol=1e-10)


def test_barycentric_of_reference_point():
    m = generate("reference")
    assert np.allclose(barycentric(m, 0, [1, 0, 0]), [0, 1, 0, 0])


def test_directional_derivative_table():
    # d/dt_v lambda_z with t_v = v - p is -1 for z = p and delta_{vz} otherwise
    m = Mesh(np.random.default_rng(2).normal(size=(4, 3)), [[0, 1, 2, 3]])
    x, g = m.vertices[m.tets[0]], barycentric_gradients(m, 0)
    for v in (1, 2, 3):
        d = g @ (x[v] - x[0])
        assert np.allclose(d, [-1] + [float(z == v) for z in (1, 2, 3)], atol=1e-11)


def test_critical_edges_of_generated_meshes():
    inner = generate("inner_critical_patch")
    recs = {r.vertices: r for r in detect_critical_edges(inner)}
    assert recs[(0, 1)].kind == "inner" and recs[(0, 1)].tets == (0, 1, 2, 3)
    assert len(recs[(0, 1)].normals) == 2
    assert len(detect_critical_edges(generate("reference"))) == 6
    for iota in (2, 3):
        m = generate("outer_critical_patch", iota=iota)
        rec = {r.vertices: r for r in detect_critical_edges(m)}[(0, 1)]
        assert rec.kind == "outer" and rec.iota == iota
    octa = detect_critical_edges(generate("octahedron"))
    assert sum(r.kind == "inner" for r in octa) == 6
    assert len(detect_critical_edges(generate("kuhn_cube", n=1))) == 12


def test_perturbation_breaks_criticality():
    m = generate("inner_critical_patch", perturb=0.1)
    assert (0, 1) not in {r.vertices for r in detect_critical_edges(m)}
    # a coarse tolerance absorbs the perturbation again
    assert (0, 1) in {r.vertices for r in detect_critical_edges(m, tol=0.2)}


def test_detection_is_rigid_motion_invariant():
    m = generate("kuhn_cube", n=2)
    rot = Rotation.random(random_state=3).as_matrix()
    a = [(r.edge, r.kind, r.tets) for r in detect_critical_edges(m)]
    b = [(r.edge, r.kind, r.tets) for r in detect_critical_edges(m.transformed(3 * rot, [1, 2, 3]))]
    assert a == b


def test_json_round_trip(tmp_path):
    m = generate("octahedron", perturb=0.05)
    path = tmp_path / "m.json"
    dump_mesh(m, path)
    m2 = load_mesh(path)
    assert m2.digest() == m.digest()
    assert np.array_equal(m2.tets, m.tets)


def test_missing_field_in_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"vertices": []}')
    with pytest.raises(InvalidParameter):
        load_mesh(path)


def test_submesh():
    m = generate("kuhn_cube", n=1)
    sub, tmap = m.submesh([3, 1])
    assert sub.n_tets == 2 and list(tmap) == [1, 3]
    assert np.isclose(sub.volumes.sum(), m.volumes[[1, 3]].sum())


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_random_tet_facet_normals_are_unit(seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(4, 3))
    if abs(np.linalg.det(v[1:] - v[0])) < 1e-3:
        return
    m = Mesh(v, [[0, 1, 2, 3]])
    for f in range(4):
        assert np.isclose(np.linalg.norm(m.facet_normal(f)), 1.0)
