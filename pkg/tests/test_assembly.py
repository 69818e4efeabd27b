import json

import numpy as np
import pytest

from cr3d.assembly import assemble, export_csv, header, pairing
from cr3d.errors import DimensionMismatch, InvalidParameter
from cr3d.mesh import generate


@pytest.mark.parametrize("k", [1, 2, 3])
def test_constant_pressure_is_orthogonal_to_divergence(k):
    m = generate("kuhn_cube", n=1 if k > 1 else 2)
    s = assemble(m, k)
    one = s.constant_pressure()
    assert one @ s.Mp @ one == pytest.approx(m.volumes.sum(), rel=1e-13)
    scale = np.abs(s.B).max()
    assert np.abs(one @ s.B).max() <= 1e-12 * max(scale, 1.0)


def test_symmetry_and_definiteness():
    s = assemble(generate("kuhn_cube", n=1), 3)
    assert np.array_equal(s.A, s.A.T)
    assert np.array_equal(s.Mp, s.Mp.T)
    assert np.linalg.eigvalsh(s.A).min() > 0
    assert np.linalg.eigvalsh(s.Mp).min() > 0


def test_p0_mass_matrix_is_volume_diagonal():
    m = generate("kuhn_cube", n=2)
    s = assemble(m, 1, "Sk0")
    assert np.allclose(s.Mp, np.diag(m.volumes), atol=1e-15)


def test_hat_function_divergence_by_facet_fluxes():
    # B entry of (1 on tet t, phi_v e_c) equals the flux of phi_v e_c through the boundary of t
    m = generate("kuhn_cube", n=2)
    s = assemble(m, 1, "Sk0")
    v = m.inner_vertices[0]
    n = s.velocity.dim
    for t in range(m.n_tets):
        x = m.vertices[m.tets[t]]
        centroid = x.mean(axis=0)
        flux = np.zeros(3)
        for f in m.tet_facets[t]:
            if v not in m.facets[f]:
                continue
            nrm = m.facet_normal(f)
            if np.dot(nrm, m.vertices[m.facets[f][0]] - centroid) < 0:
                nrm = -nrm
            flux += m.facet_area(f) / 3 * nrm
        got = np.array([s.B[t, c * n + 0] for c in range(3)])
        assert np.allclose(got, flux, atol=1e-14)


def test_quadrature_margin_does_not_change_exact_integrals():
    m = generate("octahedron")
    a, b = assemble(m, 3, margin=0), assemble(m, 3, margin=4)
    for name in ("A", "B", "Mp"):
        assert np.allclose(getattr(a, name), getattr(b, name), atol=1e-13)


def test_scaling_with_mesh_size():
    m = generate("octahedron")
    s1, s2 = assemble(m, 2), assemble(m.transformed(2 * np.eye(3)), 2)
    assert np.allclose(s2.A, 2 * s1.A)
    assert np.allclose(s2.B, 4 * s1.B)
    assert np.allclose(s2.Mp, 8 * s1.Mp)


def test_pairing_and_errors():
    s = assemble(generate("octahedron"), 1)
    q = np.ones(s.n_pressure)
    v = np.ones(s.n_velocity)
    assert pairing(q, v, s) == pytest.approx(float(q @ s.B @ v))
    with pytest.raises(DimensionMismatch):
        pairing(q[:-1], v, s)
    with pytest.raises(InvalidParameter):
        assemble(generate("reference"), 2, "Taylor-Hood")
    with pytest.raises(InvalidParameter):
        assemble(generate("reference"), 2, margin=-1)


def test_vector_blocks():
    s = assemble(generate("octahedron"), 2)
    n = s.velocity.dim
    assert s.A.shape == (3 * n, 3 * n)
    assert np.array_equal(s.A[n:2 * n, n:2 * n], s.G)
    assert np.all(s.A[:n, n:] == 0)


def test_export_and_header(tmp_path):
    s = assemble(generate("inner_critical_patch"), 2)
    export_csv(s, tmp_path)
    assert np.array_equal(np.loadtxt(tmp_path / "B.csv", delimiter=",", ndmin=2), s.B)
    h = json.loads((tmp_path / "header.json").read_text())
    assert h["ordering_digest"] == header(s)["ordering_digest"] == s.ordering_digest()
    assert len(h["velocity_keys"]) == s.n_velocity
