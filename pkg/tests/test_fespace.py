import math

import numpy as np
import pytest

from cr3d.errors import InvalidParameter, UnsupportedDegree
from cr3d.fespace import (
    BaryPoly,
    cr_cell_function,
    cr_facet_function,
    direct_sum_audit,
    enumerate_space,
    jump_moment_audit,
    pressure_local_basis,
)
from cr3d.mesh import generate
from cr3d.polylib import legendre
from cr3d.quadrature import simplex_rule


def _unit(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


@pytest.mark.parametrize("k", range(1, 7))
def test_dimensions_on_kuhn2(k):
    m = generate("kuhn_cube", n=2)
    nv, ne, nf, nt = len(m.inner_vertices), len(m.inner_edges), len(m.inner_facets), m.n_tets
    conf_prime = ne * (k - 1) + nf * math.comb(k - 1, 2) + nt * math.comb(k - 1, 3)
    assert enumerate_space("Sk0", m, k).dim == nv + conf_prime
    assert enumerate_space("Sk0prime", m, k).dim == conf_prime
    bnc = nt if k % 2 == 0 else nf
    assert enumerate_space("Bnc", m, k).dim == bnc
    cr = enumerate_space("CRk0", m, k)
    assert cr.dim == (nv if k % 2 == 0 else 0) + conf_prime + bnc
    assert enumerate_space("Pk-1", m, k).dim == nt * math.comb(k + 2, 3)


def test_space_errors():
    m = generate("reference")
    with pytest.raises(UnsupportedDegree):
        enumerate_space("CRk0", m, 7)
    with pytest.raises(UnsupportedDegree):
        enumerate_space("CRk0", m, 0)
    with pytest.raises(InvalidParameter):
        enumerate_space("RT", m, 2)


def test_ordering_is_deterministic():
    m = generate("kuhn_cube", n=2)
    a = [k.label() for k in enumerate_space("CRk0", m, 3).keys]
    b = [k.label() for k in enumerate_space("CRk0", m, 3).keys]
    assert a == b
    kinds = [k.kind for k in enumerate_space("CRk0", m, 4).keys]
    order = ["vertex", "edge", "facet", "cell", "cr_cell"]
    assert [order.index(x) for x in kinds] == sorted(order.index(x) for x in kinds)


def test_b2_cell_function_formula():
    # B_2^{CR,K} = (5/3)(sum_y L_2(1 - 2 lambda_y) - 1)
    lam = simplex_rule(3, 4).barycentric
    l2 = legendre(2)
    ref = 5 / 3 * (sum(l2(1 - 2 * lam[:, y]) for y in range(4)) - 1)
    assert np.allclose(cr_cell_function(2)(lam), ref, atol=1e-13)


def test_b1_facet_function_formula():
    lam = simplex_rule(3, 2).barycentric
    for z in range(4):
        assert np.allclose(cr_facet_function(1, z)(lam), 1 - 3 * lam[:, z])


def test_pressure_basis_sizes_and_k2_form():
    for k in range(1, 7):
        labels, polys = pressure_local_basis(k)
        assert len(polys) == math.comb(k + 2, 3) or (k == 2 and len(polys) == 4)
    _, polys = pressure_local_basis(2)
    lam = np.array([[0.1, 0.2, 0.3, 0.4]])
    assert np.allclose([p(lam)[0] for p in polys], 1 - 5 * lam[0])


def test_barypoly_arithmetic_and_gradient():
    p = BaryPoly.monomial((1, 1, 0, 0)) + 2.0
    q = p - BaryPoly.constant(2.0)
    lam = np.array([[0.1, 0.2, 0.3, 0.4]])
    assert np.isclose(q(lam)[0], 0.02)
    assert np.allclose(q.partials(lam)[0], [0.2, 0.1, 0, 0])
    grads = np.vstack([-np.ones(3), np.eye(3)])  # reference tet
    assert np.allclose(q.gradient(lam, grads)[0], [0.1 - 0.2, -0.2, -0.2])


@pytest.mark.parametrize("k", range(1, 7))
def test_conforming_functions_have_no_jumps(k):
    space = enumerate_space("Sk0", generate("kuhn_cube", n=2), k)
    rng = np.random.default_rng(k)
    assert jump_moment_audit(rng.normal(size=space.dim), space) <= 1e-12


@pytest.mark.parametrize("k", range(1, 7))
def test_cr_basis_functions_are_in_cr_max(k):
    mesh = generate("octahedron") if k % 2 else generate("reference")
    space = enumerate_space("Bnc", mesh, k)
    for i in range(space.dim):
        assert jump_moment_audit(_unit(space.dim, i), space) <= 1e-12


def test_discontinuous_function_is_not_cr():
    # 1 - 5 lambda_0 on a single tet has traces with nonzero P_1 moments
    mesh = generate("reference")
    space = enumerate_space("Pk-1", mesh, 2)
    assert jump_moment_audit(_unit(space.dim, 0), space) > 1e-3


def test_shape_and_evaluate():
    m = generate("octahedron")
    space = enumerate_space("Bnc", m, 1)
    sf = space.shape(0)
    assert len(sf.support) == 2
    t_out = next(t for t in range(m.n_tets) if t not in sf.support)
    vals, inside = space.evaluate(0, t_out, [[0.25] * 4])
    assert not inside and vals[0] == 0.0


@pytest.mark.parametrize("k,expected", [(1, 3.12), (2, 0.205)])
def test_direct_sum_regression(k, expected):
    assert direct_sum_audit(generate("kuhn_cube", n=1), k) == pytest.approx(expected, rel=5e-3)
