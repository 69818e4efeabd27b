import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh

from cr3d.eigen import _round_robin, cholesky_spd, eig_residuals, jacobi_eigh, sym_eig
from cr3d.errors import DimensionMismatch, NotSPD


def test_round_robin_covers_every_pair_once():
    for m in (2, 4, 8, 10):
        seen = []
        for p, q in _round_robin(m):
            assert len(set(p) | set(q)) == m
            seen += [tuple(sorted(x)) for x in zip(p, q)]
        assert sorted(seen) == sorted((i, j) for i in range(m) for j in range(i + 1, m))


@pytest.mark.parametrize("n", [1, 2, 5, 16, 41])
def test_matches_lapack(n):
    rng = np.random.default_rng(n)
    a = rng.normal(size=(n, n))
    a = a + a.T
    w, v = jacobi_eigh(a)
    assert np.allclose(w, np.linalg.eigvalsh(a), atol=1e-12 * np.abs(a).max())
    assert np.allclose(v.T @ v, np.eye(n), atol=1e-12)
    assert np.allclose(a @ v, v * w, atol=1e-11 * np.abs(a).max())


def test_degenerate_and_trivial_inputs():
    w, v = jacobi_eigh(np.zeros((3, 3)))
    assert np.array_equal(w, np.zeros(3))
    w, v = jacobi_eigh(np.eye(4) * 2.0)
    assert np.allclose(w, 2.0)
    w, v = jacobi_eigh(np.zeros((0, 0)))
    assert w.shape == (0,)
    with pytest.raises(DimensionMismatch):
        jacobi_eigh(np.zeros((2, 3)))


def test_generalized_problem():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(12, 12))
    a = a + a.T
    b = rng.normal(size=(12, 12))
    m = b @ b.T + 12 * np.eye(12)
    w, x = sym_eig(a, m)
    assert np.allclose(w, eigh(a, m, eigvals_only=True), atol=1e-11)
    assert eig_residuals(a, m, w, x).max() < 1e-13


def test_not_spd():
    with pytest.raises(NotSPD):
        cholesky_spd(np.diag([1.0, -1.0]))
    with pytest.raises(NotSPD):
        sym_eig(np.eye(2), np.diag([1.0, 0.0]))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000))
def test_clustered_spectra(n, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    w0 = np.round(rng.normal(size=n), 1)  # repeated eigenvalues are likely
    a = (q * w0) @ q.T
    w, v = jacobi_eigh(a)
    assert np.allclose(w, np.sort(w0), atol=1e-12)
    assert np.allclose(a @ v, v * w, atol=1e-12)
