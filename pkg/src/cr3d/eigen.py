"""Dense symmetric (generalized) eigenproblems by parallel cyclic Jacobi.

Rotations are grouped with a round-robin schedule: each round annihilates
n/2 disjoint off-diagonal pairs at once, so every round is a handful of
vectorized row/column updates.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .errors import DimensionMismatch, NoConvergence, NotSPD

__all__ = ["jacobi_eigh", "sym_eig", "cholesky_spd", "eig_residuals"]


def _round_robin(m: int):
    """Rounds of disjoint pairs covering all pairs of range(m) (m even)."""
    players = list(range(m))
    for _ in range(m - 1):
        half = m // 2
        yield players[:half], players[half:][::-1]
        players = [players[0]] + [players[-1]] + players[1:-1]


def _off_norm(a: np.ndarray) -> float:
    d = a.copy()
    np.fill_diagonal(d, 0.0)
    return float(np.linalg.norm(d))


def jacobi_eigh(a, tol: float = 1e-15, max_sweeps: int = 60):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DimensionMismatch(f"matrix must be square, got {a.shape}")
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    a = 0.5 * (a + a.T)
    m = n + (n % 2)
    if m != n:  # pad with an isolated dummy index
        pad = np.zeros((m, m))
        pad[:n, :n] = a
        a = pad
    vt = np.eye(m)  # rows are eigenvectors
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), np.eye(n)
    rounds = [(np.array(p), np.array(q)) for p, q in _round_robin(m)]
    for _ in range(max_sweeps):
        off = _off_norm(a)
        if off <= tol * scale:
            break
        for P, Q in rounds:
            apq = a[P, Q]
            app = a[P, P]
            aqq = a[Q, Q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            safe = np.where(active, apq, 1.0)
            tau = (aqq - app) / (2.0 * safe)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # A <- J^T A J as two row passes: J^T (J^T A)^T, using symmetry of A
            for first in (True, False):
                ap, aq = a[P], a[Q]
                a[P] = c[:, None] * ap - s[:, None] * aq
                a[Q] = s[:, None] * ap + c[:, None] * aq
                if first:
                    a = np.ascontiguousarray(a.T)
            a[P, Q] = 0.0
            a[Q, P] = 0.0
            vp, vq = vt[P], vt[Q]
            vt[P] = c[:, None] * vp - s[:, None] * vq
            vt[Q] = s[:, None] * vp + c[:, None] * vq
    else:
        off = _off_norm(a)
        if off > tol * scale * 1e3:
            raise NoConvergence(f"Jacobi did not converge: off-diagonal norm {off:.3e}")
    # the padding index has zero coupling, so it never takes part in a rotation
    w = np.diag(a)[:n].copy()
    v = vt.T[:n, :n]
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def cholesky_spd(m, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor; raises NotSPD."""
    try:
        return cholesky(np.asarray(m, dtype=float), lower=True)
    except np.linalg.LinAlgError:
        raise NotSPD(f"{what} is not symmetric positive definite") from None


def eig_residuals(a, m, w, x) -> np.ndarray:
    """Relative residuals ||a x - w m x|| / ((||a|| + |w| ||m||) ||x||) per pair."""
    na, nm = np.linalg.norm(a, 2), np.linalg.norm(m, 2)
    r = a @ x - (m @ x) * w
    return np.linalg.norm(r, axis=0) / ((na + np.abs(w) * nm) * np.linalg.norm(x, axis=0))


def sym_eig(a, m=None, tol: float = 1e-9):
    """Solve ``a x = w m x`` for symmetric a and SPD m (identity if omitted)."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if m is None:
        m = np.eye(n)
    m = np.asarray(m, dtype=float)
    if a.shape != (n, n) or m.shape != (n, n):
        raise DimensionMismatch(f"shapes {a.shape} and {m.shape} do not match")
    L = cholesky_spd(m, "mass matrix")
    c = solve_triangular(L, solve_triangular(L, a, lower=True).T, lower=True).T
    w, y = jacobi_eigh(c)
    x = solve_triangular(L.T, y, lower=False)
    if n and eig_residuals(a, m, w, x).max() > tol:
        raise NoConvergence("eigenpair residual audit failed")
    return w, x
