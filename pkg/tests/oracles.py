"""Independent reference computations used by the tests.

Everything here is written in the most direct way possible (explicit loops,
general-purpose LP solvers, grid scans) so that it shares no code path with
the package under test.
"""

import itertools

import numpy as np
from scipy.optimize import linprog


def gw_naive(X, Y, P):
    """Quadruple loop over ``|X[i,k] - Y[j,l]|^2 P[i,j] P[k,l]``."""
    X, Y, P = np.asarray(X), np.asarray(Y), np.asarray(P)
    N, M = P.shape
    total = 0.0
    for i in range(N):
        for j in range(M):
            for k in range(N):
                for l in range(M):
                    total += (X[i, k] - Y[j, l]) ** 2 * P[i, j] * P[k, l]
    return total


def transport_lp(C, p, q):
    """Transportation LP via scipy's HiGHS; returns ``(cost, plan)``."""
    C = np.asarray(C, dtype=float)
    N, M = C.shape
    A = []
    for i in range(N):
        row = np.zeros((N, M))
        row[i, :] = 1
        A.append(row.ravel())
    for j in range(M):
        col = np.zeros((N, M))
        col[:, j] = 1
        A.append(col.ravel())
    res = linprog(C.ravel(), A_eq=np.array(A), b_eq=np.concatenate([p, q]), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun, res.x.reshape(N, M)


def transport_vertices_2xm(p, q):
    """All vertices of the 2 x M transportation polytope by basis enumeration."""
    N, M = len(p), len(q)
    A = np.zeros((N + M, N * M))
    for i in range(N):
        A[i, i * M:(i + 1) * M] = 1
    for j in range(M):
        A[N + j, j::M] = 1
    b = np.concatenate([p, q])
    rank = N + M - 1
    A, b = A[:-1], b[:-1]
    verts = []
    for cols in itertools.combinations(range(N * M), rank):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        x = np.zeros(N * M)
        x[list(cols)] = np.linalg.solve(B, b)
        if x.min() >= -1e-12:
            verts.append(np.maximum(x, 0).reshape(N, M))
    return verts


def simplex_grid_min(G, step=1e-3):
    """Minimum of ``lam' G lam`` over a grid on the 2-simplex (S = 3)."""
    n = int(round(1 / step))
    a = np.arange(n + 1) * step
    L1, L2 = np.meshgrid(a, a, indexing="ij")
    mask = L1 + L2 <= 1 + 1e-12
    lam = np.stack([L1[mask], L2[mask], np.clip(1 - L1[mask] - L2[mask], 0, None)], axis=1)
    vals = np.einsum("ki,ij,kj->k", lam, G, lam)
    k = int(np.argmin(vals))
    return vals[k], lam[k]


def procrustes_rms(A, B):
    """RMS distance between centered ``A`` and the best orthogonal transform of centered ``B``."""
    A = A - A.mean(axis=0)
    B = B - B.mean(axis=0)
    U, _, Vt = np.linalg.svd(B.T @ A)
    R = U @ Vt
    return float(np.sqrt(np.mean(np.sum((B @ R - A) ** 2, axis=1))))


def random_plan(p, q, rng):
    """Random feasible plan by iterative proportional fitting of a random positive matrix."""
    P = rng.random((len(p), len(q))) + 0.05
    for _ in range(2000):
        P *= (p / P.sum(axis=1))[:, None]
        P *= (q / P.sum(axis=0))[None, :]
    return P


def gw_scan_2x2(X, Y, p, q, steps=20001):
    """Global GW over 2 x 2 couplings, which form a segment: dense scan plus the quadruple loop."""
    lo, hi = max(0.0, p[0] - q[1]), min(p[0], q[0])
    best = np.inf
    for t in np.linspace(lo, hi, steps):
        P = np.array([[t, p[0] - t], [q[0] - t, p[1] - q[0] + t]])
        best = min(best, gw_naive(X, Y, np.maximum(P, 0)))
    return best
