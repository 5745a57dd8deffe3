"""Linear optimal transport: exact transportation simplex and log-domain Sinkhorn."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatch, Infeasible, NonPositiveMass, NumericalUnderflow, ValidationError
from .network import Coupling, northwest_corner

MARGINAL_SUM_TOL = 1e-9


@dataclass(frozen=True)
class LinOtResult:
    plan: Coupling
    cost: float
    dual_row: np.ndarray
    dual_col: np.ndarray
    converged: bool = True
    iterations: int = 0
    basis: tuple = ()


def _check_marginals(C, p, q, require_positive=True):
    C = np.asarray(C, dtype=float)
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if C.ndim != 2 or C.shape != (p.size, q.size):
        raise DimensionMismatch(f"cost shape {C.shape} does not match marginals ({p.size}, {q.size})")
    if abs(p.sum() - q.sum()) > MARGINAL_SUM_TOL:
        raise Infeasible(f"marginal totals differ: {p.sum()!r} vs {q.sum()!r}")
    if require_positive and (np.any(p <= 0) or np.any(q <= 0)):
        raise NonPositiveMass("marginals must be strictly positive")
    return C, p, q


def _initial_basis(p, q):
    """Northwest-corner plan plus the spanning-tree basis that produced it."""
    n, m = p.size, q.size
    x = northwest_corner(p, q)
    basis = []
    i = j = 0
    while True:
        basis.append((i, j))
        if i == n - 1 and j == m - 1:
            break
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        else:
            # mirror the corner rule: leave the row if its supply ran out first
            row_left = p[i] - x[i, : j + 1].sum()
            col_left = q[j] - x[: i + 1, j].sum()
            if row_left <= col_left:
                i += 1
            else:
                j += 1
    return x, basis


class _TransportSimplex:
    """Transportation simplex on a spanning-tree basis of the bipartite graph.

    Nodes ``0..n-1`` are rows and ``n..n+m-1`` columns. Entering arcs follow
    Dantzig's rule; after a run of degenerate pivots the rule switches to
    Bland's to rule out cycling.
    """

    def __init__(self, C, p, q, basis=None):
        self.C = C
        self.n, self.m = C.shape
        if basis is not None and self._valid_basis(basis, p, q):
            self.basis = list(basis)
            self.x = self._primal_from_basis(p, q)
        else:
            self.x, self.basis = _initial_basis(p, q)
        self.adj = [set() for _ in range(self.n + self.m)]
        for i, j in self.basis:
            self.adj[i].add(self.n + j)
            self.adj[self.n + j].add(i)

    def _valid_basis(self, basis, p, q):
        n, m = self.n, self.m
        if len(basis) != n + m - 1:
            return False
        if any(not (0 <= i < n and 0 <= j < m) for i, j in basis):
            return False
        self.basis = list(basis)
        x = self._primal_from_basis(p, q)
        return x is not None and x.min() >= -1e-14

    def _primal_from_basis(self, p, q):
        """Solve for basic flows by peeling leaves off the basis tree."""
        n, m = self.n, self.m
        x = np.zeros((n, m))
        adj = [set() for _ in range(n + m)]
        for i, j in self.basis:
            adj[i].add(n + j)
            adj[n + j].add(i)
        if not self._connected(adj):
            return None
        supply = np.concatenate([p, q]).astype(float)
        leaves = deque(v for v in range(n + m) if len(adj[v]) == 1)
        remaining = len(self.basis)
        while leaves and remaining:
            v = leaves.popleft()
            if len(adj[v]) != 1:
                continue
            (u,) = adj[v]
            flow = supply[v]
            if v < n:
                x[v, u - n] = flow
            else:
                x[u, v - n] = flow
            supply[u] -= flow
            supply[v] = 0.0
            adj[u].discard(v)
            adj[v].clear()
            remaining -= 1
            if len(adj[u]) == 1:
                leaves.append(u)
        x[np.abs(x) < 1e-17] = 0.0
        return np.maximum(x, 0.0) if x.min() >= -1e-14 else x

    def _connected(self, adj):
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return len(seen) == len(adj)

    def duals(self):
        n = self.n
        u = np.zeros(n)
        v = np.zeros(self.m)
        seen = [False] * (n + self.m)
        seen[0] = True
        stack = [0]
        C = self.C
        while stack:
            a = stack.pop()
            for b in self.adj[a]:
                if seen[b]:
                    continue
                seen[b] = True
                if a < n:
                    v[b - n] = C[a, b - n] - u[a]
                else:
                    u[b] = C[b, a - n] - v[a - n]
                stack.append(b)
        return u, v

    def _tree_path(self, src, dst):
        parent = {src: None}
        queue = deque([src])
        while queue:
            a = queue.popleft()
            if a == dst:
                break
            for b in self.adj[a]:
                if b not in parent:
                    parent[b] = a
                    queue.append(b)
        path = [dst]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        return path[::-1]

    def solve(self, max_pivots, tol):
        n = self.n
        scale = max(1.0, float(np.abs(self.C).max()))
        degenerate_run = 0
        bland = False
        for it in range(max_pivots):
            u, v = self.duals()
            R = self.C - u[:, None] - v[None, :]
            if bland:
                neg = np.flatnonzero(R.ravel() < -tol * scale)
                if neg.size == 0:
                    return it, u, v, True
                flat = int(neg[0])
            else:
                flat = int(np.argmin(R))
                if R.flat[flat] >= -tol * scale:
                    return it, u, v, True
            i, j = divmod(flat, self.m)
            path = self._tree_path(i, n + j)
            edges = []
            for a, b in zip(path[:-1], path[1:]):
                edges.append((a, b - n) if a < n else (b, a - n))
            # edges alternate -, +, -, ... starting at row i (odd length path)
            minus = edges[0::2]
            plus = edges[1::2]
            theta = min(self.x[e] for e in minus)
            candidates = [e for e in minus if self.x[e] <= theta]
            leave = min(candidates, key=lambda e: e[0] * self.m + e[1])
            for e in minus:
                self.x[e] -= theta
            for e in plus:
                self.x[e] += theta
            self.x[i, j] += theta
            self.x[leave] = 0.0
            self.basis.remove(leave)
            self.basis.append((i, j))
            self.adj[leave[0]].discard(n + leave[1])
            self.adj[n + leave[1]].discard(leave[0])
            self.adj[i].add(n + j)
            self.adj[n + j].add(i)
            if theta <= 0.0:
                degenerate_run += 1
                if degenerate_run > 2 * (self.n + self.m):
                    bland = True
            else:
                degenerate_run = 0
        u, v = self.duals()
        return max_pivots, u, v, False


def solve_exact_ot(C, p, q, *, basis=None, max_pivots: int | None = None, tol: float = 1e-13) -> LinOtResult:
    """Exact solution of ``min <C, P>`` over couplings of `p` and `q`.

    Returns a vertex of the transportation polytope (a basic solution with at
    most ``N + M - 1`` nonzeros). A previous ``result.basis`` may be passed as
    a warm start when the marginals are unchanged.
    """
    C, p, q = _check_marginals(C, p, q)
    n, m = C.shape
    q = q * (p.sum() / q.sum())
    solver = _TransportSimplex(C, p, q, basis)
    if max_pivots is None:
        max_pivots = 50 * (n + m) * (n + m) + 100
    iters, u, v, ok = solver.solve(max_pivots, tol)
    x = np.maximum(solver.x, 0.0)
    plan = Coupling.from_plan(x, p, q)
    return LinOtResult(
        plan=plan,
        cost=float(np.sum(C * x)),
        dual_row=u,
        dual_col=v,
        converged=ok,
        iterations=iters,
        basis=tuple(solver.basis),
    )


def round_to_marginals(P, p, q) -> np.ndarray:
    """Nearby plan with exactly the marginals `p` and `q`.

    Rows and then columns are scaled down to their targets, and the missing
    mass is added back as a rank-one correction (the rounding step of
    Altschuler, Weed and Rigollet). The change is at most of the order of the
    marginal violation of `P`.
    """
    P = np.maximum(np.asarray(P, dtype=float), 0.0)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    rows = P.sum(axis=1)
    P = P * np.minimum(1.0, np.divide(p, rows, out=np.ones_like(p), where=rows > 0))[:, None]
    cols = P.sum(axis=0)
    P = P * np.minimum(1.0, np.divide(q, cols, out=np.ones_like(q), where=cols > 0))[None, :]
    err_r = p - P.sum(axis=1)
    err_c = q - P.sum(axis=0)
    total = err_r.sum()
    if total > 0:
        P = P + np.outer(err_r, err_c) / total
    return P


def _dual_value(C, p, q, eps, f, g):
    with np.errstate(over="ignore"):
        P = np.exp((f[:, None] + g[None, :] - C) / eps)
    return float(f @ p + g @ q - eps * P.sum()), P


def _newton_dual(C, p, q, eps, f, g, tol, max_steps=100):
    """Newton ascent on the entropic dual with a backtracking line search.

    The last column potential is pinned to remove the constant shift, which
    leaves an ``(N + M - 1)``-dimensional system solved directly at each step.
    """
    n, m = p.size, q.size
    value, P = _dual_value(C, p, q, eps, f, g)
    for step in range(1, max_steps + 1):
        r, c = P.sum(axis=1), P.sum(axis=0)
        err = np.abs(r - p).sum() + np.abs(c - q).sum()
        if err <= tol:
            return f, g, True, step - 1
        grad = np.concatenate([p - r, (q - c)[:-1]])
        H = np.zeros((n + m - 1, n + m - 1))
        H[:n, :n] = np.diag(r)
        H[n:, n:] = np.diag(c[:-1])
        H[:n, n:] = P[:, :-1]
        H[n:, :n] = P[:, :-1].T
        H /= eps
        try:
            d = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(H, grad, rcond=None)[0]
        df, dg = d[:n], np.append(d[n:], 0.0)
        slope = float(grad @ d)
        alpha = 1.0
        for _ in range(40):
            f_new, g_new = f + alpha * df, g + alpha * dg
            new_value, P_new = _dual_value(C, p, q, eps, f_new, g_new)
            if np.isfinite(new_value) and new_value >= value + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
        else:
            return f, g, False, step
        f, g, value, P = f_new, g_new, new_value, P_new
    r, c = P.sum(axis=1), P.sum(axis=0)
    return f, g, bool(np.abs(r - p).sum() + np.abs(c - q).sum() <= tol), max_steps


def sinkhorn(
    C,
    p,
    q,
    epsilon: float,
    max_iter: int = 1000,
    tol: float = 1e-9,
    log_domain: bool = True,
    init_duals=None,
    newton: bool = False,
) -> LinOtResult:
    """Entropic OT by Sinkhorn scaling.

    The log-domain variant (default) is stable for small `epsilon`; the plain
    kernel variant raises :class:`NumericalUnderflow` when the Gibbs kernel
    underflows. On hitting `max_iter` the last iterate is returned with
    ``converged=False``. The reported cost is the unregularized ``<C, P>``.

    With ``newton=True`` (log domain only) at most 50 scaling sweeps are run
    and any remaining marginal error is removed by Newton steps on the dual,
    which converge quadratically where plain scaling crawls (small
    `epsilon`, nearly sparse plans).
    """
    C, p, q = _check_marginals(C, p, q)
    if not epsilon > 0:
        raise ValidationError("epsilon must be > 0")
    converged = False
    if log_domain:
        logp, logq = np.log(p), np.log(q)
        if init_duals is not None:
            f, g = (np.array(a, dtype=float) for a in init_duals)
        else:
            f, g = np.zeros(p.size), np.zeros(q.size)
        it = 0
        sweeps = min(max_iter, 50) if newton else max_iter
        for it in range(1, sweeps + 1):
            f = epsilon * (logp - logsumexp((g[None, :] - C) / epsilon, axis=1))
            g = epsilon * (logq - logsumexp((f[:, None] - C) / epsilon, axis=0))
            if it % 10 == 0 or it == sweeps:
                P = np.exp((f[:, None] + g[None, :] - C) / epsilon)
                if np.abs(P.sum(axis=1) - p).sum() <= tol:
                    converged = True
                    break
        if newton and not converged:
            f, g, converged, steps = _newton_dual(C, p, q, epsilon, f, g, tol)
            it += steps
        P = np.exp((f[:, None] + g[None, :] - C) / epsilon)
        u, v = f, g
    else:
        K = np.exp(-C / epsilon)
        if np.any(K.sum(axis=1) == 0) or np.any(K.sum(axis=0) == 0):
            raise NumericalUnderflow(
                "Gibbs kernel underflows at this epsilon; use the log-domain mode"
            )
        a = np.ones(p.size)
        b = np.ones(q.size)
        it = 0
        for it in range(1, max_iter + 1):
            a = p / (K @ b)
            b = q / (K.T @ a)
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise NumericalUnderflow("scaling vectors overflowed; use the log-domain mode")
            if it % 10 == 0 or it == max_iter:
                if np.abs(a * (K @ b) - p).sum() <= tol:
                    converged = True
                    break
        P = a[:, None] * K * b[None, :]
        with np.errstate(divide="ignore"):
            u, v = epsilon * np.log(a), epsilon * np.log(b)
    if converged:
        plan = Coupling.from_plan(P, p, q, tol=max(MARGINAL_SUM_TOL, tol))
    else:
        # unconverged iterates need not meet the marginals; keep them unchecked
        plan = Coupling(np.maximum(P, 0.0), p, q)
    return LinOtResult(plan=plan, cost=float(np.sum(C * P)), dual_row=u, dual_col=v, converged=converged, iterations=it)
