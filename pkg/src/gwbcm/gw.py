"""Discrete GW solvers: conditional gradient, entropic projections and a brute-force oracle."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import null_space

from .errors import TooLarge, ValidationError
from .network import (
    Coupling,
    GwResult,
    Network,
    constant_terms,
    cross_term,
    gw_objective,
    gw_objective_gradient,
    identity_like_coupling,
    product_coupling,
)
from .ot import round_to_marginals, sinkhorn, solve_exact_ot

METHODS = ("frank_wolfe", "entropic", "brute")
INITS = ("product", "identity_like", "custom")
BRUTE_MAX_CELLS = 9


@dataclass(frozen=True)
class GwSolverConfig:
    """Solver settings shared by all backends.

    Parameters
    ----------
    method : {"frank_wolfe", "entropic", "brute"}
    tol : float
        Relative stopping tolerance (Frank-Wolfe gap or objective change,
        scaled by the marginal-only part of the objective).
    max_iter : int
    epsilon : float, optional
        Entropic regularization; defaults to ``5e-3 * max|C|`` of the first
        linearized cost.
    init : {"product", "identity_like", "custom"}
    init_plan : array, optional
        Starting plan when ``init="custom"``.
    seed : int
        Seeds the perturbed starts used by ``restarts > 1``.
    restarts : int
    polish : bool
        Run exact minimization on the current support face between
        conditional-gradient steps.
    vertex_search : bool
        At a stationary vertex, try every edge of the transport polytope
        leaving it and resume from the best improving one.
    """

    method: str = "frank_wolfe"
    tol: float = 1e-9
    max_iter: int = 1000
    epsilon: float | None = None
    init: str = "product"
    init_plan: np.ndarray | None = None
    seed: int = 0
    restarts: int = 1
    polish: bool = True
    vertex_search: bool = True

    def __post_init__(self):
        method = self.method.replace("-", "_")
        object.__setattr__(self, "method", method)
        if method not in METHODS:
            raise ValidationError(f"unknown GW method {self.method!r}")
        if self.init not in INITS:
            raise ValidationError(f"unknown init {self.init!r}")
        if not self.tol > 0:
            raise ValidationError("tol must be > 0")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValidationError("epsilon must be > 0")
        if self.init == "custom" and self.init_plan is None:
            raise ValidationError("init='custom' requires init_plan")


def _scale(X: Network, Y: Network) -> float:
    return max(constant_terms(X, Y), np.finfo(float).tiny)


def _dirichlet_start(p, q, rng, sweeps: int = 200) -> np.ndarray:
    """Random feasible plan: Dirichlet rows rescaled to both marginals by IPF."""
    P = p[:, None] * rng.dirichlet(np.ones(q.size), size=p.size)
    for _ in range(sweeps):
        P *= (q / P.sum(axis=0))[None, :]
        P *= (p / P.sum(axis=1))[:, None]
        if np.abs(P.sum(axis=0) - q).max() < 1e-15:
            break
    return P


def _initial_plan(X: Network, Y: Network, cfg: GwSolverConfig, restart: int) -> np.ndarray:
    p, q = X.masses, Y.masses
    if restart > 0:
        return _dirichlet_start(p, q, np.random.default_rng([cfg.seed, restart]))
    if cfg.init == "identity_like":
        return identity_like_coupling(p, q)
    if cfg.init == "custom":
        return Coupling.from_plan(cfg.init_plan, p, q).plan.copy()
    return product_coupling(p, q)


def _face_hessian(Xw, Yw, rows, cols):
    H = Xw[np.ix_(rows, rows)] * Yw[np.ix_(cols, cols)]
    return 0.5 * (H + H.T)


def _polish_face(X: Network, Y: Network, P: np.ndarray, const: float, max_rounds: int | None = None):
    """Active-set descent on the support face of `P`.

    While the objective is nonconvex on the current face, move along a
    direction of negative curvature (oriented downhill) until an entry hits
    zero, which shrinks the face. Once the face is convex, jump to its
    minimizer, or to the boundary along the direction to it. Every accepted
    move strictly decreases the objective.
    """
    n, m = P.shape
    Xw, Yw = X.weights, Y.weights
    best = P
    best_val = const - 2.0 * cross_term(Xw, Yw, P)
    rounds = max_rounds if max_rounds is not None else n * m
    for _ in range(rounds):
        rows, cols = np.nonzero(best > 1e-14 * best.max())
        k = rows.size
        A = np.zeros((n + m, k))
        A[rows, np.arange(k)] = 1.0
        A[n + cols, np.arange(k)] = 1.0
        basis = null_space(A)
        if basis.shape[1] == 0:
            break
        H = _face_hessian(Xw, Yw, rows, cols)
        HN = H @ basis
        reduced = basis.T @ HN
        eig, vecs = np.linalg.eigh(reduced)
        z = best[rows, cols]
        ascent = basis.T @ (H @ z)  # minus a quarter of the objective gradient
        # objective is const - 2 z'Hz: convex on the face iff reduced H is NSD
        if eig[-1] > 1e-10 * max(1.0, np.abs(eig).max()):
            u = vecs[:, -1]
            if ascent @ u < 0:
                u = -u
            d = basis @ u
            full = False
        else:
            w = np.linalg.lstsq(reduced, -ascent, rcond=None)[0]
            d = basis @ w
            full = True
        if np.abs(d).max() <= 1e-15:
            break
        neg = d < 0
        if full:
            step = 1.0
            if np.any(z[neg] + d[neg] < 0):
                step = float(np.min(-z[neg] / d[neg]))
        else:
            step = float(np.min(-z[neg] / d[neg]))
        z_new = z + step * d
        z_new[z_new < 1e-16 * z.max()] = 0.0
        z_new = np.maximum(z_new, 0.0)
        cand = np.zeros_like(best)
        cand[rows, cols] = z_new
        val = const - 2.0 * cross_term(Xw, Yw, cand)
        if not val < best_val:
            break
        best, best_val = cand, val
        if full and step >= 1.0:
            break
    return best


def _support_tree(P: np.ndarray):
    """Spanning tree of the bipartite row/column graph containing the support of `P`.

    Returns the adjacency lists, or None when the support contains a cycle
    (``P`` is not a vertex of the transport polytope). Zero cells complete the
    tree when the vertex is degenerate.
    """
    n, m = P.shape
    parent = list(range(n + m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    adj = [[] for _ in range(n + m)]
    tol = 1e-14 * P.max()
    support = [(i, j) for i, j in zip(*np.nonzero(P > tol))]
    rest = [(i, j) for i, j in zip(*np.nonzero(P <= tol))]
    for k, (i, j) in enumerate(support + rest):
        a, b = find(i), find(n + j)
        if a == b:
            if k < len(support):
                return None
            continue
        parent[a] = b
        adj[i].append(n + j)
        adj[n + j].append(i)
    return adj


def _tree_cycle(adj, n, i, j):
    """Cells of the cycle closed by cell ``(i, j)``: (minus cells, plus cells)."""
    prev = {i: None}
    stack = [i]
    while stack:
        a = stack.pop()
        if a == n + j:
            break
        for b in adj[a]:
            if b not in prev:
                prev[b] = a
                stack.append(b)
    path = [n + j]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    path = path[::-1]
    cells = [(a, b - n) if a < n else (b, a - n) for a, b in zip(path[:-1], path[1:])]
    return cells[0::2], cells[1::2]


def _vertex_neighbor_step(X: Network, Y: Network, P: np.ndarray, G: np.ndarray, min_gain: float):
    """Best move from the vertex `P` along an edge of the transport polytope.

    Along an edge the objective is quadratic in the step length, so each of
    the edges leaving the current basis is minimized exactly. Returns the
    improved plan, or None when no edge lowers the objective by `min_gain`.
    """
    adj = _support_tree(P)
    if adj is None:
        return None
    n, m = P.shape
    Xw, Yw = X.weights, Y.weights
    in_tree = np.zeros((n, m), dtype=bool)
    for a in range(n):
        for b in adj[a]:
            in_tree[a, b - n] = True
    best_gain, best = min_gain, None
    for i, j in zip(*np.nonzero(~in_tree)):
        minus, plus = _tree_cycle(adj, n, i, j)
        t_max = min(P[c] for c in minus)
        if not t_max > 0:
            continue
        rows = np.array([i] + [c[0] for c in plus] + [c[0] for c in minus])
        cols = np.array([j] + [c[1] for c in plus] + [c[1] for c in minus])
        sign = np.concatenate([np.ones(1 + len(plus)), -np.ones(len(minus))])
        slope = float(sign @ G[rows, cols])
        curv = -2.0 * float(sign @ (Xw[np.ix_(rows, rows)] * Yw[np.ix_(cols, cols)]) @ sign)
        t = t_max
        if curv > 0:
            t = min(t_max, max(0.0, -slope / (2.0 * curv)))
        gain = -(slope * t + curv * t * t)
        if gain > best_gain:
            best_gain, best = gain, (rows, cols, sign, t)
    if best is None:
        return None
    rows, cols, sign, t = best
    P_new = P.copy()
    np.add.at(P_new, (rows, cols), t * sign)
    P_new[P_new < 1e-16] = 0.0
    return np.maximum(P_new, 0.0)


def _frank_wolfe_single(X: Network, Y: Network, cfg: GwSolverConfig, P: np.ndarray) -> GwResult:
    p, q = X.masses, Y.masses
    Xw, Yw = X.weights, Y.weights
    const = constant_terms(X, Y)
    scale = _scale(X, Y)

    def cross(D, E):
        return float(np.sum(D * (Xw @ E @ Yw.T)))

    trace = [max(const - 2.0 * cross(P, P), 0.0)]
    basis = None
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        G = gw_objective_gradient(X, Y, P)
        lp = solve_exact_ot(G, p, q, basis=basis)
        basis = lp.basis
        D = lp.plan.plan - P
        slope = float(np.sum(G * D))
        gap = -slope
        if gap <= cfg.tol * scale:
            # a zero gap can also mean a saddle (e.g. the product plan of
            # symmetric inputs); the face polish escapes along negative curvature
            if cfg.polish:
                P_new = _polish_face(X, Y, P, const)
                if cross(P_new, P_new) - cross(P, P) > 0.5 * cfg.tol * scale:
                    P = P_new
                    trace.append(max(const - 2.0 * cross(P, P), 0.0))
                    continue
            if cfg.vertex_search:
                # first-order stationary; a neighboring vertex may still be lower
                P_new = _vertex_neighbor_step(X, Y, P, G, cfg.tol * scale)
                if P_new is not None:
                    P = P_new
                    trace.append(max(const - 2.0 * cross(P, P), 0.0))
                    continue
            converged = True
            break
        curv = -2.0 * cross(D, D)
        if curv > 0:
            t = min(1.0, -slope / (2.0 * curv))
        else:
            t = 1.0
        P = P + t * D
        if cfg.polish:
            P = _polish_face(X, Y, P, const)
        trace.append(max(const - 2.0 * cross(P, P), 0.0))
    P = np.maximum(P, 0.0)
    coupling = Coupling.from_plan(P, p, q)
    return GwResult(coupling, gw_objective(X, Y, coupling), converged, it, tuple(trace))


def _swap_first(X: Network, Y: Network) -> bool:
    """Whether ``(Y, X)`` precedes ``(X, Y)`` in the canonical orientation.

    Solving every pair in one fixed orientation makes ``GW(Y, X)`` return the
    transposed plan of ``GW(X, Y)``, with the identical cost.
    """
    if X.size != Y.size:
        return X.size > Y.size
    a = np.concatenate([X.masses, X.weights.ravel()])
    b = np.concatenate([Y.masses, Y.weights.ravel()])
    diff = np.flatnonzero(a != b)
    return bool(diff.size) and bool(a[diff[0]] > b[diff[0]])


def _oriented(solve, X: Network, Y: Network, cfg: GwSolverConfig) -> GwResult:
    if not _swap_first(X, Y):
        return solve(X, Y, cfg)
    if cfg.init_plan is not None:
        cfg = replace(cfg, init_plan=np.asarray(cfg.init_plan, dtype=float).T)
    res = solve(Y, X, cfg)
    return GwResult(res.coupling.T, res.cost, res.converged, res.iterations, res.trace)


def gw_frank_wolfe(X: Network, Y: Network, cfg: GwSolverConfig | None = None) -> GwResult:
    """Conditional-gradient GW solver with exact linear subproblems.

    Each step linearizes the objective, solves the resulting transport LP
    exactly, and takes the exact line-search step along the segment (jumping
    to the far endpoint when the objective is concave along it). Several
    seeded restarts may be requested; the lowest cost wins, ties going to the
    lowest restart index.
    """
    return _oriented(_frank_wolfe_restarts, X, Y, cfg or GwSolverConfig())


def _frank_wolfe_restarts(X: Network, Y: Network, cfg: GwSolverConfig) -> GwResult:
    best = None
    for k in range(cfg.restarts):
        res = _frank_wolfe_single(X, Y, cfg, _initial_plan(X, Y, cfg, k))
        if best is None or res.cost < best.cost:
            best = res
    return best


def gw_entropic(X: Network, Y: Network, cfg: GwSolverConfig | None = None) -> GwResult:
    """Entropic projected iterations: ``P <- Sinkhorn(grad(P), epsilon)``.

    Stops on relative objective change ``<= tol`` and reports the
    unregularized objective of the final plan.
    """
    return _oriented(_entropic_restarts, X, Y, cfg or GwSolverConfig(method="entropic"))


ENTROPIC_INNER_TOL = 1e-12
ENTROPIC_INNER_ITER = 1000


def _annealed_sinkhorn(C, p, q, eps, duals):
    """Sinkhorn at `eps`; a cold start first walks eps down from ``max(C)`` by halving."""
    if duals is None:
        e = float(C.max())
        while e > 2.0 * eps:
            r = sinkhorn(C, p, q, e, max_iter=100, tol=ENTROPIC_INNER_TOL, init_duals=duals)
            duals = (r.dual_row, r.dual_col)
            e *= 0.5
    return sinkhorn(C, p, q, eps, max_iter=ENTROPIC_INNER_ITER, tol=ENTROPIC_INNER_TOL, init_duals=duals,
                    newton=True)


def _entropic_restarts(X: Network, Y: Network, cfg: GwSolverConfig) -> GwResult:
    p, q = X.masses, Y.masses
    scale = _scale(X, Y)
    best = None
    for k in range(cfg.restarts):
        P = _initial_plan(X, Y, cfg, k)
        C = 0.5 * gw_objective_gradient(X, Y, P)
        eps = cfg.epsilon if cfg.epsilon is not None else 5e-3 * max(float(np.abs(C).max()), 1e-300)
        value = gw_objective(X, Y, P)
        trace = [value]
        converged = False
        duals = None
        it = 0
        for it in range(1, cfg.max_iter + 1):
            C = 0.5 * gw_objective_gradient(X, Y, P)
            C = C - C.min()
            res = _annealed_sinkhorn(C, p, q, eps, duals)
            duals = (res.dual_row, res.dual_col)
            P = res.plan.plan
            new_value = gw_objective(X, Y, P)
            trace.append(new_value)
            if abs(new_value - value) <= cfg.tol * scale:
                converged = res.converged
                break
            value = new_value
        coupling = Coupling.from_plan(round_to_marginals(P, p, q), p, q)
        out = GwResult(coupling, gw_objective(X, Y, coupling), converged, it, tuple(trace))
        if best is None or out.cost < best.cost:
            best = out
    return best


def _project_transport(P, p, q, iters: int = 500):
    """Euclidean projection onto the transportation polytope (Dykstra)."""
    n, m = P.shape
    x = P.copy()
    corr = [np.zeros_like(x) for _ in range(3)]
    for _ in range(iters):
        prev = x
        y = x + corr[0]
        x = y - ((y.sum(axis=1) - p) / m)[:, None]
        corr[0] = y - x
        y = x + corr[1]
        x = y - ((y.sum(axis=0) - q) / n)[None, :]
        corr[1] = y - x
        y = x + corr[2]
        x = np.maximum(y, 0.0)
        corr[2] = y - x
        if np.abs(x - prev).max() < 1e-15:
            break
    return x


def _face_candidates(X: Network, Y: Network):
    """Stationary points of the objective on every support face of the polytope.

    The global minimizer of a quadratic over a polytope is a stationary point
    of the objective restricted to the relative interior of some face, so
    scanning all faces (all support patterns) is an exact search for
    ``N * M <= 9``.
    """
    n, m = X.size, Y.size
    p, q = X.masses, Y.masses
    Xw, Yw = X.weights, Y.weights
    cells = [(i, j) for i in range(n) for j in range(m)]
    rhs = np.concatenate([p, q])
    for r in range(1, n * m + 1):
        for subset in itertools.combinations(range(n * m), r):
            rows = np.array([cells[c][0] for c in subset])
            cols = np.array([cells[c][1] for c in subset])
            if np.unique(rows).size < n or np.unique(cols).size < m:
                continue
            A = np.zeros((n + m, r))
            A[rows, np.arange(r)] = 1.0
            A[n + cols, np.arange(r)] = 1.0
            z0, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            if np.abs(A @ z0 - rhs).max() > 1e-12:
                continue
            basis = null_space(A)
            if basis.shape[1]:
                H = _face_hessian(Xw, Yw, rows, cols)
                reduced = basis.T @ H @ basis
                w = -np.linalg.lstsq(reduced, basis.T @ (H @ z0), rcond=None)[0]
                z = z0 + basis @ w
            else:
                z = z0
            if z.min() < -1e-12:
                continue
            P = np.zeros((n, m))
            P[rows, cols] = np.maximum(z, 0.0)
            yield P


def gw_bruteforce(X: Network, Y: Network, cfg: GwSolverConfig | None = None) -> GwResult:
    """Global GW oracle for tiny problems (``N * M <= 9``).

    Grid search over the free block of the plan at step 0.01, projected
    gradient refinement of the 20 best grid points, and an exact scan of the
    stationary points of every face. The lowest objective found is returned.
    """
    n, m = X.size, Y.size
    if n * m > BRUTE_MAX_CELLS:
        raise TooLarge(f"brute force needs N*M <= {BRUTE_MAX_CELLS}, got {n}x{m}")
    p, q = X.masses, Y.masses
    const = constant_terms(X, Y)
    Xw, Yw = X.weights, Y.weights
    candidates = []

    # grid over the (n-1)x(m-1) free block; the last row/column are implied
    free = [(i, j) for i in range(n - 1) for j in range(m - 1)]
    if free:
        axes = [np.arange(0.0, min(p[i], q[j]) + 1e-12, 0.01) for i, j in free]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(free))
        vals, plans = [], []
        for chunk in np.array_split(grid, max(1, grid.shape[0] // 50000)):
            B = np.zeros((chunk.shape[0], n, m))
            for c, (i, j) in enumerate(free):
                B[:, i, j] = chunk[:, c]
            B[:, : n - 1, m - 1] = p[: n - 1] - B[:, : n - 1, : m - 1].sum(axis=2)
            B[:, n - 1, :] = q - B[:, : n - 1, :].sum(axis=1)
            ok = B.min(axis=(1, 2)) >= -1e-12
            B = np.maximum(B[ok], 0.0)
            if not B.shape[0]:
                continue
            XB = np.einsum("ik,bkl->bil", Xw, B)
            cross = np.einsum("bil,jl,bij->b", XB, Yw, B)
            vals.append(const - 2.0 * cross)
            plans.append(B)
        if vals:
            vals = np.concatenate(vals)
            plans = np.concatenate(plans)
            order = np.argsort(vals, kind="stable")[:20]
            for idx in order:
                P = plans[idx]
                step = 1.0 / (8.0 * max(np.abs(Xw).max() * np.abs(Yw).max(), 1e-12))
                for _ in range(500):
                    G = gw_objective_gradient(X, Y, P)
                    P_new = _project_transport(P - step * G, p, q, iters=200)
                    if np.abs(P_new - P).max() < 1e-12:
                        P = P_new
                        break
                    P = P_new
                candidates.append(P)
    else:
        candidates.append(np.outer(p, q))
    candidates.extend(_face_candidates(X, Y))

    best_P, best_val = None, np.inf
    for P in candidates:
        try:
            c = Coupling.from_plan(P, p, q, tol=1e-9)
        except ValidationError:
            continue
        val = gw_objective(X, Y, c)
        if val < best_val - 1e-15:
            best_P, best_val = c, val
    return GwResult(best_P, best_val, True, len(candidates), ())


def gw_distance(X: Network, Y: Network, cfg: GwSolverConfig | None = None) -> GwResult:
    """Dispatch to the backend named by ``cfg.method``."""
    cfg = cfg or GwSolverConfig()
    if cfg.method == "brute":
        return gw_bruteforce(X, Y, cfg)
    if cfg.method == "entropic":
        return gw_entropic(X, Y, cfg)
    return gw_frank_wolfe(X, Y, cfg)


def with_method(cfg: GwSolverConfig, **changes) -> GwSolverConfig:
    return replace(cfg, **changes)
