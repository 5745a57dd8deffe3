"""Recovery of barycentric coordinates from a network.

Two routes are provided. The fixed-point route solves GW between each
template and the input, forms the conjugated templates ``F_s`` and minimizes
``|| sum_s lam_s F_s - Y ||^2`` over the simplex. The blow-up route aligns all
templates with the input first and minimizes the weighted norm of the
barycenter gradient ``sum_s lam_s X^s_b - Y_b``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .blowup import DEFAULT_SUPPORT_TOL, BlowupAlignment, blowup_multi
from .errors import DimensionMismatch, ValidationError
from .gw import GwSolverConfig, gw_distance
from .network import Coupling, Network, SimplexWeights, as_simplex, weighted_trace
from .qp import QpConfig, min_quad_simplex, simplex_unique

MEMBERSHIP_THRESHOLD = 1e-6


@dataclass(frozen=True)
class AnalysisSystem:
    """Quadratic form and equivalent linear system for the coordinates.

    ``gram`` is Q (fixed point) or A (blow-up); ``linear_matrix`` and
    ``linear_rhs`` are (K, b) or (L, c). ``scale`` is the squared norm of the
    input used to normalize residuals.
    """

    gram: np.ndarray
    linear_matrix: np.ndarray
    linear_rhs: np.ndarray
    method: str
    scale: float
    components: list = field(default_factory=list, repr=False)
    plans: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class AnalysisResult:
    lam: SimplexWeights
    residual: float
    normalized_residual: float
    kkt_residual: float
    plans_or_alignment: object
    unique: bool
    method: str
    system: AnalysisSystem = field(repr=False, default=None)

    @property
    def in_barycenter_space(self) -> bool:
        return self.normalized_residual <= MEMBERSHIP_THRESHOLD


def f_matrix(X: Network, Y: Network, pi) -> np.ndarray:
    """Template ``X`` transported onto the nodes of ``Y``: ``(pi' X pi) / (q q')``."""
    P = pi.plan if isinstance(pi, Coupling) else np.asarray(pi, dtype=float)
    if P.shape != (X.size, Y.size):
        raise DimensionMismatch(f"plan shape {P.shape} != ({X.size}, {Y.size})")
    q = Y.masses
    return (P.T @ X.weights @ P) / np.outer(q, q)


def solve_plans(templates, Y: Network, solver: GwSolverConfig | None = None, threads: int = 1):
    """Plans from each template to ``Y``; independent solves optionally run in threads."""
    solver = solver or GwSolverConfig()
    if threads > 1 and len(templates) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda X: gw_distance(X, Y, solver), templates))
    else:
        results = [gw_distance(X, Y, solver) for X in templates]
    return results


def _gram_system(mats, target, inner):
    S = len(mats)
    K = np.empty((S, S))
    for s in range(S):
        for r in range(s, S):
            K[s, r] = K[r, s] = inner(mats[s], mats[r])
    b = np.array([inner(target, F) for F in mats])
    diffs = [F - target for F in mats]
    Q = np.empty((S, S))
    for s in range(S):
        for r in range(s, S):
            Q[s, r] = Q[r, s] = inner(diffs[s], diffs[r])
    return Q, K, b, inner(target, target)


def _plain_trace(A, B):
    return float(np.sum(A * B))


def build_fixed_point_system(
    templates,
    Y: Network,
    solver: GwSolverConfig | None = None,
    *,
    plans=None,
    weighted: bool = False,
    threads: int = 1,
) -> AnalysisSystem:
    """Assemble Q, K and b of the fixed-point route.

    Parameters
    ----------
    templates : list of Network
    Y : Network
    solver : GwSolverConfig
        Used to compute the plans when `plans` is not given.
    plans : list of Coupling, optional
        Precomputed template-to-``Y`` plans.
    weighted : bool
        Use the ``q``-weighted trace instead of the plain Frobenius trace.
    """
    if len(templates) == 0:
        raise ValidationError("at least one template is required")
    if plans is None:
        plans = [r.coupling for r in solve_plans(templates, Y, solver, threads)]
    if len(plans) != len(templates):
        raise DimensionMismatch("one plan per template is required")
    F = [f_matrix(X, Y, P) for X, P in zip(templates, plans)]
    target = np.asarray(Y.weights)
    if weighted:
        q = Y.masses
        inner = lambda A, B: weighted_trace(A, B, q)  # noqa: E731
    else:
        inner = _plain_trace
    Q, K, b, scale = _gram_system(F, target, inner)
    return AnalysisSystem(Q, K, b, "fixed_point", scale, F, tuple(plans))


def _solve_system(system: AnalysisSystem, qp_cfg: QpConfig | None):
    res = min_quad_simplex(system.gram, qp_cfg)
    residual = max(res.value, 0.0)
    normalized = residual / system.scale if system.scale > 0 else residual
    return res, residual, normalized


def analyze_fixed_point(
    templates,
    Y: Network,
    solver: GwSolverConfig | None = None,
    qp_cfg: QpConfig | None = None,
    *,
    threads: int = 1,
) -> AnalysisResult:
    """Coordinates of ``Y`` by the fixed-point route.

    The residual is the minimal value of ``lam' Q lam``; it vanishes exactly
    when ``Y`` is a fixed point of the synthesis update for the returned
    weights.
    """
    system = build_fixed_point_system(templates, Y, solver, threads=threads)
    res, residual, normalized = _solve_system(system, qp_cfg)
    return AnalysisResult(
        res.lam, residual, normalized, res.kkt_residual, system.plans, simplex_unique(system.gram), "fixed_point", system
    )


def build_blowup_system(
    templates,
    Y: Network,
    solver: GwSolverConfig | None = None,
    support_tol: float = DEFAULT_SUPPORT_TOL,
    *,
    alignment: BlowupAlignment | None = None,
):
    """Assemble A, L and c of the blow-up route; returns ``(system, alignment)``."""
    if alignment is None:
        alignment = blowup_multi(templates, Y, solver, support_tol)
    q = alignment.q_b
    Q, K, b, scale = _gram_system(
        list(alignment.templates_b), alignment.reference_b, lambda A, B: weighted_trace(A, B, q)
    )
    system = AnalysisSystem(Q, K, b, "blowup", scale, list(alignment.templates_b), alignment.plans)
    return system, alignment


def analyze_blowup(
    templates,
    Y: Network,
    solver: GwSolverConfig | None = None,
    support_tol: float = DEFAULT_SUPPORT_TOL,
    qp_cfg: QpConfig | None = None,
    *,
    alignment: BlowupAlignment | None = None,
) -> AnalysisResult:
    """Coordinates of ``Y`` by the blow-up route (weak barycenter characterization)."""
    system, alignment = build_blowup_system(templates, Y, solver, support_tol, alignment=alignment)
    res, residual, normalized = _solve_system(system, qp_cfg)
    return AnalysisResult(
        res.lam, residual, normalized, res.kkt_residual, alignment, simplex_unique(system.gram), "blowup", system
    )


def _weights(lam, S):
    w = as_simplex(lam).lam
    if w.size != S:
        raise DimensionMismatch(f"{w.size} weights for {S} templates")
    return w


def barycenter_gradient(lam, alignment: BlowupAlignment) -> np.ndarray:
    """``sum_s lam_s X^s_b - Y_b`` on the aligned nodes."""
    w = _weights(lam, len(alignment.templates_b))
    G = -np.asarray(alignment.reference_b, dtype=float)
    for ws, B in zip(w, alignment.templates_b):
        G = G + ws * B
    return G


def frechet_functional_aligned(lam, templates_b, Y_b, q_b) -> float:
    """``sum_s lam_s ||X^s_b - Y_b||_q^2`` with every plan held at the identity."""
    w = _weights(lam, len(templates_b))
    return float(sum(ws * weighted_trace(B - Y_b, B - Y_b, q_b) for ws, B in zip(w, templates_b)))


def reconstruct_fixed_point(templates, Y: Network, lam, plans=None, solver: GwSolverConfig | None = None) -> Network:
    """``(sum_s lam_s F_s, q)``, solving for the plans when they are not supplied."""
    w = _weights(lam, len(templates))
    if plans is None:
        plans = [r.coupling for r in solve_plans(templates, Y, solver)]
    if len(plans) != len(templates):
        raise DimensionMismatch("one plan per template is required")
    out = sum(ws * f_matrix(X, Y, P) for ws, X, P in zip(w, templates, plans))
    return Network(_ro(out), Y.masses)


def reconstruct_blowup(alignment: BlowupAlignment, lam) -> Network:
    """``(sum_s lam_s X^s_b, q_b)``."""
    w = _weights(lam, len(alignment.templates_b))
    out = sum(ws * B for ws, B in zip(w, alignment.templates_b))
    return Network(_ro(out), alignment.q_b)


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a
