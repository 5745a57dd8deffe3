"""Blow-ups: duplicate nodes along the support of optimal plans so that the
identity coupling becomes optimal between equal-size representatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowupTooLarge, DimensionMismatch, EmptySupport, ValidationError
from .gw import GwSolverConfig, gw_distance
from .network import Coupling, Network, gw_objective, validate_network

DEFAULT_SUPPORT_TOL = 1e-10
DEFAULT_MAX_SIZE = 5000


@dataclass(frozen=True)
class BlowupAlignment:
    """Equal-size representatives of several templates and a reference network.

    Attributes
    ----------
    size_b : int
        Number of aligned nodes.
    q_b : ndarray
        Common node masses.
    templates_b : list of ndarray
        Blown-up template weight matrices, one per template.
    reference_b : ndarray
        Blown-up reference weight matrix.
    index_maps : list of ndarray
        For each template, the source node of every aligned node.
    reference_map : ndarray
        Source node in the reference of every aligned node.
    costs : tuple of float
        GW² of each template against the reference before blowing up.
    plans : tuple of Coupling
        The plans used at each step.
    """

    size_b: int
    q_b: np.ndarray
    templates_b: list
    reference_b: np.ndarray
    index_maps: list
    reference_map: np.ndarray
    costs: tuple = ()
    plans: tuple = ()

    @property
    def reference_network(self) -> Network:
        return Network(self.reference_b, self.q_b)

    def template_network(self, s: int) -> Network:
        return Network(self.templates_b[s], self.q_b)


def _support(plan: np.ndarray, support_tol: float):
    if support_tol < 0:
        raise ValidationError("support_tol must be >= 0")
    peak = plan.max() if plan.size else 0.0
    if not peak > 0:
        raise EmptySupport("plan has no positive entries")
    rows, cols = np.nonzero(plan > support_tol * peak)
    if rows.size == 0:
        raise EmptySupport("no plan entry exceeds the support threshold")
    mass = plan[rows, cols]
    return rows, cols, mass / mass.sum()


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def blowup_pair(
    X: Network,
    Y: Network,
    pi,
    support_tol: float = DEFAULT_SUPPORT_TOL,
    max_size: int = DEFAULT_MAX_SIZE,
) -> BlowupAlignment:
    """Blow up ``X`` and ``Y`` along the support of the plan ``pi``.

    Support entries are taken in row-major order; aligned node ``l`` carries
    mass ``pi[i_l, j_l]`` and the weights of ``X`` at ``i_l`` and ``Y`` at ``j_l``.
    """
    plan = pi.plan if isinstance(pi, Coupling) else np.asarray(pi, dtype=float)
    if plan.shape != (X.size, Y.size):
        raise DimensionMismatch(f"plan shape {plan.shape} != ({X.size}, {Y.size})")
    coupling = Coupling.from_plan(plan, X.masses, Y.masses)
    rows, cols, q_b = _support(coupling.plan, support_tol)
    if rows.size > max_size:
        raise BlowupTooLarge(f"blow-up would have {rows.size} nodes (limit {max_size})")
    X_b = X.weights[np.ix_(rows, rows)]
    Y_b = Y.weights[np.ix_(cols, cols)]
    return BlowupAlignment(
        size_b=int(rows.size),
        q_b=_frozen(q_b),
        templates_b=[_frozen(X_b)],
        reference_b=_frozen(Y_b),
        index_maps=[_frozen(rows)],
        reference_map=_frozen(cols),
        costs=(gw_objective(X, Y, coupling),),
        plans=(coupling,),
    )


def blowup_multi(
    templates: list,
    Y: Network,
    cfg: GwSolverConfig | None = None,
    support_tol: float = DEFAULT_SUPPORT_TOL,
    max_size: int = DEFAULT_MAX_SIZE,
) -> BlowupAlignment:
    """Optimal blow-up of a template family with respect to ``Y``.

    Templates are processed in order. Each one is matched against the current
    (already blown-up) reference; its plan's support defines the new aligned
    nodes, and all previously aligned templates are re-indexed through the
    new reference node map. Earlier GW problems are never re-solved.
    """
    if len(templates) == 0:
        raise ValidationError("at least one template is required")
    cfg = cfg or GwSolverConfig()
    ref_w = np.asarray(Y.weights)
    q = np.asarray(Y.masses)
    ref_map = np.arange(Y.size)
    blown: list[np.ndarray] = []
    maps: list[np.ndarray] = []
    costs, plans = [], []
    for X in templates:
        current = Network(ref_w, q) if len(blown) else Y
        res = gw_distance(X, current, cfg)
        costs.append(res.cost)
        plans.append(res.coupling)
        v_x, v_y, q_b = _support(res.coupling.plan, support_tol)
        if v_x.size > max_size:
            raise BlowupTooLarge(f"blow-up would have {v_x.size} nodes (limit {max_size})")
        q = q_b
        blown = [B[np.ix_(v_y, v_y)] for B in blown]
        maps = [m[v_y] for m in maps]
        blown.append(np.asarray(X.weights)[np.ix_(v_x, v_x)])
        maps.append(v_x)
        ref_w = ref_w[np.ix_(v_y, v_y)]
        ref_map = ref_map[v_y]
    return BlowupAlignment(
        size_b=int(q.size),
        q_b=_frozen(q),
        templates_b=[_frozen(B) for B in blown],
        reference_b=_frozen(ref_w),
        index_maps=[_frozen(m) for m in maps],
        reference_map=_frozen(ref_map),
        costs=tuple(costs),
        plans=tuple(plans),
    )


def validate_alignment(alignment: BlowupAlignment) -> None:
    """Check the shape and mass invariants of an alignment."""
    validate_network(alignment.reference_b, alignment.q_b)
    for B in alignment.templates_b:
        if B.shape != (alignment.size_b, alignment.size_b):
            raise DimensionMismatch("template blow-ups must share the aligned size")
