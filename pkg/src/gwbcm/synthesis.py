"""Barycenter synthesis: the fixed-point update, its iteration, geodesics and
blow-up convex combinations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import f_matrix, solve_plans
from .blowup import DEFAULT_SUPPORT_TOL, BlowupAlignment, blowup_multi, blowup_pair
from .errors import DimensionMismatch, ValidationError
from .gw import GwSolverConfig, gw_distance
from .network import Network, as_simplex, validate_network

INITS = ("random_seeded", "first_template_resampled", "custom")


@dataclass(frozen=True)
class SynthesisConfig:
    """Settings for the iterative barycenter synthesis.

    Parameters
    ----------
    target_size : int
        Number of nodes of the output network.
    target_masses : array, optional
        Node masses of the output (uniform by default).
    max_outer_iter : int
    fp_tol : float
        Stop when ``||Y_new - Y|| <= fp_tol * ||Y||`` (Frobenius).
    init : {"random_seeded", "first_template_resampled", "custom"}
    init_weights : array, optional
        Starting matrix for ``init="custom"``.
    solver : GwSolverConfig
    seed : int
    threads : int
        Parallel GW solves per update.
    """

    target_size: int
    target_masses: np.ndarray | None = None
    max_outer_iter: int = 100
    fp_tol: float = 1e-9
    init: str = "random_seeded"
    init_weights: np.ndarray | None = None
    solver: GwSolverConfig = field(default_factory=GwSolverConfig)
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.target_size < 1:
            raise ValidationError("target_size must be >= 1")
        if self.init not in INITS:
            raise ValidationError(f"unknown init {self.init!r}")
        if self.init == "custom" and self.init_weights is None:
            raise ValidationError("init='custom' requires init_weights")
        if self.max_outer_iter < 1 or not self.fp_tol > 0:
            raise ValidationError("max_outer_iter must be >= 1 and fp_tol > 0")

    def masses(self) -> np.ndarray:
        if self.target_masses is None:
            return np.full(self.target_size, 1.0 / self.target_size)
        return validate_network(np.zeros((self.target_size,) * 2), self.target_masses).masses


@dataclass(frozen=True)
class SynthesisDiagnostics:
    converged: bool
    iterations: int
    objective_trace: tuple
    change_trace: tuple
    plans: tuple = field(repr=False, default=())
    returned_best: bool = False


def rho_update(templates, lam, Y: Network, solver: GwSolverConfig | None = None, threads: int = 1):
    """One synthesis update ``Y -> (1/qq') * sum_s lam_s pi_s' X^s pi_s``.

    Returns
    -------
    (Network, list of Coupling)
        The updated network (masses unchanged) and the plans used.
    """
    Y_new, plans, _ = _rho_step(templates, lam, Y, solver, threads)
    return Y_new, plans


def _rho_step(templates, lam, Y, solver, threads):
    w = as_simplex(lam).lam
    if w.size != len(templates):
        raise DimensionMismatch(f"{w.size} weights for {len(templates)} templates")
    results = solve_plans(templates, Y, solver, threads)
    plans = [r.coupling for r in results]
    out = np.zeros((Y.size, Y.size))
    for ws, X, P in zip(w, templates, plans):
        if ws:
            out += ws * f_matrix(X, Y, P)
    return Network(_ro(out), Y.masses), plans, [r.cost for r in results]


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def initial_matrix(templates, cfg: SynthesisConfig) -> np.ndarray:
    M = cfg.target_size
    rng = np.random.default_rng(cfg.seed)
    if cfg.init == "custom":
        Y0 = np.asarray(cfg.init_weights, dtype=float)
        if Y0.shape != (M, M):
            raise DimensionMismatch(f"init_weights has shape {Y0.shape}, expected ({M}, {M})")
        return Y0
    if cfg.init == "first_template_resampled":
        X = np.asarray(templates[0].weights)
        N = X.shape[0]
        if M == N:
            return X.copy()
        idx = np.sort(rng.choice(N, size=M, replace=M > N))
        return X[np.ix_(idx, idx)]
    top = max(float(np.max(X.weights)) for X in templates)
    return rng.uniform(0.0, top, size=(M, M)) if top > 0 else np.zeros((M, M))


def synthesize_barycenter(templates, lam, cfg: SynthesisConfig):
    """Iterate the fixed-point update from ``cfg.init`` until it settles.

    Plans are recomputed from scratch at every iterate, so they depend on the
    current matrix only. If the iteration does not settle within
    ``max_outer_iter`` steps, the iterate with the lowest weighted GW
    objective is returned and flagged as unconverged.

    Returns
    -------
    (Network, SynthesisDiagnostics)
    """
    w = as_simplex(lam).lam
    if len(templates) == 0 or w.size != len(templates):
        raise DimensionMismatch(f"{w.size} weights for {len(templates)} templates")
    q = cfg.masses()
    Y = validate_network(initial_matrix(templates, cfg), q)
    objectives, changes = [], []
    best_obj, best_Y = np.inf, Y
    converged = False
    plans = ()
    it = 0
    for it in range(1, cfg.max_outer_iter + 1):
        Y_new, plans, costs = _rho_step(templates, w, Y, cfg.solver, cfg.threads)
        obj = float(np.dot(w, costs))
        objectives.append(obj)
        if obj < best_obj:
            best_obj, best_Y = obj, Y
        norm = np.linalg.norm(Y.weights)
        change = float(np.linalg.norm(Y_new.weights - Y.weights) / (norm if norm > 0 else 1.0))
        changes.append(change)
        Y = Y_new
        if change <= cfg.fp_tol:
            converged = True
            break
    returned_best = False
    if not converged and best_Y is not Y:
        Y, returned_best = best_Y, True
    diag = SynthesisDiagnostics(converged, it, tuple(objectives), tuple(changes), tuple(plans), returned_best)
    return Y, diag


def geodesic_interpolate(X: Network, Y: Network, t: float, solver: GwSolverConfig | None = None, *, plan=None,
                         support_tol: float = DEFAULT_SUPPORT_TOL) -> Network:
    """Point at time ``t`` on the GW geodesic from ``X`` to ``Y``.

    Both networks are blown up along an optimal plan and their weights are
    interpolated linearly on the aligned nodes.
    """
    if not 0.0 <= t <= 1.0:
        raise ValidationError("t must lie in [0, 1]")
    if plan is None:
        plan = gw_distance(X, Y, solver).coupling
    al = blowup_pair(X, Y, plan, support_tol)
    W = (1.0 - t) * al.templates_b[0] + t * al.reference_b
    return Network(_ro(W), al.q_b)


def blowup_barycenter(templates, lam, reference: Network, solver: GwSolverConfig | None = None,
                      support_tol: float = DEFAULT_SUPPORT_TOL) -> tuple[Network, BlowupAlignment]:
    """Convex combination ``sum_s lam_s X^s_b`` after aligning the templates to `reference`."""
    w = as_simplex(lam).lam
    if w.size != len(templates):
        raise DimensionMismatch(f"{w.size} weights for {len(templates)} templates")
    al = blowup_multi(templates, reference, solver, support_tol)
    W = sum(ws * B for ws, B in zip(w, al.templates_b))
    return Network(_ro(W), al.q_b), al
