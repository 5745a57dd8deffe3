"""Finite measure networks, couplings, simplex weights and the basic GW algebra.

A network is a pair ``(X, p)``: a square real weight matrix and a strictly
positive probability vector over its nodes. Weight matrices need not be
symmetric; symmetric inputs only take faster code paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    MarginalMismatch,
    MassSumMismatch,
    NonFiniteEntry,
    NonPositiveMass,
    NonSquare,
    ValidationError,
)

MASS_TOL = 1e-9
MARGINAL_TOL = 1e-9
SIMPLEX_TOL = 1e-9
SIMPLEX_CLIP = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Network:
    """Validated finite network. Build instances with :func:`validate_network`."""

    weights: np.ndarray
    masses: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.weights, self.weights.T))

    @classmethod
    def uniform(cls, weights) -> "Network":
        w = np.asarray(weights, dtype=float)
        n = w.shape[0] if w.ndim == 2 else 0
        return validate_network(w, np.full(n, 1.0 / max(n, 1)))


def validate_network(weights, masses, tol: float = MASS_TOL) -> Network:
    """Check and freeze a ``(weights, masses)`` pair.

    Masses whose total deviates from one by at most `tol` are renormalized;
    larger deviations are rejected rather than repaired.
    """
    w = np.asarray(weights, dtype=float)
    m = np.asarray(masses, dtype=float).ravel()
    if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] == 0:
        raise NonSquare(f"weights must be a non-empty square matrix, got shape {w.shape}")
    if m.shape[0] != w.shape[0]:
        raise DimensionMismatch(
            f"masses has length {m.shape[0]} but weights is {w.shape[0]}x{w.shape[0]}"
        )
    if not np.all(np.isfinite(w)) or not np.all(np.isfinite(m)):
        raise NonFiniteEntry("weights and masses must be finite")
    if np.any(m <= 0):
        raise NonPositiveMass(f"every node mass must be > 0 (min is {m.min():g})")
    total = m.sum()
    if abs(total - 1.0) > tol:
        raise MassSumMismatch(f"masses sum to {total!r}, expected 1")
    if abs(total - 1.0) > 4 * np.finfo(float).eps * m.size:
        m = m / total
    return Network(_frozen(w), _frozen(m))


@dataclass(frozen=True)
class Coupling:
    """Transport plan with its prescribed marginals."""

    plan: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    @classmethod
    def from_plan(cls, plan, p, q, tol: float = MARGINAL_TOL) -> "Coupling":
        P = np.asarray(plan, dtype=float)
        p = np.asarray(p, dtype=float).ravel()
        q = np.asarray(q, dtype=float).ravel()
        if P.ndim != 2 or P.shape != (p.shape[0], q.shape[0]):
            raise DimensionMismatch(f"plan shape {P.shape} does not match marginals {p.shape[0]}x{q.shape[0]}")
        if not np.all(np.isfinite(P)):
            raise NonFiniteEntry("plan must be finite")
        if P.min() < -SIMPLEX_CLIP:
            raise ValidationError(f"plan has negative entry {P.min():g}")
        P = np.maximum(P, 0.0)
        if np.abs(P.sum(axis=1) - p).max() > tol or np.abs(P.sum(axis=0) - q).max() > tol:
            raise MarginalMismatch("plan marginals do not match within tolerance")
        return cls(_frozen(P), _frozen(p), _frozen(q))

    @property
    def shape(self) -> tuple[int, int]:
        return self.plan.shape

    @property
    def T(self) -> "Coupling":
        return Coupling(_frozen(self.plan.T), self.col_marginal, self.row_marginal)


@dataclass(frozen=True)
class SimplexWeights:
    """A point of the probability simplex (barycentric coordinates)."""

    lam: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.lam, dtype=float).ravel()
        if v.size == 0:
            raise ValidationError("simplex weights must be non-empty")
        if not np.all(np.isfinite(v)):
            raise NonFiniteEntry("simplex weights must be finite")
        if v.min() < -SIMPLEX_CLIP:
            raise ValidationError(f"negative simplex coordinate {v.min():g}")
        v = np.maximum(v, 0.0)
        if abs(v.sum() - 1.0) > SIMPLEX_TOL:
            raise ValidationError(f"simplex weights sum to {v.sum()!r}")
        object.__setattr__(self, "lam", _frozen(v))

    def __len__(self) -> int:
        return self.lam.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.lam, dtype=dtype)

    def tolist(self) -> list[float]:
        return self.lam.tolist()


def as_simplex(v) -> SimplexWeights:
    if isinstance(v, SimplexWeights):
        return v
    return SimplexWeights(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class GwResult:
    """Solution of a discrete GW problem; ``cost`` holds the squared distance."""

    coupling: Coupling
    cost: float
    converged: bool
    iterations: int
    trace: tuple = field(default=(), repr=False)

    @property
    def gw(self) -> float:
        return float(np.sqrt(max(self.cost, 0.0)))


def _plan(pi) -> np.ndarray:
    return pi.plan if isinstance(pi, Coupling) else np.asarray(pi, dtype=float)


def _check_plan(X: Network, Y: Network, P: np.ndarray) -> None:
    if P.shape != (X.size, Y.size):
        raise DimensionMismatch(f"coupling shape {P.shape} != ({X.size}, {Y.size})")


def weighted_trace(A, B, q) -> float:
    """Return ``sum_ij A[i,j] B[i,j] q[i] q[j]``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    q = np.asarray(q, dtype=float).ravel()
    if A.shape != B.shape or A.ndim != 2 or A.shape != (q.size, q.size):
        raise DimensionMismatch(f"shapes {A.shape}, {B.shape} and weights of length {q.size} are inconsistent")
    return float(q @ (A * B) @ q)


def cross_term(X: np.ndarray, Y: np.ndarray, P: np.ndarray) -> float:
    """``sum_ijkl X[i,k] Y[j,l] P[i,j] P[k,l]``."""
    return float(np.sum(P * (X @ P @ Y.T)))


def constant_terms(X: Network, Y: Network) -> float:
    p, q = X.masses, Y.masses
    return float(p @ (X.weights**2) @ p + q @ (Y.weights**2) @ q)


def gw_objective(X: Network, Y: Network, pi) -> float:
    """GW² objective of the coupling `pi` between `X` and `Y`.

    Evaluated through the decomposition into the two marginal-only terms and
    the coupling-dependent cross term, in O(N²M + NM²).
    """
    P = _plan(pi)
    _check_plan(X, Y, P)
    value = constant_terms(X, Y) - 2.0 * cross_term(X.weights, Y.weights, P)
    return max(value, 0.0)


def gw_objective_gradient(X: Network, Y: Network, pi) -> np.ndarray:
    """Gradient in the coupling of the cross term ``-2 sum X Y P P``."""
    P = _plan(pi)
    _check_plan(X, Y, P)
    Xw, Yw = X.weights, Y.weights
    if X.is_symmetric and Y.is_symmetric:
        return -4.0 * (Xw @ P @ Yw)
    return -2.0 * (Xw @ P @ Yw.T + Xw.T @ P @ Yw)


def product_coupling(p, q) -> np.ndarray:
    return np.outer(p, q)


def northwest_corner(p, q) -> np.ndarray:
    """Northwest-corner feasible plan for marginals `p`, `q`."""
    p = np.array(p, dtype=float)
    q = np.array(q, dtype=float)
    P = np.zeros((p.size, q.size))
    i = j = 0
    while i < p.size and j < q.size:
        t = min(p[i], q[j])
        P[i, j] = t
        p[i] -= t
        q[j] -= t
        if i == p.size - 1:
            j += 1
        elif j == q.size - 1:
            i += 1
        elif p[i] <= q[j]:
            i += 1
        else:
            j += 1
    return P


def identity_like_coupling(p, q) -> np.ndarray:
    """Northwest-corner plan on mass-sorted nodes; equals ``diag(p)`` when ``p == q``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    op = np.argsort(p, kind="stable")
    oq = np.argsort(q, kind="stable")
    sorted_plan = northwest_corner(p[op], q[oq])
    P = np.zeros((p.size, q.size))
    P[np.ix_(op, oq)] = sorted_plan
    return P
