"""Convex quadratics over the probability simplex and simplex-constrained linear systems."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyVector, NonFiniteEntry, ValidationError
from .network import SimplexWeights

ENUMERATION_MAX = 12


@dataclass(frozen=True)
class QpConfig:
    method: str = "projected_gradient"
    tol: float = 1e-10
    max_iter: int = 10000

    def __post_init__(self):
        method = self.method.replace("-", "_")
        object.__setattr__(self, "method", method)
        if method not in ("projected_gradient", "conditional_gradient"):
            raise ValidationError(f"unknown QP method {self.method!r}")
        if not self.tol > 0:
            raise ValidationError("tol must be > 0")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")


@dataclass(frozen=True)
class QpResult:
    lam: SimplexWeights
    value: float
    kkt_residual: float
    converged: bool
    iterations: int

    def __iter__(self):
        return iter((self.lam, self.value, self.kkt_residual))


@dataclass(frozen=True)
class LinearSimplexResult:
    lam: SimplexWeights
    residual: float
    in_simplex: bool
    unique: bool


def project_simplex(v) -> SimplexWeights:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise EmptyVector("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise NonFiniteEntry("vector must be finite")
    return SimplexWeights(_project(v))


def _project(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    w = np.maximum(v - theta, 0.0)
    return w / w.sum()


def kkt_residual(gram: np.ndarray, lam: np.ndarray) -> float:
    """Largest violation of the simplex KKT conditions at `lam`.

    With ``g = 2 gram lam`` and multiplier ``mu = lam . g``, optimality needs
    ``g_s >= mu`` everywhere and ``g_s = mu`` on the support.
    """
    g = 2.0 * gram @ lam
    mu = float(lam @ g)
    support = lam > 0
    eq = np.abs(g[support] - mu).max() if np.any(support) else 0.0
    ineq = max(0.0, float((mu - g).max()))
    return float(max(eq, ineq))


def _support_solve(G: np.ndarray, support: np.ndarray):
    """Minimizer of ``lam' G lam`` on the affine hull of a face, or None."""
    idx = np.flatnonzero(support)
    k = idx.size
    M = np.zeros((k + 1, k + 1))
    M[:k, :k] = 2.0 * G[np.ix_(idx, idx)]
    M[:k, k] = -1.0
    M[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
    if np.abs(M @ sol - rhs).max() > 1e-9 * max(1.0, np.abs(M).max()):
        return None
    lam = np.zeros(G.shape[0])
    lam[idx] = sol[:k]
    if lam.min() < -1e-13:
        return None
    lam = np.maximum(lam, 0.0)
    return lam / lam.sum()


def _value(G, lam):
    return float(lam @ G @ lam)


def min_quad_simplex(gram, cfg: QpConfig | None = None) -> QpResult:
    """Minimize ``lam' gram lam`` over the probability simplex.

    Projected gradient with Barzilai-Borwein steps (or conditional gradient)
    from the uniform vector, followed by an exact solve of the KKT system on
    the detected support. When that still misses the tolerance and the
    dimension is small, all supports are scanned.

    Returns
    -------
    QpResult
        Unpacks as ``(lam, value, kkt_residual)``.
    """
    cfg = cfg or QpConfig()
    G = np.asarray(gram, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] == 0:
        raise DimensionMismatch(f"gram must be a non-empty square matrix, got {G.shape}")
    if not np.all(np.isfinite(G)):
        raise NonFiniteEntry("gram must be finite")
    G = 0.5 * (G + G.T)
    S = G.shape[0]
    norm = float(np.linalg.norm(G, 2))
    tol = cfg.tol * max(1.0, norm)
    lam = np.full(S, 1.0 / S)
    if S == 1 or norm == 0.0:
        return QpResult(SimplexWeights(lam), _value(G, lam), kkt_residual(G, lam), True, 0)

    fixed_step = step = 1.0 / (2.0 * norm)
    grad = 2.0 * G @ lam
    it = 0
    for it in range(1, cfg.max_iter + 1):
        if cfg.method == "conditional_gradient":
            s = np.zeros(S)
            s[int(np.argmin(grad))] = 1.0
            d = s - lam
            curv = float(d @ G @ d)
            slope = float(grad @ d)
            t = 1.0 if curv <= 0 else min(1.0, -slope / (2.0 * curv))
            new = lam + t * d
        else:
            new = _project(lam - step * grad)
        new_grad = 2.0 * G @ new
        dl, dg = new - lam, new_grad - grad
        denom = float(dl @ dg)
        step = float(dl @ dl) / denom if denom > 0 else fixed_step
        lam, grad = new, new_grad
        if np.abs(dl).max() <= 1e-15 or kkt_residual(G, lam) <= tol:
            break

    best, best_kkt = lam, kkt_residual(G, lam)
    for thresh in (1e-12, 1e-9, 1e-6):
        cand = _support_solve(G, lam > thresh)
        if cand is not None:
            k = kkt_residual(G, cand)
            if k < best_kkt:
                best, best_kkt = cand, k
        if best_kkt <= tol:
            break
    if best_kkt > tol and S <= ENUMERATION_MAX:
        for r in range(1, S + 1):
            for sub in itertools.combinations(range(S), r):
                mask = np.zeros(S, dtype=bool)
                mask[list(sub)] = True
                cand = _support_solve(G, mask)
                if cand is None:
                    continue
                k = kkt_residual(G, cand)
                if k < best_kkt:
                    best, best_kkt = cand, k
            if best_kkt <= tol:
                break
    return QpResult(SimplexWeights(best), _value(G, best), best_kkt, best_kkt <= tol, it)


def simplex_unique(gram, rtol: float = 1e-9) -> bool:
    """Whether the quadratic is strictly convex along the simplex (sum-zero) directions."""
    G = np.asarray(gram, dtype=float)
    S = G.shape[0]
    if S == 1:
        return True
    basis = np.linalg.svd(np.ones((1, S)))[2][1:].T
    eig = np.linalg.eigvalsh(basis.T @ (0.5 * (G + G.T)) @ basis)
    return bool(eig.min() > rtol * max(1.0, np.abs(G).max()))


def solve_linear_simplex(Kmat, rhs, cfg: QpConfig | None = None, tol: float = 1e-8) -> LinearSimplexResult:
    """Find ``lam`` in the simplex minimizing ``||K lam - rhs||``.

    On the simplex ``rhs = rhs * sum(lam)``, so the objective is the quadratic
    form of ``(K - rhs 1')' (K - rhs 1')`` and is handed to
    :func:`min_quad_simplex`. ``in_simplex`` reports whether the residual norm
    is at most `tol`; ``unique`` whether the minimizer is unique.
    """
    K = np.asarray(Kmat, dtype=float)
    b = np.asarray(rhs, dtype=float).ravel()
    if K.ndim != 2 or K.shape[0] != b.size:
        raise DimensionMismatch(f"matrix {K.shape} and right-hand side of length {b.size} are inconsistent")
    B = K - b[:, None]
    gram = B.T @ B
    res = min_quad_simplex(gram, cfg)
    lam = res.lam.lam
    residual = float(np.linalg.norm(K @ lam - b))
    return LinearSimplexResult(res.lam, residual, residual <= tol, simplex_unique(gram))
