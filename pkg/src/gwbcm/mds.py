"""Classical multidimensional scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteEntry, ValidationError


@dataclass(frozen=True)
class Embedding:
    points: np.ndarray
    eigenvalues: np.ndarray
    strain: float


def classical_mds(D, dim: int = 2) -> Embedding:
    """Embed a dissimilarity matrix in ``dim`` dimensions.

    The diagonal is treated as zero self-distance, the matrix is symmetrized,
    and the double-centered Gram matrix ``-0.5 J D**2 J`` is eigendecomposed.
    Negative eigenvalues are clipped to zero; the part of the Gram matrix not
    captured by the embedding is reported as the relative ``strain``. Each
    eigenvector is signed so that its first nonzero entry is positive.

    Parameters
    ----------
    D : (M, M) array_like
    dim : int

    Returns
    -------
    Embedding
        ``points`` has shape ``(M, dim)`` and zero column means.
    """
    D = np.array(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] == 0:
        raise DimensionMismatch(f"distance matrix must be square, got {D.shape}")
    if not np.all(np.isfinite(D)):
        raise NonFiniteEntry("distance matrix must be finite")
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    M = D.shape[0]
    np.fill_diagonal(D, 0.0)
    D = 0.5 * (D + D.T)
    J = np.eye(M) - 1.0 / M
    B = -0.5 * J @ (D**2) @ J
    B = 0.5 * (B + B.T)
    vals, vecs = np.linalg.eigh(B)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    k = min(dim, M)
    kept = np.maximum(vals[:k], 0.0)
    V = vecs[:, :k].copy()
    for c in range(k):
        nz = np.flatnonzero(np.abs(V[:, c]) > 1e-12)
        if nz.size and V[nz[0], c] < 0:
            V[:, c] *= -1.0
    points = V * np.sqrt(kept)[None, :]
    if k < dim:
        points = np.hstack([points, np.zeros((M, dim - k))])
        kept = np.concatenate([kept, np.zeros(dim - k)])
    points -= points.mean(axis=0)
    normB = float(np.linalg.norm(B))
    strain = float(np.linalg.norm(B - points @ points.T) / normB) if normB > 0 else 0.0
    return Embedding(points, kept, strain)
