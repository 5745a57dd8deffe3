"""Desk-scale experiments: coordinate recovery, classification by coordinates,
and reconstruction of occluded shapes."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import (
    analyze_blowup,
    analyze_fixed_point,
    reconstruct_blowup,
    reconstruct_fixed_point,
)
from .blowup import DEFAULT_SUPPORT_TOL
from .dataio import PointCloud, occlude, pairwise_distance_network, sample_simplex_dirichlet
from .errors import EmptyInput, ValidationError
from .gw import GwSolverConfig, gw_distance
from .network import Network, SimplexWeights, as_simplex
from .qp import QpConfig
from .synthesis import SynthesisConfig, blowup_barycenter, synthesize_barycenter

RECOVER_METHODS = ("fixed_point", "blowup", "cross")


@dataclass(frozen=True)
class RecoveryReport:
    true_lambda: SimplexWeights
    estimated_lambda: SimplexWeights
    linf_error: float
    reconstruction_gw: float
    method: str
    residual: float = 0.0
    normalized_residual: float = 0.0
    synthesis_converged: bool = True
    barycenter: Network | None = field(default=None, repr=False)


def _lambda(templates, lambda_or_seed) -> SimplexWeights:
    if isinstance(lambda_or_seed, (int, np.integer)):
        return sample_simplex_dirichlet(len(templates), int(lambda_or_seed))
    lam = as_simplex(lambda_or_seed)
    if len(lam) != len(templates):
        raise ValidationError(f"{len(lam)} weights for {len(templates)} templates")
    return lam


def experiment_recover(
    templates,
    lambda_or_seed,
    method: str = "fixed_point",
    *,
    solver: GwSolverConfig | None = None,
    synth: SynthesisConfig | None = None,
    qp_cfg: QpConfig | None = None,
    support_tol: float = DEFAULT_SUPPORT_TOL,
    reference: Network | None = None,
) -> RecoveryReport:
    """Synthesize a barycenter with known weights, analyze it, and compare.

    Methods
    -------
    fixed_point
        Iterative synthesis, fixed-point analysis.
    blowup
        Convex combination of templates blown up against `reference`
        (default: the first template), blow-up analysis.
    cross
        Iterative synthesis, blow-up analysis.

    An integer `lambda_or_seed` draws the weights uniformly from the simplex.
    """
    if len(templates) < 2:
        raise ValidationError("at least two templates are required")
    method = method.replace("-", "_")
    if method not in RECOVER_METHODS:
        raise ValidationError(f"unknown method {method!r}")
    solver = solver or GwSolverConfig()
    lam = _lambda(templates, lambda_or_seed)
    converged = True
    if method == "blowup":
        Y, _ = blowup_barycenter(templates, lam, reference or templates[0], solver, support_tol)
    else:
        synth = synth or SynthesisConfig(target_size=templates[0].size, solver=solver)
        Y, diag = synthesize_barycenter(templates, lam, synth)
        converged = diag.converged
    if method == "fixed_point":
        res = analyze_fixed_point(templates, Y, solver, qp_cfg)
        recon = reconstruct_fixed_point(templates, Y, res.lam, res.plans_or_alignment)
    else:
        res = analyze_blowup(templates, Y, solver, support_tol, qp_cfg)
        recon = reconstruct_blowup(res.plans_or_alignment, res.lam)
    gw = gw_distance(recon, Y, solver).gw
    err = float(np.abs(res.lam.lam - lam.lam).max())
    return RecoveryReport(lam, res.lam, err, gw, method, res.residual, res.normalized_residual, converged, Y)


def classify_max_coordinate(lam, template_labels):
    """Label of the largest coordinate; ties go to the lowest index."""
    w = as_simplex(lam).lam
    if len(template_labels) != w.size:
        raise ValidationError("one label per coordinate is required")
    return template_labels[int(np.argmax(w))]


@dataclass(frozen=True)
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    accuracy: float | None


def permutation_accuracy(assignments, labels, k: int) -> float:
    """Best accuracy over all matchings of cluster ids to label values."""
    labels = list(labels)
    assignments = np.asarray(assignments)
    values = sorted(set(labels), key=str)
    pool = values + [None] * max(0, k - len(values))
    truth = np.array([values.index(v) for v in labels])
    best = 0.0
    for perm in itertools.permutations(pool, k):
        mapped = np.array([-1 if perm[a] is None else values.index(perm[a]) for a in assignments])
        best = max(best, float(np.mean(mapped == truth)))
    return best


def kmeans_lambda(lambda_vectors, k: int, seed: int = 0, labels=None) -> KMeansResult:
    """k-means (k-means++ seeding, Lloyd iterations) on coordinate vectors.

    With `labels`, the accuracy is computed under the best matching of
    clusters to labels (exhaustive over permutations, ``k <= 8``).
    """
    from sklearn.cluster import KMeans
    from sklearn.exceptions import ConvergenceWarning

    V = np.asarray([np.asarray(v, dtype=float) for v in lambda_vectors])
    if V.size == 0:
        raise EmptyInput("no vectors to cluster")
    if k < 1:
        raise ValidationError("k must be >= 1")
    if k > 8 and labels is not None:
        raise ValidationError("permutation accuracy supports k <= 8")
    k_eff = min(k, V.shape[0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        km = KMeans(n_clusters=k_eff, init="k-means++", n_init=10, random_state=seed).fit(V)
    assignments = km.labels_.astype(int)
    acc = permutation_accuracy(assignments, labels, k) if labels is not None else None
    return KMeansResult(assignments, km.cluster_centers_, acc)


@dataclass(frozen=True)
class ClassificationReport:
    predictions: list
    accuracy: float
    kmeans_accuracy: float
    lambdas: np.ndarray


def experiment_classify(
    queries,
    query_labels,
    templates,
    template_labels,
    *,
    method: str = "fixed_point",
    solver: GwSolverConfig | None = None,
    support_tol: float = DEFAULT_SUPPORT_TOL,
    seed: int = 0,
) -> ClassificationReport:
    """Coordinates of each query against one template per class.

    Each query is labelled by its largest coordinate; the coordinate vectors
    are also clustered with k-means (one cluster per class).
    """
    if len(queries) != len(query_labels):
        raise ValidationError("one label per query is required")
    lams = []
    for Yq in queries:
        if method == "blowup":
            res = analyze_blowup(templates, Yq, solver, support_tol)
        else:
            res = analyze_fixed_point(templates, Yq, solver)
        lams.append(res.lam.lam)
    lams = np.array(lams)
    preds = [classify_max_coordinate(v, template_labels) for v in lams]
    acc = float(np.mean([p == t for p, t in zip(preds, query_labels)]))
    k = len(set(template_labels))
    km = kmeans_lambda(lams, k, seed, labels=query_labels)
    return ClassificationReport(preds, acc, km.accuracy, lams)


@dataclass(frozen=True)
class OcclusionReport:
    estimated_lambda: SimplexWeights
    reconstruction_gw: float
    random_lambda: SimplexWeights
    random_gw: float
    residual: float

    @property
    def beats_random(self) -> bool:
        return self.reconstruction_gw < self.random_gw


def experiment_occlusion(
    query: PointCloud,
    templates,
    mask,
    *,
    method: str = "fixed_point",
    solver: GwSolverConfig | None = None,
    synth: SynthesisConfig | None = None,
    support_tol: float = DEFAULT_SUPPORT_TOL,
    seed: int = 0,
):
    """Reconstruct a shape from an occluded view.

    The query and every template are occluded by the same mask, coordinates
    are estimated on the occluded networks, and a barycenter of the clean
    templates is synthesized with the estimated weights. A barycenter with
    weights drawn at random (seeded) serves as the baseline.

    Returns
    -------
    (Network, OcclusionReport)
    """
    solver = solver or GwSolverConfig()
    occ_query = pairwise_distance_network(occlude(query, mask))
    occ_templates = [pairwise_distance_network(occlude(t, mask)) for t in templates]
    clean_templates = [pairwise_distance_network(t) for t in templates]
    clean_query = pairwise_distance_network(query)
    if method == "blowup":
        res = analyze_blowup(occ_templates, occ_query, solver, support_tol)
    else:
        res = analyze_fixed_point(occ_templates, occ_query, solver)
    synth = synth or SynthesisConfig(target_size=query.size, solver=solver, seed=seed)
    synth = replace(synth, target_size=query.size, target_masses=query.masses)
    recon, _ = synthesize_barycenter(clean_templates, res.lam, synth)
    gw = gw_distance(recon, clean_query, solver).gw
    rand_lam = sample_simplex_dirichlet(len(templates), seed)
    rand_recon, _ = synthesize_barycenter(clean_templates, rand_lam, synth)
    rand_gw = gw_distance(rand_recon, clean_query, solver).gw
    return recon, OcclusionReport(res.lam, gw, rand_lam, rand_gw, res.residual)


# synthetic shape generators standing in for image/CAD datasets


def circle_cloud(n: int, rng, radius: float = 1.0, noise: float = 0.0, center=(0.0, 0.0)) -> PointCloud:
    """``n`` points on a circle at uniformly random angles, with Gaussian jitter."""
    ang = rng.uniform(0.0, 2.0 * np.pi, n)
    pts = np.column_stack([np.cos(ang), np.sin(ang)]) * radius + np.asarray(center, dtype=float)
    return PointCloud.uniform(pts + noise * rng.standard_normal((n, 2)))


def segment_cloud(n: int, rng, length: float = 2.0, noise: float = 0.0, angle: float | None = None) -> PointCloud:
    """``n`` points uniformly on a line segment of given length, with Gaussian jitter."""
    theta = rng.uniform(0.0, np.pi) if angle is None else angle
    s = rng.uniform(-0.5, 0.5, n) * length
    pts = np.column_stack([s * np.cos(theta), s * np.sin(theta)])
    return PointCloud.uniform(pts + noise * rng.standard_normal((n, 2)))


def grid_cloud(rows: int, cols: int, spacing: float = 1.0) -> PointCloud:
    """Regular ``rows x cols`` grid."""
    xs, ys = np.meshgrid(np.arange(cols) * spacing, np.arange(rows) * spacing)
    return PointCloud.uniform(np.column_stack([xs.ravel(), ys.ravel()]))
