"""End-to-end acceptance checks, one test per criterion.

Each test also enforces its wall-clock budget. The conftest hook prints one
PASS/FAIL line per test in the terminal summary.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy.spatial.distance import pdist, squareform

from conftest import random_network
from gwbcm.analysis import (
    analyze_blowup,
    analyze_fixed_point,
    barycenter_gradient,
    build_blowup_system,
    build_fixed_point_system,
    f_matrix,
    frechet_functional_aligned,
)
from gwbcm.blowup import blowup_multi
from gwbcm.dataio import Ball, PointCloud, pairwise_distance_network
from gwbcm.gw import GwSolverConfig, gw_bruteforce, gw_frank_wolfe
from gwbcm.mds import classical_mds
from gwbcm.network import Network, gw_objective, gw_objective_gradient, validate_network, weighted_trace
from gwbcm.pipeline import circle_cloud, experiment_classify, experiment_occlusion, grid_cloud, segment_cloud
from gwbcm.qp import min_quad_simplex
from gwbcm.synthesis import SynthesisConfig, blowup_barycenter, geodesic_interpolate, rho_update, synthesize_barycenter
from oracles import procrustes_rms, simplex_grid_min

pytestmark = pytest.mark.acceptance


@contextmanager
def budget(seconds):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"took {elapsed:.1f} s, budget {seconds} s"


def _cloud(points):
    return Network.uniform(squareform(pdist(points)))


def test_weak_isomorphism_zero_distance():
    pairs = [
        (validate_network([[3.0]], [1.0]), Network.uniform([[3.0, 3.0], [3.0, 3.0]])),
        (
            validate_network([[3, 2], [2, 0]], [0.6, 0.4]),
            validate_network([[3, 3, 2], [3, 3, 2], [2, 2, 0]], [0.3, 0.3, 0.4]),
        ),
    ]
    with budget(1.0):
        for X, Y in pairs:
            assert gw_frank_wolfe(X, Y).cost <= 1e-9
            assert gw_frank_wolfe(Y, X).cost <= 1e-9


def test_frank_wolfe_matches_bruteforce():
    shapes = [(n, m) for n in range(1, 7) for m in range(1, 7) if n * m <= 6]
    rng = np.random.default_rng(2)
    cfg = GwSolverConfig(restarts=5)
    with budget(60.0):
        for k in range(100):
            n, m = shapes[k % len(shapes)]
            X, Y = random_network(rng, n), random_network(rng, m)
            fw = gw_frank_wolfe(X, Y, cfg).cost
            brute = gw_bruteforce(X, Y).cost
            assert abs(fw - brute) <= 1e-6, (n, m, fw, brute)


def test_two_point_update_is_plan_independent():
    X = Network.uniform([[0.0, 2.0], [2.0, 0.0]])
    plans = [np.eye(2) / 2, np.fliplr(np.eye(2)) / 2]
    with budget(1.0):
        for P in plans:
            assert gw_objective(X, X, P) == 0.0
            assert np.abs(f_matrix(X, X, P) - X.weights).max() <= 1e-12
        Y, _ = rho_update([X], [1.0], X)
        assert np.abs(Y.weights - X.weights).max() <= 1e-12


def test_fixed_point_recovery():
    rng = np.random.default_rng(100)
    templates = [_cloud(rng.random((n, 2))) for n in (15, 20, 25)]
    ok = 0
    with budget(300.0):
        for seed in range(10):
            lam = np.random.default_rng(seed).dirichlet(np.ones(3))
            Y, _ = synthesize_barycenter(templates, lam, SynthesisConfig(target_size=20, seed=seed))
            res = analyze_fixed_point(templates, Y)
            ok += np.abs(res.lam.lam - lam).max() <= 1e-6
    assert ok >= 9, f"{ok}/10 seeds recovered"


def test_blowup_recovery():
    cfg = GwSolverConfig(restarts=50)
    ok = 0
    with budget(120.0):
        for seed in range(10):
            rng = np.random.default_rng(1000 + seed)
            base = rng.random((12, 2)) * [1.0, 0.6]
            templates = [_cloud(base[rng.permutation(12)] + 0.02 * rng.standard_normal((12, 2))) for _ in range(2)]
            lam = np.random.default_rng(seed).dirichlet(np.ones(2))
            Y, _ = blowup_barycenter(templates, lam, templates[0], cfg)
            res = analyze_blowup(templates, Y, cfg)
            ok += np.abs(res.lam.lam - lam).max() <= 1e-8
    assert ok == 10, f"{ok}/10 seeds recovered"


def _random_alignments(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        S = int(rng.integers(2, 5))
        templates = [random_network(rng, int(rng.integers(2, 7))) for _ in range(S)]
        Y = random_network(rng, int(rng.integers(2, 7)))
        yield blowup_multi(templates, Y), rng.dirichlet(np.ones(S)), rng


def test_gradient_identity():
    with budget(60.0):
        for al, lam, rng in _random_alignments(20, 6):
            system, _ = build_blowup_system(None, None, alignment=al)
            G = barycenter_gradient(lam, al)
            norm2 = weighted_trace(G, G, al.q_b)
            quad = lam @ system.gram @ lam
            assert abs(norm2 - quad) <= 1e-10 * abs(quad)

            r = rng.standard_normal((al.size_b, al.size_b))
            v = r + r.T
            v /= np.sqrt(weighted_trace(v, v, al.q_b))
            t = 1e-5
            Yb = np.asarray(al.reference_b)
            f0 = 0.5 * frechet_functional_aligned(lam, al.templates_b, Yb, al.q_b)
            f1 = 0.5 * frechet_functional_aligned(lam, al.templates_b, Yb + t * v, al.q_b)
            directional = -weighted_trace(G, v, al.q_b)
            assert abs((f1 - f0) / t - directional) <= 1e-3 * abs(directional)


def test_geodesic_linearity():
    grid = [0.0, 0.25, 0.5, 0.75, 1.0]
    shapes = [(3, 3), (2, 4), (3, 2), (4, 2), (3, 3)]
    rng = np.random.default_rng(7)
    cfg = GwSolverConfig(init="identity_like", restarts=10)
    with budget(120.0):
        for n, m in shapes:
            X, Y = random_network(rng, n), random_network(rng, m)
            opt = gw_bruteforce(X, Y)
            d = np.sqrt(opt.cost)
            pts = [geodesic_interpolate(X, Y, t, plan=opt.coupling) for t in grid]
            for i in range(len(grid)):
                for j in range(i + 1, len(grid)):
                    dist = np.sqrt(max(gw_frank_wolfe(pts[i], pts[j], cfg).cost, 0.0))
                    assert abs(dist - (grid[j] - grid[i]) * d) <= 0.02 * d


def test_weighted_fixed_point_system_equals_blowup_system():
    with budget(60.0):
        for al, _, _ in _random_alignments(20, 8):
            A, _ = build_blowup_system(None, None, alignment=al)
            templates_b = [al.template_network(s) for s in range(len(al.templates_b))]
            # on aligned representatives every template is transported by the identity
            identity = [np.diag(al.q_b)] * len(templates_b)
            Q = build_fixed_point_system(templates_b, al.reference_network, plans=identity, weighted=True)
            assert np.abs(Q.gram - A.gram).max() <= 1e-10
            # independent evaluation of the blow-up Gram matrix
            qq = np.outer(al.q_b, al.q_b)
            diffs = [B - al.reference_b for B in al.templates_b]
            naive = np.array([[np.sum(Di * Dj * qq) for Dj in diffs] for Di in diffs])
            assert np.abs(naive - A.gram).max() <= 1e-10 * max(1.0, np.abs(naive).max())


def test_objective_hessian_is_psd_kronecker():
    rng = np.random.default_rng(9)
    with budget(1.0):
        for _ in range(50):
            n = int(rng.integers(1, 4))
            A, B = rng.standard_normal((n, n)), rng.standard_normal((n, n))
            X, Y = Network.uniform(A @ A.T), Network.uniform(B @ B.T)
            # the gradient is linear in the plan; its Jacobian is -4 X kron Y
            jac = np.column_stack(
                [gw_objective_gradient(X, Y, np.eye(n * n)[k].reshape(n, n)).ravel() for k in range(n * n)]
            )
            kron = np.kron(X.weights, Y.weights)
            assert np.abs(jac + 4.0 * kron).max() <= 1e-12 * max(1.0, np.abs(kron).max())
            assert np.linalg.eigvalsh(kron).min() >= -1e-10


def test_simplex_qp_matches_grid_search():
    rng = np.random.default_rng(10)
    with budget(30.0):
        for _ in range(50):
            A = rng.standard_normal((3, 3))
            G = A @ A.T
            res = min_quad_simplex(G)
            ref, _ = simplex_grid_min(G, 1e-3)
            assert res.value <= ref + 1e-12
            assert ref - res.value <= 1e-5
            assert res.kkt_residual <= 1e-10


def test_mds_recovers_planted_configurations():
    rng = np.random.default_rng(11)
    with budget(1.0):
        for dim in (2, 3):
            for n in (5, 20, 50):
                pts = rng.standard_normal((n, dim))
                emb = classical_mds(squareform(pdist(pts)), dim)
                assert procrustes_rms(pts, emb.points) <= 1e-8


def test_circles_versus_segments_classification():
    rng = np.random.default_rng(12)
    net = pairwise_distance_network
    templates = [net(circle_cloud(25, rng)), net(segment_cloud(25, rng))]
    queries, labels = [], []
    with budget(600.0):
        for i in range(50):
            if i % 2:
                queries.append(net(segment_cloud(25, rng, noise=0.05)))
                labels.append("segment")
            else:
                queries.append(net(circle_cloud(25, rng, noise=0.05)))
                labels.append("circle")
        rep = experiment_classify(queries, labels, templates, ["circle", "segment"])
    assert rep.accuracy >= 0.9
    assert rep.kmeans_accuracy >= 0.9


def test_occlusion_beats_random_weights():
    rng = np.random.default_rng(13)
    grid = grid_cloud(3, 4, 0.6).coords - [0.9, 0.6]
    clouds = [circle_cloud(12, rng), segment_cloud(12, rng, angle=0.3), PointCloud.uniform(grid)]
    wins = 0
    with budget(600.0):
        for seed in range(10):
            # a fresh noisy sample of one template's class, occluded around its rightmost point
            r = np.random.default_rng(500 + seed)
            kind = seed % 3
            if kind == 0:
                query = circle_cloud(12, r, noise=0.03)
            elif kind == 1:
                query = segment_cloud(12, r, noise=0.03)
            else:
                query = PointCloud.uniform(grid + 0.03 * r.standard_normal(grid.shape))
            corner = tuple(query.coords[np.argmax(query.coords[:, 0])])
            _, rep = experiment_occlusion(query, clouds, Ball(corner, 0.3), seed=seed)
            wins += rep.beats_random
    assert wins >= 8, f"{wins}/10 trials beat the random baseline"
