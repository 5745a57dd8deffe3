import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_network
from gwbcm.dataio import (
    Ball,
    Box,
    PointCloud,
    lambda_result_dict,
    load_any_network,
    load_network,
    load_point_cloud,
    network_from_dict,
    occlude,
    pairwise_distance_network,
    parse_mask,
    sample_simplex_dirichlet,
    save_network,
    save_point_cloud,
)
from gwbcm.errors import AllPointsRemoved, BadMassColumn, EmptyFile, ParseError, SchemaError


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestPointCloud:
    def test_two_rows(self, tmp_path):
        pc = load_point_cloud(_write(tmp_path, "a.csv", "0,0\n1,0\n"))
        assert pc.size == 2 and pc.dim == 2
        assert np.allclose(pc.masses, [0.5, 0.5])

    def test_mass_column(self, tmp_path):
        pc = load_point_cloud(_write(tmp_path, "a.csv", "x,y,mass\n0,0,0.2\n1,0,0.8\n"))
        assert np.allclose(pc.masses, [0.2, 0.8])

    def test_mass_column_flag(self, tmp_path):
        pc = load_point_cloud(_write(tmp_path, "a.csv", "0,0,1\n1,0,3\n"), mass_column=True)
        assert np.allclose(pc.masses, [0.25, 0.75])
        assert pc.dim == 2

    def test_three_d(self, tmp_path):
        assert load_point_cloud(_write(tmp_path, "a.csv", "0,0,0\n1,2,3\n")).dim == 3

    def test_malformed_row_line_number(self, tmp_path):
        with pytest.raises(ParseError, match=":3:"):
            load_point_cloud(_write(tmp_path, "a.csv", "0,0\n1,0\n1,abc\n"))

    def test_ragged(self, tmp_path):
        with pytest.raises(ParseError, match=":2:"):
            load_point_cloud(_write(tmp_path, "a.csv", "0,0\n1,0,4,5\n"))

    def test_empty(self, tmp_path):
        with pytest.raises(EmptyFile):
            load_point_cloud(_write(tmp_path, "a.csv", "\n"))

    def test_bad_mass(self, tmp_path):
        with pytest.raises(BadMassColumn):
            load_point_cloud(_write(tmp_path, "a.csv", "x,y,mass\n0,0,0.5\n1,0,0\n"))

    def test_round_trip(self, tmp_path, rng):
        pc = PointCloud(rng.random((5, 3)), rng.random(5) + 0.1)
        save_point_cloud(pc, tmp_path / "p.csv")
        back = load_point_cloud(tmp_path / "p.csv")
        assert np.array_equal(back.coords, pc.coords)
        assert np.allclose(back.masses, pc.masses, rtol=1e-15)


class TestDistances:
    def test_345(self):
        net = pairwise_distance_network(PointCloud.uniform([[0, 0], [3, 4]]))
        assert np.array_equal(net.weights, [[0, 5], [5, 0]])

    def test_single(self):
        assert np.array_equal(pairwise_distance_network(PointCloud.uniform([[1, 2]])).weights, [[0]])

    def test_unit_square(self):
        net = pairwise_distance_network(PointCloud.uniform([[0, 0], [1, 0], [1, 1], [0, 1]]))
        r = np.sqrt(2)
        ref = np.array([[0, 1, r, 1], [1, 0, 1, r], [r, 1, 0, 1], [1, r, 1, 0]])
        assert np.abs(net.weights - ref).max() <= 1e-12

    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_metric_properties(self, n, seed):
        net = pairwise_distance_network(PointCloud.uniform(np.random.default_rng(seed).random((n, 2))))
        W = net.weights
        assert np.array_equal(W, W.T)
        assert np.all(np.diag(W) == 0)
        assert abs(net.masses.sum() - 1) < 1e-12


class TestDirichlet:
    def test_single(self):
        assert sample_simplex_dirichlet(1, 99).tolist() == [1.0]

    def test_reproducible(self):
        assert sample_simplex_dirichlet(4, 3).tolist() == sample_simplex_dirichlet(4, 3).tolist()

    def test_mean(self):
        draws = np.array([sample_simplex_dirichlet(3, s).lam for s in range(10000)])
        assert np.abs(draws.mean(axis=0) - 1 / 3).max() <= 0.02


class TestOcclude:
    SQUARE = PointCloud.uniform([[0, 0], [1, 0], [1, 1], [0, 1]])

    def test_nothing(self):
        out = occlude(self.SQUARE, Ball((5, 5), 0.1))
        assert np.array_equal(out.coords, self.SQUARE.coords)

    def test_everything(self):
        with pytest.raises(AllPointsRemoved):
            occlude(self.SQUARE, Box((-1, -1), (2, 2)))

    def test_corner(self):
        out = occlude(self.SQUARE, Ball((0, 0), 0.1))
        assert out.size == 3
        assert np.allclose(out.masses, 1 / 3)

    def test_boundary_is_inside(self):
        assert occlude(self.SQUARE, Ball((0, 0), 1.0)).size == 1

    def test_parse(self):
        assert parse_mask("circle:0,0,0.5") == Ball((0.0, 0.0), 0.5)
        assert parse_mask("sphere:0,0,0,1") == Ball((0.0, 0.0, 0.0), 1.0)
        assert parse_mask("box:0,0,1,1") == Box((0.0, 0.0), (1.0, 1.0))
        with pytest.raises(ParseError):
            parse_mask("triangle:1,2")

    def test_string_mask(self):
        assert occlude(self.SQUARE, "box:0.5,-1,2,2").size == 2


class TestNetworkJson:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        net = random_network(rng, 7, symmetric=False)
        save_network(net, tmp_path / "n.json")
        back = load_network(tmp_path / "n.json")
        assert np.array_equal(back.weights, net.weights)
        assert np.array_equal(back.masses, net.masses)

    def test_half_mass(self):
        with pytest.raises(SchemaError):
            network_from_dict({"size": 2, "weights": [[0, 1], [1, 0]], "masses": [0.25, 0.25]})

    def test_non_square(self):
        with pytest.raises(SchemaError):
            network_from_dict({"weights": [[0, 1, 2], [1, 0, 2]], "masses": [0.5, 0.5]})

    def test_size_mismatch(self):
        with pytest.raises(SchemaError):
            network_from_dict({"size": 3, "weights": [[0, 1], [1, 0]], "masses": [0.5, 0.5]})

    def test_missing_keys(self):
        with pytest.raises(SchemaError):
            network_from_dict({"weights": [[0]]})

    def test_bad_json(self, tmp_path):
        with pytest.raises(ParseError):
            load_network(_write(tmp_path, "n.json", "{not json"))

    def test_any_csv_as_cloud_or_matrix(self, tmp_path):
        path = _write(tmp_path, "m.csv", "0,3\n3,0\n")
        assert np.allclose(load_any_network(path).weights, [[0, np.hypot(3, 3)], [np.hypot(3, 3), 0]])
        assert np.array_equal(load_any_network(path, as_network=True).weights, [[0, 3], [3, 0]])

    def test_lambda_format(self):
        d = lambda_result_dict(np.array([0.25, 0.75]), 1e-20, 1e-22, "fixed_point", 4)
        assert list(d) == ["lambda", "residual", "normalized_residual", "method", "seed"]
        assert json.loads(json.dumps(d)) == d
