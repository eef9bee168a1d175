import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import sbanm
from sbanm import (
    MultilayerNetwork,
    ResponseMatrix,
    build_similarity_network,
    fisher,
    normalize_logit,
    read_network,
    sum_layers,
    write_network,
)
from sbanm.errors import DataError

from conftest import random_network


def responses_from_rows(rows):
    """rows: list of per-subject answer strings like 'yy n.' ('.'=missing)."""
    mapping = {"y": 1.0, "n": 0.0, ".": math.nan}
    data = np.array([[mapping[c] for c in row] for row in rows])
    return ResponseMatrix(n_subjects=len(rows), layers=[("L", data)])


class TestSimilarity:
    def test_offsetting_agreements(self):
        net = build_similarity_network(responses_from_rows(["yynn", "ynny"]))
        # h = (1, 0, -1, 0) -> r = 0 -> weight 0
        assert net.weights[0, 0] == 0.0

    def test_full_agreement_is_clamped_finite(self):
        net = build_similarity_network(responses_from_rows(["yyyy", "yyyy"]))
        expected = math.atanh(1.0 - 1e-7)
        assert net.weights[0, 0] == pytest.approx(expected, rel=1e-12)
        assert 8.0 < net.weights[0, 0] < 9.0

    def test_all_yes_equals_all_no_in_magnitude(self):
        w_yes = build_similarity_network(responses_from_rows(["yy", "yy"])).weights[0, 0]
        w_no = build_similarity_network(responses_from_rows(["nn", "nn"])).weights[0, 0]
        assert w_yes == pytest.approx(-w_no, rel=1e-12)
        assert w_yes == pytest.approx(math.atanh(1.0 - 1e-7), rel=1e-12)

    def test_missing_counts_as_zero(self):
        # ('y','.') and ('n','.') items contribute nothing either way.
        net = build_similarity_network(responses_from_rows(["y.yn", "..yn"]))
        # items: (y,.)=0, (.,.)=0, (y,y)=+1, (n,n)=-1 -> r=0
        assert net.weights[0, 0] == 0.0

    def test_item_order_invariance(self):
        a = build_similarity_network(responses_from_rows(["ynyn", "yny."]))
        b = build_similarity_network(responses_from_rows(["nyny", "yny."][::-1]))
        rows = ["ynyn", "yny."]
        perm = [2, 0, 3, 1]
        permuted = ["".join(r[p] for p in perm) for r in rows]
        c = build_similarity_network(responses_from_rows(permuted))
        assert np.array_equal(a.weights, c.weights)

    def test_empty_layer_rejected(self):
        with pytest.raises(DataError, match="no items"):
            ResponseMatrix(n_subjects=2, layers=[("L", np.zeros((2, 0)))])


class TestFisher:
    def test_values(self):
        assert fisher(0.0) == 0.0
        assert fisher(0.5) == pytest.approx(0.5493, abs=5e-5)
        assert fisher(-0.5) == -fisher(0.5)

    def test_out_of_range(self):
        for r in (1.0, -1.0, 1.5):
            with pytest.raises(ValueError):
                fisher(r)

    def test_odd_increasing_invertible_on_grid(self):
        grid = np.linspace(-0.999, 0.999, 401)
        vals = np.array([fisher(r) for r in grid])
        assert np.all(np.diff(vals) > 0)
        assert np.allclose(vals, -vals[::-1], atol=1e-12)
        assert np.allclose(np.tanh(vals), grid, atol=1e-12)


class TestNormalizeLogit:
    def test_equal_edges_map_to_zero(self):
        net = MultilayerNetwork(n=2 + 1, K=1, weights=np.array([[1.0], [1.0], [0.0]]))
        # layer sum 2: weights (1,1,0) -> p=(0.5,0.5,clamped)
        out = normalize_logit(net)
        assert out.weights[0, 0] == 0.0
        assert out.weights[1, 0] == 0.0

    def test_quarter_three_quarter(self):
        net = MultilayerNetwork(n=2, K=2, weights=np.array([[1.0, 3.0]]))
        # single pair per layer: p = 1 -> clamped; use two pairs instead
        net = MultilayerNetwork(n=3, K=1, weights=np.array([[1.0], [3.0], [0.0]]))
        out = normalize_logit(net)
        assert out.weights[0, 0] == pytest.approx(math.log(0.25 / 0.75), abs=1e-12)
        assert out.weights[1, 0] == pytest.approx(math.log(0.75 / 0.25), abs=1e-12)
        assert out.weights[0, 0] == pytest.approx(-1.0986, abs=5e-5)

    def test_zero_edge_clamped_finite(self):
        net = MultilayerNetwork(n=3, K=1, weights=np.array([[1.0], [3.0], [0.0]]))
        out = normalize_logit(net)
        assert out.weights[2, 0] == pytest.approx(math.log(1e-12 / (1 - 1e-12)), rel=1e-9)
        assert out.weights[2, 0] == pytest.approx(-27.63, abs=0.01)

    def test_zero_sum_layer_rejected(self):
        net = MultilayerNetwork(n=2, K=1, weights=np.array([[0.0]]))
        with pytest.raises(DataError, match="no trips"):
            normalize_logit(net)

    def test_negative_weights_rejected(self):
        net = MultilayerNetwork(n=2, K=1, weights=np.array([[-1.0]]))
        with pytest.raises(ValueError):
            normalize_logit(net)


class TestSumLayers:
    def test_single_layer_identity(self):
        net = random_network(5, 1, seed=1)
        assert np.array_equal(sum_layers(net).weights, net.weights)

    def test_sums_values(self):
        net = MultilayerNetwork(n=2, K=3, weights=np.array([[1.0, 2.0, 3.0]]))
        assert sum_layers(net).weights[0, 0] == 6.0

    def test_commutes_with_layer_permutation(self):
        net = random_network(6, 3, seed=2)
        permuted = MultilayerNetwork(n=6, K=3, weights=net.weights[:, [2, 0, 1]])
        assert np.allclose(sum_layers(net).weights, sum_layers(permuted).weights)

    def test_preserves_nodes_and_pairs(self):
        net = random_network(7, 2, seed=3)
        out = sum_layers(net)
        assert out.n == net.n and out.n_pairs == net.n_pairs


class TestNetworkFile:
    def test_canonical_small_file(self, tmp_path):
        path = tmp_path / "net.tsv"
        path.write_text(
            "#sbanm-net v1 n=3 K=2\n"
            "0\t1\t1.5\t-2\n"
            "0\t2\t0\t0.25\n"
            "1\t2\t3\t4\n"
        )
        net = read_network(str(path))
        assert net.n == 3 and net.K == 2 and net.n_pairs == 3
        assert net.weights[1].tolist() == [0.0, 0.25]

    def test_round_trip_is_byte_identical(self, tmp_path):
        for seed in range(5):
            net = random_network(9, 3, seed=seed)
            p1 = tmp_path / f"a{seed}.tsv"
            p2 = tmp_path / f"b{seed}.tsv"
            write_network(net, str(p1))
            write_network(read_network(str(p1)), str(p2))
            assert p1.read_bytes() == p2.read_bytes()

    def test_round_trip_reproduces_weights_exactly(self, tmp_path):
        net = random_network(8, 2, seed=11)
        path = tmp_path / "net.tsv"
        write_network(net, str(path))
        assert np.array_equal(read_network(str(path)).weights, net.weights)

    def test_missing_pair_detected(self, tmp_path):
        path = tmp_path / "net.tsv"
        path.write_text(
            "#sbanm-net v1 n=3 K=1\n0\t1\t1\n1\t2\t3\n"
        )
        with pytest.raises(DataError, match="incomplete dense pair list"):
            read_network(str(path))

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "net.tsv"
        path.write_text("#sbanm v2 n=3\n")
        with pytest.raises(DataError, match=":1: malformed header"):
            read_network(str(path))

    def test_non_finite_weight_names_line(self, tmp_path):
        path = tmp_path / "net.tsv"
        path.write_text("#sbanm-net v1 n=2 K=1\n0\t1\tinf\n")
        with pytest.raises(DataError, match=":2: non-finite weight"):
            read_network(str(path))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_round_trip_property(self, seed):
        import tempfile, os

        net = random_network(5, 2, seed=seed)
        with tempfile.TemporaryDirectory() as tmp:
            p1, p2 = os.path.join(tmp, "a.tsv"), os.path.join(tmp, "b.tsv")
            write_network(net, p1)
            write_network(read_network(p1), p2)
            with open(p1, "rb") as f1, open(p2, "rb") as f2:
                assert f1.read() == f2.read()


class TestMembershipAndParamsFiles:
    def test_membership_round_trip(self, tmp_path):
        path = tmp_path / "m.csv"
        tau = np.array([[0.9, 0.1], [0.2, 0.8], [0.5, 0.5]])
        sbanm.write_memberships(str(path), np.array([0, 1, 0]), tau)
        names, hard, tau2 = sbanm.read_memberships(str(path))
        assert names == ["0", "1", "2"]
        assert hard.tolist() == [0, 1, 0]
        assert np.array_equal(tau2, tau)

    def test_params_round_trip(self, tmp_path):
        params, _ = sbanm.experiment2_spec()
        path = tmp_path / "p.json"
        sbanm.write_params(str(path), params, elbo=-1.5, icl=-2.5, seed=7)
        got, extras = sbanm.read_params(str(path))
        assert got.Q == 4 and got.noise_block == 0
        assert np.array_equal(got.blocks[2].mu, params.blocks[2].mu)
        assert got.blocks[1].rho == params.blocks[1].rho
        assert extras == {"elbo": -1.5, "icl": -2.5, "seed": 7}

    def test_response_csv_parsing(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text(
            "subject,anx:q1,anx:q2,mood:q1\n"
            "s1,1,0,NA\n"
            "s2,1,1,0\n"
            "s3,0,NA,0\n"
        )
        resp = sbanm.read_responses(str(path))
        assert resp.n_subjects == 3
        assert [name for name, _ in resp.layers] == ["anx", "mood"]
        assert resp.layers[0][1].shape == (3, 2)
        assert math.isnan(resp.layers[1][1][0, 0])

    def test_response_csv_bad_cell_names_line(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("subject,a:q\ns1,1\ns2,2\n")
        with pytest.raises(DataError, match=":3:"):
            sbanm.read_responses(str(path))
