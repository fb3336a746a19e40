import json

import numpy as np
import pytest

from ilplayer.datasets import (
    DatasetFormatError,
    KnapsackDatasetSpec,
    RcDatasetSpec,
    WscDatasetSpec,
    decode_items,
    dumps_dataset,
    encode_items,
    generate_knapsack,
    generate_rc,
    generate_wsc,
    knapsack_feature_map,
    load_dataset,
    save_dataset,
)
from ilplayer.ilp_solver import IlpInstance, solve_ilp


def knapsack_dp(weights, prices, capacity):
    """Best total price with integer weights (independent of the ILP solver)."""
    best = np.zeros(int(capacity) + 1)
    for w, p in zip(weights.astype(int), prices):
        for cap in range(int(capacity), w - 1, -1):
            best[cap] = max(best[cap], best[cap - w] + p)
    return best[int(capacity)]


@pytest.fixture(scope="module")
def rc_small():
    return generate_rc(RcDatasetSpec(m=2, n=8, train_size=80, test_size=40, seed=3))


@pytest.fixture(scope="module")
def wsc_small():
    return generate_wsc(WscDatasetSpec(universe=4, train_size=80, test_size=40, seed=1))


@pytest.fixture(scope="module")
def knap_small():
    return generate_knapsack(KnapsackDatasetSpec(train_size=100, test_size=20, seed=2))


class TestRc:
    def test_labels_feasible(self, rc_small):
        A = np.array(rc_small.ground_truth["A"])
        b = np.array(rc_small.ground_truth["b"])
        z = rc_small.lattice().to_frame(np.vstack([rc_small.train.labels, rc_small.test.labels]))
        assert np.all(z @ A.T <= b + 1e-9)

    def test_origin_feasible(self, rc_small):
        gt = rc_small.ground_truth
        A, b, o = np.array(gt["A"]), np.array(gt["b"]), np.array(gt["origins"])
        assert np.all(np.sum(A * o, axis=1) <= b)

    def test_feasible_fraction_in_band(self, rc_small):
        assert 0.01 <= rc_small.ground_truth["feasible_fraction"] <= 0.99

    def test_labels_reproduce(self, rc_small):
        lattice = rc_small.lattice()
        A, b = lattice.constraints_to_integer(np.array(rc_small.ground_truth["A"]), np.array(rc_small.ground_truth["b"]))
        for c, y in zip(rc_small.test.inputs[:15], rc_small.test.labels[:15]):
            res = solve_ilp(IlpInstance(lattice.cost_to_integer(c), A, b, lattice.low, lattice.high))
            assert res.solution.tolist() == y.tolist()

    def test_costs_are_unit(self, rc_small):
        np.testing.assert_allclose(np.linalg.norm(rc_small.train.inputs, axis=1), 1.0)

    def test_m1_binary_non_degenerate(self):
        ds = generate_rc(RcDatasetSpec(m=1, train_size=200, test_size=10, seed=0))
        assert len(np.unique(ds.train.labels, axis=0)) > 1

    def test_dense_box(self):
        ds = generate_rc(RcDatasetSpec(m=1, box="dense", n=4, train_size=30, test_size=10, seed=0,
                                       feasibility_samples=2000))
        assert ds.train.labels.min() >= -5 and ds.train.labels.max() <= 5
        assert ds.ground_truth["feasible_fraction"] >= 0.01

    def test_degenerate_band_raises(self):
        spec = RcDatasetSpec(m=1, n=4, train_size=5, test_size=5, min_feasible_fraction=1.0,
                             feasibility_samples=500, max_attempts=3)
        with pytest.raises(RuntimeError):
            generate_rc(spec)

    def test_seed_determinism(self):
        spec = RcDatasetSpec(m=1, n=6, train_size=20, test_size=10, seed=9, feasibility_samples=1000)
        assert dumps_dataset(generate_rc(spec)) == dumps_dataset(generate_rc(spec))


class TestWsc:
    def test_covering(self, wsc_small):
        covered = set()
        for s in wsc_small.ground_truth["subsets"]:
            assert 1 <= len(s) <= 3
            covered.update(s)
        assert covered == set(range(4))

    def test_labels_cover(self, wsc_small):
        A = np.array(wsc_small.ground_truth["A"])
        labels = np.vstack([wsc_small.train.labels, wsc_small.test.labels])
        assert np.all(labels @ A.T >= 1)
        assert not np.any(np.all(labels == 0, axis=1))

    def test_costs_positive(self, wsc_small):
        assert np.all(wsc_small.train.inputs > 0) and np.all(wsc_small.train.inputs <= 1)
        assert wsc_small.n == 8


class TestKnapsack:
    def test_ranges(self, knap_small):
        w, p = knap_small.train.extra["weights"], knap_small.train.extra["prices"]
        assert w.min() >= 15 and w.max() <= 35 and p.min() >= 10 and p.max() <= 45
        assert np.all(w == np.round(w)) and np.all(p == np.round(p))

    def test_labels_match_dp(self, knap_small):
        split = knap_small.train
        for w, p, y in zip(split.extra["weights"], split.extra["prices"], split.labels):
            assert w @ y <= 100
            assert p @ y == knapsack_dp(w, p, 100)

    def test_noise_free_decode(self):
        spec = KnapsackDatasetSpec(noise=0.0)
        rng = np.random.default_rng(0)
        W = knapsack_feature_map(rng, spec.feature_dim)
        np.testing.assert_allclose(W.T @ W, np.eye(2), atol=1e-12)
        w = rng.integers(15, 36, (5, 10)).astype(float)
        p = rng.integers(10, 46, (5, 10)).astype(float)
        feats = encode_items(w, p, W, spec, rng)
        w2, p2 = decode_items(feats, W, spec)
        np.testing.assert_allclose(w2, w, atol=1e-6)
        np.testing.assert_allclose(p2, p, atol=1e-6)


class TestSerialization:
    @pytest.mark.parametrize("name", ["rc_small", "wsc_small", "knap_small"])
    def test_round_trip(self, name, request, tmp_path):
        ds = request.getfixturevalue(name)
        path = tmp_path / "d.jsonl"
        save_dataset(ds, path)
        back = load_dataset(path)
        assert back.task == ds.task and back.spec == ds.spec and back.ground_truth == ds.ground_truth
        for split in ("train", "test"):
            a, b = ds.split(split), back.split(split)
            assert np.array_equal(a.inputs, b.inputs)
            assert np.array_equal(a.labels, b.labels) and b.labels.dtype == np.int64
            assert a.extra.keys() == b.extra.keys()
            for k in a.extra:
                assert np.array_equal(a.extra[k], b.extra[k])
        assert dumps_dataset(back) == dumps_dataset(ds)

    def test_version_mismatch(self, rc_small, tmp_path):
        lines = dumps_dataset(rc_small).splitlines()
        header = json.loads(lines[0])
        header["schema_version"] = 99
        path = tmp_path / "d.jsonl"
        path.write_text("\n".join([json.dumps(header)] + lines[1:]))
        with pytest.raises(DatasetFormatError, match="schema_version"):
            load_dataset(path)

    def test_dimension_mismatch(self, rc_small, tmp_path):
        lines = dumps_dataset(rc_small).splitlines()
        item = json.loads(lines[1])
        item["label"] = item["label"][:-1]
        path = tmp_path / "d.jsonl"
        path.write_text("\n".join([lines[0], json.dumps(item)] + lines[2:]))
        with pytest.raises(DatasetFormatError, match="expected 8"):
            load_dataset(path)

    def test_count_mismatch(self, rc_small, tmp_path):
        lines = dumps_dataset(rc_small).splitlines()
        path = tmp_path / "d.jsonl"
        path.write_text("\n".join(lines[:-1]))
        with pytest.raises(DatasetFormatError, match="header says"):
            load_dataset(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text("")
        with pytest.raises(DatasetFormatError):
            load_dataset(path)
