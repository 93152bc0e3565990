import numpy as np
import pytest

from qseer.dataset import DatasetRecord
from qseer.errors import FormatError, ParameterError
from qseer.gnn import (GnnModel, TrainConfig, evaluate_mse, forward,
                       forward_full, load, new_model, node_features, save,
                       train, _forward_core, _loss_and_grads)
from qseer.graph import enumerate_connected_nonisomorphic, gen_random, make_graph
from qseer.qaoa import ParamVector


def _record(g, p, gamma, beta):
    return DatasetRecord(graph_id=g.id, graph=g, depth=p,
                         gamma=tuple(gamma), beta=tuple(beta),
                         cost=0.0, cmax=1.0, ar=0.0)


def _fake_records(graphs, p_max, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for g in graphs:
        for p in range(1, p_max + 1):
            out.append(_record(g, p,
                               rng.uniform(-1.0, 1.0, p) * np.pi / 2,
                               rng.uniform(-1.0, 1.0, p) * np.pi / 4))
    return out


def _structured_records(graphs, p_max):
    # learnable targets: a smooth function of edge density and depth
    out = []
    for g in graphs:
        dens = 2 * len(g.edges) / (g.n * (g.n - 1))
        for p in range(1, p_max + 1):
            out.append(_record(g, p,
                               [0.8 * dens + 0.1 * j for j in range(p)],
                               [0.4 * dens - 0.05 * j for j in range(p)]))
    return out


class TestNodeFeatures:
    def test_shape_and_values(self):
        g = make_graph(3, [(0, 1), (1, 2)])
        x = node_features(g)
        assert x.shape == (3, 3)
        assert np.allclose(x[:, 0], 1.0)
        assert np.allclose(x[:, 1], [0.5, 1.0, 0.5])
        assert np.allclose(x[:, 2], [0.5, 1.0, 0.5])

    def test_weighted_degree_normalized(self):
        g = make_graph(3, [(0, 1, 4.0), (1, 2, 1.0)])
        x = node_features(g)
        assert x[:, 2].max() == 1.0


class TestForward:
    def test_output_ranges(self):
        model = new_model(p_max=3, hidden=16, seed=1)
        rng = np.random.default_rng(2)
        for seed in range(5):
            g = gen_random("erdos_renyi", 5, prob=0.6,
                           weights=("uniform", 0, 1), seed=seed)
            p = int(rng.integers(1, 4))
            pv = forward(model, g, p)
            assert pv.p == p
            assert all(-np.pi / 2 < x < np.pi / 2 for x in pv.gamma)
            assert all(-np.pi / 4 < x < np.pi / 4 for x in pv.beta)

    def test_tail_zeroed_past_depth(self):
        model = new_model(p_max=4, hidden=16, seed=3)
        g = make_graph(3, [(0, 1), (1, 2)])
        out = forward_full(model, g, 2)
        assert out.shape == (8,)
        assert np.all(out[2:4] == 0.0)
        assert np.all(out[6:8] == 0.0)
        assert np.any(out[:2] != 0.0)

    def test_depth_changes_output(self):
        # the one-hot depth input must actually condition the head
        model = new_model(p_max=3, hidden=32, seed=4)
        g = make_graph(4, [(0, 1), (1, 2), (2, 3)])
        a = forward(model, g, 1)
        b = forward(model, g, 2)
        assert a.gamma[0] != b.gamma[0]

    def test_depth_out_of_bounds(self):
        model = new_model(p_max=2, hidden=8)
        g = make_graph(2, [(0, 1)])
        with pytest.raises(ParameterError):
            forward(model, g, 3)
        with pytest.raises(ParameterError):
            forward(model, g, 0)

    def test_permutation_invariance(self):
        model = new_model(p_max=2, hidden=32, seed=6)
        rng = np.random.default_rng(7)
        g = gen_random("erdos_renyi", 6, prob=0.5, weights=("uniform", 0.2, 2), seed=8)
        base = forward_full(model, g, 2)
        for _ in range(5):
            pm = rng.permutation(6)
            h = make_graph(6, [(pm[u], pm[v], w) for u, v, w in g.edges])
            assert np.allclose(forward_full(model, h, 2), base, atol=1e-12)

    def test_edge_weight_blindness_of_plain_variant(self):
        blind = new_model(p_max=2, hidden=16, seed=9, use_edge_weights=False)
        g1 = make_graph(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)])
        g2 = make_graph(4, [(0, 1, 0.3), (1, 2, 2.0), (2, 3, 0.9)])
        assert np.allclose(forward_full(blind, g1, 1), forward_full(blind, g2, 1))
        aware = new_model(p_max=2, hidden=16, seed=9, use_edge_weights=True)
        assert not np.allclose(forward_full(aware, g1, 1), forward_full(aware, g2, 1))


class TestGradients:
    def test_matches_finite_differences(self):
        model = new_model(p_max=2, hidden=6, seed=10)
        g = gen_random("erdos_renyi", 5, prob=0.6, weights=("uniform", 0.1, 1), seed=11)
        records = _fake_records([g], 2, seed=12)
        grads = {k: np.zeros_like(v) for k, v in model.weights.items()}
        _loss_and_grads(model, records, grads)
        eps = 1e-6
        rng = np.random.default_rng(13)
        for key, w in model.weights.items():
            flat = w.reshape(-1)
            idxs = rng.choice(flat.size, size=min(4, flat.size), replace=False)
            for i in idxs:
                orig = flat[i]
                flat[i] = orig + eps
                up = _loss_and_grads(model, records)
                flat[i] = orig - eps
                dn = _loss_and_grads(model, records)
                flat[i] = orig
                fd = (up - dn) / (2 * eps)
                got = grads[key].reshape(-1)[i]
                assert got == pytest.approx(fd, abs=1e-7), key

    def test_loss_ignores_padded_tail(self):
        # mlp2 bias columns past the used outputs get zero gradient at p=1
        model = new_model(p_max=3, hidden=8, seed=14)
        g = make_graph(3, [(0, 1), (1, 2)])
        records = [_record(g, 1, [0.4], [0.1])]
        grads = {k: np.zeros_like(v) for k, v in model.weights.items()}
        _loss_and_grads(model, records, grads)
        db = grads["mlp2_b"]
        assert np.all(db[1:3] == 0.0) and np.all(db[4:6] == 0.0)
        assert db[0] != 0.0 and db[3] != 0.0


class TestTraining:
    def test_overfits_one_record(self):
        g = make_graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
        records = [_record(g, 1, [0.6], [-0.2])]
        model = new_model(p_max=2, hidden=32, seed=15)
        model, hist = train(model, records, [], TrainConfig(epochs=400, lr0=0.02,
                                                            batch=1, seed=16))
        assert hist[-1]["train_mse"] < 1e-6
        pv = forward(model, g, 1)
        assert pv.gamma[0] == pytest.approx(0.6, abs=1e-2)
        assert pv.beta[0] == pytest.approx(-0.2, abs=1e-2)

    def test_reduces_val_mse(self):
        graphs = enumerate_connected_nonisomorphic(5)
        records = _structured_records(graphs, 2)
        val = records[-6:]
        tr = records[:-6]
        model = new_model(p_max=2, hidden=32, seed=18)
        model, hist = train(model, tr, val, TrainConfig(epochs=10, seed=19))
        assert hist[-1]["val_mse"] < hist[0]["val_mse"]
        assert hist[0]["epoch"] == 0 and hist[-1]["epoch"] == 10

    def test_determinism(self):
        g = make_graph(3, [(0, 1), (1, 2), (0, 2)])
        records = _fake_records([g], 2, seed=20)
        runs = []
        for _ in range(2):
            model = new_model(p_max=2, hidden=16, seed=21)
            model, hist = train(model, records, [], TrainConfig(epochs=3, seed=22))
            runs.append((hist[-1]["train_mse"],
                         {k: v.copy() for k, v in model.weights.items()}))
        assert runs[0][0] == runs[1][0]
        for k in runs[0][1]:
            assert np.array_equal(runs[0][1][k], runs[1][1][k])

    def test_empty_training_set(self):
        model = new_model(p_max=1, hidden=4)
        with pytest.raises(ParameterError):
            train(model, [], [], TrainConfig())
        with pytest.raises(ParameterError):
            evaluate_mse(model, [])

    def test_bad_config(self):
        with pytest.raises(ParameterError):
            TrainConfig(epochs=0)
        with pytest.raises(ParameterError):
            TrainConfig(lr0=-1.0)


class TestSerialization:
    def test_roundtrip_bit_exact(self, tmp_path):
        model = new_model(p_max=3, hidden=12, seed=23, use_edge_weights=False,
                          gamma_scale=np.pi, beta_scale=np.pi / 2)
        path = tmp_path / "m.json"
        save(model, path)
        back = load(path)
        assert back.p_max == 3 and back.hidden == 12
        assert back.gamma_scale == model.gamma_scale
        assert back.use_edge_weights is False
        for k, v in model.weights.items():
            assert np.array_equal(back.weights[k], v)
        g = make_graph(3, [(0, 1), (1, 2)])
        assert np.array_equal(forward_full(back, g, 2), forward_full(model, g, 2))

    def test_rejects_wrong_version(self, tmp_path):
        model = new_model(p_max=1, hidden=4)
        path = tmp_path / "m.json"
        save(model, path)
        import json
        doc = json.loads(path.read_text())
        doc["version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(FormatError):
            load(path)

    def test_rejects_truncated_file(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text('{"version": 1, "p_max": 2')
        with pytest.raises(FormatError):
            load(path)
