import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnnmpc import lstm, sysid


def make_net(seed=0, layers=1, hidden=4, horizon=3, layout=lstm.DEFAULT_LAYOUT):
    return lstm.initialize_network(
        seed=seed, n_layers=layers, hidden_size=hidden, horizon=horizon, layout=layout
    )


def zero_net(hidden=4, horizon=3, layers=1, readout_bias=(0.0, 0.0)):
    net = make_net(layers=layers, hidden=hidden, horizon=horizon)
    for arr in net.parameter_arrays():
        arr[:] = 0.0
    net.readout_bias[:] = readout_bias
    return net


def scalar_cell_reference(w_i, w_f, w_o, w_c, b_i, b_f, b_o, b_c, h_prev, c_prev, x):
    """Plain-Python single-cell evaluation, independent of the vectorized path."""

    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    z = list(h_prev) + list(x)
    hidden = len(h_prev)
    h_out, c_out = [], []
    for r in range(hidden):
        a_i = sum(w_i[r][j] * z[j] for j in range(len(z))) + b_i[r]
        a_f = sum(w_f[r][j] * z[j] for j in range(len(z))) + b_f[r]
        a_o = sum(w_o[r][j] * z[j] for j in range(len(z))) + b_o[r]
        a_c = sum(w_c[r][j] * z[j] for j in range(len(z))) + b_c[r]
        c = sig(a_f) * c_prev[r] + sig(a_i) * math.tanh(a_c)
        h_out.append(sig(a_o) * math.tanh(c))
        c_out.append(c)
    return h_out, c_out


class TestCellStep:
    def test_zero_parameters_halve_the_cell_state(self):
        layer = lstm.LstmLayerParams(weights=np.zeros((16, 7)), biases=np.zeros(16))
        c_prev = np.array([0.4, -0.2, 1.0, 0.0])
        h, c = lstm.cell_step(layer, np.zeros(4), c_prev, np.zeros(3))
        assert np.allclose(c, 0.5 * c_prev)
        assert np.allclose(h, 0.5 * np.tanh(0.5 * c_prev))

    def test_saturated_forget_gate_preserves_cell_state(self):
        # Large forget bias and very negative input bias: the cell remembers.
        layer = lstm.LstmLayerParams(weights=np.zeros((16, 6)), biases=np.zeros(16))
        layer.b_f[:] = 30.0
        layer.b_i[:] = -30.0
        c_prev = np.array([0.7, -0.3, 0.1, 0.9])
        _, c = lstm.cell_step(layer, np.zeros(4), c_prev, np.zeros(2))
        assert np.allclose(c, c_prev, atol=1e-9)

    def test_matches_independent_scalar_reference(self):
        rng = np.random.default_rng(11)
        layer = lstm.LstmLayerParams(
            weights=rng.uniform(-0.5, 0.5, (12, 7)), biases=rng.uniform(-0.2, 0.2, 12)
        )
        h_prev = rng.uniform(-1, 1, 3)
        c_prev = rng.uniform(-1, 1, 3)
        x = rng.uniform(-1, 1, 4)
        h, c = lstm.cell_step(layer, h_prev, c_prev, x)
        h_ref, c_ref = scalar_cell_reference(
            layer.w_i, layer.w_f, layer.w_o, layer.w_c,
            layer.b_i, layer.b_f, layer.b_o, layer.b_c,
            h_prev, c_prev, x,
        )
        assert np.allclose(h, h_ref, atol=1e-12)
        assert np.allclose(c, c_ref, atol=1e-12)

    def test_shape_mismatch_rejected(self):
        layer = lstm.LstmLayerParams(weights=np.zeros((16, 7)), biases=np.zeros(16))
        with pytest.raises(ValueError):
            lstm.cell_step(layer, np.zeros(5), np.zeros(4), np.zeros(3))

    @settings(max_examples=30, deadline=None)
    @given(data=st.data())
    def test_gate_ranges_and_finiteness(self, data):
        rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
        layer = lstm.LstmLayerParams(
            weights=rng.normal(0, 2, (16, 6)), biases=rng.normal(0, 2, 16)
        )
        x = data.draw(
            st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=2).map(np.array)
        )
        h, c = lstm.cell_step(layer, rng.uniform(-1, 1, 4), rng.uniform(-2, 2, 4), x)
        z = np.concatenate([rng.uniform(-1, 1, 4), x])
        assert np.all(np.isfinite(h)) and np.all(np.isfinite(c))
        gates = lstm.sigmoid(z @ layer.weights.T + layer.biases)
        assert np.all(gates > 0.0) and np.all(gates < 1.0)


class TestForward:
    def test_zero_network_predicts_readout_bias(self):
        net = zero_net(readout_bias=(0.3, -0.7))
        pred = lstm.forward(net, np.array([0.5, 0.5]), np.zeros((3, 2)))
        assert np.allclose(pred, [0.3, -0.7])

    def test_forward_is_pure(self):
        net = make_net(seed=2)
        rng = np.random.default_rng(0)
        y0 = rng.uniform(-1, 1, 2)
        u = rng.uniform(-1, 1, (3, 2))
        assert np.array_equal(lstm.forward(net, y0, u), lstm.forward(net, y0, u))

    def test_batched_matches_single(self):
        net = make_net(seed=3)
        rng = np.random.default_rng(1)
        y0 = rng.uniform(-1, 1, (6, 2))
        u = rng.uniform(-1, 1, (6, 3, 2))
        batched = lstm.forward(net, y0, u)
        for i in range(6):
            assert np.allclose(batched[i], lstm.forward(net, y0[i], u[i]), atol=1e-14)

    def test_horizon_mismatch_rejected(self):
        net = make_net(horizon=4)
        with pytest.raises(ValueError):
            lstm.forward(net, np.zeros(2), np.zeros((3, 2)))

    def test_layouts_differ_and_are_recorded(self):
        rng = np.random.default_rng(4)
        y0 = rng.uniform(-1, 1, 2)
        u = rng.uniform(-1, 1, (3, 2))
        first = make_net(seed=5, layout=lstm.LAYOUT_FIRST_SLOT)
        every = make_net(seed=5, layout=lstm.LAYOUT_EVERY_SLOT)
        assert first.layout == lstm.LAYOUT_FIRST_SLOT
        assert every.layout == lstm.LAYOUT_EVERY_SLOT
        assert not np.allclose(lstm.forward(first, y0, u), lstm.forward(every, y0, u))


class TestLossMae:
    def test_perfect_prediction_gives_zero(self):
        p = np.array([[0.1, 0.2]])
        assert lstm.loss_mae(p, p) == 0.0

    def test_single_window_arithmetic(self):
        assert lstm.loss_mae(np.array([[0.1, -0.3]]), np.zeros((1, 2))) == pytest.approx(0.2)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        p = rng.normal(size=(10, 2))
        t = rng.normal(size=(10, 2))
        perm = rng.permutation(10)
        assert lstm.loss_mae(p, t) == pytest.approx(lstm.loss_mae(p[perm], t[perm]))

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            lstm.loss_mae(np.empty((0, 2)), np.empty((0, 2)))


class TestBackward:
    def test_readout_bias_gradient_is_scaled_sign(self):
        net = make_net(seed=6)
        y0 = np.array([[0.2, -0.1]])
        u = np.zeros((1, 3, 2))
        target = np.array([[10.0, -10.0]])  # forces known signs
        _, grads = lstm.backward(net, y0, u, target)
        d_bias = grads[-1]
        assert np.allclose(d_bias, [-0.5, 0.5])

    def test_duplicated_window_leaves_gradient_unchanged(self):
        net = make_net(seed=7)
        rng = np.random.default_rng(2)
        y0 = rng.uniform(-1, 1, (1, 2))
        u = rng.uniform(-1, 1, (1, 3, 2))
        t = rng.uniform(-1, 1, (1, 2))
        _, g1 = lstm.backward(net, y0, u, t)
        _, g2 = lstm.backward(
            net, np.repeat(y0, 3, 0), np.repeat(u, 3, 0), np.repeat(t, 3, 0)
        )
        for a, b in zip(g1, g2):
            assert np.allclose(a, b, atol=1e-13)

    @pytest.mark.parametrize("layout", [lstm.LAYOUT_FIRST_SLOT, lstm.LAYOUT_EVERY_SLOT])
    def test_gradients_match_central_differences(self, layout):
        net = lstm.initialize_network(
            seed=8, n_layers=2, hidden_size=5, horizon=3, layout=layout
        )
        rng = np.random.default_rng(3)
        y0 = rng.uniform(-1, 1, (4, 2))
        u = rng.uniform(-1, 1, (4, 3, 2))
        t = rng.uniform(-1, 1, (4, 2))
        _, grads = lstm.backward(net, y0, u, t)
        h = 1e-5
        for p_idx, p in enumerate(net.parameter_arrays()):
            flat = p.reshape(-1)
            g_flat = grads[p_idx].reshape(-1)
            for i in range(0, flat.size, max(1, flat.size // 17)):
                orig = flat[i]
                flat[i] = orig + h
                up = lstm.loss_mae(lstm.forward(net, y0, u), t)
                flat[i] = orig - h
                down = lstm.loss_mae(lstm.forward(net, y0, u), t)
                flat[i] = orig
                fd = (up - down) / (2 * h)
                assert abs(fd - g_flat[i]) / max(abs(fd), abs(g_flat[i]), 1e-6) < 1e-4


class TestAdam:
    def test_first_step_is_signed_learning_rate(self):
        p = [np.array([0.5, -0.5])]
        g = [np.array([0.3, -0.2])]
        state = lstm.AdamState.for_parameters(p, learning_rate=1e-3)
        lstm.adam_step(state, p, g)
        assert np.allclose(p[0], [0.5 - 1e-3, -0.5 + 1e-3], atol=1e-8)

    def test_zero_gradient_leaves_parameters_unchanged(self):
        p = [np.array([1.0, 2.0])]
        state = lstm.AdamState.for_parameters(p)
        for _ in range(5):
            lstm.adam_step(state, p, [np.zeros(2)])
        assert np.array_equal(p[0], [1.0, 2.0])

    def test_two_steps_match_hand_computation(self):
        # Frozen from an independent hand evaluation of the update rule with
        # constant gradient 0.5 from parameter 0.2.
        p = [np.array([0.2])]
        state = lstm.AdamState.for_parameters(p, learning_rate=1e-3)
        lstm.adam_step(state, p, [np.array([0.5])])
        assert p[0][0] == pytest.approx(0.19900000002, abs=1e-12)
        lstm.adam_step(state, p, [np.array([0.5])])
        assert p[0][0] == pytest.approx(0.19800000004, abs=1e-12)

    def test_shape_mismatch_rejected(self):
        p = [np.zeros(2)]
        state = lstm.AdamState.for_parameters(p)
        with pytest.raises(ValueError):
            lstm.adam_step(state, p, [np.zeros(3)])


def tiny_dataset(n=40, horizon=3, seed=0):
    rng = np.random.default_rng(seed)
    y0 = rng.uniform(-1, 1, (n, 2))
    u = rng.uniform(-1, 1, (n, horizon, 2))
    # A smooth synthetic relation the net can partially fit.
    target = np.tanh(0.5 * y0 + 0.3 * u.mean(axis=1))
    norm = sysid.Normalization(offsets=np.zeros(4), scales=np.ones(4))
    return sysid.Dataset(y0=y0, u_seq=u, target=target, split="train", normalization=norm)


class TestTrain:
    def test_zero_epochs_rejected(self):
        net = make_net()
        with pytest.raises(ValueError):
            lstm.train(net, tiny_dataset(), epochs=0)

    def test_unnormalized_dataset_rejected(self):
        net = make_net()
        ds = tiny_dataset()
        ds = sysid.Dataset(y0=ds.y0, u_seq=ds.u_seq, target=ds.target, split="train")
        with pytest.raises(ValueError):
            lstm.train(net, ds, epochs=1)

    def test_loss_decreases(self):
        net = make_net(seed=9, hidden=8)
        history = lstm.train(net, tiny_dataset(), epochs=40, batch_size=8, seed=1)
        assert np.median(history[-5:]) < np.median(history[:5])

    def test_deterministic_under_fixed_seed(self):
        results = []
        for _ in range(2):
            net = make_net(seed=10, hidden=6)
            lstm.train(net, tiny_dataset(), epochs=5, batch_size=8, seed=4)
            results.append([a.copy() for a in net.parameter_arrays()])
        for a, b in zip(*results):
            assert np.array_equal(a, b)

    def test_divergence_aborts_with_diagnostic(self):
        net = make_net(seed=11)
        with pytest.raises(RuntimeError, match="diverged"):
            lstm.train(net, tiny_dataset(), epochs=3, learning_rate=1e308)


class TestEvaluateRmse:
    def test_constant_predictor_matches_target_spread(self):
        # A zero network predicts its readout bias; with identity
        # normalization the RMSE equals the channel-averaged deviation of the
        # targets around that constant.
        horizon = 3
        net = zero_net(horizon=horizon, readout_bias=(0.1, -0.2))
        rng = np.random.default_rng(5)
        targets = rng.normal(size=(50, 2))
        ds = sysid.Dataset(
            y0=rng.uniform(-1, 1, (50, 2)),
            u_seq=rng.uniform(-1, 1, (50, horizon, 2)),
            target=targets,
            split="test",
        )
        norm = sysid.Normalization(offsets=np.zeros(4), scales=np.ones(4))
        expected = np.mean(np.sqrt(np.mean((targets - np.array([0.1, -0.2])) ** 2, axis=0)))
        assert lstm.evaluate_rmse(net, ds, norm) == pytest.approx(expected, rel=1e-12)

    def test_perfect_predictor_scores_zero(self):
        horizon = 2
        net = zero_net(horizon=horizon, readout_bias=(0.25, -0.5))
        n = 10
        targets = np.tile([0.25, -0.5], (n, 1))
        ds = sysid.Dataset(
            y0=np.zeros((n, 2)), u_seq=np.zeros((n, horizon, 2)), target=targets, split="test"
        )
        norm = sysid.Normalization(offsets=np.zeros(4), scales=np.ones(4))
        assert lstm.evaluate_rmse(net, ds, norm) == pytest.approx(0.0, abs=1e-15)


class TestPersistence:
    def test_roundtrip_is_bit_exact(self, tmp_path):
        net = make_net(seed=12, layers=2, hidden=5, horizon=4)
        norm = sysid.Normalization(
            offsets=np.array([0.1, 0.2, 0.3, 0.4]), scales=np.array([1.0, 2.0, 3.0, 4.0])
        )
        path = tmp_path / "model.json"
        lstm.save_model(net, norm, path, config_digest="cafe01")
        loaded = lstm.load_model(path)
        assert lstm.load_model_digest(path) == "cafe01"
        assert loaded.horizon == net.horizon
        assert loaded.layout == net.layout
        for a, b in zip(net.parameter_arrays(), loaded.parameter_arrays()):
            assert np.array_equal(a, b)
        assert np.array_equal(loaded.normalization.offsets, norm.offsets)

    def test_loaded_model_predicts_identically(self, tmp_path):
        net = make_net(seed=13, layers=2, hidden=6, horizon=3)
        rng = np.random.default_rng(6)
        y0 = rng.uniform(-1, 1, (4, 2))
        u = rng.uniform(-1, 1, (4, 3, 2))
        path = tmp_path / "model.json"
        lstm.save_model(net, None, path)
        loaded = lstm.load_model(path)
        assert np.array_equal(lstm.forward(net, y0, u), lstm.forward(loaded, y0, u))

    def test_mismatched_layer_shapes_name_the_layer(self, tmp_path):
        net = make_net(seed=14, layers=2, hidden=4, horizon=3)
        path = tmp_path / "model.json"
        lstm.save_model(net, None, path)
        doc = json.loads(path.read_text())
        doc["layers"][1]["W_f"] = [[0.0] * 3] * 4
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="layer 1"):
            lstm.load_model(path)


class TestNetworkValidation:
    def test_layer_chaining_checked(self):
        layers = [
            lstm.LstmLayerParams(weights=np.zeros((16, 8)), biases=np.zeros(16)),
            lstm.LstmLayerParams(weights=np.zeros((16, 9)), biases=np.zeros(16)),
        ]
        with pytest.raises(ValueError, match="layer 1"):
            lstm.NetworkParameters(
                layers=layers,
                readout_weights=np.zeros((2, 4)),
                readout_bias=np.zeros(2),
                horizon=3,
            )

    def test_readout_shape_checked(self):
        layers = [lstm.LstmLayerParams(weights=np.zeros((16, 8)), biases=np.zeros(16))]
        with pytest.raises(ValueError, match="readout"):
            lstm.NetworkParameters(
                layers=layers,
                readout_weights=np.zeros((2, 5)),
                readout_bias=np.zeros(2),
                horizon=3,
            )
