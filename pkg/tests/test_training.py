import numpy as np
import pytest
from sklearn.linear_model import LogisticRegression

from gradcheck import max_relative_error, random_config
from spikepack.datasets import make_blobs
from spikepack.errors import ShapeError, TrainingDivergedError
from spikepack.network import network_forward
from spikepack.training import backward, forward_with_tape, init_network, softmax_cross_entropy, train_toy


class TestGradients:
    @pytest.mark.parametrize("index", range(6))
    def test_backward_matches_finite_differences(self, index):
        rng = np.random.default_rng(100 + index)
        net, X, y = random_config(rng, index)
        assert max_relative_error(net, X, y) < 1e-5

    def test_softmax_gradient(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal((4, 3))
        y = np.array([0, 2, 1, 1])
        _, g = softmax_cross_entropy(z, y)
        h = 1e-6
        num = np.zeros_like(z)
        for idx in np.ndindex(z.shape):
            zp, zm = z.copy(), z.copy()
            zp[idx] += h
            zm[idx] -= h
            num[idx] = (softmax_cross_entropy(zp, y)[0] - softmax_cross_entropy(zm, y)[0]) / (2 * h)
        np.testing.assert_allclose(g, num, atol=1e-8)

    def test_quantized_forward_matches_network(self):
        rng = np.random.default_rng(5)
        net = init_network([3, 6, 2], T=5, seed=1)
        x = rng.standard_normal((7, 3))
        logits, _ = forward_with_tape(x, net)
        np.testing.assert_array_equal(logits, network_forward(x, net)[0])

    def test_gradient_shape_check(self):
        net = init_network([2, 3, 2])
        _, tape = forward_with_tape(np.zeros((4, 2)), net)
        with pytest.raises(ShapeError):
            backward(np.zeros((3, 2)), tape, net)


class TestInit:
    def test_thresholds_and_scales(self):
        net = init_network([4, 8, 8, 3], T=6, seed=0)
        np.testing.assert_allclose(net.layers[0].theta_out, 6 / 64)
        np.testing.assert_allclose(net.layers[1].input_scale, 6 / 64)
        np.testing.assert_allclose(net.layers[2].theta_out, 1.0)
        assert float(net.layers[0].input_scale) == 1.0


class TestToyTraining:
    def test_blobs_reach_99_percent(self):
        X, y = make_blobs(1000, seed=0)
        # oracle: the set is linearly separable up to a handful of points
        assert LogisticRegression().fit(X, y).score(X, y) >= 0.99
        net = init_network([2, 2], T=8, seed=0)
        _, curve = train_toy(net, X, y, lr=0.1, epochs=100)
        assert max(r.accuracy for r in curve) >= 0.99
        assert curve[-1].accuracy >= 0.99

    def test_loss_decreases_across_seeds(self):
        X, y = make_blobs(400, seed=11)
        decreased = 0
        for seed in range(20):
            net = init_network([2, 8, 2], T=6, seed=seed)
            _, curve = train_toy(net, X, y, lr=0.05, epochs=10, seed=seed)
            decreased += curve[-1].loss < curve[0].loss
        assert decreased >= 19

    def test_input_network_untouched(self):
        X, y = make_blobs(100, seed=0)
        net = init_network([2, 2], seed=0)
        before = net.layers[0].weights.copy()
        train_toy(net, X, y, epochs=2)
        np.testing.assert_array_equal(net.layers[0].weights, before)

    def test_divergence_raises(self):
        X, y = make_blobs(100, seed=0)
        X = X * 1e300
        with pytest.raises(TrainingDivergedError):
            with np.errstate(all="ignore"):
                train_toy(init_network([2, 2], seed=0), X, y, lr=1e300, epochs=3)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            train_toy(init_network([2, 2]), np.zeros((3, 2)), np.zeros(4, dtype=int))
