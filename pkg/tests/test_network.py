import numpy as np
import pytest

from spikepack.errors import DomainError, ShapeError
from spikepack.network import (
    LayerSpec,
    NetworkSpec,
    conv2d,
    lif_network_forward,
    network_forward,
    predict,
)
from spikepack.spike_tensor import SpikeMatrix


def conv_oracle(x, w, stride, padding):
    B, C, H, W = x.shape
    O, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (H + 2 * padding - kh) // stride + 1
    ow = (W + 2 * padding - kw) // stride + 1
    out = np.zeros((B, O, oh, ow))
    for b in range(B):
        for o in range(O):
            for i in range(oh):
                for j in range(ow):
                    patch = xp[b, :, i * stride:i * stride + kh, j * stride:j * stride + kw]
                    out[b, o, i, j] = np.sum(patch * w[o])
    return out


def small_net(rng, T=6, sizes=(3, 5, 4, 2)):
    layers, prev = [], 1.0
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        theta = rng.uniform(0.05, 0.2, b) if i < len(sizes) - 2 else 1.0
        layers.append(LayerSpec("dense", rng.standard_normal((b, a)), rng.standard_normal(b), theta,
                                input_scale=prev))
        prev = theta
    return NetworkSpec(layers, T=T)


class TestConv:
    @pytest.mark.parametrize("stride, padding", [(1, 0), (1, 1), (2, 0), (2, 1), (3, 2)])
    def test_matches_loops(self, stride, padding):
        rng = np.random.default_rng(stride * 10 + padding)
        x = rng.standard_normal((2, 3, 7, 6))
        w = rng.standard_normal((4, 3, 3, 2))
        np.testing.assert_allclose(conv2d(x, w, stride, padding), conv_oracle(x, w, stride, padding),
                                   rtol=1e-12, atol=1e-12)


class TestForward:
    def test_dense_matches_manual(self):
        rng = np.random.default_rng(0)
        net = small_net(rng)
        x = rng.standard_normal((10, 3))
        act = x
        for i, layer in enumerate(net.layers):
            v = (layer.input_scale * act) @ layer.weights.T + layer.bias
            if i == len(net.layers) - 1:
                expected = v
                break
            act = np.clip(np.floor(v / layer.theta_out), 0, 2**net.T - 1)
        logits, trace = network_forward(x, net)
        np.testing.assert_allclose(logits, expected, rtol=1e-12)
        assert len(trace.layers) == 2
        assert all(0.0 <= fr <= 1.0 for fr in trace.firing_rates)

    def test_relaxed_is_affine_chain(self):
        rng = np.random.default_rng(1)
        net = small_net(rng)
        x = rng.standard_normal((4, 3))
        act = x
        for layer in net.layers[:-1]:
            act = ((layer.input_scale * act) @ layer.weights.T + layer.bias) / layer.theta_out
        last = net.layers[-1]
        expected = (last.input_scale * act) @ last.weights.T + last.bias
        logits, _ = network_forward(x, net, mode="relaxed")
        np.testing.assert_allclose(logits, expected, rtol=1e-10)

    def test_fine_quantization_approaches_relaxed_clamp(self):
        rng = np.random.default_rng(2)
        net = small_net(rng, T=8)
        x = rng.standard_normal((20, 3))
        fine = NetworkSpec([LayerSpec(l.kind, l.weights, l.bias, l.theta_out / 256 if i < 2 else 1.0,
                                      input_scale=l.input_scale / 256 if i else 1.0)
                            for i, l in enumerate(net.layers)], T=16)
        a, _ = network_forward(x, fine)
        b, _ = network_forward(x, fine, mode="relaxed-clamp")
        np.testing.assert_allclose(a, b, atol=0.05)

    def test_conv_network_runs(self):
        rng = np.random.default_rng(3)
        conv = LayerSpec("conv2d", rng.standard_normal((4, 1, 3, 3)), None, 0.1, stride=1, padding=1)
        dense = LayerSpec("dense", rng.standard_normal((3, 4 * 5 * 5)), None, 1.0, input_scale=0.1)
        net = NetworkSpec([conv, dense], T=4)
        logits, trace = network_forward(rng.standard_normal((2, 1, 5, 5)), net)
        assert logits.shape == (2, 3)
        assert trace.layers[0].packed.shape == (2, 4, 5, 5)
        assert predict(rng.standard_normal((2, 1, 5, 5)), net).shape == (2,)

    def test_lif_trace(self):
        rng = np.random.default_rng(4)
        net = small_net(rng)
        logits, trace = lif_network_forward(rng.standard_normal((5, 3)), net, T=12)
        assert logits.shape == (5, 2)
        assert isinstance(trace.layers[0].spikes, SpikeMatrix)
        assert trace.layers[0].spikes.T == 12
        with pytest.raises(DomainError):
            lif_network_forward(np.zeros((1, 3)), net, T=4, tau=0.5)


class TestSpecValidation:
    def test_conv_after_dense(self):
        d = LayerSpec("dense", np.ones((4, 2)))
        c = LayerSpec("conv2d", np.ones((2, 4, 1, 1)))
        with pytest.raises(ShapeError):
            NetworkSpec([d, c])

    def test_dense_width_mismatch(self):
        with pytest.raises(ShapeError):
            NetworkSpec([LayerSpec("dense", np.ones((4, 2))), LayerSpec("dense", np.ones((2, 3)))])

    @pytest.mark.parametrize("kwargs", [{"theta_out": 0.0}, {"weights": np.full((2, 2), np.nan)},
                                        {"stride": 0}, {"bias": np.ones(3)}])
    def test_layer_errors(self, kwargs):
        args = {"kind": "dense", "weights": np.ones((2, 2))} | kwargs
        with pytest.raises((DomainError, ShapeError)):
            LayerSpec(**args)

    def test_counts(self):
        conv = LayerSpec("conv2d", np.ones((8, 3, 3, 3)), stride=1, padding=1)
        assert conv.macs((3, 10, 10)) == 8 * 3 * 9 * 100
        assert conv.fan_out() == 72
        assert LayerSpec("dense", np.ones((5, 7))).fan_out() == 5
