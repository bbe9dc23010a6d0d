import numpy as np
import pytest

from spikepack import container
from spikepack.converter import AnnLayer, AnnSpec
from spikepack.errors import ContainerError
from spikepack.network import LayerSpec, NetworkSpec


def snn():
    rng = np.random.default_rng(0)
    return NetworkSpec([
        LayerSpec("conv2d", rng.standard_normal((3, 1, 3, 3)), rng.standard_normal(3), [0.1, 0.2, 0.3], 1, 1),
        LayerSpec("dense", rng.standard_normal((2, 3 * 4 * 4)), None, 1.0, input_scale=[0.1, 0.2, 0.3]),
    ], T=6, tau=2.0, comparator="strictly-greater")


def f32(a):
    return np.asarray(a, dtype=np.float32).astype(np.float64)


class TestRoundTrip:
    def test_network(self, tmp_path):
        net = snn()
        container.save(tmp_path / "m.spkn", net)
        back = container.load(tmp_path / "m.spkn")
        assert isinstance(back, NetworkSpec)
        assert (back.T, back.tau, back.comparator, back.rounding) == (6, 2.0, "strictly-greater", "greedy-floor")
        for a, b in zip(net.layers, back.layers):
            assert (a.kind, a.stride, a.padding) == (b.kind, b.stride, b.padding)
            np.testing.assert_array_equal(b.weights, f32(a.weights))
            np.testing.assert_array_equal(b.theta_out, f32(a.theta_out))
            np.testing.assert_array_equal(b.input_scale, f32(a.input_scale))

    def test_ann(self):
        ann = AnnSpec([
            AnnLayer("conv2d", np.ones((2, 1, 3, 3)), np.zeros(2), padding=1),
            AnnLayer("batchnorm", gamma=np.ones(2), beta=np.zeros(2), mean=np.zeros(2), var=np.ones(2),
                     activation="relu", eps=1e-3),
            AnnLayer("avgpool", kernel=2),
            AnnLayer("dense", np.ones((3, 8)), np.zeros(3)),
        ])
        back = container.loads(container.dumps_ann(ann))
        assert isinstance(back, AnnSpec)
        assert [l.kind for l in back.layers] == ["conv2d", "batchnorm", "avgpool", "dense"]
        assert back.layers[1].activation == "relu"
        assert back.layers[1].eps == pytest.approx(1e-3)
        x = np.random.default_rng(0).standard_normal((2, 1, 4, 4))
        np.testing.assert_allclose(back.forward(x), ann.forward(x), rtol=1e-6)

    def test_deterministic_bytes(self):
        assert container.dumps_network(snn()) == container.dumps_network(snn())


class TestCorruption:
    def test_bad_magic(self):
        buf = bytearray(container.dumps_network(snn()))
        buf[0:4] = b"XXXX"
        with pytest.raises(ContainerError):
            container.loads(bytes(buf))

    def test_truncated(self):
        buf = container.dumps_network(snn())
        for cut in (3, 20, len(buf) - 1):
            with pytest.raises(ContainerError):
                container.loads(buf[:cut])

    def test_trailing_bytes(self):
        with pytest.raises(ContainerError):
            container.loads(container.dumps_network(snn()) + b"\0")

    def test_bad_version(self):
        buf = bytearray(container.dumps_network(snn()))
        buf[4] = 9
        with pytest.raises(ContainerError):
            container.loads(bytes(buf))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ContainerError):
            container.load(tmp_path / "nope.spkn")
