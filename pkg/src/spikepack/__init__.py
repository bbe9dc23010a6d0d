"""SpikePack neurons: one-shot spike generation from a global membrane potential."""
from .errors import ContainerError, DomainError, ShapeError, SpikePackError, TrainingDivergedError
from .network import LayerSpec, NetworkSpec, lif_network_forward, network_forward, predict
from .neurons import (
    LifState,
    NeuronConfig,
    lif_run,
    lif_step,
    spikepack_decode_serial,
    spikepack_quantize_parallel,
)
from .spike_tensor import PackedSpikes, SpikeMatrix, evaluate, pack, unpack

__all__ = [
    "ContainerError", "DomainError", "ShapeError", "SpikePackError", "TrainingDivergedError",
    "LayerSpec", "NetworkSpec", "lif_network_forward", "network_forward", "predict",
    "LifState", "NeuronConfig", "lif_run", "lif_step", "spikepack_decode_serial", "spikepack_quantize_parallel",
    "PackedSpikes", "SpikeMatrix", "evaluate", "pack", "unpack",
]
