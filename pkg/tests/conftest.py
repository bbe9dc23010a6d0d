from dataclasses import dataclass

import numpy as np
import pytest

from spikepack.converter import AnnSpec, calibrate, calibration_split, convert
from spikepack.datasets import make_toy_3class, train_ann
from spikepack.network import NetworkSpec

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@dataclass
class ToyPipeline:
    X: np.ndarray
    y: np.ndarray
    Xt: np.ndarray
    yt: np.ndarray
    ann: AnnSpec
    net: NetworkSpec


@pytest.fixture(scope="session")
def toy_pipeline() -> ToyPipeline:
    X, y = make_toy_3class(6000, 0)
    Xt, yt = make_toy_3class(3000, 1)
    ann = train_ann(X, y, seed=0)
    report = calibrate(ann, X[calibration_split(len(X))], T=8)
    return ToyPipeline(X, y, Xt, yt, ann, convert(ann, report))
