"""Synthetic toy tasks, dataset files and the float ANN used as conversion source.

CSV files hold one sample per row: ``label, feature_0, feature_1, ...``.
Raw image sets are a flat little-endian ``float32`` file plus a JSON sidecar
``<file>.json`` with ``{"shape": [n, c, h, w], "labels": [...]}``.
"""
from __future__ import annotations

import csv
import json
import warnings
from pathlib import Path

import numpy as np

from .converter import AnnLayer, AnnSpec
from .errors import ContainerError, ShapeError


def make_toy_3class(n: int, seed: int = 0, margin: float = 0.04) -> tuple[np.ndarray, np.ndarray]:
    """2-D three-class task: label = (angular sector + inner/outer ring) mod 3.

    Points closer than ``margin`` to a class boundary are rejected, so a small
    MLP separates the classes almost perfectly while a linear model cannot.
    """
    rng = np.random.default_rng(seed)
    xs, ys, have = [], [], 0
    third = 2 * np.pi / 3
    while have < n:
        p = rng.uniform(-1.0, 1.0, size=(2 * n, 2))
        r = np.hypot(p[:, 0], p[:, 1])
        a = np.mod(np.arctan2(p[:, 1], p[:, 0]), 2 * np.pi)
        sector = np.floor(a / third).astype(np.int64)
        ring = (r > 0.55).astype(np.int64)
        edge = np.minimum(np.mod(a, third), third - np.mod(a, third)) * r
        keep = (r < 1.0) & (np.abs(r - 0.55) > margin) & (edge > margin)
        xs.append(p[keep])
        ys.append(((sector + ring) % 3)[keep])
        have += int(keep.sum())
    return np.concatenate(xs)[:n], np.concatenate(ys)[:n]


def make_blobs(n: int, seed: int = 0, separation: float = 6.0, dim: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Two isotropic unit Gaussians whose means are ``separation`` apart."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n)
    centers = np.zeros((2, dim))
    centers[0, 0], centers[1, 0] = -separation / 2, separation / 2
    return centers[y] + rng.standard_normal((n, dim)), y


def save_csv(path, X: np.ndarray, y: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for label, row in zip(y, X.reshape(len(X), -1)):
            w.writerow([int(label), *(repr(float(v)) for v in row)])


def load_csv(path) -> tuple[np.ndarray, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ContainerError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ContainerError(f"{path} holds no samples")
    try:
        y = np.array([int(float(r[0])) for r in rows], dtype=np.int64)
        X = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise ContainerError(f"{path} is not a label,features CSV: {exc}") from exc
    return X, y


def load_raw_images(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    try:
        meta = json.loads(Path(str(path) + ".json").read_text())
        data = np.fromfile(path, dtype="<f4").astype(np.float64)
    except (OSError, ValueError) as exc:
        raise ContainerError(f"cannot read raw image set {path}: {exc}") from exc
    shape = tuple(meta["shape"])
    if data.size != int(np.prod(shape)):
        raise ContainerError(f"{path}: {data.size} values do not fill shape {shape}")
    y = np.asarray(meta["labels"], dtype=np.int64)
    if len(y) != shape[0]:
        raise ShapeError("label count does not match the number of images")
    return data.reshape(shape), y


def save_raw_images(path, X: np.ndarray, y: np.ndarray) -> None:
    path = Path(path)
    np.ascontiguousarray(X, dtype="<f4").tofile(path)
    Path(str(path) + ".json").write_text(json.dumps({"shape": list(X.shape), "labels": [int(v) for v in y]}))


def load_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    if str(path).endswith(".csv"):
        return load_csv(path)
    return load_raw_images(path)


def train_ann(X: np.ndarray, y: np.ndarray, hidden=(64, 64), seed: int = 0, max_iter: int = 300) -> AnnSpec:
    """Fit a ReLU MLP with scikit-learn and export it as an :class:`AnnSpec`."""
    from sklearn.exceptions import ConvergenceWarning
    from sklearn.neural_network import MLPClassifier

    clf = MLPClassifier(hidden_layer_sizes=tuple(hidden), activation="relu", max_iter=max_iter,
                        random_state=seed, tol=1e-6, n_iter_no_change=30)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        clf.fit(X, y)
    layers = []
    coefs, intercepts = clf.coefs_, clf.intercepts_
    for i, (w, b) in enumerate(zip(coefs, intercepts)):
        last = i == len(coefs) - 1
        if last and w.shape[1] == 1:
            # binary sklearn models emit one logit; expand to two readout channels
            w = np.concatenate([-w, w], axis=1) / 2
            b = np.concatenate([-b, b]) / 2
        layers.append(AnnLayer("dense", w.T.copy(), b.copy(), "none" if last else "relu"))
    return AnnSpec(layers)


def accuracy(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.asarray(pred) == np.asarray(y)))
