"""``spikepack`` command line: one subcommand per experiment.

Every run resolves its parameters as built-in defaults, then the optional
``--config`` file, then explicit flags. The config file is INI: a
``[global]`` section (``seed``, ``out``, ``format``) plus one section per
subcommand whose keys are the long flag names with ``_`` for ``-``::

    [global]
    seed = 3
    out = runs/a

    [mi]
    n_values = 4,8,16
    samples = 200000

The resolved parameters are echoed to ``<out>/<command>.runconfig.ini``;
passing that file back with ``--config`` reproduces the run.
The output directory defaults to ``$SPIKEPACK_OUT`` or ``spikepack-out``.

Exit codes: 0 success, 1 property violation, 2 usage error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import container
from .converter import AnnSpec, calibrate, calibration_split, convert, retime
from .datasets import load_dataset, make_blobs, make_toy_3class, train_ann
from .equivalence import roundtrip_suite, serial_parallel_suite
from .errors import ContainerError, DomainError, ShapeError, TrainingDivergedError
from .info_metrics import MiExperimentConfig, analytic_mi_lif_bound, analytic_mi_spikepack, monte_carlo_mi, sop
from .network import NetworkSpec, lif_network_forward, network_forward
from .neurons import NeuronConfig
from .neurosim import SimConfig, hidden_traces, simulate_traces
from .spike_tensor import read_stream, write_stream
from .training import init_network, train_toy

log = logging.getLogger("spikepack")

EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
ENV_OUT = "SPIKEPACK_OUT"
DEFAULT_OUT = "spikepack-out"


class UsageError(Exception):
    pass


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _path(text) -> str:
    return str(text)


@dataclass(frozen=True)
class Param:
    name: str
    kind: Callable[[str], Any]
    default: Any
    help: str
    choices: tuple | None = None


GLOBAL_PARAMS = [
    Param("seed", int, 0, "seed for every random draw"),
    Param("out", _path, None, f"output directory (default ${ENV_OUT} or {DEFAULT_OUT})"),
    Param("format", str, "csv", "tabular report format", ("csv", "json")),
]

PARAMS: dict[str, list[Param]] = {
    "equiv": [
        Param("cases", int, 100_000, "randomized serial/parallel cases"),
        Param("tau_values", _floats, (1.5, 2.0, 3.0), "comma-separated time constants"),
        Param("tau", float, None, "single time constant (overrides tau_values)"),
        Param("t_max", int, 16, "largest T in the randomized suite"),
        Param("comparator", str, "at-least", "firing comparator", ("at-least", "strictly-greater")),
        Param("roundtrip_t_max", int, 8, "largest T of the round-trip suite"),
        Param("exhaustive_roundtrip", _bool, False, "round-trip every T up to 12 at several thresholds"),
    ],
    "mi": [
        Param("n_values", _ints, (16,), "comma-separated fan-in values"),
        Param("t_values", _ints, (16,), "comma-separated time-step values"),
        Param("p", float, 0.5, "input spike probability"),
        Param("sigma2", float, 1.0, "weight variance"),
        Param("tau", float, 2.0, "time constant"),
        Param("samples", int, 1_000_000, "Monte-Carlo samples per grid point"),
        Param("lif_theta_ratio", float, 0.5, "LIF threshold in units of the per-step current std"),
        Param("tolerance", float, 0.01, "largest acceptable standard error (bits)"),
    ],
    "train": [
        Param("task", str, "blobs", "synthetic task", ("blobs", "toy3")),
        Param("samples", int, 1000, "training samples"),
        Param("hidden", _ints, (), "comma-separated hidden widths (empty: single layer)"),
        Param("T", int, 8, "time steps"),
        Param("tau", float, 2.0, "time constant"),
        Param("lr", float, 0.1, "learning rate"),
        Param("epochs", int, 100, "epochs"),
        Param("batch", int, 64, "minibatch size"),
    ],
    "convert": [
        Param("ann", _path, None, "ANN container (default: train the toy MLP)"),
        Param("data", _path, None, "training/calibration data (default: toy task)"),
        Param("samples", int, 6000, "toy-task samples when no data file is given"),
        Param("T", int, 8, "time steps"),
        Param("tau", float, 2.0, "time constant"),
        Param("percentile", float, 99.9, "calibration percentile"),
        Param("calib_fraction", float, 0.1, "fraction of the data used for calibration"),
        Param("shuffle", _bool, False, "shuffle before taking the calibration slice"),
    ],
    "infer": [
        Param("model", _path, None, "SNN container (default: <out>/model.spkn)"),
        Param("ann", _path, None, "ANN container to report alongside (default: <out>/ann.spkn if present)"),
        Param("data", _path, None, "evaluation data (default: held-out toy task)"),
        Param("samples", int, 3000, "toy-task samples when no data file is given"),
        Param("t_values", _ints, (1, 2, 4, 6, 8), "comma-separated T values"),
        Param("lif_steps", _ints, (), "comma-separated LIF windows to report"),
        Param("dump_trace", int, 0, "write hidden spike traces of this many samples"),
    ],
    "simulate": [
        Param("model", _path, None, "SNN container (default: <out>/model.spkn)"),
        Param("trace", _path, None, "spike stream written by infer --dump-trace"),
        Param("data", _path, None, "input data (default: held-out toy task)"),
        Param("samples", int, 256, "toy-task samples when no data or trace is given"),
        Param("kind", str, "both", "neuron model", ("spikepack", "lif", "both")),
        Param("lif_steps", int, 16, "LIF window"),
        Param("num_pes", int, SimConfig.num_pes, "processing elements"),
        Param("neuron_units", int, SimConfig.neuron_units, "neuron update units"),
        Param("detector_width", int, SimConfig.detector_width, "spike detector inputs"),
        Param("clock_hz", float, SimConfig.clock_hz, "clock frequency"),
        Param("energy_per_mac", float, SimConfig.energy_per_mac, "J per accumulate"),
        Param("energy_per_neuron_update", float, SimConfig.energy_per_neuron_update, "J per neuron update"),
        Param("energy_per_encode", float, SimConfig.energy_per_encode, "J per emitted address"),
        Param("pipeline_fill_cycles", int, SimConfig.pipeline_fill_cycles, "fill cycles per layer"),
    ],
    "report": [
        Param("input", _path, None, "directory of reports to aggregate (default: out)"),
    ],
}


# ---------------------------------------------------------------- config plumbing


def _add_params(p: argparse.ArgumentParser, params: list[Param]) -> None:
    for prm in params:
        flag = "--" + prm.name.replace("_", "-")
        if prm.kind is _bool:
            p.add_argument(flag, dest=prm.name, action="store_const", const=True, default=None, help=prm.help)
        else:
            p.add_argument(flag, dest=prm.name, default=None, choices=prm.choices, help=prm.help)


def _common(suppress: bool) -> argparse.ArgumentParser:
    # subcommand copies must not reset globals given before the subcommand name
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS if suppress else None)
    common.add_argument("--config", help="INI config file")
    common.add_argument("-v", "--verbose", action="store_true")
    for prm in GLOBAL_PARAMS:
        common.add_argument("--" + prm.name, dest=prm.name, choices=prm.choices, help=prm.help)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spikepack", description="SpikePack neuron experiments",
                                     parents=[_common(False)])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, params in PARAMS.items():
        sp = sub.add_parser(name, parents=[_common(True)], help=f"run the {name} experiment")
        _add_params(sp, params)
    return parser


def _convert_value(prm: Param, raw) -> Any:
    if isinstance(raw, bool):
        return raw
    if raw == "" and prm.default is None:
        return None
    try:
        value = prm.kind(raw)
    except ValueError as exc:
        raise UsageError(f"--{prm.name.replace('_', '-')}: {exc}") from exc
    if prm.choices and value not in prm.choices:
        raise UsageError(f"--{prm.name.replace('_', '-')} must be one of {', '.join(prm.choices)}")
    return value


def resolve(args: argparse.Namespace) -> tuple[dict, dict]:
    """Merge defaults, config file and flags into (global, command) settings."""
    file = configparser.ConfigParser()
    file.optionxform = str  # keys such as T are case-sensitive
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file.read_file(fh)
        except OSError as exc:
            raise ContainerError(f"cannot read config {args.config}: {exc}") from exc
        except configparser.Error as exc:
            raise UsageError(f"bad config file: {exc}") from exc

    def merge(section: str, params: list[Param]) -> dict:
        known = {p.name for p in params}
        if file.has_section(section):
            unknown = set(file[section]) - known
            if unknown:
                raise UsageError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
        out = {}
        for prm in params:
            raw = getattr(args, prm.name, None)
            if raw is None and file.has_option(section, prm.name):
                raw = file.get(section, prm.name)
            out[prm.name] = prm.default if raw is None else _convert_value(prm, raw)
        return out

    g = merge("global", GLOBAL_PARAMS)
    if g["out"] is None:
        g["out"] = os.environ.get(ENV_OUT) or DEFAULT_OUT
    return g, merge(args.command, PARAMS[args.command])


def _ini_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, tuple):
        return ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v).lower() if isinstance(v, bool) else str(v)


def echo_config(out: Path, command: str, g: dict, c: dict) -> None:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["global"] = {k: _ini_value(v) for k, v in g.items()}
    cp[command] = {k: _ini_value(v) for k, v in c.items()}
    buf = io.StringIO()
    cp.write(buf)
    (out / f"{command}.runconfig.ini").write_text(buf.getvalue())


def _fmt(v) -> Any:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_table(out: Path, name: str, rows: list[dict], fmt: str, columns: list[str] | None = None) -> Path:
    columns = columns or (list(rows[0]) if rows else [])
    if fmt == "json":
        path = out / f"{name}.json"
        body = [{k: (float(r[k]) if isinstance(r[k], (float, np.floating)) else _fmt(r[k])) for k in columns}
                for r in rows]
        path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
        return path
    path = out / f"{name}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in columns])
    return path


def print_table(rows: list[dict], columns: list[str], stream=None) -> None:
    stream = stream or sys.stdout
    cells = [[f"{r[c]:.6g}" if isinstance(r[c], (float, np.floating)) else str(r[c]) for c in columns]
             for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    print("  ".join(c.rjust(w) for c, w in zip(columns, widths)), file=stream)
    for row in cells:
        print("  ".join(v.rjust(w) for v, w in zip(row, widths)), file=stream)


# ------------------------------------------------------------------- data helpers


def _toy_data(samples: int, seed: int, split: str):
    # the held-out split uses the next seed so train and test never overlap
    return make_toy_3class(samples, seed + (1 if split == "test" else 0))


def _load_snn(path) -> NetworkSpec:
    obj = container.load(path)
    if not isinstance(obj, NetworkSpec):
        raise ContainerError(f"{path} holds an ANN, expected a converted network")
    return obj


def _load_ann(path) -> AnnSpec:
    obj = container.load(path)
    if not isinstance(obj, AnnSpec):
        raise ContainerError(f"{path} holds a converted network, expected an ANN")
    return obj


def _in_shapes(net: NetworkSpec, in_shape) -> list[tuple[int, ...]]:
    shapes, shape = [], tuple(in_shape)
    for layer in net.layers:
        shapes.append(shape)
        if layer.kind == "dense":
            shape = (layer.out_channels,)
        else:
            kh, kw = layer.weights.shape[2:]
            shape = (layer.out_channels, (shape[1] + 2 * layer.padding - kh) // layer.stride + 1,
                     (shape[2] + 2 * layer.padding - kw) // layer.stride + 1)
    return shapes


def _flops(net: NetworkSpec, in_shape) -> list[int]:
    return [layer.macs(s) for layer, s in zip(net.layers, _in_shapes(net, in_shape))]


# ----------------------------------------------------------------- subcommands


def cmd_equiv(g: dict, c: dict, out: Path) -> int:
    taus = (c["tau"],) if c["tau"] is not None else c["tau_values"]
    for tau in taus:
        NeuronConfig(tau=tau, comparator=c["comparator"])
    if c["cases"] < 1 or not 1 <= c["t_max"] <= 64:
        raise UsageError("cases must be >= 1 and t_max in [1, 64]")
    sp = serial_parallel_suite(c["cases"], taus, c["t_max"], g["seed"], c["comparator"])
    if c["exhaustive_roundtrip"]:
        rng = np.random.default_rng(g["seed"])
        thetas = (1.0, 0.1, 0.37, 3.3, float(np.exp(rng.uniform(-5, 5))))
        rt = roundtrip_suite(12, thetas, c["comparator"])
    else:
        rt = roundtrip_suite(c["roundtrip_t_max"], (1.0,), c["comparator"])
    rows = [{"suite": r.suite, "comparator": c["comparator"], "cases": r.cases, "mismatches": r.mismatches}
            for r in (sp, rt)]
    write_table(out, "equiv", rows, g["format"])
    ce = [vars(x) for x in sp.counterexamples + rt.counterexamples]
    write_table(out, "equiv_counterexamples", ce, g["format"],
                ["suite", "tau", "T", "theta", "v_g", "got", "expected"])
    for r in (sp, rt):
        print(f"{r.suite}: {r.mismatches} mismatches / {r.cases} cases")
    for x in ce[:10]:
        print(f"  counterexample tau={x['tau']} T={x['T']} theta={x['theta']!r} v_g={x['v_g']!r}: "
              f"got {x['got']}, expected {x['expected']}")
    return EXIT_PROPERTY if sp.mismatches or rt.mismatches else EXIT_OK


def cmd_mi(g: dict, c: dict, out: Path) -> int:
    rows = []
    for N in c["n_values"]:
        for T in c["t_values"]:
            cfg = MiExperimentConfig(N=N, T=T, p=c["p"], sigma2=c["sigma2"], tau=c["tau"], samples=c["samples"],
                                     seed=g["seed"], lif_theta_ratio=c["lif_theta_ratio"])
            a = monte_carlo_mi(cfg, "spikepack", tolerance=c["tolerance"])
            b = monte_carlo_mi(cfg, "lif", tolerance=c["tolerance"])
            rows.append({
                "table": "mi", "N": N, "T": T, "analytic_spikepack": analytic_mi_spikepack(cfg),
                "bound_lif": analytic_mi_lif_bound(cfg), "mc_spikepack": float(a.bits),
                "mc_spikepack_se": a.stderr, "mc_lif": float(b.bits), "mc_lif_se": b.stderr,
                "samples": cfg.samples, "flagged": int(a.flagged or b.flagged),
            })
    cols = list(rows[0])
    write_table(out, "mi", rows, g["format"], cols)
    print_table(rows, cols[1:])
    ok = all(r["mc_spikepack"] > r["mc_lif"] for r in rows)
    if not ok:
        print("ordering violated: SpikePack MI does not exceed LIF MI everywhere", file=sys.stderr)
    return EXIT_OK if ok else EXIT_PROPERTY


def cmd_train(g: dict, c: dict, out: Path) -> int:
    if c["task"] == "blobs":
        X, y = make_blobs(c["samples"], g["seed"])
        classes = 2
    else:
        X, y = make_toy_3class(c["samples"], g["seed"])
        classes = 3
    sizes = [X.shape[1], *c["hidden"], classes]
    net = init_network(sizes, T=c["T"], tau=c["tau"], seed=g["seed"])
    net, curve = train_toy(net, X, y, lr=c["lr"], epochs=c["epochs"], batch=c["batch"], seed=g["seed"])
    rows = [{"table": "training", "epoch": r.epoch, "loss": r.loss, "accuracy": r.accuracy} for r in curve]
    write_table(out, "train", rows, g["format"])
    container.save(out / "trained.spkn", net)
    print(f"epoch {curve[-1].epoch}: loss {curve[-1].loss:.4f}, train accuracy {curve[-1].accuracy:.4f}")
    return EXIT_OK


def cmd_convert(g: dict, c: dict, out: Path) -> int:
    if c["data"]:
        X, y = load_dataset(c["data"])
    else:
        X, y = _toy_data(c["samples"], g["seed"], "train")
    if c["ann"]:
        ann = _load_ann(c["ann"])
    else:
        ann = train_ann(X, y, seed=g["seed"])
        container.save(out / "ann.spkn", ann)
    idx = calibration_split(len(X), c["calib_fraction"], g["seed"] if c["shuffle"] else None)
    report = calibrate(ann, X[idx], c["T"], c["tau"], c["percentile"])
    net = convert(ann, report)
    container.save(out / "model.spkn", net)
    (out / "calibration.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    rows = [{"table": "calibration", "layer": l.index, "channel": i, "theta": ch.theta,
             "percentile_value": ch.percentile_value, "act_max": ch.act_max,
             "overflow_fraction": ch.overflow_fraction, "dead": int(ch.dead)}
            for l in report.layers for i, ch in enumerate(l.channels)]
    write_table(out, "convert", rows, g["format"])
    print(f"converted {len(net.layers)} layers at T={net.T}; {len(report.dead_channels)} dead channel(s); "
          f"ANN train accuracy {float(np.mean(ann.predict(X) == y)):.4f}")
    return EXIT_OK


def cmd_infer(g: dict, c: dict, out: Path) -> int:
    net = _load_snn(c["model"] or out / "model.spkn")
    ann_path = c["ann"] or (out / "ann.spkn" if (out / "ann.spkn").exists() else None)
    ann = _load_ann(ann_path) if ann_path else None
    if c["data"]:
        X, y = load_dataset(c["data"])
    else:
        X, y = _toy_data(c["samples"], g["seed"], "test")
    flops = _flops(net, X.shape[1:])
    rows = []
    if ann is not None:
        rows.append({"table": "accuracy", "model": "ann", "T": 0, "accuracy": float(np.mean(ann.predict(X) == y)),
                     "firing_rate": 0.0, "sop": float(sum(flops))})
    for T in c["t_values"]:
        run = retime(net, T)
        logits, tr = network_forward(X, run)
        rates = tr.firing_rates
        rows.append({"table": "accuracy", "model": "spikepack", "T": T,
                     "accuracy": float(np.mean(np.argmax(logits, -1) == y)),
                     "firing_rate": float(np.mean(rates)) if rates else 0.0,
                     "sop": float(sum(sop(fr, f, T) for fr, f in zip(rates, flops[1:])) + flops[0])})
    for steps in c["lif_steps"]:
        logits, tr = lif_network_forward(X, net, steps)
        rates = tr.firing_rates
        rows.append({"table": "accuracy", "model": "lif", "T": steps,
                     "accuracy": float(np.mean(np.argmax(logits, -1) == y)),
                     "firing_rate": float(np.mean(rates)) if rates else 0.0,
                     "sop": float(sum(sop(fr, f, steps) for fr, f in zip(rates, flops[1:])) + flops[0])})
    cols = list(rows[0])
    write_table(out, "infer", rows, g["format"], cols)
    print_table(rows, cols[1:])
    if c["dump_trace"]:
        _, tr = network_forward(X[: c["dump_trace"]], net)
        with open(out / "trace.spk", "wb") as fh:
            write_stream(fh, [l.packed for l in tr.layers])
        np.save(out / "trace_input.npy", X[: c["dump_trace"]])
    return EXIT_OK


def cmd_simulate(g: dict, c: dict, out: Path) -> int:
    net = _load_snn(c["model"] or out / "model.spkn")
    cfg = SimConfig(*(c[k] for k in ("num_pes", "neuron_units", "detector_width", "clock_hz", "energy_per_mac",
                                     "energy_per_neuron_update", "energy_per_encode", "pipeline_fill_cycles")))
    kinds = ("spikepack", "lif") if c["kind"] == "both" else (c["kind"],)
    traces = {}
    if c["trace"]:
        if "lif" in kinds:
            raise UsageError("a recorded trace holds SpikePack spikes; use --kind spikepack")
        try:
            with open(c["trace"], "rb") as fh:
                hidden = list(read_stream(fh))
        except OSError as exc:
            raise ContainerError(f"cannot read trace {c['trace']}: {exc}") from exc
        side = Path(c["trace"]).with_name("trace_input.npy")
        if c["data"]:
            X, _ = load_dataset(c["data"])
            X = X[: hidden[0].N // int(np.prod(_in_shapes(net, X.shape[1:])[1]))] if hidden else X
        elif side.exists():
            X = np.load(side)
        else:
            raise UsageError("the trace needs its input batch (trace_input.npy next to it, or --data)")
        # stream records are flat; restore (batch, *layer input shape)
        shapes = _in_shapes(net, X.shape[1:])[1:]
        if len(hidden) != len(shapes):
            raise ContainerError(f"trace holds {len(hidden)} records, network has {len(shapes)} hidden layers")
        try:
            hidden = [h.reshape(X.shape[0], *s) for h, s in zip(hidden, shapes)]
        except ValueError as exc:
            raise ContainerError(f"trace does not match the network and input batch: {exc}") from exc
        traces["spikepack"] = simulate_traces(net, X, hidden, cfg, "spikepack")
    else:
        X = load_dataset(c["data"])[0] if c["data"] else _toy_data(c["samples"], g["seed"], "test")[0]
        for kind in kinds:
            hidden = hidden_traces(net, X, kind, c["lif_steps"])
            traces[kind] = simulate_traces(net, X, hidden, cfg, kind)
    payload = {k: t.to_dict() for k, t in traces.items()}
    (out / "simtrace.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    rows = [{"table": "simulation", "kind": k, "total_cycles": t.total_cycles, "latency_seconds": t.latency_seconds,
             "energy_joules": t.energy_joules, "active_spikes": t.active_spikes} for k, t in traces.items()]
    write_table(out, "simulate", rows, g["format"])
    print_table(rows, list(rows[0])[1:])
    return EXIT_OK


def _read_rows(path: Path) -> list[dict]:
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        return data if isinstance(data, list) else []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_report(g: dict, c: dict, out: Path) -> int:
    src = Path(c["input"] or out)
    if not src.is_dir():
        raise ContainerError(f"{src} is not a directory")
    rows = []
    for path in sorted(p for p in src.rglob("*") if p.suffix in (".csv", ".json") and p.is_file()):
        if path.stem.startswith("report") or path.name in ("simtrace.json", "calibration.json"):
            continue
        try:
            found = _read_rows(path)
        except (OSError, ValueError, csv.Error):
            log.warning("skipping unreadable %s", path)
            continue
        run = str(path.parent.relative_to(src)) if path.parent != src else "."
        for r in found:
            if not isinstance(r, dict):
                continue
            table = r.get("table")
            if table == "accuracy":
                rows.append({"table": "accuracy_vs_T", "run": run, "model": r["model"], "T": int(r["T"]),
                             "accuracy": float(r["accuracy"]), "sop": float(r["sop"])})
            elif table == "mi":
                rows.append({"table": "mi", "run": run, "model": "spikepack", "T": int(r["T"]),
                             "accuracy": float("nan"), "sop": float("nan"), "N": int(r["N"]),
                             "mc_spikepack": float(r["mc_spikepack"]), "mc_lif": float(r["mc_lif"])})
    cols = ["table", "run", "model", "T", "accuracy", "sop"]
    rows.sort(key=lambda r: (r["table"], r["run"], r["model"], r["T"], r.get("N", 0)))
    acc = [r for r in rows if r["table"] == "accuracy_vs_T"]
    write_table(out, "report", [{k: r[k] for k in cols} for r in acc], g["format"], cols)
    mi = [r for r in rows if r["table"] == "mi"]
    mi_cols = ["run", "N", "T", "mc_spikepack", "mc_lif"]
    write_table(out, "report_mi", mi, g["format"], mi_cols)
    print_table(acc, cols[1:])
    if mi:
        print_table(mi, mi_cols)
    return EXIT_OK


COMMANDS = {
    "equiv": cmd_equiv, "mi": cmd_mi, "train": cmd_train, "convert": cmd_convert,
    "infer": cmd_infer, "simulate": cmd_simulate, "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        g, c = resolve(args)
        out = Path(g["out"])
        out.mkdir(parents=True, exist_ok=True)
        echo_config(out, args.command, g, c)
        return COMMANDS[args.command](g, c, out)
    except (UsageError, DomainError, ShapeError) as exc:
        print(f"spikepack {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ContainerError, OSError) as exc:
        print(f"spikepack {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TrainingDivergedError as exc:
        print(f"spikepack {args.command}: {exc}", file=sys.stderr)
        return EXIT_PROPERTY


if __name__ == "__main__":
    sys.exit(main())
