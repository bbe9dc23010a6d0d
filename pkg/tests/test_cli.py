import csv
import json

import numpy as np
import pytest

from spikepack.cli import EXIT_IO, EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, main
from spikepack.datasets import save_csv


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestEquiv:
    def test_default_run(self, tmp_path, capsys):
        assert main(["equiv", "--out", str(tmp_path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "0 mismatches / 100000 cases" in out
        assert rows(tmp_path / "equiv.csv")[0]["mismatches"] == "0"

    def test_strict_roundtrip_counterexamples(self, tmp_path, capsys):
        code = main(["equiv", "--out", str(tmp_path), "--cases", "1000", "--comparator", "strictly-greater",
                     "--exhaustive-roundtrip"])
        assert code == EXIT_PROPERTY
        ce = [r for r in rows(tmp_path / "equiv_counterexamples.csv") if r["suite"] == "roundtrip"]
        assert ce
        for r in ce:
            assert float(r["v_g"]) == int(r["expected"]) * float(r["theta"])

    def test_tau_one_rejected(self, tmp_path):
        assert main(["equiv", "--out", str(tmp_path), "--tau", "1.0"]) == EXIT_USAGE

    def test_bad_flag(self, tmp_path):
        assert main(["equiv", "--out", str(tmp_path), "--cases", "many"]) == EXIT_USAGE
        assert main(["equiv", "--no-such-flag"]) == EXIT_USAGE


class TestMi:
    def test_zero_samples(self, tmp_path):
        assert main(["mi", "--out", str(tmp_path), "--samples", "0"]) == EXIT_USAGE

    def test_grid(self, tmp_path):
        code = main(["mi", "--out", str(tmp_path), "--n-values", "4,8", "--t-values", "4,8", "--samples", "20000",
                     "--tolerance", "0.1", "--format", "json"])
        assert code == EXIT_OK
        data = json.loads((tmp_path / "mi.json").read_text())
        assert len(data) == 4
        assert all(r["mc_spikepack"] > r["mc_lif"] for r in data)

    def test_small_budget_flagged(self, tmp_path):
        with pytest.warns(RuntimeWarning):
            main(["mi", "--out", str(tmp_path), "--samples", "200", "--tolerance", "1e-4"])
        assert rows(tmp_path / "mi.csv")[0]["flagged"] == "1"


class TestConfig:
    def test_file_then_flags(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text(f"[global]\nseed = 4\nout = {tmp_path / 'a'}\n\n[equiv]\ncases = 300\nt_max = 5\n")
        assert main(["equiv", "--config", str(cfg), "--cases", "200"]) == EXIT_OK
        echoed = (tmp_path / "a" / "equiv.runconfig.ini").read_text()
        assert "cases = 200" in echoed and "t_max = 5" in echoed and "seed = 4" in echoed

    def test_global_flag_before_subcommand(self, tmp_path):
        assert main(["--seed", "9", "equiv", "--cases", "10", "--out", str(tmp_path)]) == EXIT_OK
        assert "seed = 9" in (tmp_path / "equiv.runconfig.ini").read_text()

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[equiv]\nbogus = 1\n")
        assert main(["equiv", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_USAGE

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SPIKEPACK_OUT", str(tmp_path / "env"))
        assert main(["equiv", "--cases", "10"]) == EXIT_OK
        assert (tmp_path / "env" / "equiv.csv").exists()

    def test_missing_config(self, tmp_path):
        assert main(["equiv", "--config", str(tmp_path / "none.ini")]) == EXIT_IO


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipeline")
    assert main(["convert", "--out", str(out), "--samples", "3000"]) == EXIT_OK
    assert main(["infer", "--out", str(out), "--samples", "1000", "--lif-steps", "16",
                 "--dump-trace", "32"]) == EXIT_OK
    return out


class TestPipeline:
    def test_accuracy_table(self, run_dir):
        table = rows(run_dir / "infer.csv")
        sp = [r for r in table if r["model"] == "spikepack"]
        assert [int(r["T"]) for r in sp] == [1, 2, 4, 6, 8]
        ann = next(r for r in table if r["model"] == "ann")
        assert abs(float(sp[-1]["accuracy"]) - float(ann["accuracy"])) < 0.02

    def test_simulate_from_trace(self, run_dir, tmp_path):
        code = main(["simulate", "--out", str(tmp_path), "--model", str(run_dir / "model.spkn"),
                     "--trace", str(run_dir / "trace.spk"), "--kind", "spikepack"])
        assert code == EXIT_OK
        trace = json.loads((tmp_path / "simtrace.json").read_text())["spikepack"]
        assert trace["total_cycles"] == sum(l["cycles"] for l in trace["layers"])
        assert trace["latency_seconds"] == trace["total_cycles"] / trace["clock_hz"]

    def test_simulate_both(self, run_dir):
        assert main(["simulate", "--out", str(run_dir), "--samples", "128"]) == EXIT_OK
        sim = {r["kind"]: r for r in rows(run_dir / "simulate.csv")}
        assert int(sim["spikepack"]["total_cycles"]) < int(sim["lif"]["total_cycles"])

    def test_report(self, run_dir, tmp_path):
        assert main(["report", "--input", str(run_dir), "--out", str(tmp_path)]) == EXIT_OK
        table = rows(tmp_path / "report.csv")
        assert {r["model"] for r in table} == {"ann", "spikepack", "lif"}

    def test_infer_csv_data(self, run_dir, tmp_path):
        rng = np.random.default_rng(0)
        save_csv(tmp_path / "d.csv", rng.uniform(-1, 1, (20, 2)), rng.integers(0, 3, 20))
        assert main(["infer", "--out", str(tmp_path), "--model", str(run_dir / "model.spkn"),
                     "--data", str(tmp_path / "d.csv"), "--t-values", "8"]) == EXIT_OK


class TestErrors:
    def test_report_empty_dir(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert main(["report", "--input", str(tmp_path / "empty"), "--out", str(tmp_path / "o")]) == EXIT_OK
        assert (tmp_path / "o" / "report.csv").read_text() == "table,run,model,T,accuracy,sop\n"

    def test_missing_model(self, tmp_path):
        assert main(["infer", "--out", str(tmp_path), "--model", str(tmp_path / "x.spkn")]) == EXIT_IO

    def test_corrupt_model(self, tmp_path):
        (tmp_path / "bad.spkn").write_bytes(b"SPKN garbage")
        assert main(["simulate", "--out", str(tmp_path), "--model", str(tmp_path / "bad.spkn")]) == EXIT_IO

    def test_train(self, tmp_path):
        assert main(["train", "--out", str(tmp_path), "--epochs", "20", "--samples", "300"]) == EXIT_OK
        curve = rows(tmp_path / "train.csv")
        assert len(curve) == 21
        assert float(curve[-1]["loss"]) < float(curve[0]["loss"])
