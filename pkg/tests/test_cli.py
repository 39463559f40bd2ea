import subprocess
import sys

import numpy as np
import pytest

from fogcrn.cli import embed_demo, main
from fogcrn.frameio import write_frame
from fogcrn.learning import load_model
from fogcrn.sensing import (calibrate_energy_threshold, decide, default_alpha_grid,
                            detect_cyclostationary, energy_metric, waveform_metric)
from fogcrn.signalgen import (ChannelModel, PuProfile, apply_channel, gen_noise, gen_pu_signal)
from fogcrn.sim import CSV_COLUMNS, load_scenario, run

SCENARIO = """\
n_channels = 2
n_nodes = 2
node_tiers = T0
epoch_len_ticks = 20
duration_ticks = 60
frame_len = 64
calibration_trials = 2000
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text(SCENARIO)
    return p


def _kv(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines())


def test_run_writes_csv_matching_library(cfg, tmp_path):
    out = tmp_path / "m.csv"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    text = out.read_text()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert text == run(load_scenario(cfg)).to_csv()


def test_run_overrides_and_side_outputs(cfg, tmp_path):
    out, txt, dump = tmp_path / "m.csv", tmp_path / "m.txt", tmp_path / "cloud.txt"
    rc = main(["run", "--config", str(cfg), "--set", "snr_db=5", "--seed", "3", "--out", str(out),
               "--text", str(txt), "--cloud-dump", str(dump)])
    assert rc == 0
    sc = load_scenario(cfg, {"snr_db": "5", "master_seed": "3"})
    assert out.read_text() == run(sc).to_csv()
    assert "master_seed = 3" in txt.read_text()
    assert "[beliefs]" in dump.read_text()


def test_run_stdout(cfg, capsys):
    assert main(["run", "--config", str(cfg)]) == 0
    assert capsys.readouterr().out.startswith("node,tier,")


@pytest.mark.parametrize("argv", [["frobnicate"], [], ["run"], ["sense", "--in", "x"]])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "usage" in capsys.readouterr().err


def test_invalid_inputs_exit_1(cfg, tmp_path, capsys):
    assert main(["run", "--config", str(cfg), "--set", "nonsense=1"]) == 1
    assert main(["run", "--config", str(cfg), "--set", "n_channels=0"]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["sense", "--in", str(tmp_path / "missing.bin"), "--rho", "1"]) == 1
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"garbage")
    assert main(["sense", "--in", str(bad), "--rho", "1"]) == 1
    assert main(["sweep", "--config", str(cfg), "--param", "frame_len", "--values", "1,2"]) == 1
    assert "fogcrn" in capsys.readouterr().err


def test_sweep(cfg, tmp_path, capsys):
    out = tmp_path / "sw.csv"
    assert main(["sweep", "--config", str(cfg), "--param", "snr_db", "--values=-5,5",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("sweep_param,sweep_value,node")
    assert len(lines) == 1 + 2 * 3
    assert "snr_db=-5.0" in capsys.readouterr().err


def test_report(cfg, capsys):
    assert main(["report", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "[run]" in out and "[cloud]" in out and "[node.all]" in out


# ------------------------------------------------------------- sensing --

def test_sense_energy_matches_library(tmp_path, capsys):
    f = gen_noise(128, 1.0, 4)
    path = tmp_path / "frame.bin"
    write_frame(path, f)
    assert main(["sense", "--in", str(path), "--detector", "energy", "--rho", "12.5"]) == 0
    kv = _kv(capsys.readouterr().out)
    m = energy_metric(f).value
    assert float(kv["metric"]) == m
    assert kv["decision"] == decide(m, 12.5).name == "H1"


def test_sense_waveform_and_cyclic_match_library(tmp_path, capsys):
    x = gen_pu_signal(PuProfile(), 256, 1)
    y = apply_channel(x, ChannelModel(1.0, 0.5), 2)
    write_frame(tmp_path / "y.bin", y)
    write_frame(tmp_path / "x.bin", x)
    assert main(["sense", "--in", str(tmp_path / "y.bin"), "--detector", "waveform",
                 "--rho", "10", "--pattern", str(tmp_path / "x.bin")]) == 0
    kv = _kv(capsys.readouterr().out)
    assert float(kv["metric"]) == waveform_metric(y, x)
    assert main(["sense", "--in", str(tmp_path / "y.bin"), "--detector", "cyclostationary",
                 "--rho", "0.3", "--alpha-res", "32", "--taus", "0,1"]) == 0
    kv = _kv(capsys.readouterr().out)
    res = detect_cyclostationary(y, default_alpha_grid(32), (0, 1), 0.3)
    assert float(kv["metric"]) == res.peak_val and float(kv["peak_alpha"]) == res.peak_alpha
    assert kv["decision"] == res.hypothesis.name
    assert main(["sense", "--in", str(tmp_path / "y.bin"), "--detector", "waveform",
                 "--rho", "1"]) == 1


def test_calibrate_matches_library(capsys):
    assert main(["calibrate", "--pfa", "0.05", "--n", "64", "--trials", "5000", "--seed", "7"]) == 0
    kv = _kv(capsys.readouterr().out)
    assert float(kv["rho"]) == calibrate_energy_threshold(0.05, 1.0, 64, 5000, 7)
    assert main(["calibrate", "--pfa", "1.5"]) == 1


# ------------------------------------------------------------- learning --

def test_train_regression_and_svm(tmp_path, capsys):
    data = tmp_path / "train.csv"
    model = tmp_path / "reg.json"
    assert main(["train", "--engine", "regression", "--synthesize", "200", "--save-data",
                 str(data), "--snr-db", "0", "--frame-len", "64", "--out", str(model)]) == 0
    kv = _kv(capsys.readouterr().out)
    assert float(kv["train_accuracy"]) > 0.8
    load_model(model)
    svm_path = tmp_path / "svm.json"
    assert main(["train", "--engine", "svm", "--data", str(data), "--kernel", "rbf",
                 "--gamma", "0.5", "--eval", str(data), "--out", str(svm_path)]) == 0
    kv = _kv(capsys.readouterr().out)
    assert float(kv["eval_accuracy"]) == float(kv["train_accuracy"]) > 0.8
    assert main(["train", "--engine", "svm", "--out", str(svm_path)]) == 1


def test_train_runtime_and_validation_exit_codes(tmp_path):
    data = tmp_path / "d.csv"
    rows = ["normalized_energy,waveform_corr,max_cyclic_peak,peak_alpha,spectral_flatness,"
            "bandwidth_est,occupied"]
    rows += ["1,0,0,0,0,0,1", "2,0,0,0,0,0,0", "3,0,0,0,0,0,1"]
    data.write_text("\n".join(rows) + "\n")
    out = str(tmp_path / "m.json")
    # all-zero feature columns make the least-squares design rank deficient
    assert main(["train", "--engine", "regression", "--data", str(data), "--out", out]) == 2
    assert main(["train", "--engine", "svm", "--data", str(data), "--tol", "-1", "--out", out]) == 1


def test_embed_linear_and_swiss(tmp_path, capsys):
    assert main(["embed", "--kind", "linear_subspace", "--n", "500", "--out",
                 str(tmp_path / "lin")]) == 0
    kv = _kv(capsys.readouterr().out)
    assert float(kv["procrustes_residual"]) <= 1e-6
    assert embed_demo("swiss_roll", 1000, 10, 2, 0, tmp_path / "sw") == 0
    kv = _kv(capsys.readouterr().out)
    assert float(kv["trustworthiness"]) >= 0.9
    emb = np.loadtxt(tmp_path / "sw_embedding.csv", delimiter=",", skiprows=1)
    assert emb.shape == (1000, 2)


def test_embed_deterministic_bytes(tmp_path, capsys):
    for d in ("a", "b"):
        (tmp_path / d).mkdir()
        assert main(["embed", "--kind", "s_curve", "--n", "300", "--seed", "4",
                     "--out", str(tmp_path / d / "s")]) == 0
    for suffix in ("_ambient.csv", "_intrinsic.csv", "_embedding.csv"):
        assert (tmp_path / "a" / ("s" + suffix)).read_bytes() == \
            (tmp_path / "b" / ("s" + suffix)).read_bytes()


def test_embed_bad_k_exit_1(tmp_path):
    assert main(["embed", "--kind", "s_curve", "--n", "20", "--k", "30",
                 "--out", str(tmp_path / "x")]) == 1


def test_module_entry_point(cfg):
    proc = subprocess.run([sys.executable, "-m", "fogcrn", "run", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("node,")
    proc = subprocess.run([sys.executable, "-m", "fogcrn", "nope"], capture_output=True, text=True)
    assert proc.returncode == 1 and proc.stdout == ""
