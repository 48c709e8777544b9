import json
import subprocess
import sys

import pytest

from conftest import cli_pipeline, tree_bytes
from hdrsnn.cli import main


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    a = tmp_path_factory.mktemp("run_a")
    b = tmp_path_factory.mktemp("run_b")
    codes = cli_pipeline(a) + cli_pipeline(b)
    return a, b, codes


def test_every_command_succeeds(runs):
    assert set(runs[2]) == {0}


def test_artifacts_written(runs):
    a = runs[0]
    for name in ("recording.csv", "labels.csv", "synth.json", "curve_Base.csv", "curve.json",
                 "calibrate.csv", "network_config.json", "adm/spikes.csv",
                 "adm/windows/manifest.json", "pfm/spikes.csv", "train/weights.json",
                 "train/weight_curve.csv", "score/confusion.csv", "kfold/eval.json",
                 "ablate/ablation.csv"):
        assert (a / name).is_file(), name
    assert (a / "adm/spikes.csv").read_text().startswith("time_us,channel\n")
    assert (a / "labels.csv").read_text().startswith("t_start_s,t_end_s,label\n")
    assert (a / "recording.csv").read_text().startswith("t,emg0,")
    w = json.loads((a / "train/weights.json").read_text())
    assert w["shape"] == [16, 8] and len(w["weights"]) == 128
    assert {"config_hash", "seed", "epochs"} <= set(w)


def test_rerun_byte_identical(runs):
    a, b, _ = runs
    ta, tb = tree_bytes(a), tree_bytes(b)
    assert ta.keys() == tb.keys()
    assert [k for k in ta if ta[k] != tb[k]] == []


def test_calibrated_config_round_trips(runs):
    from hdrsnn.topology import NetworkConfig
    cfg = NetworkConfig.from_json((runs[0] / "network_config.json").read_text())
    assert cfg.i_w_base in (600.0, 800.0)


def test_usage_error_is_json(capsys):
    assert main(["encode", "--method", "xyz"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "UsageError"


def test_runtime_error_is_json(tmp_path, capsys):
    code = main(["--out", str(tmp_path), "train", "--windows", str(tmp_path / "missing")])
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert err["command"] == "train" and err["error"] and err["message"]


def test_bad_config_file_is_json(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"no_such_key": 1}')
    assert main(["--config", str(cfg), "--out", str(tmp_path), "curve", "--config", "Full",
                 "--rates", "0", "--duration", "0.1"]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hdrsnn", "--out", str(tmp_path), "synth",
                           "--trials", "1"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "synth"
    proc = subprocess.run([sys.executable, "-m", "hdrsnn", "bogus"], capture_output=True, text=True)
    assert proc.returncode != 0 and json.loads(proc.stderr)["error"] == "UsageError"
