import numpy as np
import pytest

from hdrsnn.datapipe import SynthSpec, prepare_corpus, synth_emg


@pytest.fixture(scope="session")
def recording():
    return synth_emg(SynthSpec())


@pytest.fixture(scope="session")
def corpus(recording):
    return prepare_corpus(recording, "adm", seed=0)


def reference_adm(x, threshold, interp, n_block):
    """Point-by-point delta modulator over the linearly interpolated signal."""
    x = np.asarray(x, dtype=float)
    ref = x[0] / threshold
    events, next_allowed = [], 0
    n = x.size
    for g in range((n - 1) * interp + 1):
        i, j = divmod(g, interp)
        if i == n - 1:
            v = x[-1] / threshold
        else:
            ua = x[i] / threshold
            v = ua + (x[i + 1] / threshold - ua) * float(j) / float(interp)
        if g < next_allowed:
            continue
        if v - ref >= 1.0:
            ref += 1.0
            events.append((g, 1))
            next_allowed = g + n_block
        elif ref - v >= 1.0:
            ref -= 1.0
            events.append((g, -1))
            next_allowed = g + n_block
    return events


def cli_pipeline(root):
    """Run every CLI command with small settings; returns the exit codes."""
    from hdrsnn.cli import main

    d = str(root)
    runs = [
        ["--seed", "1", "--out", d, "synth", "--trials", "2"],
        ["--seed", "1", "--out", d + "/adm", "encode", "--method", "adm",
         "--input", d + "/recording.csv", "--labels", d + "/labels.csv"],
        ["--seed", "1", "--out", d + "/pfm", "encode", "--method", "pfm",
         "--input", d + "/recording.csv", "--labels", d + "/labels.csv"],
        ["--seed", "1", "--out", d, "curve", "--config", "Base", "--rates", "0", "4000", "8000",
         "--duration", "0.2"],
        ["--seed", "1", "--out", d, "calibrate", "--grid", "600", "800", "--rates", "0", "4000",
         "8000", "--duration", "0.2"],
        ["--seed", "1", "--config", d + "/network_config.json", "--out", d + "/train", "train",
         "--windows", d + "/adm/windows", "--epochs", "1"],
        ["--seed", "1", "--out", d + "/score", "eval", "--windows", d + "/adm/windows",
         "--weights", d + "/train/weights.json"],
        ["--seed", "1", "--out", d + "/kfold", "eval", "--windows", d + "/adm/windows",
         "--folds", "2", "--epochs", "1"],
        ["--seed", "1", "--out", d + "/ablate", "ablate", "--windows", d + "/pfm/windows",
         "--names", "Base", "Full", "--seeds", "0", "1", "--epochs", "1"],
    ]
    return [main(argv) for argv in runs]


def tree_bytes(root):
    from pathlib import Path

    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion and fail the test on FAIL."""
    def _report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
