import numpy as np
import pytest

from hdrsnn.datapipe import kfold
from hdrsnn.harness import (ABLATIONS, AblationConfig, IoCurve, ablation_run, calibrate_weight_unit,
                            evaluate, io_curve, linear_r2, pool_sessions)
from hdrsnn.topology import NetworkConfig


@pytest.fixture(scope="module")
def curves():
    return {name: io_curve(AblationConfig.named(name)) for name in ABLATIONS}


def test_ablation_configs():
    assert AblationConfig.named("Base") == AblationConfig("Base", False, False, False)
    assert AblationConfig.named("Full") == AblationConfig("Full", True, True, True)
    for name in ("+adapt", "+EI", "+FF"):
        a = AblationConfig.named(name)
        assert sum((a.adaptation, a.ei_balance, a.ff_inhibition)) == 1
    with pytest.raises(ValueError):
        AblationConfig.named("Half")


def test_ablation_apply_sets_flags():
    cfg = AblationConfig.named("+EI").apply(NetworkConfig(seed=4))
    assert cfg.flags == {"adaptation": False, "ei_balance": True, "ff_inhibition": False}
    assert cfg.seed == 4


def test_linear_r2_oracle():
    x = np.arange(10.0)
    assert linear_r2(x, 3 * x + 1) == pytest.approx(1.0)
    assert linear_r2(x, np.ones(10)) == 0.0
    y = np.array([0.0, 1.0, 0.0, 1.0])
    # hand computation: fit slope 0.2, intercept 0.2
    assert linear_r2(np.arange(4.0), y) == pytest.approx(0.2)


def test_curve_shape(curves):
    c = curves["Full"]
    assert c.rates.tolist() == list(range(0, 8001, 500))
    assert c.output.shape == (17,) and np.all(c.output >= 0)
    lines = c.to_csv().splitlines()
    assert lines[0] == "input_hz,E_hz,FF_hz,I_hz" and len(lines) == 18


@pytest.mark.parametrize("name", list(ABLATIONS))
def test_zero_input_gives_near_silence(curves, name):
    assert curves[name].at(0) < 5.0


@pytest.mark.parametrize("name", list(ABLATIONS))
def test_curves_monotone(curves, name):
    assert curves[name].monotone(0.02)


def test_full_curve_linear_and_rising(curves):
    full = curves["Full"]
    assert full.at(8000) > full.at(4000)
    assert full.r2() >= 0.95


def test_base_curve_saturates(curves):
    base = curves["Base"]
    assert base.at(8000) <= 1.15 * base.at(4000)
    assert base.r2() <= 0.8


def test_io_curve_deterministic():
    a = io_curve(AblationConfig.named("+FF"), rates=(0, 2000, 6000), duration=2e5, seed=3)
    b = io_curve(AblationConfig.named("+FF"), rates=(0, 2000, 6000), duration=2e5, seed=3)
    assert np.array_equal(a.output, b.output)


def test_monotone_tolerance():
    c = IoCurve("x", np.arange(3.0), np.array([0.0, 100.0, 98.5]))
    assert c.monotone(0.02) and not c.monotone(0.01)


def test_calibrate_grid_of_one():
    best, scores = calibrate_weight_unit(grid=[450.0], rates=(0, 4000, 8000), duration=2e5)
    assert best == 450.0 and list(scores) == [450.0]


def test_calibrate_returns_argmax():
    best, scores = calibrate_weight_unit(grid=[300.0, 800.0, 2000.0], rates=(0, 2000, 4000, 6000, 8000),
                                         duration=3e5)
    assert scores[best] == max(scores.values())


def test_calibrate_ties_prefer_smaller(monkeypatch):
    import hdrsnn.harness as h

    class Flat:
        def r2(self):
            return 0.5

    monkeypatch.setattr(h, "io_curve", lambda *a, **k: Flat())
    assert calibrate_weight_unit(grid=[900.0, 300.0, 600.0])[0] == 300.0


def test_evaluate_full_config(corpus):
    m = evaluate(corpus, NetworkConfig(), seeds=(0,), k=3)
    assert m["accuracy"] >= 0.75
    conf = np.array(m["confusion"])
    support = np.zeros(4, dtype=int)
    for _, test in kfold(corpus, 3, seed=0):
        for w in test:
            support[w.label] += 1
    assert conf.sum(axis=1).tolist() == support.tolist()
    assert len(m["fold_accuracy"]) == 3 and len(m["per_class_recall"]) == 4
    assert m["mean_output_rate"] > 0


def test_ablation_run_deterministic(corpus):
    subset = corpus[::4]
    a = ablation_run(subset, names=("Base", "Full"), seeds=(0, 1), epochs=1)
    b = ablation_run(subset, names=("Base", "Full"), seeds=(0, 1), epochs=1)
    assert a == b
    assert set(a) == {"Base", "Full"} and len(a["Full"]["accuracy"]) == 2
    assert a["Full"]["median"] == float(np.median(a["Full"]["accuracy"]))


def test_pool_sessions_concatenates(corpus):
    a, b = corpus[:3], corpus[3:7]
    assert pool_sessions(a, b) == a + b
