import math
import os

import numpy as np
import pytest

import sdobs

CONFIGS = os.environ.get("SDOBS_CONFIG_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "configs"))


def cfg(name):
    return os.path.join(CONFIGS, name)


def test_gain_helpers():
    assert sdobs.small_gain_product(1.5, 1.0, 0.3) == pytest.approx(0.6074364634, rel=1e-9)
    c = sdobs.validate_cascade(1.0, 4, 2.0, 0.1, 1.0)
    assert c["delta"] == pytest.approx(0.25)
    assert c["beta"] == pytest.approx(1.3389591133, rel=1e-9)
    assert sdobs.saturation_q(0.5) == 1.0


def test_violated_gain_raises():
    with pytest.raises(sdobs.GainConditionViolated):
        sdobs.validate_cascade(1.0, 1, 2.0, 0.1, 1.0)


def test_validate_benchmark():
    rep = sdobs.validate(cfg("scalar_benchmark.json"))
    assert rep["ok"]
    assert rep["theory"]["Gamma"] == pytest.approx(14.6831012308, rel=1e-9)
    assert rep["constants"]["B_star"] == pytest.approx(0.4325627555, rel=1e-9)


def test_run_short_benchmark():
    out = sdobs.run(cfg("scalar_benchmark.json"), horizon=4.0)
    t = np.asarray(out["t"])
    assert t[-1] == pytest.approx(4.0)
    assert out["x"].shape == (len(t), 1)
    e = out["e_pred"]
    assert e[-1] < 1e-2 * e[0]
    assert math.isfinite(out["metrics"]["measured"]["e_pred_terminal"])
    again = sdobs.run(cfg("scalar_benchmark.json"), horizon=4.0)
    assert again["e_pred"] == e


def test_missing_file_is_config_error():
    with pytest.raises(sdobs.ConfigError):
        sdobs.validate(cfg("does_not_exist.json"))
