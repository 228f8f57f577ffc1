"""Smoke test for the `virial` extension module.

Build and install first:  pip install --no-build-isolation ./crates/py
Then:                      python -m pytest python/smoke_test.py
"""
import json
import os
import tempfile

import pytest

virial = pytest.importorskip("virial")

OSCILLATOR = {
    "name": "osc",
    "model": {"name": "oscillator", "params": {"k": 4.0, "dim": 1}},
    "formalism": "tstarq",
    "integrator": {"t_max": 10.0, "dense_dt": 0.01},
    "averaging": {"mode": "periodic"},
}


def test_list_models():
    rows = json.loads(virial.list_models())
    names = {r["name"] for r in rows}
    assert {"kepler_quasi", "oscillator"} <= names
    for r in rows:
        assert r["formalisms"]


def test_check_model():
    rep = json.loads(virial.check_model("kepler_quasi"))
    assert all(e["passed"] for e in rep["entries"])
    with pytest.raises(ValueError):
        virial.check_model("no_such_model")


def test_validate_and_run():
    text = json.dumps(OSCILLATOR)
    assert "energy" in virial.validate(text)
    with tempfile.TemporaryDirectory() as d:
        report = json.loads(virial.run_scenario(text, out_dir=d))
        assert sorted(os.listdir(d)) == ["convergence.csv", "report.json", "trajectory.csv"]
    # x p averages to zero over a period of a harmonic oscillator
    dil = next(v for v in report["virials"] if v["name"] == "dilation")
    assert abs(dil["average"]) < 1e-8
    assert all(v["consistent"] for v in report["virials"])


def test_overrides_and_determinism():
    text = json.dumps(dict(OSCILLATOR, averaging={"mode": "cesaro"}))
    a = virial.run_scenario(text, t_max=3.0, period="none")
    assert a == virial.run_scenario(text, t_max=3.0, period="none")
    assert json.loads(a)["t_end"] == 3.0
    with pytest.raises(ValueError):
        virial.run_scenario(json.dumps(OSCILLATOR), period="none")


def test_errors():
    bad = dict(OSCILLATOR, model={"name": "oscillator", "params": {"k": -1.0}})
    with pytest.raises(ValueError):
        virial.validate(json.dumps(bad))
    with pytest.raises(OSError):
        virial.validate("{ not json")
