import json
import math
import os
import pathlib
import tempfile

import numpy as np
import pytest

from dualband_memory import __version__
from dualband_memory.config import default_config
from dualband_memory.output import (
    CSV_COLUMNS, atomic_write, format_number, plot_panel, read_timeseries, timeseries_columns,
    write_manifest, write_metrics, write_rows, write_timeseries,
)
from dualband_memory.propagation import TimeSeries
from dualband_memory.protocol import MemoryMetrics


def _series(n=50):
    tau = np.linspace(0.0, 2e-6, n)
    e_a = 0.3 * np.exp(-((tau - 1e-6) / 2e-7) ** 2) * np.exp(1j * 0.4)
    zero = np.zeros(n, dtype=complex)
    controls = {"omega": 2 * math.pi * 1e6 * 13.7 * np.ones(n)}
    return TimeSeries(tau, {"a": e_a, "b": zero}, {"a": e_a, "b": zero},
                      0.01j * np.ones(n), zero, controls, tau[-1])


@pytest.mark.parametrize("value, text", [
    (0.0, "0.000000000e0"),
    (-0.0, "0.000000000e0"),
    (1.23456789012e-6, "1.234567890e-6"),
    (-2.5e12, "-2.500000000e12"),
    (1.0, "1.000000000e0"),
])
def test_format_number(value, text):
    assert format_number(value) == text, f"❌ {value!r} -> {format_number(value)!r}"


def test_timeseries_columns():
    ts = _series()
    cols = timeseries_columns(ts)
    assert set(cols) == set(CSV_COLUMNS), "❌ every CSV column present"
    assert np.isclose(cols["tau_us"][-1], 2.0), "❌ tau in us"
    assert np.allclose(cols["env_omega"], 13.7), "❌ control in MHz (Rabi / 2 pi)"
    assert np.all(cols["env_omega3"] == 0), "❌ missing control column is zero"
    assert np.allclose(cols["rho_cb_abs"], 0.01), "❌ modulus of rho_cb"


def test_csv_round_trip(tmp_path):
    print("\nTesting simulate CSV...")
    ts = _series()
    path = write_timeseries(str(tmp_path / "simulation.csv"), ts)
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS), "❌ header"
    assert "\r" not in text and text.endswith("\n"), "❌ LF line endings"
    assert len(text.splitlines()) == 51, "❌ one row per sample"
    back = read_timeseries(path)
    cols = timeseries_columns(ts)
    for name in CSV_COLUMNS:
        assert np.allclose(back[name], cols[name], rtol=1e-9, atol=0), f"❌ column {name}"
    print("  ✅ 50 rows read back")


def test_read_rejects_foreign_csv(tmp_path):
    path = write_rows(str(tmp_path / "analysis.csv"), ["omega_MHz", "darkness"], [[1.0, 0.0]])
    with pytest.raises(ValueError):
        read_timeseries(path)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "a.txt"
    atomic_write(str(target), "first\n")
    atomic_write(str(target), "second\n")
    assert target.read_text() == "second\n"
    assert os.listdir(tmp_path / "sub") == ["a.txt"], "❌ temporary file left behind"


def test_metrics_and_manifest(tmp_path):
    metrics = MemoryMetrics(0.01, {"a": 0.2, "b": 0.0}, 0.0, math.inf, 0.21, 0.0,
                            {"a": 1.4e-5, "b": None})
    path = write_metrics(str(tmp_path / "m.json"), metrics, extra={"scenario": "fig2a"})
    data = json.loads(open(path, encoding="utf-8").read())
    assert data["splitting_ratio"] == "inf" and data["scenario"] == "fig2a"
    assert data["retrieval_peak_tau"]["b"] is None

    nan_metrics = MemoryMetrics(0.0, {"a": 0.0, "b": 0.0}, 0.0, math.nan, 0.0, 0.0, {})
    data = json.loads(open(write_metrics(str(tmp_path / "n.json"), nan_metrics)).read())
    assert data["splitting_ratio"] is None, "❌ NaN is written as null"

    raw = default_config()
    path = write_manifest(str(tmp_path / "run.manifest.json"), raw,
                          failure={"error": "NumericalFailure", "tau_s": 1e-6, "dt_s": math.nan})
    data = json.loads(open(path, encoding="utf-8").read())
    assert data["version"] == __version__ and data["config"] == raw
    assert data["status"]["ok"] is False and data["status"]["failure"]["dt_s"] is None
    assert set(data) == {"version", "status", "config"}, "❌ manifests carry no timestamps"


def test_plot_panel(tmp_path):
    print("\nTesting figure output...")
    ts = _series()
    path = plot_panel(str(tmp_path / "fig2a.svg"), timeseries_columns(ts), title="fig2a")
    text = open(path, encoding="utf-8").read()
    assert text.lstrip().startswith("<?xml") and "<svg" in text, "❌ not an SVG"
    assert os.listdir(tmp_path) == ["fig2a.svg"], "❌ temporary file left behind"
    print("  ✅ SVG written")


def run_all_tests():
    test_timeseries_columns()
    with tempfile.TemporaryDirectory() as tmp:
        for test in (test_csv_round_trip, test_read_rejects_foreign_csv, test_metrics_and_manifest):
            test(pathlib.Path(tmp) / test.__name__)
    print("\n🎯 All output tests passed!")


if __name__ == "__main__":
    run_all_tests()
