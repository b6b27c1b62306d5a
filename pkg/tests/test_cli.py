import json
import math
import os

import numpy as np
import pytest

from dualband_memory import cli
from dualband_memory.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, EXIT_ORACLE, main
from dualband_memory.config import DEFAULT_CONFIG
from dualband_memory.errors import ConfigurationError, NumericalFailure
from dualband_memory.oracles import CheckResult
from dualband_memory.output import read_timeseries
from dualband_memory.simulation import run_scenario

# a compressed write/store/read cycle on a coarse grid
SHORT_RUN = {
    "medium": {"spatial_points": 8, "density_m3": 4e15},
    "solver": {"samples": 60},
    "output": {"plots": False},
    "scenario": {"preset": "fig2a", "overrides": {
        "t0_us": 0.1, "sigma_us": 0.03, "t_off_us": 0.2, "t_on_us": 0.3,
        "sigma_t_us": 0.01, "tau_end_us": 0.4}},
}


def _write_config(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def test_parse_sweep():
    name, values = cli.parse_sweep("omega1=0:10:3")
    assert name == "omega1" and np.allclose(values / (2 * math.pi * 1e6), [0, 5, 10])
    for bad in ("omega", "omega=1:2", "omega=a:b:3", "colour=0:1:2", "omega=0:1:0"):
        with pytest.raises(ConfigurationError) as info:
            cli.parse_sweep(bad)
        assert info.value.key == "--sweep", f"❌ {bad!r} should name --sweep"


def test_panel_preset():
    assert cli.panel_preset("2c") == "fig2c" and cli.panel_preset("fig3a") == "fig3a"
    with pytest.raises(ConfigurationError):
        cli.panel_preset("4a")


def test_print_default_config(capsys):
    assert main(["--print-default-config"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == DEFAULT_CONFIG, "❌ defaults not printed"


def test_invalid_invocations(tmp_path):
    assert main([]) == EXIT_INVALID, "❌ no command is an error"
    bad = _write_config(tmp_path / "bad.json", {"medium": {"colour": "blue"}})
    assert main(["--config", bad, "--out", str(tmp_path), "simulate"]) == EXIT_INVALID
    assert main(["--out", str(tmp_path), "analyze"]) == EXIT_INVALID, "❌ analyze needs a range"
    assert main(["--grid", "3", "--out", str(tmp_path), "simulate"]) == EXIT_INVALID
    assert not os.path.exists(tmp_path / "simulation.csv"), "❌ nothing written on bad input"


def test_analyze_writes_sweep_table(tmp_path):
    print("\nTesting analyze...")
    code = main(["--out", str(tmp_path), "analyze", "--sweep", "omega=10:20:3",
                 "--sweep", "omega1=0:2:2"])
    assert code == EXIT_OK
    lines = (tmp_path / "analysis.csv").read_text().splitlines()
    assert lines[0] == "omega_MHz,omega1_MHz,darkness,omega_mode_MHz,v_g_m_s,overlap"
    assert len(lines) == 7, "❌ 3 x 2 grid points"
    assert lines[1].startswith("1.000000000e1,0.000000000e0,"), "❌ first grid point"
    assert (tmp_path / "analysis.manifest.json").exists()
    print("  ✅", len(lines) - 1, "rows")


def test_simulate_short_run_is_reproducible(tmp_path):
    print("\nTesting simulate...")
    config = _write_config(tmp_path / "short.json", SHORT_RUN)
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["--config", config, "--out", str(first), "simulate"]) == EXIT_OK
    for name in ("simulation.csv", "simulation.metrics.json", "simulation.manifest.json"):
        assert (first / name).exists(), f"❌ {name} missing"
    manifest = json.loads((first / "simulation.manifest.json").read_text())
    assert manifest["status"]["ok"] is True
    assert manifest["config"]["scenario"]["overrides"]["tau_end_us"] == 0.4
    metrics = json.loads((first / "simulation.metrics.json").read_text())
    assert metrics["scenario"] == "fig2a" and metrics["steps"]["accepted"] > 0
    cols = read_timeseries(str(first / "simulation.csv"))
    assert cols["tau_us"].size == 60 and math.isclose(cols["tau_us"][-1], 0.4)

    code = main(["--config", str(first / "simulation.manifest.json"), "--out", str(second),
                 "simulate"])
    assert code == EXIT_OK
    assert (first / "simulation.csv").read_bytes() == (second / "simulation.csv").read_bytes(), \
        "❌ re-running the manifest must reproduce the CSV"

    assert main(["--out", str(first), "figures", "2a", "--from-csv",
                 str(first / "simulation.csv")]) == EXIT_OK
    assert (first / "fig2a.svg").exists(), "❌ re-plot from CSV"
    print("  ✅ byte-identical CSV")


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def explode(cfg):
        raise NumericalFailure("density matrix became non-finite", tau=1e-6, dt=1e-9, index=3)
    monkeypatch.setattr(cli, "run_scenario", explode)
    assert main(["--out", str(tmp_path), "simulate"]) == EXIT_NUMERICAL
    manifest = json.loads((tmp_path / "simulation.manifest.json").read_text())
    failure = manifest["status"]["failure"]
    assert manifest["status"]["ok"] is False
    assert failure["error"] == "NumericalFailure" and failure["index"] == 3
    assert failure["tau_s"] == 1e-6 and failure["dt_s"] == 1e-9


def test_validate_exit_codes(tmp_path, monkeypatch, capsys):
    assert main(["--out", str(tmp_path), "validate", "--fast"]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out
    code = main(["--rel-tol", "1e-2", "--out", str(tmp_path), "validate", "--fast"])
    assert code == EXIT_ORACLE, "❌ rel_tol = 1e-2 must fail the ETD check"
    failing = [line for line in capsys.readouterr().out.splitlines() if "FAIL" in line]
    assert any("etd_vs_rk4" in line for line in failing), "❌ failing check must be reported"
    monkeypatch.setattr(cli, "run_validation", lambda cfg, fast=False: [
        CheckResult("beer_lambert", 0.5, 1e-2, False, "forced")])
    assert main(["--out", str(tmp_path), "validate"]) == EXIT_ORACLE


def _metrics(path):
    return json.loads(path.read_text())


@pytest.fixture(scope="module")
def fig2a_run(tmp_path_factory):
    """fig2a through the CLI once, keeping the in-memory result next to the files."""
    out = tmp_path_factory.mktemp("fig2a")
    captured = {}

    def capture(cfg):
        captured["result"] = run_scenario(cfg)
        return captured["result"]

    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(cli, "run_scenario", capture)
        code = main(["--out", str(out), "figures", "2a"])
    assert code == EXIT_OK, f"❌ fig2a exited with {code}"
    return out, captured["result"]


@pytest.mark.slow
def test_fig2a_storage_and_retrieval(fig2a_run):
    print("\nRunning fig2a...")
    out, _ = fig2a_run
    m = _metrics(out / "fig2a.metrics.json")
    assert m["storage_peak_ratio"] < 1e-2, "❌ light leaks during storage"
    assert m["spinwave_plateau_drift"] < 1e-3, "❌ spin wave drifts during storage"
    assert 13e-6 < m["retrieval_peak_tau"]["a"] < 15e-6, "❌ retrieved pulse misplaced"
    eff = m["retrieval_efficiency"]
    assert eff["b"] < 1e-4 * eff["a"], "❌ mode b has no read control and should stay dark"
    cols = read_timeseries(str(out / "fig2a.csv"))
    assert cols["tau_us"].size == 2000 and (out / "fig2a.svg").exists()
    print("  ✅ efficiency a:", eff["a"])


@pytest.mark.slow
def test_fig2a_density_matrix_integrity(fig2a_run):
    print("\nChecking fig2a density matrix integrity...")
    _, result = fig2a_run
    integ = result.timeseries.integrity
    assert len(integ["tau"]) == 100, f"❌ {len(integ['tau'])} integrity samples, not 100"
    assert math.isclose(integ["tau"][-1], result.timeseries.tau_end), "❌ last sample at tau_end"
    assert integ["trace_deviation"].max() <= 1e-8, "❌ trace drifted"
    assert integ["hermiticity_error"].max() <= 1e-10, "❌ lost Hermiticity"
    assert integ["min_eigenvalue"].min() >= -1e-8, "❌ negative populations"
    print("  ✅ worst trace deviation:", integ["trace_deviation"].max())


@pytest.mark.slow
def test_fig2a_grid_and_tolerance_convergence(fig2a_run, tmp_path):
    print("\nRunning fig2a on a doubled grid with halved tolerances...")
    out, _ = fig2a_run
    solver = DEFAULT_CONFIG["solver"]
    fine = _write_config(tmp_path / "fine.json", {
        "medium": {"spatial_points": 2 * DEFAULT_CONFIG["medium"]["spatial_points"]},
        "solver": {"rel_tol": solver["rel_tol"] / 2, "abs_tol": solver["abs_tol"] / 2,
                   "dt_max_us": solver["dt_max_us"] / 2},
    })
    assert main(["--config", fine, "--out", str(tmp_path), "figures", "2a"]) == EXIT_OK
    ref = read_timeseries(str(out / "fig2a.csv"))
    new = read_timeseries(str(tmp_path / "fig2a.csv"))
    assert np.array_equal(ref["tau_us"], new["tau_us"]), "❌ output grids differ"
    for group in (("Ea_abs", "Eb_abs"), ("rho_cb_abs", "rho_ce_abs")):
        scale = max(np.max(ref[c]) for c in group)
        for column in group:
            change = np.max(np.abs(new[column] - ref[column]))
            assert change <= 1e-2 * scale, f"❌ {column} moved by {change / scale:.2%}"
    print("  ✅ traces agree to 1%")


@pytest.mark.slow
@pytest.mark.parametrize("panel, enabled, disabled",
                         [("2b", "b", "a"), ("3a", "b", "a"), ("3b", "a", "b")])
def test_single_mode_retrieval(tmp_path, panel, enabled, disabled):
    assert main(["--out", str(tmp_path), "figures", panel]) == EXIT_OK
    eff = _metrics(tmp_path / f"fig{panel}.metrics.json")["retrieval_efficiency"]
    assert eff[enabled] > 0, f"❌ nothing retrieved into mode {enabled}"
    assert eff[disabled] < 1e-4 * eff[enabled], f"❌ mode {disabled} should stay dark"


@pytest.mark.slow
@pytest.mark.parametrize("panel", ["2c", "3c"])
def test_split_retrieval(tmp_path, panel):
    assert main(["--out", str(tmp_path), "figures", panel]) == EXIT_OK
    m = _metrics(tmp_path / f"fig{panel}.metrics.json")
    assert m["retrieval_efficiency"]["a"] > 0 and m["retrieval_efficiency"]["b"] > 0
    ratio = m["splitting_ratio"]
    assert isinstance(ratio, float) and math.isfinite(ratio), f"❌ splitting ratio {ratio!r}"


@pytest.mark.slow
def test_worker_count_does_not_change_csv(tmp_path):
    one, two = tmp_path / "one", tmp_path / "two"
    assert main(["--workers", "1", "--out", str(one), "simulate"]) == EXIT_OK
    assert main(["--workers", "2", "--out", str(two), "simulate"]) == EXIT_OK
    assert (one / "simulation.csv").read_bytes() == (two / "simulation.csv").read_bytes()


def run_all_tests():
    test_parse_sweep()
    test_panel_preset()
    print("\n🎯 CLI parsing tests passed! Run pytest for the command tests.")


if __name__ == "__main__":
    run_all_tests()
