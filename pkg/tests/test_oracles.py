import math

import numpy as np
import pytest

from dualband_memory.config import RunConfig, apply_overrides, default_config
from dualband_memory.errors import DomainError
from dualband_memory.oracles import (
    CHECKS, CheckResult, _guarded, check_beer_lambert, check_dressed_residual, check_etd_vs_rk4,
    check_grid_refinement, check_slow_light, format_report, random_polariton_params,
    run_validation, slow_light_run, two_level_medium_density,
)
from dualband_memory.simulation import build_model


@pytest.fixture(scope="module")
def cfg():
    return RunConfig.from_dict(default_config())


def test_dressed_and_beer_lambert(cfg):
    print("\nTesting analytic cross-checks...")
    model = build_model(cfg)
    dressed = check_dressed_residual(cfg, model)
    assert dressed.passed and dressed.measured <= 1e-12, f"❌ {dressed}"
    beer = check_beer_lambert(cfg, model)
    assert beer.passed, f"❌ {beer.detail}"
    n1 = two_level_medium_density(model, cfg)
    assert math.isclose(two_level_medium_density(model, cfg, attenuation=2.0), 2 * n1)
    print("  ✅", beer.detail)


def test_random_polariton_params_stay_in_range():
    rng = np.random.default_rng(7)
    phases = []
    for _ in range(100):
        p = random_polariton_params(rng)
        assert abs(p.omega1 / p.delta1) <= 0.05, "❌ small-ratio regime violated"
        assert p.omega3 > 0 and p.g > 0 and p.g_prime > 0
        phases.append([np.angle(p.omega), np.angle(p.omega1), np.angle(p.omega2)])
    spread = np.ptp(np.array(phases), axis=0)
    assert np.all(spread > 3.0), f"❌ control phases barely vary: {spread}"


def test_fast_validation_passes(cfg):
    print("\nRunning the fast validation suite...")
    results = run_validation(cfg, fast=True)
    assert [r.name for r in results] == list(CHECKS[:5]), "❌ fixed check order"
    failed = [r for r in results if not r.passed]
    assert not failed, "❌ failing checks:\n" + format_report(failed)
    print(format_report(results))


def test_loose_tolerance_fails_etd_check():
    print("\nTesting ETD check at rel_tol = 1e-2...")
    loose = RunConfig.from_dict(apply_overrides(default_config(), rel_tol=1e-2))
    result = check_etd_vs_rk4(loose)
    assert not result.passed, f"❌ loose tolerance should fail, measured {result.measured:.3e}"
    assert result.measured > result.bound == 1e-6, "❌ failure must come from the bound"
    print("  ✅", result.detail)


def test_guarded_turns_errors_into_failures():
    def broken(*_):
        raise DomainError("no dark mode")
    [result] = _guarded("dark_mode", broken)
    assert not result.passed and math.isnan(result.measured), "❌ error must read as FAIL"
    assert "no dark mode" in result.detail


def test_format_report():
    text = format_report([CheckResult("beer_lambert", 1e-4, 1e-2, True, "ok"),
                          CheckResult("grid_refinement", 0.5, 1e-2, False)])
    lines = text.splitlines()
    assert lines[0].split()[:3] == ["check", "measured", "bound"], "❌ header"
    assert "PASS" in lines[1] and "FAIL" in lines[2], "❌ status column"


@pytest.mark.slow
def test_slow_light_and_grid_refinement(cfg):
    print("\nRunning the co-simulation checks...")
    run = slow_light_run(cfg)
    delay = check_slow_light(cfg, run=run)
    assert delay.passed, f"❌ {delay.detail}"
    grid = check_grid_refinement(cfg, run=run)
    assert grid.passed, f"❌ relative change {grid.measured:.3e}"
    print("  ✅", delay.detail)


def run_all_tests():
    config = RunConfig.from_dict(default_config())
    test_dressed_and_beer_lambert(config)
    test_random_polariton_params_stay_in_range()
    test_fast_validation_passes(config)
    test_loose_tolerance_fails_etd_check()
    test_guarded_turns_errors_into_failures()
    test_format_report()
    print("\n🎯 All validation-suite tests passed!")


if __name__ == "__main__":
    run_all_tests()
