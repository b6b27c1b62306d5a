import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import expm

from dualband_memory.atomic_model import (
    HBAR, LEVELS, DecayChannel, LevelScheme, build_hamiltonian, build_lindblad_ops,
    default_couplings, default_scheme,
)
from dualband_memory.config import RunConfig, default_config
from dualband_memory.dynamics import (
    StepControl, adapt_step, check_density_matrix, dissipator, etd_step, evolve,
    liouvillian, master_rhs, rk4_evolve, rk4_reference, two_level_steady_state, unvec, vec,
)
from dualband_memory.errors import ConfigurationError, DomainError, NumericalFailure
from dualband_memory.oracles import control_edge_problem
from dualband_memory.simulation import build_model

GAMMA = 2 * math.pi * 5.746e6


def random_state(rng, n=None):
    shape = (6, 6) if n is None else (n, 6, 6)
    a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    rho = a @ np.conj(np.swapaxes(a, -1, -2))
    return rho / np.trace(rho, axis1=-2, axis2=-1)[..., None, None]


def random_hamiltonian(rng, n=None):
    shape = (6, 6) if n is None else (n, 6, 6)
    a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return HBAR * 1e7 * (a + np.conj(np.swapaxes(a, -1, -2)))


def driven_scheme():
    scheme = default_scheme()
    couplings = default_couplings()
    H = build_hamiltonian(scheme, couplings, {name: 1.0 for name in couplings})
    return scheme, couplings, H, build_lindblad_ops(scheme)


def ground_state():
    rho = np.zeros((6, 6), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def test_vec_is_column_stacking():
    rho = np.arange(36, dtype=complex).reshape(6, 6)
    v = vec(rho)
    assert v[1] == rho[1, 0] and v[6] == rho[0, 1], "❌ vec must stack columns"
    assert np.array_equal(unvec(v), rho), "❌ unvec does not invert vec"
    stack = np.stack([rho, 2 * rho])
    assert vec(stack).shape == (2, 36) and np.array_equal(unvec(vec(stack)), stack), \
        "❌ stacks must vectorize point by point"


def test_liouvillian_matches_matrix_form():
    print("\nTesting liouvillian...")
    rng = np.random.default_rng(1)
    _, _, _, L_ops = driven_scheme()
    rho, H = random_state(rng), random_hamiltonian(rng)
    lhs = liouvillian(H, L_ops) @ vec(rho)
    rhs = vec(master_rhs(rho, H, L_ops))
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-6), "❌ superoperator disagrees with matrix form"
    stack, Hs = random_state(rng, 4), random_hamiltonian(rng, 4)
    Ls = liouvillian(Hs, L_ops)
    assert Ls.shape == (4, 36, 36), "❌ batched Liouvillian shape"
    batched = np.einsum("nij,nj->ni", Ls, vec(stack))
    assert np.allclose(batched, vec(master_rhs(stack, Hs, L_ops)), rtol=1e-12, atol=1e-6), \
        "❌ batched Liouvillian disagrees"
    assert abs(np.trace(master_rhs(rho, H, L_ops))) < 1e-6, "❌ dynamics must preserve the trace"
    print("  ✅ max |L vec(rho)| =", np.max(np.abs(lhs)))


def test_dissipator_empties_excited_level():
    L = np.zeros((6, 6), dtype=complex)
    L[0, 2] = math.sqrt(GAMMA / 2)
    rho = np.zeros((6, 6), dtype=complex)
    rho[2, 2] = 1.0
    drho = unvec(dissipator([L]) @ vec(rho))
    assert math.isclose(drho[2, 2].real, -GAMMA) and math.isclose(drho[0, 0].real, GAMMA), \
        "❌ population must flow a -> b at Gamma"


def test_etd_step_exact_for_constant_generator():
    print("\nTesting etd_step...")
    _, _, H, L_ops = driven_scheme()
    rho0 = ground_state()
    dt = 1e-9
    rho, err = etd_step(rho0, H, L_ops, 0.0, dt)
    exact = unvec(expm(liouvillian(H, L_ops) * dt) @ vec(rho0))
    assert np.allclose(rho, exact, atol=1e-12), "❌ constant H must be stepped exactly"
    assert err < 1e-12, f"❌ step-doubling error {err} for a constant generator"
    assert check_density_matrix(rho)["hermiticity_error"] == 0.0, "❌ result must be Hermitized"
    with pytest.raises(DomainError):
        etd_step(rho0, H, L_ops, 0.0, 0.0)
    print("  ✅ error estimate:", err)


def test_etd_step_worker_count_does_not_change_result():
    rng = np.random.default_rng(7)
    _, _, _, L_ops = driven_scheme()
    stack, Hs = random_state(rng, 9), random_hamiltonian(rng, 9)
    one, e1 = etd_step(stack, Hs, L_ops, 0.0, 1e-9, workers=1)
    three, e3 = etd_step(stack, Hs, L_ops, 0.0, 1e-9, workers=3)
    assert np.max(np.abs(one - three)) <= 1e-14, "❌ chunked step differs from serial step"
    assert math.isclose(e1, e3, rel_tol=1e-9, abs_tol=1e-18), "❌ error estimate depends on workers"


def test_step_control_validation():
    with pytest.raises(ConfigurationError, match="solver.rel_tol"):
        StepControl(rel_tol=0.0)
    with pytest.raises(ConfigurationError, match="solver.dt_initial_us"):
        StepControl(dt_min=1e-9, dt_initial=1e-10)


def test_adapt_step():
    print("\nTesting adapt_step...")
    ctrl = StepControl()
    assert adapt_step(0.0, 1e-9, ctrl).dt_next == 2e-9, "❌ zero error should grow to dt_max"
    d = adapt_step(1e-3, 1e-9, ctrl)
    assert not d.accepted and math.isclose(d.dt_next, 2e-10), "❌ large error shrinks by 5"
    d = adapt_step(ctrl.abs_tol + ctrl.rel_tol, 1e-10, ctrl)
    assert d.accepted and math.isclose(d.dt_next, 0.9e-10), "❌ error at tol keeps ~0.9 dt"
    d = adapt_step(float("nan"), 1e-10, ctrl)
    assert not d.accepted, "❌ non-finite error must be rejected"
    with pytest.raises(NumericalFailure):
        adapt_step(1.0, ctrl.dt_min, ctrl, tau=1e-6)
    print("  ✅ decisions ok")


def test_rk4_reference_agrees_with_exponential():
    _, _, H, L_ops = driven_scheme()
    rho0 = ground_state()
    dt = 1e-10
    exact = unvec(expm(liouvillian(H, L_ops) * dt) @ vec(rho0))
    assert np.allclose(rk4_reference(rho0, H, L_ops, 0.0, dt), exact, atol=1e-9), \
        "❌ RK4 step disagrees with the exact propagator"


def test_evolve_matches_rk4_reference():
    print("\nTesting evolve vs rk4_evolve...")
    _, _, H, L_ops = driven_scheme()
    rho0 = ground_state()
    checkpoints = np.linspace(0.0, 2e-7, 11)[1:-1]
    etd = evolve(rho0, H, L_ops, 0.0, 2e-7, StepControl(), checkpoints)
    rk4 = rk4_evolve(rho0, H, L_ops, 0.0, 2e-7, 1e-10, checkpoints)
    assert etd.taus.size == 11 and np.allclose(etd.taus, rk4.taus), "❌ checkpoints not hit"
    diff = np.max(np.abs(etd.states - rk4.states))
    assert diff <= 1e-6, f"❌ trajectories differ by {diff}"
    diag = check_density_matrix(etd.states)
    assert diag["trace_deviation"] <= 1e-10 and diag["min_eigenvalue"] >= -1e-10, \
        f"❌ integrity {diag}"
    print("  ✅ max difference:", diff, "steps:", etd.accepted)


def test_tightening_tolerance_keeps_trajectory():
    print("\nTesting step-control self-convergence...")
    cfg = RunConfig.from_dict(default_config())
    model = build_model(cfg)
    rho0, hamiltonian, checkpoints = control_edge_problem(cfg, model)
    runs = {}
    for rel_tol in (1e-6, 1e-8):
        ctrl = replace(cfg.ctrl, rel_tol=rel_tol)
        runs[rel_tol] = evolve(rho0, hamiltonian, model.lindblad_ops, 0.0, 1e-6, ctrl,
                               checkpoints)
    loose, tight = runs[1e-6], runs[1e-8]
    assert np.allclose(loose.taus, tight.taus), "❌ checkpoints not hit"
    diff = np.max(np.abs(loose.states - tight.states))
    assert diff <= 5e-6, f"❌ trajectories differ by {diff}"
    print("  ✅ max difference:", diff, "steps:", loose.accepted, "->", tight.accepted)


def test_two_level_steady_state_is_reached():
    print("\nTesting two-level fixed point...")
    omega, delta = 0.3 * GAMMA, 0.5 * GAMMA
    energies = [0.0] * 6
    energies[LEVELS.index("a")] = -delta
    scheme = LevelScheme(LEVELS, tuple(energies), (DecayChannel("a", "b", GAMMA, 1.0),))
    probe = default_couplings()["probe_a"]
    H = build_hamiltonian(scheme, [probe], {"probe_a": omega / probe.rabi_peak})
    traj = evolve(ground_state(), H, build_lindblad_ops(scheme), 0.0, 2e-6)
    rho = traj.states[-1]
    rho_ab, rho_aa = two_level_steady_state(omega, delta, GAMMA)
    a, b = scheme.index("a"), scheme.index("b")
    assert abs(rho[a, b] - rho_ab) < 1e-6, f"❌ coherence {rho[a, b]} vs {rho_ab}"
    assert abs(rho[a, a].real - rho_aa) < 1e-6, f"❌ population {rho[a, a]} vs {rho_aa}"
    assert two_level_steady_state(0.0, 0.0, GAMMA) == (0j, 0.0), "❌ undriven atom stays put"
    with pytest.raises(DomainError):
        two_level_steady_state(1.0, 0.0, 0.0)
    print("  ✅ rho_ab =", rho_ab)


def test_check_density_matrix_flags_bad_state():
    rho = np.diag([1.2, -0.2, 0, 0, 0, 0]).astype(complex)
    rho[0, 1] = 0.1
    diag = check_density_matrix(rho)
    assert math.isclose(diag["trace_deviation"], 0.0, abs_tol=1e-15), "❌ trace is 1"
    assert math.isclose(diag["hermiticity_error"], 0.1), "❌ Hermiticity error"
    assert diag["min_eigenvalue"] < -0.2, "❌ negative eigenvalue not reported"


def run_all_tests():
    test_vec_is_column_stacking()
    test_liouvillian_matches_matrix_form()
    test_dissipator_empties_excited_level()
    test_etd_step_exact_for_constant_generator()
    test_etd_step_worker_count_does_not_change_result()
    test_step_control_validation()
    test_adapt_step()
    test_rk4_reference_agrees_with_exponential()
    test_evolve_matches_rk4_reference()
    test_tightening_tolerance_keeps_trajectory()
    test_two_level_steady_state_is_reached()
    test_check_density_matrix_flags_bad_state()
    print("\n🎯 All dynamics tests passed!")


if __name__ == "__main__":
    run_all_tests()
