"""
Dynamics Module

Lindblad master-equation integration for the 6x6 density matrix:

    drho/dt = -(i/hbar)[H, rho] + sum_j (2 L_j rho L_j^+ - {L_j^+ L_j, rho})

Contents:
- StepControl / StepDecision     adaptive step-size settings and decisions
- vec / unvec                    column-stacking vectorization
- dissipator / liouvillian       36x36 superoperators (batched over grid points)
- master_rhs                     matrix-form right-hand side
- etd_step                       midpoint exponential step + step-doubling error
- rk4_reference                  classical RK4 step (validation reference)
- adapt_step                     proportional step-size controller
- evolve / rk4_evolve            single-trajectory drivers with checkpoints
- two_level_steady_state         analytic fixed point of a driven damped two-level atom
- check_density_matrix           trace / Hermiticity / positivity diagnostics

Every function accepts a single 6x6 matrix or a stack of shape (N, 6, 6);
a stack is integrated point by point with one shared step size.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .atomic_model import HBAR
from .errors import ConfigurationError, DomainError, NumericalFailure

logger = logging.getLogger(__name__)

DIM = 6
TRACE_RENORM_TOL = 1e-12
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
ORDER_EXPONENT = 1.0 / 3.0


@dataclass(frozen=True)
class StepControl:
    """
    Adaptive step settings (seconds).

    Example:
        >>> StepControl(dt_min=1e-9, dt_initial=1e-10)
        Traceback (most recent call last):
        ...
        dualband_memory.errors.ConfigurationError: solver.dt_initial_us: need dt_min <= dt_initial <= dt_max
    """
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    dt_min: float = 1e-13
    dt_initial: float = 1e-10
    dt_max: float = 2e-9

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ConfigurationError("rel_tol must be > 0", key="solver.rel_tol")
        if not self.abs_tol > 0:
            raise ConfigurationError("abs_tol must be > 0", key="solver.abs_tol")
        if not 0 < self.dt_min <= self.dt_initial <= self.dt_max:
            raise ConfigurationError("need dt_min <= dt_initial <= dt_max",
                                     key="solver.dt_initial_us")


@dataclass(frozen=True)
class StepDecision:
    accepted: bool
    dt_next: float
    tol: float


def vec(rho):
    """Column-stacked vectorization; works on stacks."""
    rho = np.asarray(rho)
    return np.swapaxes(rho, -1, -2).reshape(rho.shape[:-2] + (DIM * DIM,))


def unvec(v):
    v = np.asarray(v)
    return np.swapaxes(v.reshape(v.shape[:-1] + (DIM, DIM)), -1, -2)


def _kron(A, B):
    """Kronecker product over the last two axes, broadcasting leading axes."""
    n = A.shape[-1]
    out = A[..., :, None, :, None] * B[..., None, :, None, :]
    return out.reshape(np.broadcast_shapes(A.shape[:-2], B.shape[:-2]) + (n * n, n * n))


def dissipator(L_ops):
    """
    Superoperator of sum_j (2 L_j rho L_j^+ - {L_j^+ L_j, rho}) on column-stacked rho.

    Example:
        >>> dissipator([]).shape
        (36, 36)
    """
    eye = np.eye(DIM, dtype=complex)
    D = np.zeros((DIM * DIM, DIM * DIM), dtype=complex)
    for L in L_ops:
        L = np.asarray(L, dtype=complex)
        LdL = L.conj().T @ L
        D += 2 * np.kron(L.conj(), L) - np.kron(eye, LdL) - np.kron(LdL.T, eye)
    return D


def liouvillian(H, L_ops=(), D=None):
    """
    Liouvillian superoperator acting on column-stacked density matrices.

    Args:
        H (np.ndarray): Hamiltonian in J, shape (6, 6) or (N, 6, 6).
        L_ops (Sequence[np.ndarray]): Jump operators (rad/s^(1/2) scaled).
        D (np.ndarray, optional): Precomputed dissipator(L_ops).

    Returns:
        np.ndarray: -(i/hbar)(I kron H - H^T kron I) + D, shape (..., 36, 36).

    Example:
        >>> np.count_nonzero(liouvillian(np.zeros((6, 6))))
        0
    """
    H = np.asarray(H, dtype=complex)
    eye = np.broadcast_to(np.eye(DIM, dtype=complex), H.shape)
    L = (-1j / HBAR) * (_kron(eye, H) - _kron(np.swapaxes(H, -1, -2), eye))
    return L + (dissipator(L_ops) if D is None else D)


def master_rhs(rho, H, L_ops=()):
    """Matrix-form right-hand side of the master equation."""
    rho = np.asarray(rho, dtype=complex)
    out = (-1j / HBAR) * (H @ rho - rho @ H)
    for L in L_ops:
        Ld = L.conj().T
        LdL = Ld @ L
        out = out + 2 * L @ rho @ Ld - LdL @ rho - rho @ LdL
    return out


def _hamiltonian_at(hamiltonian, tau):
    return hamiltonian(tau) if callable(hamiltonian) else hamiltonian


def _chunks(n, workers):
    bounds = np.linspace(0, n, max(1, min(workers, n)) + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _propagate(rho, H, D, dt, workers=1):
    """exp(L dt) rho for one matrix or a stack, chunked across threads."""
    if rho.ndim == 2 or workers <= 1:
        gen = liouvillian(H, D=D) * dt
        return unvec(np.einsum("...ij,...j->...i", expm(gen), vec(rho)))
    H = np.broadcast_to(H, rho.shape)

    def run(sl):
        gen = liouvillian(H[sl], D=D) * dt
        return unvec(np.einsum("...ij,...j->...i", expm(gen), vec(rho[sl])))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(run, _chunks(rho.shape[0], workers)))
    return np.concatenate(parts, axis=0)


def _clean(rho, tau, dt):
    if not np.all(np.isfinite(rho)):
        bad = None
        if rho.ndim == 3:
            bad = int(np.argmax(~np.all(np.isfinite(rho), axis=(1, 2))))
        raise NumericalFailure("density matrix became non-finite", tau=tau, dt=dt, index=bad)
    rho = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    tr = np.real(np.trace(rho, axis1=-2, axis2=-1))
    off = np.abs(tr - 1.0) > TRACE_RENORM_TOL
    if np.any(off):
        if rho.ndim == 2:
            rho = rho / tr
        else:
            rho[off] = rho[off] / tr[off][:, None, None]
    return rho


def etd_step(rho, hamiltonian, L_ops, tau, dt, D=None, workers=1):
    """
    One exponential step with the Liouvillian frozen at the step midpoint.

    Args:
        rho (np.ndarray): Density matrix (6, 6) or stack (N, 6, 6).
        hamiltonian: Callable tau -> H (J) or a constant array.
        L_ops (Sequence[np.ndarray]): Jump operators.
        tau (float): Start of the step (s).
        dt (float): Step size (s), > 0.
        D (np.ndarray, optional): Precomputed dissipator(L_ops).
        workers (int): Threads used for stacks; results do not depend on it.

    Returns:
        tuple: (rho_new, error) where error is the max-abs difference between
        the full step and two half steps (global maximum over a stack).

    Raises:
        NumericalFailure: If the result is not finite.
    """
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    rho = np.asarray(rho, dtype=complex)
    D = dissipator(L_ops) if D is None else D
    full = _propagate(rho, _hamiltonian_at(hamiltonian, tau + dt / 2), D, dt, workers)
    half = _propagate(rho, _hamiltonian_at(hamiltonian, tau + dt / 4), D, dt / 2, workers)
    half = _propagate(half, _hamiltonian_at(hamiltonian, tau + 3 * dt / 4), D, dt / 2, workers)
    if not np.all(np.isfinite(half)):
        _clean(half, tau, dt)
    error = float(np.max(np.abs(full - half)))
    return _clean(full, tau, dt), error


def rk4_reference(rho, hamiltonian, L_ops, tau, dt):
    """
    Classical fourth-order Runge-Kutta step on the matrix-form right-hand side.

    Example:
        >>> rho = np.diag([1, 0, 0, 0, 0, 0]).astype(complex)
        >>> bool(np.array_equal(rk4_reference(rho, np.zeros((6, 6)), [], 0.0, 1e-9), rho))
        True
    """
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    rho = np.asarray(rho, dtype=complex)
    L_ops = [np.asarray(L, dtype=complex) for L in L_ops]
    H0 = _hamiltonian_at(hamiltonian, tau)
    H1 = _hamiltonian_at(hamiltonian, tau + dt / 2)
    H2 = _hamiltonian_at(hamiltonian, tau + dt)
    k1 = master_rhs(rho, H0, L_ops)
    k2 = master_rhs(rho + 0.5 * dt * k1, H1, L_ops)
    k3 = master_rhs(rho + 0.5 * dt * k2, H1, L_ops)
    k4 = master_rhs(rho + dt * k3, H2, L_ops)
    out = rho + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("RK4 reference became non-finite", tau=tau, dt=dt)
    return out


def adapt_step(error, dt, ctrl: StepControl, scale=1.0, tau=None):
    """
    Proportional step-size controller.

    Args:
        error (float): Error estimate of the attempted step.
        dt (float): Attempted step size (s).
        ctrl (StepControl): Tolerances and step bounds.
        scale (float): ||rho||_inf entering the relative tolerance.
        tau (float, optional): Step start, reported on failure.

    Returns:
        StepDecision: accepted when error <= abs_tol + rel_tol * scale;
        dt_next = dt * clamp(0.9 (tol/error)^(1/3), 0.2, 5) within [dt_min, dt_max].

    Raises:
        NumericalFailure: If a rejected step cannot shrink above dt_min.

    Example:
        >>> adapt_step(0.0, 1e-9, StepControl()).dt_next
        2e-09
    """
    if not math.isfinite(error):
        factor = MIN_FACTOR
        accepted = False
        tol = ctrl.abs_tol + ctrl.rel_tol * scale
    else:
        tol = ctrl.abs_tol + ctrl.rel_tol * scale
        accepted = error <= tol
        if error == 0:
            factor = MAX_FACTOR
        else:
            factor = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * (tol / error) ** ORDER_EXPONENT))
    proposed = dt * factor
    if not accepted and proposed < ctrl.dt_min:
        if dt <= ctrl.dt_min * (1 + 1e-12):
            raise NumericalFailure(
                f"step rejected at the minimum step (error {error:.3e} > tol {tol:.3e})",
                tau=tau, dt=dt)
        proposed = ctrl.dt_min
    return StepDecision(accepted, min(ctrl.dt_max, max(ctrl.dt_min, proposed)), tol)


@dataclass
class Trajectory:
    """Density matrices recorded at checkpoint times by evolve / rk4_evolve."""
    taus: np.ndarray
    states: np.ndarray
    accepted: int = 0
    rejected: int = 0


def _targets(tau0, tau_end, checkpoints):
    pts = [] if checkpoints is None else [float(t) for t in checkpoints]
    pts = sorted(t for t in pts if tau0 < t < tau_end) + [float(tau_end)]
    return pts


def evolve(rho0, hamiltonian, L_ops, tau0, tau_end, ctrl=None, checkpoints=None, workers=1):
    """
    Adaptive ETD integration from tau0 to tau_end.

    Steps are shortened to land exactly on every checkpoint; the state at tau0
    and at each checkpoint (tau_end included) is recorded.
    """
    ctrl = StepControl() if ctrl is None else ctrl
    rho = np.asarray(rho0, dtype=complex).copy()
    D = dissipator(L_ops)
    taus, states = [tau0], [rho.copy()]
    tau, dt = float(tau0), ctrl.dt_initial
    accepted = rejected = 0
    for target in _targets(tau0, tau_end, checkpoints):
        while target - tau > 1e-12 * max(abs(target), ctrl.dt_min):
            step = min(dt, target - tau)
            candidate, err = etd_step(rho, hamiltonian, L_ops, tau, step, D=D, workers=workers)
            decision = adapt_step(err, step, ctrl, float(np.max(np.abs(rho))), tau=tau)
            if decision.accepted:
                rho, tau = candidate, tau + step
                accepted += 1
                if step == dt or decision.dt_next < dt:
                    dt = decision.dt_next
            else:
                rejected += 1
                dt = decision.dt_next
        tau = target
        taus.append(tau)
        states.append(rho.copy())
    logger.debug("evolve: %d accepted, %d rejected steps", accepted, rejected)
    return Trajectory(np.array(taus), np.array(states), accepted, rejected)


def rk4_evolve(rho0, hamiltonian, L_ops, tau0, tau_end, dt, checkpoints=None):
    """Fixed-step RK4 integration with the same checkpoint handling as evolve."""
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    L_ops = [np.asarray(L, dtype=complex) for L in L_ops]
    rho = np.asarray(rho0, dtype=complex).copy()
    taus, states = [tau0], [rho.copy()]
    tau = float(tau0)
    steps = 0
    for target in _targets(tau0, tau_end, checkpoints):
        n = max(1, int(math.ceil((target - tau) / dt - 1e-9)))
        h = (target - tau) / n
        for i in range(n):
            rho = rk4_reference(rho, hamiltonian, L_ops, tau + i * h, h)
        steps += n
        tau = target
        taus.append(tau)
        states.append(rho.copy())
    return Trajectory(np.array(taus), np.array(states), steps, 0)


def two_level_steady_state(omega, delta, gamma):
    """
    Steady state of a driven two-level atom (ground g, excited x) with
    H = -hbar (Omega |x><g| + h.c.) - hbar Delta |x><x| and decay x -> g at gamma.

    Args:
        omega (complex): Rabi frequency (rad/s).
        delta (float): Detuning (rad/s).
        gamma (float): Population decay rate (rad/s), > 0.

    Returns:
        tuple: (rho_xg, rho_xx) with rho_xg = i Omega / ((gamma/2 - i Delta)(1 + 2s)),
        rho_xx = s / (1 + 2s) and s = |Omega|^2 / (gamma^2/4 + Delta^2).

    Example:
        >>> two_level_steady_state(0.0, 0.0, 1.0)
        (0j, 0.0)
    """
    if not gamma > 0:
        raise DomainError(f"decay rate must be > 0, got {gamma}")
    s = abs(omega) ** 2 / (gamma ** 2 / 4 + delta ** 2)
    rho_xg = 1j * omega / ((gamma / 2 - 1j * delta) * (1 + 2 * s))
    return complex(rho_xg), s / (1 + 2 * s)


def check_density_matrix(rho):
    """Largest trace deviation, Hermiticity error and smallest eigenvalue."""
    rho = np.asarray(rho, dtype=complex)
    herm = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    return {
        "trace_deviation": float(np.max(np.abs(np.trace(rho, axis1=-2, axis2=-1) - 1.0))),
        "hermiticity_error": float(np.max(np.abs(rho - np.conj(np.swapaxes(rho, -1, -2))))),
        "min_eigenvalue": float(np.min(np.linalg.eigvalsh(herm))),
    }


__all__ = [
    "StepControl", "StepDecision", "Trajectory", "vec", "unvec", "dissipator",
    "liouvillian", "master_rhs", "etd_step", "rk4_reference", "adapt_step",
    "evolve", "rk4_evolve", "two_level_steady_state", "check_density_matrix",
]
