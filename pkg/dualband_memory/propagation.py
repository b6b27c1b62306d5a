"""
Propagation Module

Slowly-varying-envelope propagation of the two probe fields through the
medium in the retarded frame tau = t - z/c, where the wave equation reduces
to dE/dz = (i k / eps0) n d rho_lm(z, tau).

Contents:
- to_retarded_frame / from_retarded_frame
- source_term          polarization source of one probe mode
- march_z              RK4 bootstrap + AB4/AM4 predictor-corrector in z
- DriveSchedule        prescribed control envelopes and probe inputs
- TimeSeries           observables at the output face on a uniform tau grid
- co_integrate         atoms-then-fields splitting over adaptive global steps
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .atomic_model import C_LIGHT, EPSILON_0, build_hamiltonian
from .dynamics import adapt_step, dissipator, etd_step
from .errors import NumericalFailure

logger = logging.getLogger(__name__)

# cubic Lagrange weights for the source at the midpoints of the first three intervals
_MIDPOINT_WEIGHTS = (
    np.array([5.0, 15.0, -5.0, 1.0]) / 16,
    np.array([-1.0, 9.0, 9.0, -1.0]) / 16,
    np.array([1.0, -5.0, 15.0, 5.0]) / 16,
)
_AB4 = np.array([55.0, -59.0, 37.0, -9.0]) / 24
_AM4 = np.array([9.0, 19.0, -5.0, 1.0]) / 24

MODE_PROBES = {"a": "probe_a", "b": "probe_b"}
INTEGRITY_SAMPLES = 100


def to_retarded_frame(t, z):
    """tau = t - z/c."""
    return t - z / C_LIGHT


def from_retarded_frame(tau, z):
    """t = tau + z/c."""
    return tau + z / C_LIGHT


def source_term(coherence, wavenumber, density, dipole):
    """
    Polarization source (i k / eps0) n d rho_lm for one probe mode.

    Args:
        coherence (array_like): rho_lm at each grid point (l upper, m lower).
        wavenumber (float): Carrier wavenumber k (1/m).
        density (float): Atomic density n (1/m^3).
        dipole (float): Dipole moment d (C·m).

    Returns:
        np.ndarray: Source in V/m^2, zero wherever rho_lm is zero.
    """
    return (1j * wavenumber / EPSILON_0) * density * dipole * np.asarray(coherence, dtype=complex)


def _check_source(value, index):
    if not np.isfinite(value):
        raise NumericalFailure("non-finite propagation source", index=index)
    return value


def march_z(e_in, sources, h, n_points=None):
    """
    Integrate dE/dz = S from z = 0 across a uniform grid.

    The first three intervals use a fourth-order Runge-Kutta step; the rest
    use an Adams-Bashforth predictor followed by one Adams-Moulton correction.

    Args:
        e_in (complex): Boundary envelope at z = 0.
        sources: Array of S at every grid point, or a callable f(z, E).
        h (float): Grid spacing (m).
        n_points (int, optional): Number of grid points; required for a
            callable source, taken from the array otherwise.

    Returns:
        np.ndarray: Envelope at every grid point.

    Raises:
        NumericalFailure: If a source value is not finite (carries the z index).

    Example:
        >>> march_z(1.0, np.zeros(8), 1e-3)[-1]
        (1+0j)
    """
    if callable(sources):
        if n_points is None or n_points < 4:
            raise ValueError("a callable source needs n_points >= 4")
        return _march_callable(complex(e_in), sources, h, int(n_points))
    S = np.asarray(sources, dtype=complex)
    n = S.size
    if n < 4:
        raise ValueError(f"march_z needs at least 4 grid points, got {n}")
    bad = np.flatnonzero(~np.isfinite(S))
    if bad.size:
        raise NumericalFailure("non-finite propagation source", index=int(bad[0]))
    if not np.isfinite(e_in):
        raise NumericalFailure("non-finite boundary envelope", index=0)
    E = np.empty(n, dtype=complex)
    E[0] = e_in
    head = S[:4]
    for i in range(3):
        mid = _MIDPOINT_WEIGHTS[i] @ head
        E[i + 1] = E[i] + h / 6 * (S[i] + 4 * mid + S[i + 1])
    # a fixed source does not depend on E: the predicted value never enters the
    # corrector, which reads S[i+1] directly
    for i in range(3, n - 1):
        E[i + 1] = E[i] + h * (_AM4 @ np.array([S[i + 1], S[i], S[i - 1], S[i - 2]]))
    return E


def _march_callable(e_in, f, h, n):
    E = np.empty(n, dtype=complex)
    F = np.empty(n, dtype=complex)
    E[0] = e_in
    F[0] = _check_source(f(0.0, E[0]), 0)
    for i in range(min(3, n - 1)):
        z = i * h
        k1 = F[i]
        k2 = _check_source(f(z + h / 2, E[i] + h / 2 * k1), i)
        k3 = _check_source(f(z + h / 2, E[i] + h / 2 * k2), i)
        k4 = _check_source(f(z + h, E[i] + h * k3), i + 1)
        E[i + 1] = E[i] + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        F[i + 1] = _check_source(f(z + h, E[i + 1]), i + 1)
    for i in range(3, n - 1):
        z_next = (i + 1) * h
        predicted = E[i] + h * (_AB4 @ F[i - 3:i + 1][::-1])
        f_pred = _check_source(f(z_next, predicted), i + 1)
        E[i + 1] = E[i] + h * (_AM4 @ np.array([f_pred, F[i], F[i - 1], F[i - 2]]))
        F[i + 1] = _check_source(f(z_next, E[i + 1]), i + 1)
    return E


@dataclass(frozen=True)
class DriveSchedule:
    """
    Prescribed drives of one run.

    ``controls`` maps control name -> dimensionless envelope f(tau) (the Rabi
    frequency is rabi_peak * f). ``inputs`` maps probe mode ("a", "b") ->
    boundary field f(tau) in V/m at z = 0. Callables must accept numpy arrays.
    """
    controls: dict
    inputs: dict
    tau_end: float


@dataclass
class TimeSeries:
    """
    Observables at the output face z = L on a uniform tau grid.

    ``output`` and ``input`` map probe mode -> complex envelope (V/m);
    ``controls`` maps control name -> instantaneous Rabi frequency (rad/s).
    ``complete`` is False for a run that stopped before ``tau_end``.
    """
    tau: np.ndarray
    output: dict
    input: dict
    rho_cb: np.ndarray
    rho_ce: np.ndarray
    controls: dict
    tau_end: float
    complete: bool = True
    integrity: dict = field(default_factory=dict)
    steps: dict = field(default_factory=dict)

    def __len__(self):
        return self.tau.size


def _uniform_grid(tau_end, samples, last):
    grid = np.linspace(0.0, tau_end, int(samples))
    return grid[grid <= last * (1 + 1e-9)]


def _interp(grid, taus, values):
    values = np.asarray(values)
    return np.interp(grid, taus, values.real) + 1j * np.interp(grid, taus, values.imag)


def _evaluate(func, grid):
    out = np.asarray(func(grid), dtype=complex)
    return np.broadcast_to(out, grid.shape).copy()


def _resample(raw, schedule, couplings, samples, complete, integrity, steps):
    taus = np.asarray(raw["tau"])
    grid = _uniform_grid(schedule.tau_end, samples, taus[-1])
    output = {m: _interp(grid, taus, raw[f"E_{m}"]) for m in MODE_PROBES}
    inputs = {m: _evaluate(schedule.inputs[m], grid) if m in schedule.inputs
              else np.zeros(grid.size, dtype=complex) for m in MODE_PROBES}
    controls = {name: couplings[name].rabi_peak * _evaluate(f, grid).real
                for name, f in schedule.controls.items()}
    return TimeSeries(grid, output, inputs, _interp(grid, taus, raw["rho_cb"]),
                      _interp(grid, taus, raw["rho_ce"]), controls, schedule.tau_end,
                      complete, {k: np.array(v) for k, v in integrity.items()}, dict(steps))


def co_integrate(density, envelopes, schedule, ctrl, scheme, couplings, L_ops, medium_density,
                 samples=2000, workers=1):
    """
    Co-integrate the master equation and the probe propagation up to schedule.tau_end.

    Each accepted global step (1) advances every grid point with etd_step,
    probe envelopes inside the medium frozen at the step start and controls
    following the schedule, (2) recomputes the polarization sources and
    (3) marches both probe modes from their z = 0 boundary values.

    Args:
        density (DensityField): Initial state, updated in place.
        envelopes (EnvelopeField): Probe envelopes with modes "a" and "b",
            updated in place.
        schedule (DriveSchedule): Control envelopes and probe inputs.
        ctrl (StepControl): Adaptive step settings.
        scheme (LevelScheme): Level scheme.
        couplings (Mapping): name -> TransitionCoupling.
        L_ops (Sequence[np.ndarray]): Jump operators.
        medium_density (float): Atomic density n (1/m^3).
        samples (int): Points of the uniform output grid.
        workers (int): Threads for the atomic step.

    Returns:
        TimeSeries: complete observables.

    Raises:
        NumericalFailure: With ``partial`` set to the TimeSeries gathered so far.
    """
    D = dissipator(L_ops)
    h = envelopes.spacing
    tau_end = float(schedule.tau_end)
    controls = dict(schedule.controls)
    for name in couplings:
        if couplings[name].kind == "control":
            controls.setdefault(name, lambda t: np.zeros_like(np.asarray(t, dtype=float)))
    schedule = DriveSchedule(controls, dict(schedule.inputs), tau_end)
    c_idx, b_idx, e_idx = scheme.index("c"), scheme.index("b"), scheme.index("e")

    def boundary(mode, tau):
        f = schedule.inputs.get(mode)
        return complex(f(tau)) if f is not None else 0j

    def march_all(tau):
        for mode in envelopes.modes:
            l, m = envelopes.coherence_index(mode)
            S = source_term(density.data[:, l, m], envelopes.wavenumber(mode),
                            medium_density, envelopes.dipole(mode))
            envelopes.assign(mode, march_z(boundary(mode, tau), S, h), tau=tau)

    raw = {"tau": [], "E_a": [], "E_b": [], "rho_cb": [], "rho_ce": []}
    integrity = {"tau": [], "trace_deviation": [], "hermiticity_error": [], "min_eigenvalue": []}
    checks = list(np.linspace(0.0, tau_end, INTEGRITY_SAMPLES))

    def record(tau):
        raw["tau"].append(tau)
        raw["E_a"].append(envelopes.output("a"))
        raw["E_b"].append(envelopes.output("b"))
        raw["rho_cb"].append(density.data[-1, c_idx, b_idx])
        raw["rho_ce"].append(density.data[-1, c_idx, e_idx])
        while checks and checks[0] <= tau * (1 + 1e-12):
            checks.pop(0)
            diag = density.integrity()
            integrity["tau"].append(tau)
            for key, value in diag.items():
                integrity[key].append(value)

    steps = {"accepted": 0, "rejected": 0}
    tau, dt = 0.0, ctrl.dt_initial
    march_all(tau)
    record(tau)
    logger.info("co-integration: %d grid points, h=%.3e m, tau_end=%.3e s",
                len(density), h, tau_end)
    next_report = 0.1
    try:
        while tau_end - tau > 1e-12 * tau_end:
            step = min(dt, tau_end - tau)
            drives = dict(controls)
            drives["probe_a"] = envelopes["a"].copy()
            drives["probe_b"] = envelopes["b"].copy()

            def hamiltonian(t, drives=drives):
                return build_hamiltonian(scheme, couplings, drives, t)

            candidate, err = etd_step(density.data, hamiltonian, L_ops, tau, step, D=D,
                                      workers=workers)
            decision = adapt_step(err, step, ctrl, float(np.max(np.abs(density.data))), tau=tau)
            logger.debug("tau=%.6e dt=%.3e err=%.3e %s", tau, step, err,
                         "accept" if decision.accepted else "reject")
            if not decision.accepted:
                steps["rejected"] += 1
                dt = decision.dt_next
                continue
            density.data = candidate
            tau = tau + step
            steps["accepted"] += 1
            if step == dt or decision.dt_next < dt:
                dt = decision.dt_next
            march_all(tau)
            record(tau)
            if tau >= next_report * tau_end:
                logger.info("progress %3.0f%% (tau=%.3f us, %d steps, %d rejected)",
                            100 * tau / tau_end, tau * 1e6, steps["accepted"], steps["rejected"])
                while next_report * tau_end <= tau:
                    next_report += 0.1
    except NumericalFailure as exc:
        exc.partial = _resample(raw, schedule, couplings, samples, False, integrity, steps)
        raise
    return _resample(raw, schedule, couplings, samples, True, integrity, steps)


__all__ = [
    "to_retarded_frame", "from_retarded_frame", "source_term", "march_z",
    "DriveSchedule", "TimeSeries", "co_integrate", "MODE_PROBES",
]
