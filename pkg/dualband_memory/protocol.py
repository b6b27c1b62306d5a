"""
Protocol Module

Pulse shapes, storage/retrieval scenarios and memory metrics.

Contents:
- PulseShape / envelope           gaussian, sigmoid_off, sigmoid_on, constant, product
- Scenario / PRESETS              the six write/read configurations
- make_scenario / list_presets
- control_shape / probe_shape / build_schedule
- MemoryMetrics / compute_metrics / pulse_delay

Timing defaults (stored in seconds):
    probe centre t0 = 4.3 us, width sigma = 0.5 us,
    controls off at 5.0 us and back on at 13.0 us (edge width 0.1 us),
    total window 20 us.
"""

import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from types import MappingProxyType

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import expit

from .atomic_model import CONTROLS, field_amplitude
from .errors import ConfigurationError, DomainError, TruncatedSeriesError
from .propagation import DriveSchedule

logger = logging.getLogger(__name__)

US = 1e-6
PW = 1e-12
GUARD_WIDTHS = 5.0
SHAPE_KINDS = ("gaussian", "sigmoid_off", "sigmoid_on", "constant", "product")

WRITE_SETS = {
    "a": frozenset({"omega3", "omega"}),
    "b": frozenset({"omega3", "omega1", "omega2"}),
}
READ_SETS = (
    frozenset({"omega3", "omega"}),
    frozenset({"omega3", "omega1", "omega2"}),
    frozenset(CONTROLS),
)
# controls a retrieved mode needs besides omega3
MODE_READ_CONTROLS = {"a": frozenset({"omega"}), "b": frozenset({"omega1", "omega2"})}


@dataclass(frozen=True)
class PulseShape:
    """
    Dimensionless pulse envelope.

    ``inverted`` turns f into 1 - f before ``amplitude`` is applied; a
    ``product`` multiplies its ``factors``.

    Example:
        >>> envelope(PulseShape("gaussian", t0=4.3e-6, sigma=0.5e-6), 4.3e-6)
        1.0
    """
    kind: str
    t0: float = 0.0
    sigma: float = 1.0
    t_switch: float = 0.0
    sigma_t: float = 1.0
    amplitude: float = 1.0
    inverted: bool = False
    factors: tuple = ()

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ConfigurationError(f"unknown pulse kind {self.kind!r}", key="shape.kind")
        if not self.sigma > 0:
            raise ConfigurationError("sigma must be > 0", key="scenario.overrides.sigma_us")
        if not self.sigma_t > 0:
            raise ConfigurationError("sigma_t must be > 0", key="scenario.overrides.sigma_t_us")
        if self.kind == "product" and not self.factors:
            raise ConfigurationError("a product shape needs factors", key="shape.factors")


def envelope(shape: PulseShape, t):
    """
    Evaluate a pulse shape at time(s) t (s).

    Args:
        shape (PulseShape): The shape.
        t (float or np.ndarray): Time in seconds.

    Returns:
        float or np.ndarray: gaussian exp(-(t - t0)^2 / (2 sigma^2));
        sigmoid_off 1/(1 + exp((t - t_off)/sigma_t));
        sigmoid_on 1 - 1/(1 + exp((t - t_on)/sigma_t));
        constant 1; product of the factor shapes.

    Example:
        >>> envelope(PulseShape("sigmoid_off", t_switch=5e-6, sigma_t=1e-7), 5e-6)
        0.5
    """
    t_arr = np.asarray(t, dtype=float)
    if shape.kind == "gaussian":
        value = np.exp(-((t_arr - shape.t0) ** 2) / (2 * shape.sigma ** 2))
    elif shape.kind == "sigmoid_off":
        value = expit(-(t_arr - shape.t_switch) / shape.sigma_t)
    elif shape.kind == "sigmoid_on":
        value = 1.0 - expit(-(t_arr - shape.t_switch) / shape.sigma_t)
    elif shape.kind == "constant":
        value = np.ones_like(t_arr)
    else:
        value = np.ones_like(t_arr)
        for factor in shape.factors:
            value = value * envelope(factor, t_arr)
    if shape.inverted:
        value = 1.0 - value
    value = shape.amplitude * value
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class Scenario:
    """
    One storage/retrieval experiment (SI units).

    Raises:
        ConfigurationError: If the control sets do not match the input mode,
            omega3 is missing, or the timing is inconsistent.
    """
    name: str
    input_mode: str
    write_controls: frozenset
    read_controls: frozenset
    t0: float = 4.3 * US
    sigma: float = 0.5 * US
    t_off: float = 5.0 * US
    t_on: float = 13.0 * US
    sigma_t: float = 0.1 * US
    tau_end: float = 20.0 * US
    probe_peak_power: float = 280 * PW

    def __post_init__(self):
        object.__setattr__(self, "write_controls", frozenset(self.write_controls))
        object.__setattr__(self, "read_controls", frozenset(self.read_controls))
        key = "scenario.overrides"
        if self.input_mode not in WRITE_SETS:
            raise ConfigurationError(f"input_mode must be 'a' or 'b', got {self.input_mode!r}",
                                     key=f"{key}.input_mode")
        if self.write_controls != WRITE_SETS[self.input_mode]:
            raise ConfigurationError(
                f"input mode {self.input_mode} is written with {sorted(WRITE_SETS[self.input_mode])}",
                key=f"{key}.write_controls")
        if self.read_controls not in READ_SETS:
            raise ConfigurationError(
                f"read controls {sorted(self.read_controls)} are not a supported set",
                key=f"{key}.read_controls")
        if not self.sigma > 0:
            raise ConfigurationError("sigma must be > 0", key=f"{key}.sigma_us")
        if not self.sigma_t > 0:
            raise ConfigurationError("sigma_t must be > 0", key=f"{key}.sigma_t_us")
        if not 0 <= self.t_off < self.t_on < self.tau_end:
            raise ConfigurationError("need 0 <= t_off < t_on < tau_end", key=f"{key}.t_on_us")
        if not 0 <= self.t0 <= self.tau_end:
            raise ConfigurationError("probe centre must lie inside the window", key=f"{key}.t0_us")
        if not self.probe_peak_power >= 0:
            raise ConfigurationError("probe power must be >= 0",
                                     key=f"{key}.probe_peak_power_pW")

    @property
    def storage_window(self):
        """Guarded storage window [t_off + 5 sigma_t, t_on - 5 sigma_t]."""
        return (self.t_off + GUARD_WIDTHS * self.sigma_t,
                self.t_on - GUARD_WIDTHS * self.sigma_t)

    def retrieved_modes(self):
        return tuple(m for m, need in MODE_READ_CONTROLS.items() if need <= self.read_controls)


def _preset(name, mode, read, description):
    power = 280 * PW if mode == "a" else 160 * PW
    return name, (Scenario(name, mode, WRITE_SETS[mode], frozenset(read), probe_peak_power=power),
                  description)


_PRESET_TABLE = dict([
    _preset("fig2a", "a", {"omega3", "omega"}, "795 nm in, 795 nm out"),
    _preset("fig2b", "a", {"omega3", "omega1", "omega2"}, "795 nm in, 1324 nm out"),
    _preset("fig2c", "a", CONTROLS, "795 nm in, split into both bands"),
    _preset("fig3a", "b", {"omega3", "omega1", "omega2"}, "1324 nm in, 1324 nm out"),
    _preset("fig3b", "b", {"omega3", "omega"}, "1324 nm in, 795 nm out"),
    _preset("fig3c", "b", CONTROLS, "1324 nm in, split into both bands"),
])
PRESETS = MappingProxyType({name: sc for name, (sc, _) in _PRESET_TABLE.items()})

OVERRIDABLE = tuple(f.name for f in fields(Scenario) if f.name != "name")


def list_presets():
    """
    Names and one-line descriptions of the built-in scenarios.

    Example:
        >>> [name for name, _ in list_presets()][:2]
        ['fig2a', 'fig2b']
    """
    return [(name, desc) for name, (_, desc) in _PRESET_TABLE.items()]


def make_scenario(preset, overrides=None):
    """
    Scenario for a preset with optional field overrides (SI units).

    Args:
        preset (str): One of PRESETS.
        overrides (Mapping, optional): Scenario field -> value.

    Returns:
        Scenario: a new value; presets are never modified.

    Raises:
        ConfigurationError: Unknown preset, unknown field or invalid result.

    Example:
        >>> sc = make_scenario("fig3a")
        >>> (sc.input_mode, round(sc.probe_peak_power * 1e12))
        ('b', 160)
    """
    if preset not in PRESETS:
        raise ConfigurationError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}",
                                 key="scenario.preset")
    overrides = dict(overrides or {})
    for key in overrides:
        if key not in OVERRIDABLE:
            raise ConfigurationError(f"unknown scenario field {key!r}",
                                     key=f"scenario.overrides.{key}")
    return replace(PRESETS[preset], **overrides)


def control_shape(scenario: Scenario, name):
    """
    Control profile of one control field.

    Written and read: 1 - (1 - f_off)(1 - f_on), close to 1 outside the
    storage interval. Written only: sigmoid_off. Read only: sigmoid_on.
    Neither: zero.
    """
    off = PulseShape("sigmoid_off", t_switch=scenario.t_off, sigma_t=scenario.sigma_t)
    on = PulseShape("sigmoid_on", t_switch=scenario.t_on, sigma_t=scenario.sigma_t)
    write = name in scenario.write_controls
    read = name in scenario.read_controls
    if write and read:
        return PulseShape("product", inverted=True, sigma_t=scenario.sigma_t,
                          factors=(replace(off, inverted=True), replace(on, inverted=True)))
    if write:
        return off
    if read:
        return on
    return PulseShape("constant", amplitude=0.0)


def probe_shape(scenario: Scenario):
    return PulseShape("gaussian", t0=scenario.t0, sigma=scenario.sigma)


def build_schedule(scenario: Scenario, beam_diameter):
    """
    Drives of a scenario: control envelopes for all four controls and a
    Gaussian input in the scenario's probe mode with peak power
    ``probe_peak_power`` over the beam area.
    """
    controls = {}
    for name in CONTROLS:
        shape = control_shape(scenario, name)
        controls[name] = lambda t, shape=shape: envelope(shape, t)
    e0 = field_amplitude(scenario.probe_peak_power, beam_diameter)
    shape = probe_shape(scenario)
    inputs = {scenario.input_mode: lambda t: e0 * envelope(shape, t)}
    return DriveSchedule(controls, inputs, scenario.tau_end)


@dataclass(frozen=True)
class MemoryMetrics:
    """
    Energies are trapezoid integrals of |E|^2 on the output grid, relative
    to the input pulse energy.
    """
    leakage: float
    retrieval_efficiency: dict
    spinwave_plateau_drift: float
    splitting_ratio: float
    transmitted_fraction: float
    storage_peak_ratio: float
    retrieval_peak_tau: dict

    def to_dict(self):
        return asdict(self)


def _energy(tau, values, mask=None):
    y = np.abs(values) ** 2
    if mask is not None:
        tau, y = tau[mask], y[mask]
    if tau.size < 2:
        return 0.0
    return float(trapezoid(y, tau))


def compute_metrics(ts, scenario: Scenario):
    """
    Memory metrics of a complete run.

    Raises:
        TruncatedSeriesError: If the series stops before the scenario end.
    """
    tau = np.asarray(ts.tau)
    if not getattr(ts, "complete", True) or tau.size < 2 or \
            tau[-1] < scenario.tau_end * (1 - 1e-9):
        raise TruncatedSeriesError(
            f"series ends at {tau[-1] if tau.size else 0:.6e} s before {scenario.tau_end:.6e} s")
    e_in = np.asarray(ts.input[scenario.input_mode])
    energy_in = _energy(tau, e_in)
    if energy_in <= 0:
        logger.warning("input pulse carries no energy; metrics are reported as zero")
    scale = energy_in if energy_in > 0 else 1.0
    before = tau < scenario.t_on
    after = tau >= scenario.t_on
    out = {m: np.asarray(v) for m, v in ts.output.items()}

    leakage = sum(_energy(tau, v, before) for v in out.values()) / scale
    retrieval = {m: _energy(tau, v, after) / scale for m, v in out.items()}
    transmitted = sum(_energy(tau, v) for v in out.values()) / scale

    lo, hi = scenario.storage_window
    window = (tau >= lo) & (tau <= hi)
    peak_in = float(np.max(np.abs(e_in))) if e_in.size else 0.0
    if np.any(window) and peak_in > 0:
        storage_peak = max(float(np.max(np.abs(v[window]))) for v in out.values()) / peak_in
    else:
        storage_peak = 0.0

    spin = np.abs(np.asarray(ts.rho_cb))[window]
    if spin.size < 2 or spin[0] == 0:
        drift = 0.0 if spin.size < 2 or np.all(spin == 0) else math.inf
    else:
        drift = float(abs(spin[-1] - spin[0]) / spin[0])

    if retrieval.get("b", 0.0) > 0:
        ratio = retrieval.get("a", 0.0) / retrieval["b"]
    else:
        ratio = math.inf if retrieval.get("a", 0.0) > 0 else math.nan

    peaks = {}
    for m, v in out.items():
        tail = np.abs(v[after])
        peaks[m] = float(tau[after][np.argmax(tail)]) if tail.size and tail.max() > 0 else None

    return MemoryMetrics(float(leakage), retrieval, drift, float(ratio), float(transmitted),
                         float(storage_peak), peaks)


def pulse_delay(tau, e_in, e_out):
    """
    Delay between the intensity centroids of two pulses.

    Example:
        >>> t = np.linspace(0, 10, 1001)
        >>> g = lambda c: np.exp(-(t - c) ** 2)
        >>> round(pulse_delay(t, g(4.0), g(5.0)), 6)
        1.0
    """
    tau = np.asarray(tau, dtype=float)
    w_in = np.abs(np.asarray(e_in)) ** 2
    w_out = np.abs(np.asarray(e_out)) ** 2
    n_in, n_out = trapezoid(w_in, tau), trapezoid(w_out, tau)
    if n_in <= 0 or n_out <= 0:
        raise DomainError("pulse delay needs pulses with nonzero energy")
    return float(trapezoid(tau * w_out, tau) / n_out - trapezoid(tau * w_in, tau) / n_in)


__all__ = [
    "PulseShape", "envelope", "Scenario", "PRESETS", "OVERRIDABLE", "list_presets",
    "make_scenario", "control_shape", "probe_shape", "build_schedule",
    "MemoryMetrics", "compute_metrics", "pulse_delay", "WRITE_SETS", "READ_SETS",
]
