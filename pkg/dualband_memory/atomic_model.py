"""
Atomic Model Module

Six-level 87Rb structure used by the dual-wavelength memory simulation:
level labels, optical couplings, decay channels, unit conversions, the
real-space rotating-frame Hamiltonian and the Lindblad jump operators.

Contents:
- LevelScheme, DecayChannel, TransitionCoupling, MediumConfig
- field_amplitude / power_to_rabi / collective_coupling
- build_coupling_graph / check_closure / rotating_frame_energies
- make_couplings / make_scheme
- build_hamiltonian / build_lindblad_ops

Levels (index order):
    b = 5S1/2 F=1, c = 5S1/2 F=2, a = 5P1/2 F=1,
    e = 5P1/2 F=2, f = 5P3/2 F=1, d = 6S1/2 F=1

Couplings (lower, upper):
    probe_a (b, a) 795 nm     probe_b (e, d) 1324 nm
    omega   (c, a)            omega1  (c, f)
    omega2  (f, d)            omega3  (b, e)

Hamiltonian convention: for a coupling (l, u) with instantaneous Rabi
frequency Omega, H[u, l] = -hbar*Omega and H[l, u] = -hbar*conj(Omega).
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
from scipy import constants

from .errors import ConfigurationError, DomainError
from .graphs import CouplingGraph, DecayGraph

logger = logging.getLogger(__name__)

HBAR = constants.hbar
EPSILON_0 = constants.epsilon_0
C_LIGHT = constants.c

LEVELS = ("b", "c", "a", "e", "f", "d")
LEVEL_INDEX = {label: i for i, label in enumerate(LEVELS)}
LEVEL_NAMES = {
    "b": "5S1/2 F=1",
    "c": "5S1/2 F=2",
    "a": "5P1/2 F=1",
    "e": "5P1/2 F=2",
    "f": "5P3/2 F=1",
    "d": "6S1/2 F=1",
}

PROBES = ("probe_a", "probe_b")
CONTROLS = ("omega", "omega1", "omega2", "omega3")

# name -> (lower, upper)
TRANSITIONS = {
    "probe_a": ("b", "a"),
    "probe_b": ("e", "d"),
    "omega": ("c", "a"),
    "omega1": ("c", "f"),
    "omega2": ("f", "d"),
    "omega3": ("b", "e"),
}
ALLOWED_COUPLINGS = {frozenset(pair): name for name, pair in TRANSITIONS.items()}

# Effective (isotropic, reduced/sqrt(3)) dipole moments and vacuum wavelengths.
# D1/D2 values: D. A. Steck, "Rubidium 87 D Line Data"; 6S-5P matrix elements
# from Safronova et al., Phys. Rev. A 69, 022509 (2004).
RB87_TRANSITIONS = {
    "probe_a": {"wavelength_nm": 794.979, "dipole_Cm": 1.4648e-29},
    "probe_b": {"wavelength_nm": 1323.88, "dipole_Cm": 2.0314e-29},
    "omega": {"wavelength_nm": 794.979, "dipole_Cm": 1.4648e-29},
    "omega1": {"wavelength_nm": 780.241, "dipole_Cm": 2.0692e-29},
    "omega2": {"wavelength_nm": 1366.88, "dipole_Cm": 2.9601e-29},
    "omega3": {"wavelength_nm": 794.979, "dipole_Cm": 1.4648e-29},
}
# Gamma / 2pi in MHz; 6S1/2 from its 45.57 ns lifetime.
RB87_DECAY_MHZ = {"a": 5.746, "e": 5.746, "f": 6.0666, "d": 3.4925}
RB87_BRANCHING = {
    "a": {"b": 0.5, "c": 0.5},
    "e": {"b": 0.5, "c": 0.5},
    "f": {"b": 0.5, "c": 0.5},
    "d": {"a": 1 / 3, "e": 1 / 3, "f": 1 / 3},
}

_BRANCHING_TOL = 1e-12


@dataclass(frozen=True)
class DecayChannel:
    """Spontaneous emission ``upper -> lower`` at total rate ``rate`` (rad/s)."""
    upper: str
    lower: str
    rate: float
    branching: float


@dataclass(frozen=True)
class LevelScheme:
    """
    The six-level model: ordered labels, rotating-frame energies and decay channels.

    Parameters
    ----------
    levels : tuple of str
        Level labels in matrix index order.
    rotating_frame_energy : tuple of float
        Angular frequency of each level in the rotating frame (rad/s).
    decay_channels : tuple of DecayChannel
        Emission channels; branching out of each emitting level sums to 1.

    Raises
    ------
    ConfigurationError
        If the labels are not the six model levels, a rate is negative, a
        metastable level decays, or branching fractions do not sum to 1.
    """
    levels: tuple = LEVELS
    rotating_frame_energy: tuple = (0.0,) * 6
    decay_channels: tuple = ()
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.levels) != 6 or set(self.levels) != set(LEVELS):
            raise ConfigurationError(
                f"expected the six levels {LEVELS}, got {self.levels}", key="levels")
        if len(self.rotating_frame_energy) != 6:
            raise ConfigurationError("one rotating-frame energy per level is required",
                                     key="rotating_frame_energy")
        if not all(math.isfinite(x) for x in self.rotating_frame_energy):
            raise ConfigurationError("rotating-frame energies must be finite",
                                     key="rotating_frame_energy")
        object.__setattr__(self, "_index", {label: i for i, label in enumerate(self.levels)})

        graph = DecayGraph()
        for ch in self.decay_channels:
            for label in (ch.upper, ch.lower):
                if label not in self._index:
                    raise ConfigurationError(f"unknown level '{label}' in decay channel",
                                             key=f"atomic_data.branching.{ch.upper}")
            if ch.upper in ("b", "c") and ch.rate * ch.branching > 0:
                raise ConfigurationError(f"metastable level '{ch.upper}' must not decay",
                                         key=f"atomic_data.decay_MHz.{ch.upper}")
            try:
                graph.add_channel(ch.upper, ch.lower, ch.rate, ch.branching)
            except ValueError as exc:
                raise ConfigurationError(str(exc),
                                         key=f"atomic_data.branching.{ch.upper}") from exc
        for upper in graph.emitters():
            total = graph.branching_sum(upper)
            if abs(total - 1.0) > _BRANCHING_TOL:
                raise ConfigurationError(
                    f"branching fractions out of '{upper}' sum to {total!r}, expected 1",
                    key=f"atomic_data.branching.{upper}")
        rates = {}
        for ch in self.decay_channels:
            if rates.setdefault(ch.upper, ch.rate) != ch.rate:
                raise ConfigurationError(
                    f"channels out of '{ch.upper}' disagree on the total rate",
                    key=f"atomic_data.decay_MHz.{ch.upper}")

    def index(self, label):
        try:
            return self._index[label]
        except KeyError:
            raise ConfigurationError(f"unknown level '{label}'", key="levels") from None

    def energy(self, label):
        return self.rotating_frame_energy[self.index(label)]

    def total_decay_rate(self, label):
        return sum(ch.rate * ch.branching for ch in self.decay_channels if ch.upper == label)


@dataclass(frozen=True)
class TransitionCoupling:
    """
    One driven transition.

    ``rabi_peak`` is the Rabi frequency (rad/s) at unit envelope. For controls
    it is the peak Rabi frequency; for probes it is ``d / (2 hbar)`` so that a
    field envelope in V/m maps onto a Rabi frequency.
    """
    name: str
    lower: str
    upper: str
    kind: str
    wavelength: float
    dipole_moment: float
    rabi_peak: float
    detuning: float = 0.0

    def __post_init__(self):
        if self.kind not in ("control", "probe"):
            raise ConfigurationError(f"kind must be 'control' or 'probe', got {self.kind!r}",
                                     key=f"couplings.{self.name}.kind")
        if not self.wavelength > 0:
            raise ConfigurationError("wavelength must be > 0",
                                     key=f"atomic_data.transitions.{self.name}.wavelength_nm")
        if not self.dipole_moment > 0:
            raise ConfigurationError("dipole moment must be > 0",
                                     key=f"atomic_data.transitions.{self.name}.dipole_Cm")

    @property
    def transition(self):
        return (self.lower, self.upper)

    @property
    def wavenumber(self):
        return 2 * math.pi / self.wavelength

    @property
    def angular_frequency(self):
        return C_LIGHT * self.wavenumber


@dataclass(frozen=True)
class MediumConfig:
    """
    The atomic vapour: density (atoms/m^3), length (m), beam diameter (m) and
    the number of spatial grid points. No Doppler averaging.
    """
    density: float = 4e17
    length: float = 0.014
    beam_diameter: float = 1.6e-3
    spatial_points: int = 100

    def __post_init__(self):
        if not self.density > 0:
            raise ConfigurationError("density must be > 0", key="medium.density_m3")
        if not self.length > 0:
            raise ConfigurationError("length must be > 0", key="medium.length_cm")
        if not self.beam_diameter > 0:
            raise ConfigurationError("beam diameter must be > 0", key="medium.beam_diameter_mm")
        if int(self.spatial_points) != self.spatial_points or self.spatial_points < 8:
            raise ConfigurationError("spatial_points must be an integer >= 8",
                                     key="medium.spatial_points")

    @property
    def beam_area(self):
        return math.pi * (self.beam_diameter / 2) ** 2

    @property
    def spacing(self):
        return self.length / (self.spatial_points - 1)

    def grid(self):
        return np.linspace(0.0, self.length, int(self.spatial_points))


def field_amplitude(power: float, beam_diameter: float) -> float:
    """
    Peak electric field of a beam of given power spread over a disc.

    Args:
        power (float): Beam power in W (>= 0).
        beam_diameter (float): Beam diameter in m (> 0).

    Returns:
        float: E0 = sqrt(2 P / (A eps0 c)) in V/m, A = pi (diameter/2)^2.

    Example:
        >>> round(field_amplitude(2e-4, 1.6e-3), 2)
        273.77
    """
    if not power >= 0:
        raise DomainError(f"power must be >= 0, got {power}")
    if not beam_diameter > 0:
        raise DomainError(f"beam diameter must be > 0, got {beam_diameter}")
    area = math.pi * (beam_diameter / 2) ** 2
    return math.sqrt(2 * power / (area * EPSILON_0 * C_LIGHT))


def power_to_rabi(power: float, beam_diameter: float, dipole_moment: float,
                  wavelength: float) -> float:
    """
    Convert a beam power into a Rabi frequency.

    Args:
        power (float): Beam power in W. Zero gives zero.
        beam_diameter (float): Beam diameter in m.
        dipole_moment (float): Transition dipole moment in C·m.
        wavelength (float): Transition wavelength in m (validated only).

    Returns:
        float: Omega = d E0 / (2 hbar) in rad/s.

    Raises:
        DomainError: Negative power or non-positive diameter, dipole or wavelength.

    Example:
        >>> power_to_rabi(0.0, 1.6e-3, 1.4648e-29, 795e-9)
        0.0
    """
    if not dipole_moment > 0:
        raise DomainError(f"dipole moment must be > 0, got {dipole_moment}")
    if not wavelength > 0:
        raise DomainError(f"wavelength must be > 0, got {wavelength}")
    return dipole_moment * field_amplitude(power, beam_diameter) / (2 * HBAR)


def collective_coupling(density: float, wavelength: float, dipole_moment: float) -> float:
    """
    Collective probe coupling g = sqrt(omega n d^2 / (2 eps0 hbar)) in rad/s.

    With this g the slow-light group velocity of the propagation equation is
    c * Omega^2 / (g^2 + Omega^2), i.e. the polariton formula with Omega_1 = 0.
    """
    if not density > 0 or not wavelength > 0 or not dipole_moment > 0:
        raise DomainError("density, wavelength and dipole moment must be > 0")
    omega = 2 * math.pi * C_LIGHT / wavelength
    return math.sqrt(omega * density * dipole_moment ** 2 / (2 * EPSILON_0 * HBAR))


def build_coupling_graph(couplings):
    """
    Validate a set of couplings against the six-level scheme.

    Raises:
        ConfigurationError: Unknown edge, duplicated edge or missing coupling.
    """
    graph = CouplingGraph(ALLOWED_COUPLINGS)
    for c in _as_list(couplings):
        try:
            graph.add_coupling(c.name, c.lower, c.upper)
        except ValueError as exc:
            raise ConfigurationError(str(exc), key=f"couplings.{c.name}") from exc
    if not graph.is_complete():
        raise ConfigurationError(f"missing couplings: {', '.join(graph.missing())}",
                                 key="couplings")
    return graph


def check_closure(couplings, tol=1e-9):
    """
    Enforce the loop-closure constraints Delta_L = 0 and Delta_1 + Delta_2 = 0.

    The tolerance is relative to the largest control detuning.
    """
    by_name = _as_dict(couplings)
    scale = max([abs(by_name[n].detuning) for n in CONTROLS if n in by_name] + [1.0])
    if "omega" in by_name and abs(by_name["omega"].detuning) > tol * scale:
        raise ConfigurationError("closure requires Delta_L = 0",
                                 key="controls.omega.detuning_MHz")
    if "omega1" in by_name and "omega2" in by_name:
        s = by_name["omega1"].detuning + by_name["omega2"].detuning
        if abs(s) > tol * scale:
            raise ConfigurationError("closure requires Delta_1 + Delta_2 = 0",
                                     key="controls.omega2.detuning_MHz")


def rotating_frame_energies(couplings, omega_c=0.0):
    """
    Assign rotating-frame energies by walking the control couplings.

    |b> sits at 0 and |c> at ``omega_c``; every control (l, u, Delta) places
    E_u = E_l - Delta. Probe detunings are whatever closes the loop
    b -> e -> d -> f -> c -> a -> b.

    Returns:
        dict: level label -> angular frequency (rad/s).

    Example:
        >>> cs = make_couplings()
        >>> e = rotating_frame_energies(cs)
        >>> e["e"] == -cs["omega3"].detuning
        True
    """
    by_name = _as_dict(couplings)
    graph = build_coupling_graph(by_name.values())
    energy = {"b": 0.0, "c": float(omega_c)}
    for parent, child, name in graph.walk(["b", "c"], labels=set(CONTROLS)):
        c = by_name[name]
        if child == c.upper:
            energy[child] = energy[parent] - c.detuning
        else:
            energy[child] = energy[parent] + c.detuning
    unreached = [label for label in LEVELS if label not in energy]
    if unreached:
        raise ConfigurationError(f"levels not reached by controls: {unreached}", key="couplings")
    return energy


def make_couplings(transitions=None, controls=None, beam_diameter=1.6e-3):
    """
    Build the six couplings from an atomic data table and control settings.

    Args:
        transitions (Mapping, optional): name -> {"wavelength_nm", "dipole_Cm"};
            defaults to RB87_TRANSITIONS.
        controls (Mapping, optional): control name -> {"power": W, "detuning": rad/s};
            defaults to the reference experiment.
        beam_diameter (float): Common beam diameter in m.

    Returns:
        dict: name -> TransitionCoupling; probe detunings set for two-photon
        resonance with |b> at 0 and |c> at 0.
    """
    transitions = RB87_TRANSITIONS if transitions is None else transitions
    controls = default_controls() if controls is None else controls
    couplings = {}
    for name, (lower, upper) in TRANSITIONS.items():
        data = transitions[name]
        wavelength = data["wavelength_nm"] * 1e-9
        dipole = data["dipole_Cm"]
        if name in PROBES:
            couplings[name] = TransitionCoupling(name, lower, upper, "probe", wavelength,
                                                 dipole, dipole / (2 * HBAR))
        else:
            setting = controls[name]
            rabi = power_to_rabi(setting["power"], beam_diameter, dipole, wavelength)
            couplings[name] = TransitionCoupling(name, lower, upper, "control", wavelength,
                                                 dipole, rabi, float(setting["detuning"]))
    return with_probe_detunings(couplings, rotating_frame_energies(couplings))


def with_probe_detunings(couplings, energy):
    """Return a copy of ``couplings`` whose probe detunings match ``energy``."""
    out = dict(_as_dict(couplings))
    for name in PROBES:
        if name in out:
            c = out[name]
            out[name] = replace(c, detuning=energy[c.lower] - energy[c.upper])
    return out


def default_controls():
    """Control powers (W) and detunings (rad/s) of the reference experiment."""
    two_pi_mhz = 2 * math.pi * 1e6
    return {
        "omega": {"power": 4.14e-3, "detuning": 0.0},
        "omega1": {"power": 0.12e-3, "detuning": 31.83 * two_pi_mhz},
        "omega2": {"power": 1.09e-3, "detuning": -31.83 * two_pi_mhz},
        "omega3": {"power": 0.20e-3, "detuning": 31.83 * two_pi_mhz},
    }


def make_decay_channels(decay_rates=None, branching=None):
    """
    Decay channels from total rates (rad/s) and branching tables.

    Defaults: 87Rb natural linewidths with equal branching among the modelled
    lower levels.
    """
    if decay_rates is None:
        decay_rates = {k: 2 * math.pi * 1e6 * v for k, v in RB87_DECAY_MHZ.items()}
    branching = RB87_BRANCHING if branching is None else branching
    channels = []
    for upper in LEVELS:
        rate = decay_rates.get(upper, 0.0)
        for lower, fraction in branching.get(upper, {}).items():
            channels.append(DecayChannel(upper, lower, float(rate), float(fraction)))
    return tuple(channels)


def make_scheme(couplings, decay_channels=None, omega_c=0.0):
    """Assemble a LevelScheme whose diagonal follows the coupling chain."""
    energy = rotating_frame_energies(couplings, omega_c)
    channels = make_decay_channels() if decay_channels is None else tuple(decay_channels)
    return LevelScheme(LEVELS, tuple(energy[label] for label in LEVELS), channels)


def default_couplings():
    """Couplings of the reference experiment with the 87Rb data table."""
    return make_couplings()


def default_scheme():
    """Level scheme of the reference experiment (|c> at zero, no Stark compensation)."""
    return make_scheme(default_couplings())


def build_hamiltonian(scheme: LevelScheme, couplings, envelopes: Mapping, tau: float = 0.0):
    """
    Real-space rotating-frame Hamiltonian (J) at retarded time ``tau``.

    Args:
        scheme (LevelScheme): Level scheme providing the diagonal.
        couplings: Iterable or mapping of TransitionCoupling.
        envelopes (Mapping): coupling name -> envelope value, array of values
            (one per grid point) or callable of ``tau``. The instantaneous Rabi
            frequency is ``coupling.rabi_peak * envelope``.
        tau (float): Time at which callables are evaluated (s).

    Returns:
        np.ndarray: (6, 6) Hermitian matrix, or (N, 6, 6) when any envelope is
        an array of length N.

    Raises:
        ConfigurationError: If a declared coupling has no envelope.
    """
    couplings = _as_list(couplings)
    values = {}
    for c in couplings:
        if c.name not in envelopes:
            raise ConfigurationError(f"missing envelope for coupling '{c.name}'",
                                     key=f"envelopes.{c.name}")
        v = envelopes[c.name]
        if callable(v):
            v = v(tau)
        values[c.name] = np.asarray(v, dtype=complex)
    shape = np.broadcast_shapes(*(v.shape for v in values.values())) if values else ()
    H = np.zeros(shape + (6, 6), dtype=complex)
    diag = np.arange(6)
    H[..., diag, diag] = HBAR * np.asarray(scheme.rotating_frame_energy, dtype=float)
    for c in couplings:
        u, l = scheme.index(c.upper), scheme.index(c.lower)
        rabi = c.rabi_peak * values[c.name]
        H[..., u, l] += -HBAR * rabi
        H[..., l, u] += -HBAR * np.conj(rabi)
    return H


def build_lindblad_ops(scheme: LevelScheme):
    """
    Jump operators L = sqrt(Gamma * branching / 2) |lower><upper|.

    The factor 1/2 matches the dissipator 2 L rho L^+ - {L^+ L, rho}, so each
    excited level loses population at its configured total rate.

    Example:
        >>> s = LevelScheme(decay_channels=(DecayChannel("a", "b", 2.0, 1.0),))
        >>> ops = build_lindblad_ops(s)
        >>> float(ops[0][0, 2].real)
        1.0
    """
    ops = []
    for ch in scheme.decay_channels:
        strength = ch.rate * ch.branching
        if strength <= 0:
            continue
        L = np.zeros((6, 6), dtype=complex)
        L[scheme.index(ch.lower), scheme.index(ch.upper)] = math.sqrt(strength / 2)
        ops.append(L)
    return ops


def coherence_indices(scheme: LevelScheme, coupling: TransitionCoupling):
    """Matrix indices (upper, lower) of the coherence that sources a probe."""
    return scheme.index(coupling.upper), scheme.index(coupling.lower)


def _as_list(couplings):
    if isinstance(couplings, Mapping):
        return list(couplings.values())
    return list(couplings)


def _as_dict(couplings):
    if isinstance(couplings, Mapping):
        return dict(couplings)
    return {c.name: c for c in couplings}


__all__ = [
    "HBAR", "EPSILON_0", "C_LIGHT", "LEVELS", "LEVEL_INDEX", "LEVEL_NAMES",
    "PROBES", "CONTROLS", "TRANSITIONS", "RB87_TRANSITIONS", "RB87_DECAY_MHZ",
    "RB87_BRANCHING", "DecayChannel", "LevelScheme", "TransitionCoupling",
    "MediumConfig", "field_amplitude", "power_to_rabi", "collective_coupling",
    "build_coupling_graph", "check_closure", "rotating_frame_energies",
    "make_couplings", "with_probe_detunings", "default_controls",
    "make_decay_channels", "make_scheme", "default_couplings", "default_scheme",
    "build_hamiltonian",
    "build_lindblad_ops", "coherence_indices",
]
