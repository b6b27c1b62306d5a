"""
simulation.py — Run wiring
==========================

Turns a RunConfig into an atomic model, initial fields and a drive
schedule, and runs the co-integration.

- AtomicModel        scheme + couplings + jump operators of one configuration
- build_model()      validated model (closure, Stark compensation)
- polariton_params() analytic-theory parameters matching the model
- initial_fields()   all atoms in |b>, no probe light in the medium
- optical_depth()    resonant intensity optical depth of a probe
- run_schedule() / run_scenario()
"""

import logging
import math
from dataclasses import dataclass

from .atomic_model import (EPSILON_0, HBAR, build_lindblad_ops, check_closure,
                           coherence_indices, make_couplings, make_scheme,
                           rotating_frame_energies, with_probe_detunings)
from .fields import DensityField, EnvelopeField
from .polariton import PolaritonParams, dressed_state
from .propagation import MODE_PROBES, co_integrate
from .protocol import build_schedule, compute_metrics

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AtomicModel:
    scheme: object
    couplings: dict
    lindblad_ops: tuple


@dataclass
class SimulationResult:
    scenario: object
    timeseries: object
    metrics: object


def build_model(cfg):
    """
    Atomic model of a configuration.

    Raises:
        ConfigurationError: Closure violated (when enforced) or invalid data.
        DomainError: Stark compensation requested with Delta_3 <= 0.
    """
    couplings = make_couplings(cfg.transitions, cfg.controls, cfg.medium.beam_diameter)
    if cfg.enforce_closure:
        check_closure(couplings)
    omega_c = cfg.omega_c
    if cfg.compensate_stark_shift:
        omega3 = couplings["omega3"]
        omega_c = dressed_state(omega3.rabi_peak, omega3.detuning).shift
        logger.info("|c> placed at E+/hbar = 2pi x %.4f MHz", omega_c / (2 * math.pi * 1e6))
    scheme = make_scheme(couplings, cfg.decay_channels, omega_c)
    couplings = with_probe_detunings(couplings, rotating_frame_energies(couplings, omega_c))
    return AtomicModel(scheme, couplings, tuple(build_lindblad_ops(scheme)))


def polariton_params(cfg, model=None):
    model = build_model(cfg) if model is None else model
    return PolaritonParams.from_couplings(model.couplings, cfg.medium.density,
                                          cfg.omega_c_prime, cfg.ck)


def initial_fields(cfg, model):
    density = DensityField(cfg.medium.spatial_points, ground=model.scheme.index("b"))
    modes = {}
    for mode, probe in MODE_PROBES.items():
        c = model.couplings[probe]
        modes[mode] = {
            "wavenumber": c.wavenumber,
            "coherence": coherence_indices(model.scheme, c),
            "dipole": c.dipole_moment,
        }
    return density, EnvelopeField(cfg.medium.grid(), modes)


def optical_depth(coupling, density, length, gamma):
    """Resonant intensity optical depth 2 k n d^2 L / (eps0 hbar Gamma) of a probe."""
    return 2 * coupling.wavenumber * density * coupling.dipole_moment ** 2 * length / (
        EPSILON_0 * HBAR * gamma)


def run_schedule(cfg, model, schedule):
    """Co-integrate one drive schedule from the ground state."""
    density, envelopes = initial_fields(cfg, model)
    gamma_a = model.scheme.total_decay_rate("a")
    if gamma_a > 0:
        logger.info("grid %d points over %.3g cm, probe-a optical depth %.1f",
                    cfg.medium.spatial_points, cfg.medium.length * 100,
                    optical_depth(model.couplings["probe_a"], cfg.medium.density,
                                  cfg.medium.length, gamma_a))
    return co_integrate(density, envelopes, schedule, cfg.ctrl, model.scheme, model.couplings,
                        model.lindblad_ops, cfg.medium.density, samples=cfg.samples,
                        workers=cfg.workers)


def run_scenario(cfg, scenario=None, model=None):
    """
    Run a storage/retrieval scenario (the configured one by default).

    Returns:
        SimulationResult: time series and memory metrics.

    Raises:
        NumericalFailure: With ``partial`` holding the truncated time series.
    """
    scenario = cfg.scenario if scenario is None else scenario
    model = build_model(cfg) if model is None else model
    logger.info("running scenario %s (input mode %s, read %s)", scenario.name,
                scenario.input_mode, ", ".join(sorted(scenario.read_controls)))
    ts = run_schedule(cfg, model, build_schedule(scenario, cfg.medium.beam_diameter))
    metrics = compute_metrics(ts, scenario)
    logger.info("retrieval efficiency a=%.3e b=%.3e, leakage %.3e",
                metrics.retrieval_efficiency["a"], metrics.retrieval_efficiency["b"],
                metrics.leakage)
    return SimulationResult(scenario, ts, metrics)


__all__ = [
    "AtomicModel", "SimulationResult", "build_model", "polariton_params",
    "initial_fields", "optical_depth", "run_schedule", "run_scenario",
]
