"""
config.py — Run configuration
=============================

JSON configuration with a fixed schema. Values at the boundary use lab
units (MHz cyclic frequencies, us, mW / pW, cm / mm, nm); ``RunConfig``
holds them converted once to SI (rad/s, s, W, m).

- DEFAULT_CONFIG     the schema with its defaults
- default_config()   deep copy of the defaults
- merge_config()     overlay a user dict, rejecting unknown keys by dotted path
- load_config()      read a config file (a run manifest is accepted too)
- apply_overrides()  CLI flag overrides
- RunConfig          validated SI configuration

Run cost is set by ``solver.dt_max_us``. The atoms-then-fields splitting
advances every grid point with one global step, and the default 2 ns cap
keeps that explicit coupling stable at the default optical depth, so a full
20 us run takes every step at the cap: 10^4 steps, each a few matrix
exponentials per grid point. Run time scales with 1/dt_max_us times
``medium.spatial_points``; the tolerances only matter below the cap. Raise
the cap (``--dt-max-us``) for quick looks at thin media, lower it together
with the tolerances for convergence checks.
"""

import copy
import json
import logging
import math
from dataclasses import dataclass

from .atomic_model import (CONTROLS, RB87_BRANCHING, RB87_DECAY_MHZ, RB87_TRANSITIONS,
                           MediumConfig, make_decay_channels)
from .dynamics import StepControl
from .errors import ConfigurationError
from .protocol import PRESETS, Scenario, make_scenario

logger = logging.getLogger(__name__)

TWO_PI_MHZ = 2 * math.pi * 1e6
US = 1e-6

DEFAULT_CONFIG = {
    "medium": {
        "density_m3": 4e17,
        "length_cm": 1.4,
        "beam_diameter_mm": 1.6,
        "spatial_points": 100,
    },
    "atomic_data": {
        "transitions": copy.deepcopy(RB87_TRANSITIONS),
        "decay_MHz": dict(RB87_DECAY_MHZ),
        "branching": copy.deepcopy(RB87_BRANCHING),
    },
    "controls": {
        "omega": {"power_mW": 4.14, "detuning_MHz": 0.0},
        "omega1": {"power_mW": 0.12, "detuning_MHz": 31.83},
        "omega2": {"power_mW": 1.09, "detuning_MHz": -31.83},
        "omega3": {"power_mW": 0.20, "detuning_MHz": 31.83},
    },
    "model": {
        "compensate_stark_shift": False,
        "enforce_closure": True,
        "omega_c_MHz": 0.0,
    },
    "polariton": {
        "omega_c_prime_MHz": 0.0,
        "ck_MHz": 0.0,
    },
    "scenario": {
        "preset": "fig2a",
        "overrides": {},
    },
    "solver": {
        "rel_tol": 1e-6,
        "abs_tol": 1e-9,
        "dt_min_us": 1e-7,
        "dt_initial_us": 1e-4,
        "dt_max_us": 2e-3,
        "samples": 2000,
        "workers": 1,
    },
    "output": {
        "directory": "out",
        "plots": True,
    },
}

# boundary key -> (Scenario field, scale to SI)
SCENARIO_OVERRIDES = {
    "input_mode": ("input_mode", None),
    "write_controls": ("write_controls", None),
    "read_controls": ("read_controls", None),
    "t0_us": ("t0", US),
    "sigma_us": ("sigma", US),
    "t_off_us": ("t_off", US),
    "t_on_us": ("t_on", US),
    "sigma_t_us": ("sigma_t", US),
    "tau_end_us": ("tau_end", US),
    "probe_peak_power_pW": ("probe_peak_power", 1e-12),
}
# objects whose keys are replaced wholesale instead of merged
_FREE_KEYS = {"scenario.overrides"}
_FREE_PREFIXES = ("atomic_data.branching.",)


def _is_free(dotted):
    return dotted in _FREE_KEYS or dotted.startswith(_FREE_PREFIXES)


def default_config():
    return copy.deepcopy(DEFAULT_CONFIG)


def merge_config(base, user, path=""):
    """
    Overlay ``user`` on ``base`` recursively.

    Raises:
        ConfigurationError: For any key absent from ``base`` (the message names
            the dotted path), or a section given as a non-object.

    Example:
        >>> merge_config(default_config(), {"medium": {"colour": 1}})
        Traceback (most recent call last):
        ...
        dualband_memory.errors.ConfigurationError: medium.colour: unknown configuration key
    """
    out = copy.deepcopy(base)
    if not isinstance(user, dict):
        raise ConfigurationError("expected an object", key=path or "<root>")
    for key, value in user.items():
        dotted = f"{path}.{key}" if path else key
        if key not in out:
            raise ConfigurationError("unknown configuration key", key=dotted)
        if isinstance(out[key], dict) and not _is_free(dotted):
            out[key] = merge_config(out[key], value, dotted)
        elif _is_free(dotted):
            if not isinstance(value, dict):
                raise ConfigurationError("expected an object", key=dotted)
            out[key] = copy.deepcopy(value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path):
    """
    Read a JSON config (or a run manifest) and merge it over the defaults.

    Raises:
        ConfigurationError: Unreadable file, invalid JSON or unknown keys.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}", key="--config") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc}", key="--config") from exc
    if isinstance(data, dict) and "config" in data and "version" in data:
        logger.info("reading configuration from run manifest %s", path)
        data = data["config"]
    return merge_config(DEFAULT_CONFIG, data)


def apply_overrides(cfg, samples=None, grid=None, rel_tol=None, workers=None, preset=None,
                    dt_max_us=None):
    """Return a copy of a boundary config with CLI overrides applied."""
    cfg = copy.deepcopy(cfg)
    if dt_max_us is not None:
        cfg["solver"]["dt_max_us"] = dt_max_us
    if samples is not None:
        cfg["solver"]["samples"] = samples
    if grid is not None:
        cfg["medium"]["spatial_points"] = grid
    if rel_tol is not None:
        cfg["solver"]["rel_tol"] = rel_tol
    if workers is not None:
        cfg["solver"]["workers"] = workers
    if preset is not None:
        cfg["scenario"]["preset"] = preset
    return cfg


def _number(cfg, dotted, positive=False, nonneg=False):
    value = cfg
    for part in dotted.split("."):
        value = value[part]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigurationError(f"expected a finite number, got {value!r}", key=dotted)
    if positive and not value > 0:
        raise ConfigurationError(f"must be > 0, got {value}", key=dotted)
    if nonneg and not value >= 0:
        raise ConfigurationError(f"must be >= 0, got {value}", key=dotted)
    return float(value)


def _integer(cfg, dotted, minimum):
    value = cfg
    for part in dotted.split("."):
        value = value[part]
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigurationError(f"expected an integer >= {minimum}, got {value!r}", key=dotted)
    return value


def _flag(cfg, dotted):
    value = cfg
    for part in dotted.split("."):
        value = value[part]
    if not isinstance(value, bool):
        raise ConfigurationError(f"expected true or false, got {value!r}", key=dotted)
    return value


def _scenario(cfg):
    preset = cfg["scenario"]["preset"]
    if preset not in PRESETS:
        raise ConfigurationError(f"unknown preset {preset!r}", key="scenario.preset")
    overrides = {}
    for key, value in cfg["scenario"]["overrides"].items():
        dotted = f"scenario.overrides.{key}"
        if key not in SCENARIO_OVERRIDES:
            raise ConfigurationError("unknown scenario override", key=dotted)
        name, scale = SCENARIO_OVERRIDES[key]
        if scale is None:
            if key.endswith("_controls"):
                if not isinstance(value, list) or not all(v in CONTROLS for v in value):
                    raise ConfigurationError(f"expected a list of {CONTROLS}", key=dotted)
                value = frozenset(value)
            overrides[name] = value
        else:
            overrides[name] = _number(cfg, dotted) * scale
    return make_scenario(preset, overrides)


@dataclass(frozen=True)
class RunConfig:
    """
    Validated configuration in SI units.

    ``raw`` keeps the resolved boundary-unit dict written to the manifest.
    """
    medium: MediumConfig
    transitions: dict
    decay_channels: tuple
    controls: dict
    compensate_stark_shift: bool
    enforce_closure: bool
    omega_c: float
    omega_c_prime: float
    ck: float
    scenario: Scenario
    ctrl: StepControl
    samples: int
    workers: int
    output_dir: str
    plots: bool
    raw: dict

    @classmethod
    def from_dict(cls, cfg):
        """
        Validate a boundary-unit config (already merged over the defaults).

        Raises:
            ConfigurationError: Naming the offending dotted key.
        """
        cfg = merge_config(DEFAULT_CONFIG, cfg)
        medium = MediumConfig(
            density=_number(cfg, "medium.density_m3", positive=True),
            length=_number(cfg, "medium.length_cm", positive=True) * 1e-2,
            beam_diameter=_number(cfg, "medium.beam_diameter_mm", positive=True) * 1e-3,
            spatial_points=_integer(cfg, "medium.spatial_points", 8),
        )
        transitions = {}
        for name in cfg["atomic_data"]["transitions"]:
            base = f"atomic_data.transitions.{name}"
            transitions[name] = {
                "wavelength_nm": _number(cfg, f"{base}.wavelength_nm", positive=True),
                "dipole_Cm": _number(cfg, f"{base}.dipole_Cm", positive=True),
            }
        decay = {level: _number(cfg, f"atomic_data.decay_MHz.{level}", nonneg=True) * TWO_PI_MHZ
                 for level in cfg["atomic_data"]["decay_MHz"]}
        branching = {}
        for upper, table in cfg["atomic_data"]["branching"].items():
            branching[upper] = {lower: _number(cfg, f"atomic_data.branching.{upper}.{lower}",
                                               nonneg=True)
                                for lower in table}
        controls = {}
        for name in CONTROLS:
            base = f"controls.{name}"
            controls[name] = {
                "power": _number(cfg, f"{base}.power_mW", nonneg=True) * 1e-3,
                "detuning": _number(cfg, f"{base}.detuning_MHz") * TWO_PI_MHZ,
            }
        ctrl = StepControl(
            rel_tol=_number(cfg, "solver.rel_tol", positive=True),
            abs_tol=_number(cfg, "solver.abs_tol", positive=True),
            dt_min=_number(cfg, "solver.dt_min_us", positive=True) * US,
            dt_initial=_number(cfg, "solver.dt_initial_us", positive=True) * US,
            dt_max=_number(cfg, "solver.dt_max_us", positive=True) * US,
        )
        directory = cfg["output"]["directory"]
        if not isinstance(directory, str) or not directory:
            raise ConfigurationError("expected a non-empty path", key="output.directory")
        return cls(
            medium=medium,
            transitions=transitions,
            decay_channels=make_decay_channels(decay, branching),
            controls=controls,
            compensate_stark_shift=_flag(cfg, "model.compensate_stark_shift"),
            enforce_closure=_flag(cfg, "model.enforce_closure"),
            omega_c=_number(cfg, "model.omega_c_MHz") * TWO_PI_MHZ,
            omega_c_prime=_number(cfg, "polariton.omega_c_prime_MHz") * TWO_PI_MHZ,
            ck=_number(cfg, "polariton.ck_MHz") * TWO_PI_MHZ,
            scenario=_scenario(cfg),
            ctrl=ctrl,
            samples=_integer(cfg, "solver.samples", 2),
            workers=_integer(cfg, "solver.workers", 1),
            output_dir=directory,
            plots=_flag(cfg, "output.plots"),
            raw=cfg,
        )


def dumps_config(cfg):
    """Canonical JSON text of a boundary config (sorted keys, 2-space indent)."""
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


__all__ = [
    "DEFAULT_CONFIG", "SCENARIO_OVERRIDES", "default_config", "merge_config",
    "load_config", "apply_overrides", "RunConfig", "dumps_config",
]
