"""
Polariton Theory Module

Analytic layer of the dual-wavelength dark-state polariton:

- dressed_state            |+> of the {e, b, Omega_3} subsystem, mixing angle, E+
- PolaritonParams          inputs of the 6x6 polariton eigenproblem
- build_polariton_matrix   the 6x6 Hermitian eigen-matrix
- find_dark_mode           numerical dark mode (minimal excited-state weight)
- analytic_dark_mode       closed-form dark mode for a far-detuned pump
- group_velocity           polariton group velocity
- mode_overlap / sweep     comparison and parameter-sweep helpers

Basis order of the polariton vectors:
    (sigma_a+, sigma_c+, sigma_f+, sigma_d+, a+, b+)
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .atomic_model import C_LIGHT, HBAR, collective_coupling
from .errors import DomainError, ValidityError

logger = logging.getLogger(__name__)

BASIS = ("sigma_a", "sigma_c", "sigma_f", "sigma_d", "photon_a", "photon_b")
EXCITED = (0, 2, 3)
DEGENERACY_TOL = 1e-10
PUMP_RATIO_LIMIT = 0.2
PUMP_RATIO_WARN = 0.1


@dataclass(frozen=True)
class DressedState:
    """
    Dressed ground state |+> = c_b|b> + c_e|e> and its energy.

    ``sin_theta`` is c_b and ``cos_theta`` is c_e; c_e is negative for a
    positive Omega_3.
    """
    c_b: float
    c_e: float
    theta: float
    E_plus: float
    omega3: float
    delta3: float

    @property
    def sin_theta(self):
        return self.c_b

    @property
    def cos_theta(self):
        return self.c_e

    @property
    def shift(self):
        """E+ / hbar in rad/s."""
        return self.E_plus / HBAR

    def matrix(self):
        """2x2 Hamiltonian / hbar in the basis {e, b}."""
        return np.array([[-self.delta3, -self.omega3], [-self.omega3, 0.0]])

    def residual(self):
        """||(H - E+) v|| / ||H|| for the stored eigenvector."""
        H = self.matrix()
        v = np.array([self.c_e, self.c_b])
        scale = np.linalg.norm(H, 2)
        if scale == 0:
            return 0.0
        return float(np.linalg.norm(H @ v - self.shift * v) / scale)


def dressed_state(omega3, delta3):
    """
    Dressed state of the far-detuned Omega_3 transition.

    Args:
        omega3 (float): Rabi frequency Omega_3 (rad/s).
        delta3 (float): Detuning Delta_3 (rad/s), must be > 0.

    Returns:
        DressedState: branch adiabatically connected to |b> (c_b > 0).

    Raises:
        DomainError: If delta3 <= 0.

    Example:
        >>> ds = dressed_state(0.0, 2e8)
        >>> (ds.c_b, ds.c_e, ds.E_plus)
        (1.0, -0.0, 0.0)
    """
    omega3 = float(omega3)
    delta3 = float(delta3)
    if not delta3 > 0:
        raise DomainError(f"Delta_3 must be > 0, got {delta3}")
    lam = (-delta3 + math.sqrt(delta3 ** 2 + 4 * omega3 ** 2)) / 2
    x = omega3 / (delta3 + lam)
    c_b = 1.0 / math.sqrt(1.0 + x * x)
    c_e = -x * c_b
    return DressedState(c_b, c_e, math.atan2(c_b, c_e), HBAR * lam, omega3, delta3)


@dataclass(frozen=True)
class PolaritonParams:
    """
    Parameters of the polariton eigenproblem (all in rad/s).

    Parameters
    ----------
    omega, omega1, omega2, omega3 : complex
        Control Rabi frequencies; omega3 enters only through the dressed state.
    delta1, delta3 : float
        Pump detunings Delta_1 and Delta_3 (Delta_3 > 0).
    g, g_prime : float
        Bare collective couplings of probes a and b (> 0).
    omega_c_prime : float
        Evaluation point omega_c - E+/hbar (default 0, the resonant polariton).
    ck : float
        Photon frequency offset (default 0).
    """
    omega: complex
    omega1: complex
    omega2: complex
    omega3: float
    delta1: float
    delta3: float
    g: float
    g_prime: float
    omega_c_prime: float = 0.0
    ck: float = 0.0
    _dressed: DressedState = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.delta3 > 0:
            raise DomainError(f"Delta_3 must be > 0, got {self.delta3}")
        if not self.g > 0 or not self.g_prime > 0:
            raise DomainError("bare couplings g and g' must be > 0")
        if abs(complex(self.omega3).imag) > 0:
            raise DomainError("Omega_3 must be real")
        object.__setattr__(self, "_dressed", dressed_state(complex(self.omega3).real, self.delta3))

    @classmethod
    def from_rabi(cls, rabi, delta1, delta3, g, g_prime, omega_c_prime=0.0, ck=0.0):
        """Build from a mapping of control name -> Rabi frequency."""
        return cls(rabi.get("omega", 0.0), rabi.get("omega1", 0.0), rabi.get("omega2", 0.0),
                   rabi.get("omega3", 0.0), delta1, delta3, g, g_prime, omega_c_prime, ck)

    @classmethod
    def from_couplings(cls, couplings, density, omega_c_prime=0.0, ck=0.0):
        """
        Parameters matching a set of TransitionCoupling and an atomic density,
        so analytic predictions and the co-simulation share their inputs.
        """
        rabi = {name: couplings[name].rabi_peak for name in ("omega", "omega1", "omega2", "omega3")}
        pa, pb = couplings["probe_a"], couplings["probe_b"]
        g = collective_coupling(density, pa.wavelength, pa.dipole_moment)
        g_prime = collective_coupling(density, pb.wavelength, pb.dipole_moment)
        return cls.from_rabi(rabi, couplings["omega1"].detuning, couplings["omega3"].detuning,
                             g, g_prime, omega_c_prime, ck)

    @property
    def dressed(self):
        return self._dressed

    @property
    def g_d(self):
        return self.g * self._dressed.sin_theta

    @property
    def g_d_prime(self):
        return self.g_prime * self._dressed.cos_theta

    @property
    def omega_c(self):
        return self.omega_c_prime + self._dressed.shift


@dataclass(frozen=True, eq=False)
class PolaritonMode:
    """
    One polariton eigenmode.

    ``phi`` is unit-norm with phi[1] real-positive (largest component when
    phi[1] vanishes). ``degenerate`` is set when another eigenvector is as
    dark within 1e-10; ``candidates`` then holds every such mode.
    """
    phi: np.ndarray
    omega: float
    norm_A: float
    darkness: float
    degenerate: bool = False
    candidates: tuple = ()

    def residual(self, matrix):
        matrix = np.asarray(matrix)
        scale = np.linalg.norm(matrix, 2)
        r = np.linalg.norm(matrix @ self.phi - self.omega * self.phi)
        return float(r / scale) if scale > 0 else float(r)

    def weights(self):
        return dict(zip(BASIS, np.abs(self.phi) ** 2))


def build_polariton_matrix(p: PolaritonParams):
    """
    The 6x6 polariton eigen-matrix.

    Args:
        p (PolaritonParams): Eigenproblem inputs.

    Returns:
        np.ndarray: Hermitian matrix in the basis
        (sigma_a+, sigma_c+, sigma_f+, sigma_d+, a+, b+).

    Example:
        >>> p = PolaritonParams(0, 0, 0, 0, 1e8, 2e8, 1e9, 1e9)
        >>> np.allclose(build_polariton_matrix(p), np.diag([0, 0, -1e8, 0, 0, 0]))
        True
    """
    w = p.omega_c_prime
    om, om1, om2 = complex(p.omega), complex(p.omega1), complex(p.omega2)
    gd, gdp = complex(p.g_d), complex(p.g_d_prime)
    M = np.zeros((6, 6), dtype=complex)
    M[np.arange(4), np.arange(4)] = w
    M[2, 2] = -p.delta1 + w
    M[4, 4] = M[5, 5] = p.ck
    M[0, 1], M[1, 0] = -np.conj(om), -om
    M[1, 2], M[2, 1] = -om1, -np.conj(om1)
    M[2, 3], M[3, 2] = -om2, -np.conj(om2)
    M[0, 4], M[4, 0] = -np.conj(gd), -gd
    M[3, 5], M[5, 3] = -np.conj(gdp), -gdp
    return M


def darkness(phi):
    """Weight on the radiatively lossy excitations sigma_a, sigma_f, sigma_d."""
    phi = np.asarray(phi)
    return float(np.sum(np.abs(phi[list(EXCITED)]) ** 2))


def _fix_phase(phi):
    phi = phi / np.linalg.norm(phi)
    ref = phi[1] if abs(phi[1]) > 1e-12 else phi[np.argmax(np.abs(phi))]
    return phi * (abs(ref) / ref)


def _make_mode(phi, omega, degenerate=False, candidates=()):
    phi = _fix_phase(np.asarray(phi, dtype=complex))
    return PolaritonMode(phi, float(omega), float(abs(phi[1])), darkness(phi),
                         degenerate, candidates)


def find_dark_mode(matrix):
    """
    Dark polariton of a 6x6 Hermitian eigen-matrix.

    Args:
        matrix (array_like): Hermitian matrix from build_polariton_matrix.

    Returns:
        PolaritonMode: eigenvector with minimal darkness; ties (within 1e-10)
        broken by smallest |omega| and flagged as degenerate.

    Example:
        >>> p = PolaritonParams(1e8, 0, 0, 0, 1e8, 2e8, 1e8, 1e8)
        >>> mode = find_dark_mode(build_polariton_matrix(p))
        >>> round(mode.darkness, 12)
        0.0
    """
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (6, 6):
        raise ValueError(f"expected a 6x6 matrix, got shape {matrix.shape}")
    if not np.allclose(matrix, matrix.conj().T, rtol=0, atol=1e-12 * max(np.abs(matrix).max(), 1)):
        raise ValueError("polariton matrix must be Hermitian")
    values, vectors = np.linalg.eigh(matrix)
    dark = [darkness(vectors[:, k]) for k in range(6)]
    best = min(dark)
    tied = [k for k in range(6) if dark[k] - best < DEGENERACY_TOL]
    tied.sort(key=lambda k: (abs(values[k]), k))
    if len(tied) == 1:
        return _make_mode(vectors[:, tied[0]], values[tied[0]])
    candidates = tuple(_make_mode(vectors[:, k], values[k]) for k in tied)
    logger.debug("degenerate dark modes at omega=%s", [values[k] for k in tied])
    head = candidates[0]
    return replace(head, degenerate=True, candidates=candidates)


def pump_ratio(p: PolaritonParams):
    """|Omega_1 / Delta_1|."""
    if p.omega1 == 0:
        return 0.0
    if p.delta1 == 0:
        raise DomainError("Delta_1 = 0 with a nonzero Omega_1")
    return abs(p.omega1 / p.delta1)


def analytic_dark_mode(p: PolaritonParams):
    """
    Closed-form dark polariton for a far-detuned pump.

    Args:
        p (PolaritonParams): Eigenproblem inputs, |Omega_1/Delta_1| < 0.2.

    Returns:
        PolaritonMode: normalized vector
        (0, 1, -Omega_1*/Delta_1, 0, -Omega*/g_d*, Omega_2* Omega_1*/(Delta_1 g_d'*)) * A,
        with the eigenvalue taken as the Rayleigh quotient.

    Raises:
        ValidityError: If |Omega_1/Delta_1| >= 0.2 (a warning is logged above 0.1).
        DomainError: If a dressed coupling vanishes while its control is on.
    """
    ratio = pump_ratio(p)
    if ratio >= PUMP_RATIO_LIMIT:
        raise ValidityError(f"|Omega_1/Delta_1| = {ratio:.3g} is outside the far-detuned "
                            f"regime (< {PUMP_RATIO_LIMIT})")
    if ratio > PUMP_RATIO_WARN:
        logger.warning("|Omega_1/Delta_1| = %.3g exceeds %.1f, analytic dark mode is approximate",
                       ratio, PUMP_RATIO_WARN)
    om, om1, om2 = complex(p.omega), complex(p.omega1), complex(p.omega2)
    v = np.zeros(6, dtype=complex)
    v[1] = 1.0
    if om1 != 0:
        v[2] = -np.conj(om1) / p.delta1
    if om != 0:
        if p.g_d == 0:
            raise DomainError("g_d = 0 with a nonzero Omega")
        v[4] = -np.conj(om) / np.conj(p.g_d)
    if om1 * om2 != 0:
        if p.g_d_prime == 0:
            raise DomainError("g_d' = 0 with nonzero Omega_1 Omega_2")
        v[5] = np.conj(om2) * np.conj(om1) / (p.delta1 * np.conj(p.g_d_prime))
    phi = v / np.linalg.norm(v)
    omega = float(np.real(np.vdot(phi, build_polariton_matrix(p) @ phi)))
    return _make_mode(phi, omega)


def normalization(p: PolaritonParams):
    """
    Bosonic normalization factor A of the analytic dark mode (moduli of ratios).

    Example:
        >>> p = PolaritonParams(0, 0, 0, 0, 1e8, 2e8, 1e9, 1e9)
        >>> normalization(p)
        1.0
    """
    x, y, r = _photonic_weights(p.omega, p.omega1, p.omega2, p.g_d, p.g_d_prime, p.delta1)
    return 1.0 / math.sqrt(1.0 + r + x + y)


def _photonic_weights(omega, omega1, omega2, g_d, g_d_prime, delta1):
    omega, omega1, omega2 = abs(omega), abs(omega1), abs(omega2)
    g_d, g_d_prime = abs(g_d), abs(g_d_prime)
    if omega1 != 0 and delta1 == 0:
        raise DomainError("Delta_1 = 0 with a nonzero Omega_1")
    r = (omega1 / abs(delta1)) ** 2 if omega1 else 0.0
    if omega == 0:
        x = 0.0
    elif g_d == 0:
        raise DomainError("g_d = 0 with a nonzero Omega")
    else:
        x = (omega / g_d) ** 2
    if omega1 * omega2 == 0:
        y = 0.0
    elif g_d_prime == 0:
        raise DomainError("g_d' = 0 with nonzero Omega_1 Omega_2")
    else:
        y = (omega2 * omega1 / (abs(delta1) * g_d_prime)) ** 2
    return x, y, r


def group_velocity_from(omega, omega1, omega2, g_d, g_d_prime, delta1):
    """
    Group velocity from the dressed couplings directly.

    Returns:
        float: c (x + y) / (1 + r + x + y) with x = |Omega/g_d|^2,
        y = |Omega_2 Omega_1 / (Delta_1 g_d')|^2 and r = |Omega_1/Delta_1|^2.

    Example:
        >>> group_velocity_from(1.0, 0.0, 0.0, 1.0, 1.0, 1.0) / C_LIGHT
        0.5
    """
    x, y, r = _photonic_weights(omega, omega1, omega2, g_d, g_d_prime, delta1)
    return C_LIGHT * (x + y) / (1.0 + r + x + y)


def group_velocity(p: PolaritonParams):
    """
    Group velocity (m/s) of the dark polariton; zero when both photonic
    weights vanish.

    Raises:
        DomainError: g_d = 0 with Omega != 0, or g_d' = 0 with Omega_1 Omega_2 != 0.
    """
    return group_velocity_from(p.omega, p.omega1, p.omega2, p.g_d, p.g_d_prime, p.delta1)


def mode_overlap(u, v):
    """
    |<u, v>| / (||u|| ||v||).

    Example:
        >>> mode_overlap([1, 0], [1j, 0])
        1.0
    """
    u = np.asarray(getattr(u, "phi", u), dtype=complex)
    v = np.asarray(getattr(v, "phi", v), dtype=complex)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise DomainError("overlap with a zero vector is undefined")
    return float(abs(np.vdot(u, v)) / (nu * nv))


SWEEP_PARAMETERS = ("omega", "omega1", "omega2", "omega3", "delta1", "delta3")


def _sweep_point(base, point):
    p = replace(base, **point)
    M = build_polariton_matrix(p)
    mode = find_dark_mode(M)
    try:
        overlap = mode_overlap(mode, analytic_dark_mode(p))
    except ValidityError:
        overlap = float("nan")
    row = dict(point)
    row.update(darkness=mode.darkness, omega_mode=mode.omega,
               v_g=group_velocity(p), overlap=overlap)
    return row


def sweep(base: PolaritonParams, ranges, workers=1):
    """
    Evaluate the dark mode over a grid of parameter values.

    Args:
        base (PolaritonParams): Fixed parameters.
        ranges (Mapping[str, Sequence[float]]): parameter name -> values (rad/s);
            names from SWEEP_PARAMETERS. The grid is their Cartesian product in
            the given key order.
        workers (int): Thread count; the output order never depends on it.

    Returns:
        List[dict]: one row per grid point with the swept values, darkness,
        omega_mode, v_g and overlap (NaN where the analytic mode is invalid).
    """
    names = list(ranges)
    for name in names:
        if name not in SWEEP_PARAMETERS:
            raise DomainError(f"cannot sweep '{name}'; choose from {', '.join(SWEEP_PARAMETERS)}")
    points = [dict(zip(names, values))
              for values in itertools.product(*(ranges[n] for n in names))]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda pt: _sweep_point(base, pt), points))
    return [_sweep_point(base, pt) for pt in points]


__all__ = [
    "BASIS", "DressedState", "PolaritonParams", "PolaritonMode", "dressed_state",
    "build_polariton_matrix", "darkness", "find_dark_mode", "pump_ratio",
    "analytic_dark_mode", "normalization", "group_velocity", "group_velocity_from",
    "mode_overlap", "SWEEP_PARAMETERS", "sweep",
]
