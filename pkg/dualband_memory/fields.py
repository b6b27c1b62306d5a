"""
fields.py — Grid containers
===========================

Fixed-size containers holding the state of the medium on the spatial grid:

- DensityField   one 6x6 density matrix per grid point, ρ(z_i, τ)
- EnvelopeField  complex probe envelopes 𝓔_a(z_i, τ), 𝓔_b(z_i, τ) plus the
                 per-mode propagation constants

Both wrap a numpy buffer that the integrators update in place and expose
index access with negative-index support, iteration and cheap copies.
"""

import numpy as np

from .dynamics import check_density_matrix
from .errors import ConfigurationError, NumericalFailure

DIM = 6
MIN_POINTS = 8


class DensityField:
    """
    Density matrices over the spatial grid, stored as an (N, 6, 6) complex array.

    Parameters
    ----------
    size : int
        Number of grid points (>= 8).
    ground : int, optional
        Index of the level holding all population initially (default 0, |b>).

    Example
    -------
    >>> rho = DensityField(10)
    >>> rho[-1][0, 0]
    (1+0j)
    >>> rho.trace_deviation()
    0.0
    """
    __slots__ = ("_data", "_size")

    def __init__(self, size, ground=0):
        if int(size) != size or size < MIN_POINTS:
            raise ConfigurationError(f"grid needs at least {MIN_POINTS} points, got {size}",
                                     key="medium.spatial_points")
        if not 0 <= ground < DIM:
            raise IndexError(f"ground level index {ground} out of range")
        self._size = int(size)
        self._data = np.zeros((self._size, DIM, DIM), dtype=complex)
        self._data[:, ground, ground] = 1.0

    @classmethod
    def from_array(cls, data):
        data = np.array(data, dtype=complex)
        if data.ndim != 3 or data.shape[1:] != (DIM, DIM):
            raise ValueError(f"expected an (N, {DIM}, {DIM}) array, got shape {data.shape}")
        field = object.__new__(cls)
        field._size = data.shape[0]
        field._data = data
        return field

    def _normalize_index(self, index):
        if not -self._size <= index < self._size:
            raise IndexError("grid index out of range")
        if index < 0:
            index += self._size
        return index

    def __getitem__(self, index):
        return self._data[self._normalize_index(index)]

    def __setitem__(self, index, value):
        value = np.asarray(value, dtype=complex)
        if value.shape != (DIM, DIM):
            raise ValueError(f"density matrix must have shape ({DIM}, {DIM}), got {value.shape}")
        self._data[self._normalize_index(index)] = value

    def __len__(self):
        return self._size

    def __iter__(self):
        for i in range(self._size):
            yield self._data[i]

    def __repr__(self):
        return f"DensityField(size={self._size}, trace_dev={self.trace_deviation():.2e})"

    @property
    def data(self):
        return self._data

    @data.setter
    def data(self, value):
        value = np.asarray(value, dtype=complex)
        if value.shape != self._data.shape:
            raise ValueError(f"expected shape {self._data.shape}, got {value.shape}")
        self._data = value

    def copy(self):
        return DensityField.from_array(self._data.copy())

    def trace_deviation(self):
        return self.integrity()["trace_deviation"]

    def integrity(self):
        """Trace, Hermiticity and positivity diagnostics over the whole grid."""
        return check_density_matrix(self._data)


class EnvelopeField:
    """
    Complex probe envelopes on a uniform spatial grid.

    Parameters
    ----------
    z : array_like
        Grid positions (m); uniform and at least 8 points.
    modes : Mapping[str, dict]
        Per probe mode (``"a"``, ``"b"``): ``wavenumber`` (1/m),
        ``coherence`` (upper, lower) index pair and ``dipole`` (C·m).

    Example
    -------
    >>> env = EnvelopeField(np.linspace(0, 0.014, 10),
    ...                     {"a": {"wavenumber": 7.9e6, "coherence": (2, 0), "dipole": 1.46e-29}})
    >>> env["a"].shape
    (10,)
    """
    __slots__ = ("_z", "_envelopes", "_modes")

    def __init__(self, z, modes):
        z = np.asarray(z, dtype=float)
        if z.ndim != 1 or z.size < MIN_POINTS:
            raise ConfigurationError(f"grid needs at least {MIN_POINTS} points",
                                     key="medium.spatial_points")
        steps = np.diff(z)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * abs(steps[0]):
            raise ConfigurationError("spatial grid must be uniform and increasing",
                                     key="medium.spatial_points")
        self._z = z
        self._modes = {}
        self._envelopes = {}
        for name, spec in modes.items():
            l, m = spec["coherence"]
            self._modes[name] = {
                "wavenumber": float(spec["wavenumber"]),
                "coherence": (int(l), int(m)),
                "dipole": float(spec["dipole"]),
            }
            self._envelopes[name] = np.zeros(z.size, dtype=complex)

    def _check_mode(self, mode):
        if mode not in self._envelopes:
            raise KeyError(f"unknown probe mode '{mode}'")

    def __getitem__(self, mode):
        self._check_mode(mode)
        return self._envelopes[mode]

    def __setitem__(self, mode, values):
        self.assign(mode, values)

    def assign(self, mode, values, tau=None):
        """
        Replace the envelope of one mode.

        Raises:
            NumericalFailure: If any value is not finite; carries tau and the
                first bad grid index.
        """
        self._check_mode(mode)
        values = np.asarray(values, dtype=complex)
        if values.shape != self._z.shape:
            raise ValueError(f"envelope must have shape {self._z.shape}, got {values.shape}")
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise NumericalFailure(f"envelope of mode '{mode}' is not finite",
                                   tau=tau, index=int(bad[0]))
        self._envelopes[mode] = values.copy()

    def __len__(self):
        return self._z.size

    def __iter__(self):
        return iter(self._envelopes)

    def __repr__(self):
        peaks = ", ".join(f"{m}={np.max(np.abs(e)):.3e}" for m, e in self._envelopes.items())
        return f"EnvelopeField(size={self._z.size}, peak |E|: {peaks})"

    @property
    def z(self):
        return self._z

    @property
    def spacing(self):
        return float(self._z[1] - self._z[0])

    @property
    def modes(self):
        return tuple(self._modes)

    def wavenumber(self, mode):
        self._check_mode(mode)
        return self._modes[mode]["wavenumber"]

    def coherence_index(self, mode):
        self._check_mode(mode)
        return self._modes[mode]["coherence"]

    def dipole(self, mode):
        self._check_mode(mode)
        return self._modes[mode]["dipole"]

    def output(self, mode):
        """Envelope at the output face z = L."""
        return complex(self[mode][-1])

    def copy(self):
        new = EnvelopeField(self._z.copy(), self._modes)
        for mode, values in self._envelopes.items():
            new._envelopes[mode] = values.copy()
        return new


__all__ = ["DensityField", "EnvelopeField"]
