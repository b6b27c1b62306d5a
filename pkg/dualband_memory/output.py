"""
output.py — Result files
========================

Writers and readers for the files a run produces. Every write goes to a
temporary file in the target directory first and is moved into place with
``os.replace``.

- format_number       9-decimal mantissa, unpadded exponent ("1.234567890e-6")
- write_timeseries / read_timeseries   the simulate CSV
- write_rows          generic CSV (analyze sweeps)
- write_metrics / write_manifest       JSON summaries
- plot_panel          SVG figure of one scenario
"""

import json
import logging
import math
import os
import tempfile

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import __version__  # noqa: E402

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("tau_us", "Ea_abs", "Eb_abs", "rho_cb_abs", "rho_ce_abs",
               "env_omega", "env_omega1", "env_omega2", "env_omega3")
ENV_COLUMNS = {"env_omega": "omega", "env_omega1": "omega1",
               "env_omega2": "omega2", "env_omega3": "omega3"}


def format_number(x):
    """
    Scientific notation with 9 decimals and an unpadded exponent.

    Example:
        >>> format_number(0.0)
        '0.000000000e0'
        >>> format_number(1.23456789012e-6)
        '1.234567890e-6'
    """
    x = float(x) + 0.0
    if not math.isfinite(x):
        return repr(x)
    mantissa, exponent = f"{x:.9e}".split("e")
    return f"{mantissa}e{int(exponent)}"


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file and os.replace."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def timeseries_columns(ts):
    """Columns of the simulate CSV as float arrays keyed by header name."""
    cols = {
        "tau_us": np.asarray(ts.tau) * 1e6,
        "Ea_abs": np.abs(ts.output["a"]),
        "Eb_abs": np.abs(ts.output["b"]),
        "rho_cb_abs": np.abs(ts.rho_cb),
        "rho_ce_abs": np.abs(ts.rho_ce),
    }
    for column, name in ENV_COLUMNS.items():
        values = ts.controls.get(name)
        cols[column] = (np.zeros(len(ts.tau)) if values is None
                        else np.asarray(values) / (2 * math.pi * 1e6))
    return cols


def write_rows(path, header, rows):
    """CSV with the given header; numbers through format_number, LF line endings."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_number(v) if not isinstance(v, str) else v for v in row))
    atomic_write(path, "\n".join(lines) + "\n")
    logger.info("wrote %s (%d rows)", path, len(rows))
    return path


def write_timeseries(path, ts):
    cols = timeseries_columns(ts)
    rows = list(zip(*(cols[c] for c in CSV_COLUMNS)))
    return write_rows(path, CSV_COLUMNS, rows)


def read_timeseries(path):
    """
    Read a simulate CSV back into float arrays keyed by column name.

    Raises:
        ValueError: If the header does not match the simulate layout.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected CSV header {header}")
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    data = np.atleast_1d(data)
    return {name: np.asarray(data[name], dtype=float) for name in CSV_COLUMNS}


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    return value


def write_metrics(path, metrics, extra=None):
    data = _json_value(metrics.to_dict())
    if extra:
        data.update(_json_value(extra))
    atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")
    logger.info("wrote %s", path)
    return path


def write_manifest(path, config, failure=None):
    """
    Run manifest: package version, status and the full resolved config.
    ``failure`` is a dict describing where a run stopped.
    """
    manifest = {
        "version": __version__,
        "status": {"ok": failure is None, "failure": _json_value(failure)},
        "config": config,
    }
    atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info("wrote %s", path)
    return path


def plot_panel(path, columns, title=""):
    """
    Two-row SVG figure: probe amplitudes with dashed normalized control
    profiles on top, |rho_cb| and |rho_ce| below.

    Args:
        path (str): Target file (.svg).
        columns (Mapping[str, np.ndarray]): simulate CSV columns.
        title (str): Figure title.
    """
    tau = columns["tau_us"]
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    top.plot(tau, columns["Ea_abs"], label="|E_a| 795 nm")
    top.plot(tau, columns["Eb_abs"], label="|E_b| 1324 nm")
    top.set_ylabel("field amplitude (V/m)")
    twin = top.twinx()
    for column, name in ENV_COLUMNS.items():
        trace = columns[column]
        peak = float(np.max(np.abs(trace))) if trace.size else 0.0
        if peak > 0:
            twin.plot(tau, trace / peak, linestyle="--", linewidth=0.8, label=name)
    twin.set_ylim(-0.05, 1.15)
    twin.set_ylabel("control (normalized)")
    top.legend(loc="upper right", fontsize=8)
    if twin.lines:
        twin.legend(loc="center right", fontsize=7)
    bottom.plot(tau, columns["rho_cb_abs"], label="|rho_cb|")
    bottom.plot(tau, columns["rho_ce_abs"], label="|rho_ce|")
    bottom.set_xlabel("retarded time tau (us)")
    bottom.set_ylabel("coherence")
    bottom.legend(loc="upper right", fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".svg", dir=directory)
    os.close(fd)
    try:
        fig.savefig(tmp, format="svg")
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.remove(tmp)
    logger.info("figure saved to %s", path)
    return path


__all__ = [
    "CSV_COLUMNS", "format_number", "atomic_write", "timeseries_columns", "write_rows",
    "write_timeseries", "read_timeseries", "write_metrics", "write_manifest", "plot_panel",
]
