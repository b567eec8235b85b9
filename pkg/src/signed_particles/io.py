"""Delimiter-separated text tables with '#' metadata headers."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .kernel import WignerKernelTable

FMT = "%.10e"


def write_table(path, columns, names, meta=None, delimiter="\t"):
    """Write equal-length columns, preceded by ``# key = value`` metadata lines
    and a ``# name<TAB>name`` column header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([np.asarray(c, dtype=float).ravel() for c in columns])
    lines = [f"{k} = {_fmt(v)}" for k, v in (meta or {}).items()]
    lines.append(delimiter.join(names))
    np.savetxt(path, data, fmt=FMT, delimiter=delimiter, header="\n".join(lines), comments="# ")
    return path


def read_table(path):
    """Return ``(meta, names, data)`` from a file written by :func:`write_table`."""
    meta, header = {}, []
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if " = " in body:
                key, value = body.split(" = ", 1)
                meta[key.strip()] = value.strip()
            else:
                header.append(body)
    names = header[-1].split() if header else []
    data = np.loadtxt(path, comments="#", ndmin=2)
    return meta, names, data


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def write_quasi(path, values, x, k, meta=None, names=("x_nm", "k_per_nm", "f")):
    """Phase-space table in long format: one ``x k f`` row per cell."""
    xx, kk = np.meshgrid(x, k, indexing="ij")
    return write_table(path, [xx, kk, values], list(names), meta)


def write_kernel(path, table: WignerKernelTable, meta=None):
    """Kernel table as ``x p value`` rows (p as a wave-number, value in 1/fs)."""
    return write_quasi(path, table.values, table.nodes, table.momenta, meta, ("x_nm", "p_per_nm", "w_per_fs"))


def write_gamma(path, table: WignerKernelTable, meta=None):
    return write_table(path, [table.nodes, table.gamma], ["x_nm", "gamma_per_fs"], meta)
