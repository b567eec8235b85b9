"""Macroscopic quantities reconstructed from signed ensembles.

All histograms are plain signed counts normalised by the initial particle
count ``n0``; momentum indices beyond the grid's ``m_max`` fall into the
edge momentum bins, so summing a quasi-distribution over momentum always
reproduces the spatial density.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .phase_space import Ensemble, PhaseSpaceGrid


@dataclass
class EnsembleSnapshot:
    time: float
    ensemble: Ensemble | None
    densities: dict = field(default_factory=dict)
    quasi: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def _axis(ensemble: Ensemble, species) -> int:
    if isinstance(species, (int, np.integer)):
        return int(species)
    for i, s in enumerate(ensemble.species):
        if s.name == species:
            return i
    raise ConfigurationError(f"ensemble has no species {species!r}")


def ensemble_average(observable, ensemble: Ensemble) -> float:
    """Signed average ``(1/n0) sum_i s_i A(x_i, k_i)``.

    ``observable`` is called with the (n, ndim) position and momentum arrays
    and must return n values (a scalar is broadcast).
    """
    if len(ensemble) == 0:
        raise ConfigurationError("cannot average over an empty ensemble")
    values = np.broadcast_to(np.asarray(observable(ensemble.x, ensemble.k), dtype=float), (len(ensemble),))
    return float(np.dot(ensemble.sign.astype(float), values) / ensemble.n0)


def signed_cell_counts(ensemble: Ensemble, grid: PhaseSpaceGrid, species=0, absolute=False) -> np.ndarray:
    """Integer signed counts per (spatial cell, momentum index) along one axis.

    ``grid`` is one-dimensional (or the matching axis of a multi-dimensional
    grid is used). With ``absolute=True`` the unsigned occupancy is returned.
    """
    a = _axis(ensemble, species)
    g = grid.axis(a) if grid.ndim > 1 else grid
    x = ensemble.x[:, a]
    ix = np.floor((x - g.origin[0]) / g.dx[0]).astype(np.int64)
    inside = (ix >= 0) & (ix < g.nx[0])
    m = np.clip(np.rint(ensemble.k[:, a] / g.dk[0]).astype(np.int64), -g.m_max[0], g.m_max[0]) + g.m_max[0]
    width = 2 * g.m_max[0] + 1
    flat = ix[inside] * width + m[inside]
    weights = np.ones(flat.size) if absolute else ensemble.sign[inside].astype(float)
    counts = np.bincount(flat, weights=weights, minlength=g.nx[0] * width)
    return np.rint(counts).astype(np.int64).reshape(g.nx[0], width)


def marginal_density(ensemble: Ensemble, grid: PhaseSpaceGrid, species=0) -> np.ndarray:
    """Signed spatial histogram / (n0 * cell width); other coordinates are marginalised."""
    a = _axis(ensemble, species)
    counts = signed_cell_counts(ensemble, grid, a).sum(axis=1)
    return counts / (ensemble.n0 * grid.dx[a if grid.ndim > 1 else 0])


def quasi_distribution(ensemble: Ensemble, grid: PhaseSpaceGrid, species=0) -> np.ndarray:
    """Signed phase-space histogram / (n0 * cell area), shape (nx, 2 m_max + 1)."""
    a = _axis(ensemble, species)
    g = grid.axis(a) if grid.ndim > 1 else grid
    return signed_cell_counts(ensemble, grid, a) / (ensemble.n0 * g.dx[0] * g.dk[0])


def quasi_noise_floor(ensemble: Ensemble, grid: PhaseSpaceGrid, species=0) -> np.ndarray:
    """One-sigma sampling noise per cell, ``sqrt(occupancy) / (n0 * cell area)``."""
    a = _axis(ensemble, species)
    g = grid.axis(a) if grid.ndim > 1 else grid
    occupancy = signed_cell_counts(ensemble, grid, a, absolute=True)
    return np.sqrt(occupancy) / (ensemble.n0 * g.dx[0] * g.dk[0])


def negative_significance(ensemble: Ensemble, grid: PhaseSpaceGrid, species=0) -> float:
    """Largest ``-value / noise`` over occupied cells; above 5 means a clear negative cell."""
    counts = signed_cell_counts(ensemble, grid, species)
    occupancy = signed_cell_counts(ensemble, grid, species, absolute=True)
    occupied = occupancy > 0
    if not np.any(occupied):
        return 0.0
    return float(np.max(-counts[occupied] / np.sqrt(occupancy[occupied])))


def relative_difference(rho0, rho_t) -> np.ndarray:
    """``(rho_t - rho0) / max(rho0)`` node by node."""
    rho0 = np.asarray(rho0, dtype=float)
    rho_t = np.asarray(rho_t, dtype=float)
    if rho0.shape != rho_t.shape:
        raise ConfigurationError("densities must share a grid")
    peak = np.max(rho0) if rho0.size else 0.0
    if not peak > 0:
        raise ConfigurationError("reference density has no positive maximum")
    return (rho_t - rho0) / peak


def _signed_quantile(values, weights, q):
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    total = cum[-1]
    hit = np.flatnonzero(cum >= q * total)
    return float(values[order][hit[0]]) if hit.size else float(values[order][-1])


def pair_separation_stats(ensemble: Ensemble) -> dict:
    """Signed-weighted mean and 50% / 68% quantile radii of ``|x_e - x_p|``."""
    if ensemble.ndim != 2:
        raise ConfigurationError("pair separation needs a two-body ensemble")
    if len(ensemble) == 0:
        raise ConfigurationError("empty ensemble")
    r = np.abs(ensemble.x[:, 0] - ensemble.x[:, 1])
    w = ensemble.sign.astype(float)
    total = w.sum()
    if total == 0:
        raise ConfigurationError("ensemble has zero net weight")
    return {
        "mean": float(np.dot(w, r) / total),
        "q50": _signed_quantile(r, w, 0.5),
        "q68": _signed_quantile(r, w, 0.68),
    }


def take_snapshot(ensemble: Ensemble, time: float, grid: PhaseSpaceGrid, leaked: int = 0, keep_ensemble=False) -> EnsembleSnapshot:
    """Densities and quasi-distributions for every axis plus scalar diagnostics."""
    snap = EnsembleSnapshot(time=time, ensemble=ensemble.copy() if keep_ensemble else None)
    for a, sp in enumerate(ensemble.species):
        name = sp.name if ensemble.ndim > 1 else "x"
        snap.densities[name] = marginal_density(ensemble, grid, a)
        snap.quasi[name] = quasi_distribution(ensemble, grid, a)
    snap.diagnostics = {
        "signed_sum": ensemble.signed_sum(),
        "leaked": int(leaked),
        "particles": len(ensemble),
        "min_cell": float(min(q.min() for q in snap.quasi.values())),
    }
    return snap
