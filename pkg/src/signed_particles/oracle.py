"""Wavefunction reference: split-operator propagation and the Wigner transform.

Used only to validate the signed-particle engine. Wavefunction nodes sit at
``origin + (j + 0.5) * dx`` so that, with an odd refinement ratio, every
phase-space cell centre of the engine grid is also a wavefunction node.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .constants import HBAR, HBAR_OVER_ME
from .errors import ConfigurationError
from .phase_space import PhaseSpaceGrid


@dataclass
class WaveFunction:
    psi: np.ndarray
    origin: tuple
    dx: tuple
    masses: tuple = (1.0,)
    time: float = 0.0

    @property
    def ndim(self) -> int:
        return self.psi.ndim

    def axis_nodes(self, axis: int = 0) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.psi.shape[axis]) + 0.5) * self.dx[axis]

    def mesh(self):
        return np.meshgrid(*[self.axis_nodes(a) for a in range(self.ndim)], indexing="ij")

    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * np.prod(self.dx))

    def density(self, axis: int = 0) -> np.ndarray:
        """Position probability density along one axis (other axes integrated)."""
        rho = np.abs(self.psi) ** 2
        others = tuple(a for a in range(self.ndim) if a != axis)
        if others:
            rho = rho.sum(axis=others) * np.prod([self.dx[a] for a in others])
        return rho


def wavefunction_grid(grid: PhaseSpaceGrid, refine: int = 1) -> dict:
    """Wavefunction lattice whose nodes include every cell centre of ``grid``."""
    if refine < 1 or refine % 2 == 0:
        raise ConfigurationError("refine must be a positive odd integer")
    return {
        "origin": tuple(grid.origin),
        "dx": tuple(float(d) / refine for d in grid.dx),
        "shape": tuple(n * refine for n in grid.nx),
    }


def gaussian_packet(origin, dx, shape, x0, sigma, k0, masses=(1.0,)) -> WaveFunction:
    """Normalised product of minimum-uncertainty packets, one per axis.

    ``sigma`` is the position standard deviation of |psi|^2.
    """
    origin, dx, shape = tuple(np.atleast_1d(origin)), tuple(np.atleast_1d(dx)), tuple(np.atleast_1d(shape))
    x0, sigma, k0 = (np.broadcast_to(np.atleast_1d(v), (len(shape),)) for v in (x0, sigma, k0))
    psi = np.ones(shape, dtype=complex)
    for a, n in enumerate(shape):
        x = origin[a] + (np.arange(n) + 0.5) * dx[a]
        f = np.exp(-((x - x0[a]) ** 2) / (4.0 * sigma[a] ** 2) + 1j * k0[a] * x)
        psi = psi * f.reshape([-1 if b == a else 1 for b in range(len(shape))])
    wf = WaveFunction(psi, tuple(float(v) for v in origin), tuple(float(v) for v in dx), tuple(masses))
    wf.psi /= np.sqrt(wf.norm())
    return wf


def _wave_numbers(wf: WaveFunction):
    return [2.0 * np.pi * np.fft.fftfreq(n, d) for n, d in zip(wf.psi.shape, wf.dx)]


def max_kinetic_energy(wf: WaveFunction) -> float:
    """Largest kinetic energy (eV) representable on the wavefunction grid."""
    return float(
        sum(0.5 * HBAR * HBAR_OVER_ME * (np.pi / d) ** 2 / m for d, m in zip(wf.dx, wf.masses))
    )


def split_step_evolve(wf: WaveFunction, potential, dt: float, steps: int) -> WaveFunction:
    """Strang splitting: half kinetic, potential, half kinetic per step.

    Consecutive half kinetic steps are fused, which leaves the result
    unchanged. Requires ``dt * E_max / hbar < 0.5`` for the grid's largest
    kinetic energy.
    """
    if not dt > 0 or steps < 0:
        raise ConfigurationError("dt must be positive and steps non-negative")
    if len(wf.masses) != wf.ndim:
        raise ConfigurationError("one mass per wavefunction axis is required")
    if dt * max_kinetic_energy(wf) / HBAR >= 0.5:
        raise ConfigurationError(
            f"dt={dt:g} fs does not resolve the grid's fastest phase; use dt < {0.5 * HBAR / max_kinetic_energy(wf):.3g} fs"
        )
    out = WaveFunction(wf.psi.copy(), wf.origin, wf.dx, wf.masses, wf.time)
    if steps == 0:
        return out
    grids = np.meshgrid(*_wave_numbers(wf), indexing="ij")
    # hbar k^2 / (2 m) in rad/fs
    omega = sum(0.5 * HBAR_OVER_ME * kk**2 / m for kk, m in zip(grids, wf.masses))
    half_kin = np.exp(-0.5j * omega * dt)
    full_kin = half_kin * half_kin
    if potential is None:
        v = np.zeros(wf.psi.shape)
    else:
        pts = wf.mesh()
        v = potential(pts[0]) if wf.ndim == 1 else potential(np.stack(pts, axis=-1))
    pot = np.exp(-1j * v * dt / HBAR)

    axes = tuple(range(wf.ndim))
    phi = np.fft.fftn(out.psi, axes=axes) * half_kin
    for step in range(steps):
        psi = np.fft.ifftn(phi, axes=axes) * pot
        phi = np.fft.fftn(psi, axes=axes)
        phi *= full_kin if step < steps - 1 else half_kin
    out.psi = np.fft.ifftn(phi, axes=axes)
    out.time = wf.time + steps * dt
    return out


def _refinement(wf: WaveFunction, grid: PhaseSpaceGrid, axis: int = 0) -> int:
    ratio = grid.dx[axis] / wf.dx[axis]
    refine = int(round(ratio))
    if (
        abs(ratio - refine) > 1e-9 * ratio
        or refine % 2 == 0
        or abs(wf.origin[axis] - grid.origin[axis]) > 1e-9 * grid.dx[axis]
        or wf.psi.shape[axis] != grid.nx[axis] * refine
    ):
        raise ConfigurationError(
            "wavefunction grid must refine the phase-space grid by an odd integer with a shared origin"
        )
    return refine


def wigner_transform(wf: WaveFunction, grid: PhaseSpaceGrid) -> np.ndarray:
    """Wigner function of a 1D pure state at the grid's cell centres.

    ``W(x, k) = (1/pi) sum_m dx psi*(x + m dx) psi(x - m dx) exp(2 i k m dx)``
    evaluated at ``k = M dk`` for ``M = -m_max .. m_max``; shape (nx, 2 m_max + 1).
    """
    if wf.ndim != 1 or grid.ndim != 1:
        raise ConfigurationError("wigner_transform handles one-dimensional states only")
    refine = _refinement(wf, grid)
    n = wf.psi.size
    h = wf.dx[0]
    centre = (np.arange(grid.nx[0]) * refine + (refine - 1) // 2)
    m = np.arange(-(n - 1), n)
    padded = np.concatenate([np.zeros(n - 1, complex), wf.psi, np.zeros(n - 1, complex)])
    plus = padded[(centre[:, None] + m[None, :]) + n - 1]
    minus = padded[(centre[:, None] - m[None, :]) + n - 1]
    corr = np.conj(plus) * minus
    keep = np.any(corr != 0, axis=0)
    corr, m = corr[:, keep], m[keep]
    k = np.arange(-grid.m_max[0], grid.m_max[0] + 1) * grid.dk[0]
    phase = np.exp(2j * np.outer(m * h, k))
    return ((corr @ phase).real * h / np.pi)


def compare(particles: np.ndarray, oracle: np.ndarray, dx: float = 1.0, dk: float = 1.0) -> dict:
    """Normalised L1 / Linf errors of two cell-aligned quasi-distributions.

    The marginal errors integrate over momentum (``marginal_l1``) and over
    position (``momentum_marginal_l1``).
    """
    a = np.asarray(particles, dtype=float)
    b = np.asarray(oracle, dtype=float)
    if a.shape != b.shape:
        raise ConfigurationError(f"grid mismatch: {a.shape} vs {b.shape}")
    total = np.sum(np.abs(b))
    peak = np.max(np.abs(b))
    ma, mb = a.sum(axis=1) * dk, b.sum(axis=1) * dk
    pa, pb = a.sum(axis=0) * dx, b.sum(axis=0) * dx
    return {
        "l1": float(np.sum(np.abs(a - b)) / total) if total > 0 else 0.0,
        "linf": float(np.max(np.abs(a - b)) / peak) if peak > 0 else 0.0,
        "marginal_l1": float(np.sum(np.abs(ma - mb)) / np.sum(np.abs(mb))) if np.any(mb) else 0.0,
        "momentum_marginal_l1": float(np.sum(np.abs(pa - pb)) / np.sum(np.abs(pb))) if np.any(pb) else 0.0,
    }


def cell_density(wf: WaveFunction, grid: PhaseSpaceGrid, axis: int = 0) -> np.ndarray:
    """|psi|^2 averaged over each phase-space cell along ``axis``."""
    rho = wf.density(axis)
    refine = int(round(grid.dx[axis] / wf.dx[axis]))
    if rho.size != grid.nx[axis] * refine:
        raise ConfigurationError("wavefunction grid does not tile the phase-space grid")
    return rho.reshape(grid.nx[axis], refine).mean(axis=1)


def advance(wf: WaveFunction, potential, dt: float, until: float) -> WaveFunction:
    """Evolve to time ``until`` with steps no longer than ``dt``."""
    span = until - wf.time
    if span < -1e-12:
        raise ConfigurationError("cannot evolve backwards in time")
    if span <= 1e-12:
        return replace(wf, psi=wf.psi.copy())
    steps = int(np.ceil(span / dt - 1e-9))
    return split_step_evolve(wf, potential, span / steps, steps)
