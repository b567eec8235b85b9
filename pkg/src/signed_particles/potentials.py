"""Potential energy models for one particle (1D) and an interacting pair (2D).

Every model is a callable taking positions in nm and returning energies in eV.
One-dimensional models accept arrays of any shape; the pair model takes an
array whose last axis holds ``(x_electron, x_proton)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import COULOMB
from .errors import ConfigurationError


class Potential:
    ndim = 1
    # Smallest length over which the potential changes appreciably (nm).
    length_scale = np.inf
    # Interval outside which the potential is constant, or None if unbounded.
    support = None

    def __call__(self, x):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantPotential(Potential):
    """V(x) = value everywhere; the zero potential is the default."""

    value: float = 0.0

    def __call__(self, x):
        return np.full(np.shape(x), float(self.value))

    @property
    def support(self):
        return (0.0, 0.0)


@dataclass(frozen=True)
class GaussianBarrier(Potential):
    """V(x) = height * exp(-(x - center)^2 / (2 sigma^2)).

    ``height`` is the barrier peak H > 0. Written with a negative amplitude U
    as ``V = -U exp(...)``, the mapping is simply ``H = -U``.
    """

    height: float
    sigma: float
    center: float = 0.0

    def __post_init__(self):
        if not self.height > 0:
            raise ConfigurationError("gaussian barrier height must be positive")
        if not self.sigma > 0:
            raise ConfigurationError("gaussian barrier sigma must be positive")

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.sigma
        return self.height * np.exp(-0.5 * u * u)

    @property
    def length_scale(self):
        return self.sigma

    @property
    def support(self):
        # exp(-u^2/2) < 1e-22 beyond 10 sigma
        return (self.center - 10.0 * self.sigma, self.center + 10.0 * self.sigma)


@dataclass(frozen=True)
class AbruptBarrier(Potential):
    """Rectangular barrier of ``height`` on ``[left, right]``."""

    height: float
    left: float = -3.0
    right: float = 3.0

    def __post_init__(self):
        if not self.right > self.left:
            raise ConfigurationError("abrupt barrier needs right > left")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.left) & (x <= self.right), float(self.height), 0.0)

    @property
    def length_scale(self):
        return (self.right - self.left) / 64.0

    @property
    def support(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class SoftCoulombPair(Potential):
    """Electron-proton attraction ``-C / sqrt(r^2 + a^2)`` with ``r = x_e - x_p``."""

    coupling: float = COULOMB
    softening: float = 0.01
    ndim = 2

    def __post_init__(self):
        if not self.softening > 0:
            raise ConfigurationError("soft-core softening must be positive")

    def relative(self, r):
        r = np.asarray(r, dtype=float)
        return -self.coupling / np.sqrt(r * r + self.softening**2)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != 2:
            raise ConfigurationError("soft_coulomb_pair needs (x_electron, x_proton) coordinates")
        return self.relative(x[..., 0] - x[..., 1])

    @property
    def length_scale(self):
        return self.softening


@dataclass(frozen=True)
class RelativePotential(Potential):
    """One-dimensional view V(r) of a pair potential depending only on r."""

    pair: SoftCoulombPair

    def __call__(self, r):
        return self.pair.relative(r)

    @property
    def length_scale(self):
        return self.pair.length_scale


class TabulatedPotential(Potential):
    """Samples on a uniform grid, linearly interpolated and clamped at the edges."""

    def __init__(self, x, values):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape or x.size < 2:
            raise ConfigurationError("tabulated potential needs at least two (x, V) samples")
        step = np.diff(x)
        if not np.all(step > 0) or not np.allclose(step, step[0], rtol=1e-9, atol=0.0):
            raise ConfigurationError("tabulated potential samples must be uniformly spaced")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("tabulated potential contains non-finite values")
        self.x = x
        self.values = values
        self.length_scale = float(step[0])
        self.support = None

    @classmethod
    def from_file(cls, path, delimiter=None):
        data = np.loadtxt(path, comments="#", delimiter=delimiter, ndmin=2)
        if data.shape[1] < 2:
            raise ConfigurationError(f"{path}: expected two columns (x in nm, V in eV)")
        return cls(data[:, 0], data[:, 1])

    @classmethod
    def sample(cls, potential, x):
        return cls(x, potential(np.asarray(x, dtype=float)))

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.x, self.values)


def evaluate(potential: Potential, x):
    """Evaluate ``potential`` at a point or an array of points.

    A point given as a tuple must have one coordinate per model dimension.
    Arrays for the pair model carry ``(x_e, x_p)`` on their last axis;
    arrays for one-dimensional models may have any shape.
    """
    if isinstance(x, (tuple, list)) and len(x) != potential.ndim:
        raise ConfigurationError(
            f"point has {len(x)} coordinates, potential expects {potential.ndim}"
        )
    x = np.asarray(x, dtype=float)
    if potential.ndim == 2 and (x.ndim == 0 or x.shape[-1] != 2):
        raise ConfigurationError("a two-body potential needs two coordinates per point")
    if potential.ndim == 1 and isinstance(x, np.ndarray) and x.ndim == 1 and x.size == 1:
        return potential(x)[0]
    return potential(x)


def relative_coordinate_form(potential: Potential):
    """Return V(r) for pair potentials depending only on ``x_e - x_p``, else None."""
    if isinstance(potential, SoftCoulombPair):
        return RelativePotential(potential)
    return None
