"""Core phase-space types: particles, ensembles, the semi-discrete grid and
seeded random streams."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainExit

# Offset used to fold signed momentum indices into non-negative key digits.
_MOMENTUM_RADIX = 1 << 20


@dataclass(frozen=True)
class Species:
    name: str
    mass: float  # electron masses


ELECTRON = Species("electron", 1.0)
PROTON = Species("proton", 1836.0)
GENERIC = Species("generic", 1.0)


@dataclass(frozen=True)
class SignedParticle:
    """A classical point particle carrying a sign of +1 or -1.

    ``position`` and ``momentum`` hold one entry per spatial dimension
    (nm and 1/nm respectively); ``species`` holds one entry per dimension
    as well, so a two-body configuration point is a single particle in a
    two-dimensional configuration space.
    """

    position: tuple
    momentum: tuple
    sign: int
    species: tuple = (GENERIC,)

    def __post_init__(self):
        pos = tuple(float(v) for v in np.atleast_1d(self.position))
        mom = tuple(float(v) for v in np.atleast_1d(self.momentum))
        species = self.species
        if isinstance(species, Species):
            species = (species,) * len(pos)
        species = tuple(species)
        if len(pos) != len(mom) or len(species) != len(pos):
            raise ConfigurationError("position, momentum and species must have equal length")
        if self.sign not in (1, -1):
            raise ConfigurationError(f"sign must be +1 or -1, got {self.sign!r}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "momentum", mom)
        object.__setattr__(self, "species", species)
        object.__setattr__(self, "sign", int(self.sign))

    @property
    def ndim(self) -> int:
        return len(self.position)


def _as_tuple(value, ndim, cast=float):
    if value is None:
        return None
    arr = np.atleast_1d(value)
    if arr.size == 1 and ndim > 1:
        arr = np.repeat(arr, ndim)
    return tuple(cast(v) for v in arr)


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Semi-discrete phase-space lattice.

    Each spatial dimension ``d`` covers ``[origin[d], origin[d] + length[d])``
    split into ``nx[d]`` cells. Momentum is quantised in steps
    ``dk = pi / coherence_length`` and the kernel lattice spans indices
    ``-m_max .. +m_max``. Scalars are broadcast to all ``ndim`` dimensions;
    the origin defaults to a domain centred on zero.
    """

    length: tuple
    nx: tuple
    m_max: tuple = 64
    coherence_length: tuple | None = None
    origin: tuple | None = None
    ndim: int = 1

    def __post_init__(self):
        n = self.ndim
        if n not in (1, 2):
            raise ConfigurationError("only one or two spatial dimensions are supported")
        length = _as_tuple(self.length, n)
        nx = _as_tuple(self.nx, n, int)
        m_max = _as_tuple(self.m_max, n, int)
        lc = _as_tuple(self.coherence_length, n) if self.coherence_length is not None else length
        origin = (
            _as_tuple(self.origin, n)
            if self.origin is not None
            else tuple(-0.5 * v for v in length)
        )
        for name, vals in (("length", length), ("nx", nx), ("m_max", m_max), ("coherence_length", lc), ("origin", origin)):
            if len(vals) != n:
                raise ConfigurationError(f"{name} must have {n} entries")
        if any(v <= 0 for v in length):
            raise ConfigurationError("length must be positive")
        if any(v <= 0 for v in lc):
            raise ConfigurationError("coherence_length must be positive")
        if any(v < 2 for v in nx):
            raise ConfigurationError("nx must be at least 2")
        if any(v < 1 for v in m_max):
            raise ConfigurationError("m_max must be at least 1")
        object.__setattr__(self, "length", length)
        object.__setattr__(self, "nx", nx)
        object.__setattr__(self, "m_max", m_max)
        object.__setattr__(self, "coherence_length", lc)
        object.__setattr__(self, "origin", origin)

    @property
    def dx(self) -> np.ndarray:
        return np.asarray(self.length) / np.asarray(self.nx)

    @property
    def dk(self) -> np.ndarray:
        return np.pi / np.asarray(self.coherence_length)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(self.length)

    def centers(self, axis: int = 0) -> np.ndarray:
        """Spatial cell centres along one axis."""
        return self.origin[axis] + (np.arange(self.nx[axis]) + 0.5) * self.dx[axis]

    def edges(self, axis: int = 0) -> np.ndarray:
        return self.origin[axis] + np.arange(self.nx[axis] + 1) * self.dx[axis]

    def axis(self, axis: int) -> "PhaseSpaceGrid":
        """One-dimensional grid for a single axis of a multi-dimensional grid."""
        return PhaseSpaceGrid(
            length=self.length[axis],
            nx=self.nx[axis],
            m_max=self.m_max[axis],
            coherence_length=self.coherence_length[axis],
            origin=self.origin[axis],
        )

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Boolean mask of positions (shape (n, ndim)) inside the domain."""
        x = np.asarray(x, dtype=float).reshape(-1, self.ndim)
        lo = np.asarray(self.origin)
        return np.all((x >= lo) & (x < lo + np.asarray(self.length)), axis=1)


def momentum_lattice(grid: PhaseSpaceGrid, axis: int = 0) -> np.ndarray:
    """Ordered momentum values ``M * dk`` for ``M = -m_max .. m_max``."""
    m = grid.m_max[axis]
    return np.arange(-m, m + 1) * grid.dk[axis]


def spatial_indices(x: np.ndarray, grid: PhaseSpaceGrid) -> np.ndarray:
    """Spatial cell indices, shape (n, ndim); raises DomainExit if any is outside."""
    x = np.asarray(x, dtype=float).reshape(-1, grid.ndim)
    idx = np.floor((x - np.asarray(grid.origin)) / grid.dx).astype(np.int64)
    if np.any(idx < 0) or np.any(idx >= np.asarray(grid.nx)):
        raise DomainExit("position outside the simulation domain")
    return idx


def momentum_indices(k: np.ndarray, grid: PhaseSpaceGrid) -> np.ndarray:
    k = np.asarray(k, dtype=float).reshape(-1, grid.ndim)
    return np.rint(k / grid.dk).astype(np.int64)


def cell_index(particle: SignedParticle, grid: PhaseSpaceGrid) -> tuple:
    """Cell identifier ``(ix_0, .., m_0, ..)`` of a single particle.

    Raises :class:`DomainExit` for positions outside the domain; the caller
    is expected to remove such particles.
    """
    if particle.ndim != grid.ndim:
        raise ConfigurationError("particle and grid dimensionality differ")
    ix = spatial_indices(np.array(particle.position), grid)[0]
    m = momentum_indices(np.array(particle.momentum), grid)[0]
    return tuple(int(v) for v in ix) + tuple(int(v) for v in m)


def cell_keys(x: np.ndarray, k: np.ndarray, grid: PhaseSpaceGrid) -> np.ndarray:
    """Vectorised cell identifiers packed into int64 keys."""
    ix = spatial_indices(x, grid)
    m = momentum_indices(k, grid)
    if np.any(np.abs(m) >= _MOMENTUM_RADIX // 2):
        raise ConfigurationError("momentum index exceeds the cell-key range")
    key = np.zeros(ix.shape[0], dtype=np.int64)
    for d in range(grid.ndim):
        key = key * grid.nx[d] + ix[:, d]
    for d in range(grid.ndim):
        key = key * _MOMENTUM_RADIX + (m[:, d] + _MOMENTUM_RADIX // 2)
    return key


@dataclass
class Ensemble:
    """Structure-of-arrays ensemble of signed particles.

    ``x`` and ``k`` have shape (n, ndim); ``sign`` holds int8 values of +1 or
    -1. ``n0`` is the initial particle count used to normalise averages.
    """

    x: np.ndarray
    k: np.ndarray
    sign: np.ndarray
    n0: int
    species: tuple = (GENERIC,)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.k = np.asarray(self.k, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        if self.k.ndim == 1:
            self.k = self.k[:, None]
        self.sign = np.asarray(self.sign, dtype=np.int8)
        if isinstance(self.species, Species):
            self.species = (self.species,) * self.x.shape[1]
        self.species = tuple(self.species)
        if self.x.shape != self.k.shape or self.sign.shape != (self.x.shape[0],):
            raise ConfigurationError("inconsistent ensemble array shapes")
        if len(self.species) != self.x.shape[1]:
            raise ConfigurationError("one species entry is needed per dimension")
        if self.n0 <= 0:
            raise ConfigurationError("initial count n0 must be positive")

    @classmethod
    def from_particles(cls, particles: Sequence[SignedParticle], n0: int | None = None) -> "Ensemble":
        particles = list(particles)
        if not particles:
            raise ConfigurationError("cannot build an ensemble from no particles")
        x = np.array([p.position for p in particles])
        k = np.array([p.momentum for p in particles])
        s = np.array([p.sign for p in particles])
        return cls(x, k, s, n0 or len(particles), particles[0].species)

    def particles(self) -> Iterable[SignedParticle]:
        for x, k, s in zip(self.x, self.k, self.sign):
            yield SignedParticle(tuple(x), tuple(k), int(s), self.species)

    def __len__(self) -> int:
        return self.sign.shape[0]

    @property
    def ndim(self) -> int:
        return self.x.shape[1]

    @property
    def masses(self) -> np.ndarray:
        return np.array([s.mass for s in self.species])

    def signed_sum(self) -> int:
        return int(self.sign.sum(dtype=np.int64))

    def subset(self, index) -> "Ensemble":
        return Ensemble(self.x[index], self.k[index], self.sign[index], self.n0, self.species)

    def extend(self, x, k, sign) -> "Ensemble":
        return Ensemble(
            np.concatenate([self.x, x]),
            np.concatenate([self.k, k]),
            np.concatenate([self.sign, np.asarray(sign, dtype=np.int8)]),
            self.n0,
            self.species,
        )

    def copy(self) -> "Ensemble":
        return Ensemble(self.x.copy(), self.k.copy(), self.sign.copy(), self.n0, self.species)


@dataclass(frozen=True)
class RandomStream:
    """Seeded source of independent numpy generators.

    Streams are addressed by a purpose tag and a worker id, so the initial
    condition, the creation draws of worker 0, worker 1, ... never share
    state. Equal seeds give equal streams.
    """

    seed: int
    worker: int = 0

    def generator(self, purpose: str = "creation", worker: int | None = None) -> np.random.Generator:
        tag = sum(ord(c) << (8 * i) for i, c in enumerate(purpose[:7]))
        w = self.worker if worker is None else worker
        seq = np.random.SeedSequence(entropy=int(self.seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(tag, w))
        return np.random.Generator(np.random.PCG64(seq))

    def workers(self, n: int, purpose: str = "creation") -> list:
        return [self.generator(purpose, w) for w in range(n)]
