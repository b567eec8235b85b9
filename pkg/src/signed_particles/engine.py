"""Time-stepped signed-particle evolution: drift, pair creation, annihilation."""

from __future__ import annotations

import logging
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR_OVER_ME
from .errors import ConfigurationError, ParticleCapExceeded
from .kernel import WignerKernelTable
from .phase_space import Ensemble, PhaseSpaceGrid, RandomStream, SignedParticle, cell_keys

log = logging.getLogger(__name__)


@dataclass
class EvolutionConfig:
    dt: float
    total_time: float
    annihilation_period: int = 20
    snapshot_period: int = 10
    particle_cap: int = 50_000_000
    creation_bound: float = 0.1
    workers: int = 1
    creation: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if self.total_time < 0:
            raise ConfigurationError("total_time must be non-negative")
        if self.annihilation_period < 1:
            raise ConfigurationError("annihilation_period must be at least 1")
        if self.snapshot_period < 1:
            raise ConfigurationError("snapshot_period must be at least 1")
        if self.particle_cap < 1:
            raise ConfigurationError("particle_cap must be positive")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")

    @property
    def steps(self) -> int:
        return int(round(self.total_time / self.dt))


@dataclass
class StepRecord:
    step: int
    time: float
    particles: int
    signed_sum: int
    leaked: int
    created: int
    annihilated: int


@dataclass
class RunResult:
    snapshots: list = field(default_factory=list)
    records: list = field(default_factory=list)
    ensemble: Ensemble | None = None
    leaked: int = 0
    created: int = 0
    aborted: bool = False
    wall_time: float = 0.0


def velocities(k: np.ndarray, masses) -> np.ndarray:
    return HBAR_OVER_ME * k / np.asarray(masses, dtype=float)


def drift(particle: SignedParticle, dt: float) -> SignedParticle:
    """Free streaming ``x += hbar k / m * dt``; momentum and sign unchanged."""
    if dt < 0:
        raise ConfigurationError("dt must be non-negative")
    masses = [s.mass for s in particle.species]
    x = np.array(particle.position) + velocities(np.array(particle.momentum), masses) * dt
    return SignedParticle(tuple(x), particle.momentum, particle.sign, particle.species)


def kernel_coordinate(table: WignerKernelTable, x: np.ndarray) -> np.ndarray:
    """Coordinate used for kernel lookups: x itself, or x_e - x_p for pairs."""
    if table.two_body:
        return x[:, 0] - x[:, 1]
    return x[:, 0]


def _offspring(x, k, sign, q, two_body):
    """Pair for each creator: (+s at k + q, -s at k - q) along the kernel direction."""
    shift = np.zeros_like(k)
    shift[:, 0] = q
    if two_body:
        shift[:, 1] = -q
    xs = np.concatenate([x, x])
    ks = np.concatenate([k + shift, k - shift])
    ss = np.concatenate([sign, -sign]).astype(np.int8)
    return xs, ks, ss


def create_pairs(x, k, sign, table: WignerKernelTable, dt: float, rng: np.random.Generator):
    """Vectorised creation step for one partition of the ensemble.

    Each particle draws one uniform against ``gamma(x) dt``; creators draw a
    lattice offset from their node's normalised positive kernel.
    """
    n = sign.shape[0]
    if n == 0:
        return x[:0], k[:0], sign[:0]
    node = table.node_index(kernel_coordinate(table, x))
    u = rng.random(n)
    create = u < table.gamma[node] * dt
    if not np.any(create):
        return x[:0], k[:0], sign[:0]
    idx = np.flatnonzero(create)
    m = table.sample_offsets(node[idx], rng.random(idx.size))
    return _offspring(x[idx], k[idx], sign[idx], m * table.dk, table.two_body)


def sample_creation(particle: SignedParticle, table: WignerKernelTable, dt: float, rng: np.random.Generator) -> list:
    """Zero or two offspring of one particle over ``dt``; the parent is untouched."""
    x = np.array([particle.position])
    k = np.array([particle.momentum])
    s = np.array([particle.sign], dtype=np.int8)
    xs, ks, ss = create_pairs(x, k, s, table, dt, rng)
    return [SignedParticle(tuple(a), tuple(b), int(c), particle.species) for a, b, c in zip(xs, ks, ss)]


def annihilate(ensemble: Ensemble, grid: PhaseSpaceGrid) -> Ensemble:
    """Cancel opposite signs cell by cell.

    Each cell keeps ``|net|`` particles of the majority sign, namely the
    first ones in ensemble order, so the signed count per cell is unchanged.
    Surviving particles keep their original relative order.
    """
    n = len(ensemble)
    if n == 0:
        return ensemble.copy()
    keys = cell_keys(ensemble.x, ensemble.k, grid)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    signs = ensemble.sign[order].astype(np.int64)
    starts = np.flatnonzero(np.r_[True, sorted_keys[1:] != sorted_keys[:-1]])
    counts = np.diff(np.r_[starts, n])
    net = np.add.reduceat(signs, starts)
    majority = np.repeat(np.sign(net), counts)
    is_major = signs == majority
    running = np.cumsum(is_major)
    before = np.repeat(running[starts] - is_major[starts], counts)
    rank = running - before - 1
    keep = is_major & (rank < np.repeat(np.abs(net), counts))
    kept = np.sort(order[keep])
    return ensemble.subset(kept)


def sample_gaussian_ensemble(n, x0, sigma_x, k0, grid: PhaseSpaceGrid, rng: np.random.Generator, species=None) -> Ensemble:
    """All-positive particles drawn from a minimum-uncertainty Wigner function.

    Per dimension: x ~ N(x0, sigma_x), k ~ N(k0, 1 / (2 sigma_x)). Draws
    falling outside the domain are redrawn.
    """
    d = grid.ndim
    x0, sigma_x, k0 = (np.broadcast_to(np.atleast_1d(np.asarray(v, float)), (d,)) for v in (x0, sigma_x, k0))
    sigma_k = 0.5 / sigma_x
    x = np.empty((n, d))
    k = np.empty((n, d))
    todo = np.arange(n)
    while todo.size:
        x[todo] = x0 + sigma_x * rng.standard_normal((todo.size, d))
        k[todo] = k0 + sigma_k * rng.standard_normal((todo.size, d))
        todo = todo[~grid.contains(x[todo])]
    kwargs = {} if species is None else {"species": species}
    return Ensemble(x, k, np.ones(n, dtype=np.int8), n, **kwargs)


def check_time_step(config: EvolutionConfig, table, grid: PhaseSpaceGrid, ensemble: Ensemble):
    """Startup checks on dt: creation probability bound and one-cell drift."""
    if table is not None and config.creation:
        gdt = table.gamma_max * config.dt
        if gdt > config.creation_bound:
            raise ConfigurationError(
                f"gamma_max*dt = {gdt:.3g} exceeds {config.creation_bound}; "
                f"use dt <= {config.creation_bound / table.gamma_max:.3g} fs"
            )
    kmax = np.max(np.abs(ensemble.k), axis=0) if len(ensemble) else np.zeros(grid.ndim)
    if table is not None and config.creation:
        kmax = kmax + table.m_max * table.dk
    step = np.abs(velocities(kmax, ensemble.masses)) * config.dt
    if np.any(step > grid.dx * (1 + 1e-9)):
        raise ConfigurationError(
            f"dt={config.dt:g} fs lets the fastest particle drift {np.max(step / grid.dx):.3g} cells per step (limit 1)"
        )


def run(
    ensemble: Ensemble,
    table: WignerKernelTable | None,
    grid: PhaseSpaceGrid,
    config: EvolutionConfig,
    stream: RandomStream,
    snapshot=None,
) -> RunResult:
    """Evolve ``ensemble`` for ``config.total_time``.

    Per step: drift all particles, absorb those leaving the domain, sample
    creations into a pending buffer, merge it, annihilate every
    ``annihilation_period`` steps and call ``snapshot(ensemble, time, result)``
    every ``snapshot_period`` steps (and at t = 0). The callback's return
    values are collected in ``result.snapshots``.
    """
    check_time_step(config, table, grid, ensemble)
    started = _time.perf_counter()
    result = RunResult()
    generators = stream.workers(config.workers)
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    masses = ensemble.masses
    ens = ensemble.copy()
    t0 = 0.0

    def record(step, created, annihilated):
        rec = StepRecord(step, t0 + step * config.dt, len(ens), ens.signed_sum(), result.leaked, created, annihilated)
        result.records.append(rec)
        return rec

    def take_snapshot(step):
        if snapshot is not None:
            result.snapshots.append(snapshot(ens, t0 + step * config.dt, result))

    record(0, 0, 0)
    take_snapshot(0)
    try:
        for step in range(1, config.steps + 1):
            ens.x += velocities(ens.k, masses) * config.dt
            inside = grid.contains(ens.x)
            if not np.all(inside):
                result.leaked += int(ens.sign[~inside].sum(dtype=np.int64))
                ens = ens.subset(inside)

            created = 0
            if table is not None and config.creation and len(ens):
                bounds = np.linspace(0, len(ens), config.workers + 1).astype(int)
                parts = [slice(bounds[w], bounds[w + 1]) for w in range(config.workers)]

                def work(w):
                    sl = parts[w]
                    return create_pairs(ens.x[sl], ens.k[sl], ens.sign[sl], table, config.dt, generators[w])

                buffers = list(pool.map(work, range(config.workers))) if pool else [work(0)]
                xs = [b[0] for b in buffers if b[2].size]
                if xs:
                    new_x = np.concatenate(xs)
                    new_k = np.concatenate([b[1] for b in buffers if b[2].size])
                    new_s = np.concatenate([b[2] for b in buffers if b[2].size])
                    created = new_s.size // 2
                    ens = ens.extend(new_x, new_k, new_s)
                    result.created += created

            annihilated = 0
            if step % config.annihilation_period == 0:
                before = len(ens)
                ens = annihilate(ens, grid)
                annihilated = before - len(ens)

            rec = record(step, created, annihilated)
            if len(ens) > config.particle_cap:
                result.aborted = True
                log.error("event=abort step=%d particles=%d cap=%d", step, len(ens), config.particle_cap)
                raise ParticleCapExceeded(
                    f"ensemble reached {len(ens)} particles (cap {config.particle_cap}) at step {step}", result
                )
            if step % config.snapshot_period == 0 or step == config.steps:
                take_snapshot(step)
                log.info(
                    "step=%d time=%.6g particles=%d signed_sum=%d leaked=%d created=%d",
                    rec.step, rec.time, rec.particles, rec.signed_sum, rec.leaked, result.created,
                )
    finally:
        if pool is not None:
            pool.shutdown()
        result.ensemble = ens
        result.wall_time = _time.perf_counter() - started
    return result
