"""Scenario orchestration: build the physics from a RunConfig, run it and
write a self-describing output directory.

Layout of an output directory::

    config.resolved      resolved configuration, re-parseable with --config
    manifest.json        seed, versions, wall time, conservation residuals
    diagnostics.dat      per-step particle counts and conservation terms
    snapshots/NNNN_*.dat densities and quasi-distributions per snapshot
    figures/*.png        optional renderings of the tables above

Exit statuses: 0 success, 2 configuration error, 3 particle-cap abort,
4 numeric error.
"""

from __future__ import annotations

import json
import logging
import platform
import time as _time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, io, observables
from .config import RunConfig, to_lines
from .constants import HBAR
from .engine import EvolutionConfig, run, sample_gaussian_ensemble
from .errors import ConfigurationError, NumericError, ParticleCapExceeded
from .kernel import (
    classical_limit_scan,
    gamma_properties_check,
    gamma_series_partial,
    gaussian_gamma_quadrature,
    kernel_numeric,
    kernel_two_body,
)
from .oracle import advance, cell_density, gaussian_packet, max_kinetic_energy, wavefunction_grid, wigner_transform
from .phase_space import ELECTRON, PhaseSpaceGrid, RandomStream, Species
from .potentials import AbruptBarrier, ConstantPotential, GaussianBarrier, SoftCoulombPair, TabulatedPotential

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAP = 3
EXIT_NUMERIC = 4


def make_potential(cfg: RunConfig):
    p = cfg.potential
    if p.kind == "zero":
        return ConstantPotential(0.0)
    if p.kind == "gaussian":
        return GaussianBarrier(p.height, p.sigma, p.center)
    if p.kind == "abrupt":
        return AbruptBarrier(p.height, p.center - 0.5 * p.width, p.center + 0.5 * p.width)
    if p.kind == "soft_coulomb":
        return SoftCoulombPair(p.coupling, p.softening)
    if p.kind == "tabulated":
        return TabulatedPotential.from_file(p.file)
    raise ConfigurationError(f"potential.kind: unsupported {p.kind!r}")


def make_grid(cfg: RunConfig) -> PhaseSpaceGrid:
    d = cfg.domain
    if cfg.scenario == "hydrogen_1d":
        h = cfg.hydrogen
        return PhaseSpaceGrid(
            length=(d.length, h.proton_length),
            nx=(d.nx, h.proton_nx),
            m_max=d.m_max,
            coherence_length=cfg.coherence_length,
            ndim=2,
        )
    return PhaseSpaceGrid(length=d.length, nx=d.nx, m_max=d.m_max, coherence_length=cfg.coherence_length)


def reconstruction_grid(grid: PhaseSpaceGrid, nx: int = 0, stride: int = 1, axis: int = 0) -> PhaseSpaceGrid:
    """Coarser histogram grid for one axis: ``nx`` cells and a momentum step ``stride`` times larger."""
    g = grid.axis(axis) if grid.ndim > 1 else grid
    if not nx and stride == 1:
        return g
    return PhaseSpaceGrid(
        length=g.length[0],
        nx=nx or g.nx[0],
        m_max=max(1, g.m_max[0] // stride),
        coherence_length=g.coherence_length[0] / stride,
        origin=g.origin[0],
    )


def _species(cfg: RunConfig):
    if cfg.scenario == "hydrogen_1d":
        return (ELECTRON, Species("proton", cfg.hydrogen.proton_mass))
    return (Species("particle", cfg.packet.mass),)


def _manifest(out: Path, cfg: RunConfig, status: int, started: float, extra: dict):
    files = sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "scenario": cfg.scenario,
        "status": status,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "determinism": (
            "single worker: bit-exact for equal seed and config"
            if cfg.workers == 1
            else "multiple workers: per-worker streams depend on the partition; statistically equivalent across worker counts"
        ),
        "versions": {
            "signed_particles": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": round(_time.perf_counter() - started, 3),
        "files": files,
    }
    manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def execute(cfg: RunConfig, out_dir=None) -> int:
    """Run the configured scenario and return the exit status."""
    out = Path(out_dir or cfg.output.dir)
    started = _time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.resolved").write_text(to_lines(cfg))
    except OSError as exc:
        log.error("event=error kind=output message=%r", str(exc))
        return EXIT_CONFIG
    log.info("event=start scenario=%s seed=%d workers=%d out=%s", cfg.scenario, cfg.seed, cfg.workers, out)
    extra, status = {}, EXIT_OK
    try:
        if cfg.scenario == "kernel_report":
            extra = kernel_report(cfg, out)
        elif cfg.scenario == "classical_limit":
            extra = classical_limit(cfg, out)
        else:
            extra = particle_run(cfg, out)
    except ParticleCapExceeded as exc:
        status = EXIT_CAP
        extra = {"error": str(exc)}
        if exc.result is not None:
            _write_diagnostics(out, exc.result)
            extra.update(_conservation(exc.result, exc.result.records[0].signed_sum if exc.result.records else 0))
        log.error("event=abort kind=particle_cap message=%r", str(exc))
    except ConfigurationError as exc:
        status = EXIT_CONFIG
        extra = {"error": str(exc)}
        log.error("event=error kind=config message=%r", str(exc))
    except (NumericError, FloatingPointError) as exc:
        status = EXIT_NUMERIC
        extra = {"error": str(exc)}
        log.error("event=error kind=numeric message=%r", str(exc))
    _manifest(out, cfg, status, started, extra)
    log.info("event=finish status=%d wall_time=%.3f", status, _time.perf_counter() - started)
    return status


def _write_diagnostics(out: Path, result):
    recs = result.records
    cols = [[getattr(r, name) for r in recs] for name in ("step", "time", "particles", "signed_sum", "leaked", "created", "annihilated")]
    io.write_table(
        out / "diagnostics.dat",
        cols,
        ["step", "time_fs", "particles", "signed_sum", "leaked", "created", "annihilated"],
        {"note": "signed_sum + leaked is conserved exactly"},
    )


def _conservation(result, initial: int) -> dict:
    final = result.ensemble.signed_sum() if result.ensemble is not None else 0
    return {
        "initial_signed_sum": int(initial),
        "final_signed_sum": int(final),
        "leaked_signed_sum": int(result.leaked),
        "conservation_residual": int(initial - final - result.leaked),
        "created_pairs": int(result.created),
        "final_particles": int(len(result.ensemble)) if result.ensemble is not None else 0,
    }


def particle_run(cfg: RunConfig, out: Path) -> dict:
    """Signed-particle evolution of a Gaussian packet (or an electron-proton pair)."""
    grid = make_grid(cfg)
    potential = make_potential(cfg)
    species = _species(cfg)
    two_body = grid.ndim == 2
    t = _time.perf_counter()
    table = kernel_two_body(potential, grid) if two_body else kernel_numeric(potential, grid)
    log.info("event=kernel nodes=%d gamma_max=%.6g residue=%.3g seconds=%.3f", table.nodes.size, table.gamma_max, table.residue, _time.perf_counter() - t)

    stream = RandomStream(cfg.seed)
    if two_body:
        h = cfg.hydrogen
        x0, sx, k0 = (0.0, 0.0), (h.electron_sigma, h.proton_sigma), (0.0, 0.0)
    else:
        x0, sx, k0 = cfg.packet.x0, cfg.packet.sigma, cfg.packet.k0
    ensemble = sample_gaussian_ensemble(cfg.run.particles, x0, sx, k0, grid, stream.generator("initial"), species)
    initial = ensemble.signed_sum()

    evo = EvolutionConfig(
        dt=cfg.run.dt,
        total_time=cfg.run.total_time,
        annihilation_period=cfg.run.annihilation_period,
        snapshot_period=cfg.run.snapshot_period,
        particle_cap=cfg.run.particle_cap,
        creation_bound=cfg.run.creation_bound,
        workers=cfg.workers,
    )
    recon = [reconstruction_grid(grid, cfg.output.recon_nx, cfg.output.recon_k_stride, a) for a in range(grid.ndim)]
    snapdir = out / "snapshots"
    records = []

    def on_snapshot(ens, time, result):
        i = len(records)
        meta = {"time_fs": time, "n0": ens.n0, "particles": len(ens), "signed_sum": ens.signed_sum(), "leaked": result.leaked}
        entry = {"time": time}
        for a, sp in enumerate(ens.species):
            rho = observables.marginal_density(ens, grid, a)
            q = observables.quasi_distribution(ens, recon[a], a)
            g = grid.axis(a) if two_body else grid
            io.write_table(snapdir / f"{i:04d}_density_{sp.name}.dat", [g.centers(0), rho], ["x_nm", "density_per_nm"], meta)
            io.write_quasi(snapdir / f"{i:04d}_quasi_{sp.name}.dat", q, recon[a].centers(0), recon[a].dk[0] * np.arange(-recon[a].m_max[0], recon[a].m_max[0] + 1), meta)
            entry[sp.name] = {"density": rho, "quasi": q}
        if two_body:
            entry["separation"] = observables.pair_separation_stats(ens)
        records.append(entry)
        return entry

    result = run(ensemble, table, grid, evo, stream, snapshot=on_snapshot)
    _write_diagnostics(out, result)
    extra = _conservation(result, initial)
    extra["snapshot_times_fs"] = [r["time"] for r in records]
    extra["gamma_max_per_fs"] = table.gamma_max

    if two_body:
        extra.update(_hydrogen_outputs(cfg, out, grid, records, species))
    oracle = None
    if cfg.output.oracle and not two_body:
        oracle = _oracle_outputs(cfg, out, grid, recon[0], potential, records, species[0].mass)
        extra["oracle"] = oracle
    if cfg.output.figures:
        _particle_figures(out, grid, recon, records, species, oracle is not None)
    return extra


def _hydrogen_outputs(cfg, out, grid, records, species) -> dict:
    extra = {}
    times = [r["time"] for r in records]
    for a, sp in enumerate(species):
        x = grid.centers(a)
        rho0 = records[0][sp.name]["density"]
        eps = [observables.relative_difference(rho0, r[sp.name]["density"]) for r in records]
        names = ["x_nm"] + [f"eps_t{t * 1000:.3g}as" for t in times]
        io.write_table(out / f"epsilon_{sp.name}.dat", [x] + eps, names, {"reference_time_fs": times[0]})
        extra[f"max_abs_epsilon_{sp.name}"] = float(max(np.max(np.abs(e)) for e in eps))
    sep = [r["separation"] for r in records]
    io.write_table(
        out / "separation.dat",
        [times, [s["mean"] for s in sep], [s["q50"] for s in sep], [s["q68"] for s in sep]],
        ["time_fs", "mean_nm", "q50_nm", "q68_nm"],
    )
    extra["final_mean_separation_nm"] = sep[-1]["mean"]
    return extra


def _oracle_outputs(cfg, out, grid, recon, potential, records, mass) -> dict:
    layout = wavefunction_grid(grid, 3)
    wf = gaussian_packet(layout["origin"], layout["dx"], layout["shape"], cfg.packet.x0, cfg.packet.sigma, cfg.packet.k0, (mass,))
    dt = min(cfg.run.dt, 0.45 * HBAR / max_kinetic_energy(wf))
    with_quasi = recon is grid
    rows = []
    for i, r in enumerate(records):
        wf = advance(wf, potential, dt, r["time"])
        rho = cell_density(wf, grid)
        engine = r["particle"]["density"]
        l1 = float(np.sum(np.abs(engine - rho)) / np.sum(np.abs(rho)))
        meta = {"time_fs": r["time"], "split_step_dt_fs": dt, "refine": 3}
        io.write_table(out / "snapshots" / f"{i:04d}_oracle_density.dat", [grid.centers(0), rho], ["x_nm", "density_per_nm"], meta)
        if with_quasi:
            w = wigner_transform(wf, grid)
            io.write_quasi(out / "snapshots" / f"{i:04d}_oracle_wigner.dat", w, grid.centers(0), grid.dk[0] * np.arange(-grid.m_max[0], grid.m_max[0] + 1), meta)
            r["oracle_quasi"] = w
        r["oracle_density"] = rho
        rows.append((r["time"], l1))
        log.info("event=oracle time=%.6g marginal_l1=%.4g", r["time"], l1)
    io.write_table(out / "oracle.dat", [[t for t, _ in rows], [e for _, e in rows]], ["time_fs", "marginal_l1"])
    return {"final_marginal_l1": rows[-1][1]}


def _particle_figures(out, grid, recon, records, species, with_oracle):
    from . import plotting

    figs = out / "figures"
    for a, sp in enumerate(species):
        g = grid.axis(a) if grid.ndim > 1 else grid
        curves = {f"t = {r['time']:.4g} fs": r[sp.name]["density"] for r in records[:: max(1, len(records) // 6)]}
        plotting.density_curves(figs / f"density_{sp.name}.png", g.centers(0), curves, title=sp.name)
        rg = recon[a]
        k = rg.dk[0] * np.arange(-rg.m_max[0], rg.m_max[0] + 1)
        last = records[-1]
        plotting.quasi_map(figs / f"quasi_{sp.name}_final.png", last[sp.name]["quasi"], rg.centers(0), k, last["time"], sp.name)
    if with_oracle:
        last = records[-1]
        plotting.density_curves(
            figs / "oracle_density_final.png",
            grid.centers(0),
            {"particles": last["particle"]["density"], "split-step": last["oracle_density"]},
            title=f"t = {last['time']:.4g} fs",
        )


def kernel_report(cfg: RunConfig, out: Path) -> dict:
    """Kernel table, creation rate and the gamma series convergence table."""
    grid = make_grid(cfg)
    potential = make_potential(cfg)
    table = kernel_numeric(potential, grid)
    meta = {"height_eV": cfg.potential.height, "sigma_nm": cfg.potential.sigma, "dk_per_nm": table.dk}
    io.write_kernel(out / "kernel.dat", table, meta)
    io.write_gamma(out / "gamma.dat", table, meta)
    x = table.nodes - cfg.potential.center
    eps = cfg.report.series_eps
    h, s = cfg.potential.height, cfg.potential.sigma
    reference = gaussian_gamma_quadrature(x, h, s)
    partials = {m: eps * gamma_series_partial(x, h, s, eps, m) for m in cfg.report.series_terms}
    io.write_table(
        out / "gamma_series.dat",
        [table.nodes, reference] + list(partials.values()),
        ["x_nm", "gamma_quadrature"] + [f"gamma_M{m}" for m in partials],
        {"eps_per_nm": eps, "units": "integral over k >= 0 of the positive closed-form kernel (eV nm)"},
    )
    extra = {
        "gamma_max_per_fs": table.gamma_max,
        "transform_residue": table.residue,
        "series_l2": {str(m): float(np.sqrt(np.mean((p - reference) ** 2))) for m, p in partials.items()},
    }
    if grid.nx[0] % 2 == 1:
        extra["gamma_checks"] = gamma_properties_check(table)
    if cfg.output.figures:
        from . import plotting

        plotting.kernel_surface(out / "figures" / "kernel.png", table.nodes, table.momenta, table.values)
        plotting.series_convergence(out / "figures" / "gamma_series.png", table.nodes, reference, partials)
    return extra


def classical_limit(cfg: RunConfig, out: Path) -> dict:
    """Maximum creation rate as hbar is scaled down at a fixed momentum step."""
    grid = make_grid(cfg)
    potential = make_potential(cfg)
    scales = np.asarray(cfg.report.hbar_scales, dtype=float)
    log_gmax = classical_limit_scan(potential, grid, scales, log=True)
    gmax = np.exp(log_gmax)
    io.write_table(
        out / "classical_limit.dat",
        [scales, gmax, log_gmax, (log_gmax - log_gmax[0]) / np.log(10.0)],
        ["hbar_scale", "gamma_max_per_fs", "ln_gamma_max", "log10_ratio_to_first"],
        {"dp_over_hbar_per_nm": grid.dk[0]},
    )
    if cfg.output.figures:
        from . import plotting

        plotting.scan(out / "figures" / "classical_limit.png", scales, (log_gmax - log_gmax[0]) / np.log(10.0))
    return {"ln_gamma_max": [float(g) for g in log_gmax]}
