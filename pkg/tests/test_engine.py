import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from signed_particles import (
    ELECTRON,
    PROTON,
    ConfigurationError,
    Ensemble,
    ParticleCapExceeded,
    PhaseSpaceGrid,
    RandomStream,
    SignedParticle,
)
from signed_particles.constants import HBAR_OVER_ME
from signed_particles.engine import (
    EvolutionConfig,
    annihilate,
    check_time_step,
    create_pairs,
    drift,
    run,
    sample_creation,
    sample_gaussian_ensemble,
)
from signed_particles.kernel import kernel_numeric, kernel_two_body
from signed_particles.observables import signed_cell_counts
from signed_particles.phase_space import cell_keys
from signed_particles.potentials import ConstantPotential, GaussianBarrier, SoftCoulombPair

GRID = PhaseSpaceGrid(length=40.0, nx=400, m_max=60)


@pytest.fixture(scope="module")
def barrier_table():
    return kernel_numeric(GaussianBarrier(0.1, 1.0), GRID)


def test_drift_zero_dt():
    p = SignedParticle(1.0, 2.0, -1)
    assert drift(p, 0.0) == p


def test_drift_zero_momentum():
    p = SignedParticle(1.0, 0.0, 1)
    assert drift(p, 123.0) == p


def test_drift_velocity():
    p = SignedParticle(1.0, 2.0, 1, PROTON)
    assert drift(p, 0.5).position[0] == pytest.approx(1.0 + HBAR_OVER_ME * 2.0 / 1836.0 * 0.5, rel=1e-15)
    assert drift(p, 0.5).momentum == p.momentum and drift(p, 0.5).sign == 1


def test_drift_negative_dt():
    with pytest.raises(ConfigurationError):
        drift(SignedParticle(0.0, 1.0, 1), -1.0)


def test_drift_composition_exact_dyadic():
    p = SignedParticle(0.25, 1.0 / HBAR_OVER_ME, 1)  # velocity 1 nm/fs up to rounding
    a = drift(drift(p, 0.125), 0.125)
    b = drift(p, 0.25)
    assert a == b


@given(st.floats(-10, 10), st.floats(-20, 20), st.floats(0, 5))
def test_drift_composition(x, k, dt):
    p = SignedParticle(x, k, 1)
    a = drift(drift(p, dt / 2), dt / 2).position[0]
    b = drift(p, dt).position[0]
    assert a == pytest.approx(b, rel=1e-14, abs=1e-14)


def test_no_creation_where_gamma_zero(rng):
    table = kernel_numeric(ConstantPotential(), GRID)
    n = 1_000_000
    x = rng.uniform(-19, 19, (n, 1))
    out = create_pairs(x, np.zeros((n, 1)), np.ones(n, np.int8), table, 0.05, rng)
    assert out[2].size == 0


def test_no_creation_at_barrier_top(rng):
    g = PhaseSpaceGrid(length=40.0, nx=401, m_max=60)
    table = kernel_numeric(GaussianBarrier(0.1, 1.0), g)
    n = 1_000_000
    x = np.zeros((n, 1))
    assert table.gamma_at(np.zeros(1))[0] == 0.0
    out = create_pairs(x, np.zeros((n, 1)), np.ones(n, np.int8), table, 0.05, rng)
    assert out[2].size == 0


def test_created_pair_properties(barrier_table, rng):
    parent = SignedParticle(-1.3, 0.4, -1)
    seen = 0
    for _ in range(2000):
        kids = sample_creation(parent, barrier_table, 1.0, rng)
        assert len(kids) in (0, 2)
        if kids:
            seen += 1
            a, b = kids
            assert a.sign + b.sign == 0
            assert a.sign == parent.sign
            assert a.position == parent.position == b.position
            q = a.momentum[0] - parent.momentum[0]
            assert b.momentum[0] == pytest.approx(parent.momentum[0] - q, abs=1e-12)
            m = q / barrier_table.dk
            assert m == pytest.approx(round(m), abs=1e-9)
            node = barrier_table.node_index(np.array([parent.position[0]]))[0]
            assert barrier_table.values[node, int(round(m)) + barrier_table.m_max] > 0
    assert seen > 0


def test_creation_frequency_binomial(barrier_table, rng):
    x0 = -1.05
    gamma = barrier_table.gamma_at(np.array([x0]))[0]
    dt = 0.05
    n = 1_000_000
    xs, _, _ = create_pairs(np.full((n, 1), x0), np.zeros((n, 1)), np.ones(n, np.int8), barrier_table, dt, rng)
    events = xs.shape[0] // 2
    p = gamma * dt
    assert abs(events - n * p) < 4 * np.sqrt(n * p * (1 - p))


def test_two_body_offspring_opposite(rng):
    g = PhaseSpaceGrid(length=(1.2, 0.04), nx=(240, 80), m_max=200, coherence_length=1.2, ndim=2)
    table = kernel_two_body(SoftCoulombPair(), g)
    n = 20_000
    x = np.column_stack([rng.normal(0, 0.05, n).clip(-0.59, 0.59), rng.normal(0, 0.002, n).clip(-0.019, 0.019)])
    k = rng.normal(0, 5, (n, 2))
    s = rng.choice(np.array([-1, 1], np.int8), n)
    xs, ks, ss = create_pairs(x, k, s, table, 2e-4, rng)
    half = ss.size // 2
    assert half > 0
    np.testing.assert_array_equal(ss[:half], -ss[half:])
    dplus = ks[:half] - ks[half:]
    # +s child minus -s child = 2q on the electron, -2q on the proton
    np.testing.assert_allclose(dplus[:, 0], -dplus[:, 1], atol=1e-9)
    np.testing.assert_allclose(xs[:half], xs[half:])


def _ens(xs, ks, signs, grid_ndim=1):
    return Ensemble(np.array(xs, float), np.array(ks, float), np.array(signs), max(len(signs), 1))


def test_annihilate_opposite_pair():
    g = PhaseSpaceGrid(length=10.0, nx=10, m_max=5)
    e = _ens([0.1, 0.2], [0.0, 0.01], [1, -1])
    assert len(annihilate(e, g)) == 0


def test_annihilate_same_sign_kept():
    g = PhaseSpaceGrid(length=10.0, nx=10, m_max=5)
    e = _ens([0.1, 0.2], [0.0, 0.01], [1, 1])
    assert len(annihilate(e, g)) == 2


def test_annihilate_five_three():
    g = PhaseSpaceGrid(length=10.0, nx=10, m_max=5)
    signs = [1, -1, 1, 1, -1, 1, -1, 1]
    e = _ens(np.linspace(0.05, 0.4, 8), np.zeros(8), signs)
    out = annihilate(e, g)
    assert len(out) == 2 and np.all(out.sign == 1)
    # survivors are the first positive particles in ensemble order
    np.testing.assert_array_equal(out.x[:, 0], e.x[[0, 2], 0])


ensembles = st.integers(1, 400).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(-4.99, 4.99), min_size=n, max_size=n),
        st.lists(st.integers(-6, 6), min_size=n, max_size=n),
        st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n),
    )
)


@given(ensembles)
def test_annihilation_properties(data):
    xs, ms, signs = data
    g = PhaseSpaceGrid(length=10.0, nx=7, m_max=4, coherence_length=np.pi)
    e = _ens(xs, np.array(ms, float) * g.dk[0], signs)
    once = annihilate(e, g)
    twice = annihilate(once, g)
    np.testing.assert_array_equal(once.x, twice.x)
    np.testing.assert_array_equal(once.sign, twice.sign)
    assert once.signed_sum() == e.signed_sum()
    np.testing.assert_array_equal(signed_cell_counts(once, g), signed_cell_counts(e, g))
    # at most one sign per cell
    keys = cell_keys(once.x, once.k, g)
    for key in np.unique(keys):
        assert len(set(once.sign[keys == key].tolist())) == 1


def test_sample_gaussian_ensemble(rng):
    e = sample_gaussian_ensemble(100_000, -3.0, 1.0, 1.5, GRID, rng)
    assert len(e) == 100_000 and np.all(e.sign == 1) and e.n0 == 100_000
    assert e.x.mean() == pytest.approx(-3.0, abs=0.02)
    assert e.x.std() == pytest.approx(1.0, rel=0.02)
    assert e.k.mean() == pytest.approx(1.5, abs=0.01)
    assert e.k.std() == pytest.approx(0.5, rel=0.02)
    assert np.all(GRID.contains(e.x))


def test_sample_redraws_outside(rng):
    g = PhaseSpaceGrid(length=2.0, nx=20)
    e = sample_gaussian_ensemble(10_000, 0.8, 1.0, 0.0, g, rng)
    assert np.all(g.contains(e.x))


def test_config_validation():
    with pytest.raises(ConfigurationError, match="dt must be positive"):
        EvolutionConfig(dt=0.0, total_time=1.0)
    for kw in (dict(annihilation_period=0), dict(snapshot_period=0), dict(particle_cap=0), dict(workers=0), dict(total_time=-1)):
        args = dict(dt=0.1, total_time=1.0)
        args.update(kw)
        with pytest.raises(ConfigurationError):
            EvolutionConfig(**args)


def test_check_time_step(barrier_table, rng):
    e = sample_gaussian_ensemble(100, -3.0, 1.0, 1.5, GRID, rng)
    with pytest.raises(ConfigurationError, match="gamma_max"):
        check_time_step(EvolutionConfig(dt=0.1 / barrier_table.gamma_max * 1.5, total_time=1), barrier_table, GRID, e)
    with pytest.raises(ConfigurationError, match="cells per step"):
        check_time_step(EvolutionConfig(dt=0.5, total_time=1), None, GRID, e)
    check_time_step(EvolutionConfig(dt=0.05, total_time=1), barrier_table, GRID, e)


def test_free_run_has_no_creation(rng):
    table = kernel_numeric(ConstantPotential(), GRID)
    e = sample_gaussian_ensemble(20_000, -3.0, 1.0, 1.5, GRID, rng)
    res = run(e, table, GRID, EvolutionConfig(dt=0.05, total_time=5.0), RandomStream(1))
    assert res.created == 0 and len(res.ensemble) + res.leaked == 20_000
    expect = e.x + HBAR_OVER_ME * e.k * 5.0
    np.testing.assert_allclose(res.ensemble.x, expect, atol=1e-9)


def test_barrier_run_conserves(barrier_table):
    stream = RandomStream(5)
    e = sample_gaussian_ensemble(20_000, -3.0, 1.0, 1.5, GRID, stream.generator("initial"))
    res = run(e, barrier_table, GRID, EvolutionConfig(dt=0.05, total_time=4.0, annihilation_period=7), stream)
    assert res.created > 0
    for r in res.records:
        assert r.signed_sum + r.leaked == 20_000


def test_run_deterministic(barrier_table):
    def once():
        stream = RandomStream(11)
        e = sample_gaussian_ensemble(5_000, -3.0, 1.0, 1.5, GRID, stream.generator("initial"))
        return run(e, barrier_table, GRID, EvolutionConfig(dt=0.05, total_time=2.0), stream).ensemble

    a, b = once(), once()
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.k, b.k)
    np.testing.assert_array_equal(a.sign, b.sign)


def test_run_with_workers(barrier_table):
    stream = RandomStream(2)
    e = sample_gaussian_ensemble(10_000, -3.0, 1.0, 1.5, GRID, stream.generator("initial"))
    res = run(e, barrier_table, GRID, EvolutionConfig(dt=0.05, total_time=2.0, workers=3), stream)
    assert res.ensemble.signed_sum() + res.leaked == 10_000 and res.created > 0


def test_particle_cap_aborts(barrier_table):
    stream = RandomStream(3)
    e = sample_gaussian_ensemble(5_000, -1.0, 1.0, 0.0, GRID, stream.generator("initial"))
    snaps = []
    cfg = EvolutionConfig(dt=0.05, total_time=10.0, annihilation_period=1000, snapshot_period=2, particle_cap=5_200)
    with pytest.raises(ParticleCapExceeded) as info:
        run(e, barrier_table, GRID, cfg, stream, snapshot=lambda ens, t, r: snaps.append(t) or t)
    res = info.value.result
    assert res.aborted and len(res.ensemble) > 5_200
    assert res.snapshots and res.snapshots[0] == 0.0


def test_snapshot_cadence(barrier_table):
    stream = RandomStream(4)
    e = sample_gaussian_ensemble(1_000, -3.0, 1.0, 1.5, GRID, stream.generator("initial"))
    res = run(e, barrier_table, GRID, EvolutionConfig(dt=0.05, total_time=1.0, snapshot_period=7), stream, snapshot=lambda ens, t, r: t)
    np.testing.assert_allclose(res.snapshots, [0.0, 0.35, 0.7, 1.0])


def test_drift_measure_preserving(rng):
    # uniform in x, symmetric velocities: the interior histogram is stationary
    g = PhaseSpaceGrid(length=40.0, nx=80, m_max=4)
    n = 200_000
    x = rng.uniform(-20, 20, (n, 1))
    k = rng.uniform(-2, 2, (n, 1))
    e = Ensemble(x, k, np.ones(n, np.int8), n)
    table = kernel_numeric(ConstantPotential(), g)
    res = run(e, table, g, EvolutionConfig(dt=0.05, total_time=1.0, snapshot_period=1), RandomStream(0),
              snapshot=lambda ens, t, r: np.histogram(ens.x[:, 0], bins=g.edges())[0])
    # the edge region reachable from the boundary in 20 steps is excluded
    inner = slice(4, 76)
    for h in res.snapshots[1:]:
        obs = h[inner]
        expect = np.full(obs.size, obs.sum() / obs.size)
        assert stats.chisquare(obs, expect).pvalue > 0.01 / len(res.snapshots)
