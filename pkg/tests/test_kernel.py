import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frozen import GAMMA_INTEGRAL, KERNEL_OFFSETS, KERNEL_RATES, TWO_BODY_ACTION
from signed_particles import ConfigurationError, NumericError, PhaseSpaceGrid
from signed_particles.kernel import (
    classical_limit_scan,
    closed_form_scale,
    gamma_properties_check,
    gamma_series_partial,
    gaussian_gamma_quadrature,
    gaussian_log_gamma,
    gaussian_m_max,
    gaussian_series_terms,
    kernel_gaussian_analytic,
    kernel_gaussian_table,
    kernel_numeric,
    kernel_two_body,
)
from signed_particles.potentials import (
    AbruptBarrier,
    ConstantPotential,
    GaussianBarrier,
    Potential,
    SoftCoulombPair,
    TabulatedPotential,
)

GRID = PhaseSpaceGrid(length=20.0, nx=256, m_max=128)


@pytest.fixture(scope="module")
def gauss_table():
    return kernel_numeric(GaussianBarrier(0.3, 1.0), GRID)


def test_zero_potential_gives_zero_kernel():
    t = kernel_numeric(ConstantPotential(0.0), GRID)
    assert not np.any(t.values) and not np.any(t.gamma)


def test_constant_potential_gives_zero_kernel():
    t = kernel_numeric(ConstantPotential(0.7), GRID)
    assert not np.any(t.values) and not np.any(t.gamma)


def test_numeric_matches_frozen_quadrature():
    g = PhaseSpaceGrid(length=20.0, nx=8, m_max=24)
    xs = np.array([x for x, _ in KERNEL_RATES])
    t = kernel_numeric(GaussianBarrier(0.3, 1.0), g, nodes=xs)
    ref = np.array([row for _, row in KERNEL_RATES])
    got = t.values[:, [g.m_max[0] + m for m in KERNEL_OFFSETS]]
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-10 * np.abs(ref).max())


def test_numeric_matches_analytic(gauss_table):
    closed = kernel_gaussian_analytic(gauss_table.nodes[:, None], gauss_table.momenta[None, :], 0.3, 1.0)
    expect = closed_form_scale(gauss_table.dk) * closed
    err = np.max(np.abs(gauss_table.values - expect)) / np.max(np.abs(expect))
    assert err < 1e-3


def test_fast_path_matches_numeric(gauss_table):
    fast = kernel_gaussian_table(GRID, 0.3, 1.0)
    np.testing.assert_allclose(fast.values, gauss_table.values, atol=1e-12 * np.abs(fast.values).max())
    np.testing.assert_allclose(gauss_table.closed_form_values(), kernel_gaussian_analytic(gauss_table.nodes[:, None], gauss_table.momenta, 0.3, 1.0), atol=1e-11)


def test_residue_small(gauss_table):
    assert gauss_table.residue < 1e-10


def test_antisymmetry_exact(gauss_table):
    np.testing.assert_array_equal(gauss_table.values, -gauss_table.values[:, ::-1])


@pytest.mark.parametrize(
    "potential",
    [GaussianBarrier(0.3, 1.0), AbruptBarrier(0.1, -3.0, 3.0), GaussianBarrier(0.05, 0.4, 2.0),
     TabulatedPotential.sample(GaussianBarrier(0.2, 1.5), np.linspace(-12, 12, 481))],
)
def test_table_invariants(potential):
    t = kernel_numeric(potential, PhaseSpaceGrid(length=20.0, nx=101, m_max=60))
    np.testing.assert_array_equal(t.values, -t.values[:, ::-1])
    assert np.all(t.gamma >= 0)
    active = t.gamma > 0
    np.testing.assert_allclose(t.cdf[active, -1], 1.0, rtol=0, atol=1e-12)
    assert np.all(np.diff(t.cdf[active], axis=1) >= -1e-15)


class _Broken(Potential):
    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x - 1.0) < 0.05, np.inf, 0.0)


def test_non_finite_potential_reported():
    with pytest.raises(NumericError, match="x="):
        kernel_numeric(_Broken(), PhaseSpaceGrid(length=10.0, nx=20, m_max=4))


def test_two_body_potential_rejected_by_single_body_path():
    with pytest.raises(ConfigurationError):
        kernel_numeric(SoftCoulombPair(), GRID)


def test_analytic_zero_lines():
    k = np.linspace(-5, 5, 41)
    assert np.all(kernel_gaussian_analytic(0.0, k, 0.3, 1.0) == 0)
    x = np.linspace(-5, 5, 41)
    assert np.all(kernel_gaussian_analytic(x, 0.0, 0.3, 1.0) == 0)


def test_analytic_odd(rng):
    x = rng.uniform(-10, 10, 100)
    k = rng.uniform(-5, 5, 100)
    a = kernel_gaussian_analytic(x, k, 0.3, 1.0)
    np.testing.assert_array_equal(kernel_gaussian_analytic(-x, k, 0.3, 1.0), -a)
    np.testing.assert_array_equal(kernel_gaussian_analytic(x, -k, 0.3, 1.0), -a)


def test_gamma_properties_gaussian():
    t = kernel_numeric(GaussianBarrier(0.3, 1.0), PhaseSpaceGrid(length=20.0, nx=257, m_max=128))
    report = gamma_properties_check(t)
    assert report["symmetry"] < 1e-6
    assert report["center"] < 1e-6


def test_gamma_properties_zero_potential():
    t = kernel_numeric(ConstantPotential(), PhaseSpaceGrid(length=20.0, nx=257, m_max=16))
    assert gamma_properties_check(t) == {"symmetry": 0.0, "center": 0.0}


def test_gamma_properties_needs_midpoint_node(gauss_table):
    with pytest.raises(ConfigurationError):
        gamma_properties_check(gauss_table)


def test_series_zero_at_top():
    for m in (1, 4, 32, 100):
        assert gamma_series_partial(0.0, 0.3, 1.0, 0.05, m) == 0.0


@given(st.floats(-10, 10), st.floats(0.01, 0.5), st.integers(1, 40), st.integers(1, 40))
def test_series_monotone(x, eps, m1, m2):
    lo, hi = sorted((m1, m2))
    assert gamma_series_partial(x, 0.3, 1.0, eps, hi) >= gamma_series_partial(x, 0.3, 1.0, eps, lo)


@given(st.floats(-10, 10), st.floats(0.01, 0.5), st.floats(0.1, 3.0))
def test_series_terms_bounded(x, eps, sigma):
    terms = gaussian_series_terms(x, 1.0, sigma, eps, 40) / (4 * math.sqrt(2 * math.pi) * sigma)
    m = np.arange(1, 41)
    bound = np.exp(-2 * (m * eps * sigma) ** 2)
    assert np.all(terms >= 0) and np.all(terms <= bound)


def test_series_validation():
    with pytest.raises(ConfigurationError):
        gamma_series_partial(1.0, 0.3, 1.0, 0.0, 4)
    with pytest.raises(ConfigurationError):
        gamma_series_partial(1.0, 0.3, 1.0, 0.1, 0)


def test_gamma_quadrature_matches_frozen():
    xs = np.array([x for x, _ in GAMMA_INTEGRAL])
    ref = np.array([v for _, v in GAMMA_INTEGRAL])
    np.testing.assert_allclose(gaussian_gamma_quadrature(xs, 0.3, 1.0), ref, rtol=1e-9, atol=1e-12)


def test_series_approaches_quadrature():
    x = np.linspace(-10, 10, 257)
    ref = gaussian_gamma_quadrature(x, 0.3, 1.0)
    d = [np.sqrt(np.mean((0.05 * gamma_series_partial(x, 0.3, 1.0, 0.05, m) - ref) ** 2)) for m in (4, 8, 16, 32)]
    assert all(a > b for a, b in zip(d, d[1:]))


def test_gaussian_m_max():
    m = gaussian_m_max(1.0, np.pi / 20.0)
    assert math.exp(-2 * (m * np.pi / 20.0) ** 2) < 1e-12
    assert math.exp(-2 * ((m - 1) * np.pi / 20.0) ** 2) >= 1e-12


def test_sample_offsets_follow_cdf(gauss_table, rng):
    node = np.full(200_000, 150)
    m = gauss_table.sample_offsets(node, rng.random(node.size))
    pos = np.clip(gauss_table.values[150], 0, None)
    expect = pos / pos.sum()
    freq = np.bincount(m + gauss_table.m_max, minlength=expect.size) / node.size
    assert np.all(freq[expect == 0] == 0)
    assert np.max(np.abs(freq - expect)) < 5 * np.sqrt(expect.max() / node.size)


def test_node_index_out_of_range(gauss_table):
    with pytest.raises(ConfigurationError):
        gauss_table.node_index(np.array([10.5]))


def test_classical_limit_zero_potential():
    g = PhaseSpaceGrid(length=20.0, nx=65, m_max=16, coherence_length=np.pi)
    np.testing.assert_array_equal(classical_limit_scan(ConstantPotential(), g, [1, 0.1, 0.01]), 0.0)


def test_classical_limit_gaussian_collapse():
    g = PhaseSpaceGrid(length=20.0, nx=257, m_max=32, coherence_length=np.pi)
    v = GaussianBarrier(0.3, 1.0)
    ln = classical_limit_scan(v, g, [1, 0.1, 0.01], log=True)
    assert ln[2] - ln[0] < math.log(1e-3)
    assert np.all(np.diff(ln) < 0)


def test_classical_limit_closed_form_matches_numeric():
    g = PhaseSpaceGrid(length=20.0, nx=257, m_max=32, coherence_length=np.pi)
    v = GaussianBarrier(0.3, 1.0)
    fast = classical_limit_scan(v, g, [1.0, 0.5])
    slow = [kernel_numeric(v, g, hbar_scale=s).gamma_max for s in (1.0, 0.5)]
    np.testing.assert_allclose(fast, slow, rtol=1e-9)
    t = kernel_numeric(v, g)
    np.testing.assert_allclose(np.exp(gaussian_log_gamma(g.centers(), 0.3, 1.0, g.dk[0], 32)), t.gamma, rtol=1e-9, atol=1e-15)


def test_classical_limit_rejects_bad_scale():
    with pytest.raises(ConfigurationError):
        classical_limit_scan(GaussianBarrier(0.3, 1.0), GRID, [0.0])
    with pytest.raises(ConfigurationError):
        classical_limit_scan(GaussianBarrier(0.3, 1.0), GRID, [1.5])


HYDROGEN = PhaseSpaceGrid(length=(1.2, 0.04), nx=(240, 80), m_max=200, coherence_length=1.2, ndim=2)


def test_two_body_zero_potential():
    class Zero(Potential):
        ndim = 1
        support = (0.0, 0.0)

        def __call__(self, r):
            return np.zeros(np.shape(r))

    t = kernel_two_body(Zero(), HYDROGEN)
    assert t.two_body and not np.any(t.gamma)


def test_two_body_requires_reducible():
    with pytest.raises(ConfigurationError):
        kernel_two_body(GaussianBarrier(0.3, 1.0), PhaseSpaceGrid(length=1.0, nx=10))

    class Pair(Potential):
        ndim = 2

        def __call__(self, x):
            return np.asarray(x)[..., 0] ** 2

    with pytest.raises(ConfigurationError):
        kernel_two_body(Pair(), HYDROGEN)


def test_two_body_requires_shared_step():
    g = PhaseSpaceGrid(length=(1.2, 0.04), nx=(24, 8), m_max=20, ndim=2)
    with pytest.raises(ConfigurationError):
        kernel_two_body(SoftCoulombPair(), g)


def test_two_body_gamma_even():
    r = np.linspace(-0.3, 0.3, 61)
    t = kernel_two_body(SoftCoulombPair(), HYDROGEN, nodes=r)
    np.testing.assert_allclose(t.gamma, t.gamma[::-1], rtol=1e-9, atol=1e-12 * t.gamma.max())


def test_two_body_covers_relative_range():
    t = kernel_two_body(SoftCoulombPair(), HYDROGEN)
    lo = HYDROGEN.origin[0] - HYDROGEN.upper[1]
    hi = HYDROGEN.upper[0] - HYDROGEN.origin[1]
    t.node_index(np.array([lo + 1e-12, hi - 1e-12]))


def test_two_body_matches_frozen_quadrature():
    s = 10.0
    for xe, xp, q, ref in TWO_BODY_ACTION:
        t = kernel_two_body(SoftCoulombPair(), HYDROGEN, nodes=[xe - xp])
        m = t.offsets * t.dk
        f = np.exp(-((q[0] - m) ** 2 + (q[1] + m) ** 2) / (2 * s * s)) / (2 * np.pi * s * s)
        assert float(t.values[0] @ f) == pytest.approx(ref, rel=1e-6)
