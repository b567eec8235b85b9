"""Wigner kernel tables, creation rates and the Gaussian-barrier closed forms.

Momenta are wave-numbers (1/nm) throughout. For a potential V the creation
kernel per momentum-lattice index is

    w(x; M) = dk / (pi hbar) * int dy sin(2 M dk y) [V(x - y) - V(x + y)]

in 1/fs. Its positive part summed over M is the creation rate gamma(x), and
the normalised positive part is the distribution of the momentum offset
given to the ``+s`` offspring (``k + M dk``); the ``-s`` offspring receives
``k - M dk``. With this orientation a barrier pushes particles away from its
top, as a classical force would.

The textbook form ``i/(pi hbar^2) int dy exp(-2iyp/hbar) [V(x+y) - V(x-y)]``
is the same quantity with the opposite sign and density normalisation; for a
Gaussian barrier it reduces to the closed form returned by
:func:`kernel_gaussian_analytic`, and :func:`closed_form_scale` converts
between the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import logsumexp

from .constants import HBAR
from .errors import ConfigurationError, NumericError
from .phase_space import PhaseSpaceGrid
from .potentials import GaussianBarrier, Potential, relative_coordinate_form

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass
class WignerKernelTable:
    """Precomputed creation kernel on spatial nodes and the momentum lattice.

    Node ``i`` covers ``[origin + i*spacing, origin + (i+1)*spacing)`` and is
    centred at ``nodes[i]``. ``values[i, j]`` is the creation rate (1/fs) for
    the momentum offset ``(j - m_max) * dk``.
    """

    nodes: np.ndarray
    origin: float
    spacing: float
    dk: float
    m_max: int
    values: np.ndarray
    gamma: np.ndarray
    cdf: np.ndarray
    hbar: float = HBAR
    two_body: bool = False
    residue: float = 0.0

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.m_max, self.m_max + 1)

    @property
    def momenta(self) -> np.ndarray:
        return self.offsets * self.dk

    @property
    def gamma_max(self) -> float:
        return float(self.gamma.max()) if self.gamma.size else 0.0

    def node_index(self, x) -> np.ndarray:
        idx = np.floor((np.asarray(x, dtype=float) - self.origin) / self.spacing).astype(np.int64)
        if np.any(idx < 0) or np.any(idx >= self.nodes.size):
            raise ConfigurationError("kernel table does not cover the requested position")
        return idx

    def gamma_at(self, x) -> np.ndarray:
        return self.gamma[self.node_index(x)]

    def sample_offsets(self, node: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Momentum-lattice offsets M drawn by inverting each node's CDF at ``u``."""
        node = np.asarray(node, dtype=np.int64)
        u = np.asarray(u, dtype=float)
        lo = np.zeros(node.shape, dtype=np.int64)
        hi = np.full(node.shape, self.cdf.shape[1] - 1, dtype=np.int64)
        # first column whose cumulative value exceeds u
        while np.any(lo < hi):
            mid = (lo + hi) // 2
            above = self.cdf[node, mid] > u
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid + 1)
        return lo - self.m_max

    def closed_form_values(self) -> np.ndarray:
        """Kernel values rescaled to the closed-form normalisation."""
        return self.values / closed_form_scale(self.dk, self.hbar)


def closed_form_scale(dk: float, hbar: float = HBAR) -> float:
    """Factor turning a closed-form kernel value into a per-index rate (1/fs)."""
    return -dk / (2.0 * math.pi * hbar)


def _finish_table(nodes, origin, spacing, dk, m_max, values, hbar, two_body, residue):
    positive = np.clip(values, 0.0, None)
    gamma = positive.sum(axis=1)
    cdf = np.ones_like(positive)
    active = gamma > 0
    if np.any(active):
        cdf[active] = np.cumsum(positive[active], axis=1) / gamma[active, None]
        cdf[active, -1] = 1.0
    return WignerKernelTable(
        nodes=np.asarray(nodes, dtype=float),
        origin=float(origin),
        spacing=float(spacing),
        dk=float(dk),
        m_max=int(m_max),
        values=values,
        gamma=gamma,
        cdf=cdf,
        hbar=hbar,
        two_body=two_body,
        residue=residue,
    )


def _quadrature_window(potential, nodes, coherence_length, window):
    """Half-width of the y integration range.

    Compact potentials are integrated over their full extent (a whole
    multiple of the coherence length), so the table samples the untruncated
    kernel; unbounded ones use the coherence window ``|y| <= L_C / 2``.
    """
    if window is not None:
        return 0.5 * window * coherence_length
    support = potential.support
    if support is None:
        return 0.5 * coherence_length
    lo, hi = support
    reach = max(np.max(np.abs(nodes - lo)), np.max(np.abs(nodes - hi)))
    multiple = max(1, math.ceil(2.0 * reach / coherence_length))
    return 0.5 * multiple * coherence_length


def kernel_transform(potential, nodes, dk, m_max, hbar=HBAR, window=None, step=None):
    """Creation kernel w(x; M) at ``nodes`` for ``M = -m_max .. m_max``.

    Returns ``(values, residue)`` where ``residue`` is the largest cosine
    (imaginary-part) leftover of the transform relative to the largest
    kernel magnitude; it vanishes for an exact odd integrand.
    """
    nodes = np.asarray(nodes, dtype=float)
    coherence = math.pi / dk
    half = _quadrature_window(potential, nodes, coherence, window)
    k = np.arange(-m_max, m_max + 1) * dk
    if step is None:
        scale = potential.length_scale
        step = min(scale / 8.0 if np.isfinite(scale) else half / 64.0, math.pi / (8.0 * max(abs(k[-1]), dk)))
    n_half = max(8, math.ceil(half / step))
    h = half / n_half
    y = np.arange(-n_half, n_half + 1) * h
    weight = np.full(y.size, h)
    weight[0] = weight[-1] = 0.5 * h

    left = potential(nodes[:, None] - y[None, :])
    right = potential(nodes[:, None] + y[None, :])
    bad = ~(np.isfinite(left) & np.isfinite(right))
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise NumericError(f"potential is not finite near x={nodes[i] - y[j]:.6g} or x={nodes[i] + y[j]:.6g} nm")
    phase = 2.0 * np.outer(y, k)
    with np.errstate(over="ignore", invalid="ignore"):
        diff = (left - right) * weight
        sine = diff @ np.sin(phase)
        cosine = diff @ np.cos(phase)
        values = dk / (math.pi * hbar) * sine
    if not np.all(np.isfinite(values)):
        i = int(np.argwhere(~np.isfinite(values))[0, 0])
        raise NumericError(f"kernel transform overflowed at node x={nodes[i]:.6g} nm")
    # odd in momentum by construction: mirror the M >= 0 half
    values[:, :m_max] = -values[:, : m_max : -1]
    peak = np.max(np.abs(values)) if values.size else 0.0
    residue = float(np.max(np.abs(cosine)) * dk / (math.pi * hbar) / peak) if peak > 0 else 0.0
    values[:, m_max] = 0.0  # sin(0) = 0 exactly
    return values, residue


def kernel_numeric(
    potential: Potential,
    grid: PhaseSpaceGrid,
    axis: int = 0,
    nodes=None,
    hbar_scale: float = 1.0,
    window=None,
) -> WignerKernelTable:
    """Kernel table for a one-dimensional potential on the grid's cell centres.

    ``hbar_scale`` replaces hbar by ``hbar_scale * hbar`` at a fixed physical
    momentum step ``hbar * dk``; the wave-number step then becomes
    ``dk / hbar_scale``.
    """
    if potential.ndim != 1:
        raise ConfigurationError("kernel_numeric needs a one-dimensional potential")
    if not hbar_scale > 0:
        raise ConfigurationError("hbar_scale must be positive")
    hbar = HBAR * hbar_scale
    dk = grid.dk[axis] / hbar_scale
    m_max = grid.m_max[axis]
    if nodes is None:
        nodes = grid.centers(axis)
        origin, spacing = grid.origin[axis], grid.dx[axis]
    else:
        nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
        spacing = float(nodes[1] - nodes[0]) if nodes.size > 1 else grid.dx[axis]
        origin = float(nodes[0] - 0.5 * spacing)
    values, residue = kernel_transform(potential, nodes, dk, m_max, hbar, window)
    return _finish_table(nodes, origin, spacing, dk, m_max, values, hbar, False, residue)


def kernel_two_body(reduced, grid: PhaseSpaceGrid, nodes=None, window=None) -> WignerKernelTable:
    """Kernel table in the relative coordinate ``r = x_e - x_p``.

    For a pair potential V(x_e - x_p) the centre-of-mass integral of the
    two-body kernel collapses onto opposite momentum offsets, leaving the
    one-dimensional kernel of V(r). A creation event then shifts the
    electron by ``+q`` and the proton by ``-q`` (and the reverse for the
    negative offspring). Accepts either the reduced 1D potential or the pair
    potential itself.
    """
    if getattr(reduced, "ndim", 1) == 2:
        pair = reduced
        reduced = relative_coordinate_form(pair)
        if reduced is None:
            raise ConfigurationError(f"{type(pair).__name__} does not depend on x_e - x_p only")
    if grid.ndim != 2:
        raise ConfigurationError("kernel_two_body needs a two-dimensional grid")
    if not math.isclose(grid.dk[0], grid.dk[1], rel_tol=1e-12):
        raise ConfigurationError("electron and proton axes must share the momentum step")
    dk = grid.dk[0]
    m_max = min(grid.m_max)
    if nodes is None:
        spacing = float(np.min(grid.dx))
        lo = grid.origin[0] - grid.upper[1]
        hi = grid.upper[0] - grid.origin[1]
        count = int(math.ceil((hi - lo) / spacing))
        nodes = lo + (np.arange(count) + 0.5) * spacing
        origin = lo
    else:
        nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
        spacing = float(nodes[1] - nodes[0]) if nodes.size > 1 else float(np.min(grid.dx))
        origin = float(nodes[0] - 0.5 * spacing)
    values, residue = kernel_transform(reduced, nodes, dk, m_max, HBAR, window)
    return _finish_table(nodes, origin, spacing, dk, m_max, values, HBAR, True, residue)


def kernel_gaussian_analytic(x, k, height, sigma):
    """Closed-form Gaussian-barrier kernel ``-4 sqrt(2 pi) H sigma e^{-2 (sigma k)^2} sin(2 x k)``.

    ``k`` is a wave-number, so ``sigma p / hbar = sigma k``. Odd in x and k.
    """
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    return -4.0 * _SQRT_2PI * height * sigma * np.exp(-2.0 * (sigma * k) ** 2) * np.sin(2.0 * x * k)


def kernel_gaussian_table(grid: PhaseSpaceGrid, height, sigma, center=0.0, axis=0) -> WignerKernelTable:
    """Fast path: the Gaussian-barrier table built from the closed form."""
    nodes = grid.centers(axis)
    k = np.arange(-grid.m_max[axis], grid.m_max[axis] + 1) * grid.dk[axis]
    values = closed_form_scale(grid.dk[axis]) * kernel_gaussian_analytic(
        (nodes - center)[:, None], k[None, :], height, sigma
    )
    return _finish_table(nodes, grid.origin[axis], grid.dx[axis], grid.dk[axis], grid.m_max[axis], values, HBAR, False, 0.0)


def gaussian_series_terms(x, height, sigma, eps, m_terms):
    """Individual terms ``M = 1 .. m_terms`` of the Gaussian-barrier gamma series, shape (..., m_terms)."""
    x = np.asarray(x, dtype=float)[..., None]
    m = np.arange(1, int(m_terms) + 1)
    damping = np.exp(-2.0 * (sigma * m * eps) ** 2)
    return 4.0 * _SQRT_2PI * height * sigma * damping * np.abs(np.sin(2.0 * x * m * eps))


def gamma_series_partial(x, height, sigma, eps, m_terms):
    """Partial sum of the Gaussian-barrier gamma series up to ``m_terms`` terms.

    The M = 0 term vanishes, so the sum runs over M = 1 .. m_terms. Multiply
    by ``eps`` to compare with the momentum integral of the positive kernel,
    or by ``-closed_form_scale(eps)`` for a rate in 1/fs.
    """
    if not eps > 0:
        raise ConfigurationError("series step eps must be positive")
    if int(m_terms) < 1:
        raise ConfigurationError("at least one series term is required")
    return gaussian_series_terms(x, height, sigma, eps, m_terms).sum(axis=-1)


def gaussian_gamma_quadrature(x, height, sigma):
    """Momentum integral ``int_0^inf 4 sqrt(2 pi) H sigma e^{-2 (sigma k)^2} |sin(2 x k)| dk``.

    This is the continuum limit of ``eps * gamma_series_partial`` and is
    evaluated by adaptive quadrature between consecutive zeros of the sine.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    amp = 4.0 * _SQRT_2PI * height * sigma
    kmax = 8.0 / sigma  # e^{-128} beyond
    out = np.zeros(x.shape)
    for i, xi in enumerate(x.flat):
        b = 2.0 * abs(xi)
        if b == 0:
            continue
        zeros = np.r_[np.arange(0.0, kmax, math.pi / b), kmax]

        def f(k):
            return math.exp(-2.0 * (sigma * k) ** 2) * abs(math.sin(b * k))

        out.flat[i] = amp * sum(quad(f, a, c)[0] for a, c in zip(zeros[:-1], zeros[1:]))
    return out


def gaussian_m_max(sigma, dk, tolerance=1e-12):
    """Smallest lattice bound whose Gaussian damping factor is below ``tolerance``."""
    return max(1, math.ceil(math.sqrt(-0.5 * math.log(tolerance)) / (sigma * dk)))


def gamma_properties_check(table: WignerKernelTable) -> dict:
    """Symmetry and centre residuals of gamma, relative to its maximum.

    The nodes must be symmetric about their midpoint, which must itself be a
    node (odd node count).
    """
    gamma = table.gamma
    peak = gamma.max() if gamma.size else 0.0
    if gamma.size % 2 == 0:
        raise ConfigurationError("gamma_properties_check needs a node at the midpoint (odd node count)")
    if peak == 0:
        return {"symmetry": 0.0, "center": 0.0}
    return {
        "symmetry": float(np.max(np.abs(gamma - gamma[::-1])) / peak),
        "center": float(abs(gamma[gamma.size // 2]) / peak),
    }


def gaussian_log_gamma(x, height, sigma, dk, m_max, hbar=HBAR):
    """Natural log of the Gaussian-barrier creation rate (1/fs) from the closed form.

    Summed in the log domain, so rates far below the double-precision range
    of a quadrature (or even below the smallest float) stay ordered.
    Positions where no offset creates return ``-inf``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = np.arange(1, int(m_max) + 1)
    k = m * dk
    s = np.sin(2.0 * np.outer(x, k))
    # odd kernel: offsets +M and -M contribute |sin| once each in total
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(s))
    log_pref = math.log(dk / (2.0 * math.pi * hbar) * 4.0 * _SQRT_2PI * height * sigma)
    terms = log_pref - 2.0 * (sigma * k) ** 2 + log_abs
    return logsumexp(terms, axis=1)


def classical_limit_scan(potential: Potential, grid: PhaseSpaceGrid, scales, axis: int = 0, log: bool = False) -> np.ndarray:
    """Maximum creation rate for each hbar scale at a fixed physical momentum step.

    Gaussian barriers are evaluated from the closed form in the log domain:
    the rates collapse like ``exp(-2 (sigma dk / scale)^2)`` and quickly fall
    below the rounding floor of any direct quadrature. Other potentials use
    :func:`kernel_numeric`. With ``log=True`` natural logs are returned.
    """
    out = []
    for lam in scales:
        if not 0 < lam <= 1:
            raise ConfigurationError("hbar scales must lie in (0, 1]")
        if isinstance(potential, GaussianBarrier):
            value = float(np.max(gaussian_log_gamma(
                grid.centers(axis) - potential.center, potential.height, potential.sigma,
                grid.dk[axis] / lam, grid.m_max[axis], HBAR * lam,
            )))
        else:
            g = kernel_numeric(potential, grid, axis=axis, hbar_scale=lam).gamma_max
            value = math.log(g) if g > 0 else -math.inf
        out.append(value)
    out = np.array(out)
    return out if log else np.exp(out)
