"""Physical constants in the package unit system.

Lengths are in nm, wave-numbers in 1/nm, energies in eV, times in fs and
masses in electron masses.
"""

HBAR = 0.6582119569  # eV fs
HBAR_C = 197.3269804  # eV nm
ELECTRON_REST_ENERGY = 510998.95  # eV

# hbar^2 / m_e in eV nm^2
HBAR2_OVER_ME = HBAR_C**2 / ELECTRON_REST_ENERGY
# hbar / m_e in nm^2 / fs, so that velocity = HBAR_OVER_ME * k / mass
HBAR_OVER_ME = HBAR2_OVER_ME / HBAR

COULOMB = 1.43996  # e^2 / (4 pi eps0), eV nm
BOHR_RADIUS = 0.0529177  # nm
PROTON_MASS = 1836.0  # electron masses

ATTOSECOND = 1e-3  # fs
