"""Decibel, power and photon-flux conversions shared by the link models."""

import math

PLANCK = 6.62607015e-34  # J s
LIGHT_SPEED = 299_792_458.0  # m / s


def db_to_linear(x):
    """Transmittance of a loss of ``x`` dB, i.e. ``10**(-x/10)``."""
    return 10.0 ** (-x / 10.0)


def linear_to_db(t):
    """Loss in dB of a transmittance ``t`` (inverse of :func:`db_to_linear`)."""
    if t <= 0:
        return math.inf
    return -10.0 * math.log10(t)


def att_to_natural(a):
    """Convert a fiber attenuation in dB/km to an exponential coefficient in 1/km.

    The returned ``a'`` satisfies ``exp(-a' L) == 10**(-a L / 10)``.
    """
    if a <= 0:
        raise ValueError(f"attenuation must be positive, got {a}")
    return a * math.log(10.0) / 10.0


def dbm_to_mw(p_dbm):
    return 10.0 ** (p_dbm / 10.0)


def mw_to_dbm(p_mw):
    if p_mw <= 0:
        return -math.inf
    return 10.0 * math.log10(p_mw)


def photon_energy(wavelength_nm):
    """Photon energy in joules."""
    return PLANCK * LIGHT_SPEED / (wavelength_nm * 1e-9)


def photon_flux(p_mw, wavelength_nm):
    """Photons per second carried by ``p_mw`` milliwatts."""
    return p_mw * 1e-3 / photon_energy(wavelength_nm)
