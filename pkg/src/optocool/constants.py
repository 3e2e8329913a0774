"""Physical constants and unit helpers.

SI throughout, angular frequencies in rad/s.  Constants are pinned to the
CODATA 2018 exact/recommended values so results are bit-stable.
"""

import math

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K
C_LIGHT = 299792458.0  # m / s

TWO_PI = 2.0 * math.pi


def hz_to_rad(nu):
    """Ordinary frequency (Hz) to angular frequency (rad/s)."""
    return TWO_PI * nu


def rad_to_hz(omega):
    return omega / TWO_PI


def nanograms(value):
    """Mass in kg of ``value`` nanograms (1 ng = 1e-12 kg)."""
    return value * 1e-12


def milliwatts(value):
    return value * 1e-3


def laser_angular_frequency(wavelength):
    """omega_0 = 2 pi c / lambda."""
    return TWO_PI * C_LIGHT / wavelength
