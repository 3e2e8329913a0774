"""Base configurations and grids of the reference cooling phase diagrams.

Caption parameters are hardcoded; grid ranges the captions leave open are
chosen to bracket the optimum.
"""

from __future__ import annotations

from .constants import TWO_PI, milliwatts, nanograms
from .errors import InvalidParameterError
from .params import PhysicalConfig
from .sweep import Axis, SweepSpec

OMEGA_M = TWO_PI * 10e6

FIGURES = ("fig2a", "fig2b", "fig4a", "fig4b")


def fig2_config() -> PhysicalConfig:
    """Back-action optimum: kappa = 0.2 omega_m, Delta = omega_m, P = 50 mW."""
    return PhysicalConfig(
        mech_freq=OMEGA_M,
        mech_damping=TWO_PI * 100.0,
        mass=nanograms(250.0),
        cavity_length=0.5e-3,
        laser_power=milliwatts(50.0),
        laser_wavelength=1064e-9,
        cavity_decay=0.2 * OMEGA_M,
        detuning=OMEGA_M,
        bath_temperature=0.6,
    )


def fig4_config(g_cd=0.8) -> PhysicalConfig:
    """Cold damping: kappa = 3 omega_m, omega_fb = 3.5 omega_m, P0 = 100 mW, eta = 1."""
    return fig2_config().replace(
        laser_power=milliwatts(100.0),
        cavity_decay=3.0 * OMEGA_M,
        detuning=0.0,
        feedback_gain=g_cd,
        feedback_bandwidth=3.5 * OMEGA_M,
        detection_efficiency=1.0,
    )


def figure_spec(name, count=100) -> SweepSpec:
    if name == "fig2a":
        return SweepSpec(fig2_config(), "backaction", Axis("delta", 0.5, 1.5, count), Axis("kappa", 0.05, 1.0, count))
    if name == "fig2b":
        return SweepSpec(fig2_config(), "backaction", Axis("kappa", 0.05, 1.0, count), Axis("power", 0.05, 2.0, count))
    if name == "fig4a":
        return SweepSpec(fig4_config(), "colddamp", Axis("g_cd", 0.05, 3.0, count), Axis("power", 0.05, 3.0, count))
    if name == "fig4b":
        return SweepSpec(fig4_config(), "colddamp", Axis("kappa", 0.5, 10.0, count), Axis("omega_fb", 0.5, 10.0, count))
    raise InvalidParameterError(f"unknown figure {name!r}")
