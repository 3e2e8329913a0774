"""Laboratory parameters and the semiclassical steady state.

Turns the user's physical inputs (mass, cavity length, laser power, ...)
into the handful of rates that enter the linearized fluctuation dynamics.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .constants import HBAR, K_B, laser_angular_frequency
from .errors import InvalidParameterError, NumericalFailure


class ThermalModel(str, enum.Enum):
    """Mechanical bath spectrum: white (high temperature) or full quantum coth."""

    FLAT = "flat"
    COTH = "coth"


@dataclass(frozen=True)
class PhysicalConfig:
    """All user-supplied physical parameters, SI units, angular frequencies.

    ``detuning`` is the *effective* detuning (radiation-pressure shift
    included).  The feedback fields are only used by the cold-damping scheme.
    """

    mech_freq: float
    mech_damping: float
    mass: float
    cavity_length: float
    laser_power: float
    laser_wavelength: float
    cavity_decay: float
    detuning: float
    bath_temperature: float
    detection_efficiency: float = 1.0
    feedback_gain: float = 0.0
    feedback_bandwidth: Optional[float] = None
    thermal_model: ThermalModel = ThermalModel.FLAT

    def __post_init__(self):
        positive = {
            "mech_freq": self.mech_freq,
            "mech_damping": self.mech_damping,
            "mass": self.mass,
            "cavity_length": self.cavity_length,
            "laser_wavelength": self.laser_wavelength,
            "cavity_decay": self.cavity_decay,
        }
        for name, value in positive.items():
            if not (value > 0 and math.isfinite(value)):
                raise InvalidParameterError(f"{name} must be positive and finite, got {value!r}")
        if not (self.laser_power >= 0 and math.isfinite(self.laser_power)):
            raise InvalidParameterError(f"laser_power must be >= 0, got {self.laser_power!r}")
        if not (self.bath_temperature >= 0 and math.isfinite(self.bath_temperature)):
            raise InvalidParameterError(
                f"bath_temperature must be >= 0, got {self.bath_temperature!r}"
            )
        if not math.isfinite(self.detuning):
            raise InvalidParameterError(f"detuning must be finite, got {self.detuning!r}")
        if not (0 < self.detection_efficiency <= 1):
            raise InvalidParameterError(
                f"detection_efficiency must lie in (0, 1], got {self.detection_efficiency!r}"
            )
        if not (self.feedback_gain >= 0 and math.isfinite(self.feedback_gain)):
            raise InvalidParameterError(f"feedback_gain must be >= 0, got {self.feedback_gain!r}")
        if self.feedback_bandwidth is not None and not (
            self.feedback_bandwidth > 0 and math.isfinite(self.feedback_bandwidth)
        ):
            raise InvalidParameterError(
                f"feedback_bandwidth must be positive, got {self.feedback_bandwidth!r}"
            )
        if self.feedback_gain > 0 and self.feedback_bandwidth is None:
            raise InvalidParameterError("feedback_bandwidth is required when feedback_gain > 0")
        object.__setattr__(self, "thermal_model", ThermalModel(self.thermal_model))

    @property
    def laser_freq(self):
        return laser_angular_frequency(self.laser_wavelength)

    def replace(self, **changes) -> "PhysicalConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class DerivedParams:
    drive_amp: float
    bare_coupling: float
    intracavity_amp: float
    static_displacement: float
    detuning: float
    effective_coupling: float
    thermal_occupancy: float
    scaled_power: float
    scaled_gain: float


@dataclass(frozen=True)
class SteadyStateBranch:
    """One real solution of the intracavity-intensity cubic."""

    intensity: float
    detuning_effective: float
    bare_detuning: float
    branch_index: int
    n_branches: int
    residual: float

    @property
    def bistable(self):
        return self.n_branches == 3

    @property
    def is_middle(self):
        """The middle branch of a bistable triple (dynamically unstable)."""
        return self.n_branches == 3 and self.branch_index == 1


def thermal_occupancy(temperature, omega):
    """Bose occupancy 1/(exp(hbar omega / k_B T) - 1); exactly 0 at T = 0."""
    if omega <= 0:
        raise InvalidParameterError(f"omega must be positive, got {omega!r}")
    if temperature < 0:
        raise InvalidParameterError(f"temperature must be >= 0, got {temperature!r}")
    if temperature == 0:
        return 0.0
    return 1.0 / math.expm1(HBAR * omega / (K_B * temperature))


def occupancy_to_temperature(n_eff, omega_m):
    """Effective temperature hbar omega_m / [k_B ln(1 + 1/n_eff)]."""
    if not n_eff > 0:
        raise InvalidParameterError(f"n_eff must be positive, got {n_eff!r}")
    return HBAR * omega_m / (K_B * math.log1p(1.0 / n_eff))


def drive_amplitude(cfg: PhysicalConfig):
    """|E| = sqrt(2 P kappa / hbar omega_0), in 1/s."""
    return math.sqrt(2.0 * cfg.laser_power * cfg.cavity_decay / (HBAR * cfg.laser_freq))


def bare_coupling(cfg: PhysicalConfig):
    """G0 = (omega_c / L) sqrt(hbar / m omega_m), taking omega_c = omega_0."""
    return cfg.laser_freq / cfg.cavity_length * math.sqrt(HBAR / (cfg.mass * cfg.mech_freq))


def effective_coupling(cfg: PhysicalConfig, detuning=None):
    """G = (2 omega_c / L) sqrt(P kappa / (m omega_m omega_0 (kappa^2 + Delta^2)))."""
    delta = cfg.detuning if detuning is None else detuning
    w0 = cfg.laser_freq
    kappa = cfg.cavity_decay
    return (2.0 * w0 / cfg.cavity_length) * math.sqrt(
        cfg.laser_power * kappa / (cfg.mass * cfg.mech_freq * w0 * (kappa**2 + delta**2))
    )


def derive_params(cfg: PhysicalConfig, detuning=None) -> DerivedParams:
    """Linearized-model parameters for ``cfg``.

    ``detuning`` overrides ``cfg.detuning`` (cold damping works at resonance).
    The intracavity amplitude is taken real and positive.
    """
    delta = cfg.detuning if detuning is None else float(detuning)
    kappa = cfg.cavity_decay
    E = drive_amplitude(cfg)
    G0 = bare_coupling(cfg)
    alpha = E / math.hypot(kappa, delta)
    G = math.sqrt(2.0) * G0 * alpha
    nbar = thermal_occupancy(cfg.bath_temperature, cfg.mech_freq)
    gamma = cfg.mech_damping
    return DerivedParams(
        drive_amp=E,
        bare_coupling=G0,
        intracavity_amp=alpha,
        static_displacement=G0 * alpha**2 / cfg.mech_freq,
        detuning=delta,
        effective_coupling=G,
        thermal_occupancy=nbar,
        scaled_power=2.0 * G**2 / (kappa * gamma),
        scaled_gain=cfg.feedback_gain * G * cfg.mech_freq / (kappa * gamma),
    )


def _cubic(intensity, E2, kappa, delta0, beta):
    return intensity * (kappa**2 + (delta0 - beta * intensity) ** 2) - E2


def solve_steady_state(bare_detuning, cfg: PhysicalConfig, rtol=1e-10) -> List[SteadyStateBranch]:
    """All real positive intracavity intensities for a given bare detuning.

    Solves I [kappa^2 + (Delta0 - G0^2 I / omega_m)^2] = E^2 from companion
    matrix eigenvalues, each root polished by Newton iteration.  Branches are
    returned in ascending intensity.
    """
    E2 = drive_amplitude(cfg) ** 2
    kappa = cfg.cavity_decay
    G0 = bare_coupling(cfg)
    beta = G0**2 / cfg.mech_freq
    delta0 = float(bare_detuning)

    if E2 == 0:
        return [SteadyStateBranch(0.0, delta0, delta0, 0, 1, 0.0)]
    if beta == 0:
        roots = [E2 / (kappa**2 + delta0**2)]
    else:
        # Work in I / I_lin so the coefficients stay O(1).
        scale = E2 / (kappa**2 + delta0**2)
        coeffs = np.array(
            [
                beta**2 * scale**3,
                -2.0 * delta0 * beta * scale**2,
                (kappa**2 + delta0**2) * scale,
                -E2,
            ]
        )
        coeffs /= E2
        raw = np.roots(coeffs)
        # Accept roots whose imaginary part is round-off relative to the root.
        candidates = sorted(
            r.real for r in raw if abs(r.imag) <= 1e-6 * max(abs(r), 1.0) and r.real > 0
        )
        roots = []
        for x in candidates:
            x = _newton_polish(coeffs, x)
            if x > 0 and all(abs(x - y) > 1e-9 * x for y in roots):
                roots.append(x)
        roots = [scale * x for x in roots]

    if len(roots) not in (1, 3):
        raise NumericalFailure(
            f"expected 1 or 3 positive intensity branches, found {len(roots)}",
            estimate=roots,
        )
    branches = []
    for i, intensity in enumerate(roots):
        res = abs(_cubic(intensity, E2, kappa, delta0, beta)) / E2
        if res > rtol:
            raise NumericalFailure(
                f"steady-state root polishing stalled at relative residual {res:.3e}",
                estimate=intensity,
                error_bound=res,
            )
        branches.append(
            SteadyStateBranch(
                intensity=intensity,
                detuning_effective=delta0 - beta * intensity,
                bare_detuning=delta0,
                branch_index=i,
                n_branches=len(roots),
                residual=res,
            )
        )
    return branches


def _newton_polish(coeffs, x, iters=50):
    d = np.polyder(coeffs)
    for _ in range(iters):
        f = np.polyval(coeffs, x)
        fp = np.polyval(d, x)
        if fp == 0:
            break
        step = f / fp
        x -= step
        if abs(step) <= 1e-16 * abs(x):
            break
    return float(x)
