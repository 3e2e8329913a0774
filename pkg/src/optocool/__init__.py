"""Quantum steady state of a micromechanical oscillator cooled through an optical cavity.

Two schemes are modeled: back-action (self) cooling with a detuned cavity
and cold-damping feedback with a resonant cavity.  Closed-form variances
are cross-checked by independent quadrature, residue and Lyapunov routes.
"""

from .backaction import BackactionModel, exact_variances_backaction, stability_backaction, variances
from .colddamp import ColdDampModel, exact_variances_cd, max_gain, stability_cd, variances_cd
from .errors import (
    InvalidParameterError,
    MarginalStabilityError,
    NumericalFailure,
    OptocoolError,
    RegimeWarning,
    UnstableModelError,
)
from .params import (
    DerivedParams,
    PhysicalConfig,
    SteadyStateBranch,
    ThermalModel,
    derive_params,
    occupancy_to_temperature,
    solve_steady_state,
    thermal_occupancy,
)
from .reports import CoolingResult, Method, StabilityReport
from .sweep import Axis, SweepSpec, SweepTable, minimize_neff, run_sweep, scheme_comparison

__version__ = "0.1.0"
