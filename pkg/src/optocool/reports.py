"""Result records shared by both cooling schemes."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from .params import occupancy_to_temperature

MARGINAL_THRESHOLD = 1e-9


class Method(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    QUADRATURE = "quadrature"
    RESIDUE = "residue"
    LYAPUNOV = "lyapunov"


@dataclass(frozen=True)
class StabilityReport:
    """Routh-Hurwitz verdict together with the pole locations.

    ``margin`` is the smallest normalized stability quantity, each s-value
    divided by the sum of magnitudes of the terms it is built from, so it
    lies in [-1, 1].  Poles are in the e^{-i omega t} convention: stable
    poles have negative imaginary part.
    """

    s_values: Dict[str, float]
    poles: Tuple[complex, ...]
    stable: bool
    margin: float
    poles_stable: bool
    pole_margin: float
    detail: str = ""

    @property
    def marginal(self):
        return abs(self.margin) < MARGINAL_THRESHOLD

    @property
    def consistent(self):
        """Routh-Hurwitz and pole locations agree (vacuous when marginal)."""
        return self.marginal or self.stable == self.poles_stable

    @property
    def max_pole_imag(self):
        return max((p.imag for p in self.poles), default=math.nan)


@dataclass(frozen=True)
class CoolingResult:
    var_q: float
    var_p: float
    n_eff: float
    T_eff: float
    equipartition_gap: float
    method: Method
    error_bound: Optional[float] = None
    extras: Dict[str, float] = field(default_factory=dict, compare=False)

    @classmethod
    def from_variances(cls, var_q, var_p, omega_m, method, error_bound=None, **extras):
        n_eff = 0.5 * (var_q + var_p) - 0.5
        T_eff = occupancy_to_temperature(n_eff, omega_m) if n_eff > 0 else 0.0
        return cls(
            var_q=float(var_q),
            var_p=float(var_p),
            n_eff=float(n_eff),
            T_eff=float(T_eff),
            equipartition_gap=float(var_q - var_p),
            method=Method(method),
            error_bound=error_bound,
            extras=extras,
        )

    @property
    def uncertainty_product(self):
        return self.var_q * self.var_p

    def satisfies_heisenberg(self, slack=1e-12):
        return self.var_q * self.var_p >= 0.25 - slack and math.isfinite(self.var_q)


def normalized(value, *terms):
    """``value`` over the sum of absolute values of ``terms`` (0 if all vanish)."""
    scale = sum(abs(t) for t in terms)
    if scale == 0:
        return 0.0
    return value / scale
