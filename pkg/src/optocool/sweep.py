"""Parameter-plane sweeps and constrained minimization of n_eff.

The coupling G is never swept directly: every cell rebuilds the model from
a :class:`PhysicalConfig`, so power and cavity-width axes carry their
physical effect on G.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize

from . import backaction, colddamp
from .errors import InvalidParameterError, NumericalFailure, OptocoolError, UnstableModelError
from .params import PhysicalConfig, derive_params
from .reports import CoolingResult


class Scheme(str, enum.Enum):
    BACKACTION = "backaction"
    COLDDAMP = "colddamp"


class Scale(str, enum.Enum):
    LINEAR = "linear"
    LOG = "log"


class CellStatus(str, enum.Enum):
    OK = "ok"
    UNSTABLE = "unstable"
    FAILED = "failed"


# parameter id -> description; all frequencies relative to omega_m
PARAMETERS = {
    "delta": "effective detuning Delta / omega_m",
    "kappa": "cavity decay kappa / omega_m",
    "power": "laser power P / P_ref",
    "g_cd": "feedback gain g_cd",
    "omega_fb": "feedback bandwidth omega_fb / omega_m",
    "eta": "detection efficiency eta",
}
_SCHEME_PARAMETERS = {
    Scheme.BACKACTION: ("delta", "kappa", "power"),
    Scheme.COLDDAMP: ("kappa", "power", "g_cd", "omega_fb", "eta"),
}


@dataclass(frozen=True)
class Axis:
    param: str
    lo: float
    hi: float
    count: int = 1
    scale: Scale = Scale.LINEAR

    def __post_init__(self):
        if self.param not in PARAMETERS:
            raise InvalidParameterError(f"unknown sweep parameter {self.param!r}")
        object.__setattr__(self, "scale", Scale(self.scale))
        if not (isinstance(self.count, (int, np.integer)) and self.count >= 1):
            raise InvalidParameterError(f"axis {self.param}: count must be a positive integer")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InvalidParameterError(f"axis {self.param}: bounds must be finite")
        if self.count > 1 and not self.lo < self.hi:
            raise InvalidParameterError(f"axis {self.param}: need lo < hi when count > 1")
        if self.scale is Scale.LOG and self.lo <= 0:
            raise InvalidParameterError(f"axis {self.param}: log scale needs positive bounds")

    @property
    def collapsed(self):
        return self.count == 1 or self.lo == self.hi

    def values(self):
        if self.count == 1:
            return np.array([self.lo], dtype=float)
        if self.scale is Scale.LOG:
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)

    def from_unit(self, u):
        """Map u in [0, 1] onto the axis range."""
        if self.scale is Scale.LOG:
            return self.lo * (self.hi / self.lo) ** u
        return self.lo + (self.hi - self.lo) * u

    def to_unit(self, x):
        if self.hi == self.lo:
            return 0.0
        if self.scale is Scale.LOG:
            return math.log(x / self.lo) / math.log(self.hi / self.lo)
        return (x - self.lo) / (self.hi - self.lo)


@dataclass(frozen=True)
class SweepSpec:
    """Axes over a base configuration.

    ``power_ref`` is the reference for the ``power`` axis, by default the
    base laser power.  A missing ``axis2`` means a one-dimensional sweep.
    """

    base: PhysicalConfig
    scheme: Scheme
    axis1: Axis
    axis2: Optional[Axis] = None
    power_ref: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        allowed = _SCHEME_PARAMETERS[self.scheme]
        for ax in self.axes:
            if ax.param not in allowed:
                raise InvalidParameterError(
                    f"parameter {ax.param!r} cannot be swept for the {self.scheme.value} scheme"
                )
        if self.axis2 is not None and self.axis2.param == self.axis1.param:
            raise InvalidParameterError("the two axes must sweep different parameters")
        if self.power_ref is not None and not self.power_ref > 0:
            raise InvalidParameterError("power_ref must be positive")
        if self.scheme is Scheme.COLDDAMP and self.base.feedback_bandwidth is None and not any(
            ax.param == "omega_fb" for ax in self.axes
        ):
            raise InvalidParameterError("cold damping needs feedback_bandwidth in the base config or an omega_fb axis")

    @property
    def axes(self) -> Tuple[Axis, ...]:
        return (self.axis1,) if self.axis2 is None else (self.axis1, self.axis2)

    @property
    def reference_power(self):
        return self.base.laser_power if self.power_ref is None else self.power_ref

    def config_at(self, values: Dict[str, float]) -> PhysicalConfig:
        return apply_parameters(self.base, values, self.reference_power)


@dataclass(frozen=True)
class SweepCell:
    values: Tuple[float, ...]
    status: CellStatus
    result: Optional[CoolingResult]
    margin: float
    gamma_eff: float
    Gamma: float
    g2: float
    zeta: float
    message: str = ""

    @property
    def n_eff(self):
        return self.result.n_eff if self.result is not None else math.nan


@dataclass(frozen=True)
class SweepTable:
    spec: SweepSpec
    cells: Tuple[SweepCell, ...]

    @property
    def shape(self):
        return tuple(ax.count for ax in self.spec.axes)

    def grid(self, attr="n_eff"):
        """Per-cell attribute as an array of ``shape`` (NaN where not computed)."""
        out = np.array([getattr(c, attr) for c in self.cells], dtype=float)
        return out.reshape(self.shape)

    def stable_cells(self):
        return [c for c in self.cells if c.status is CellStatus.OK]

    def best(self) -> Optional[SweepCell]:
        ok = self.stable_cells()
        if not ok:
            return None
        return min(ok, key=lambda c: c.n_eff)

    def header(self):
        names = [ax.param for ax in self.spec.axes]
        return names + CELL_COLUMNS

    def rows(self):
        for c in self.cells:
            yield [f"{v:.8e}" for v in c.values] + cell_fields(c)

    def to_csv(self, stream):
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(self.header())
        for row in self.rows():
            w.writerow(row)


CELL_COLUMNS = [
    "var_q", "var_p", "n_eff", "T_eff_k", "gamma_eff_res", "Gamma", "g2", "zeta", "stable", "margin", "status",
]


def _fmt(x):
    return f"{x:.8e}"


def cell_fields(c: SweepCell) -> List[str]:
    r = c.result
    if r is None:
        head = ["nan"] * 4
    else:
        head = [_fmt(r.var_q), _fmt(r.var_p), _fmt(r.n_eff), _fmt(r.T_eff)]
    return head + [
        _fmt(c.gamma_eff), _fmt(c.Gamma), _fmt(c.g2), _fmt(c.zeta),
        "1" if c.status is CellStatus.OK else "0", _fmt(c.margin), c.status.value,
    ]


def apply_parameters(base: PhysicalConfig, values: Dict[str, float], power_ref=None) -> PhysicalConfig:
    """Base configuration with swept parameters substituted (scaled ids, see PARAMETERS)."""
    wm = base.mech_freq
    pref = base.laser_power if power_ref is None else power_ref
    changes = {}
    for key, v in values.items():
        v = float(v)
        if key == "delta":
            changes["detuning"] = v * wm
        elif key == "kappa":
            changes["cavity_decay"] = v * wm
        elif key == "power":
            changes["laser_power"] = v * pref
        elif key == "g_cd":
            changes["feedback_gain"] = v
        elif key == "omega_fb":
            changes["feedback_bandwidth"] = v * wm
        elif key == "eta":
            changes["detection_efficiency"] = v
        else:
            raise InvalidParameterError(f"unknown sweep parameter {key!r}")
    return base.replace(**changes)


def evaluate_point(cfg: PhysicalConfig, scheme, values=()) -> SweepCell:
    """Closed-form evaluation of one configuration; instability is data, not an error."""
    scheme = Scheme(scheme)
    values = tuple(float(v) for v in values)
    d = derive_params(cfg, detuning=0.0 if scheme is Scheme.COLDDAMP else None)
    g2, zeta = d.scaled_gain, d.scaled_power
    wm = cfg.mech_freq
    if scheme is Scheme.BACKACTION:
        model = backaction.BackactionModel.from_config(cfg)
        report = backaction.stability_backaction(model, with_poles=False)
        gamma_eff = model.gamma_m + backaction.optical_damping(wm, model)
        Gamma = backaction.scattering_rates(model).gamma_cool
        solve = backaction.exact_variances_backaction
    else:
        model = colddamp.ColdDampModel.from_config(cfg)
        report = colddamp.stability_cd(model, with_poles=False)
        gamma_eff = colddamp.effective_oscillator_cd(wm, model)[1]
        Gamma = gamma_eff - model.gamma_m
        solve = colddamp.exact_variances_cd
    common = dict(values=values, margin=report.margin, gamma_eff=gamma_eff, Gamma=Gamma, g2=g2, zeta=zeta)
    try:
        result = solve(model)
    except UnstableModelError as exc:
        return SweepCell(status=CellStatus.UNSTABLE, result=None, message=str(exc), **common)
    except (NumericalFailure, ArithmeticError) as exc:
        return SweepCell(status=CellStatus.FAILED, result=None, message=str(exc), **common)
    if not (math.isfinite(result.var_q) and math.isfinite(result.var_p)):
        return SweepCell(status=CellStatus.FAILED, result=None, message="non-finite variances", **common)
    return SweepCell(status=CellStatus.OK, result=result, **common)


def run_sweep(spec: SweepSpec) -> SweepTable:
    """Evaluate every grid cell, axis2 varying fastest."""
    axes = spec.axes
    grids = [ax.values() for ax in axes]
    cells = []
    for point in np.array(np.meshgrid(*grids, indexing="ij")).reshape(len(axes), -1).T:
        values = dict(zip((ax.param for ax in axes), point))
        cells.append(evaluate_point(spec.config_at(values), spec.scheme, point))
    return SweepTable(spec, tuple(cells))


# ---------------------------------------------------------------------------
# optimization


@dataclass(frozen=True)
class OptimumReport:
    argmin: Dict[str, float]
    n_eff: float
    T_eff: float
    margin: float
    n_evaluations: int
    result: CoolingResult
    grid_best: float
    config: PhysicalConfig = field(compare=False, repr=False)


def minimize_neff(
    spec: SweepSpec,
    constraints: Sequence[Callable[[PhysicalConfig], bool]] = (),
    restarts: int = 3,
    seed: int = 0,
    xatol: float = 1e-4,
) -> OptimumReport:
    """Grid search over ``spec`` refined by Nelder-Mead inside the stable region.

    The simplex works in unit coordinates of the non-collapsed axes.
    Points outside the domain, unstable points and points rejected by any
    of ``constraints`` score +inf.  One run starts at the best grid cell and
    ``restarts`` more from seeded perturbations of it; the best is kept.
    """
    table = run_sweep(spec)
    feasible = [c for c in table.stable_cells() if all(f(spec.config_at(_as_dict(spec, c.values))) for f in constraints)]
    if not feasible:
        raise UnstableModelError("no stable point found in the search domain")
    start = min(feasible, key=lambda c: c.n_eff)
    n_eval = len(table.cells)

    axes = spec.axes
    free = [i for i, ax in enumerate(axes) if not ax.collapsed]
    best_values, best_cell = start.values, start

    if free:
        counter = [0]

        def point(u):
            values = list(start.values)
            for j, i in enumerate(free):
                values[i] = float(axes[i].from_unit(u[j]))
            return tuple(values)

        def objective(u):
            counter[0] += 1
            if np.any(u < 0) or np.any(u > 1):
                return math.inf
            values = point(u)
            cfg = spec.config_at(_as_dict(spec, values))
            if not all(f(cfg) for f in constraints):
                return math.inf
            try:
                cell = evaluate_point(cfg, spec.scheme, values)
            except OptocoolError:
                return math.inf
            if cell.status is not CellStatus.OK or cell.margin <= 0:
                return math.inf
            return cell.n_eff

        u0 = np.array([axes[i].to_unit(start.values[i]) for i in free])
        step = np.array([1.0 / max(axes[i].count - 1, 4) for i in free])
        rng = np.random.default_rng(seed)
        starts = [u0] + [np.clip(u0 + step * rng.uniform(-1, 1, u0.size), 0, 1) for _ in range(restarts)]
        best_f = start.n_eff
        for s in starts:
            simplex = np.vstack([s] + [s + np.where(np.arange(s.size) == j, _toward_inside(s[j], step[j]), 0.0) for j in range(s.size)])
            res = scipy.optimize.minimize(
                objective, s, method="Nelder-Mead",
                options={"initial_simplex": simplex, "xatol": xatol, "fatol": 1e-12, "maxiter": 4000, "maxfev": 8000},
            )
            if np.isfinite(res.fun) and res.fun < best_f:
                best_f = float(res.fun)
                best_values = point(res.x)
        n_eval += counter[0]
        best_cell = evaluate_point(spec.config_at(_as_dict(spec, best_values)), spec.scheme, best_values)

    return OptimumReport(
        argmin=_as_dict(spec, best_values),
        n_eff=best_cell.n_eff,
        T_eff=best_cell.result.T_eff,
        margin=best_cell.margin,
        n_evaluations=n_eval,
        result=best_cell.result,
        grid_best=start.n_eff,
        config=spec.config_at(_as_dict(spec, best_values)),
    )


def _toward_inside(u, h):
    return h if u + h <= 1 else -h


def _as_dict(spec, values):
    return {ax.param: float(v) for ax, v in zip(spec.axes, values)}


# ---------------------------------------------------------------------------
# scheme comparison


@dataclass(frozen=True)
class ComparisonRow:
    kappa: float
    backaction: Optional[OptimumReport]
    colddamp: Optional[OptimumReport]

    @property
    def winner(self):
        nb = self.backaction.n_eff if self.backaction else math.inf
        nc = self.colddamp.n_eff if self.colddamp else math.inf
        if nb == nc:
            return "tie"
        return Scheme.BACKACTION.value if nb < nc else Scheme.COLDDAMP.value


# Free-parameter domains for the comparison, in the scaled units of PARAMETERS.
COMPARISON_DOMAINS = {
    Scheme.BACKACTION: (Axis("delta", 0.1, 3.0, 30), Axis("power", 0.05, 3.0, 30)),
    Scheme.COLDDAMP: (Axis("g_cd", 1e-4, 5.0, 40, "log"), Axis("power", 0.05, 3.0, 30)),
}


def scheme_comparison(base: PhysicalConfig, kappa_grid, power_ref=None, domains=None) -> List[ComparisonRow]:
    """Best n_eff of each scheme per kappa / omega_m, other parameters optimized.

    Back-action optimizes detuning and power, cold damping optimizes gain
    and power at the base feedback bandwidth and efficiency.
    """
    domains = COMPARISON_DOMAINS if domains is None else domains
    rows = []
    for kappa in kappa_grid:
        cfg = base.replace(cavity_decay=float(kappa) * base.mech_freq)
        best = {}
        for scheme in Scheme:
            a1, a2 = domains[scheme]
            spec = SweepSpec(cfg, scheme, a1, a2, power_ref=power_ref)
            try:
                best[scheme] = minimize_neff(spec)
            except UnstableModelError:
                best[scheme] = None
        rows.append(ComparisonRow(float(kappa), best[Scheme.BACKACTION], best[Scheme.COLDDAMP]))
    return rows


def crossover(rows: Sequence[ComparisonRow]):
    """First kappa / omega_m at which cold damping overtakes back-action, or None."""
    for prev, row in zip(rows, rows[1:]):
        if prev.winner == Scheme.BACKACTION.value and row.winner == Scheme.COLDDAMP.value:
            return row.kappa
    return None
