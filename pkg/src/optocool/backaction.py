"""Back-action (self) cooling with a detuned cavity.

Everything here is a function of an immutable :class:`BackactionModel`.
Frequencies are angular (rad/s); variances are in units of the zero-point
value convention where the ground state has <dq^2> = <dp^2> = 1/2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import oracles
from .errors import InvalidParameterError, MarginalStabilityError, RegimeWarning, UnstableModelError
from .params import PhysicalConfig, ThermalModel, derive_params
from .reports import CoolingResult, Method, StabilityReport, normalized


@dataclass(frozen=True)
class BackactionModel:
    omega_m: float
    gamma_m: float
    kappa: float
    delta: float
    G: float
    nbar: float
    thermal_model: ThermalModel = ThermalModel.FLAT

    def __post_init__(self):
        for name in ("omega_m", "gamma_m", "kappa"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        if not (self.G >= 0 and math.isfinite(self.G)):
            raise InvalidParameterError("G must be >= 0")
        if not (self.nbar >= 0 and math.isfinite(self.nbar)):
            raise InvalidParameterError("nbar must be >= 0")
        if not math.isfinite(self.delta):
            raise InvalidParameterError("delta must be finite")
        object.__setattr__(self, "thermal_model", ThermalModel(self.thermal_model))

    @classmethod
    def from_config(cls, cfg: PhysicalConfig) -> "BackactionModel":
        d = derive_params(cfg)
        return cls(
            omega_m=cfg.mech_freq,
            gamma_m=cfg.mech_damping,
            kappa=cfg.cavity_decay,
            delta=cfg.detuning,
            G=d.effective_coupling,
            nbar=d.thermal_occupancy,
            thermal_model=cfg.thermal_model,
        )

    def scaled(self):
        """Rates in units of omega_m: (gamma, kappa, delta, G)."""
        w = self.omega_m
        return self.gamma_m / w, self.kappa / w, self.delta / w, self.G / w


@dataclass(frozen=True)
class ScatteringRates:
    a_plus: float
    a_minus: float
    gamma_cool: float


@dataclass(frozen=True)
class PerturbativeEstimate:
    var_q: float
    var_p: float
    n_eff: float
    regime_ok: bool


def thermal_spectrum(omega, gamma_m, omega_m, nbar, thermal_model):
    """Symmetrized Brownian force spectrum.

    ``flat``: gamma_m (2 nbar + 1).  ``coth``: (gamma_m w/omega_m) coth(hbar w/2 k_B T)
    with T fixed by nbar at omega_m.
    """
    omega = np.asarray(omega, dtype=float)
    if ThermalModel(thermal_model) is ThermalModel.FLAT:
        return np.full_like(omega, gamma_m * (2.0 * nbar + 1.0))
    x = omega / omega_m
    if nbar == 0:
        return gamma_m * np.abs(x)
    c = 0.5 * math.log1p(1.0 / nbar)  # hbar omega_m / 2 k_B T
    y = c * x
    small = np.abs(y) < 1e-4
    with np.errstate(divide="ignore", invalid="ignore"):
        big = x / np.tanh(y)
    return gamma_m * np.where(small, (1.0 + y * y / 3.0) / c, big)


def noise_spectra(omega, model: BackactionModel):
    """(S_th, S_rp) at ``omega``."""
    omega = np.asarray(omega, dtype=float)
    k, d, G = model.kappa, model.delta, model.G
    s_th = thermal_spectrum(omega, model.gamma_m, model.omega_m, model.nbar, model.thermal_model)
    s_rp = G**2 * k * (d**2 + k**2 + omega**2) / ((k**2 + (omega - d) ** 2) * (k**2 + (omega + d) ** 2))
    return s_th, s_rp


def _inverse_susceptibility(omega, model):
    wm, g, k, d, G = model.omega_m, model.gamma_m, model.kappa, model.delta, model.G
    kw = k - 1j * omega
    return (wm - omega) * (wm + omega) - 1j * omega * g - G**2 * d * wm / (kw * kw + d**2)


def susceptibility(omega, model: BackactionModel):
    """Effective mechanical susceptibility modified by radiation pressure."""
    omega = np.asarray(omega, dtype=float)
    inv = _inverse_susceptibility(omega, model)
    if np.any(np.abs(inv) <= 1e-14 * (model.omega_m**2 + omega**2)):
        raise MarginalStabilityError("susceptibility has a pole on the real axis")
    return model.omega_m / inv


def effective_oscillator(omega, model: BackactionModel):
    """Frequency-dependent effective resonance frequency and damping rate.

    Where the optical spring makes omega_eff^2 negative the frequency is
    returned as NaN and a RuntimeWarning is issued.
    """
    omega = np.asarray(omega, dtype=float)
    wm, k, d, G = model.omega_m, model.kappa, model.delta, model.G
    den = (k**2 + (omega - d) ** 2) * (k**2 + (omega + d) ** 2)
    w2 = wm**2 - G**2 * d * wm * (k**2 - omega**2 + d**2) / den
    gamma_eff = model.gamma_m + optical_damping(omega, model)
    if np.any(w2 < 0):
        warnings.warn("effective frequency is imaginary (anti-restoring spring)", RuntimeWarning, stacklevel=2)
    with np.errstate(invalid="ignore"):
        w_eff = np.where(w2 >= 0, np.sqrt(np.abs(w2)), np.nan)
    if w_eff.ndim == 0:
        return float(w_eff), float(gamma_eff)
    return w_eff, gamma_eff


def optical_damping(omega, model: BackactionModel):
    """Radiation-pressure part gamma_eff(w) - gamma_m, evaluated without the subtraction."""
    omega = np.asarray(omega, dtype=float)
    wm, k, d, G = model.omega_m, model.kappa, model.delta, model.G
    den = (k**2 + (omega - d) ** 2) * (k**2 + (omega + d) ** 2)
    return 2.0 * G**2 * d * wm * k / den


def characteristic_polynomial(model: BackactionModel, scaled=False):
    """Coefficients in omega (highest first) of the cleared susceptibility denominator.

    (omega_m^2 - w^2 - i gamma w)((kappa - i w)^2 + Delta^2) - G^2 Delta omega_m.
    With ``scaled=True`` the variable is w/omega_m.
    """
    if scaled:
        wm = 1.0
        g, k, d, G = model.scaled()
    else:
        wm, g, k, d, G = model.omega_m, model.gamma_m, model.kappa, model.delta, model.G
    mech = np.array([-1.0, -1j * g, wm**2])
    cav = np.array([-1.0, -2j * k, k**2 + d**2])
    p = np.polymul(mech, cav)
    p[-1] -= G**2 * d * wm
    return p


def stability_backaction(model: BackactionModel, with_poles=True) -> StabilityReport:
    """Routh-Hurwitz conditions s1 > 0, s2 > 0 cross-checked against the poles."""
    wm, g, k, d, G = 1.0, *model.scaled()
    t1 = 2 * g * k * (k**2 + (wm - d) ** 2) * (k**2 + (wm + d) ** 2)
    t2 = 2 * g * k * g * ((g + 2 * k) * (k**2 + d**2) + 2 * k * wm**2)
    t3 = d * wm * G**2 * (g + 2 * k) ** 2
    s1 = t1 + t2 + t3
    s2 = wm * (k**2 + d**2) - G**2 * d
    margin = min(normalized(s1, t1, t2, t3), normalized(s2, wm * (k**2 + d**2), G**2 * d))
    w = model.omega_m
    s_values = {"s1": s1 * w**6, "s2": s2 * w**3}
    stable = bool(s1 > 0 and s2 > 0)
    if not with_poles:
        return StabilityReport(
            s_values=s_values, poles=(), stable=stable, margin=margin,
            poles_stable=stable, pole_margin=math.nan, detail="poles not computed",
        )
    poles = oracles.pole_stability(characteristic_polynomial(model, scaled=True), scale=1.0)
    return StabilityReport(
        s_values=s_values,
        poles=tuple(z * w for z in poles.poles),
        stable=stable,
        margin=margin,
        poles_stable=poles.poles_stable,
        pole_margin=poles.pole_margin,
        detail=poles.detail,
    )


def _require_stable(model):
    report = stability_backaction(model, with_poles=False)
    if report.marginal:
        raise MarginalStabilityError("model is marginally stable", report)
    if not report.stable:
        raise UnstableModelError("model is unstable; no steady state exists", report)
    return report


def _require_flat(model, what):
    if model.thermal_model is not ThermalModel.FLAT:
        raise InvalidParameterError(f"{what} requires the flat thermal model")


def closed_form_coefficients(model: BackactionModel):
    """(b_q, d_q, b_p, d_p) with <dq^2> = 1/2 + b_q + d_q nbar, same for p."""
    wm, g, k, d, G = 1.0, *model.scaled()
    s1 = 2 * g * k * (
        (k**2 + (wm - d) ** 2) * (k**2 + (wm + d) ** 2)
        + g * ((g + 2 * k) * (k**2 + d**2) + 2 * k * wm**2)
    ) + d * wm * G**2 * (g + 2 * k) ** 2
    s2 = wm * (k**2 + d**2) - G**2 * d
    b_p = G**2 * k * (d**2 * (g + k) + k * (g * k + k**2 + wm**2) - d * wm * (g + 2 * k)) / s1
    d_p = 1.0 - 2.0 * G**2 * k * wm * d * (g + 2 * k) / s1
    b_q = (
        G**2
        * (
            2 * k * (d**2 + k**2) * ((d**2 + (g + k) ** 2) * (k * wm + g * d) + wm**2 * (g + k) * (wm - 2 * d))
            + d * G**2 * wm * (g + 2 * k) * (d * g - k * (wm - 2 * d))
        )
        / (2 * s1 * s2)
    )
    d_q = 1.0 + d * G**2 * (
        s1 - 2 * g * k * wm**2 * (wm**2 + 2 * g * k + 4 * k**2) - 4 * k**2 * wm**2 * (d**2 + k**2)
    ) / (s1 * s2)
    return b_q, d_q, b_p, d_p


def exact_variances_backaction(model: BackactionModel) -> CoolingResult:
    """Closed-form steady-state variances (flat thermal noise)."""
    _require_flat(model, "the closed form")
    report = _require_stable(model)
    b_q, d_q, b_p, d_p = closed_form_coefficients(model)
    var_q = 0.5 + b_q + d_q * model.nbar
    var_p = 0.5 + b_p + d_p * model.nbar
    return CoolingResult.from_variances(var_q, var_p, model.omega_m, Method.CLOSED_FORM, margin=report.margin)


def scattering_rates(model: BackactionModel) -> ScatteringRates:
    """Stokes (A+) and anti-Stokes (A-) rates and the net cooling rate A- - A+."""
    k, d, G, wm = model.kappa, model.delta, model.G, model.omega_m
    a_plus = G**2 * k / (2.0 * (k**2 + (d + wm) ** 2))
    a_minus = G**2 * k / (2.0 * (k**2 + (d - wm) ** 2))
    # A- - A+ combined over a common denominator; the direct difference
    # loses digits when the sidebands are nearly balanced.
    gamma_cool = 2.0 * G**2 * k * d * wm / ((k**2 + (d + wm) ** 2) * (k**2 + (d - wm) ** 2))
    return ScatteringRates(a_plus, a_minus, gamma_cool)


def perturbative_limits(model: BackactionModel) -> PerturbativeEstimate:
    """Small-gamma_m variances and the weak-coupling occupancy (gamma nbar + A+)/(gamma + Gamma).

    Warns with :class:`RegimeWarning` when omega_m >> nbar gamma_m, G or
    kappa >> G, gamma_m fail by more than a factor 3.
    """
    wm, g, k, d, G, nbar = model.omega_m, model.gamma_m, model.kappa, model.delta, model.G, model.nbar
    rates = scattering_rates(model)
    total = g + rates.gamma_cool
    eta_d = 1.0 - G**2 * d / (wm * (k**2 + d**2))
    if total <= 0 or eta_d <= 0:
        raise UnstableModelError("perturbative estimate requires gamma_m + Gamma > 0 and eta_Delta > 0")
    a = (k**2 + d**2 + eta_d * wm**2) / (eta_d * (k**2 + d**2 + wm**2))
    b = (2.0 * (d**2 - k**2) - wm**2) / (k**2 + d**2)
    mean_a = 0.5 * (rates.a_plus + rates.a_minus)
    var_p = (mean_a + g * nbar * (1.0 + rates.gamma_cool / (2.0 * k))) / total
    var_q = (a * mean_a + g * nbar / eta_d * (1.0 + rates.gamma_cool * b / (2.0 * k))) / total
    n_eff = (g * nbar + rates.a_plus) / total
    regime_ok = wm >= 3 * nbar * g and wm >= 3 * G and k >= 3 * G and k >= 3 * g
    if not regime_ok:
        warnings.warn(
            "weak-coupling estimate used outside omega_m, kappa >> nbar gamma_m, G",
            RegimeWarning,
            stacklevel=2,
        )
    return PerturbativeEstimate(var_q, var_p, n_eff, regime_ok)


def position_spectrum(omega, model: BackactionModel):
    """S_q(w) = |chi_eff(w)|^2 [S_th(w) + S_rp(w)]."""
    chi = susceptibility(omega, model)
    s_th, s_rp = noise_spectra(omega, model)
    return np.abs(chi) ** 2 * (s_th + s_rp)


# ---------------------------------------------------------------------------
# oracle adapters


def spectrum_integrand(model: BackactionModel) -> oracles.SpectrumIntegrand:
    poles = np.roots(characteristic_polynomial(model, scaled=True)) * model.omega_m
    return oracles.SpectrumIntegrand(
        evaluator=lambda w: position_spectrum(w, model),
        parity_hint="even",
        tail_exponent=4 if model.thermal_model is ThermalModel.FLAT else 3,
        omega_scale=max(model.omega_m, model.kappa),
        features=tuple((abs(z.real), abs(z.imag)) for z in poles),
    )


def rational_integrands(model: BackactionModel):
    """Position and momentum integrands as rational functions of w/omega_m."""
    _require_flat(model, "the rational form")
    wm, g, k, d, G = 1.0, *model.scaled()
    p = characteristic_polynomial(model, scaled=True)
    den = np.real(np.polymul(p, np.conj(p)))
    cav2 = np.polymul([1.0, -2 * d, k**2 + d**2], [1.0, 2 * d, k**2 + d**2])
    s_th = g * (2.0 * model.nbar + 1.0)
    num = np.polyadd(s_th * cav2, G**2 * k * np.array([1.0, 0.0, d**2 + k**2]))
    num = num * wm**2
    rq = oracles.RationalIntegrand(num, den, factor=p)
    return rq, rq.times_omega_squared()


def state_model(model: BackactionModel) -> oracles.LinearStateModel:
    """Drift/diffusion of (dq, dp, dX, dY) in units of omega_m."""
    _require_flat(model, "the Markovian state model")
    g, k, d, G = model.scaled()
    A = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [-1.0, -g, G, 0.0],
            [0.0, 0.0, -k, d],
            [G, 0.0, -d, -k],
        ]
    )
    D = np.diag([0.0, g * (2.0 * model.nbar + 1.0), k, k])
    return oracles.LinearStateModel(A, D)


def variances(model: BackactionModel, method=Method.CLOSED_FORM, omega_cutoff=None) -> CoolingResult:
    """Steady-state variances by the requested route.

    The coth bath is only available by quadrature; its momentum moment
    diverges logarithmically so a cutoff is applied (default 1e3 x the
    larger of the model scale and the thermal frequency 2 k_B T / hbar).
    """
    method = Method(method)
    if method is Method.CLOSED_FORM:
        return exact_variances_backaction(model)
    report = _require_stable(model)
    if method is Method.QUADRATURE:
        s = spectrum_integrand(model)
        if model.thermal_model is ThermalModel.COTH and omega_cutoff is None:
            thermal = 2.0 * model.omega_m / math.log1p(1.0 / model.nbar) if model.nbar > 0 else 0.0
            omega_cutoff = 1e3 * max(s.omega_scale, thermal)
        m = oracles.integrate_moments(s, omega_max=omega_cutoff)
        wm2 = model.omega_m**2
        return CoolingResult.from_variances(
            m.m0, m.m2 / wm2, model.omega_m, method,
            error_bound=max(m.m0_error / abs(m.m0), m.m2_error / abs(m.m2)),
            margin=report.margin,
        )
    if method is Method.RESIDUE:
        rq, rp = rational_integrands(model)
        return CoolingResult.from_variances(
            oracles.integrate_rational(rq), oracles.integrate_rational(rp), model.omega_m, method,
            margin=report.margin,
        )
    V = oracles.lyapunov_covariance(state_model(model))
    return CoolingResult.from_variances(V[0, 0], V[1, 1], model.omega_m, method, margin=report.margin)
