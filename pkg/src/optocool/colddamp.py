"""Cold-damping feedback cooling at cavity resonance.

The phase quadrature of the resonant cavity output is detected with
efficiency eta and fed back through a derivative high-pass filter
g(w) = -i w g_cd / (1 - i w / omega_fb).  The loop is handled entirely in
the frequency domain; the Lyapunov route augments the state with the filter
variable.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import oracles
from .backaction import thermal_spectrum
from .errors import InvalidParameterError, MarginalStabilityError, RegimeWarning, UnstableModelError
from .params import PhysicalConfig, ThermalModel, derive_params
from .reports import CoolingResult, Method, StabilityReport, normalized


class Regime(str, enum.Enum):
    INSTANTANEOUS = "instantaneous"
    FINITE_BANDWIDTH = "finite_bandwidth"


@dataclass(frozen=True)
class FeedbackFilter:
    g_cd: float
    omega_fb: float

    def __post_init__(self):
        if not self.omega_fb > 0:
            raise InvalidParameterError("omega_fb must be positive")
        if not self.g_cd >= 0:
            raise InvalidParameterError("g_cd must be >= 0")

    def __call__(self, omega):
        return feedback_transfer(omega, self)


@dataclass(frozen=True)
class ColdDampModel:
    """Resonant-cavity cold damping; the detuning is identically zero."""

    omega_m: float
    gamma_m: float
    kappa: float
    G: float
    nbar: float
    g_cd: float
    omega_fb: float
    eta: float = 1.0
    thermal_model: ThermalModel = ThermalModel.FLAT

    def __post_init__(self):
        for name in ("omega_m", "gamma_m", "kappa", "omega_fb"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        if not self.G >= 0:
            raise InvalidParameterError("G must be >= 0")
        if not self.nbar >= 0:
            raise InvalidParameterError("nbar must be >= 0")
        if not self.g_cd >= 0:
            raise InvalidParameterError("g_cd must be >= 0")
        if not 0 < self.eta <= 1:
            raise InvalidParameterError("eta must lie in (0, 1]")
        object.__setattr__(self, "thermal_model", ThermalModel(self.thermal_model))

    @classmethod
    def from_config(cls, cfg: PhysicalConfig) -> "ColdDampModel":
        """Model at resonance; ``cfg.detuning`` is ignored.

        Without feedback the bandwidth does not enter any result, so a
        missing ``feedback_bandwidth`` is replaced by kappa.
        """
        d = derive_params(cfg, detuning=0.0)
        omega_fb = cfg.feedback_bandwidth if cfg.feedback_bandwidth is not None else cfg.cavity_decay
        return cls(
            omega_m=cfg.mech_freq,
            gamma_m=cfg.mech_damping,
            kappa=cfg.cavity_decay,
            G=d.effective_coupling,
            nbar=d.thermal_occupancy,
            g_cd=cfg.feedback_gain,
            omega_fb=omega_fb,
            eta=cfg.detection_efficiency,
            thermal_model=cfg.thermal_model,
        )

    @property
    def filter(self):
        return FeedbackFilter(self.g_cd, self.omega_fb)

    @property
    def g2(self):
        """Scaled gain g_cd G omega_m / (kappa gamma_m)."""
        return self.g_cd * self.G * self.omega_m / (self.kappa * self.gamma_m)

    @property
    def zeta(self):
        """Scaled power 2 G^2 / (kappa gamma_m)."""
        return 2.0 * self.G**2 / (self.kappa * self.gamma_m)

    def scaled(self):
        """(gamma, kappa, G, omega_fb) in units of omega_m."""
        w = self.omega_m
        return self.gamma_m / w, self.kappa / w, self.G / w, self.omega_fb / w


@dataclass(frozen=True)
class GainBound:
    eps0: float
    eps_r_sq: float
    g2_max: float


def feedback_transfer(omega, filt: FeedbackFilter):
    """g(w) = -i w g_cd / (1 - i w / omega_fb)."""
    omega = np.asarray(omega, dtype=float)
    return -1j * omega * filt.g_cd / (1.0 - 1j * omega / filt.omega_fb)


def feedback_noise_spectrum(omega, model: ColdDampModel):
    """Shot noise injected by the loop, |g(w)|^2 / (4 kappa eta)."""
    g = feedback_transfer(omega, model.filter)
    return np.abs(g) ** 2 / (4.0 * model.kappa * model.eta)


def estimated_quadrature_gain(model: ColdDampModel):
    """Normalization 1/sqrt(2 eta kappa) taking measured output to the intracavity Y estimate."""
    return 1.0 / math.sqrt(2.0 * model.eta * model.kappa)


def vacuum_noise_weight(eta):
    """Weight sqrt(1/eta - 1) of the vacuum admixed by a detector of efficiency eta."""
    if not 0 < eta <= 1:
        raise InvalidParameterError("eta must lie in (0, 1]")
    return math.sqrt(1.0 / eta - 1.0)


def susceptibility_cd(omega, model: ColdDampModel):
    omega = np.asarray(omega, dtype=float)
    wm = model.omega_m
    g = feedback_transfer(omega, model.filter)
    inv = (wm - omega) * (wm + omega) - 1j * omega * model.gamma_m + g * model.G * wm / (model.kappa - 1j * omega)
    if np.any(np.abs(inv) <= 1e-14 * (wm**2 + omega**2)):
        raise MarginalStabilityError("susceptibility has a pole on the real axis")
    return wm / inv


def effective_oscillator_cd(omega, model: ColdDampModel):
    """Effective resonance frequency and damping rate under feedback."""
    omega = np.asarray(omega, dtype=float)
    wm, k, wf = model.omega_m, model.kappa, model.omega_fb
    loop = model.g_cd * model.G * wm * wf
    den = (k**2 + omega**2) * (wf**2 + omega**2)
    w_eff = np.sqrt(wm**2 + loop * omega**2 * (k + wf) / den)
    gamma_eff = model.gamma_m + loop * (k * wf - omega**2) / den
    if w_eff.ndim == 0:
        return float(w_eff), float(gamma_eff)
    return w_eff, gamma_eff


def characteristic_polynomial_cd(model: ColdDampModel, scaled=False):
    """(omega_m^2 - w^2 - i gamma w)(kappa - i w)(omega_fb - i w) - i w g_cd omega_fb G omega_m."""
    if scaled:
        wm = 1.0
        g, k, G, wf = model.scaled()
    else:
        wm, g, k, G, wf = model.omega_m, model.gamma_m, model.kappa, model.G, model.omega_fb
    p = np.polymul(np.polymul([-1.0, -1j * g, wm**2], [-1j, k]), [-1j, wf])
    p = np.polyadd(p, [-1j * model.g_cd * wf * G * wm, 0.0])
    return p


def _s_cd(g, k, G, wf, g_cd, w=1.0):
    """s_cd expanded in monomials, returned with the sum of their magnitudes.

    Only three monomials are negative, so the sign is resolved accurately
    even when gamma_m is many orders below the other rates.
    """
    L = g_cd * G * w
    pos_L = g**2 * k * wf + g**2 * wf**2 + g * k**2 * wf + g * k * wf**2 + g * w**2 * wf + g * wf**3 + k**2 * wf**2 + k * wf**3
    neg_L = k * w**2 * wf + w**2 * wf**2
    pos_0 = (
        g**3 * k**2 * wf + g**3 * k * wf**2 + g**2 * k**3 * wf + g**2 * k**2 * w**2
        + 2 * g**2 * k**2 * wf**2 + 2 * g**2 * k * w**2 * wf + g**2 * k * wf**3 + g**2 * w**2 * wf**2
        + g * k**3 * w**2 + g * k**3 * wf**2 + g * k**2 * w**2 * wf + g * k**2 * wf**3
        + g * k * w**4 + g * k * w**2 * wf**2 + g * w**4 * wf + g * w**2 * wf**3
    )
    pos = pos_0 + L * pos_L
    neg = L * neg_L + L**2 * wf**2
    return pos - neg, pos + neg


def stability_cd(model: ColdDampModel, with_poles=True) -> StabilityReport:
    """The single nontrivial Routh-Hurwitz condition s_cd > 0, checked against the poles."""
    g, k, G, wf = model.scaled()
    s_cd, scale = _s_cd(g, k, G, wf, model.g_cd)
    margin = normalized(s_cd, scale)
    w = model.omega_m
    s_values = {"s_cd": s_cd * w**6}
    stable = bool(s_cd > 0)
    if not with_poles:
        return StabilityReport(
            s_values=s_values, poles=(), stable=stable, margin=margin,
            poles_stable=stable, pole_margin=math.nan, detail="poles not computed",
        )
    poles = oracles.pole_stability(characteristic_polynomial_cd(model, scaled=True), scale=1.0)
    return StabilityReport(
        s_values=s_values,
        poles=tuple(z * w for z in poles.poles),
        stable=stable,
        margin=margin,
        poles_stable=poles.poles_stable,
        pole_margin=poles.pole_margin,
        detail=poles.detail,
    )


def max_gain(model: ColdDampModel) -> GainBound:
    """Upper limit eps0 + sqrt(eps0^2 + eps_r^2) on the scaled gain g2."""
    wm, g, k, wf = model.omega_m, model.gamma_m, model.kappa, model.omega_fb
    eps0 = 0.5 * (
        wf / g * (1.0 + g / k)
        + k / g
        + g / k
        + 1.0
        - wm**2 / (k * g)
        + wm**2 / (k * wf)
        + (g + k) / wf
        - wm**2 / (g * wf)
    )
    eps_r_sq = (wm**2 + k**2 + g * k) / (wf**2 * k**2 * g) * (
        wf**3 + wf**2 * (k + g) + wf * (wm**2 + g * k) + k * wm**2
    )
    return GainBound(eps0, eps_r_sq, eps0 + math.sqrt(eps0**2 + eps_r_sq))


def _require_stable(model):
    report = stability_cd(model, with_poles=False)
    if report.marginal:
        raise MarginalStabilityError("model is marginally stable", report)
    if not report.stable:
        raise UnstableModelError("feedback loop is unstable; no steady state exists", report)
    return report


def _require_flat(model, what):
    if model.thermal_model is not ThermalModel.FLAT:
        raise InvalidParameterError(f"{what} requires the flat thermal model")


def _abcd(g, k, G, wf, g_cd, wm=1.0):
    loop = g_cd * G * wm
    A = wm**2 * (k * wm**2 + wf * (wm**2 + g * k + loop))
    B = wm**2 * k**2 * (g + k + wf)
    C = wf * k * (wf**2 * (k + g) + wf * (k + g) ** 2 + g * (wm**2 + k**2 + k * g))
    D = (
        wf**2 * (g * (wm**2 + k**2 + k * g) + (k + g) * loop)
        + wf * (wm**2 + k * g) * (wm**2 + k * g + loop)
        + k * wm**2 * (wm**2 + g * k)
    )
    return A, B, C, D


def _closed_form(model, corrected):
    g, k, G, wf = model.scaled()
    wm = 1.0
    s_cd, _ = _s_cd(g, k, G, wf, model.g_cd)
    A, B, C, D = _abcd(g, k, G, wf, model.g_cd)
    thermal = model.nbar + 0.5
    if corrected:
        # Thermal force spectrum is gamma_m (2 nbar + 1); C loses the loop term.
        thermal *= g
        C = C - model.g_cd * G * wm * k * wf**2
    shot = model.g_cd**2 * wf**2 / (8.0 * k * model.eta)
    rp = G**2 / (2.0 * k)
    var_q = (thermal * (A + (1.0 + wf**2 / k**2) * B + C) + shot * (A + B) + rp * (B + C)) / s_cd
    var_p = (
        thermal * ((k**2 + wf**2) / wm**2 * A + wf**2 / wm**2 * B + D)
        + shot * (k**2 / wm**2 * A + D)
        + rp * (k**2 / wm**2 * A + wf**2 / wm**2 * B)
    ) / s_cd
    return var_q, var_p


def exact_variances_cd(model: ColdDampModel) -> CoolingResult:
    """Closed-form steady-state variances under cold damping (flat thermal noise).

    The thermal bracket carries the damping prefactor gamma_m, and the
    position coefficient C includes -g_cd G omega_m kappa omega_fb^2; with these
    the expressions agree with the spectral integral to rounding.
    """
    _require_flat(model, "the closed form")
    report = _require_stable(model)
    var_q, var_p = _closed_form(model, corrected=True)
    return CoolingResult.from_variances(var_q, var_p, model.omega_m, Method.CLOSED_FORM, margin=report.margin)


def uncorrected_variances_cd(model: ColdDampModel):
    """(var_q, var_p) from the closed form *without* the two corrections above.

    Kept only to quantify how far that form is from the spectral integral.
    """
    _require_flat(model, "the closed form")
    _require_stable(model)
    return _closed_form(model, corrected=False)


def limit_variances_cd(model: ColdDampModel, regime):
    """Adiabatic-cavity approximations to (var_q, var_p).

    ``instantaneous``: omega_fb >> kappa >> omega_m, gamma_m.
    ``finite_bandwidth``: kappa >> omega_fb ~ omega_m >> gamma_m.
    A :class:`RegimeWarning` is issued when an inequality fails by more
    than a factor 3.
    """
    regime = Regime(regime)
    wm, g, k, wf, eta = model.omega_m, model.gamma_m, model.kappa, model.omega_fb, model.eta
    nbar, g2, zeta = model.nbar, model.g2, model.zeta
    if zeta == 0:
        raise InvalidParameterError("limiting forms need a nonzero drive (zeta > 0)")
    shot = g2**2 / (4.0 * eta * zeta)
    if regime is Regime.INSTANTANEOUS:
        ok = wf >= 3 * k and k >= 3 * wm and k >= 3 * g
        var_q = (nbar + 0.5 + zeta / 4.0 + shot * (1.0 + g2 * g / k)) / (1.0 + g2)
        var_p = ((nbar + 0.5) * (1.0 + g2 * g / k) + zeta / 4.0) / (1.0 + g2) + shot * wf * g / wm**2
    else:
        ok = k >= 3 * wf and wm / 3 <= wf <= 3 * wm and wm >= 3 * g
        r = wm**2 / wf**2
        var_q = (shot + (nbar + 0.5 + zeta / 4.0) * (1.0 + r)) / (1.0 + g2 + r)
        var_p = (
            shot * (1.0 + g2 * g * wf / wm**2) + (nbar + 0.5 + zeta / 4.0) * (1.0 + r + g2 * g / wf)
        ) / (1.0 + g2 + r)
    if not ok:
        warnings.warn(f"{regime.value} limit used outside its regime", RegimeWarning, stacklevel=2)
    return var_q, var_p


def position_spectrum_cd(omega, model: ColdDampModel):
    """|chi_cd|^2 [S_th + S_rp(w, 0) + S_fb]."""
    omega = np.asarray(omega, dtype=float)
    chi = susceptibility_cd(omega, model)
    s_th = thermal_spectrum(omega, model.gamma_m, model.omega_m, model.nbar, model.thermal_model)
    s_rp = model.G**2 * model.kappa / (model.kappa**2 + omega**2)
    return np.abs(chi) ** 2 * (s_th + s_rp + feedback_noise_spectrum(omega, model))


# ---------------------------------------------------------------------------
# oracle adapters


def spectrum_integrand_cd(model: ColdDampModel) -> oracles.SpectrumIntegrand:
    poles = np.roots(characteristic_polynomial_cd(model, scaled=True)) * model.omega_m
    return oracles.SpectrumIntegrand(
        evaluator=lambda w: position_spectrum_cd(w, model),
        parity_hint="even",
        tail_exponent=4 if model.thermal_model is ThermalModel.FLAT else 3,
        omega_scale=max(model.omega_m, model.kappa, model.omega_fb),
        features=tuple((abs(z.real), abs(z.imag)) for z in poles),
    )


def rational_integrands_cd(model: ColdDampModel):
    _require_flat(model, "the rational form")
    g, k, G, wf = model.scaled()
    p = characteristic_polynomial_cd(model, scaled=True)
    den = np.real(np.polymul(p, np.conj(p)))
    cav = [1.0, 0.0, k**2]
    filt = [1.0, 0.0, wf**2]
    s_th = g * (2.0 * model.nbar + 1.0)
    num = s_th * np.polymul(cav, filt)
    num = np.polyadd(num, G**2 * k * np.asarray(filt))
    fb = model.g_cd**2 * wf**2 / (4.0 * k * model.eta)
    num = np.polyadd(num, fb * np.polymul([1.0, 0.0, 0.0], cav))
    rq = oracles.RationalIntegrand(num, den, factor=p)
    return rq, rq.times_omega_squared()


def state_model_cd(model: ColdDampModel) -> oracles.LinearStateModel:
    """(dq, dp, dX, dY, z) with z the low-pass filtered estimate, units of omega_m.

    The loop force is -g_cd dz/dt = -g_cd omega_fb (Y_est - z); the measured
    estimate Y_est = Y - (Y_in + sqrt(1/eta - 1) Y_v)/sqrt(2 kappa) feeds the
    input noise straight through, which gives correlated diffusion terms.
    """
    _require_flat(model, "the Markovian state model")
    g, k, G, wf = model.scaled()
    a = model.g_cd * wf
    r = 1.0 / math.sqrt(2.0 * k)
    c = vacuum_noise_weight(model.eta)
    s2k = math.sqrt(2.0 * k)
    A = np.array(
        [
            [0.0, 1.0, 0.0, 0.0, 0.0],
            [-1.0, -g, G, -a, a],
            [0.0, 0.0, -k, 0.0, 0.0],
            [G, 0.0, 0.0, -k, 0.0],
            [0.0, 0.0, 0.0, wf, -wf],
        ]
    )
    # noise channels: xi, X_in, Y_in, Y_v
    B = np.array(
        [
            [0.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, a * r, a * r * c],
            [0.0, s2k, 0.0, 0.0],
            [0.0, 0.0, s2k, 0.0],
            [0.0, 0.0, -wf * r, -wf * r * c],
        ]
    )
    Q = np.diag([g * (2.0 * model.nbar + 1.0), 0.5, 0.5, 0.5])
    return oracles.LinearStateModel(A, B @ Q @ B.T)


def variances_cd(model: ColdDampModel, method=Method.CLOSED_FORM, omega_cutoff=None) -> CoolingResult:
    """Steady-state variances by the requested route (see backaction.variances)."""
    method = Method(method)
    if method is Method.CLOSED_FORM:
        return exact_variances_cd(model)
    report = _require_stable(model)
    if method is Method.QUADRATURE:
        s = spectrum_integrand_cd(model)
        if model.thermal_model is ThermalModel.COTH and omega_cutoff is None:
            thermal = 2.0 * model.omega_m / math.log1p(1.0 / model.nbar) if model.nbar > 0 else 0.0
            omega_cutoff = 1e3 * max(s.omega_scale, thermal)
        m = oracles.integrate_moments(s, omega_max=omega_cutoff)
        return CoolingResult.from_variances(
            m.m0, m.m2 / model.omega_m**2, model.omega_m, method,
            error_bound=max(m.m0_error / abs(m.m0), m.m2_error / abs(m.m2)),
            margin=report.margin,
        )
    if method is Method.RESIDUE:
        rq, rp = rational_integrands_cd(model)
        return CoolingResult.from_variances(
            oracles.integrate_rational(rq), oracles.integrate_rational(rp), model.omega_m, method,
            margin=report.margin,
        )
    V = oracles.lyapunov_covariance(state_model_cd(model))
    return CoolingResult.from_variances(V[0, 0], V[1, 1], model.omega_m, method, margin=report.margin)
