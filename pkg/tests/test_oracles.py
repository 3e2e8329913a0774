import warnings

import numpy as np
import pytest

from optocool import backaction as ba
from optocool import oracles
from optocool.errors import MarginalStabilityError, NumericalFailure, UnstableModelError

from helpers import stable_backaction


def lorentzian(gamma=1e-3, nbar=4.0, wm=1.0):
    s_th = gamma * (2 * nbar + 1)
    return lambda w: s_th * wm**2 / ((wm**2 - w**2) ** 2 + gamma**2 * w**2)


def lorentzian_rational(gamma=1e-3, nbar=4.0):
    s_th = gamma * (2 * nbar + 1)
    p = [-1.0, -1j * gamma, 1.0]
    den = np.real(np.polymul(p, np.conj(p)))
    return oracles.RationalIntegrand([s_th], den, factor=p)


@pytest.mark.parametrize("gamma", [1e-1, 1e-3, 1e-5])
def test_lorentzian_moments(gamma):
    s = oracles.SpectrumIntegrand(lorentzian(gamma), features=((1.0, gamma),))
    m = oracles.integrate_moments(s)
    assert m.m0 == pytest.approx(4.5, rel=1e-9)
    assert m.m2 == pytest.approx(4.5, rel=1e-9)
    assert m.m0_error < 1e-8 * m.m0


def test_lorentzian_parity_none():
    s = oracles.SpectrumIntegrand(lorentzian(1e-2), parity_hint="none", features=((1.0, 1e-2),))
    assert oracles.integrate_moments(s).m0 == pytest.approx(4.5, rel=1e-9)


def test_divergent_second_moment():
    s = oracles.SpectrumIntegrand(lambda w: 1.0 / (1.0 + w**2), tail_exponent=2)
    m = oracles.integrate_moments(s)
    assert m.m0 == pytest.approx(0.5, rel=1e-8)
    assert m.m2 == np.inf
    cut = oracles.integrate_moments(s, omega_max=100.0)
    assert cut.m2 == pytest.approx((100 - np.arctan(100)) / np.pi, rel=1e-8)


def test_nonconvergence_reported():
    s = oracles.SpectrumIntegrand(lorentzian(1e-6))
    with pytest.raises(NumericalFailure) as info:
        oracles.integrate_moments(s, max_panels=200)
    assert info.value.estimate is not None and info.value.error_bound is not None


def test_spectrum_integrand_validation():
    with pytest.raises(ValueError):
        oracles.SpectrumIntegrand(lambda w: w, tail_exponent=1)
    with pytest.raises(ValueError):
        oracles.SpectrumIntegrand(lambda w: w, parity_hint="odd")


@pytest.mark.parametrize("gamma", [1e-1, 1e-3, 1e-6])
def test_residue_lorentzian(gamma):
    r = lorentzian_rational(gamma)
    assert oracles.integrate_rational(r) == pytest.approx(4.5, rel=1e-12)
    assert oracles.integrate_rational(r.times_omega_squared()) == pytest.approx(4.5, rel=1e-12)


def test_residue_without_factor():
    r = lorentzian_rational(1e-2)
    plain = oracles.RationalIntegrand(r.numerator, r.denominator)
    assert oracles.integrate_rational(plain) == pytest.approx(4.5, rel=1e-10)


def test_residue_rejects_real_pole():
    p = [-1.0, 0.0, 1.0]  # undamped oscillator
    r = oracles.RationalIntegrand([1.0], np.real(np.polymul(p, p)), factor=p)
    with pytest.raises(MarginalStabilityError):
        oracles.integrate_rational(r)


def test_residue_degenerate_falls_back():
    # (w^2 + 1)^2 has double poles at +-i
    r = oracles.RationalIntegrand([1.0], [1.0, 0.0, 2.0, 0.0, 1.0])
    with pytest.warns(RuntimeWarning):
        v = oracles.integrate_rational(r)
    assert v == pytest.approx(0.25, rel=1e-8)  # int dw / 2pi (1 + w^2)^-2 = 1/4


def test_rational_validation():
    with pytest.raises(ValueError):
        oracles.RationalIntegrand([1.0, 0.0], [1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        oracles.RationalIntegrand([1.0], [1.0, 0.0, 1.0], factor=[1.0, 1.0, 1.0])


def test_quadrature_error_bound_is_honest():
    for m in stable_backaction(200, seed=31):
        rq, _ = ba.rational_integrands(m)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ref = oracles.integrate_rational(rq)
        res = oracles.integrate_moments(ba.spectrum_integrand(m))
        # the residue value itself carries ~1e-12 relative rounding
        assert abs(res.m0 - ref) <= res.m0_error + 1e-12 * abs(ref)


def test_pole_stability_bare_oscillator():
    g = 1e-3
    rep = oracles.pole_stability([-1.0, -1j * g, 1.0])
    assert rep.stable
    poles = sorted(rep.poles, key=lambda z: z.real)
    assert poles[0] == pytest.approx(-np.sqrt(1 - g**2 / 4) - 0.5j * g, rel=1e-12)
    assert poles[1] == pytest.approx(np.sqrt(1 - g**2 / 4) - 0.5j * g, rel=1e-12)


def test_pole_stability_badly_scaled():
    s = 1e7
    rep = oracles.pole_stability(np.array([-1.0, -1j * 1e-3 * s, s**2]))
    assert rep.stable
    assert max(abs(z) for z in rep.poles) == pytest.approx(s, rel=1e-9)


def test_pole_stability_rejects_constant():
    with pytest.raises(ValueError):
        oracles.pole_stability([1.0])


def test_lyapunov_uncoupled():
    m = ba.BackactionModel(1.0, 1e-3, 0.3, 0.7, 0.0, 7.0)
    V = oracles.lyapunov_covariance(ba.state_model(m))
    assert np.allclose(V, np.diag([7.5, 7.5, 0.5, 0.5]), rtol=1e-12, atol=1e-14)


def test_lyapunov_postconditions():
    for m in stable_backaction(20, seed=41):
        V = oracles.lyapunov_covariance(ba.state_model(m))
        assert np.array_equal(V, V.T)
        assert np.linalg.eigvalsh(V).min() >= -1e-12 * np.trace(V)


def test_lyapunov_refuses_unstable():
    A = np.array([[0.1, 1.0], [-1.0, 0.0]])
    with pytest.raises(UnstableModelError):
        oracles.lyapunov_covariance(oracles.LinearStateModel(A, np.eye(2)))


def test_state_model_validation():
    with pytest.raises(ValueError):
        oracles.LinearStateModel(np.eye(2), np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        oracles.LinearStateModel(np.eye(2), -np.eye(2))
    with pytest.raises(ValueError):
        oracles.LinearStateModel(np.eye(2), np.eye(3))
