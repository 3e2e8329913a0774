"""Independent numerical engines used to check the closed-form variances.

Four routes to the same steady-state moments:

* adaptive Simpson quadrature of a spectral density over the real axis,
  compactified with omega = omega_scale * tan(theta);
* residue summation for rational spectral densities;
* pole locations of a characteristic polynomial (stability);
* the continuous Lyapunov equation for a linear state-space model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import MarginalStabilityError, NumericalFailure, UnstableModelError
from .reports import StabilityReport

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SpectrumIntegrand:
    """A nonnegative spectral density on the real frequency axis.

    Parameters
    ----------
    evaluator : callable
        Vectorized ``omega -> S(omega)``.
    parity_hint : {"even", "none"}
        With ``"even"`` only omega >= 0 is sampled.
    tail_exponent : int
        ``S ~ omega**-k`` at large omega.  The second moment converges only
        for ``k >= 4`` (or with an explicit cutoff).
    omega_scale : float
        Scale of the tan compactification.
    features : sequence of (center, width)
        Narrow peaks that must not fall between samples, e.g. from the
        poles of the underlying susceptibility.  Used as breakpoints only.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    parity_hint: str = "even"
    tail_exponent: int = 4
    omega_scale: float = 1.0
    features: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.parity_hint not in ("even", "none"):
            raise ValueError(f"parity_hint must be 'even' or 'none', got {self.parity_hint!r}")
        if self.tail_exponent < 2:
            raise ValueError("integrand must decay at least as omega**-2")
        if not self.omega_scale > 0:
            raise ValueError("omega_scale must be positive")


@dataclass(frozen=True)
class MomentResult:
    m0: float
    m2: float
    m0_error: float
    m2_error: float
    n_panels: int
    n_evaluations: int


@dataclass(frozen=True)
class RationalIntegrand:
    """numerator(omega) / denominator(omega) with real coefficients.

    ``factor`` optionally gives a complex polynomial p with
    ``denominator = |p(omega)|**2`` on the real axis; its roots are then used
    directly, which keeps nearly-conjugate pole pairs (narrow resonances)
    accurate.  Coefficients are highest power first, as in ``numpy.polyval``.
    """

    numerator: np.ndarray
    denominator: np.ndarray
    factor: Optional[np.ndarray] = None

    def __post_init__(self):
        num = np.trim_zeros(np.atleast_1d(np.asarray(self.numerator, dtype=float)), "f")
        den = np.trim_zeros(np.atleast_1d(np.asarray(self.denominator, dtype=float)), "f")
        if den.size == 0:
            raise ValueError("denominator is identically zero")
        if num.size == 0:
            num = np.zeros(1)
        if (den.size - 1) - (num.size - 1) < 2:
            raise ValueError("degree deficit must be at least 2 for convergence")
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)
        if self.factor is not None:
            p = np.trim_zeros(np.atleast_1d(np.asarray(self.factor, dtype=complex)), "f")
            if 2 * (p.size - 1) != den.size - 1:
                raise ValueError("factor degree inconsistent with denominator")
            object.__setattr__(self, "factor", p)

    def __call__(self, omega):
        return np.polyval(self.numerator, omega) / np.polyval(self.denominator, omega)

    def times_omega_squared(self) -> "RationalIntegrand":
        return RationalIntegrand(
            np.polymul(self.numerator, [1.0, 0.0, 0.0]), self.denominator, self.factor
        )


@dataclass(frozen=True)
class LinearStateModel:
    """dx = drift x dt + noise, with symmetrized noise covariance ``diffusion``.

    For the detuned cavity the state is (dq, dp, dX, dY).
    """

    drift: np.ndarray
    diffusion: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.drift, dtype=float)
        D = np.asarray(self.diffusion, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or D.shape != A.shape:
            raise ValueError("drift and diffusion must be square matrices of equal shape")
        if not np.allclose(D, D.T, rtol=0, atol=1e-14 * max(1.0, np.abs(D).max())):
            raise ValueError("diffusion must be symmetric")
        w = np.linalg.eigvalsh(0.5 * (D + D.T))
        if w.min() < -1e-12 * max(np.trace(D), 1e-300):
            raise ValueError("diffusion must be positive semidefinite")
        object.__setattr__(self, "drift", A)
        object.__setattr__(self, "diffusion", 0.5 * (D + D.T))


# ---------------------------------------------------------------------------
# quadrature


def integrate_moments(
    s: SpectrumIntegrand,
    rtol: float = 1e-9,
    max_panels: int = 2**20,
    omega_max: Optional[float] = None,
) -> MomentResult:
    """m0 = int dw/2pi S(w) and m2 = int dw/2pi w^2 S(w).

    Breadth-first adaptive Simpson on theta with omega = omega_scale tan(theta);
    each panel carries a Richardson estimate (S2 - S1)/15 that is both added
    to the value and summed into the reported error bound.  ``omega_max``
    truncates the axis; without it the far tail beyond the last sample is
    added from the power-law ``tail_exponent``.

    If the second moment diverges (``tail_exponent < 4`` and no cutoff),
    ``m2`` is returned as ``inf``.
    """
    sc = float(s.omega_scale)
    k = s.tail_exponent
    want_m2 = omega_max is not None or k >= 4
    if omega_max is not None:
        theta_hi = math.atan(omega_max / sc)
    else:
        theta_hi = 0.5 * math.pi - 1e-8
    theta_lo = 0.0 if s.parity_hint == "even" else -theta_hi
    fold = 2.0 if s.parity_hint == "even" else 1.0

    def f(theta):
        t = np.tan(theta)
        w = sc * t
        jac = sc * (1.0 + t * t)
        v0 = np.asarray(s.evaluator(w), dtype=float) * jac
        if want_m2:
            return np.stack([v0, v0 * w * w])
        return v0[None, :]

    edges = _breakpoints(s, theta_lo, theta_hi)
    values, errors, n_panels, n_eval = _adaptive_simpson(f, edges, rtol, max_panels)

    if omega_max is None:
        # Power-law remainder beyond the last sample, both ends.
        w_hi = sc * math.tan(theta_hi)
        jac_hi = sc * (1.0 + math.tan(theta_hi) ** 2)
        ends = [theta_hi] if s.parity_hint == "even" else [theta_hi, -theta_hi]
        exps = [k] + ([k - 2] if want_m2 else [])
        for th in ends:
            tail_v = np.abs(f(np.array([th]))[:, 0]) / jac_hi
            for i, kj in enumerate(exps):
                corr = tail_v[i] * w_hi / (kj - 1)
                values[i] += corr
                errors[i] += abs(corr) * 1e-3

    values = fold * values / (2.0 * math.pi)
    errors = fold * errors / (2.0 * math.pi)
    if want_m2:
        return MomentResult(values[0], values[1], errors[0], errors[1], n_panels, n_eval)
    return MomentResult(values[0], math.inf, errors[0], math.inf, n_panels, n_eval)


def _breakpoints(s, lo, hi):
    sc = s.omega_scale
    pts = list(np.linspace(lo, hi, 17))
    for center, width in s.features:
        width = abs(width)
        if not (math.isfinite(center) and math.isfinite(width)):
            continue
        for j in (-64.0, -16.0, -4.0, -1.0, 0.0, 1.0, 4.0, 16.0, 64.0):
            for c in (center, -center):
                th = math.atan((c + j * width) / sc)
                if lo < th < hi:
                    pts.append(th)
    pts = np.unique(np.asarray(pts))
    keep = np.concatenate([[True], np.diff(pts) > 1e-13 * (hi - lo)])
    pts = pts[keep]
    pts[0], pts[-1] = lo, hi
    return pts


def _adaptive_simpson(f, edges, rtol, max_panels):
    # Start from four panels per breakpoint interval.
    sub = 4
    a = np.concatenate([np.linspace(l, r, sub + 1)[:-1] for l, r in zip(edges[:-1], edges[1:])])
    b = np.concatenate([np.linspace(l, r, sub + 1)[1:] for l, r in zip(edges[:-1], edges[1:])])
    h = b - a
    x = np.concatenate([a, a + 0.25 * h, a + 0.5 * h, a + 0.75 * h, b])
    fx = f(x)
    n_eval = x.size
    N = a.size
    fa, f1, fm, f3, fb = (fx[:, i * N : (i + 1) * N] for i in range(5))

    while True:
        h = b - a
        s1 = h / 6.0 * (fa + 4.0 * fm + fb)
        s2 = h / 12.0 * (fa + 4.0 * f1 + 2.0 * fm + 4.0 * f3 + fb)
        err = (s2 - s1) / 15.0
        val = s2 + err
        total = val.sum(axis=1)
        mag = np.abs(h) / 12.0 * (np.abs(fa) + 4 * np.abs(f1) + 2 * np.abs(fm) + 4 * np.abs(f3) + np.abs(fb))
        rounding = 64.0 * _EPS * mag
        aerr = np.abs(err)
        bound = aerr.sum(axis=1) + rounding.sum(axis=1)
        tol = rtol * np.maximum(np.abs(total), 1e-300)
        if not np.all(np.isfinite(val)):
            raise NumericalFailure("integrand is not finite on the sampling grid")
        if np.all(bound <= tol):
            return total, bound, a.size, n_eval
        split = np.any((aerr > tol[:, None] / a.size) & (aerr > rounding), axis=0)
        n_split = int(split.sum())
        if n_split == 0:
            # Only rounding noise remains above tolerance.
            raise NumericalFailure(
                "quadrature limited by rounding", estimate=total, error_bound=bound
            )
        if a.size + n_split > max_panels:
            raise NumericalFailure(
                f"quadrature did not converge within {max_panels} panels",
                estimate=total,
                error_bound=bound,
            )
        sa, sb, sh = a[split], b[split], h[split]
        sm = sa + 0.5 * sh
        new_x = np.concatenate([sa + 0.125 * sh, sa + 0.375 * sh, sm + 0.125 * sh, sm + 0.375 * sh])
        fn = f(new_x)
        n_eval += new_x.size
        M = n_split
        lq1, lq3, rq1, rq3 = (fn[:, i * M : (i + 1) * M] for i in range(4))
        keep = ~split
        a = np.concatenate([a[keep], sa, sm])
        b = np.concatenate([b[keep], sm, sb])
        fa_n = np.concatenate([fa[:, keep], fa[:, split], fm[:, split]], axis=1)
        f1_n = np.concatenate([f1[:, keep], lq1, rq1], axis=1)
        fm_n = np.concatenate([fm[:, keep], f1[:, split], f3[:, split]], axis=1)
        f3_n = np.concatenate([f3[:, keep], lq3, rq3], axis=1)
        fb_n = np.concatenate([fb[:, keep], fm[:, split], fb[:, split]], axis=1)
        fa, f1, fm, f3, fb = fa_n, f1_n, fm_n, f3_n, fb_n


# ---------------------------------------------------------------------------
# residues


def polished_roots(coeffs, iters=8):
    """Companion-matrix roots refined by Newton steps on the polynomial."""
    coeffs = np.asarray(coeffs, dtype=complex)
    roots = np.roots(coeffs)
    d = np.polyder(coeffs)
    for _ in range(iters):
        fp = np.polyval(d, roots)
        ok = fp != 0
        step = np.zeros_like(roots)
        step[ok] = np.polyval(coeffs, roots[ok]) / fp[ok]
        roots = roots - step
    return roots


def integrate_rational(r: RationalIntegrand, degenerate_tol: float = 1e-8) -> float:
    """int dw/2pi N(w)/D(w) by summing residues in the upper half plane.

    Poles must be simple and off the real axis.  Near-degenerate pole pairs
    (relative separation below ``degenerate_tol``) fall back to quadrature.
    """
    if r.factor is not None:
        pr = polished_roots(r.factor)
        roots = np.concatenate([pr, np.conj(pr)])
        lead = abs(r.factor[0]) ** 2
    else:
        roots = polished_roots(r.denominator)
        lead = r.denominator[0]
    scale = np.max(np.abs(roots))
    if np.any(np.abs(roots.imag) <= 1e-13 * scale):
        raise MarginalStabilityError("rational integrand has a pole on the real axis")

    diffs = np.abs(roots[:, None] - roots[None, :])
    np.fill_diagonal(diffs, np.inf)
    if diffs.min() < degenerate_tol * scale:
        warnings.warn(
            "near-degenerate poles; falling back to quadrature", RuntimeWarning, stacklevel=2
        )
        widths = np.abs(roots.imag)
        s = SpectrumIntegrand(
            evaluator=r,
            parity_hint="none",
            tail_exponent=r.denominator.size - r.numerator.size,
            omega_scale=scale,
            features=tuple(zip(np.abs(roots.real), widths)),
        )
        return integrate_moments(s).m0

    total = 0.0 + 0.0j
    for i in np.flatnonzero(roots.imag > 0):
        z = roots[i]
        others = np.delete(roots, i)
        total += np.polyval(r.numerator, z) / (lead * np.prod(z - others))
    # (1/2pi) * 2 pi i * sum of residues
    return float((1j * total).real)


# ---------------------------------------------------------------------------
# stability


def pole_stability(poly: Sequence[complex], scale: Optional[float] = None) -> StabilityReport:
    """Roots of a characteristic polynomial in omega (highest power first).

    Stable means every root has negative imaginary part.  The polynomial is
    rescaled to omega = scale * x before root finding; by default ``scale``
    is max_j |c_j / c_0|**(1/j), a bound on the root magnitudes.
    """
    c = np.trim_zeros(np.asarray(poly, dtype=complex), "f")
    n = c.size - 1
    if n < 1:
        raise ValueError("polynomial must have degree >= 1")
    if scale is None:
        # Fujiwara-type bound on root magnitude.
        ratios = [abs(c[j] / c[0]) ** (1.0 / j) for j in range(1, n + 1) if c[j] != 0]
        scale = max(ratios) if ratios else 1.0
    powers = scale ** np.arange(n, -1, -1)
    cx = c * powers / (c[0] * scale**n)
    dyn = np.abs(cx[cx != 0])
    detail = f"scaled coefficient range {dyn.max() / dyn.min():.3g}"
    roots = polished_roots(cx) * scale
    imag_max = float(np.max(roots.imag))
    pole_margin = -imag_max / float(np.max(np.abs(roots)))
    stable = bool(imag_max < 0)
    return StabilityReport(
        s_values={},
        poles=tuple(complex(z) for z in roots),
        stable=stable,
        margin=pole_margin,
        poles_stable=stable,
        pole_margin=pole_margin,
        detail=detail,
    )


# ---------------------------------------------------------------------------
# Lyapunov


def lyapunov_covariance(m: LinearStateModel, refine: int = 2) -> np.ndarray:
    """Stationary covariance V solving drift V + V drift^T = -diffusion.

    Bartels-Stewart (scipy) followed by ``refine`` rounds of residual
    correction.  Refuses non-Hurwitz drift matrices.
    """
    A, D = m.drift, m.diffusion
    eig = np.linalg.eigvals(A)
    if np.max(eig.real) >= 0:
        raise UnstableModelError("drift matrix is not Hurwitz; no stationary covariance")
    V = scipy.linalg.solve_continuous_lyapunov(A, -D)
    for _ in range(refine):
        R = A @ V + V @ A.T + D
        V = V + scipy.linalg.solve_continuous_lyapunov(A, -R)
    return 0.5 * (V + V.T)
