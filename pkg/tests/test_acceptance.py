"""Acceptance criteria, one test each, at the stated tolerances.

Every test appends a PASS/FAIL line to RESULTS (printed at the end of the
pytest run, or directly when this file is executed as a script).
"""

import dataclasses
import math
import time
import warnings

import numpy as np
import pytest

from optocool import backaction, colddamp
from optocool.constants import TWO_PI
from optocool.params import thermal_occupancy
from optocool.presets import fig4_config, figure_spec
from optocool.reports import Method
from optocool.sweep import minimize_neff, run_sweep, scheme_comparison

from helpers import random_backaction, random_colddamp, rel, stable_backaction, stable_colddamp

pytestmark = pytest.mark.acceptance

RESULTS = []


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def ba_models():
    return stable_backaction(1000)


@pytest.fixture(scope="module")
def cd_models():
    return stable_colddamp(1000)


@pytest.fixture(scope="module")
def fig2a_table():
    t0 = time.perf_counter()
    table = run_sweep(figure_spec("fig2a"))
    return table, time.perf_counter() - t0


def test_01_thermal_occupancy():
    n = thermal_occupancy(0.6, TWO_PI * 10e6)
    report(1, abs(n / 1250 - 1) <= 0.01, f"nbar(0.6 K, 10 MHz) = {n:.2f} (target 1250 +- 1%)")


def test_02_fig2_sweep(fig2a_table):
    table, elapsed = fig2a_table
    best = table.best()
    delta, kappa = best.values
    ok = 0.07 <= best.n_eff <= 0.15 and 0.1 <= kappa <= 0.35 and 0.8 <= delta <= 1.2 and elapsed < 10
    report(
        2, ok,
        f"100x100 min n_eff = {best.n_eff:.4f} at Delta/wm = {delta:.3f}, kappa/wm = {kappa:.3f} "
        f"(target [0.07, 0.15], kappa in [0.1, 0.35], Delta in [0.8, 1.2]); {elapsed:.2f} s",
    )


def test_03_fig4_sweep():
    t0 = time.perf_counter()
    table = run_sweep(figure_spec("fig4a"))
    elapsed = time.perf_counter() - t0
    best = table.best()
    g_cd, power = best.values
    opt = minimize_neff(figure_spec("fig4a", count=30))
    m = colddamp.ColdDampModel.from_config(table.spec.config_at({"g_cd": g_cd, "power": power}))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        q, p = colddamp.limit_variances_cd(m, "finite_bandwidth")
    ok = 0.15 <= best.n_eff <= 0.3 and elapsed < 10
    report(
        3, ok,
        f"min n_eff = {best.n_eff:.4f} at g_cd = {g_cd:.3f}, P/P0 = {power:.3f} (refined {opt.n_eff:.4f}, "
        f"T_eff = {best.result.T_eff * 1e3:.3f} mK; target [0.15, 0.3]); finite-bandwidth limit at "
        f"that point gives {0.5 * (q + p) - 0.5:.4f}; {elapsed:.2f} s",
    )


def _worst(models, reference, methods):
    worst = {m: 0.0 for m in methods}
    for model in models:
        ref = reference(model)
        for method, fn in methods.items():
            r = fn(model)
            worst[method] = max(worst[method], rel(r.var_q, ref.var_q), rel(r.var_p, ref.var_p))
    return worst


def test_04_oracles_backaction(ba_models):
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        worst = _worst(
            ba_models,
            backaction.exact_variances_backaction,
            {m: (lambda model, m=m: backaction.variances(model, m)) for m in ("quadrature", "residue", "lyapunov")},
        )
    elapsed = time.perf_counter() - t0
    ok = worst["quadrature"] < 1e-6 and worst["residue"] < 1e-9 and worst["lyapunov"] < 1e-9 and elapsed < 60
    report(
        4, ok,
        "1000 models, worst rel dev: quadrature {quadrature:.2e} (<1e-6), residue {residue:.2e}, "
        "lyapunov {lyapunov:.2e} (<1e-9); ".format(**worst) + f"{elapsed:.1f} s",
    )


def test_05_oracles_colddamp(cd_models):
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        worst = _worst(
            cd_models,
            colddamp.exact_variances_cd,
            {m: (lambda model, m=m: colddamp.variances_cd(model, m)) for m in ("quadrature", "residue", "lyapunov")},
        )
    # The uncorrected closed form (no gamma_m on the thermal term, C without the loop term) for comparison.
    dev = []
    for model in cd_models[:200]:
        ref = colddamp.variances_cd(model, Method.RESIDUE)
        q, p = colddamp.uncorrected_variances_cd(model)
        dev.append(max(rel(q, ref.var_q), rel(p, ref.var_p)))
    elapsed = time.perf_counter() - t0
    ok = worst["quadrature"] < 1e-6
    report(
        5, ok,
        "1000 models, corrected closed form vs quadrature {quadrature:.2e} (<1e-6), residue {residue:.2e}, "
        "lyapunov {lyapunov:.2e}; ".format(**worst)
        + f"uncorrected closed form median rel dev {np.median(dev):.2e}; {elapsed:.1f} s",
    )


def test_06_stability_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    counts = {}
    for name, draw, stab in (
        ("backaction", lambda r: random_backaction(r, G_hi=3.0), backaction.stability_backaction),
        ("colddamp", lambda r: random_colddamp(r, g_hi=1e3), colddamp.stability_cd),
    ):
        agree = disagree = skipped = unstable = 0
        for _ in range(1000):
            rep = stab(draw(rng))
            if rep.marginal:
                skipped += 1
                continue
            unstable += not rep.stable
            if rep.stable == rep.poles_stable:
                agree += 1
            else:
                disagree += 1
        counts[name] = (agree, disagree, skipped, unstable)
    elapsed = time.perf_counter() - t0
    ok = all(c[1] == 0 for c in counts.values()) and elapsed < 30
    detail = "; ".join(f"{k}: {a} agree, {d} disagree, {s} marginal skipped, {u} unstable" for k, (a, d, s, u) in counts.items())
    report(6, ok, detail + f"; {elapsed:.1f} s")


def test_07_rate_identity(ba_models):
    worst = 0.0
    for m in ba_models:
        # gamma_eff - gamma_m is the optical damping; forming it by subtraction
        # would only measure the rounding of gamma_m + optical.
        optical = backaction.optical_damping(m.omega_m, m)
        Gamma = backaction.scattering_rates(m).gamma_cool
        worst = max(worst, rel(optical, Gamma))
    report(7, worst < 1e-12, f"worst rel |gamma_eff(wm) - gamma_m - Gamma| / Gamma = {worst:.2e} (<1e-12)")


def test_08_gain_bound():
    rng = np.random.default_rng(8)
    worst, bad = 0.0, 0
    for _ in range(100):
        m = random_colddamp(rng)
        g2max = colddamp.max_gain(m).g2_max

        def at(f):
            g_cd = f * g2max * m.kappa * m.gamma_m / (m.G * m.omega_m)
            return colddamp.stability_cd(dataclasses.replace(m, g_cd=g_cd), with_poles=False)

        worst = max(worst, abs(at(1.0).margin))
        bad += not (at(0.99).margin > 0 and at(1.01).margin < 0)
    report(8, worst < 1e-9 and bad == 0, f"100 models: max |s_cd|/scale at g2_max = {worst:.2e} (<1e-9), {bad} sign failures at 0.99/1.01")


def test_09_perturbative(fig2):
    m = backaction.BackactionModel.from_config(fig2)
    m = backaction.BackactionModel(m.omega_m, m.gamma_m, 0.2 * m.omega_m, m.omega_m, 0.01 * m.omega_m, m.nbar)
    exact = backaction.exact_variances_backaction(m).n_eff
    pert = backaction.perturbative_limits(m).n_eff
    d = rel(pert, exact)
    report(9, d < 0.1, f"n_eff perturbative {pert:.4f} vs exact {exact:.4f}, rel {d:.3%} (<10%)")


def test_10_heisenberg_equipartition(ba_models, cd_models, fig2a_table):
    worst = math.inf
    n = 0
    for m in ba_models:
        r = backaction.exact_variances_backaction(m)
        worst = min(worst, r.uncertainty_product - 0.25)
        n += 1
    for m in cd_models:
        r = colddamp.exact_variances_cd(m)
        worst = min(worst, r.uncertainty_product - 0.25)
        n += 1
    best = fig2a_table[0].best().result
    ok = worst >= -1e-12 and abs(best.var_q - best.var_p) < 0.2 and 0.5 <= best.var_q <= 0.9 and 0.5 <= best.var_p <= 0.9
    report(
        10, ok,
        f"{n} models, min(var_q var_p - 1/4) = {worst:.3e}; fig2a optimum var_q = {best.var_q:.4f}, "
        f"var_p = {best.var_p:.4f}, gap {abs(best.var_q - best.var_p):.4f} (<0.2)",
    )


def test_11_scheme_comparison():
    rows = {r.kappa: r for r in scheme_comparison(fig4_config(), [0.2, 3.0])}
    good, bad = rows[0.2], rows[3.0]
    ok = good.backaction.n_eff < good.colddamp.n_eff and bad.colddamp.n_eff < bad.backaction.n_eff
    report(
        11, ok,
        f"kappa = 0.2 wm: backaction {good.backaction.n_eff:.4f} vs colddamp {good.colddamp.n_eff:.4g}; "
        f"kappa = 3 wm: backaction {bad.backaction.n_eff:.4f} vs colddamp {bad.colddamp.n_eff:.4f}",
    )


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
