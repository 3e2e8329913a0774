"""Random model generators shared by the unit and acceptance tests."""

import numpy as np

from optocool.backaction import BackactionModel, stability_backaction
from optocool.colddamp import ColdDampModel, stability_cd


def log_uniform(rng, lo, hi):
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def draw_nbar(rng):
    # a few exact zeros, otherwise log-uniform up to 1e4
    return 0.0 if rng.random() < 0.05 else log_uniform(rng, 1e-2, 1e4)


def random_backaction(rng, G_hi=1.0):
    return BackactionModel(
        omega_m=1.0,
        gamma_m=log_uniform(rng, 1e-6, 1e-3),
        kappa=log_uniform(rng, 0.05, 30.0),
        delta=log_uniform(rng, 0.1, 3.0),
        G=log_uniform(rng, 0.01, G_hi),
        nbar=draw_nbar(rng),
    )


def random_colddamp(rng, g_hi=10.0):
    return ColdDampModel(
        omega_m=1.0,
        gamma_m=log_uniform(rng, 1e-6, 1e-3),
        kappa=log_uniform(rng, 0.05, 30.0),
        G=log_uniform(rng, 0.01, 1.0),
        nbar=draw_nbar(rng),
        g_cd=log_uniform(rng, 1e-2, g_hi),
        omega_fb=log_uniform(rng, 0.1, 30.0),
        eta=float(rng.uniform(0.1, 1.0)),
    )


def stable_models(draw, stability, n, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        m = draw(rng)
        rep = stability(m, with_poles=False)
        if rep.stable and not rep.marginal:
            out.append(m)
    return out


def stable_backaction(n, seed=4):
    return stable_models(random_backaction, stability_backaction, n, seed)


def stable_colddamp(n, seed=5):
    return stable_models(random_colddamp, stability_cd, n, seed)


def rel(a, b):
    return abs(a - b) / abs(b)
