"""Command-line interface.

Configuration files hold one ``key = value`` per line; ``#`` starts a
comment.  Frequencies are given in Hz (or relative to omega_m) and converted
to angular units on input.  Every command writes CSV with a header line.

Exit codes: 0 success, 1 invalid input, 2 unstable model, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import warnings
from dataclasses import dataclass
from typing import Dict, Optional

from . import backaction, colddamp, sweep
from .constants import hz_to_rad
from .errors import InvalidParameterError, NumericalFailure, OptocoolError, RegimeWarning, UnstableModelError
from .params import PhysicalConfig, ThermalModel, derive_params
from .presets import FIGURES, fig4_config, figure_spec
from .reports import Method

EXIT_OK, EXIT_INVALID, EXIT_UNSTABLE, EXIT_NUMERICAL = 0, 1, 2, 3

KEYS = (
    "nu_m_hz",
    "gamma_m_hz",
    "mass_kg",
    "length_m",
    "power_w",
    "wavelength_m",
    "temperature_k",
    "kappa_over_omega_m",
    "delta_over_omega_m",
    "eta",
    "g_cd",
    "omega_fb_over_omega_m",
    "thermal_model",
)
_COMMON_REQUIRED = KEYS[:8]
_SCHEME_REQUIRED = {
    "backaction": ("delta_over_omega_m",),
    "colddamp": ("g_cd", "omega_fb_over_omega_m"),
}
_METHODS = {
    "closed": Method.CLOSED_FORM,
    "quadrature": Method.QUADRATURE,
    "residue": Method.RESIDUE,
    "lyapunov": Method.LYAPUNOV,
}


class ConfigError(InvalidParameterError):
    pass


@dataclass(frozen=True)
class RunConfig:
    values: Dict[str, str]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def number(self, key, default=None):
        raw = self.values.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"key {key!r}: not a number: {raw!r}") from None

    def require(self, scheme):
        missing = [k for k in _COMMON_REQUIRED + _SCHEME_REQUIRED[scheme] if k not in self.values]
        if missing:
            raise ConfigError(f"missing required key(s) for {scheme}: {', '.join(missing)}")

    def physical(self, scheme) -> PhysicalConfig:
        self.require(scheme)
        wm = hz_to_rad(self.number("nu_m_hz"))
        g_cd = self.number("g_cd", 0.0)
        wfb = self.values.get("omega_fb_over_omega_m")
        thermal = self.values.get("thermal_model", "flat")
        if thermal not in {m.value for m in ThermalModel}:
            raise ConfigError(f"key 'thermal_model': expected flat or coth, got {thermal!r}")
        return PhysicalConfig(
            mech_freq=wm,
            mech_damping=hz_to_rad(self.number("gamma_m_hz")),
            mass=self.number("mass_kg"),
            cavity_length=self.number("length_m"),
            laser_power=self.number("power_w"),
            laser_wavelength=self.number("wavelength_m"),
            cavity_decay=self.number("kappa_over_omega_m") * wm,
            detuning=self.number("delta_over_omega_m", 0.0) * wm,
            bath_temperature=self.number("temperature_k"),
            detection_efficiency=self.number("eta", 1.0),
            feedback_gain=g_cd,
            feedback_bandwidth=None if wfb is None else self.number("omega_fb_over_omega_m") * wm,
            thermal_model=thermal,
        )


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: key {key!r} has no value")
        values[key] = value
    return RunConfig(values)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, str):
        return x
    return f"{float(x):.8e}"


def _write(out, header, rows):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])


def parse_axis(text) -> sweep.Axis:
    """``param:min:max:count[:linear|log]``."""
    parts = text.split(":")
    if len(parts) not in (4, 5):
        raise ConfigError(f"axis spec {text!r}: expected param:min:max:count[:scale]")
    try:
        lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError:
        raise ConfigError(f"axis spec {text!r}: bad number") from None
    scale = parts[4] if len(parts) == 5 else "linear"
    if scale not in ("linear", "log"):
        raise ConfigError(f"axis spec {text!r}: scale must be linear or log")
    return sweep.Axis(parts[0], lo, hi, count, scale)


# ---------------------------------------------------------------------------
# commands


def _model(cfg, scheme):
    if scheme == "backaction":
        return backaction.BackactionModel.from_config(cfg)
    return colddamp.ColdDampModel.from_config(cfg)


def cmd_derive(args, out):
    cfg = load_config(args.config).physical(args.scheme)
    d = derive_params(cfg, detuning=0.0 if args.scheme == "colddamp" else None)
    wm = cfg.mech_freq
    header = ["E", "G0", "alpha_s", "q_s", "Delta", "G", "G_over_omega_m", "nbar", "zeta", "g2", "T_bath_k"]
    row = [
        d.drive_amp, d.bare_coupling, d.intracavity_amp, d.static_displacement, d.detuning,
        d.effective_coupling, d.effective_coupling / wm, d.thermal_occupancy, d.scaled_power,
        d.scaled_gain, cfg.bath_temperature,
    ]
    _write(out, header, [row])
    return EXIT_OK


def cmd_cool(args, out):
    cfg = load_config(args.config).physical(args.scheme)
    model = _model(cfg, args.scheme)
    wm = cfg.mech_freq
    if args.scheme == "backaction":
        report = backaction.stability_backaction(model, with_poles=False)
        res = backaction.variances(model, _METHODS[args.method], omega_cutoff=args.cutoff)
        gamma_eff = model.gamma_m + backaction.optical_damping(wm, model)
        Gamma = backaction.scattering_rates(model).gamma_cool
    else:
        report = colddamp.stability_cd(model, with_poles=False)
        res = colddamp.variances_cd(model, _METHODS[args.method], omega_cutoff=args.cutoff)
        gamma_eff = colddamp.effective_oscillator_cd(wm, model)[1]
        Gamma = gamma_eff - model.gamma_m
    header = ["var_q", "var_p", "n_eff", "T_eff_k", "gamma_eff_res", "Gamma", "stable", "margin"]
    _write(out, header, [[res.var_q, res.var_p, res.n_eff, res.T_eff, gamma_eff, Gamma, report.stable, report.margin]])
    return EXIT_OK


def cmd_stability(args, out):
    cfg = load_config(args.config).physical(args.scheme)
    model = _model(cfg, args.scheme)
    if args.scheme == "backaction":
        report = backaction.stability_backaction(model)
    else:
        report = colddamp.stability_cd(model)
    rows = [[name, value] for name, value in report.s_values.items()]
    rows += [
        ["stable", report.stable],
        ["margin", report.margin],
        ["poles_stable", report.poles_stable],
        ["pole_margin", report.pole_margin],
    ]
    if args.scheme == "colddamp":
        rows.append(["g2", model.g2])
        rows.append(["g2_max", colddamp.max_gain(model).g2_max])
    for i, z in enumerate(sorted(report.poles, key=lambda z: (z.real, z.imag))):
        rows.append([f"pole{i}_re", z.real])
        rows.append([f"pole{i}_im", z.imag])
    _write(out, ["quantity", "value"], rows)
    return EXIT_OK


def _spec_from_args(args):
    cfg = load_config(args.config).physical(args.scheme)
    axis2 = parse_axis(args.axis2) if args.axis2 else None
    return sweep.SweepSpec(cfg, args.scheme, parse_axis(args.axis1), axis2, power_ref=args.power_ref)


def _emit_table(table, path, out):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            table.to_csv(fh)
    else:
        table.to_csv(out)


def _check_table(table):
    if table.cells and all(c.status is sweep.CellStatus.FAILED for c in table.cells):
        raise NumericalFailure("every sweep cell failed numerically")


def cmd_sweep(args, out):
    table = sweep.run_sweep(_spec_from_args(args))
    _check_table(table)
    _emit_table(table, args.out, out)
    return EXIT_OK


def cmd_figure(args, out):
    table = sweep.run_sweep(figure_spec(args.name))
    _check_table(table)
    _emit_table(table, args.out, out)
    return EXIT_OK


def cmd_optimize(args, out):
    spec = _spec_from_args(args)
    rep = sweep.minimize_neff(spec, restarts=args.restarts, seed=args.seed)
    names = [ax.param for ax in spec.axes]
    header = names + ["n_eff", "T_eff_k", "margin", "n_evaluations", "grid_best"]
    _write(out, header, [[rep.argmin[n] for n in names] + [rep.n_eff, rep.T_eff, rep.margin, str(rep.n_evaluations), rep.grid_best]])
    return EXIT_OK


def cmd_compare(args, out):
    base = load_config(args.config).physical("colddamp") if args.config else fig4_config()
    kappas = [float(k) for k in args.kappa.split(",")]
    rows = sweep.scheme_comparison(base, kappas)
    table = []
    for r in rows:
        nb = r.backaction.n_eff if r.backaction else math.inf
        nc = r.colddamp.n_eff if r.colddamp else math.inf
        table.append([r.kappa, nb, nc, r.winner])
    _write(out, ["kappa_over_omega_m", "n_eff_backaction", "n_eff_colddamp", "winner"], table)
    k = sweep.crossover(rows)
    print("crossover: " + ("none in grid" if k is None else f"cold damping wins from kappa/omega_m = {k:g}"), file=sys.stderr)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="optocool", description="Steady-state cooling of a cavity-coupled micromechanical oscillator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scheme(sp):
        sp.add_argument("--scheme", choices=("backaction", "colddamp"), default="backaction")

    sp = sub.add_parser("derive", help="derived model parameters")
    sp.add_argument("config")
    scheme(sp)
    sp.set_defaults(func=cmd_derive)

    sp = sub.add_parser("cool", help="steady-state variances at one point")
    sp.add_argument("config")
    scheme(sp)
    sp.add_argument("--method", choices=tuple(_METHODS), default="closed")
    sp.add_argument("--cutoff", type=float, default=None, help="quadrature cutoff in rad/s (coth bath)")
    sp.set_defaults(func=cmd_cool)

    sp = sub.add_parser("stability", help="Routh-Hurwitz quantities and poles")
    sp.add_argument("config")
    scheme(sp)
    sp.set_defaults(func=cmd_stability)

    for name, func, helptext in (("sweep", cmd_sweep, "grid sweep to CSV"), ("optimize", cmd_optimize, "minimize n_eff")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config")
        scheme(sp)
        sp.add_argument("--axis1", required=True, help="param:min:max:count[:linear|log]")
        sp.add_argument("--axis2", default=None)
        sp.add_argument("--power-ref", type=float, default=None, help="reference power in W for the power axis")
        if name == "sweep":
            sp.add_argument("--out", default=None)
        else:
            sp.add_argument("--restarts", type=int, default=3)
            sp.add_argument("--seed", type=int, default=0)
        sp.set_defaults(func=func)

    sp = sub.add_parser("figure", help="preset grids of the cooling phase diagrams")
    sp.add_argument("name", choices=FIGURES)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_figure)

    sp = sub.add_parser("compare", help="best n_eff of both schemes versus kappa")
    sp.add_argument("config", nargs="?", default=None)
    sp.add_argument("--kappa", default="0.2,0.5,1,2,3", help="comma-separated kappa/omega_m values")
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default", RegimeWarning)
            return args.func(args, out)
    except UnstableModelError as exc:
        print(f"optocool: unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except NumericalFailure as exc:
        print(f"optocool: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidParameterError, ValueError) as exc:
        print(f"optocool: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OptocoolError as exc:
        print(f"optocool: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
