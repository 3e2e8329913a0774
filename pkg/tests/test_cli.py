import csv
import io
import subprocess
import sys
from pathlib import Path

import pytest

from optocool import cli, oracles
from optocool.errors import NumericalFailure
from optocool.presets import figure_spec
from optocool.sweep import run_sweep

ROOT = Path(__file__).resolve().parents[1]
FIG2 = (ROOT / "configs" / "fig2.cfg").read_text()
FIG4 = (ROOT / "configs" / "fig4.cfg").read_text()


def run(*argv):
    out = io.StringIO()
    code = cli.main(list(argv), out=out)
    return code, out.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def cfg(tmp_path):
    def make(text, name="run.cfg"):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return str(p)

    return make


def test_parse_config_comments_and_errors():
    rc = cli.parse_config("# header\nnu_m_hz = 1e7  # trailing\n\n")
    assert rc.values == {"nu_m_hz": "1e7"}
    with pytest.raises(cli.ConfigError, match="bogus"):
        cli.parse_config("bogus = 1")
    with pytest.raises(cli.ConfigError, match="duplicate"):
        cli.parse_config("eta = 1\neta = 0.5")
    with pytest.raises(cli.ConfigError, match="expected"):
        cli.parse_config("eta 1")


def test_derive_fig2(cfg):
    code, out = run("derive", cfg(FIG2))
    assert code == 0
    (r,) = rows(out)
    assert float(r["nbar"]) == pytest.approx(1250, rel=0.01)
    assert float(r["G_over_omega_m"]) == pytest.approx(0.2644, rel=1e-3)


def test_derive_zero_power(cfg):
    code, out = run("derive", cfg(FIG2.replace("power_w = 0.05", "power_w = 0")))
    assert code == 0 and float(rows(out)[0]["G"]) == 0.0


def test_malformed_key(cfg, capsys):
    code, _ = run("derive", cfg(FIG2 + "\nmass_ng = 250\n"))
    assert code == 1
    assert "mass_ng" in capsys.readouterr().err


def test_missing_key_named(cfg, capsys):
    code, _ = run("cool", cfg(FIG2.replace("length_m = 0.5e-3", "")))
    assert code == 1 and "length_m" in capsys.readouterr().err
    code, _ = run("cool", cfg(FIG2), "--scheme", "colddamp")
    assert code == 1 and "g_cd" in capsys.readouterr().err


def test_bad_value(cfg, capsys):
    code, _ = run("cool", cfg(FIG2.replace("0.6", "cold")))
    assert code == 1 and "temperature_k" in capsys.readouterr().err
    code, _ = run("cool", cfg(FIG2 + "eta = 2\n"))
    assert code == 1


def test_usage_error_exit_code():
    assert run("cool")[0] == 1
    assert run("nonsense")[0] == 1


def test_cool_fig2_methods(cfg):
    path = cfg(FIG2)
    code, out = run("cool", path)
    assert code == 0
    closed = rows(out)[0]
    assert list(closed) == ["var_q", "var_p", "n_eff", "T_eff_k", "gamma_eff_res", "Gamma", "stable", "margin"]
    assert float(closed["n_eff"]) == pytest.approx(0.1, abs=0.05)
    assert closed["stable"] == "1"
    for method in ("quadrature", "residue", "lyapunov"):
        code, out = run("cool", path, "--method", method)
        r = rows(out)[0]
        assert code == 0
        assert float(r["var_q"]) == pytest.approx(float(closed["var_q"]), rel=1e-6)


def test_cool_uncoupled(cfg):
    code, out = run("cool", cfg(FIG2.replace("power_w = 0.05", "power_w = 0")))
    r = rows(out)[0]
    assert float(r["var_q"]) == pytest.approx(1249.697 + 0.5, rel=1e-5)
    assert r["var_q"] == r["var_p"]


def test_cool_colddamp(cfg):
    code, out = run("cool", cfg(FIG4), "--scheme", "colddamp")
    assert code == 0 and 0.05 < float(rows(out)[0]["n_eff"]) < 1.0


def test_unstable_exit_code(cfg, capsys):
    code, _ = run("cool", cfg(FIG2.replace("power_w = 0.05", "power_w = 5")))
    assert code == 2 and "unstable" in capsys.readouterr().err


def test_numerical_failure_exit_code(cfg, monkeypatch):
    def boom(*a, **k):
        raise NumericalFailure("did not converge", estimate=1.0, error_bound=1.0)

    monkeypatch.setattr(oracles, "integrate_moments", boom)
    assert run("cool", cfg(FIG2), "--method", "quadrature")[0] == 3


def test_stability_report(cfg):
    code, out = run("stability", cfg(FIG4), "--scheme", "colddamp")
    assert code == 0
    q = {r["quantity"]: r["value"] for r in rows(out)}
    assert q["stable"] == "1" and q["poles_stable"] == "1"
    assert float(q["g2"]) < float(q["g2_max"])
    assert sum(k.startswith("pole") and k.endswith("_im") for k in q) == 4


def test_stability_report_unstable_exits_zero(cfg):
    code, out = run("stability", cfg(FIG2.replace("power_w = 0.05", "power_w = 5")))
    assert code == 0
    q = {r["quantity"]: r["value"] for r in rows(out)}
    assert q["stable"] == "0" and q["poles_stable"] == "0"


def test_sweep_single_cell_matches_cool(cfg):
    path = cfg(FIG2)
    _, cool = run("cool", path)
    _, sw = run("sweep", path, "--axis1", "delta:1:1:1", "--axis2", "kappa:0.2:0.2:1")
    a, b = rows(cool)[0], rows(sw)[0]
    for key in ("var_q", "var_p", "n_eff", "T_eff_k", "gamma_eff_res", "Gamma", "stable", "margin"):
        assert a[key] == b[key]


def test_sweep_to_file_and_bad_axis(cfg, tmp_path):
    out = tmp_path / "s.csv"
    code, _ = run("sweep", cfg(FIG2), "--axis1", "kappa:0.05:1:5:log", "--out", str(out))
    assert code == 0 and len(out.read_text().splitlines()) == 6
    assert run("sweep", cfg(FIG2), "--axis1", "kappa:0.05")[0] == 1
    assert run("sweep", cfg(FIG2), "--axis1", "g_cd:0:1:3")[0] == 1


def test_optimize(cfg):
    code, out = run("optimize", cfg(FIG2), "--axis1", "delta:0.5:1.5:10", "--axis2", "kappa:0.05:1:10")
    r = rows(out)[0]
    assert code == 0 and 0.07 <= float(r["n_eff"]) <= 0.15
    assert float(r["n_eff"]) <= float(r["grid_best"])


def test_figure_fig2a(tmp_path):
    out = tmp_path / "fig2a.csv"
    assert run("figure", "fig2a", "--out", str(out))[0] == 0
    data = rows(out.read_text())
    assert len(data) == 10000
    best = min(float(r["n_eff"]) for r in data if r["stable"] == "1")
    assert 0.07 <= best <= 0.15


def test_figure_fig4a_matches_sweep():
    code, out = run("figure", "fig4a")
    assert code == 0
    best = min(float(r["n_eff"]) for r in rows(out) if r["stable"] == "1")
    assert best == pytest.approx(run_sweep(figure_spec("fig4a")).best().n_eff, rel=1e-8)


def test_figure_marks_unstable_cells():
    code, out = run("figure", "fig4b")
    assert code == 0
    statuses = {r["status"] for r in rows(out)}
    assert "ok" in statuses


def test_byte_identical_output(cfg):
    path = cfg(FIG2)
    args = ("sweep", path, "--axis1", "delta:0.5:1.5:7", "--axis2", "kappa:0.05:1:3")
    assert run(*args) == run(*args)


def test_compare(capsys):
    code, out = run("compare", "--kappa", "0.2,3")
    assert code == 0
    r = rows(out)
    assert [x["winner"] for x in r] == ["backaction", "colddamp"]
    assert "crossover" in capsys.readouterr().err


def test_module_entry_point(cfg):
    proc = subprocess.run(
        [sys.executable, "-m", "optocool", "derive", cfg(FIG2)], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0 and proc.stdout.startswith("E,G0,")
