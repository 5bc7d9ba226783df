import json
import os
import subprocess
import sys

import numpy as np
import pytest

from levyescape import cli
from levyescape.config import parse_config
from levyescape.io import read_field_csv, read_table, render_heatmap

SMALL = ["--grid", "19"]


def run(*argv):
    return cli.main(list(argv))


def test_params_prints_defaults(capsys):
    assert run("params") == 0
    out = capsys.readouterr().out
    assert "noise.alpha = 1.25" in out and "model.I = 88.0" in out


def test_params_with_overrides(capsys, tmp_path):
    cfgfile = tmp_path / "a.cfg"
    cfgfile.write_text("noise.alpha = 1.5\n")
    assert run("params", "-c", str(cfgfile), "--sigma", "0.25") == 0
    out = capsys.readouterr().out
    assert "noise.alpha = 1.5" in out and "noise.sigma2 = 0.25" in out


def test_config_error_exit_code(tmp_out, capsys):
    assert run("fep", "--alpha", "2.5") == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ConfigError" and "alpha must lie in (0,2]" in err["message"]


def test_mc_zero_paths_writes_nothing(tmp_out):
    assert run("mc", "--paths", "0") == 1
    assert not tmp_out.exists()


def test_fep_outputs(tmp_out):
    assert run("fep", *SMALL) == 0
    d = tmp_out / "fep"
    for name in ("fep.csv", "fep.json", "fep.png", "config.txt"):
        assert (d / name).exists()
    lines = (d / "fep.csv").read_text().splitlines()
    assert lines[0] == "v,w,value" and len(lines) == 19 * 19 + 1
    # row-major in w then v
    first, second = lines[1].split(","), lines[2].split(",")
    assert first[1] == second[1] and float(first[0]) < float(second[0])
    meta = json.loads((d / "fep.json").read_text())
    for key in ("region", "target", "alpha", "sigma1", "sigma2", "grid", "scheme",
                "tolerance", "residual", "wall_time"):
        assert key in meta


def test_archived_config_reproduces(tmp_out, tmp_path):
    assert run("mfet", *SMALL, "--alpha", "1.5", "-o", str(tmp_path / "first")) == 0
    archived = tmp_path / "first" / "config.txt"
    assert run("mfet", "-c", str(archived), "-o", str(tmp_path / "second")) == 0
    a = (tmp_path / "first" / "mfet.csv").read_bytes()
    b = (tmp_path / "second" / "mfet.csv").read_bytes()
    assert a == b
    assert parse_config(str(archived)).noise.alpha == 1.5


def test_metrics_composes_with_sweep(tmp_out, tmp_path, capsys):
    assert run("mfet", *SMALL, "--sigma", "0.25", "--no-plot") == 0
    assert run("metrics", str(tmp_out / "mfet" / "mfet.csv"), "--u-star", "10") == 0
    r_field = json.loads(capsys.readouterr().out.strip().splitlines()[-1])["r_mfet"]
    assert run("sweep", *SMALL, "--alphas", "1.25", "--sigmas", "0.25", "--u-star", "10") == 0
    row = read_table(tmp_out / "sweep" / "sweep.csv")[0]
    assert row["r_mfet"] == pytest.approx(r_field)
    assert row["r_mfet"] > 0


def test_metrics_needs_kind(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("v,w,value\n0,0,1\n1,0,0\n")
    assert run("metrics", str(p)) == 1
    assert run("metrics", str(p), "--kind", "fep", "--p-star", "0.5") == 0


def test_sweep_ratio_matrix(tmp_out):
    assert run("sweep", *SMALL, "--alphas", "0.5,2", "--sigmas", "0.25,0.5", "--mode",
               "fix_sigma1", "--fixed", "0.5") == 0
    d = tmp_out / "sweep"
    assert (d / "heatmap_fep_at_star.csv").exists() and (d / "heatmap_mfet_at_star.csv").exists()
    rows = read_table(d / "sweep.csv")
    assert [r["alpha"] for r in rows] == [0.5, 0.5, 2.0, 2.0]


def test_sweep_failure_exit_code(tmp_out):
    code = run("sweep", *SMALL, "--alphas", "1.0", "--sigmas", "0.5", "-s", "target.a_p=0.5")
    assert code == 2
    assert read_table(tmp_out / "sweep" / "sweep.csv")[0]["status"].startswith("GeometryError")
    assert (tmp_out / "sweep" / "error.json").exists()


def test_numerical_failure_exit_code(tmp_out):
    code = run("fep", "--grid", "139", "--alpha", "2", "--sigma", "0.15", "-s",
               "solver.drift_scheme=central", "--no-plot")
    assert code == 2
    rec = json.loads((tmp_out / "fep" / "error.json").read_text())
    assert rec["error"] == "NonFiniteSolution" and rec["exit_code"] == 2


def test_io_failure_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run("fep", *SMALL, "-o", str(blocker / "sub")) == 3


def test_mc_outputs(tmp_out):
    assert run("mc", "--paths", "200", "--alpha", "1.0", "--sigma", "1.0", "--dump") == 0
    rec = json.loads((tmp_out / "mc" / "estimates.json").read_text())
    assert 0 <= rec["fep"]["mean"] <= 1 and rec["mfet"]["mean"] > 0
    assert (tmp_out / "mc" / "outcomes.csv").exists()


def test_mc_horizon_failure(tmp_out):
    assert run("mc", "--paths", "200", "--sigma", "0.25", "-s", "mc.t_max=0.5") == 2
    rec = json.loads((tmp_out / "mc" / "estimates.json").read_text())
    assert "error" in rec["mfet"]


def test_reproduce_fig7_eight_fields(tmp_out):
    assert run("reproduce", "fig7", *SMALL) == 0
    d = tmp_out / "fig7"
    csvs = sorted(p.name for p in d.glob("fig7?.csv"))
    assert csvs == [f"fig7{c}.csv" for c in "abcdefgh"]
    summary = json.loads((d / "fig7.json").read_text())
    panels = [(p["alpha"], p["sigma"]) for p in summary["panels"]]
    assert panels == [(0.5, 0.75), (1.0, 0.75), (1.5, 0.75), (2.0, 0.75),
                      (1.25, 0.25), (1.25, 0.5), (1.25, 0.75), (1.25, 1.0)]
    # one color scale shared by all panels
    assert summary["color_scale"][1] == max(p["max"] for p in summary["panels"])
    assert len(list(d.glob("fig7?.png"))) == 8
    meta = json.loads((d / "fig7a.json").read_text())
    assert "artifact default" in meta


@pytest.mark.parametrize("fig,files", [
    ("fig3", [f"fig3{c}.csv" for c in "abcdefgh"]),
    ("fig4", ["fig4a.csv", "fig4b.csv"]),
    ("fig5", ["fig5a.csv", "fig5b.csv"]),
    ("fig6", [f"fig6{c}_matrix.csv" for c in "abcd"]),
    ("fig8", ["fig8a.csv", "fig8b.csv"]),
    ("fig9", ["fig9a.csv", "fig9b.csv"]),
    ("fig10", [f"fig10{c}_matrix.csv" for c in "abcd"]),
])
def test_reproduce_presets_complete(tmp_out, fig, files):
    assert run("reproduce", fig, "--grid", "9", "--quick", "--no-plot") == 0
    d = tmp_out / fig
    for f in files:
        assert (d / f).exists(), f
    assert "artifact default" in json.loads((d / f"{fig}.json").read_text()) or fig in ("fig3",)
    assert (d / "config.txt").exists()


def test_curve_panels_keep_brownian_series(tmp_out):
    assert run("reproduce", "fig4", "--grid", "9", "--quick", "--no-plot") == 0
    rows = read_table(tmp_out / "fig4" / "fig4a.csv")
    assert {r["alpha"] for r in rows} == {0.5, 1.5, 2.0}
    assert {r["sigma1"] for r in rows} == {0.25, 0.5, 0.75, 1.0}


def test_render_is_pure_function_of_csv(tmp_out, tmp_path, monkeypatch):
    assert run("fep", *SMALL, "--no-plot") == 0
    csv = tmp_out / "fep" / "fep.csv"
    import levyescape.solver as solver

    def boom(*a, **k):
        raise AssertionError("recomputed")

    monkeypatch.setattr(solver, "solve_fep", boom)
    monkeypatch.setattr(cli, "solve_fep", boom)
    render_heatmap(csv, tmp_path / "a.png", 0, 1)
    render_heatmap(csv, tmp_path / "b.png", 0, 1)
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
    v, w, Z = read_field_csv(csv)
    assert Z.shape == (19, 19) and np.all((Z >= 0) & (Z <= 1))


def test_console_script(tmp_path):
    env = dict(os.environ, LEVYESCAPE_OUTPUT=str(tmp_path))
    out = subprocess.run([sys.executable, "-m", "levyescape.cli", "params"], env=env,
                         capture_output=True, text=True)
    assert out.returncode == 0 and "solver.n_v = 209" in out.stdout


def test_bad_flag_is_config_error():
    with pytest.raises(SystemExit) as exc:
        run("fep", "--grid", "abc")
    assert exc.value.code == 1
