import numpy as np
import pytest

from kkdamp.cli import main

SMALL = """\
name = {name}
phi = power:1
a = 0.5
b = 0.2
x_lo = 0.0
x_hi = 6.283185307179586
n_cells = 64
boundary = periodic
t_end = 0.4
n_outputs = 9
init = sine_radial
init.mean = 0.5
init.amplitude = 0.2
check.decay = on
check.invariants = on
snapshots = final
"""


def write_scenario(tmp_path, name="cli_demo", text=None):
    path = tmp_path / f"{name}.cfg"
    path.write_text(text if text is not None else SMALL.format(name=name))
    return path


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["definitely-not-a-command"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["entropy-pair"])  # missing required options
    assert exc.value.code == 2


def test_run_single_scenario(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("KKD_OUTPUT_DIR", raising=False)
    path = write_scenario(tmp_path)
    code = main(["run", str(path), "--output-dir", str(tmp_path / "out")])
    assert code == 0
    out = capsys.readouterr().out
    assert "cli_demo: pass" in out
    assert (tmp_path / "out" / "cli_demo" / "cli_demo_manifest.txt").exists()


def test_run_respects_env_root(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("KKD_OUTPUT_DIR", str(tmp_path / "env_root"))
    path = write_scenario(tmp_path)
    code = main(["run", str(path), "--output-dir", str(tmp_path / "flag_root")])
    assert code == 0
    assert (tmp_path / "env_root" / "cli_demo").exists()
    assert not (tmp_path / "flag_root" / "cli_demo").exists()


def test_run_parallel_jobs(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("KKD_OUTPUT_DIR", raising=False)
    p1 = write_scenario(tmp_path, "job_one", SMALL.format(name="job_one"))
    p2 = write_scenario(tmp_path, "job_two", SMALL.format(name="job_two"))
    code = main(
        ["run", str(p1), str(p2), "--jobs", "2", "--output-dir", str(tmp_path / "out")]
    )
    assert code == 0
    assert (tmp_path / "out" / "job_one").exists()
    assert (tmp_path / "out" / "job_two").exists()


def test_run_reports_failing_check(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("KKD_OUTPUT_DIR", raising=False)
    # claim a decay rate the data cannot deliver by damping far slower
    text = SMALL.format(name="failing") + "check.containment = on\ncheck.containment.c0 = 0.01\n"
    path = write_scenario(tmp_path, "failing", text)
    code = main(["run", str(path), "--output-dir", str(tmp_path / "out")])
    assert code == 1
    assert "FAIL" in capsys.readouterr().out


def test_simulate_skips_checks(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("KKD_OUTPUT_DIR", raising=False)
    text = SMALL.format(name="simonly") + "check.containment = on\ncheck.containment.c0 = 0.01\n"
    path = write_scenario(tmp_path, "simonly", text)
    code = main(["simulate", str(path), "--output-dir", str(tmp_path / "out")])
    assert code == 0  # the impossible check is not evaluated


def test_parse_error_exits_1(tmp_path, capsys):
    path = tmp_path / "broken.cfg"
    path.write_text("name = broken\nmystery_key = 3\n")
    code = main(["run", str(path)])
    assert code == 1
    assert "unknown key" in capsys.readouterr().err


def test_decay_subcommand(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("KKD_OUTPUT_DIR", raising=False)
    path = write_scenario(tmp_path)
    code = main(
        ["decay", str(path), "--p", "2", "--output-dir", str(tmp_path / "out")]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "fitted_rate" in out and "passed = True" in out


def test_eigen_subcommand(capsys):
    code = main(["eigen", "--phi", "power:1", "--state", "3,4"])
    assert code == 0
    out = capsys.readouterr().out
    assert "lambda_1 = 5.00000000000000000e+00" in out
    assert "lambda_2 = 1.00000000000000000e+01" in out
    assert "genuinely_nonlinear" in out and "linearly_degenerate" in out


def test_eigen_bad_state_exits_2(capsys):
    assert main(["eigen", "--phi", "power:1", "--state", "3;4"]) == 2


def test_entropy_pair_subcommand(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("KKD_OUTPUT_DIR", raising=False)
    out_file = tmp_path / "pair.tsv"
    code = main(
        ["entropy-pair", "--m", "2", "--phi", "power:1", "--r-max", "2", "--n", "201",
         "--out", str(out_file)]
    )
    assert code == 0
    data = np.loadtxt(out_file, comments="#")
    assert data.shape == (201, 2)
    # row 100 is r = 1 exactly: q = 4/3 for eta = r^2, phi = r
    assert data[100, 0] == pytest.approx(1.0, abs=1e-15)
    assert data[100, 1] == pytest.approx(4.0 / 3.0, abs=1e-9)


def test_entropy_pair_default_output_under_root(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("KKD_OUTPUT_DIR", str(tmp_path / "root"))
    code = main(["entropy-pair", "--m", "1.5", "--phi", "shifted:1,1"])
    assert code == 0
    assert (tmp_path / "root" / "entropy_pair_m1.5_shifted_1_1.tsv").exists()


def test_region_check_flags_lower_edge(capsys):
    code = main(["region-check", "--phi", "power:1", "--a", "0.6", "--b", "0.2"])
    assert code == 1  # default region has C1 = 0.5 > 0: outward
    out = capsys.readouterr().out
    assert "Z=C1: OUTWARD" in out
    assert "lower edge" in out

    code = main(
        ["region-check", "--phi", "power:1", "--a", "0.6", "--b", "0.2", "--skip-lower"]
    )
    assert code == 0

    code = main(
        ["region-check", "--phi", "power:1", "--a", "0.6", "--b", "0.2", "--c1", "0"]
    )
    assert code == 0
    assert "Z=C1: inward" in capsys.readouterr().out


def test_region_check_equal_damping_errors(capsys):
    code = main(["region-check", "--phi", "power:1", "--a", "0.3", "--b", "0.3"])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_convergence_subcommand(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("KKD_OUTPUT_DIR", raising=False)
    text = """\
name = sweep_demo
phi = power:1
a = 0.3
b = 0.1
x_lo = -2.0
x_hi = 4.0
n_cells = 128
boundary = outflow
t_end = 0.2
init = riemann_step
init.u_left = 0.7
init.v_left = 0.7
init.u_right = 0.28
init.v_right = 0.28
init.x_jump = 0.0
"""
    path = write_scenario(tmp_path, "sweep_demo", text)
    code = main(
        ["convergence", str(path), "--epsilons", "0.06,0.03,0.015",
         "--output-dir", str(tmp_path / "out")]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "strictly_decreasing = True" in out
    sweep = tmp_path / "out" / "sweep_demo" / "sweep_demo_viscosity_sweep.tsv"
    assert sweep.exists()


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "kkdamp" in capsys.readouterr().out


def test_shipped_scenarios_parse():
    from pathlib import Path

    from kkdamp.scenario import parse_scenario

    here = Path(__file__).resolve().parent.parent / "scenarios"
    cfgs = sorted(here.glob("*.cfg"))
    assert len(cfgs) >= 6
    for cfg in cfgs:
        sc = parse_scenario(cfg)
        sc.phi_model()
        sc.damping()
        sc.grid()
        sc.solver_config()
