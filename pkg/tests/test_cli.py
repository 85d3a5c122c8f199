"""Command-line interface: reports, exit codes, determinism."""

import json
import logging
import subprocess
import sys

import numpy as np
import pytest

import ostromech as om
from ostromech import cli

from conftest import SYSTEM_DOCS, write_spec


def run_cli(capsys, argv):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, argv, expect=0):
    code, out, err = run_cli(capsys, argv)
    assert code == expect, f"exit {code}, stderr: {err}"
    return json.loads(out)


# -- derive -----------------------------------------------------------------


def test_derive_report_expressions_reparse(tmp_path, capsys, pu):
    spec = write_spec(tmp_path, "pais_uhlenbeck")
    report = run_json(capsys, ["derive", spec])
    assert report["system"] == "pais-uhlenbeck"
    assert report["order"] == 2 and report["dofs"] == 1
    assert report["singular_warning"] is False

    ctx = om.SystemContext.for_reports(2, 1)

    def matches(text, expr):
        assert om.equivalent_numeric(om.parse(text, ctx), expr,
                                     tol=1e-10).equivalent

    matches(report["lagrangian"], pu.model.lagrangian)
    for per_dof, exprs in zip(report["momenta"], pu.momenta):
        for text, expr in zip(per_dof, exprs):
            matches(text, expr)
    matches(report["euler_lagrange"][0], pu.el[0])
    matches(report["hessian"][0][0], pu.hessian[0][0])
    matches(report["hamiltonian"], pu.hamiltonian)
    assert report["hessian_det"] == "1"
    assert report["regularity"]["regular"] is True


def test_derive_is_deterministic(tmp_path, capsys):
    spec = write_spec(tmp_path, "coupled_beam")
    first = run_cli(capsys, ["derive", spec, "--pretty"])
    second = run_cli(capsys, ["derive", spec, "--pretty"])
    assert first == second


def test_derive_degenerate_warns_but_succeeds(tmp_path, capsys):
    spec = write_spec(tmp_path, "degenerate")
    report = run_json(capsys, ["derive", spec])
    assert report["singular_warning"] is True
    assert report["regularity"]["regular"] is False
    assert report["regularity"]["rank_at_worst_point"] == 0


def test_derive_out_file(tmp_path, capsys):
    spec = write_spec(tmp_path, "harmonic")
    out = tmp_path / "report.json"
    code, stdout, _ = run_cli(capsys, ["derive", spec, "--out", str(out)])
    assert code == 0
    assert stdout == ""
    assert json.loads(out.read_text())["system"] == "harmonic"


def test_derive_bad_inputs(tmp_path, capsys):
    code, _, err = run_cli(capsys, ["derive", str(tmp_path / "absent.json")])
    assert code == 2 and "cannot read" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run_cli(capsys, ["derive", str(bad)])
    assert code == 2 and "not valid JSON" in err
    nonsense = tmp_path / "list.json"
    nonsense.write_text("[1, 2]")
    code, _, _ = run_cli(capsys, ["derive", str(nonsense)])
    assert code == 2


# -- simulate ---------------------------------------------------------------


def test_simulate_free_particle_prints_exact_state(tmp_path, capsys):
    spec = write_spec(tmp_path, "free_particle")
    code, out, _ = run_cli(capsys, [
        "simulate", spec, "--init", "0,1", "--t-end", "1",
        "--method", "rk4", "--step", "0.125"])
    assert code == 0
    assert '"final_state": [1.0, 1.0]' in out
    report = json.loads(out)
    assert report["method"] == "rk4"
    assert report["verification"]["holonomy_ok"] is True


def test_simulate_writes_csv_and_verify_accepts(tmp_path, capsys):
    spec = write_spec(tmp_path, "pais_uhlenbeck")
    csv = tmp_path / "traj.csv"
    report = run_json(capsys, [
        "simulate", spec, "--init", "1,0,-1,0", "--t-end", "10",
        "--out", str(csv)])
    assert report["trajectory_file"] == str(csv)
    assert csv.read_text().splitlines()[0] == "t,q_0_1,q_1_1,q_2_1,q_3_1"

    verdict = run_json(capsys, ["verify", spec, "--traj", str(csv)])
    assert verdict["passed"] is True
    assert verdict["failed_checks"] == []
    assert verdict["report"]["el_residual"] < 1e-3


def test_simulate_unified_summary(tmp_path, capsys):
    spec = write_spec(tmp_path, "pais_uhlenbeck")
    report = run_json(capsys, [
        "simulate", spec, "--unified", "--init", "1,0,-1,0,0,-1",
        "--t-end", "5"])
    assert report["layout"] == "unified"
    assert report["max_constraint_residual"] < 1e-7
    assert report["constraint_drift_warning"] is False
    assert report["verification"]["hamilton_q_residual"] is not None


def test_simulate_unified_rejects_off_constraint(tmp_path, capsys):
    spec = write_spec(tmp_path, "pais_uhlenbeck")
    code, _, err = run_cli(capsys, [
        "simulate", spec, "--unified", "--init", "1,0,-1,0,0.5,-1",
        "--t-end", "1"])
    assert code == 2
    assert "constraint" in err


def test_simulate_degenerate_exits_singular(tmp_path, capsys):
    spec = write_spec(tmp_path, "degenerate")
    code, _, err = run_cli(capsys, [
        "simulate", spec, "--init", "1,0,0,0", "--t-end", "1"])
    assert code == 3
    assert "last good time t=0.0" in err


def test_simulate_blow_up_exits_singular(tmp_path, capsys):
    doc = {"name": "crossing", "order": 1, "dofs": 1,
           "lagrangian": "1/2*q0*q1^2"}
    spec = tmp_path / "crossing.json"
    spec.write_text(json.dumps(doc))
    code, _, err = run_cli(capsys, [
        "simulate", str(spec), "--init", "1,-0.6666666666666666",
        "--t-end", "2"])
    assert code == 3
    assert "underflow" in err


def test_simulate_usage_errors(tmp_path, capsys):
    spec = write_spec(tmp_path, "harmonic")
    code, _, _ = run_cli(capsys, [
        "simulate", spec, "--init", "1,0,0", "--t-end", "1"])
    assert code == 2  # wrong state width
    code, _, _ = run_cli(capsys, [
        "simulate", spec, "--init", "1,zap", "--t-end", "1"])
    assert code == 2
    code, _, _ = run_cli(capsys, [
        "simulate", spec, "--init", "1,0", "--t-end", "1",
        "--method", "rk4"])
    assert code == 2  # rk4 without --step


# -- verify -----------------------------------------------------------------


def test_verify_flags_corruption(tmp_path, capsys):
    spec = write_spec(tmp_path, "pais_uhlenbeck")
    csv = tmp_path / "traj.csv"
    run_json(capsys, ["simulate", spec, "--init", "1,0,-1,0",
                      "--t-end", "10", "--out", str(csv)])
    lines = csv.read_text().splitlines()
    header, rows = lines[0], [line.split(",") for line in lines[1:]]
    for row in rows:
        row[2] = f"{float(row[2]) * 1.01:.17g}"
    corrupted = tmp_path / "corrupted.csv"
    corrupted.write_text(header + "\n"
                         + "\n".join(",".join(row) for row in rows) + "\n")
    code, out, _ = run_cli(capsys, ["verify", spec, "--traj", str(corrupted)])
    assert code == 1
    verdict = json.loads(out)
    assert "el_residual" in verdict["failed_checks"]


def test_verify_malformed_csv(tmp_path, capsys):
    spec = write_spec(tmp_path, "pais_uhlenbeck")
    broken = tmp_path / "broken.csv"
    broken.write_text("t,q_0_1\n0,1\n")
    code, _, err = run_cli(capsys, ["verify", spec, "--traj", str(broken)])
    assert code == 2
    assert "broken.csv" in err


# -- action-check -----------------------------------------------------------


def test_action_check_path_document(tmp_path, capsys):
    spec = write_spec(tmp_path, "harmonic")
    doc = {"basis": "fourier", "coefficients": [[0.0, 1.0, 0.0]],
           "interval": [0.0, float(np.pi)]}
    pf = tmp_path / "path.json"
    pf.write_text(json.dumps(doc))
    report = run_json(capsys, [
        "action-check", spec, "--path", str(pf), "--variations", "10"])
    assert report["passed"] is True
    assert report["stationarity"]["stationary"] is True
    assert report["action_difference"] <= 1e-9 * (
        1 + abs(report["action_lagrangian"]))


def test_action_check_fails_off_solution(tmp_path, capsys):
    spec = write_spec(tmp_path, "harmonic")
    doc = {"basis": "monomial", "coefficients": [[0.0, 1.0]],
           "interval": [0.0, 1.0]}
    pf = tmp_path / "path.json"
    pf.write_text(json.dumps(doc))
    code, out, _ = run_cli(capsys, [
        "action-check", spec, "--path", str(pf), "--variations", "10"])
    assert code == 1
    assert json.loads(out)["passed"] is False


def test_action_check_fitted_trajectory(tmp_path, capsys):
    spec = write_spec(tmp_path, "harmonic")
    csv = tmp_path / "traj.csv"
    run_json(capsys, ["simulate", spec, "--init", "1,0",
                      "--t-end", f"{2 * np.pi:.17g}", "--out", str(csv)])
    report = run_json(capsys, [
        "action-check", spec, "--traj", str(csv), "--basis", "fourier",
        "--coeffs", "9", "--variations", "10"])
    assert report["passed"] is True
    assert report["source"]["fit"]["used_orthogonal"] is False
    assert report["source"]["fit"]["max_residual"] < 1e-8


def test_action_check_usage(tmp_path, capsys):
    spec = write_spec(tmp_path, "harmonic")
    pf = tmp_path / "path.json"
    pf.write_text(json.dumps({"basis": "monomial",
                              "coefficients": [[0.0, 1.0]],
                              "interval": [0.0, 1.0]}))
    code, _, err = run_cli(capsys, [
        "action-check", spec, "--path", str(pf), "--variations", "0"])
    assert code == 2 and "--variations" in err
    with pytest.raises(SystemExit) as info:
        cli.main(["action-check", spec])  # neither --path nor --traj
    assert info.value.code == 2
    capsys.readouterr()
    pf.write_text(json.dumps({"basis": "monomial",
                              "coefficients": [[0.0, 1.0]]}))
    code, _, err = run_cli(capsys, ["action-check", spec, "--path", str(pf)])
    assert code == 2 and "interval" in err


# -- unified-check ----------------------------------------------------------


def test_unified_check_explicit_point(tmp_path, capsys):
    spec = write_spec(tmp_path, "harmonic")
    report = run_json(capsys, ["unified-check", spec, "--point", "0,1,0,0"])
    assert report["all_on_constraint"] is True
    entry = report["points"][0]
    np.testing.assert_allclose(entry["solved_field"], [1.0, 0.0, -1.0, -1.0],
                               atol=1e-12)
    assert entry["transversality"] == 1.0
    # H = -L + p q1 = 1/2 q0^2 ... = -1/2 here, so the section picks p = 1/2
    assert entry["hamiltonian"] == pytest.approx(0.5)
    assert entry["section_p"] == pytest.approx(-0.5)
    assert entry["coupling"] == pytest.approx(-0.5)


def test_unified_check_extended_point(tmp_path, capsys):
    spec = write_spec(tmp_path, "harmonic")
    report = run_json(capsys, [
        "unified-check", spec, "--point", "0,1,0,0,-0.5", "--extended"])
    entry = report["points"][0]
    assert entry["coupling"] == pytest.approx(-0.5)


def test_unified_check_random_points(tmp_path, capsys):
    spec = write_spec(tmp_path, "pais_uhlenbeck")
    report = run_json(capsys, [
        "unified-check", spec, "--random", "25", "--seed", "7"])
    assert report["n_points"] == 25 and report["seed"] == 7
    assert report["all_on_constraint"] is True
    assert report["max_field_difference"] <= 1e-10
    assert report["max_kernel_residual"] <= 1e-9


def test_unified_check_off_constraint_point(tmp_path, capsys):
    spec = write_spec(tmp_path, "harmonic")
    code, out, _ = run_cli(capsys, [
        "unified-check", spec, "--point", "0,1,0,0.25"])
    assert code == 1
    report = json.loads(out)
    entry = report["points"][0]
    assert entry["on_constraint"] is False
    assert entry["solved_field"] is None
    assert entry["kernel_residual"] > 0.1


def test_unified_check_wrong_point_length(tmp_path, capsys):
    spec = write_spec(tmp_path, "harmonic")
    code, _, err = run_cli(capsys, ["unified-check", spec, "--point", "0,1,0"])
    assert code == 2 and "--point needs 4 values" in err


# -- cross-cutting ----------------------------------------------------------


def test_outputs_byte_identical_across_jobs(tmp_path, capsys):
    spec = write_spec(tmp_path, "pais_uhlenbeck")
    base = run_cli(capsys, ["unified-check", spec, "--random", "10"])
    pooled = run_cli(capsys, ["unified-check", spec, "--random", "10",
                              "--jobs", "4"])
    assert base == pooled

    pf = tmp_path / "path.json"
    pf.write_text(json.dumps({
        "basis": "fourier", "coefficients": [[0.0, 0.0, 0.0, 1.0, 0.0]],
        "interval": [0.0, 2 * np.pi]}))
    serial = run_cli(capsys, ["action-check", spec, "--path", str(pf),
                              "--variations", "8"])
    threaded = run_cli(capsys, ["action-check", spec, "--path", str(pf),
                                "--variations", "8", "--jobs", "3"])
    assert serial == threaded


def test_log_level_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("OSTRO_LOG", "error")
    cli._configure_logging()
    assert logging.getLogger("ostromech").level == logging.ERROR
    monkeypatch.setenv("OSTRO_LOG", "debug")
    cli._configure_logging()
    assert logging.getLogger("ostromech").level == logging.DEBUG
    monkeypatch.delenv("OSTRO_LOG")
    cli._configure_logging()
    assert logging.getLogger("ostromech").level == logging.WARNING


def test_installed_entry_point(tmp_path):
    spec = write_spec(tmp_path, "harmonic")
    proc = subprocess.run(
        [sys.executable, "-c",
         "import sys; from ostromech.cli import main; "
         "sys.exit(main(sys.argv[1:]))",
         "derive", spec],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["system"] == "harmonic"
