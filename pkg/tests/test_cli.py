"""CLI surface: subcommands, config plumbing, exit codes, determinism."""

import json
import math

import numpy as np
import pytest

import oracles
from pendavg.cli import main
from pendavg.config import PRESETS, ConfigError, ExperimentConfig, load_config, merge_config
from pendavg.constants import OMEGA1, OMEGA2, T1, T2
from pendavg.model import Mode, unperturbed_orbit


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------------------
# freqs
# ---------------------------------------------------------------------------

def test_freqs_full_precision(capsys):
    code, out, _ = run_cli(capsys, "freqs")
    assert code == 0
    values = dict(line.split(" = ") for line in out.strip().splitlines())
    assert float(values["omega1"]) == OMEGA1
    assert float(values["omega2"]) == OMEGA2
    assert float(values["T1"]) == T1
    assert float(values["T2"]) == T2


# ---------------------------------------------------------------------------
# average
# ---------------------------------------------------------------------------

def _csv_rows(text):
    lines = text.strip().splitlines()
    return lines[0].split(","), [[float(v) for v in line.split(",")] for line in lines[1:]]


def test_average_point_matches_scaled_closed_form(capsys):
    code, out, _ = run_cli(capsys, "average", "--preset", "corollary1", "--point", "0,0")
    assert code == 0
    header, rows = _csv_rows(out)
    assert header == ["a1", "a2", "g1", "g2"]
    raw = oracles.corollary1_raw(0.0, 0.0)
    # CSV carries the period-mean convention: -/+ omega1/(4 pi) times raw
    assert rows[0][2] == pytest.approx(-OMEGA1 / (4 * math.pi) * raw[0], abs=1e-12)
    assert rows[0][2] == pytest.approx(-0.25, abs=1e-12)
    assert rows[0][3] == pytest.approx(0.0, abs=1e-12)


def test_average_zero_forcing_grid_is_all_zero(capsys):
    code, out, _ = run_cli(
        capsys, "average", "--f1", "0", "--f2", "0", "--mode", "mode1", "--grid=-1:1:3"
    )
    assert code == 0
    _, rows = _csv_rows(out)
    assert len(rows) == 9
    for row in rows:
        assert row[2] == 0.0 and row[3] == 0.0


def test_average_corollary2_vanishes_at_its_zero(capsys):
    point = f"0,{oracles.CORO2_W0!r}"
    code, out, _ = run_cli(capsys, "average", "--preset", "corollary2", "--point", point)
    assert code == 0
    _, rows = _csv_rows(out)
    assert abs(rows[0][2]) <= 1e-11
    assert abs(rows[0][3]) <= 1e-11


def test_average_requires_points_or_grid(capsys):
    code, _, err = run_cli(capsys, "average", "--preset", "corollary1")
    assert code == 2
    assert "point" in err


# ---------------------------------------------------------------------------
# zeros
# ---------------------------------------------------------------------------

def test_zeros_corollary1_report(capsys, tmp_path):
    out_dir = tmp_path / "report"
    code, out, _ = run_cli(capsys, "zeros", "--preset", "corollary1", "--out", str(out_dir))
    assert code == 0
    payload = json.loads(out)
    assert len(payload["zeros"]) == 4
    assert payload["orbit_classes"] == 2
    assert sorted(len(group) for group in payload["classes"]) == [2, 2]
    for record, target in zip(payload["zeros"], oracles.CORO1_ZEROS):
        assert record["simple"] is True
        assert record["residual"] <= 1e-11
        assert abs(record["det"]) > 1e-8
        assert np.abs(np.array(record["alpha"]) - np.array(target)).max() <= 1e-8
    assert (out_dir / "zeros.json").read_text() == out


def test_zeros_corollary2_report(capsys):
    code, out, _ = run_cli(capsys, "zeros", "--preset", "corollary2")
    assert code == 0
    payload = json.loads(out)
    assert len(payload["zeros"]) == 1
    assert payload["orbit_classes"] == 1
    alpha = payload["zeros"][0]["alpha"]
    assert abs(alpha[0]) <= 1e-7
    assert alpha[1] == pytest.approx(oracles.CORO2_W0, abs=1e-7)


def test_zeros_empty_for_constant_nonzero_mean(capsys, tmp_path):
    # sin(w1 tau) forcing gives a constant nonzero mean pair: no zeros in
    # the annulus, exit code still 0, and no degeneracy message.
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(
        json.dumps({"f2": "sin(w1 * tau)", "grid_radial": 6, "grid_angular": 6, "r1": 0.1, "r2": 5.0})
    )
    code, out, _ = run_cli(capsys, "zeros", "--config", str(cfg_path))
    assert code == 0
    payload = json.loads(out)
    assert payload["zeros"] == []
    assert payload["orbit_classes"] == 0
    assert "message" not in payload


def test_zeros_degenerate_forcing_message(capsys):
    code, out, _ = run_cli(capsys, "zeros", "--f1", "0", "--f2", "0", "--mode", "mode1")
    assert code == 0
    payload = json.loads(out)
    assert payload["zeros"] == []
    assert payload["orbit_classes"] == 0
    assert "identically zero" in payload["message"]


def test_zeros_byte_identical_across_runs(capsys):
    _, first, _ = run_cli(capsys, "zeros", "--preset", "corollary2")
    _, second, _ = run_cli(capsys, "zeros", "--preset", "corollary2")
    assert first == second


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def test_verify_empty_eps_is_averaging_only(capsys):
    code, out, _ = run_cli(capsys, "verify", "--preset", "corollary2", "--eps", "")
    assert code == 0
    payload = json.loads(out)
    assert payload["runs"] == []
    assert len(payload["zeros"]) == 1


def test_verify_corollary2_single_eps(capsys, tmp_path):
    out_dir = tmp_path / "verify"
    code, out, _ = run_cli(
        capsys, "verify", "--preset", "corollary2", "--eps", "1e-3", "--out", str(out_dir)
    )
    assert code == 0
    payload = json.loads(out)
    assert len(payload["runs"]) == 1
    run = payload["runs"][0]
    assert run["converged"] is True
    assert run["residual"] <= 1e-9
    assert run["distance_to_prediction"] <= 10.0 * 1e-3
    assert payload["verified"] == [{"epsilon": 1e-3, "verified_orbit_classes": 1}]
    traj = (out_dir / run["trajectory_file"]).read_text().splitlines()
    assert traj[0] == "tau,th1,th1d,th2,th2d"
    assert len(traj) == 1 + 256


def test_verify_corollary1_counts_two_orbits(capsys):
    code, out, _ = run_cli(capsys, "verify", "--preset", "corollary1", "--eps", "1e-3")
    assert code == 0
    payload = json.loads(out)
    assert len(payload["runs"]) == 4  # one run per zero
    assert all(run["converged"] for run in payload["runs"])
    # antipodal zeros continue to the same orbit class: 4 runs, 2 orbits
    assert payload["verified"] == [{"epsilon": 1e-3, "verified_orbit_classes": 2}]


# ---------------------------------------------------------------------------
# orbit
# ---------------------------------------------------------------------------

def test_orbit_quarter_period_samples(capsys):
    code, out, _ = run_cli(capsys, "orbit", "--mode", "mode1", "--alpha", "1,0", "--samples", "4")
    assert code == 0
    _, rows = _csv_rows(out)
    assert len(rows) == 4
    for i, row in enumerate(rows):
        tau = i * T1 / 4.0
        assert row[0] == pytest.approx(tau, abs=0)
        expected = unperturbed_orbit(Mode.MODE1, (1.0, 0.0), tau)
        assert np.abs(np.array(row[1:]) - expected).max() <= 1e-14


def test_orbit_single_sample(capsys):
    code, out, _ = run_cli(capsys, "orbit", "--mode", "mode2", "--alpha", "1,0", "--samples", "1")
    assert code == 0
    _, rows = _csv_rows(out)
    assert len(rows) == 1 and rows[0][0] == 0.0


def test_orbit_zero_amplitudes(capsys):
    code, out, _ = run_cli(capsys, "orbit", "--mode", "mode2", "--alpha", "0,0", "--samples", "5")
    assert code == 0
    _, rows = _csv_rows(out)
    assert all(all(v == 0.0 for v in row[1:]) for row in rows)


# ---------------------------------------------------------------------------
# Config plumbing and exit codes
# ---------------------------------------------------------------------------

def test_preset_expressions_are_pinned():
    assert PRESETS["corollary1"].f1 == "0"
    assert PRESETS["corollary1"].f2 == "(1 - th1^2) * sin(w1 * tau)"
    assert PRESETS["corollary1"].mode == "mode1"
    assert PRESETS["corollary2"].f1 == "th2d + th1^2 * cos(w2 * tau)"
    assert PRESETS["corollary2"].f2 == "0"
    assert PRESETS["corollary2"].mode == "mode2"
    assert PRESETS["corollary1"].epsilons == (1e-2, 5e-3, 2.5e-3, 1e-3)


def test_config_file_and_flag_override(capsys, tmp_path):
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps({"f2": "sin(w1 * tau)", "mode": "mode1", "r2": 5.0}))
    code, out, _ = run_cli(
        capsys, "average", "--config", str(cfg_path), "--f2", "0", "--point", "1,1"
    )
    assert code == 0  # flag overrode the file's forcing; zero forcing averages to zero
    _, rows = _csv_rows(out)
    assert rows[0][2] == 0.0 and rows[0][3] == 0.0


def test_load_config_round_trip(tmp_path):
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps({"f2": "sin(w1 * tau)", "p": 1, "q": 1, "r2": 7.5}))
    cfg = load_config(str(cfg_path))
    assert cfg.f2 == "sin(w1 * tau)"
    assert cfg.r2 == 7.5


def test_unknown_config_key_is_exit_2(capsys, tmp_path):
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps({"zz_top": 1}))
    code, _, err = run_cli(capsys, "zeros", "--config", str(cfg_path))
    assert code == 2
    assert "unknown key" in err


def test_bad_expression_is_exit_2(capsys):
    code, _, err = run_cli(capsys, "zeros", "--f1", "2x", "--f2", "0")
    assert code == 2
    assert "config error" in err


def test_non_periodic_forcing_is_exit_2(capsys):
    code, _, err = run_cli(capsys, "average", "--f1", "0", "--f2", "sin(tau)", "--mode", "mode1", "--point", "0,0")
    assert code == 2
    assert "periodic" in err


def test_zero_epsilon_is_exit_2(capsys):
    code, _, err = run_cli(capsys, "verify", "--preset", "corollary1", "--eps", "1e-3,0")
    assert code == 2
    assert "epsilon" in err


def test_quadrature_cap_is_exit_3(capsys):
    # A kinked forcing keeps panel refinement from ever meeting 1e-12.
    code, _, err = run_cli(
        capsys,
        "average",
        "--f1", "0",
        "--f2", "abs(sin(w1 * tau) - 0.5)",
        "--mode", "mode1",
        "--tol", "1e-12",
        "--point", "1,1",
    )
    assert code == 3
    assert "numerical failure" in err


def test_merge_config_rejects_bad_types():
    with pytest.raises(ConfigError):
        merge_config(ExperimentConfig(), {"p": "one"})
    with pytest.raises(ConfigError):
        merge_config(ExperimentConfig(), {"epsilons": "nope"})
    with pytest.raises(ConfigError):
        merge_config(ExperimentConfig(), {"r1": -1.0})


def test_shooting_failure_recorded_and_exit_3(capsys, monkeypatch):
    import pendavg.cli as cli_mod
    from pendavg.continuation import ShootingError

    def boom(*args, **kwargs):
        raise ShootingError("synthetic failure")

    monkeypatch.setattr(cli_mod, "shoot_periodic", boom)
    code, out, _ = run_cli(capsys, "verify", "--preset", "corollary2", "--eps", "1e-3")
    assert code == 3
    payload = json.loads(out)
    assert payload["runs"][0]["converged"] is False
    assert "synthetic failure" in payload["runs"][0]["error"]


def test_log_level_env_var(capsys, monkeypatch):
    monkeypatch.setenv("PENDAVG_LOG", "info")
    code, _, err = run_cli(capsys, "zeros", "--preset", "corollary2")
    assert code == 0
    assert "found 1 zeros in 1 orbit classes" in err


def test_console_entry_point():
    import subprocess
    import sys as _sys

    proc = subprocess.run(
        [_sys.executable, "-m", "pendavg.cli", "freqs"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("omega1 = ")
