import json

import numpy as np
import pytest

from reebcurv.cli import main, run_command


def _write_cfg(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


SMALL_VERIFY = {
    "manifold": "torus_xi_n",
    "n": 1,
    "grid": [6, 6, 6],
    "seed": 1,
    "n_random_perturbations": 2,
    "jacobi_time": 0.3,
    "jacobi_steps": 300,
}


def test_verify_pass_and_artifacts(tmp_path):
    cfg = _write_cfg(tmp_path, SMALL_VERIFY)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--command", "verify", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"]
    assert summary["curvature"]["max_closed_vs_oracle"] <= 1e-6
    header = (out / "curvature_grid.csv").read_text().splitlines()[0]
    assert header == "x,y,z,P,Q,ricci_closed,ricci_oracle,G,H,resid"


def test_verify_reports_pq_ground_truth(tmp_path):
    cfg = _write_cfg(tmp_path, SMALL_VERIFY)
    out = tmp_path / "out"
    main(["--config", cfg, "--command", "verify", "--out", str(out)])
    rows = np.loadtxt(out / "curvature_grid.csv", delimiter=",", skiprows=1)
    P, Q = rows[:, 3], rows[:, 4]
    assert np.abs(P).max() < 1e-8
    assert np.abs(Q - np.pi).max() < 1e-8


def test_unknown_config_key_is_exit_2(tmp_path):
    cfg = _write_cfg(tmp_path, dict(SMALL_VERIFY, typo_key=1))
    assert main(["--config", cfg, "--command", "verify", "--out", str(tmp_path / "o")]) == 2


def test_unknown_model_is_exit_2(tmp_path):
    cfg = _write_cfg(tmp_path, {"manifold": "sphere"})
    assert main(["--config", cfg, "--command", "verify", "--out", str(tmp_path / "o")]) == 2


def test_missing_config_file_is_exit_2(tmp_path):
    assert main(["--config", str(tmp_path / "nope.json"), "--command", "verify", "--out", str(tmp_path / "o")]) == 2


def test_bad_expression_is_exit_2(tmp_path):
    cfg = _write_cfg(
        tmp_path,
        {"manifold": "heisenberg_r3", "grid": [6, 6, 6], "f": "tan(x)", "box": {"base": 0.1, "extent": 0.3}},
    )
    assert main(["--config", cfg, "--command", "realize-local", "--out", str(tmp_path / "o")]) == 2


def test_realize_local_inadmissible_f_is_exit_2(tmp_path, capsys):
    cfg = _write_cfg(
        tmp_path,
        {
            "manifold": "heisenberg_r3",
            "grid": [6, 6, 6],
            "f": "3",
            "box": {"base": 0.1, "extent": 0.3, "seeds": [4, 4]},
        },
    )
    code = main(["--config", cfg, "--command", "realize-local", "--out", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    assert "exceeds" in err and "at point" in err


def test_realize_local_writes_solution(tmp_path):
    cfg = _write_cfg(
        tmp_path,
        {
            "manifold": "heisenberg_r3",
            "grid": [6, 6, 6],
            "f": "0",
            "box": {"base": 0.1, "extent": 0.4, "seeds": [4, 4], "slices": 5},
        },
    )
    out = tmp_path / "out"
    assert main(["--config", cfg, "--command", "realize-local", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["solution"]["sup_residual"] <= 1e-3
    header = (out / "realization.csv").read_text().splitlines()[0]
    assert header == "x,y,z,eta,mu,ricci,residual"


def test_realize_global_identity_sequence(tmp_path):
    cfg = _write_cfg(
        tmp_path,
        {
            "manifold": "mapping_torus_box",
            "grid": [6, 6, 6],
            "f": "2",
            "epsilon": 0.1,
            "n_max": 2,
            "verify_grid": [4, 4, 8],
            "band_grid": [4, 4, 6],
        },
    )
    out = tmp_path / "out"
    assert main(["--config", cfg, "--command", "realize-global", "--out", str(out)]) == 0
    conv = json.loads((out / "convergence.json").read_text())
    assert conv["verdict"]
    summary = json.loads((out / "summary.json").read_text())
    assert max(summary["sequence"]["pair_clarke_bounds"]) == 0.0


def test_distance_command(tmp_path):
    cfg = _write_cfg(
        tmp_path,
        {
            "metrics": [
                {"model": {"manifold": "torus_xi_n", "n": 1, "grid": [6, 6, 6]}},
                {"model": {"manifold": "torus_xi_n", "n": 1, "grid": [6, 6, 6]}, "lambda": "1", "eta": "1"},
            ],
            "path_steps": 6,
        },
    )
    out = tmp_path / "out"
    assert main(["--config", cfg, "--command", "distance", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    mat = np.array(summary["path_length_upper"])
    assert mat.shape == (2, 2)
    assert mat[0, 1] == mat[1, 0] > 0
    assert (out / "distances.csv").exists()


def test_summary_is_deterministic_modulo_timestamp(tmp_path):
    cfg = json.loads(json.dumps(SMALL_VERIFY))
    s1 = run_command("verify", cfg, str(tmp_path / "a"))
    s2 = run_command("verify", cfg, str(tmp_path / "b"))
    a = json.loads((tmp_path / "a" / "summary.json").read_text())
    b = json.loads((tmp_path / "b" / "summary.json").read_text())
    a.pop("timestamp")
    b.pop("timestamp")
    assert a == b


def test_seed_flag_overrides_config(tmp_path):
    cfg = _write_cfg(tmp_path, SMALL_VERIFY)
    out = tmp_path / "out"
    main(["--config", cfg, "--command", "verify", "--out", str(out), "--seed", "7"])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 7


def test_verify_with_sweep_option(tmp_path):
    cfg = _write_cfg(tmp_path, dict(SMALL_VERIFY, sweep_c=float(2 * np.pi**2)))
    out = tmp_path / "out"
    assert main(["--config", cfg, "--command", "verify", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["sweep"]["lambda"] == 0.0
