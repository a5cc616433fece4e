import json
import subprocess
import sys

import pytest

from locomimic.cli import main
from locomimic.gait import diagram_from_csv, reconstruct_gait
from locomimic.serialization import read_trajectory


def test_generate_csv_and_report(tmp_path, capsys):
    assert main(["generate", "--gait", "trot", "--vx", "0.5", "--horizon", "2", "--out", str(tmp_path)]) == 0
    frames = read_trajectory(tmp_path / "frames.csv")
    assert len(frames) == 100
    rep = json.loads((tmp_path / "frames_report.json").read_text())
    assert rep["solver"]["converged"] and "wall_time" not in rep["solver"]
    assert "wrote 100 frames" in capsys.readouterr().out


def test_generate_default_horizon(tmp_path):
    assert main(["generate", "--gait", "pronk", "--vx", "0.5", "--out", str(tmp_path)]) == 0
    assert len(read_trajectory(tmp_path / "frames.csv")) == 40


def test_baseline_json(tmp_path):
    assert main(["baseline", "--vx", "0.3", "--format", "json", "--horizon", "1.0", "--out", str(tmp_path)]) == 0
    assert len(read_trajectory(tmp_path / "baseline.json")) == 50


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LOCOMIMIC_OUT", str(tmp_path / "env"))
    assert main(["gait-diagram", "--gait", "gallop"]) == 0
    text = (tmp_path / "env" / "gait_diagram_gallop.csv").read_text()
    assert text.startswith("leg,interval_start,interval_end,contact_flag\n")
    rows = diagram_from_csv(text)
    assert reconstruct_gait(rows, 0.5) == (0.45, (0.75, 0.5, 0.25))


def test_reward_scores_reference_against_itself(tmp_path):
    main(["generate", "--vx", "0.5", "--out", str(tmp_path)])
    ref = str(tmp_path / "frames.csv")
    assert main(["reward", "--trajectory", ref, "--reference", ref, "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "reward_summary.json").read_text())
    for k in ("height", "velocity", "feet", "slip", "total"):
        assert summary[k] == 1.0, k


def test_reward_length_mismatch(tmp_path, capsys):
    main(["baseline", "--horizon", "1.0", "--out", str(tmp_path / "a")])
    main(["baseline", "--horizon", "0.5", "--out", str(tmp_path / "b")])
    code = main(["reward", "--trajectory", str(tmp_path / "a" / "baseline.csv"),
                 "--reference", str(tmp_path / "b" / "baseline.csv"), "--out", str(tmp_path)])
    assert code == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "frames" in err["message"]


def test_mpc_run_outputs(tmp_path):
    assert main(["mpc-run", "--duration", "1.0", "--push", "0", "0.3", "0", "--push-time", "0.4",
                 "--out", str(tmp_path)]) == 0
    for name in ("run.csv", "rewards.csv", "summary.json", "plot_series.json"):
        assert (tmp_path / name).exists()
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["steps"] == 50 and s["disturbances"][0]["time"] == pytest.approx(0.4)


def test_mpc_random_push_uses_seed(tmp_path):
    main(["mpc-run", "--duration", "0.6", "--random-push", "--push-time", "0.2", "--seed", "3",
          "--out", str(tmp_path / "a")])
    main(["mpc-run", "--duration", "0.6", "--random-push", "--push-time", "0.2", "--seed", "4",
          "--out", str(tmp_path / "b")])
    a = json.loads((tmp_path / "a" / "summary.json").read_text())["disturbances"][0]["linear"]
    b = json.loads((tmp_path / "b" / "summary.json").read_text())["disturbances"][0]["linear"]
    assert a != b and all(abs(v) <= 1.5 for v in a)


def test_bad_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("ocp:\n  velocty: 1\n")
    assert main(["check", "--config", str(cfg)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and "ocp.velocty" in err["message"]


def test_unknown_gait_exits_2(tmp_path):
    assert main(["generate", "--gait", "crawl", "--out", str(tmp_path)]) == 2


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 2


def test_check_passes(capsys):
    assert main(["check", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "locomimic", "gait-diagram", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "gait_diagram_trot.csv").exists()


def test_check_fails_on_starved_solver(tmp_path, capsys):
    cfg = tmp_path / "starved.yaml"
    cfg.write_text("solver:\n  max_iter: 1\n")
    assert main(["check", "--config", str(cfg)]) == 1
    assert "FAIL reference:" in capsys.readouterr().out
