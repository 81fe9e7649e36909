import csv
import subprocess
import sys

import pytest

from mage.cli import main

FAST = ["--set", "epochs=2", "--set", "groups_per_epoch=1", "--set", "group_size=2"]


def test_train_then_eval_then_export(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", *FAST, "--set", "trajectories=true", "--out", str(out)]) == 0
    for name in ("metrics.csv", "checkpoints/final.txt", "trajectories.jsonl", "config.yaml"):
        assert (out / name).exists()
    ev = tmp_path / "eval"
    code = main(["eval", "--checkpoint", str(out / "checkpoints" / "final.txt"),
                 "--opponent", "kuhn-aggressive", "--meta-episodes", "20", "--trajectories",
                 "--out", str(ev)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "kuhn-aggressive" in printed and "95% CI" in printed and "draw=" in printed
    rows = list(csv.DictReader((ev / "metrics.csv").open()))
    assert rows[0]["phase"] == "eval" and rows[0]["num_meta_episodes"] == "20"
    assert (ev / "freqs.csv").exists()
    assert main(["export-freqs", "--log", str(ev / "trajectories.jsonl"),
                 "--out", str(tmp_path / "f.csv")]) == 0
    assert (tmp_path / "f.csv").read_bytes() == (ev / "freqs.csv").read_bytes()


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("env: tictactoe\npopulation: fixed\nepochs: 1\ngroup_size: 2\ngroups_per_epoch: 1\n")
    assert main(["train", "-c", str(cfg), "--out", str(tmp_path / "o"), "-v"]) == 0
    text = (tmp_path / "o" / "config.yaml").read_text()
    assert "env: tictactoe" in text


@pytest.mark.parametrize("argv", [
    ["train", "--set", "epochs=abc"],
    ["train", "--set", "no_such_key=1"],
    ["train", "--config", "/nonexistent.yaml"],
    ["eval", "--checkpoint", "/nonexistent.txt"],
    ["export-freqs", "--log", "/nonexistent.jsonl", "--out", "x.csv"],
    ["solve-cfr", "--iterations", "0"],
])
def test_config_errors_exit_2(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2
    assert "config error" in capsys.readouterr().err


def test_numerical_failure_exit_3(tmp_path, capsys):
    code = main(["train", *FAST, "--set", "learning_rate=1e308", "--set", "epochs=5",
                 "--out", str(tmp_path)])
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err
    assert (tmp_path / "numerical_failure.json").exists()


def test_remote_failure_exit_4(tmp_path, capsys):
    code = main(["eval", "--set", "policy.type=remote",
                 "--set", "endpoint.base_url=http://127.0.0.1:9/v1",
                 "--set", "endpoint.retries=0", "--set", "endpoint.backoff=0",
                 "--set", "endpoint.timeout=2", "--meta-episodes", "1", "--out", str(tmp_path)])
    assert code == 4
    assert "remote endpoint failure" in capsys.readouterr().err


def test_ceiling_and_cfr(tmp_path, capsys):
    assert main(["ceiling", "--env", "kuhn", "--opponent", "kuhn-conservative"]) == 0
    assert "0.666667" in capsys.readouterr().out
    assert main(["ceiling", "--env", "tictactoe", "--opponent", "pattern-0"]) == 0
    assert "1.000000" in capsys.readouterr().out
    out = tmp_path / "cfr.txt"
    assert main(["solve-cfr", "--iterations", "2000", "--out", str(out)]) == 0
    assert out.read_text().startswith("# kuhn cfr profile iterations=2000")


def test_ablate_command(tmp_path, capsys):
    code = main(["ablate", "--axis", "grouping", *FAST, "--set", "epochs=1", "--set", "seeds=[0]",
                 "--set", "eval_meta_episodes=6", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "ablation_grouping.csv").exists()
    assert "non_stationary" in capsys.readouterr().out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "mage", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("train", "eval", "ablate", "ceiling", "solve-cfr", "export-freqs"):
        assert cmd in out.stdout
