import json

import pytest

from topowam import checks, cli
from topowam.checks import CheckResult

TINY = ["--branch-width", "8", "--merge-width", "8", "--lstm-width", "8", "--t-max", "3",
        "--episodes", "2", "--eval-every", "1", "--eval-episodes", "2", "--no-figures"]


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    assert cli.main(["train", "--out", str(out)] + TINY) == cli.EXIT_OK
    return out


def test_train_writes_run(checkpoint):
    assert (checkpoint / "episodes.csv").read_text().startswith("episode,")
    assert (checkpoint / "checkpoints" / "final.npz").exists()


def test_train_is_repeatable(checkpoint, tmp_path):
    assert cli.main(["train", "--out", str(tmp_path)] + TINY) == cli.EXIT_OK
    assert (tmp_path / "episodes.csv").read_bytes() == (checkpoint / "episodes.csv").read_bytes()


def test_eval_and_rollout(checkpoint, tmp_path, capsys):
    ckpt = str(checkpoint / "checkpoints" / "final.npz")
    assert cli.main(["eval", ckpt, "--out", str(tmp_path / "e"), "--episodes", "2", "--no-figures"]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert "success_rate_mean" in summary
    assert cli.main(["rollout", ckpt, "--out", str(tmp_path / "r"), "--no-figures"]) == 0
    assert (tmp_path / "r" / "transcript.jsonl").exists()


@pytest.mark.parametrize("argv", [
    ["train", "--t-max", "zero"],
    ["train", "--scenario", "sideways"],
    ["train", "--config", "/nonexistent/config.json"],
    ["train", "--seed", "x"],
    ["ablate", "--out", "x", "--seeds", "1"],
    ["eval", "ckpt.npz", "--out", "x", "--episodes", "0"],
    ["frobnicate"],
])
def test_configuration_errors_exit_1(argv, capsys):
    assert cli.main(argv) == cli.EXIT_CONFIG


def test_checkpoint_mismatch_exits_1(checkpoint, tmp_path):
    ckpt = str(checkpoint / "checkpoints" / "final.npz")
    assert cli.main(["eval", ckpt, "--out", str(tmp_path), "--input-space", "W"]) == cli.EXIT_CONFIG


def test_runtime_errors_exit_2(tmp_path):
    bogus = tmp_path / "bogus.npz"
    bogus.write_bytes(b"not a checkpoint")
    assert cli.main(["eval", str(bogus), "--out", str(tmp_path / "o")]) == cli.EXIT_RUNTIME
    assert cli.main(["rollout", str(tmp_path / "missing.npz"), "--out", str(tmp_path / "o")]) == cli.EXIT_RUNTIME


def test_check_exit_codes(monkeypatch, capsys):
    monkeypatch.setattr(checks, "run_checks", lambda quick, out: [CheckResult("a", True, 0.0, 1.0)])
    assert cli.main(["check", "--quick"]) == cli.EXIT_OK
    monkeypatch.setattr(checks, "run_checks",
                        lambda quick, out: [CheckResult("a", True, 0.0, 1.0), CheckResult("b", False, 2.0, 1.0, "bad")])
    assert cli.main(["check"]) == cli.EXIT_CHECK
    assert "FAIL b" in capsys.readouterr().out


def test_help_exits_0(capsys):
    assert cli.main(["--help"]) == cli.EXIT_OK
