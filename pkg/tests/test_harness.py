import json
import os

import numpy as np
import pytest

from topowam import harness
from topowam.config import RunConfig, apply_overrides
from topowam.errors import CheckpointMismatch
from topowam.trainer import Trainer, load_checkpoint

TINY = {"branch-width": 8, "merge-width": 8, "lstm-width": 8, "t-max": 3, "episodes": 6,
        "eval-every": 2, "checkpoint-every": 3, "eval-episodes": 3}


def tiny_config(**extra):
    return apply_overrides(RunConfig(), {**TINY, **extra})


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = tiny_config()
    harness.train(cfg, str(out))
    return cfg, out


def _bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_train_outputs(trained):
    cfg, out = trained
    for name in ("config.json", "episodes.csv", "evals.csv", "timing.jsonl", "training.png",
                 "checkpoints/initial.npz", "checkpoints/latest.npz", "checkpoints/final.npz"):
        assert os.path.exists(out / name), name
    rows = harness.read_csv(out / "episodes.csv")
    assert [int(r["episode"]) for r in rows] == list(range(6))
    assert {r["config_hash"] for r in rows} == {cfg.hash}
    assert rows[0]["code_version"] and rows[0]["format_version"] == "1"
    assert [int(r["episode"]) for r in harness.read_csv(out / "evals.csv")] == [2, 4, 6]
    timings = [json.loads(line) for line in open(out / "timing.jsonl")]
    assert len(timings) == 6 and "wall_time" in timings[0]


def test_checkpoint_metadata_and_round_trip(trained, tmp_path):
    cfg, out = trained
    meta, arrays = load_checkpoint(out / "checkpoints" / "final.npz")
    assert meta["run_hash"] == cfg.hash and meta["format_version"] == 1 and meta["code_version"]
    assert meta["episode"] == 6
    trainer = Trainer.load(out / "checkpoints" / "final.npz")
    trainer.save(tmp_path / "again.npz")
    meta2, arrays2 = load_checkpoint(tmp_path / "again.npz")
    assert set(arrays) == set(arrays2)
    for k in arrays:
        np.testing.assert_array_equal(arrays[k], arrays2[k])
    assert _bytes(tmp_path / "again.npz") == _bytes(tmp_path / "again.npz")


def test_identical_runs_are_byte_identical(trained, tmp_path):
    cfg, out = trained
    harness.train(cfg, str(tmp_path), figures=False)
    for name in ("episodes.csv", "evals.csv"):
        assert _bytes(out / name) == _bytes(tmp_path / name)


def test_resume_continues_the_same_run(trained, tmp_path):
    cfg, out = trained
    harness.train(apply_overrides(cfg, {"episodes": 3}), str(tmp_path), figures=False)
    with pytest.raises(CheckpointMismatch):
        harness.train(cfg, str(tmp_path), resume=True, figures=False)


def test_resume_after_interruption_matches(tmp_path):
    cfg = tiny_config()
    full = tmp_path / "full"
    harness.train(cfg, str(full), figures=False)
    part = tmp_path / "part"
    calls = []

    def stop_after_four(row):
        calls.append(row["episode"])
        if len(calls) == 4:
            raise KeyboardInterrupt

    with pytest.raises(KeyboardInterrupt):
        harness.train(cfg, str(part), progress=stop_after_four, figures=False)
    harness.train(cfg, str(part), resume=True, figures=False)
    for name in ("episodes.csv", "evals.csv"):
        assert _bytes(full / name) == _bytes(part / name)


def test_evaluate_outputs_and_mismatch(trained, tmp_path):
    _, out = trained
    ckpt = out / "checkpoints" / "final.npz"
    summary = harness.evaluate(str(ckpt), str(tmp_path), episodes=4, batches=2, preset="slim", noise=0.1)
    assert 0.0 <= summary["success_rate_mean"] <= 1.0
    assert len(summary["step_mean_gamma"]) == 4
    rows = harness.read_csv(tmp_path / "eval_steps.csv")
    assert [int(r["step"]) for r in rows] == [0, 1, 2, 3]
    r = rows[1]
    assert float(r["ci_low"]) <= float(r["mean_gamma"]) <= float(r["ci_high"])
    assert len(harness.read_csv(tmp_path / "eval_batches.csv")) == 2
    assert os.path.exists(tmp_path / "eval_gamma.png")
    with pytest.raises(CheckpointMismatch):
        harness.evaluate(str(ckpt), str(tmp_path), episodes=1, input_space="P")
    with pytest.raises(CheckpointMismatch):
        harness.evaluate(str(ckpt), str(tmp_path), episodes=1, scenario="horizontal")


def test_rollout_transcript(trained, tmp_path):
    _, out = trained
    res = harness.rollout(str(out / "checkpoints" / "final.npz"), str(tmp_path), posture="tilted", tilt=0.3)
    lines = [json.loads(line) for line in open(res["transcript"])]
    assert lines[0]["record"] == "header" and lines[0]["format_version"] == 1
    steps = lines[1:]
    assert len(steps) == res["steps"] == 3
    assert np.array(steps[0]["writhe"]).shape == (20, 14)
    assert set(steps[0]["curves"]) == {"r_r", "r_l", "h_c", "h_arm", "h_l", "h_r"}
    assert steps[-1]["gamma"] == pytest.approx(res["final_gamma"])
    assert os.path.exists(tmp_path / "rollout_final.png")


def test_ablation_outputs(tmp_path):
    cfg = tiny_config(episodes=3)
    summary = harness.ablate(cfg, [0, 1], str(tmp_path), eval_episodes=2, figures=True)
    assert [(s["variant"], s["seed"]) for s in summary] == [(v, s) for v in ("WL", "W", "P") for s in (0, 1)]
    rows = harness.read_csv(tmp_path / "ablation_curves.csv")
    assert {(r["variant"], r["seed"]) for r in rows} == {(v, s) for v in ("WL", "W", "P") for s in ("0", "1", "mean")}
    assert os.path.exists(tmp_path / "ablation_rewards.png")
    with pytest.raises(ValueError):
        harness.ablate(cfg, [0], str(tmp_path))


def test_smoothing_is_centered_ten_point_window():
    x = np.arange(30, dtype=float)
    s = harness.smooth(x)
    assert s[15] == pytest.approx(np.mean(x[10:20]))
    assert s[0] == pytest.approx(np.mean(x[:5]))
    assert s[-1] == pytest.approx(np.mean(x[24:]))


def test_ablation_resume_reuses_finished_runs(tmp_path):
    cfg = tiny_config(episodes=2)
    first = harness.ablate(cfg, [0, 1], str(tmp_path), eval_episodes=2, figures=False)
    before = _bytes(tmp_path / "WL_seed0" / "episodes.csv")
    again = harness.ablate(cfg, [0, 1], str(tmp_path), eval_episodes=2, figures=False, resume=True)
    assert again == first
    assert _bytes(tmp_path / "WL_seed0" / "episodes.csv") == before
