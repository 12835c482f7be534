"""Acceptance criteria 1-11.  Each test records one PASS/FAIL line for the run summary.

Criteria 7-10 share one ablation (WL, W and P variants on seeds 0, 1, 2)
trained with ``configs/acceptance.json``.  Finished runs are cached under
``$TOPOWAM_ACCEPTANCE_DIR`` (default ``~/.cache/topowam/acceptance``) in a
directory keyed by a digest of the package source and the configuration,
so a rerun with unchanged code only repeats the evaluations.
"""
import hashlib
import os
from pathlib import Path

import numpy as np
import pytest

import topowam
from topowam import checks, cli, harness
from topowam.config import load_config

from conftest import ACCEPTANCE_LINES

ROOT = Path(__file__).resolve().parents[1]
CONFIG_PATH = ROOT / "configs" / "acceptance.json"
SEEDS = (0, 1, 2)
EVAL_EPISODES = 100


def report(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def _check(number, result):
    report(number, result.passed, f"{result.name}: {result.detail} ({result.seconds:.1f} s)")
    assert result.passed, result.detail


def _timed(fn, **kwargs):
    import time

    start = time.perf_counter()
    r = fn(**kwargs)
    r.seconds = r.seconds or time.perf_counter() - start
    return r


# --- criteria 1-6: numerical checks ---------------------------------------------


def test_criterion_01_gli_matches_quadrature():
    _check(1, _timed(checks.check_gli_quadrature, n=1000, tol=1e-6, time_limit=60.0))


def test_criterion_02_writhe_sum_equals_curve_gli():
    _check(2, _timed(checks.check_writhe_consistency, n=100, tol=1e-9))


def test_criterion_03_invariance_suite():
    _check(3, _timed(checks.check_invariance))


def test_criterion_04_delaunay_matches_bruteforce():
    _check(4, _timed(checks.check_delaunay, n_sets=20))


def test_criterion_05_gradient_check():
    _check(5, _timed(checks.check_gradients, seeds=(0, 1, 2), n_samples=200, tol=1e-4))


def test_criterion_06_shapes():
    _check(6, _timed(checks.check_shapes))


# --- criteria 7-10: learning --------------------------------------------------------


def _source_digest():
    h = hashlib.sha256()
    pkg = Path(topowam.__file__).resolve().parent
    for path in sorted(pkg.rglob("*")):
        if path.suffix in (".py", ".json") and "__pycache__" not in path.parts:
            h.update(str(path.relative_to(pkg)).encode())
            h.update(path.read_bytes())
    return h.hexdigest()[:12]


@pytest.fixture(scope="module")
def config():
    return load_config(CONFIG_PATH)


@pytest.fixture(scope="module")
def ablation_dir(config):
    base = Path(os.environ.get("TOPOWAM_ACCEPTANCE_DIR", Path.home() / ".cache" / "topowam" / "acceptance"))
    return base / f"{_source_digest()}-{config.hash}"


@pytest.fixture(scope="module")
def ablation(config, ablation_dir):
    summary = harness.ablate(config, list(SEEDS), str(ablation_dir), eval_episodes=EVAL_EPISODES,
                             figures=False, resume=True)
    return {(s["variant"], s["seed"]): s for s in summary}


def _checkpoint(ablation_dir, variant, seed):
    return str(ablation_dir / f"{variant}_seed{seed}" / "checkpoints" / "final.npz")


@pytest.fixture(scope="module")
def generalization(ablation, ablation_dir, tmp_path_factory):
    """Greedy success of each WL seed on the three humanoid presets."""
    out = tmp_path_factory.mktemp("generalization")
    table = {}
    for seed in SEEDS:
        row = {"standard": ablation[("WL", seed)]["success_rate"]}
        for preset in ("slim", "stout"):
            ev = harness.evaluate(_checkpoint(ablation_dir, "WL", seed), str(out / f"{seed}_{preset}"),
                                  preset=preset, episodes=EVAL_EPISODES, seed=seed, figures=False)
            row[preset] = ev["success_rate_mean"]
        row["passed"] = row["standard"] >= 0.80 and row["slim"] >= 0.65 and row["stout"] >= 0.65
        table[seed] = row
    return table


def _passing_seeds(generalization):
    return [s for s in SEEDS if generalization[s]["passed"]]


def test_criterion_07_training_success(generalization):
    passing = _passing_seeds(generalization)
    detail = "; ".join(f"seed {s}: standard {r['standard']:.0%} slim {r['slim']:.0%} stout {r['stout']:.0%}"
                       for s, r in generalization.items())
    ok = len(passing) >= 2
    report(7, ok, f"{len(passing)}/3 seeds meet 80/65/65% ({detail})")
    assert ok


def test_criterion_08_ablation_ordering(config, ablation, ablation_dir):
    rows = harness.read_csv(ablation_dir / "ablation_curves.csv")
    final = {}
    for variant in ("WL", "W", "P"):
        mean_curve = [float(r["smoothed"]) for r in rows if r["variant"] == variant and r["seed"] == "mean"]
        final[variant] = mean_curve[-1]
    p_success = float(np.mean([ablation[("P", s)]["success_rate"] for s in SEEDS]))
    ok = final["WL"] >= final["W"] >= final["P"] and p_success <= 0.20
    report(8, ok, "final smoothed reward " + ", ".join(f"{v} {final[v]:.3f}" for v in final)
           + f"; P greedy success {p_success:.0%}")
    assert ok


def test_criterion_09_online_greedy_gamma(generalization, ablation_dir):
    passing = _passing_seeds(generalization)
    ends = {}
    for seed in SEEDS:
        evals = harness.read_csv(ablation_dir / f"WL_seed{seed}" / "evals.csv")
        gammas = [float(r["greedy_final_gamma"]) for r in evals]
        # the last ten online evaluations span the final 100 episodes
        ends[seed] = float(np.mean(gammas[-10:]))
    ok = bool(passing) and all(ends[s] >= 1.8 for s in passing)
    detail = ", ".join(f"seed {s} {g:.2f}{'' if s in passing else ' (seed fails criterion 7)'}"
                       for s, g in ends.items())
    report(9, ok, f"greedy gamma over the last 100 episodes, required >= 1.8 on passing seeds: {detail}")
    assert ok


def test_criterion_10_noise_robustness(generalization, ablation, ablation_dir, tmp_path):
    passing = _passing_seeds(generalization)
    seed = passing[0] if passing else SEEDS[0]
    ckpt = _checkpoint(ablation_dir, "WL", seed)
    clean = ablation[("WL", seed)]["mean_final_gamma"]
    noisy = {sigma: harness.evaluate(ckpt, str(tmp_path / str(sigma)), noise=sigma, episodes=EVAL_EPISODES,
                                     seed=seed, figures=False)["mean_final_gamma"]
             for sigma in (0.1, 0.3)}
    ok = noisy[0.3] >= 0.85 * clean and noisy[0.1] >= 0.95 * clean
    report(10, ok, f"seed {seed}: mean final gamma clean {clean:.3f}, sigma 0.1 {noisy[0.1]:.3f} "
                   f"({noisy[0.1] / clean:.2f}x), sigma 0.3 {noisy[0.3]:.3f} ({noisy[0.3] / clean:.2f}x)")
    assert ok


# --- criterion 11: determinism ------------------------------------------------------

TINY = ["--branch-width", "16", "--merge-width", "16", "--lstm-width", "16", "--t-max", "4",
        "--episodes", "4", "--eval-every", "2", "--eval-episodes", "2", "--no-figures"]


def _run_all_commands(out):
    rc = [cli.main(["train", "--out", str(out / "train"), "--seed", "3"] + TINY)]
    ckpt = str(out / "train" / "checkpoints" / "final.npz")
    rc.append(cli.main(["eval", ckpt, "--out", str(out / "eval"), "--episodes", "3", "--batches", "2",
                        "--noise", "0.1", "--no-figures"]))
    rc.append(cli.main(["rollout", ckpt, "--out", str(out / "rollout"), "--posture", "tilted", "--no-figures"]))
    rc.append(cli.main(["ablate", "--out", str(out / "ablate"), "--seeds", "0", "1", "--episodes", "2"]
                       + TINY[:-3] + ["--no-figures"]))
    rc.append(cli.main(["check", "--quick", "--out", str(out / "checks.csv")]))
    return rc


def test_criterion_11_determinism(tmp_path, capsys):
    codes = [_run_all_commands(tmp_path / "a"), _run_all_commands(tmp_path / "b")]
    csvs = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    differing = [str(p) for p in csvs if (tmp_path / "a" / p).read_bytes() != (tmp_path / "b" / p).read_bytes()]
    missing = [str(p) for p in csvs if not (tmp_path / "b" / p).exists()]
    ok = codes[0] == codes[1] == [0] * 5 and not differing and not missing and len(csvs) >= 10
    report(11, ok, f"{len(csvs)} CSV files from train/eval/rollout/ablate/check compared, "
                   f"{len(differing)} differ")
    assert ok, differing or codes
