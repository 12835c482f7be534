"""Run orchestration behind the command-line verbs.

Every CSV file carries ``config_hash``, ``code_version`` and ``format_version``
columns; JSONL transcripts start with a metadata record carrying the same
fields.  Wall-clock timings go to ``timing.jsonl`` only, so the CSV outputs of
two identical runs are byte-identical.
"""
import csv
import json
import os
import time

import numpy as np

from . import __version__
from .body import CURVE_ORDER
from .config import RunConfig, save_config
from .env import EnvConfig, WamEnv
from .errors import CheckpointMismatch
from .topology import scene_linking
from .trainer import EVAL_STREAM, Trainer, load_checkpoint, load_policy, run_episode, save_checkpoint

FORMAT_VERSION = 1
SMOOTH_WINDOW = 10


def stamp(config_hash):
    return {"config_hash": config_hash, "code_version": __version__, "format_version": FORMAT_VERSION}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


class CsvLog:
    """Append-only CSV writer with a fixed header and provenance columns."""

    def __init__(self, path, columns, config_hash, append=False):
        self.columns = list(columns)
        self.extra = stamp(config_hash)
        header = self.columns + list(self.extra)
        exists = append and os.path.exists(path)
        self.fh = open(path, "a" if exists else "w", newline="")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        if not exists:
            self.writer.writerow(header)

    def write(self, row):
        self.writer.writerow([_fmt(row[c]) for c in self.columns] + list(self.extra.values()))
        self.fh.flush()

    def close(self):
        self.fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv(path, columns, rows, config_hash):
    with CsvLog(path, columns, config_hash) as log:
        for row in rows:
            log.write(row)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def smooth(values, window=SMOOTH_WINDOW):
    """Centered moving average over ``window`` neighbouring points (truncated at the ends)."""
    x = np.asarray(values, dtype=float)
    out = np.empty_like(x)
    lo_off = window // 2
    hi_off = window - lo_off
    for i in range(len(x)):
        out[i] = x[max(0, i - lo_off):min(len(x), i + hi_off)].mean()
    return out


# --- train ---------------------------------------------------------------------

EPISODE_COLUMNS = ("episode", "mean_reward", "final_gamma", "success", "loss", "entropy")
EVAL_COLUMNS = ("episode", "greedy_final_gamma", "greedy_success", "greedy_mean_reward")


def train(config: RunConfig, out_dir=None, resume=False, progress=None, figures=True):
    """Train to the episode budget; returns the output directory.

    Writes ``config.json``, ``episodes.csv``, ``evals.csv``, checkpoints under
    ``checkpoints/`` (plus ``final.npz``) and ``timing.jsonl``.  With
    ``resume`` the run continues from ``checkpoints/latest.npz``.
    """
    out_dir = out_dir or os.path.join(config.run.output_dir, config.run.run_id)
    ckpt_dir = os.path.join(out_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)
    latest = os.path.join(ckpt_dir, "latest.npz")
    h = config.hash
    if resume and os.path.exists(latest):
        trainer = Trainer.load(latest)
        meta, _ = load_checkpoint(latest)
        if meta.get("run_hash") != h:
            raise CheckpointMismatch("checkpoint was written by a different configuration")
        # episode rows are 0-based; eval rows are stamped with the episode count
        _truncate_csv(os.path.join(out_dir, "episodes.csv"), trainer.episode)
        _truncate_csv(os.path.join(out_dir, "evals.csv"), trainer.episode + 1)
    else:
        resume = False
        trainer = Trainer(config.env, config.train)
    save_config(config, os.path.join(out_dir, "config.json"))

    def checkpoint(name):
        meta = trainer.metadata()
        meta["run_hash"] = h
        save_checkpoint(os.path.join(ckpt_dir, name), meta, trainer.state_arrays())

    episodes = CsvLog(os.path.join(out_dir, "episodes.csv"), EPISODE_COLUMNS, h, append=resume)
    evals = CsvLog(os.path.join(out_dir, "evals.csv"), EVAL_COLUMNS, h, append=resume)
    timing = open(os.path.join(out_dir, "timing.jsonl"), "a" if resume else "w")
    if not resume:
        checkpoint("initial.npz")
        checkpoint("latest.npz")
    start = time.perf_counter()
    try:
        while trainer.episode < config.run.episodes:
            row = trainer.train_episode()
            episodes.write(row)
            ep = trainer.episode
            timing.write(json.dumps({"episode": row["episode"], "wall_time": time.perf_counter() - start}) + "\n")
            if ep % config.run.eval_every == 0:
                out = trainer.online_eval()
                evals.write({"episode": ep, "greedy_final_gamma": out.final_gamma,
                             "greedy_success": int(out.success), "greedy_mean_reward": out.mean_reward})
            if ep % config.run.checkpoint_every == 0 or ep == config.run.episodes:
                checkpoint("latest.npz")
            if progress is not None:
                progress(row)
    finally:
        episodes.close()
        evals.close()
        timing.close()
    checkpoint("final.npz")
    if figures:
        from .report import plot_training
        plot_training(read_csv(os.path.join(out_dir, "episodes.csv")), read_csv(os.path.join(out_dir, "evals.csv")),
                      os.path.join(out_dir, "training.png"), smooth)
    return out_dir


def _truncate_csv(path, limit):
    """Drop rows whose first column is >= ``limit`` (written after the checkpoint)."""
    if not os.path.exists(path):
        return
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return
    keep = [rows[0]] + [r for r in rows[1:] if int(r[0]) < limit]
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(keep)


# --- eval ----------------------------------------------------------------------


def _eval_env_config(meta, preset=None, noise=None, posture=None, tilt=None, scenario=None, input_space=None):
    cfg = dict(meta["env_config"])
    if scenario is not None and scenario != cfg["scenario"]:
        raise CheckpointMismatch(f"checkpoint scenario is {cfg['scenario']!r}, requested {scenario!r}")
    if input_space is not None and input_space != cfg["input_space"]:
        raise CheckpointMismatch(f"checkpoint input space is {cfg['input_space']!r}, requested {input_space!r}")
    for key, value in (("preset", preset), ("noise_sigma", noise), ("posture", posture), ("tilt", tilt)):
        if value is not None:
            cfg[key] = value
    return EnvConfig(**cfg)


def evaluate(checkpoint, out_dir, preset=None, noise=None, episodes=100, batches=1, seed=0,
             posture=None, tilt=None, scenario=None, input_space=None, figures=True):
    """Greedy evaluation: per-batch success rates and the per-step Γ profile.

    Returns a summary dict.  Writes ``eval_batches.csv``, ``eval_steps.csv``
    and, with ``figures``, ``eval_gamma.png``.
    """
    meta, spec, params, norm = load_policy(checkpoint)
    env_config = _eval_env_config(meta, preset, noise, posture, tilt, scenario, input_space)
    env = WamEnv(env_config)
    h = meta["config_hash"]
    os.makedirs(out_dir, exist_ok=True)
    gammas = []
    rates = []
    batch_rows = []
    for b in range(batches):
        finals = []
        for i in range(episodes):
            out = run_episode(env, spec, params, [seed, EVAL_STREAM, b, i], greedy=True, norm=norm)
            gammas.append(out.gammas)
            finals.append(out.final_gamma)
        finals = np.array(finals)
        rate = float(np.mean(finals > env_config.success_threshold))
        rates.append(rate)
        batch_rows.append({"batch": b, "episodes": episodes, "success_rate": rate,
                           "mean_final_gamma": float(finals.mean())})
    gammas = np.array(gammas)
    write_csv(os.path.join(out_dir, "eval_batches.csv"),
              ("batch", "episodes", "success_rate", "mean_final_gamma"), batch_rows, h)
    step_rows = _step_profile(gammas)
    write_csv(os.path.join(out_dir, "eval_steps.csv"), ("step", "mean_gamma", "ci_low", "ci_high", "std_gamma"),
              step_rows, h)
    if figures:
        from .report import plot_gamma_profile
        plot_gamma_profile(step_rows, os.path.join(out_dir, "eval_gamma.png"),
                           title=f"{env_config.preset}, sigma={env_config.noise_sigma:g} m")
    return {
        "success_rate_mean": float(np.mean(rates)),
        "success_rate_std": float(np.std(rates)),
        "mean_final_gamma": float(gammas[:, -1].mean()),
        "step_mean_gamma": [r["mean_gamma"] for r in step_rows],
    }


def _step_profile(gammas):
    """Mean Γ per step with a normal-approximation 95% confidence band."""
    n = gammas.shape[0]
    rows = []
    for t in range(gammas.shape[1]):
        col = gammas[:, t]
        sd = float(col.std(ddof=1)) if n > 1 else 0.0
        half = 1.96 * sd / np.sqrt(n)
        m = float(col.mean())
        rows.append({"step": t, "mean_gamma": m, "ci_low": m - half, "ci_high": m + half, "std_gamma": sd})
    return rows


# --- ablate --------------------------------------------------------------------

VARIANTS = ("WL", "W", "P")


def ablate(config: RunConfig, seeds, out_dir, eval_episodes=None, figures=True, progress=None, resume=False):
    """Train every input-space variant for each seed and compare them.

    With ``resume`` each run continues from its latest checkpoint, so runs
    that already reached the episode budget are not trained again.

    Writes ``ablation_curves.csv`` (raw and smoothed per-episode mean reward
    for each variant and seed, plus the across-seed mean) and
    ``ablation_summary.csv`` (final smoothed reward and greedy success rate).
    """
    from dataclasses import replace

    if len(seeds) < 2:
        raise ValueError("ablation needs at least two seeds")
    eval_episodes = eval_episodes or config.run.eval_episodes
    os.makedirs(out_dir, exist_ok=True)
    h = config.hash
    curves = {}
    summary = []
    for variant in VARIANTS:
        for seed in seeds:
            cfg = RunConfig(env=replace(config.env, input_space=variant, seed=seed),
                            train=replace(config.train, seed=seed),
                            run=replace(config.run, run_id=f"{variant}_seed{seed}"))
            run_dir = train(cfg, os.path.join(out_dir, cfg.run.run_id), resume=resume, progress=progress,
                            figures=figures)
            rewards = [float(r["mean_reward"]) for r in read_csv(os.path.join(run_dir, "episodes.csv"))]
            curves[(variant, seed)] = np.array(rewards)
            ev = evaluate(os.path.join(run_dir, "checkpoints", "final.npz"), os.path.join(run_dir, "eval"),
                          episodes=eval_episodes, seed=seed, figures=False)
            sm = smooth(rewards) if rewards else np.array([np.nan])
            summary.append({"variant": variant, "seed": seed, "final_smoothed_reward": float(sm[-1]),
                            "success_rate": ev["success_rate_mean"], "mean_final_gamma": ev["mean_final_gamma"]})
    rows = []
    for variant in VARIANTS:
        per_seed = [curves[(variant, s)] for s in seeds]
        for seed, raw in zip(seeds, per_seed):
            for i, (r, s) in enumerate(zip(raw, smooth(raw))):
                rows.append({"variant": variant, "seed": str(seed), "episode": i, "reward": r, "smoothed": s})
        if per_seed and len(per_seed[0]):
            mean = np.mean(per_seed, axis=0)
            for i, (r, s) in enumerate(zip(mean, smooth(mean))):
                rows.append({"variant": variant, "seed": "mean", "episode": i, "reward": r, "smoothed": s})
    write_csv(os.path.join(out_dir, "ablation_curves.csv"), ("variant", "seed", "episode", "reward", "smoothed"),
              rows, h)
    write_csv(os.path.join(out_dir, "ablation_summary.csv"),
              ("variant", "seed", "final_smoothed_reward", "success_rate", "mean_final_gamma"), summary, h)
    if figures:
        from .report import plot_ablation
        plot_ablation(rows, os.path.join(out_dir, "ablation_rewards.png"))
    return summary


# --- rollout -------------------------------------------------------------------


def rollout(checkpoint, out_dir, preset=None, posture=None, tilt=None, seed=0, noise=None, figures=True):
    """Replay one greedy episode and write a per-step JSONL transcript.

    Each step record holds the joint vector, all curve vertices, the Writhe
    matrix, Γ and the reward terms.  Also writes ``rollout_steps.csv``.
    """
    meta, spec, params, norm = load_policy(checkpoint)
    env_config = _eval_env_config(meta, preset, noise, posture, tilt)
    env = WamEnv(env_config)
    h = meta["config_hash"]
    os.makedirs(out_dir, exist_ok=True)
    records = []

    def snapshot(t, env, info=None, reward=None):
        curves = env.scene.curves(env.state)
        W, gamma, _ = scene_linking(curves, curves, env_config.scenario, strict=False)
        rec = {"step": t, "joints": env.state.joints.tolist(),
               "curves": {k: curves[k].tolist() for k in CURVE_ORDER},
               "writhe": W.tolist(), "gamma": gamma}
        if info is not None:
            rec.update(reward=reward, delta=info["delta"], z_r=info["z_r"], z_l=info["z_l"],
                       executed_fraction=info["executed_fraction"], success=bool(info["success"]))
        records.append(rec)

    def observer(t, env, result):
        snapshot(t, env, result.info, result.reward)

    out = run_episode(env, spec, params, [seed, EVAL_STREAM, 0, 0], greedy=True, norm=norm, observer=observer)
    path = os.path.join(out_dir, "transcript.jsonl")
    with open(path, "w") as fh:
        head = {"record": "header", **stamp(h), "env_config": env_config.to_dict(), "seed": seed}
        fh.write(json.dumps(head, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps({"record": "step", **rec}, sort_keys=True) + "\n")
    write_csv(os.path.join(out_dir, "rollout_steps.csv"),
              ("step", "gamma", "reward", "delta", "z_r", "z_l", "executed_fraction"), records, h)
    if figures:
        from .report import plot_rollout
        plot_rollout(records, env_config.scenario, os.path.join(out_dir, "rollout_final.png"))
    return {"final_gamma": float(out.final_gamma), "success": bool(out.success), "steps": len(records), "transcript": path}
