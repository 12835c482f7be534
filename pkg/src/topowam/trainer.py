"""Episode collection, the PPO training loop and parameter checkpoints.

Seed splitting: training episode ``k`` resets the environment with entropy
``[seed, 0, k]``, online evaluation ``k`` with ``[seed, 1, k]`` and offline
evaluation episode ``i`` of batch ``b`` with ``[seed, 2, b, i]``.  Action
sampling draws from its own stream ``[seed, 3]``.
"""
import hashlib
import json
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .env import EnvConfig, WamEnv
from .errors import CheckpointMismatch
from .network import NetworkSpec, forward, init_params, zero_hidden
from .ppo import Adam, EpisodeTrajectory, TrainConfig, make_batch, ppo_update, sample_action

CHECKPOINT_FORMAT = 1
TRAIN_STREAM, ONLINE_STREAM, EVAL_STREAM, ACTION_STREAM = 0, 1, 2, 3


def config_hash(*parts):
    """Short stable digest of one or more config dicts."""
    blob = json.dumps([p if isinstance(p, dict) else asdict(p) for p in parts], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def network_spec(env_config, train_config):
    return NetworkSpec(
        input_sizes=tuple(env_config.input_sizes()),
        branch_width=train_config.branch_width,
        merge_width=train_config.merge_width,
        lstm_width=train_config.lstm_width,
    )


class RunningNorm:
    """Running mean/variance (Welford) for optional observation normalisation."""

    def __init__(self, dim):
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def update(self, x):
        self.count += 1
        d = x - self.mean
        self.mean = self.mean + d / self.count
        self.m2 = self.m2 + d * (x - self.mean)

    def __call__(self, x):
        if self.count < 2:
            return x - self.mean
        std = np.sqrt(self.m2 / (self.count - 1))
        return (x - self.mean) / np.maximum(std, 1e-6)


@dataclass
class EpisodeOutcome:
    trajectory: EpisodeTrajectory
    gammas: list           # noiseless Γ after reset and after every step
    final_gamma: float
    success: bool
    mean_reward: float


def run_episode(env, spec, params, env_seed, rng=None, greedy=False, norm=None, observer=None):
    """Roll out one episode.  ``rng`` is required unless ``greedy``.

    ``observer(t, env, result)`` is called after every step when given.
    """
    obs = env.reset(env_seed)
    hidden = zero_hidden(spec)
    traj = EpisodeTrajectory()
    gammas = [env.gamma()]
    done = False
    while not done:
        x = norm(obs) if norm is not None else obs
        value, mean, std, new_hidden = forward(spec, params, x, hidden)
        action, log_prob = sample_action(mean, std, rng, greedy=greedy)
        result = env.step(np.clip(action, -1.0, 1.0))
        traj.append(x, hidden, action, log_prob, value, result.reward, result.done)
        gammas.append(result.info["gamma"])
        if observer is not None:
            observer(env.state.t, env, result)
        hidden, obs, done = new_hidden, result.observation, result.done
    return EpisodeOutcome(traj, gammas, gammas[-1], gammas[-1] > env.config.success_threshold,
                          float(np.mean(traj.rewards)))


class Trainer:
    """Holds the policy, optimizer and replay window for one training run."""

    def __init__(self, env_config=None, train_config=None):
        self.env_config = env_config or EnvConfig()
        self.train_config = train_config or TrainConfig()
        self.env = WamEnv(self.env_config)
        self.spec = network_spec(self.env_config, self.train_config)
        tc = self.train_config
        self.params = init_params(self.spec, tc.seed, tc.init_std)
        self.optimizer = Adam(self.params, tc.learning_rate, tc.adam_beta1, tc.adam_beta2, tc.adam_eps)
        self.rng = np.random.default_rng(np.random.SeedSequence([tc.seed, ACTION_STREAM]))
        self.window = deque(maxlen=tc.window)
        self.norm = RunningNorm(self.spec.obs_dim) if tc.normalize_obs else None
        self.episode = 0
        self.last_report = None

    @property
    def hash(self):
        return config_hash(self.env_config, self.train_config)

    def _norm_for_rollout(self):
        if self.norm is None:
            return None
        norm = self.norm

        def apply(obs):
            norm.update(obs)
            return norm(obs)

        return apply

    def train_episode(self):
        """Collect one episode and run the configured PPO updates.  Returns a record row."""
        tc = self.train_config
        seed = [tc.seed, TRAIN_STREAM, self.episode]
        outcome = run_episode(self.env, self.spec, self.params, seed, self.rng, norm=self._norm_for_rollout())
        self.window.append(outcome.trajectory)
        if (self.episode + 1) % tc.episodes_per_batch == 0:
            self.last_report = self._update()
        self.episode += 1
        rep = self.last_report or {"loss": float("nan"), "entropy": float("nan")}
        return {
            "episode": self.episode - 1,
            "mean_reward": outcome.mean_reward,
            "final_gamma": outcome.final_gamma,
            "success": int(outcome.success),
            "loss": rep["loss"],
            "entropy": rep["entropy"],
        }

    def _update(self):
        tc = self.train_config
        reports = []
        if tc.update_mode == "pooled":
            batch = make_batch(list(self.window), tc.gamma, tc.reward_scale)
            for _ in range(tc.updates_per_episode):
                self.params, rep = ppo_update(self.spec, self.params, self.optimizer, batch, tc)
                reports.append(rep)
        else:
            for traj in list(self.window)[-tc.updates_per_episode:]:
                batch = make_batch([traj], tc.gamma, tc.reward_scale)
                self.params, rep = ppo_update(self.spec, self.params, self.optimizer, batch, tc)
                reports.append(rep)
        return {k: reports[-1][k] for k in ("loss", "entropy")}

    def frozen_norm(self):
        if self.norm is None:
            return None
        return self.norm.__call__

    def online_eval(self):
        """Greedy episode on the online-evaluation seed stream."""
        seed = [self.train_config.seed, ONLINE_STREAM, self.episode]
        out = run_episode(self.env, self.spec, self.params, seed, greedy=True, norm=self.frozen_norm())
        return out

    # --- checkpoints ---------------------------------------------------------

    def state_arrays(self):
        arrays = {f"param/{k}": v for k, v in self.params.items()}
        arrays.update({f"adam_m/{k}": v for k, v in self.optimizer.m.items()})
        arrays.update({f"adam_v/{k}": v for k, v in self.optimizer.v.items()})
        for i, traj in enumerate(self.window):
            arrays[f"window/{i}/obs"] = np.array(traj.observations)
            arrays[f"window/{i}/actions"] = np.array(traj.actions)
            arrays[f"window/{i}/log_probs"] = np.array(traj.log_probs)
            arrays[f"window/{i}/values"] = np.array(traj.values)
            arrays[f"window/{i}/rewards"] = np.array(traj.rewards)
        if self.norm is not None:
            arrays["norm/mean"] = self.norm.mean
            arrays["norm/m2"] = self.norm.m2
        return arrays

    def metadata(self):
        return {
            "format_version": CHECKPOINT_FORMAT,
            "code_version": __version__,
            "config_hash": self.hash,
            "env_config": asdict(self.env_config),
            "train_config": asdict(self.train_config),
            "episode": self.episode,
            "adam_t": self.optimizer.t,
            "window_size": len(self.window),
            "norm_count": self.norm.count if self.norm is not None else 0,
            "last_report": self.last_report,
            "rng_state": self.rng.bit_generator.state,
            "shapes": {k: list(v) for k, v in self.spec.param_shapes().items()},
        }

    def save(self, path):
        save_checkpoint(path, self.metadata(), self.state_arrays())

    @classmethod
    def load(cls, path, expect_hash=None):
        meta, arrays = load_checkpoint(path)
        if expect_hash is not None and meta["config_hash"] != expect_hash:
            raise CheckpointMismatch(f"checkpoint config hash {meta['config_hash']} != {expect_hash}")
        trainer = cls(EnvConfig(**meta["env_config"]), TrainConfig(**meta["train_config"]))
        trainer.restore(meta, arrays)
        return trainer

    def restore(self, meta, arrays):
        self.params = {k: arrays[f"param/{k}"] for k in self.params}
        self.optimizer.m = {k: arrays[f"adam_m/{k}"] for k in self.params}
        self.optimizer.v = {k: arrays[f"adam_v/{k}"] for k in self.params}
        self.optimizer.t = int(meta["adam_t"])
        self.episode = int(meta["episode"])
        self.last_report = meta.get("last_report")
        self.rng.bit_generator.state = meta["rng_state"]
        self.window.clear()
        for i in range(int(meta["window_size"])):
            traj = EpisodeTrajectory()
            traj.observations = list(arrays[f"window/{i}/obs"])
            traj.actions = list(arrays[f"window/{i}/actions"])
            traj.log_probs = arrays[f"window/{i}/log_probs"].tolist()
            traj.values = arrays[f"window/{i}/values"].tolist()
            traj.rewards = arrays[f"window/{i}/rewards"].tolist()
            traj.dones = [False] * (len(traj.rewards) - 1) + [True]
            self.window.append(traj)
        if self.norm is not None:
            self.norm.count = int(meta["norm_count"])
            self.norm.mean = arrays["norm/mean"]
            self.norm.m2 = arrays["norm/m2"]


# --- checkpoint files -------------------------------------------------------------


def save_checkpoint(path, metadata, arrays):
    """Write an ``.npz`` archive: arrays plus a JSON metadata blob."""
    payload = dict(arrays)
    payload["__meta__"] = np.frombuffer(json.dumps(metadata, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("format_version") != CHECKPOINT_FORMAT:
            raise CheckpointMismatch(f"unsupported checkpoint format {meta.get('format_version')!r}")
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
    return meta, arrays


def load_policy(path):
    """``(metadata, spec, params, norm)`` for evaluation from a checkpoint."""
    meta, arrays = load_checkpoint(path)
    env_config = EnvConfig(**meta["env_config"])
    train_config = TrainConfig(**meta["train_config"])
    spec = network_spec(env_config, train_config)
    params = {k: arrays[f"param/{k}"] for k in spec.param_shapes()}
    norm = None
    if train_config.normalize_obs:
        norm = RunningNorm(spec.obs_dim)
        norm.count, norm.mean, norm.m2 = int(meta["norm_count"]), arrays["norm/mean"], arrays["norm/m2"]
    return meta, spec, params, norm
