"""Proximal policy optimisation for the recurrent actor-critic.

Loss per update (minimised)::

    c1 * mean((R - V)^2) - mean(min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)) - c2 * mean(H)

with ``rho = exp(log pi_new - log pi_old)``, Monte-Carlo returns ``R`` and
advantages ``A = R - V_old``.  Sequences are re-unrolled from a zero hidden
state, so gradients flow through the full episode.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, NonFiniteGradient, NonPositiveStd
from .network import unroll

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    gamma: float = 0.99
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    clip_ratio: float = 0.2
    updates_per_episode: int = 4
    window: int = 4
    # episodes collected with one parameter snapshot before each round of updates
    episodes_per_batch: int = 1
    # "pooled": every update uses all windowed episodes; "per_episode": one update per episode
    update_mode: str = "pooled"
    branch_width: int = 128
    merge_width: int = 128
    lstm_width: int = 128
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    normalize_obs: bool = False
    # advantage standardisation: "batch" over the whole update batch, "per_step"
    # across episodes at each time step (a per-step baseline), or "none"
    advantage_norm: str = "batch"
    # multiplier applied to rewards inside the learner only (value targets and advantages)
    reward_scale: float = 1.0
    # initial action std per dimension (None: softplus(0) from a zero bias)
    init_std: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.clip_ratio <= 0:
            raise ConfigError("clip_ratio must be positive")
        if self.advantage_norm not in ("none", "batch", "per_step"):
            raise ConfigError(f"unknown advantage_norm {self.advantage_norm!r}")
        if self.update_mode not in ("pooled", "per_episode"):
            raise ConfigError(f"unknown update_mode {self.update_mode!r}")
        if min(self.updates_per_episode, self.window, self.episodes_per_batch, self.branch_width, self.merge_width, self.lstm_width) < 1:
            raise ConfigError("update counts and network widths must be >= 1")
        if not self.learning_rate > 0 or not 0 <= self.gamma <= 1:
            raise ConfigError("learning_rate must be positive and gamma in [0, 1]")
        if self.init_std is not None and not self.init_std > 0:
            raise ConfigError("init_std must be positive")
        if not self.reward_scale > 0:
            raise ConfigError("reward_scale must be positive")


# --- Gaussian policy helpers ---------------------------------------------------


def gaussian_log_prob(action, mean, std):
    z = (action - mean) / std
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(np.log(std), axis=-1) - 0.5 * mean.shape[-1] * LOG_2PI


def gaussian_entropy(std):
    return np.sum(0.5 * (1.0 + LOG_2PI) + np.log(std), axis=-1)


def sample_action(mean, std, rng, greedy=False):
    """Draw from the diagonal Gaussian; ``greedy`` returns the mean itself."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    if np.any(std <= 0):
        raise NonPositiveStd("standard deviation must be positive")
    action = mean.copy() if greedy else mean + std * rng.standard_normal(mean.shape)
    return action, float(gaussian_log_prob(action, mean, std))


def compute_returns(rewards, gamma):
    rewards = np.asarray(rewards, dtype=float)
    out = np.zeros_like(rewards)
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + gamma * running
        out[t] = running
    return out


# --- trajectories ------------------------------------------------------------


@dataclass
class EpisodeTrajectory:
    observations: list = field(default_factory=list)
    hidden: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    values: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    dones: list = field(default_factory=list)

    def append(self, obs, hidden, action, log_prob, value, reward, done):
        self.observations.append(np.asarray(obs, dtype=float))
        self.hidden.append((hidden[0].copy(), hidden[1].copy()))
        self.actions.append(np.asarray(action, dtype=float))
        self.log_probs.append(float(log_prob))
        self.values.append(float(value))
        self.rewards.append(float(reward))
        self.dones.append(bool(done))

    def __len__(self):
        return len(self.rewards)


@dataclass
class Batch:
    obs: np.ndarray        # (B, T, D)
    actions: np.ndarray    # (B, T, A)
    old_log_probs: np.ndarray
    returns: np.ndarray
    advantages: np.ndarray


def make_batch(trajectories, gamma, reward_scale=1.0):
    lengths = {len(t) for t in trajectories}
    if len(lengths) != 1 or 0 in lengths:
        raise ValueError("batch needs nonempty episodes of equal length")
    returns = np.array([compute_returns(np.asarray(t.rewards) * reward_scale, gamma) for t in trajectories])
    values = np.array([t.values for t in trajectories])
    return Batch(
        obs=np.array([t.observations for t in trajectories]),
        actions=np.array([t.actions for t in trajectories]),
        old_log_probs=np.array([t.log_probs for t in trajectories]),
        returns=returns,
        advantages=returns - values,
    )


def normalize_advantages(adv, mode):
    """Standardise an ``(episodes, steps)`` advantage array according to ``mode``."""
    adv = np.asarray(adv, dtype=float)
    if mode == "batch" and adv.size > 1:
        return (adv - adv.mean()) / (adv.std() + 1e-8)
    if mode == "per_step" and adv.shape[0] > 1:
        return (adv - adv.mean(axis=0)) / (adv.std(axis=0) + 1e-8)
    return adv


# --- loss ------------------------------------------------------------------


def ppo_loss(spec, params, batch, config):
    """Scalar loss Tensor and a report of its components."""
    values, mean, std = unroll(spec, params, batch.obs)
    z = (ad.as_tensor(batch.actions) - mean) / std
    log_std = std.log()
    A = mean.shape[-1]
    log_prob = (z.square() * -0.5).sum(axis=-1) - log_std.sum(axis=-1) - 0.5 * A * LOG_2PI
    ratio = (log_prob - batch.old_log_probs).exp()
    adv = normalize_advantages(batch.advantages, config.advantage_norm)
    eps = config.clip_ratio
    surrogate = ad.minimum(ratio * adv, ratio.clip(1.0 - eps, 1.0 + eps) * adv).mean()
    value_loss = (values - batch.returns).square().mean()
    entropy = (log_std.sum(axis=-1) + 0.5 * A * (1.0 + LOG_2PI)).mean()
    loss = value_loss * config.value_coef - surrogate - entropy * config.entropy_coef
    report = {
        "loss": float(loss.data),
        "value_loss": float(value_loss.data),
        "surrogate": float(surrogate.data),
        "entropy": float(entropy.data),
        "clip_fraction": float(np.mean(np.abs(ratio.data - 1.0) > eps)),
    }
    return loss, report


def loss_and_grads(spec, params, batch, config):
    tensors = {k: ad.parameter(v, name=k) for k, v in params.items()}
    loss, report = ppo_loss(spec, tensors, batch, config)
    loss.backward()
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in tensors.items()}
    return report, grads


class Adam:
    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.lr * np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        out = {}
        for k, p in params.items():
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            out[k] = p - lr_t * self.m[k] / (np.sqrt(self.v[k]) + self.eps)
        return out

    def state_dict(self):
        return {"t": self.t, "m": self.m, "v": self.v}

    def load_state_dict(self, state):
        self.t = int(state["t"])
        self.m = {k: np.array(v) for k, v in state["m"].items()}
        self.v = {k: np.array(v) for k, v in state["v"].items()}


def ppo_update(spec, params, optimizer, batch, config):
    """One Adam step on the PPO loss.  Returns ``(new_params, report)``."""
    report, grads = loss_and_grads(spec, params, batch, config)
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(k)
    return optimizer.step(params, grads), report


# --- flat parameter views and gradient checking -----------------------------------


def flatten(params):
    return np.concatenate([np.ravel(params[k]) for k in sorted(params)])


def unflatten(flat, like):
    out = {}
    start = 0
    for k in sorted(like):
        n = np.size(like[k])
        out[k] = flat[start:start + n].reshape(np.shape(like[k]))
        start += n
    return out


def gradient_check(params, loss_fn, eps_fd=1e-5, n_samples=200, seed=0, extended=True):
    """Maximum relative error between reverse-mode and central-difference gradients.

    ``loss_fn`` maps a dict of parameter Tensors (or arrays) to a scalar Tensor.
    The finite-difference side is evaluated in extended precision when
    ``extended`` is set, which keeps its rounding error far below the step.
    Relative error: ``|a - b| / max(1e-8, |a| + |b|)``.
    """
    from .oracle import finite_diff

    tensors = {k: ad.parameter(v, name=k) for k, v in params.items()}
    loss_fn(tensors).backward()
    analytic = flatten({k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in tensors.items()})

    rng = np.random.default_rng(seed)
    flat = flatten(params)
    idx = rng.choice(flat.size, size=min(n_samples, flat.size), replace=False)
    dtype = np.longdouble if extended else float

    def scalar_loss(theta):
        arrays = unflatten(theta, params)
        return loss_fn({k: ad.Tensor(v) for k, v in arrays.items()}).data

    numeric = finite_diff(scalar_loss, flat.astype(dtype), idx, step=eps_fd).astype(float)
    a = analytic[idx]
    rel = np.abs(a - numeric) / np.maximum(1e-8, np.abs(a) + np.abs(numeric))
    return float(rel.max())
