"""Recurrent actor-critic network.

Layout: one dense ReLU layer per input branch (Writhe block, Laplacian or
position block), a dense ReLU merge layer, an LSTM cell and three linear
heads: state value, action mean (tanh) and action standard deviation
(softplus).
"""
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import NonFiniteParams, ShapeMismatch


@dataclass(frozen=True)
class NetworkSpec:
    input_sizes: tuple
    branch_width: int = 128
    merge_width: int = 128
    lstm_width: int = 128
    action_dim: int = 14

    @property
    def obs_dim(self):
        return int(sum(self.input_sizes))

    def param_shapes(self):
        shapes = {}
        for k, n in enumerate(self.input_sizes):
            shapes[f"branch{k}.w"] = (n, self.branch_width)
            shapes[f"branch{k}.b"] = (self.branch_width,)
        shapes["merge.w"] = (self.branch_width * len(self.input_sizes), self.merge_width)
        shapes["merge.b"] = (self.merge_width,)
        H = self.lstm_width
        shapes["lstm.wx"] = (self.merge_width, 4 * H)
        shapes["lstm.wh"] = (H, 4 * H)
        shapes["lstm.b"] = (4 * H,)
        shapes["value.w"] = (H, 1)
        shapes["value.b"] = (1,)
        shapes["mean.w"] = (H, self.action_dim)
        shapes["mean.b"] = (self.action_dim,)
        shapes["std.w"] = (H, self.action_dim)
        shapes["std.b"] = (self.action_dim,)
        return shapes


def orthogonal(shape, gain, rng):
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_params(spec, seed=0, init_std=None):
    """Orthogonal weights (gain sqrt(2) before ReLUs, 1 elsewhere), zero biases.

    The action heads start near zero (gain 0.01).  With ``init_std`` the std
    bias is set so the initial std is ``init_std`` in every dimension; by
    default it is zero, i.e. softplus(0).
    """
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in spec.param_shapes().items():
        if len(shape) == 1:
            params[name] = np.zeros(shape)
            continue
        gain = np.sqrt(2.0) if name.startswith(("branch", "merge")) else 1.0
        if name in ("mean.w", "std.w"):
            gain = 0.01
        if name in ("lstm.wx", "lstm.wh"):
            # one orthogonal block per gate
            H = spec.lstm_width
            params[name] = np.hstack([orthogonal((shape[0], H), gain, rng) for _ in range(4)])
        else:
            params[name] = orthogonal(shape, gain, rng)
    if init_std is not None:
        if not init_std > 0:
            raise ValueError("init_std must be positive")
        params["std.b"] = np.full(spec.action_dim, float(np.log(np.expm1(init_std))))
    return params


def zero_hidden(spec, batch=1, dtype=float):
    return np.zeros((batch, spec.lstm_width), dtype=dtype), np.zeros((batch, spec.lstm_width), dtype=dtype)


def check_params(spec, params):
    for name, shape in spec.param_shapes().items():
        if name not in params:
            raise ShapeMismatch(f"missing parameter {name!r}")
        arr = params[name].data if isinstance(params[name], ad.Tensor) else params[name]
        if arr.shape != shape:
            raise ShapeMismatch(f"parameter {name!r} has shape {arr.shape}, expected {shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteParams(f"parameter {name!r} has non-finite entries")


def _t(x):
    return x if isinstance(x, ad.Tensor) else ad.Tensor(np.asarray(x))


def step(spec, params, obs, hidden):
    """One recurrent step.

    ``params`` maps names to arrays or :class:`~topowam.autodiff.Tensor`;
    ``obs`` is ``(batch, obs_dim)`` and ``hidden`` a pair ``(h, c)``.
    Returns Tensors ``(value, mean, std, (h, c))``.
    """
    P = {k: _t(v) for k, v in params.items()}
    obs = _t(obs)
    if obs.shape[-1] != spec.obs_dim:
        raise ShapeMismatch(f"observation has {obs.shape[-1]} entries, network expects {spec.obs_dim}")
    h, c = (_t(x) for x in hidden)
    feats = []
    start = 0
    for k, n in enumerate(spec.input_sizes):
        x = obs[:, start:start + n]
        start += n
        feats.append((x @ P[f"branch{k}.w"] + P[f"branch{k}.b"]).relu())
    base = feats[0] if len(feats) == 1 else ad.concat(feats, axis=1)
    m = (base @ P["merge.w"] + P["merge.b"]).relu()
    H = spec.lstm_width
    z = m @ P["lstm.wx"] + h @ P["lstm.wh"] + P["lstm.b"]
    i = z[:, :H].sigmoid()
    f = z[:, H:2 * H].sigmoid()
    g = z[:, 2 * H:3 * H].tanh()
    o = z[:, 3 * H:].sigmoid()
    c = f * c + i * g
    h = o * c.tanh()
    value = (h @ P["value.w"] + P["value.b"])[:, 0]
    mean = (h @ P["mean.w"] + P["mean.b"]).tanh()
    std = (h @ P["std.w"] + P["std.b"]).softplus()
    return value, mean, std, (h, c)


def forward(spec, params, observation, hidden=None):
    """Single-observation convenience wrapper returning plain arrays."""
    obs = np.asarray(observation, dtype=float).reshape(1, -1)
    if hidden is None:
        hidden = zero_hidden(spec)
    check_params(spec, params)
    value, mean, std, (h, c) = step(spec, params, obs, hidden)
    return float(value.data[0]), mean.data[0], std.data[0], (h.data, c.data)


def unroll(spec, params, obs_seq, hidden=None):
    """Run ``(batch, T, obs_dim)`` sequences from ``hidden`` (zeros by default).

    Returns Tensors of shape ``(batch, T)`` for values and ``(batch, T, A)``
    for means and standard deviations.
    """
    B, T, _ = obs_seq.shape
    if hidden is None:
        hidden = zero_hidden(spec, B, dtype=np.result_type(obs_seq.dtype, float))
    values, means, stds = [], [], []
    for t in range(T):
        v, mu, sd, hidden = step(spec, params, obs_seq[:, t, :], hidden)
        values.append(v)
        means.append(mu)
        stds.append(sd)
    return ad.stack(values, axis=1), ad.stack(means, axis=1), ad.stack(stds, axis=1)
