"""Episodic kinematic environment for learning whole-arm holds.

One step: the 14 joint-angle deltas (scaled actions) are applied by setting
the joints directly, shortened by bisection if the arms would sink more than
1 cm into the torso; then the humanoid advances one step of its vertical
oscillation.  The reward combines total linking, its last increment and a
penalty for arms held above the shoulders.

Observations are built from curve vertices perturbed by Gaussian noise
(``noise_sigma``); reward and success always use the noiseless state.
"""
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import body
from .delaunay import delaunay_edges
from .errors import ConfigError, NonFiniteAction
from .topology import laplacian_coords, scene_linking, segment_distance

INPUT_SPACES = ("WL", "W", "P")
WRITHE_SIZE = {"upright": 20 * 14, "horizontal": 15 * 14}
LANDMARK_SIZE = {"upright": 38 * 3, "horizontal": 49 * 3}


@dataclass
class EnvConfig:
    scenario: str = "upright"
    preset: str = "standard"
    posture: str = ""            # empty: the scenario's default posture
    tilt: float = 0.0            # radians, for the tilted posture
    spawn_half_width: float = 0.20
    oscillation_peak_to_peak: float = 0.25
    oscillation_period: float = 16.0
    step_duration: float = 2.0
    t_max: int = 10
    action_scale: float = 0.3
    noise_sigma: float = 0.0
    input_space: str = "WL"
    beta1: float = 5.0
    beta2: float = 1.0
    gamma_ref: float = 1.5
    success_threshold: float = 1.5
    penetration_tolerance: float = 0.01
    freeze_graph_at_reset: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in WRITHE_SIZE:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.input_space not in INPUT_SPACES:
            raise ConfigError(f"unknown input space {self.input_space!r}")
        if self.t_max < 1:
            raise ConfigError("t_max must be >= 1")
        positive = ("spawn_half_width", "oscillation_period", "step_duration", "action_scale")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("oscillation_peak_to_peak", "noise_sigma", "penetration_tolerance"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    @property
    def resolved_posture(self):
        if self.posture:
            return self.posture
        return "horizontal" if self.scenario == "horizontal" else "upright"

    def input_sizes(self):
        w, l = WRITHE_SIZE[self.scenario], LANDMARK_SIZE[self.scenario]
        return {"WL": (w, l), "W": (w,), "P": (l,)}[self.input_space]

    @property
    def obs_dim(self):
        return sum(self.input_sizes())

    def to_dict(self):
        return asdict(self)


@dataclass
class EnvState:
    joints: np.ndarray
    spawn: np.ndarray            # humanoid base position without oscillation offset
    phase: float
    t: int
    prev_gamma: float
    edges: np.ndarray = field(default=None, repr=False)  # frozen Laplacian graph, if any

    def copy(self):
        return replace(self, joints=self.joints.copy(), spawn=self.spawn.copy())


class Scene:
    """Static scene description shared by all states of an environment."""

    def __init__(self, config, table=None):
        self.config = config
        self.table = table or body.load_model_table()
        self.robot = body.robot_model(self.table)
        self.humanoid = body.humanoid_model(config.preset, self.table)
        self.stance = np.array(self.table["scene"][config.scenario]["stance"], dtype=float)
        self._canonical = body.canonical_humanoid_curves(self.humanoid)

    def pose(self, state):
        cfg = self.config
        offset = 0.5 * cfg.oscillation_peak_to_peak * np.sin(state.phase)
        return body.HumanoidPose(position=state.spawn + np.array([0.0, 0.0, offset]),
                                 posture=cfg.resolved_posture, tilt=cfg.tilt)

    def humanoid_curves(self, pose):
        R = pose.rotation
        t = np.asarray(pose.position, dtype=float)
        return {k: v @ R.T + t for k, v in self._canonical.items()}

    def robot_curves(self, joints):
        return body.robot_curves(self.robot, joints, check=False)

    def curves(self, state):
        return body.curve_set(self.robot_curves(state.joints), self.humanoid_curves(self.pose(state)))

    def penetration(self, robot_curves, pose):
        """Deepest overlap (m) of any arm capsule with the torso capsules."""
        starts, ends, r_torso = body.torso_capsules(self.humanoid, pose)
        worst = -np.inf
        for name, arm in (("r_r", self.robot.right), ("r_l", self.robot.left)):
            p = robot_curves[name]
            d = segment_distance(p[:-1, None], p[1:, None], starts[None], ends[None])
            worst = max(worst, float((arm.capsule_radius + r_torso - d).max()))
        return worst


def total_gamma(scene, curves):
    return scene_linking(curves, curves, scene.config.scenario, strict=False)[1]


def linking(scene, curves):
    """``(W, gamma, saturated)`` for a scene's curves."""
    return scene_linking(curves, curves, scene.config.scenario, strict=False)


def oscillate(phase, config):
    """Advance the oscillation phase by one environment step."""
    return phase + 2.0 * np.pi * config.step_duration / config.oscillation_period


def vertical_offset(phase, config):
    return 0.5 * config.oscillation_peak_to_peak * np.sin(phase)


def reset(scene, seed):
    """Fresh episode: rest joints, humanoid spawned uniformly in the square region."""
    cfg = scene.config
    rng = np.random.default_rng(seed)
    xy = rng.uniform(-cfg.spawn_half_width, cfg.spawn_half_width, size=2)
    spawn = scene.stance + np.array([xy[0], xy[1], 0.0])
    phase = float(rng.uniform(0.0, 2.0 * np.pi))
    state = EnvState(joints=scene.robot.rest_pose.copy(), spawn=spawn, phase=phase, t=0, prev_gamma=0.0)
    state.prev_gamma = total_gamma(scene, scene.curves(state))
    if cfg.freeze_graph_at_reset:
        state.edges = delaunay_edges(body.landmark_points(scene.curves(state), cfg.scenario))
    return state


def apply_action(scene, state, action):
    """Apply scaled joint deltas with the torso-penetration guard, then advance time.

    Returns ``(new_state, executed_fraction)``.
    """
    a = np.asarray(action, dtype=float)
    if a.shape != (14,) or not np.all(np.isfinite(a)):
        raise NonFiniteAction(f"action must be 14 finite values, got {a!r}")
    cfg = scene.config
    robot = scene.robot
    start = state.joints
    target = robot.clamp(start + cfg.action_scale * np.clip(a, -1.0, 1.0))
    pose = scene.pose(state)
    limit = max(cfg.penetration_tolerance, scene.penetration(scene.robot_curves(start), pose))

    def ok(frac):
        return scene.penetration(scene.robot_curves(start + frac * (target - start)), pose) <= limit

    frac = 1.0
    if not ok(1.0):
        lo, hi = 0.0, 1.0
        for _ in range(20):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
        frac = lo
    new = state.copy()
    new.joints = start + frac * (target - start)
    new.t = state.t + 1
    new.phase = oscillate(state.phase, cfg)
    return new, frac


def reward_terms(scene, curves, gamma_now, gamma_prev):
    """Reward and its decomposition for a post-step scene."""
    cfg = scene.config
    sh = body.shoulder_heights(curves)
    z_r = float(curves["r_r"][:, 2].mean() - sh["z_shoulder_r"])
    z_l = float(curves["r_l"][:, 2].mean() - sh["z_shoulder_l"])
    delta = gamma_now - gamma_prev
    linking_term = cfg.beta1 * (10.0 * delta + gamma_now - cfg.gamma_ref)
    height_term = cfg.beta2 * (max(0.0, z_r) + max(0.0, z_l))
    return linking_term - height_term, {
        "gamma": gamma_now, "delta": delta, "z_r": z_r, "z_l": z_l,
        "linking_term": linking_term, "height_term": height_term,
    }


def is_success(scene, state):
    return total_gamma(scene, scene.curves(state)) > scene.config.success_threshold


def observe(scene, state, rng=None, clean=None):
    """Observation vector and info (saturation flag, noisy linking).

    ``clean`` may carry the noiseless ``linking()`` result of ``state`` so it is
    not recomputed when no observation noise is configured.

    Layout: WL = Writhe (row-major, blocks in layout order) ++ Laplacian deltas
    (row-major, landmark order); W = Writhe only; P = landmark coordinates.
    """
    cfg = scene.config
    curves = scene.curves(state)
    if cfg.noise_sigma > 0:
        if rng is None:
            raise ValueError("a random generator is required when noise_sigma > 0")
        curves = {k: v + rng.normal(0.0, cfg.noise_sigma, size=v.shape) for k, v in curves.items()}
    info = {}
    parts = []
    if cfg.input_space in ("WL", "W"):
        if clean is not None and cfg.noise_sigma == 0:
            W, gamma, saturated = clean
        else:
            W, gamma, saturated = scene_linking(curves, curves, cfg.scenario, strict=False)
        parts.append(W.ravel())
        info["saturated"] = saturated
        info["observed_gamma"] = gamma
    if cfg.input_space in ("WL", "P"):
        L = body.landmark_points(curves, cfg.scenario)
        if cfg.input_space == "P":
            parts.append(L.ravel())
        else:
            edges = state.edges if state.edges is not None else delaunay_edges(L)
            parts.append(laplacian_coords(L, edges).deltas.ravel())
    return np.concatenate(parts), info


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


class WamEnv:
    """Gym-style wrapper: ``reset(seed) -> obs`` and ``step(action) -> StepResult``."""

    def __init__(self, config=None, table=None):
        self.config = config or EnvConfig()
        self.scene = Scene(self.config, table)
        self.state = None
        self._noise_rng = None

    @property
    def obs_dim(self):
        return self.config.obs_dim

    def reset(self, seed=None):
        seed = self.config.seed if seed is None else seed
        ss = np.random.SeedSequence(seed)
        spawn_seq, noise_seq = ss.spawn(2)
        self.state = reset(self.scene, spawn_seq)
        self._noise_rng = np.random.default_rng(noise_seq)
        obs, _ = observe(self.scene, self.state, self._noise_rng)
        return obs

    def gamma(self):
        return total_gamma(self.scene, self.scene.curves(self.state))

    def step(self, action):
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        if self.state.t >= self.config.t_max:
            raise RuntimeError("episode is over; call reset()")
        new, frac = apply_action(self.scene, self.state, action)
        curves = self.scene.curves(new)
        clean = linking(self.scene, curves)
        gamma_now = clean[1]
        reward, info = reward_terms(self.scene, curves, gamma_now, self.state.prev_gamma)
        new.prev_gamma = gamma_now
        self.state = new
        obs, obs_info = observe(self.scene, new, self._noise_rng, clean)
        done = new.t == self.config.t_max
        info.update(obs_info)
        info["executed_fraction"] = frac
        info["success"] = gamma_now > self.config.success_threshold
        return StepResult(obs, reward, done, info)
