"""Kinematic body models that produce the abstract robot and humanoid curves.

Robot: two 7-joint serial arms.  Each arm curve has 8 points: the origin of
every link frame from the arm base to the tool mount.

Humanoid: a rigid skeleton described by a handful of dimensions.  Four
10-segment curves are produced in the humanoid frame (x facing direction,
y to the humanoid's left, z up, origin at the torso centre) and then posed:

* ``h_c``  - neck/torso centre line, top to bottom
* ``h_r``, ``h_l`` - right/left torso side through the shoulder, top to bottom
* ``h_arm`` - right elbow, right shoulder, left shoulder, left elbow

Model tables ship in ``data/models.json`` (SI units, versioned schema).
"""
import json
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .errors import InvalidDimensions, JointLimitViolation, ShapeMismatch

SCHEMA_VERSION = 1
CURVE_ORDER = ("r_r", "r_l", "h_c", "h_arm", "h_l", "h_r")
ROBOT_CURVES = ("r_r", "r_l")
HUMANOID_CURVES = ("h_c", "h_arm", "h_l", "h_r")
LANDMARK_CURVES = {
    "upright": ("r_r", "r_l", "h_c", "h_arm"),
    "horizontal": ("r_r", "r_l", "h_c", "h_l", "h_r"),
}
N_JOINTS = 7
# h_arm segments: 3 along each upper arm, 4 across the shoulders
ARM_SEGMENTS = (3, 4, 3)
RIGHT_SHOULDER_INDEX = 3
LEFT_SHOULDER_INDEX = 7


def load_model_table(path=None):
    """Read the model table; ``path=None`` loads the built-in file."""
    if path is None:
        text = resources.files("topowam").joinpath("data/models.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    table = json.loads(text)
    if table.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported model table schema {table.get('schema_version')!r}")
    return table


def rotation(axis, angle):
    """Rotation matrix about unit ``axis`` by ``angle`` (Rodrigues)."""
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


# --- robot -------------------------------------------------------------------


@dataclass
class ArmKinematicModel:
    axes: np.ndarray          # (7, 3) joint axes in the local link frame
    offsets: np.ndarray       # (7, 3) translation to the next point, local frame
    limits: np.ndarray        # (7, 2) lower/upper joint limits, radians
    base_position: np.ndarray
    base_rotation: np.ndarray
    capsule_radius: float = 0.05

    def points(self, q):
        """Forward kinematics: the 8 curve points for joint angles ``q``."""
        R = self.base_rotation
        p = self.base_position.copy()
        out = [p]
        for k in range(N_JOINTS):
            R = R @ rotation(self.axes[k], q[k])
            p = p + R @ self.offsets[k]
            out.append(p)
        return np.array(out)


@dataclass
class RobotModel:
    """Both arms plus the rest posture.  Joint vectors are (left 7, right 7)."""

    left: ArmKinematicModel
    right: ArmKinematicModel
    rest_pose: np.ndarray
    joint_names: tuple = ()

    @property
    def limits(self):
        return np.vstack([self.left.limits, self.right.limits])

    def clamp(self, joints):
        lim = self.limits
        return np.clip(joints, lim[:, 0], lim[:, 1])

    def check_limits(self, joints, tol=1e-12):
        lim = self.limits
        bad = np.flatnonzero((joints < lim[:, 0] - tol) | (joints > lim[:, 1] + tol))
        if bad.size:
            raise JointLimitViolation(bad.tolist())


def robot_model(table=None):
    table = table or load_model_table()
    arm = table["arm"]
    axes = np.array(arm["axes"], dtype=float)
    mirror = np.array([-1.0, 1.0, -1.0])  # reflection y -> -y flips x/z rotation senses
    arms = {}
    for side in ("left", "right"):
        base = arm["bases"][side]
        side_axes = axes * mirror if base.get("mirror", False) else axes
        arms[side] = ArmKinematicModel(
            axes=side_axes,
            offsets=np.array(arm["offsets"], dtype=float),
            limits=np.array(arm["limits"], dtype=float),
            base_position=np.array(base["position"], dtype=float),
            base_rotation=rotation((0.0, 0.0, 1.0), base.get("yaw", 0.0)),
            capsule_radius=float(arm["capsule_radius"]),
        )
    rest = np.array(table["rest_pose"]["left"] + table["rest_pose"]["right"], dtype=float)
    return RobotModel(arms["left"], arms["right"], rest, tuple(arm["joint_names"]))


def robot_curves(model, joints, check=True):
    """Right and left arm curves (8 points each) for a 14-joint vector."""
    q = np.asarray(joints, dtype=float)
    if q.shape != (2 * N_JOINTS,):
        raise ShapeMismatch(f"expected 14 joint angles, got shape {q.shape}")
    if check:
        model.check_limits(q)
    return {"r_r": model.right.points(q[N_JOINTS:]), "r_l": model.left.points(q[:N_JOINTS])}


# --- humanoid ----------------------------------------------------------------


@dataclass
class HumanoidModel:
    torso_height: float
    shoulder_width: float
    torso_depth: float
    arm_length: float
    neck_length: float
    preset: str = "custom"
    extension: float = 0.05       # fraction of torso height added beyond each end
    elbow_fraction: float = 0.55  # elbow position along the arm from the shoulder
    arm_abduction: float = 0.35   # radians away from the torso side

    def __post_init__(self):
        dims = (self.torso_height, self.shoulder_width, self.torso_depth, self.arm_length, self.neck_length)
        if not all(np.isfinite(d) and d > 0 for d in dims):
            raise InvalidDimensions(f"humanoid dimensions must be positive, got {dims}")
        if self.torso_depth > self.shoulder_width:
            raise InvalidDimensions("torso depth may not exceed shoulder width")


def humanoid_model(preset="standard", table=None):
    table = table or load_model_table()
    hum = table["humanoid"]
    try:
        dims = hum["presets"][preset]
    except KeyError:
        raise InvalidDimensions(f"unknown humanoid preset {preset!r}") from None
    return HumanoidModel(preset=preset, extension=hum["extension"], elbow_fraction=hum["elbow_fraction"],
                         arm_abduction=hum["arm_abduction"], **dims)


POSTURES = ("upright", "horizontal", "tilted")


def posture_rotation(posture, angle=0.0):
    """Orientation of the humanoid frame for a posture.

    ``horizontal`` lies face-up across the robot's front with the head toward
    the robot's right (-y); ``tilted`` leans the upright body back toward the
    robot by ``angle`` about the humanoid's lateral axis.
    """
    if posture == "upright":
        return np.eye(3)
    if posture == "horizontal":
        # columns: images of the humanoid x (face), y (left), z (head) axes
        return np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
    if posture == "tilted":
        return rotation((0.0, 1.0, 0.0), -angle)
    raise ValueError(f"unknown posture {posture!r}")


@dataclass
class HumanoidPose:
    position: np.ndarray
    yaw: float = 0.0
    posture: str = "upright"
    tilt: float = 0.0

    @property
    def rotation(self):
        return rotation((0.0, 0.0, 1.0), self.yaw) @ posture_rotation(self.posture, self.tilt)

    def shifted(self, dz):
        return replace(self, position=np.asarray(self.position, dtype=float) + np.array([0.0, 0.0, dz]))


def _line(start, end, n_segments):
    t = np.linspace(0.0, 1.0, n_segments + 1)[:, None]
    return start + t * (end - start)


def canonical_humanoid_curves(model):
    """Humanoid curves in the humanoid frame."""
    H, W = model.torso_height, model.shoulder_width
    top = H / 2 + model.extension * H
    bottom = -H / 2 - model.extension * H
    curves = {}
    curves["h_c"] = _line(np.array([0.0, 0.0, top]), np.array([0.0, 0.0, bottom]), 10)
    curves["h_l"] = _line(np.array([0.0, W / 2, top]), np.array([0.0, W / 2, bottom]), 10)
    curves["h_r"] = _line(np.array([0.0, -W / 2, top]), np.array([0.0, -W / 2, bottom]), 10)
    upper = model.elbow_fraction * model.arm_length
    s, c = np.sin(model.arm_abduction), np.cos(model.arm_abduction)
    r_sh = np.array([0.0, -W / 2, H / 2])
    l_sh = np.array([0.0, W / 2, H / 2])
    r_el = r_sh + upper * np.array([0.0, -s, -c])
    l_el = l_sh + upper * np.array([0.0, s, -c])
    n1, n2, n3 = ARM_SEGMENTS
    curves["h_arm"] = np.vstack([_line(r_el, r_sh, n1), _line(r_sh, l_sh, n2)[1:], _line(l_sh, l_el, n3)[1:]])
    return curves


def humanoid_curves(model, pose):
    R = pose.rotation
    t = np.asarray(pose.position, dtype=float)
    return {k: v @ R.T + t for k, v in canonical_humanoid_curves(model).items()}


def torso_capsules(model, pose):
    """Two vertical capsules bounding the torso: ``(starts, ends, radius)``."""
    H, W, D = model.torso_height, model.shoulder_width, model.torso_depth
    r = D / 2
    y = W / 2 - r
    z = H / 2 - r
    starts = np.array([[0.0, -y, z], [0.0, y, z]])
    ends = np.array([[0.0, -y, -z], [0.0, y, -z]])
    R = pose.rotation
    t = np.asarray(pose.position, dtype=float)
    return starts @ R.T + t, ends @ R.T + t, r


# --- curve sets ----------------------------------------------------------------


def curve_set(robot, humanoid):
    """Merge robot and humanoid curves into one mapping in canonical order."""
    merged = {**robot, **humanoid}
    return {k: merged[k] for k in CURVE_ORDER if k in merged}


def _check_order(curves):
    keys = [k for k in curves if k in CURVE_ORDER]
    expected = [k for k in CURVE_ORDER if k in curves]
    if keys != expected:
        raise ShapeMismatch(f"curves must be ordered as {CURVE_ORDER}, got {list(curves)}")


def landmark_points(curves, scenario):
    """Stacked vertices of the scenario's landmark curves.

    upright: r_r, r_l, h_c, h_arm (38 points); horizontal: r_r, r_l, h_c,
    h_l, h_r (49 points).
    """
    _check_order(curves)
    try:
        names = LANDMARK_CURVES[scenario]
    except KeyError:
        raise ValueError(f"unknown scenario {scenario!r}") from None
    expected = {"r_r": 8, "r_l": 8, "h_c": 11, "h_arm": 11, "h_l": 11, "h_r": 11}
    parts = []
    for name in names:
        if name not in curves:
            raise ShapeMismatch(f"missing curve {name!r}")
        pts = np.asarray(curves[name], dtype=float)
        if pts.shape != (expected[name], 3):
            raise ShapeMismatch(f"curve {name!r} has shape {pts.shape}")
        parts.append(pts)
    return np.vstack(parts)


def shoulder_heights(curves):
    """World z of the right and left shoulder vertices of ``h_arm``."""
    arm = np.asarray(curves["h_arm"], dtype=float)
    if arm.shape != (11, 3):
        raise ShapeMismatch(f"h_arm has shape {arm.shape}")
    return {"z_shoulder_r": float(arm[RIGHT_SHOULDER_INDEX, 2]), "z_shoulder_l": float(arm[LEFT_SHOULDER_INDEX, 2])}
