"""Scripted approach-grasp-lift demonstrations used as the pipeline's test oracle.

The tactile model is deliberately non-physical: each sensor reads 1 when its
site lies inside the object sphere, 0 beyond 1 cm from the surface, and a C1
smoothstep ramp in between.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..datastore import Bundle, write_bundle
from ..errors import ConfigError
from ..kinmodel import KinematicState
from ..robots import DIGITS, glove_model as builtin_glove
from ..sync import TimedStream, resample
from ..transforms import RigidTransform, slerp

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

CONTACT_RAMP = 0.01


@dataclass(frozen=True)
class Scenario:
    name: str = "grasp"
    object_name: str = "sphere"
    frames: int = 300
    rate: float = 30.0
    approach_fraction: float = 0.3
    grasp_fraction: float = 0.4
    close_fraction: float = 0.5
    joint_rate: float = 120.0
    tactile_rate: float = 100.0
    pose_rate: float = 30.0
    timestamp_jitter: float = 0.2
    approach_distance: float = 0.12
    lift_height: float = 0.10
    wrist_xyz: tuple = (0.05, -0.10, 0.55)
    wrist_rpy: tuple = (0.15, -0.1, 0.4)
    grasp_finger: tuple = (0.0, 0.6, 0.8, 0.5)
    grasp_thumb: tuple = (0.0, 0.5, 0.4, 0.3)
    grasp_noise: float = 0.03
    camera: str = "cam0"

    def __post_init__(self):
        if self.frames < 2:
            raise ConfigError("scenario needs at least 2 frames")
        for f in ("rate", "joint_rate", "tactile_rate", "pose_rate"):
            if not getattr(self, f) > 0:
                raise ConfigError(f"{f} must be positive")
        fr = (self.approach_fraction, self.grasp_fraction, self.close_fraction)
        if min(fr) < 0 or self.approach_fraction + self.grasp_fraction > 1.0 or self.close_fraction > 1.0:
            raise ConfigError("phase fractions must be non-negative and fit within the recording")
        if not 0.0 <= self.timestamp_jitter < 0.5:
            raise ConfigError("timestamp_jitter must lie in [0, 0.5)")

    @property
    def duration(self):
        return (self.frames - 1) / self.rate

    @classmethod
    def from_dict(cls, d):
        d = dict(d.get("scenario", d))
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        for k in ("wrist_xyz", "wrist_rpy", "grasp_finger", "grasp_thumb"):
            if k in d:
                d[k] = tuple(float(v) for v in d[k])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read scenario {path}: {exc}") from None
        try:
            d = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
        except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(d)


@dataclass(eq=False)
class SyntheticDemo:
    bundle: Bundle
    demo: object
    truth: dict = field(default_factory=dict)

    def write(self, path):
        return write_bundle(path, self.bundle.streams, self.bundle.metadata, self.bundle.images)


def _smoothstep5(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


def contact_force(surface_distance):
    """1 inside the object, 0 beyond ``CONTACT_RAMP``, C1 ramp in between."""
    x = np.clip(np.asarray(surface_distance, dtype=float) / CONTACT_RAMP, 0.0, 1.0)
    return 1.0 - x * x * (3.0 - 2.0 * x)


def _hand_config(model, finger, thumb):
    q = np.zeros(model.dof)
    for i, j in enumerate(model.active_joints):
        digit, part = j.name.split("_", 1)
        k = ("abd", "j1", "j2", "j3").index(part)
        q[i] = thumb[k] if digit == "thumb" else finger[k]
    return np.clip(q, model._lower, model._upper)


class _Script:
    """Continuous-time trajectories of the scripted grasp."""

    def __init__(self, sc, model, rng):
        self.sc = sc
        self.model = model
        D = sc.duration
        self.t_approach = sc.approach_fraction * D
        self.t_grasp = self.t_approach + sc.grasp_fraction * D
        self.t_closed = self.t_approach + sc.close_fraction * sc.grasp_fraction * D
        self.grasping = sc.grasp_fraction > 0.0

        self.q_open = _hand_config(model, (0.0, -0.1, 0.0, 0.0), (-0.3, 0.0, 0.0, 0.0))
        q_grasp = _hand_config(model, sc.grasp_finger, sc.grasp_thumb)
        q_grasp = q_grasp + rng.normal(0.0, sc.grasp_noise, model.dof)
        self.q_grasp = np.clip(q_grasp, model._lower, model._upper)

        self.wrist_final = RigidTransform.from_xyz_rpy(sc.wrist_xyz, sc.wrist_rpy)
        R = self.wrist_final.rotation_matrix()
        # back off along the fingers' pointing axis and up
        self.wrist_start = RigidTransform(self.wrist_final.rotation,
                                          self.wrist_final.translation - sc.approach_distance * R[:, 0]
                                          + 0.5 * sc.approach_distance * np.array([0.0, 0.0, 1.0]))
        self.up = np.array([0.0, 0.0, 1.0])

        st = KinematicState(model, self.q_grasp)
        pads = st.site_positions(model.site_indices([f"{d}_tac1" for d in DIGITS]))
        center = pads.mean(axis=0)
        self.radius = float(np.max(np.linalg.norm(pads - center, axis=1))) + 5e-4
        self.center_hand = center
        self.object_start = RigidTransform(self.wrist_final.rotation, self.wrist_final.apply(center))
        self.tactile_idx = model.site_indices(model.site_names("tactile"))

    def joints(self, t):
        if not self.grasping or t <= self.t_approach:
            return self.q_open.copy()
        u = _smoothstep5((t - self.t_approach) / max(self.t_closed - self.t_approach, 1e-12))
        return (1.0 - u) * self.q_open + u * self.q_grasp

    def _lift(self, t):
        if not self.grasping or t <= self.t_grasp:
            return 0.0
        D = self.sc.duration
        return self.sc.lift_height * float(_smoothstep5((t - self.t_grasp) / max(D - self.t_grasp, 1e-12)))

    def wrist(self, t):
        if t < self.t_approach:
            u = float(_smoothstep5(t / self.t_approach))
            a, b = self.wrist_start, self.wrist_final
            return RigidTransform(slerp(a.rotation, b.rotation, u), (1 - u) * a.translation + u * b.translation)
        return RigidTransform(self.wrist_final.rotation, self.wrist_final.translation + self._lift(t) * self.up)

    def obj(self, t):
        o = self.object_start
        return RigidTransform(o.rotation, o.translation + self._lift(t) * self.up)

    def tactile(self, t):
        w = self.wrist(t)
        p = w.apply(KinematicState(self.model, self.joints(t)).site_positions(self.tactile_idx))
        s = np.linalg.norm(p - self.obj(t).translation, axis=1) - self.radius
        return contact_force(s)


def _jittered_times(duration, rate, jitter, rng):
    n = int(np.floor(duration * rate + 1e-9)) + 1
    t = np.arange(n) / rate
    if n > 2:
        t[1:-1] += rng.uniform(-jitter, jitter, n - 2) / rate
    t[-1] = duration
    if t[-1] <= t[-2]:
        t = t[:-1]
        t[-1] = duration
    return t


def generate_synthetic_demo(scenario=None, seed=0, glove=None):
    """Scripted demonstration: raw multi-rate bundle, synchronized demo and ground truth.

    Output depends only on ``(scenario, seed)``.
    """
    sc = scenario if scenario is not None else Scenario()
    if not isinstance(sc, Scenario):
        sc = Scenario.from_dict(sc)
    model = glove if glove is not None else builtin_glove()
    if len(model.site_names("tactile")) == 0:
        raise ConfigError("glove model has no tactile sites")
    rng = np.random.default_rng(seed)
    script = _Script(sc, model, rng)
    D = sc.duration
    jit = sc.timestamp_jitter

    tj = _jittered_times(D, sc.joint_rate, jit, rng)
    tt = _jittered_times(D, sc.tactile_rate, jit, rng)
    tw = _jittered_times(D, sc.pose_rate, jit, rng)
    to = _jittered_times(D, sc.pose_rate, jit, rng)
    ti = _jittered_times(D, sc.rate, jit, rng)
    streams = [
        TimedStream("j_glove", "joint", tj, np.stack([script.joints(t) for t in tj]), sc.joint_rate),
        TimedStream("p_glove", "pose", tw, np.stack([script.wrist(t).as_array() for t in tw]), sc.pose_rate),
        TimedStream("gamma_glove", "tactile", tt, np.stack([script.tactile(t) for t in tt]), sc.tactile_rate),
        TimedStream("p_object", "pose", to, np.stack([script.obj(t).as_array() for t in to]), sc.pose_rate),
    ]
    images = {sc.camera: (ti, [f"{sc.camera}/{k:06d}.png" for k in range(len(ti))])}
    metadata = {
        "task": sc.name,
        "object": sc.object_name,
        "operator": "synthetic",
        "seed": int(seed),
        "rate": sc.rate,
        "glove_model": model.name,
        "scenario": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(sc).items()},
    }
    bundle = Bundle(streams, metadata, images)
    demo = resample(streams, sc.rate, metadata=metadata, images=images)
    truth = {
        "j_glove": np.stack([script.joints(t) for t in demo.timestamps]),
        "q_grasp": script.q_grasp,
        "object_radius": script.radius,
        "object_center_hand": script.center_hand,
        "phases": {"approach_end": script.t_approach, "closed": script.t_closed, "grasp_end": script.t_grasp},
    }
    return SyntheticDemo(bundle, demo, truth)
