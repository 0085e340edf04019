"""Demonstration bundles and packaged VLA training datasets.

A bundle is a directory holding ``manifest.json`` plus one little-endian,
row-major raw blob per stream (``<stream>.bin``) and one float64 timestamp
blob per stream (``<stream>.timestamps.bin``).  Image pixels are never read;
only their paths are carried.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BlobSizeMismatch, LengthMismatch, ManifestError, UnsupportedVersion
from .sync import STREAM_KINDS, TimedStream
from .transforms import RigidTransform, quat_to_rotvec

MANIFEST_VERSION = 1
DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


def dumps_canonical(obj):
    """Deterministic JSON text used for every manifest written here."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


@dataclass(eq=False)
class Demonstration:
    """Synchronized recording; every trajectory has length ``T``.

    Pose trajectories are ``(T, 7)`` arrays ``[tx, ty, tz, qw, qx, qy, qz]``;
    ``images`` maps a camera name to one path per frame.
    """

    timestamps: np.ndarray
    j_glove: np.ndarray
    p_glove: np.ndarray
    gamma_glove: np.ndarray
    p_object: np.ndarray
    images: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        T = len(self.timestamps)
        if T < 1:
            raise LengthMismatch("a demonstration needs at least one frame")
        for name in ("j_glove", "p_glove", "gamma_glove", "p_object"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 2 or len(arr) != T:
                raise LengthMismatch(f"{name} has shape {arr.shape}, expected ({T}, ...)")
            setattr(self, name, arr)
        if self.p_glove.shape[1] != 7 or self.p_object.shape[1] != 7:
            raise LengthMismatch("pose trajectories must be (T, 7)")
        for cam, refs in self.images.items():
            if len(refs) != T:
                raise LengthMismatch(f"camera {cam!r} has {len(refs)} frames, expected {T}")

    @property
    def T(self):
        return len(self.timestamps)

    def glove_pose(self, t):
        return RigidTransform.from_array(self.p_glove[t])

    def object_pose(self, t):
        return RigidTransform.from_array(self.p_object[t])

    def frame(self, t):
        """``(joints, wrist pose, tactile)`` of frame ``t``."""
        return self.j_glove[t], self.glove_pose(t), self.gamma_glove[t]

    def to_streams(self):
        kinds = {"j_glove": "joint", "p_glove": "pose", "gamma_glove": "tactile", "p_object": "pose"}
        rate = self.metadata.get("rate")
        streams = [TimedStream(k, kind, self.timestamps, getattr(self, k), rate) for k, kind in kinds.items()]
        for k, v in self.extras.items():
            streams.append(TimedStream(k, "scalar", self.timestamps, v, rate))
        return streams


@dataclass(eq=False)
class Bundle:
    streams: list
    metadata: dict = field(default_factory=dict)
    images: dict = field(default_factory=dict)

    def stream(self, name):
        for s in self.streams:
            if s.name == name:
                return s
        raise KeyError(name)

    def synchronize(self, rate=None):
        from .sync import resample

        rate = float(rate or self.metadata.get("rate", 30.0))
        return resample(self.streams, rate, metadata=self.metadata, images=self.images)


# --------------------------------------------------------------------------
# raw bundles

def _blob_bytes(arr, dtype):
    return np.ascontiguousarray(arr, dtype=DTYPES[dtype]).tobytes(order="C")


def write_bundle(path, streams, metadata=None, images=None, dtype="f64"):
    """Write streams as a bundle directory; output bytes depend only on the inputs."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in streams:
        dt = s.attrs.get("dtype", dtype)
        blob = f"{s.name}.bin"
        tblob = f"{s.name}.timestamps.bin"
        (path / blob).write_bytes(_blob_bytes(s.samples, dt))
        (path / tblob).write_bytes(_blob_bytes(s.timestamps, "f64"))
        entry = {"name": s.name, "kind": s.kind, "dtype": dt, "shape": list(np.shape(s.samples)),
                 "blob": blob, "timestamps": tblob}
        if s.rate is not None:
            entry["rate"] = float(s.rate)
        entries.append(entry)
    img = {}
    for cam, (ts, paths) in sorted((images or {}).items()):
        img[cam] = {"timestamps": [float(t) for t in ts], "paths": list(paths)}
    manifest = {"version": MANIFEST_VERSION, "metadata": metadata or {}, "streams": entries, "images": img}
    (path / "manifest.json").write_text(dumps_canonical(manifest), encoding="utf-8")
    return manifest


def read_manifest(path):
    mpath = Path(path) / "manifest.json"
    if not mpath.is_file():
        raise ManifestError(f"no manifest.json in {path}")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{mpath}: {exc}") from None
    if not isinstance(manifest, dict) or "version" not in manifest:
        raise ManifestError(f"{mpath}: missing version")
    if manifest["version"] != MANIFEST_VERSION:
        raise UnsupportedVersion(f"{mpath}: manifest version {manifest['version']!r} is not supported")
    return manifest


def _read_blob(path, name, dtype, shape):
    f = path / name
    if not f.is_file():
        raise ManifestError(f"missing blob {f}")
    data = f.read_bytes()
    dt = DTYPES[dtype]
    expected = int(np.prod(shape)) * dt.itemsize
    if len(data) != expected:
        raise BlobSizeMismatch(f"{f}: {len(data)} bytes, manifest declares {shape} x {dtype} = {expected}")
    return np.frombuffer(data, dtype=dt).reshape(shape).copy()


def load_demonstration(path):
    """Load a raw bundle as a :class:`Bundle` of unsynchronized streams."""
    path = Path(path)
    manifest = read_manifest(path)
    streams = []
    try:
        for e in manifest["streams"]:
            if e["kind"] not in STREAM_KINDS:
                raise ManifestError(f"stream {e['name']!r}: unknown kind {e['kind']!r}")
            if e["dtype"] not in DTYPES:
                raise ManifestError(f"stream {e['name']!r}: unknown dtype {e['dtype']!r}")
            shape = tuple(int(v) for v in e["shape"])
            samples = _read_blob(path, e["blob"], e["dtype"], shape)
            ts = _read_blob(path, e["timestamps"], "f64", (shape[0],))
            streams.append(TimedStream(e["name"], e["kind"], ts, samples, e.get("rate"), {"dtype": e["dtype"]}))
        images = {cam: (np.asarray(v["timestamps"], dtype=float), list(v["paths"]))
                  for cam, v in manifest.get("images", {}).items()}
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"{path}: malformed manifest ({exc!r})") from None
    return Bundle(streams, manifest.get("metadata", {}), images)


def load_hdf5_demonstration(path):
    """Ingest a demonstration from HDF5.

    Expected layout: group ``/streams/<name>`` with datasets ``timestamps``
    and ``samples`` and attribute ``kind``; optional JSON string attribute
    ``metadata`` on the root.
    """
    import h5py

    streams = []
    with h5py.File(path, "r") as f:
        if "streams" not in f:
            raise ManifestError(f"{path}: no /streams group")
        for name in sorted(f["streams"]):
            g = f["streams"][name]
            kind = g.attrs.get("kind")
            kind = kind.decode() if isinstance(kind, bytes) else kind
            streams.append(TimedStream(name, str(kind), g["timestamps"][()], g["samples"][()]))
        meta = f.attrs.get("metadata", "{}")
        meta = json.loads(meta.decode() if isinstance(meta, bytes) else meta)
    return Bundle(streams, meta, {})


# --------------------------------------------------------------------------
# actions and training records

@dataclass(frozen=True, eq=False)
class ActionRecord:
    pos: np.ndarray
    rot: np.ndarray
    j_dex: np.ndarray

    def as_vector(self):
        return np.concatenate([self.pos, self.rot, self.j_dex])


def make_action(p_tcp, j_dex):
    """Action ``[pos, rotation vector, dex joints]`` from a TCP pose."""
    rot = quat_to_rotvec(p_tcp.rotation)
    return ActionRecord(np.array(p_tcp.translation, dtype=float), rot, np.array(j_dex, dtype=float))


@dataclass(frozen=True)
class TrainingRecord:
    frame: int
    timestamp: float
    visual_ref: str | None
    tactile_image_ref: str | None = None

    def to_json(self):
        return {"frame": self.frame, "timestamp": self.timestamp,
                "visual_ref": self.visual_ref, "tactile_image_ref": self.tactile_image_ref}


@dataclass(eq=False)
class VLADataset:
    manifest: dict
    actions: np.ndarray
    arm_joints: np.ndarray
    tactile: np.ndarray
    records: list

    def action(self, t):
        lay = self.manifest["action_layout"]
        a = self.actions[t]
        return ActionRecord(a[slice(*lay["pos"])], a[slice(*lay["rot"])], a[slice(*lay["j_dex"])])


def write_vla_dataset(result, demo, arm_joints, out_path, tcp_poses=None, layout=None, camera=None):
    """Package one training record per frame.

    ``tcp_poses`` are the robot-frame TCP poses (defaults to ``result.p_dex``).
    When a heatmap ``layout`` is given, tactile images are written as PPM files
    under ``tactile/``.
    """
    from .tactile import rasterize_heatmap, write_ppm

    T = demo.T
    tcp = list(tcp_poses) if tcp_poses is not None else list(result.p_dex)
    arm = np.asarray(arm_joints, dtype=float)
    if len(result.j_dex) != T or len(tcp) != T or len(arm) != T or len(result.gamma_dex) != T:
        raise LengthMismatch(
            f"lengths differ: demo {T}, j_dex {len(result.j_dex)}, tcp {len(tcp)}, arm {len(arm)}, "
            f"gamma {len(result.gamma_dex)}")
    out = Path(out_path)
    out.mkdir(parents=True, exist_ok=True)
    actions = np.stack([make_action(tcp[t], result.j_dex[t]).as_vector() for t in range(T)])
    n = actions.shape[1] - 6
    gamma = np.asarray(result.gamma_dex, dtype=float)

    cams = sorted(demo.images)
    cam = camera if camera is not None else (cams[0] if cams else None)
    records = []
    if layout is not None:
        (out / "tactile").mkdir(exist_ok=True)
    for t in range(T):
        tac_ref = None
        if layout is not None:
            tac_ref = f"tactile/{t:06d}.ppm"
            write_ppm(out / tac_ref, rasterize_heatmap(gamma[t], layout))
        vis = demo.images[cam][t] if cam is not None else None
        records.append(TrainingRecord(t, float(demo.timestamps[t]), vis, tac_ref))

    (out / "actions.bin").write_bytes(_blob_bytes(actions, "f32"))
    (out / "arm_joints.bin").write_bytes(_blob_bytes(arm, "f64"))
    (out / "tactile.bin").write_bytes(_blob_bytes(gamma, "f32"))
    (out / "records.jsonl").write_text(
        "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in records), encoding="utf-8")
    manifest = {
        "version": MANIFEST_VERSION,
        "kind": "vla_dataset",
        "frames": T,
        "action_dim": int(actions.shape[1]),
        "action_layout": {"pos": [0, 3], "rot": [3, 6], "j_dex": [6, 6 + n]},
        "arm_joint_dim": int(arm.shape[1]) if arm.ndim == 2 else 0,
        "tactile_dim": int(gamma.shape[1]) if gamma.ndim == 2 else 0,
        "files": {"actions": "actions.bin", "arm_joints": "arm_joints.bin", "tactile": "tactile.bin",
                  "records": "records.jsonl"},
        "dtypes": {"actions": "f32", "arm_joints": "f64", "tactile": "f32"},
        "camera": cam,
        "tactile_layout": layout.to_dict() if layout is not None else None,
        "metadata": demo.metadata,
    }
    (out / "manifest.json").write_text(dumps_canonical(manifest), encoding="utf-8")
    return {"path": str(out), "frames": T, "action_dim": manifest["action_dim"],
            "tactile_images": layout is not None}


def read_vla_dataset(path):
    path = Path(path)
    m = read_manifest(path)
    if m.get("kind") != "vla_dataset":
        raise ManifestError(f"{path}: not a VLA dataset manifest")
    T = m["frames"]
    actions = _read_blob(path, m["files"]["actions"], "f32", (T, m["action_dim"]))
    arm = _read_blob(path, m["files"]["arm_joints"], "f64", (T, m["arm_joint_dim"]))
    tac = _read_blob(path, m["files"]["tactile"], "f32", (T, m["tactile_dim"]))
    lines = (path / m["files"]["records"]).read_text(encoding="utf-8").splitlines()
    records = [TrainingRecord(**json.loads(line)) for line in lines]
    if len(records) != T:
        raise ManifestError(f"{path}: {len(records)} records for {T} frames")
    for r in records:
        if r.tactile_image_ref is not None and not (path / r.tactile_image_ref).is_file():
            raise ManifestError(f"{path}: missing tactile image {r.tactile_image_ref}")
    return VLADataset(m, actions, arm, tac, records)
