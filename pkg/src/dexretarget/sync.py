"""Resample heterogeneous timed streams onto one uniform timeline."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyOverlap, NonMonotonicTimestamps
from .transforms import RigidTransform, canonical_quat, slerp

STREAM_KINDS = ("pose", "joint", "tactile", "scalar")

# slack for floating-point rounding at the window end
_END_SLACK = 1e-9


@dataclass(eq=False)
class TimedStream:
    """One sensor stream.

    ``samples`` has shape ``(n, ...)``; pose streams are ``(n, 7)`` rows of
    ``[tx, ty, tz, qw, qx, qy, qz]``.
    """

    name: str
    kind: str
    timestamps: np.ndarray
    samples: np.ndarray
    rate: float | None = None
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in STREAM_KINDS:
            raise ValueError(f"stream {self.name!r}: unknown kind {self.kind!r}")
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.samples = np.asarray(self.samples)
        if self.timestamps.ndim != 1 or len(self.timestamps) != len(self.samples):
            raise DimensionMismatch(
                f"stream {self.name!r}: {len(self.timestamps)} timestamps for {len(self.samples)} samples")
        if self.kind == "pose" and self.samples.shape[1:] != (7,):
            raise DimensionMismatch(f"pose stream {self.name!r} needs (n, 7) samples")
        if np.any(np.diff(self.timestamps) <= 0.0):
            raise NonMonotonicTimestamps(f"stream {self.name!r}: timestamps not strictly increasing")


def interpolate_pose(a, b, u):
    """Translation lerp plus shortest-arc slerp; exact at ``u = 0`` and ``u = 1``."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"interpolation parameter {u} outside [0, 1]")
    if u == 0.0:
        return RigidTransform(a.rotation, a.translation)
    if u == 1.0:
        return RigidTransform(b.rotation, b.translation)
    t = (1.0 - u) * a.translation + u * b.translation
    return RigidTransform(slerp(a.rotation, b.rotation, u), t)


def _sample_quat(q):
    """A stored quaternion as-is when already unit length, sign made canonical."""
    q = np.asarray(q, dtype=float)
    if abs(float(q @ q) - 1.0) > 1e-12:
        return canonical_quat(q)
    c = canonical_quat(q)
    return q if np.array_equal(np.sign(c), np.sign(q)) else -q


def uniform_timeline(start, end, rate):
    n = int(np.floor((end - start) * rate + _END_SLACK)) + 1
    return start + np.arange(n) / rate


def _bracket(ts, t):
    """Index ``i`` and fraction ``u`` with ``t = ts[i] + u (ts[i+1] - ts[i])``."""
    i = np.searchsorted(ts, t, side="right") - 1
    i = np.clip(i, 0, len(ts) - 2)
    u = (t - ts[i]) / (ts[i + 1] - ts[i])
    return i, np.clip(u, 0.0, 1.0)


def resample_stream(stream, timeline):
    ts = stream.timestamps
    x = stream.samples
    if len(ts) == 1:
        if not np.all(timeline == ts[0]):
            raise EmptyOverlap(f"stream {stream.name!r} has a single sample")
        return np.repeat(x[:1].astype(float), len(timeline), axis=0)
    idx, u = _bracket(ts, timeline)
    if stream.kind == "pose":
        out = np.empty((len(timeline), 7))
        for k, (i, uk) in enumerate(zip(idx, u)):
            a = x[i]
            b = x[i + 1]
            if uk == 0.0:
                out[k] = np.concatenate([a[:3], _sample_quat(a[3:])])
            elif uk == 1.0:
                out[k] = np.concatenate([b[:3], _sample_quat(b[3:])])
            else:
                out[k, :3] = (1.0 - uk) * a[:3] + uk * b[:3]
                out[k, 3:] = slerp(a[3:], b[3:], uk)
        return out
    x = x.astype(float)
    shape = (-1,) + (1,) * (x.ndim - 1)
    u = u.reshape(shape)
    out = (1.0 - u) * x[idx] + u * x[idx + 1]
    # exact samples on timestamp hits
    hit = (u.reshape(-1) == 0.0)
    out[hit] = x[idx[hit]]
    if stream.kind == "tactile":
        out = np.clip(out, 0.0, 1.0)
    return out


def nearest_refs(timestamps, refs, timeline):
    """Pick, for every timeline instant, the reference with the nearest timestamp."""
    ts = np.asarray(timestamps, dtype=float)
    if len(ts) != len(refs) or len(ts) == 0:
        raise DimensionMismatch("image reference list does not match its timestamps")
    i = np.clip(np.searchsorted(ts, timeline), 1, max(len(ts) - 1, 1))
    if len(ts) == 1:
        return [refs[0]] * len(timeline)
    left = timeline - ts[i - 1] <= ts[i] - timeline
    return [refs[k] for k in np.where(left, i - 1, i)]


def common_window(streams):
    if not streams:
        raise EmptyOverlap("no streams to synchronize")
    start = max(float(s.timestamps[0]) for s in streams)
    end = min(float(s.timestamps[-1]) for s in streams)
    if end < start:
        raise EmptyOverlap(f"streams share no common time window (start {start}, end {end})")
    return start, end


def resample_streams(streams, rate=30.0):
    """Resample all streams onto one uniform timeline inside their common window.

    Returns ``(timeline, {name: samples})``.  No extrapolation is performed.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    for s in streams:
        if np.any(np.diff(s.timestamps) <= 0.0):
            raise NonMonotonicTimestamps(f"stream {s.name!r}: timestamps not strictly increasing")
    start, end = common_window(streams)
    if end - start < 2.0 / rate - _END_SLACK:
        raise EmptyOverlap(f"common window [{start}, {end}] shorter than two sample periods")
    timeline = uniform_timeline(start, end, rate)
    return timeline, {s.name: resample_stream(s, timeline) for s in streams}


def resample(streams, rate=30.0, metadata=None, images=None):
    """Build a synchronized :class:`~dexretarget.datastore.Demonstration`.

    Expects streams named ``j_glove``, ``p_glove``, ``gamma_glove`` and
    ``p_object``; other streams are carried in ``extras``.  ``images`` maps a
    camera name to ``(timestamps, paths)``; paths are matched to the nearest
    timeline instant and never opened.
    """
    from .datastore import Demonstration

    timeline, out = resample_streams(streams, rate)
    missing = {"j_glove", "p_glove", "gamma_glove", "p_object"} - set(out)
    if missing:
        raise DimensionMismatch(f"demonstration streams missing: {sorted(missing)}")
    refs = {cam: nearest_refs(ts, paths, timeline) for cam, (ts, paths) in (images or {}).items()}
    extras = {k: v for k, v in out.items() if k not in ("j_glove", "p_glove", "gamma_glove", "p_object")}
    meta = dict(metadata or {})
    meta["rate"] = float(rate)
    return Demonstration(
        timestamps=timeline,
        j_glove=out["j_glove"],
        p_glove=out["p_glove"],
        gamma_glove=out["gamma_glove"],
        p_object=out["p_object"],
        images=refs,
        metadata=meta,
        extras=extras,
    )
