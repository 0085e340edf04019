"""Rotation and rigid-transform helpers.

Quaternions are stored as ``(w, x, y, z)`` arrays in canonical form: unit
norm, ``w >= 0``, and when ``w == 0`` the first non-zero vector component
is positive.  4x4 homogeneous matrices appear only when converting at I/O
boundaries or inside the kinematics inner loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_SMALL_ANGLE = 1e-8


def canonical_quat(q):
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q @ q))
    if n == 0.0 or not math.isfinite(n):
        raise ValueError(f"cannot normalize quaternion {q!r}")
    q = q / n
    if q[0] < 0.0:
        return -q
    if q[0] == 0.0:
        for c in q[1:]:
            if c != 0.0:
                return -q if c < 0.0 else q
    return q


def quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R):
    """Shepperd's method; picks the numerically largest pivot."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    return canonical_quat(q)


def rotvec_to_quat(v):
    v = np.asarray(v, dtype=float)
    theta = math.sqrt(float(v @ v))
    if theta < _SMALL_ANGLE:
        k = 0.5 - theta * theta / 48.0
    else:
        k = math.sin(0.5 * theta) / theta
    return canonical_quat(np.concatenate([[math.cos(0.5 * theta)], k * v]))


def quat_to_rotvec(q):
    """Log map onto the branch ``|v| <= pi``.

    At exactly ``pi`` the canonical quaternion sign fixes the axis so that its
    first non-zero component is positive.
    """
    q = canonical_quat(q)
    s = math.sqrt(q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if s < _SMALL_ANGLE:
        k = 2.0 / q[0]
    else:
        k = 2.0 * math.atan2(s, q[0]) / s
    return k * q[1:]


def axis_angle_matrix(axis, angle):
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def rpy_to_matrix(rpy):
    """URDF fixed-axis roll/pitch/yaw: ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    r, p, y = rpy
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def rotation_angle_between(qa, qb):
    """Geodesic angle in radians between two rotations."""
    # atan2 keeps precision near zero where acos does not.
    c = quat_mul(quat_conj(canonical_quat(qa)), canonical_quat(qb))
    s = math.sqrt(c[1] ** 2 + c[2] ** 2 + c[3] ** 2)
    return 2.0 * math.atan2(s, abs(c[0]))


def slerp(qa, qb, u):
    """Spherical interpolation along the shortest arc.

    ``u == 0`` and ``u == 1`` return the canonical endpoints exactly.
    """
    qa = canonical_quat(qa)
    qb = canonical_quat(qb)
    if u == 0.0:
        return qa
    if u == 1.0:
        return qb
    d = float(qa @ qb)
    if d < 0.0:
        qb, d = -qb, -d
    if d > 0.9999999:
        return canonical_quat((1.0 - u) * qa + u * qb)
    theta = math.acos(min(d, 1.0))
    s = math.sin(theta)
    return canonical_quat((math.sin((1.0 - u) * theta) / s) * qa + (math.sin(u * theta) / s) * qb)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation (canonical unit quaternion, w-first) plus translation in meters."""

    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = canonical_quat(self.rotation)
        t = np.array(self.translation, dtype=float).reshape(3)
        q.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, dtype=float)
        if T.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {T.shape}")
        return cls(matrix_to_quat(T[:3, :3]), T[:3, 3])

    @classmethod
    def from_rotation_matrix(cls, R, t=(0.0, 0.0, 0.0)):
        return cls(matrix_to_quat(R), t)

    @classmethod
    def from_xyz_rpy(cls, xyz=(0.0, 0.0, 0.0), rpy=(0.0, 0.0, 0.0)):
        return cls(matrix_to_quat(rpy_to_matrix(rpy)), xyz)

    @classmethod
    def from_rotvec(cls, rotvec, t=(0.0, 0.0, 0.0)):
        return cls(rotvec_to_quat(rotvec), t)

    @classmethod
    def from_array(cls, a):
        """Inverse of :meth:`as_array`: ``[tx, ty, tz, qw, qx, qy, qz]``."""
        a = np.asarray(a, dtype=float)
        return cls(a[3:7], a[:3])

    def as_array(self):
        return np.concatenate([self.translation, self.rotation])

    def rotation_matrix(self):
        return quat_to_matrix(self.rotation)

    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = quat_to_matrix(self.rotation)
        T[:3, 3] = self.translation
        return T

    def rotvec(self):
        return quat_to_rotvec(self.rotation)

    def inverse(self):
        qi = quat_conj(self.rotation)
        return RigidTransform(qi, -(quat_to_matrix(qi) @ self.translation))

    def __matmul__(self, other):
        if isinstance(other, RigidTransform):
            return RigidTransform(
                quat_mul(self.rotation, other.rotation),
                self.translation + quat_to_matrix(self.rotation) @ other.translation,
            )
        return NotImplemented

    def apply(self, points):
        """Map points of shape ``(3,)`` or ``(n, 3)``."""
        p = np.asarray(points, dtype=float)
        return p @ quat_to_matrix(self.rotation).T + self.translation

    def allclose(self, other, atol=1e-9):
        return bool(
            np.allclose(self.translation, other.translation, atol=atol, rtol=0.0)
            and rotation_angle_between(self.rotation, other.rotation) <= atol
        )

    def __repr__(self):
        t = ", ".join(f"{v:.6g}" for v in self.translation)
        q = ", ".join(f"{v:.6g}" for v in self.rotation)
        return f"RigidTransform(rotation=[{q}], translation=[{t}])"


def poses_to_array(poses):
    """Stack a pose sequence into a ``(T, 7)`` array ``[t | q]``."""
    if len(poses) == 0:
        return np.zeros((0, 7))
    return np.stack([p.as_array() for p in poses])


def poses_from_array(a):
    a = np.asarray(a, dtype=float)
    return [RigidTransform.from_array(row) for row in a]
