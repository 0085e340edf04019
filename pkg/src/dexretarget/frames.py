"""Metric similarity alignment and lifting of trajectories into the robot base frame."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateInput
from .transforms import RigidTransform, canonical_quat, matrix_to_quat, quat_conj, quat_mul, quat_to_matrix

# relative singular-value floor below which a point set counts as collinear
_RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """``y = scale * R x + translation``."""

    scale: float = 1.0
    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    residual_rms: float = 0.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "rotation", canonical_quat(self.rotation))
        object.__setattr__(self, "translation", np.array(self.translation, dtype=float).reshape(3))

    def rotation_matrix(self):
        return quat_to_matrix(self.rotation)

    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.scale * self.rotation_matrix()
        T[:3, 3] = self.translation
        return T

    def inverse(self):
        qi = quat_conj(self.rotation)
        s = 1.0 / self.scale
        return SimilarityTransform(s, qi, -s * (quat_to_matrix(qi) @ self.translation))

    def compose(self, other):
        """``self ∘ other``: apply ``other`` first."""
        return SimilarityTransform(
            self.scale * other.scale,
            quat_mul(self.rotation, other.rotation),
            self.scale * (self.rotation_matrix() @ other.translation) + self.translation,
        )

    def to_dict(self):
        return {"scale": self.scale, "rotation_wxyz": self.rotation.tolist(),
                "translation": self.translation.tolist(), "residual_rms": self.residual_rms}


@dataclass(frozen=True, eq=False)
class CameraExtrinsics:
    """Camera frame -> robot base frame."""

    transform: RigidTransform = field(default_factory=RigidTransform)

    @classmethod
    def from_matrix(cls, M):
        M = np.asarray(M, dtype=float)
        R = M[:3, :3]
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-6) or np.linalg.det(R) <= 0:
            raise ValueError("extrinsic rotation block is not a proper rotation")
        return cls(RigidTransform.from_matrix(M))

    @classmethod
    def load(cls, path):
        return cls.from_matrix(np.array(json.loads(Path(path).read_text(encoding="utf-8")), dtype=float))


def estimate_similarity(source_pts, target_pts):
    """Closed-form least-squares ``(s, R, t)`` minimizing ``sum |s R x + t - y|^2``.

    SVD of the cross-covariance with the usual reflection fix so that
    ``det(R) = +1``.  The residual RMS is reported, never thresholded.
    """
    x = np.asarray(source_pts, dtype=float)
    y = np.asarray(target_pts, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3 or x.shape != y.shape:
        raise DegenerateInput(f"point sets must both be (n, 3); got {x.shape} and {y.shape}")
    n = len(x)
    if n < 3:
        raise DegenerateInput(f"need at least 3 correspondences, got {n}")
    mx, my = x.mean(axis=0), y.mean(axis=0)
    dx, dy = x - mx, y - my
    sx = np.linalg.svd(dx, compute_uv=False)
    if sx[0] == 0.0 or sx[1] <= _RANK_TOL * sx[0]:
        raise DegenerateInput("source points are coincident or collinear")

    cov = dy.T @ dx / n
    U, d, Vt = np.linalg.svd(cov)
    S = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2] = -1.0
    R = (U * S) @ Vt
    var_x = (dx * dx).sum() / n
    s = float((d * S).sum() / var_x)
    t = my - s * R @ mx
    resid = s * x @ R.T + t - y
    rms = float(math.sqrt((resid * resid).sum() / n))
    return SimilarityTransform(s, matrix_to_quat(R), t, rms)


def apply_similarity(S, pts):
    p = np.asarray(pts, dtype=float)
    return S.scale * (p @ S.rotation_matrix().T) + S.translation


def load_correspondences(path):
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    return np.asarray(d["source"], dtype=float), np.asarray(d["target"], dtype=float)


def to_robot_frame(extrinsics, traj):
    """Left-multiply every pose by the camera-to-base extrinsics."""
    M = extrinsics.transform if isinstance(extrinsics, CameraExtrinsics) else extrinsics
    return [M @ p for p in traj]
