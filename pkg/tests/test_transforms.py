import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from dexretarget.transforms import (
    RigidTransform,
    canonical_quat,
    matrix_to_quat,
    poses_from_array,
    poses_to_array,
    quat_mul,
    quat_to_matrix,
    quat_to_rotvec,
    rotation_angle_between,
    rotvec_to_quat,
    rpy_to_matrix,
    slerp,
)


def test_canonical_sign():
    q = canonical_quat([-0.5, 0.5, 0.5, 0.5])
    assert q[0] > 0
    np.testing.assert_allclose(canonical_quat([0.0, -1.0, 0.0, 0.0]), [0, 1, 0, 0])


def test_rpy_matches_fixed_axis_convention():
    rng = np.random.default_rng(0)
    for _ in range(20):
        rpy = rng.uniform(-np.pi, np.pi, 3)
        ref = Rotation.from_euler("xyz", rpy).as_matrix()
        np.testing.assert_allclose(rpy_to_matrix(rpy), ref, atol=1e-14)


def test_matrix_quat_round_trip():
    for R in Rotation.random(50, random_state=2).as_matrix():
        np.testing.assert_allclose(quat_to_matrix(matrix_to_quat(R)), R, atol=1e-14)


def test_quat_mul_matches_matrix_product():
    a, b = Rotation.random(2, random_state=3)
    qa = matrix_to_quat(a.as_matrix())
    qb = matrix_to_quat(b.as_matrix())
    np.testing.assert_allclose(quat_to_matrix(quat_mul(qa, qb)), a.as_matrix() @ b.as_matrix(), atol=1e-14)


def test_rotvec_examples(oracle):
    np.testing.assert_array_equal(quat_to_rotvec([1, 0, 0, 0]), [0, 0, 0])
    q90 = matrix_to_quat(Rotation.from_euler("z", 90, degrees=True).as_matrix())
    np.testing.assert_allclose(quat_to_rotvec(q90), oracle["rotvec_90z"], atol=1e-15)
    np.testing.assert_allclose(quat_to_rotvec([0.0, 1.0, 0.0, 0.0]), oracle["rotvec_180x"], atol=1e-15)
    # the antipodal representation lands on the same branch
    np.testing.assert_allclose(quat_to_rotvec([0.0, -1.0, 0.0, 0.0]), oracle["rotvec_180x"], atol=1e-15)


def test_rotvec_round_trip():
    rng = np.random.default_rng(4)
    for _ in range(200):
        v = rng.normal(size=3)
        v *= rng.uniform(0, math.pi - 1e-6) / np.linalg.norm(v)
        assert np.max(np.abs(quat_to_rotvec(rotvec_to_quat(v)) - v)) <= 1e-12
    tiny = np.array([1e-10, -2e-10, 3e-11])
    np.testing.assert_allclose(quat_to_rotvec(rotvec_to_quat(tiny)), tiny, rtol=1e-12, atol=0)


def test_slerp_endpoints_and_midpoint(oracle):
    qa = np.array([1.0, 0.0, 0.0, 0.0])
    qb = rotvec_to_quat([0.0, 0.0, math.pi / 2])
    np.testing.assert_array_equal(slerp(qa, qb, 0.0), qa)
    np.testing.assert_array_equal(slerp(qa, qb, 1.0), qb)
    mid = slerp(qa, qb, 0.5)
    np.testing.assert_allclose(mid, oracle["slerp_mid_90z"]["quat_wxyz"], atol=1e-15)
    assert abs(rotation_angle_between(qa, mid) - oracle["slerp_mid_90z"]["angle"]) <= 1e-9


def test_slerp_antipodal_is_identity_path():
    q = rotvec_to_quat([0.3, -0.2, 0.1])
    for u in (0.25, 0.5, 0.75):
        assert rotation_angle_between(slerp(q, -q, u), q) <= 1e-12


def test_rigid_transform_algebra():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = RigidTransform.from_rotvec(rng.normal(size=3), rng.normal(size=3))
        b = RigidTransform.from_rotvec(rng.normal(size=3), rng.normal(size=3))
        np.testing.assert_allclose((a @ b).matrix(), a.matrix() @ b.matrix(), atol=1e-13)
        assert (a @ a.inverse()).allclose(RigidTransform(), 1e-12)
        p = rng.normal(size=(4, 3))
        np.testing.assert_allclose(a.apply(p), p @ a.matrix()[:3, :3].T + a.translation, atol=1e-14)


def test_pose_array_round_trip():
    poses = [RigidTransform.from_rotvec([0, 0, k * 0.1], [k, 0, 0]) for k in range(3)]
    arr = poses_to_array(poses)
    assert arr.shape == (3, 7)
    back = poses_from_array(arr)
    assert all(p.allclose(q, 0.0) for p, q in zip(poses, back))
    assert poses_to_array([]).shape == (0, 7)


def test_from_matrix_rejects_bad_shape():
    with pytest.raises(ValueError):
        RigidTransform.from_matrix(np.eye(3))
