import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from dexretarget.errors import DegenerateInput
from dexretarget.frames import (
    CameraExtrinsics,
    SimilarityTransform,
    apply_similarity,
    estimate_similarity,
    load_correspondences,
    to_robot_frame,
)
from dexretarget.transforms import RigidTransform, rotation_angle_between, rotvec_to_quat


def test_identity_recovery():
    x = np.random.default_rng(0).normal(size=(10, 3))
    S = estimate_similarity(x, x)
    assert abs(S.scale - 1.0) <= 1e-12
    assert rotation_angle_between(S.rotation, [1, 0, 0, 0]) <= 1e-12
    assert np.max(np.abs(S.translation)) <= 1e-12


def test_marker_corners(oracle):
    o = oracle["marker_similarity"]
    target = np.array(o["target"])
    truth = SimilarityTransform(o["scale"], o["quat_wxyz"], o["translation"])
    source = apply_similarity(truth.inverse(), target)
    S = estimate_similarity(source, target)
    assert abs(S.scale - o["scale"]) <= 1e-9
    assert rotation_angle_between(S.rotation, o["quat_wxyz"]) <= 1e-9
    assert np.max(np.abs(S.translation - o["translation"])) <= 1e-9
    assert S.residual_rms <= 1e-12


def test_reflection_is_not_returned():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(8, 3))
    y = x * np.array([1.0, 1.0, -1.0])
    S = estimate_similarity(x, y)
    assert np.linalg.det(S.rotation_matrix()) > 0
    assert S.residual_rms > 0.0


@pytest.mark.parametrize("pts", [np.zeros((2, 3)), np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2.0]]),
                                 np.ones((5, 3))])
def test_degenerate_sets(pts):
    with pytest.raises(DegenerateInput):
        estimate_similarity(pts, pts)


def test_shape_mismatch():
    with pytest.raises(DegenerateInput):
        estimate_similarity(np.zeros((4, 3)), np.zeros((5, 3)))


def test_apply_examples():
    p = np.array([[1.0, 0.0, 0.0]])
    np.testing.assert_array_equal(apply_similarity(SimilarityTransform(), p), p)
    np.testing.assert_array_equal(apply_similarity(SimilarityTransform(2.0), p), [[2.0, 0.0, 0.0]])


def test_inverse_composition():
    rng = np.random.default_rng(2)
    S = SimilarityTransform(1.7, rotvec_to_quat([0.3, -1.0, 0.4]), [0.5, -2.0, 1.0])
    p = rng.normal(size=(20, 3))
    assert np.max(np.abs(apply_similarity(S, apply_similarity(S.inverse(), p)) - p)) <= 1e-12
    C = S.compose(S.inverse())
    assert abs(C.scale - 1.0) <= 1e-12


def test_to_robot_frame_examples(oracle):
    traj = [RigidTransform(), RigidTransform.from_rotvec([0.1, 0, 0], [1, 2, 3])]
    same = to_robot_frame(CameraExtrinsics(), traj)
    assert all(a.allclose(b, 0.0) for a, b in zip(same, traj))
    up = to_robot_frame(CameraExtrinsics(RigidTransform(translation=[0, 0, 1])), [RigidTransform()])[0]
    np.testing.assert_array_equal(up.translation, [0, 0, 1])
    M = RigidTransform.from_rotvec([0, 0, math.pi / 2])
    p = RigidTransform.from_rotvec([0.2, 0, 0], [1, 0, 0])
    out = to_robot_frame(CameraExtrinsics(M), [p])[0]
    np.testing.assert_allclose(out.translation, oracle["rotate_90z_x"], atol=1e-15)
    np.testing.assert_allclose(out.matrix(), M.matrix() @ p.matrix(), atol=1e-15)


def test_extrinsics_validation(tmp_path):
    bad = np.eye(4)
    bad[0, 0] = 2.0
    with pytest.raises(ValueError):
        CameraExtrinsics.from_matrix(bad)
    M = np.eye(4)
    M[:3, :3] = Rotation.from_euler("z", 0.3).as_matrix()
    (tmp_path / "ext.json").write_text(str(M.tolist()))
    E = CameraExtrinsics.load(tmp_path / "ext.json")
    np.testing.assert_allclose(E.transform.matrix(), M, atol=1e-15)


def test_load_correspondences(tmp_path):
    (tmp_path / "c.json").write_text('{"source": [[0,0,0],[1,0,0],[0,1,0]], "target": [[1,0,0],[2,0,0],[1,1,0]]}')
    src, dst = load_correspondences(tmp_path / "c.json")
    S = estimate_similarity(src, dst)
    np.testing.assert_allclose(S.translation, [1, 0, 0], atol=1e-12)
    assert S.to_dict()["residual_rms"] <= 1e-12
