import math

import numpy as np
import pytest

from dexretarget.armik import IKDiagnostics, solve_ik, trajectory_ik
from dexretarget.errors import DimensionMismatch, NotConverged
from dexretarget.kinmodel import site_poses
from dexretarget.robots import arm_model
from dexretarget.transforms import RigidTransform, rotation_angle_between


@pytest.fixture(scope="module")
def arm():
    return arm_model()


def test_fixed_point(arm):
    q = np.array([0.3, -1.2, 1.4, -0.8, 1.1, 0.4])
    target = site_poses(arm, q, ["tool"])[0]
    q_out, diag = solve_ik(arm, target, "tool", seed=q)
    np.testing.assert_array_equal(q_out, q)
    assert diag.iterations == 0 and diag.converged and diag.restarts == 0


def test_planar_two_link(planar):
    target = RigidTransform(translation=[0.5, 0.5, 0.0])
    q, diag = solve_ik(planar, target, "tip", seed=[0.3, 0.3], tol_rot=None, tol_pos=1e-9)
    tip = site_poses(planar, q, ["tip"])[0].translation
    assert np.linalg.norm(tip - target.translation) <= 1e-6
    # analytic solutions: (0, pi/2) or (pi/2, -pi/2)
    assert min(np.linalg.norm(q - [0.0, math.pi / 2]), np.linalg.norm(q - [math.pi / 2, -math.pi / 2])) <= 1e-6


def test_unreachable_reports_residual(planar):
    target = RigidTransform(translation=[1.1, 0.0, 0.0])
    with pytest.raises(NotConverged) as exc:
        solve_ik(planar, target, "tip", tol_rot=None, restarts=4)
    assert exc.value.diagnostics.pos_error >= 0.1 - 1e-4
    assert exc.value.q.shape == (2,)


def test_bad_seed(arm):
    with pytest.raises(DimensionMismatch):
        solve_ik(arm, RigidTransform(), "tool", seed=np.zeros(3))


def test_array_target_accepted(arm):
    q = np.array([0.1, -1.0, 1.0, -1.5, -1.2, 0.2])
    target = site_poses(arm, q, ["tool"])[0].as_array()
    q_out, diag = solve_ik(arm, target, "tool", seed=q + 0.05)
    assert diag.converged and diag.pos_error <= 1e-4 and diag.rot_error <= 1e-3


def test_random_reachable_targets(arm):
    rng = np.random.default_rng(3)
    solved = 0
    for _ in range(30):
        q = rng.uniform(arm.lower, arm.upper)
        target = site_poses(arm, q, ["tool"])[0]
        try:
            q_out, _ = solve_ik(arm, target, "tool")
        except NotConverged:
            continue
        got = site_poses(arm, q_out, ["tool"])[0]
        assert np.linalg.norm(got.translation - target.translation) <= 1e-4
        assert rotation_angle_between(got.rotation, target.rotation) <= 1e-3
        solved += 1
    assert solved >= 28


def _ramp(T=60):
    s = np.linspace(0.0, 1.0, T)[:, None]
    q0 = np.array([0.2, -1.3, 1.5, -1.0, -1.4, 0.3])
    q1 = np.array([0.8, -1.0, 1.1, -1.6, -1.0, -0.2])
    return q0 + (3 * s**2 - 2 * s**3) * (q1 - q0)


def test_round_trip_ramp(arm):
    Q = _ramp()
    targets = [site_poses(arm, q, ["tool"])[0] for q in Q]
    traj = trajectory_ik(arm, targets, "tool", seed=Q[0], tol_pos=1e-10, tol_rot=1e-10)
    assert traj.ok
    assert np.max(np.abs(traj.q - Q)) <= 1e-4


def test_constant_targets(arm):
    q = np.array([0.2, -1.3, 1.5, -1.0, -1.4, 0.3])
    target = site_poses(arm, q, ["tool"])[0]
    traj = trajectory_ik(arm, [target] * 10, "tool")
    for t in range(1, 10):
        np.testing.assert_array_equal(traj.q[t], traj.q[1])
    assert traj.diagnostics[0].iterations > 0


def test_unreachable_frame_isolated(arm):
    Q = _ramp(12)
    targets = [site_poses(arm, q, ["tool"])[0] for q in Q]
    targets[5] = RigidTransform(translation=[3.0, 0.0, 0.0])
    traj = trajectory_ik(arm, targets, "tool", seed=Q[0], restarts=2)
    assert traj.failed_indices() == [5]
    assert isinstance(traj.failures[0][1], NotConverged)
    for t in (4, 6):
        assert traj.diagnostics[t].converged


def test_trajectory_from_array(arm):
    Q = _ramp(5)
    arr = np.stack([site_poses(arm, q, ["tool"])[0].as_array() for q in Q])
    traj = trajectory_ik(arm, arr, "tool", seed=Q[0])
    assert traj.ok and traj.q.shape == (5, 6)
    with pytest.raises(DimensionMismatch):
        trajectory_ik(arm, [], "tool")


def test_diagnostics_json():
    d = IKDiagnostics(3, 1e-5, 2e-4, True, 1)
    assert d.to_json() == {"iterations": 3, "pos_error": 1e-5, "rot_error": 2e-4, "converged": True, "restarts": 1}
