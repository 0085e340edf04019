"""Damped least-squares inverse kinematics for arm TCP trajectories."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotConverged
from .kinmodel import KinematicState, clamp_joints
from .transforms import RigidTransform, matrix_to_quat, quat_to_rotvec

DAMPING_FLOOR = 1e-6
_DAMPING_CAP = 1e12


@dataclass
class IKDiagnostics:
    iterations: int
    pos_error: float
    rot_error: float
    converged: bool
    restarts: int = 0

    def to_json(self):
        return {"iterations": self.iterations, "pos_error": self.pos_error, "rot_error": self.rot_error,
                "converged": self.converged, "restarts": self.restarts}


def _error(st, idx, target_R, target_t):
    M = st.site_mats(idx)[0]
    e_pos = target_t - M[:3, 3]
    # world-frame rotation taking the current TCP orientation onto the target
    e_rot = quat_to_rotvec(matrix_to_quat(target_R @ M[:3, :3].T))
    return e_pos, e_rot


def _dls(model, idx, target_R, target_t, q, tol_pos, tol_rot, max_iter, damping):
    """One damped least-squares run from ``q``; returns ``(q, diag)``."""
    lo, hi = model._lower, model._upper
    use_rot = tol_rot is not None
    st = KinematicState(model, q)
    e_pos, e_rot = _error(st, idx, target_R, target_t)

    def cost(ep, er):
        return float(ep @ ep + (er @ er if use_rot else 0.0))

    def done(ep, er):
        return np.linalg.norm(ep) <= tol_pos and (not use_rot or np.linalg.norm(er) <= tol_rot)

    c = cost(e_pos, e_rot)
    mu = max(damping, DAMPING_FLOOR)
    it = 0
    while not done(e_pos, e_rot) and it < max_iter and mu <= _DAMPING_CAP:
        it += 1
        J = st.site_jacobians(idx)[0]
        if use_rot:
            e = np.concatenate([e_pos, e_rot])
        else:
            J = J[:3]
            e = e_pos
        Jte = J.T @ e
        # joints resting on a limit that the error pulls further out stay put
        free = ~(((q <= lo) & (Jte < 0.0)) | ((q >= hi) & (Jte > 0.0)))
        Jf = J[:, free]
        JtJ = Jf.T @ Jf
        while mu <= _DAMPING_CAP:
            dq = np.zeros(len(q))
            dq[free] = np.linalg.solve(JtJ + mu * np.eye(len(JtJ)), Jte[free])
            q_new = np.clip(q + dq, lo, hi)
            st_new = KinematicState(model, q_new)
            ep, er = _error(st_new, idx, target_R, target_t)
            c_new = cost(ep, er)
            if c_new < c:
                mu = max(mu * 0.5, DAMPING_FLOOR)
                q, st, e_pos, e_rot, c = q_new, st_new, ep, er, c_new
                break
            mu *= 10.0
    diag = IKDiagnostics(it, float(np.linalg.norm(e_pos)), float(np.linalg.norm(e_rot)), bool(done(e_pos, e_rot)))
    return q, diag


def solve_ik(model, target, tcp_site, seed=None, tol_pos=1e-4, tol_rot=1e-3, max_iter=100,
             damping=1e-3, restarts=32, restart_seed=0):
    """Joints placing ``tcp_site`` at ``target``.

    ``tol_rot=None`` solves for position only.  When the run from ``seed``
    fails, up to ``restarts`` further runs start from configurations drawn
    uniformly within the limits by a generator seeded with ``restart_seed``.
    Raises :class:`NotConverged` carrying the best configuration found.
    """
    idx = model.site_indices([tcp_site])
    if not isinstance(target, RigidTransform):
        target = RigidTransform.from_array(target)
    if seed is None:
        seed = model.mid_range()
    if np.shape(seed) != (model.dof,):
        raise DimensionMismatch(f"seed has shape {np.shape(seed)}, model needs ({model.dof},)")
    q0 = clamp_joints(model, seed)[0]
    R, t = target.rotation_matrix(), target.translation

    q, diag = _dls(model, idx, R, t, q0, tol_pos, tol_rot, max_iter, damping)
    best_q, best = q, diag
    rng = None
    k = 0
    while not best.converged and k < restarts:
        if rng is None:
            rng = np.random.default_rng(restart_seed)
        k += 1
        start = rng.uniform(model._lower, model._upper)
        q, diag = _dls(model, idx, R, t, start, tol_pos, tol_rot, max_iter, damping)
        if diag.converged or (diag.pos_error, diag.rot_error) < (best.pos_error, best.rot_error):
            best_q, best = q, diag
    best.restarts = k
    if not best.converged:
        raise NotConverged(f"IK did not reach the target: position residual {best.pos_error:.3g} m, "
                           f"rotation residual {best.rot_error:.3g} rad", q=best_q, diagnostics=best)
    return best_q, best


@dataclass(eq=False)
class IKTrajectory:
    q: np.ndarray
    diagnostics: list
    failures: list = field(default_factory=list)
    max_step: float = 0.0

    @property
    def ok(self):
        return not self.failures

    def failed_indices(self):
        return [i for i, _ in self.failures]


def trajectory_ik(model, targets, tcp_site, seed=None, **kw):
    """Solve every pose of ``targets`` seeding frame ``t`` from frame ``t - 1``.

    Failed frames keep their best-effort joints and are listed in
    ``failures`` as ``(index, NotConverged)``; the next frame then seeds from
    the last solved one.
    """
    if isinstance(targets, np.ndarray):
        targets = [RigidTransform.from_array(a) for a in np.atleast_2d(targets)]
    if len(targets) == 0:
        raise DimensionMismatch("empty target trajectory")
    q_prev = model.mid_range() if seed is None else np.asarray(seed, dtype=float)
    out = np.empty((len(targets), model.dof))
    diags, failures = [], []
    for i, target in enumerate(targets):
        try:
            q, d = solve_ik(model, target, tcp_site, q_prev, **kw)
            q_prev = q
        except NotConverged as exc:
            q, d = exc.q, exc.diagnostics
            failures.append((i, exc))
        out[i] = q
        diags.append(d)
    step = float(np.max(np.abs(np.diff(out, axis=0)), initial=0.0))
    return IKTrajectory(out, diags, failures, step)
