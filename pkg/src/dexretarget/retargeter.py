"""Tactile-aware kinematic retargeting from glove states to dex-hand states.

Per frame, the dex-hand joints minimize

    L = 1/N sum_i (lambda_pos |p_i^G - p_i^D| + lambda_dir |d_i^G - d_i^D|)
      + 1/M sum_j w_j |g_j - q_j|

where ``w_j`` is a logistic weight of the measured contact force.  The
objective is a weighted sum of Euclidean norms; it is minimized with a
Levenberg-style damped Gauss-Newton iteration on the reweighted least-squares
model ``sum c/|r| |r + J dx|^2`` (which majorizes the norms at the current
point), with step rejection and projection onto the joint limits.

Terms whose residual reaches zero sit on the kink of their norm, where the
gradient is replaced by the least-norm element of the subdifferential; that
element is both the stationarity measure and the descent direction.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionMismatch, ModelError, NonFiniteLoss, UnknownSite
from .kinmodel import KinematicState, clamp_joints
from .tactile import AttenuationParams, ContactGate, retarget_tactile_trajectory
from .transforms import RigidTransform, quat_mul, rotvec_to_quat

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

# residual norms below this are treated as this when forming curvature weights
_NORM_FLOOR = 1e-9
# residual norm below which a term counts as sitting on the kink of its norm
_KINK_RADIUS = 1e-6
# nearly-kinked terms are left out of the damping scale
_SNAP_RADIUS = 1e-3
# joints this close to a limit count as resting on it
_BOUND_TOL = 1e-8
_MAX_DAMPING = 1e12
_MIN_DAMPING = 1e-12


def contact_weight(force, gain=20.0):
    """Logistic contact weight of a normalized force; inputs clamp to [0, 1]."""
    f = np.clip(np.asarray(force, dtype=float), 0.0, 1.0)
    w = 1.0 / (1.0 + np.exp(-gain * (f - 0.5)))
    return float(w) if w.ndim == 0 else w


@dataclass(frozen=True)
class CorrespondenceMap:
    """Glove tactile index ``i`` -> dex tactile site ``entries[i]``."""

    entries: tuple
    source: str = "static-anatomical"

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.source not in ("static-anatomical", "nearest-neighbor-canonical"):
            raise ValueError(f"unknown correspondence source {self.source!r}")

    def __len__(self):
        return len(self.entries)

    @classmethod
    def anatomical(cls, glove_model, dex_model):
        """Pair tactile sites that share a name in both models."""
        names = glove_model.site_names("tactile")
        dex_names = set(dex_model.site_names("tactile"))
        missing = [n for n in names if n not in dex_names]
        if missing:
            raise ModelError(f"dex model lacks tactile sites {missing}; supply an explicit map")
        return cls(tuple(names), "static-anatomical")

    @classmethod
    def nearest_neighbor(cls, glove_model, dex_model, q_glove=None, q_dex=None):
        """Nearest dex tactile site to each glove tactile site, both hands at a canonical pose."""
        qg = clamp_joints(glove_model, np.zeros(glove_model.dof) if q_glove is None else q_glove)[0]
        qd = clamp_joints(dex_model, np.zeros(dex_model.dof) if q_dex is None else q_dex)[0]
        gn = glove_model.site_names("tactile")
        dn = dex_model.site_names("tactile")
        g = KinematicState(glove_model, qg).site_positions(glove_model.site_indices(gn))
        d = KinematicState(dex_model, qd).site_positions(dex_model.site_indices(dn))
        nearest = np.argmin(np.linalg.norm(g[:, None, :] - d[None, :, :], axis=2), axis=1)
        return cls(tuple(dn[k] for k in nearest), "nearest-neighbor-canonical")

    @classmethod
    def from_dict(cls, d, source="static-anatomical"):
        """Parse ``{glove_index: dex_site_name}``; the map must cover 0..M-1."""
        try:
            items = {int(k): str(v) for k, v in d.items()}
        except (TypeError, ValueError):
            raise ConfigError("correspondence keys must be integer glove tactile indices") from None
        M = len(items)
        if sorted(items) != list(range(M)):
            raise ConfigError(f"correspondence map is not total over 0..{M - 1}")
        return cls(tuple(items[i] for i in range(M)), source)

    def to_dict(self):
        return {str(i): n for i, n in enumerate(self.entries)}

    def dex_indices(self, dex_model, M=None):
        if M is not None and M != len(self.entries):
            raise DimensionMismatch(f"map covers {len(self.entries)} glove sensors, data has {M}")
        return dex_model.site_indices(self.entries)


def calibrate_mount_offset(glove_model, dex_model, keypoint_pairs):
    """Fixed translation placing the dex-hand base so its keypoints best overlay
    the glove's, both hands at mid-range joints.

    The least-squares translation is the mean keypoint offset, expressed in the
    hand frame.  Identical models give the identity.
    """
    if not keypoint_pairs:
        raise ConfigError("keypoint_pairs must not be empty")
    gi = glove_model.site_indices([a for a, _ in keypoint_pairs])
    di = dex_model.site_indices([b for _, b in keypoint_pairs])
    gp = KinematicState(glove_model, glove_model.mid_range()).site_positions(gi)
    dp = KinematicState(dex_model, dex_model.mid_range()).site_positions(di)
    return RigidTransform(np.array([1.0, 0.0, 0.0, 0.0]), (gp - dp).mean(axis=0))


@dataclass(frozen=True)
class RetargetConfig:
    keypoint_pairs: tuple
    tactile_map: CorrespondenceMap
    lambda_pos: float = 1.0
    lambda_dir: float = 0.1
    force_sigmoid_gain: float = 20.0
    max_iterations: int = 100
    gradient_tolerance: float = 1e-6
    step_damping: float = 1e-3
    optimize_wrist: bool = False
    mount_offset: RigidTransform = field(default_factory=RigidTransform)
    contact_gate: ContactGate = field(default_factory=ContactGate)
    attenuation: AttenuationParams = field(default_factory=AttenuationParams)

    def __post_init__(self):
        object.__setattr__(self, "keypoint_pairs", tuple(tuple(p) for p in self.keypoint_pairs))
        if not self.keypoint_pairs:
            raise ConfigError("keypoint_pairs must not be empty")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not self.gradient_tolerance > 0:
            raise ConfigError("gradient_tolerance must be positive")
        if self.lambda_pos < 0 or self.lambda_dir < 0:
            raise ConfigError("keypoint weights must be non-negative")

    @classmethod
    def default(cls, glove_model, dex_model, **overrides):
        """Pair same-named keypoint sites and tactile sites of the two models."""
        dex_kp = set(dex_model.site_names("keypoint"))
        pairs = tuple((n, n) for n in glove_model.site_names("keypoint") if n in dex_kp)
        if not pairs:
            raise ConfigError("models share no keypoint site names; give keypoint_pairs explicitly")
        overrides.setdefault("keypoint_pairs", pairs)
        if "tactile_map" not in overrides:
            overrides["tactile_map"] = CorrespondenceMap.anatomical(glove_model, dex_model)
        return cls(**overrides)

    @classmethod
    def from_dict(cls, d, glove_model, dex_model):
        d = dict(d)
        base = cls.default(glove_model, dex_model) if "keypoint_pairs" not in d else None
        kw = {}
        if "keypoint_pairs" in d:
            kw["keypoint_pairs"] = tuple(tuple(p) for p in d.pop("keypoint_pairs"))
        tm = d.pop("tactile_map", None)
        source = d.pop("tactile_map_source", "static-anatomical")
        if isinstance(tm, dict):
            kw["tactile_map"] = CorrespondenceMap.from_dict(tm, source)
        elif isinstance(tm, str):
            kw["tactile_map"] = CorrespondenceMap.from_dict(json.loads(Path(tm).read_text(encoding="utf-8")), source)
        elif source == "nearest-neighbor-canonical":
            kw["tactile_map"] = CorrespondenceMap.nearest_neighbor(glove_model, dex_model)
        else:
            kw["tactile_map"] = CorrespondenceMap.anatomical(glove_model, dex_model)
        if "mount_offset" in d:
            m = d.pop("mount_offset")
            if m == "auto":
                pairs = kw.get("keypoint_pairs", base.keypoint_pairs if base is not None else ())
                kw["mount_offset"] = calibrate_mount_offset(glove_model, dex_model, pairs)
            elif isinstance(m, dict):
                kw["mount_offset"] = RigidTransform.from_xyz_rpy(m.get("xyz", (0, 0, 0)), m.get("rpy", (0, 0, 0)))
            else:
                raise ConfigError("mount_offset must be 'auto' or a table with xyz and rpy")
        if "contact_gate" in d:
            kw["contact_gate"] = ContactGate(**d.pop("contact_gate"))
        if "attenuation" in d:
            kw["attenuation"] = AttenuationParams(**d.pop("attenuation"))
        known = {"lambda_pos", "lambda_dir", "force_sigmoid_gain", "max_iterations",
                 "gradient_tolerance", "step_damping", "optimize_wrist"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown retarget config keys: {sorted(unknown)}")
        kw.update(d)
        try:
            cfg = replace(base, **kw) if base is not None else cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        for a, _ in cfg.keypoint_pairs:
            glove_model.site(a)
        for _, b in cfg.keypoint_pairs:
            dex_model.site(b)
        cfg.tactile_map.dex_indices(dex_model)
        return cfg

    @classmethod
    def load(cls, path, glove_model, dex_model):
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        try:
            d = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
        except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(d.get("retarget", d), glove_model, dex_model)


@dataclass
class FrameDiagnostics:
    loss: float
    kin_loss: float
    tac_loss: float
    iterations: int
    converged: bool
    gradient_norm: float
    at_limit: np.ndarray
    skipped: bool = False

    def to_json(self):
        def num(v):
            return float(v) if math.isfinite(v) else None

        return {"loss": num(self.loss), "kin_loss": num(self.kin_loss), "tac_loss": num(self.tac_loss),
                "iterations": self.iterations, "converged": self.converged,
                "gradient_norm": num(self.gradient_norm),
                "at_limit": [int(i) for i in np.flatnonzero(self.at_limit)], "skipped": self.skipped}


@dataclass(eq=False)
class RetargetResult:
    j_dex: np.ndarray
    p_dex: list
    gamma_dex: np.ndarray
    diagnostics: list

    @property
    def T(self):
        return len(self.j_dex)

    def converged_fraction(self):
        return float(np.mean([d.converged for d in self.diagnostics]))

    def total_iterations(self):
        return int(sum(d.iterations for d in self.diagnostics))


# --------------------------------------------------------------------------
# loss terms

def kinematic_loss(glove_kp, dex_kp, cfg):
    """Mean weighted keypoint position and direction distance.

    ``glove_kp`` and ``dex_kp`` are ``(positions, directions)`` pairs of
    ``(N, 3)`` arrays in the world frame.
    """
    gp, gd = (np.asarray(a, dtype=float) for a in glove_kp)
    dp, dd = (np.asarray(a, dtype=float) for a in dex_kp)
    if gp.shape != dp.shape or gd.shape != dd.shape or gp.shape != gd.shape or len(gp) == 0:
        raise DimensionMismatch("keypoint sets must be non-empty and of equal shape")
    per = cfg.lambda_pos * np.linalg.norm(gp - dp, axis=1) + cfg.lambda_dir * np.linalg.norm(gd - dd, axis=1)
    return float(per.mean())


def tactile_loss(glove_pts, glove_forces, dex_model, j_dex, p_dex, cmap, gate=None, gain=20.0):
    """Mean contact-weighted distance between glove tactile points and their dex sites.

    With a ``gate``, sensors below its force threshold get weight exactly 0.
    """
    g = np.asarray(glove_pts, dtype=float)
    f = np.asarray(glove_forces, dtype=float)
    if g.ndim != 2 or len(g) != len(f):
        raise DimensionMismatch(f"{len(g)} tactile points for {len(f)} forces")
    idx = cmap.dex_indices(dex_model, len(g))
    q = p_dex.apply(KinematicState(dex_model, j_dex).site_positions(idx))
    w = contact_weight(f, gain) * np.ones(len(f))
    if gate is not None:
        w = np.where(gate.active(f), w, 0.0)
    return float((w * np.linalg.norm(g - q, axis=1)).sum() / len(g))


def _skew(v):
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


class FrameProblem:
    """The retargeting energy of one frame as a function of dex joints (and
    optionally a wrist twist), with analytic gradient and a Gauss-Newton
    curvature model."""

    def __init__(self, glove_model, dex_model, cfg, j_glove, p_glove, gamma):
        self.dex_model = dex_model
        self.cfg = cfg
        gamma = np.asarray(gamma, dtype=float)
        gkp = glove_model.site_indices([a for a, _ in cfg.keypoint_pairs])
        self.dex_kp = dex_model.site_indices([b for _, b in cfg.keypoint_pairs])
        gst = KinematicState(glove_model, j_glove)
        R = p_glove.rotation_matrix()
        self.glove_kp_pos = p_glove.apply(gst.site_positions(gkp))
        self.glove_kp_dir = gst.site_directions(gkp) @ R.T
        gtac = glove_model.site_indices(glove_model.site_names("tactile"))
        M = len(gtac)
        if len(gamma) != M:
            raise DimensionMismatch(f"tactile frame has {len(gamma)} channels, glove model has {M}")
        self.M = M
        self.N = len(self.dex_kp)
        dex_tac = cfg.tactile_map.dex_indices(dex_model, M)
        w = contact_weight(gamma, cfg.force_sigmoid_gain) * np.ones(M)
        active = cfg.contact_gate.active(gamma) & (w > 0.0)
        self.tac_w = w[active]
        self.dex_tac = dex_tac[active]
        self.glove_tac = p_glove.apply(gst.site_positions(gtac))[active]
        self.n_joint = dex_model.dof
        self.n_var = self.n_joint + (6 if cfg.optimize_wrist else 0)

    def evaluate(self, q, base, need_derivatives=True):
        """Return ``(L, L_kin, L_tac, grad, H)`` at joints ``q`` and base pose ``base``."""
        cfg = self.cfg
        st = KinematicState(self.dex_model, q)
        R = base.rotation_matrix()
        t = base.translation
        idx = np.concatenate([self.dex_kp, self.dex_tac])
        pos = st.site_positions(idx) @ R.T + t
        kp_pos, tac_pos = pos[:self.N], pos[self.N:]
        kp_dir = st.site_directions(self.dex_kp) @ R.T

        r_pos = kp_pos - self.glove_kp_pos
        r_dir = kp_dir - self.glove_kp_dir
        r_tac = tac_pos - self.glove_tac
        n_pos = np.linalg.norm(r_pos, axis=1)
        n_dir = np.linalg.norm(r_dir, axis=1)
        n_tac = np.linalg.norm(r_tac, axis=1)
        c_pos = np.full(self.N, cfg.lambda_pos / self.N)
        c_dir = np.full(self.N, cfg.lambda_dir / self.N)
        c_tac = self.tac_w / self.M
        l_kin = float((c_pos * n_pos).sum() + (c_dir * n_dir).sum())
        l_tac = float((c_tac * n_tac).sum())
        loss = l_kin + l_tac
        if not math.isfinite(loss):
            raise NonFiniteLoss(f"retargeting energy is {loss}")
        if not need_derivatives:
            return loss, l_kin, l_tac, None, None

        J = st.site_jacobians(idx)
        J_lin = np.einsum("ij,kjn->kin", R, J[:, :3, :])
        J_kp_ang = np.einsum("ij,kjn->kin", R, J[:self.N, 3:, :])
        # d(direction)/dq = omega x d
        J_dir = np.cross(J_kp_ang.transpose(0, 2, 1), kp_dir[:, None, :]).transpose(0, 2, 1)
        if cfg.optimize_wrist:
            K = len(pos)
            W_lin = np.concatenate([np.broadcast_to(np.eye(3), (K, 3, 3)),
                                    np.stack([-_skew(p - t) for p in pos])], axis=2)
            W_dir = np.concatenate([np.zeros((self.N, 3, 3)), np.stack([-_skew(d) for d in kp_dir])], axis=2)
            J_lin = np.concatenate([J_lin, W_lin], axis=2)
            J_dir = np.concatenate([J_dir, W_dir], axis=2)

        r = np.concatenate([r_pos, r_dir, r_tac])
        Jr = np.concatenate([J_lin[:self.N], J_dir, J_lin[self.N:]])
        c = np.concatenate([c_pos, c_dir, c_tac])
        nr = np.concatenate([n_pos, n_dir, n_tac])
        unit = np.divide(r, nr[:, None], out=np.zeros_like(r), where=nr[:, None] > 0.0)
        grad = np.einsum("k,kin,ki->n", c, Jr, unit)
        wt = c / np.maximum(nr, _NORM_FLOOR)
        H = np.einsum("k,kin,kim->nm", wt, Jr, Jr)
        # terms sitting on the kink of the norm; their gradient is any c J^T u with |u| <= 1
        kink = (nr <= _KINK_RADIUS) & (c > 0.0)
        g_smooth = grad - np.einsum("k,kin,ki->n", c[kink], Jr[kink], unit[kink])
        A = (c[kink, None, None] * Jr[kink]).transpose(2, 0, 1).reshape(len(grad), -1)
        self.kink = (g_smooth, A)
        far = nr > _SNAP_RADIUS
        self.curvature_scale = float(np.einsum("k,kin,kin->", wt[far], Jr[far], Jr[far])) / len(grad)
        near = ~far & ~kink & (c > 0.0)
        self.snap_H = []
        if near.any():
            # and one that lets them move away from it quickly
            relax = c[near] / _SNAP_RADIUS - wt[near]
            self.snap_H.append((H + np.einsum("k,kin,kim->nm", relax, Jr[near], Jr[near]), np.zeros(len(grad))))
        for k in np.flatnonzero(near):
            w_snap = c[k] / _NORM_FLOOR
            # quadratic model whose minimum puts the term's residual at zero
            self.snap_H.append((H + (w_snap - wt[k]) * (Jr[k].T @ Jr[k]), (w_snap - wt[k]) * (Jr[k].T @ r[k])))
        return loss, l_kin, l_tac, grad, H

    def gradient(self, q, base=None):
        return self.evaluate(q, base)[3]


def _step_base(base, dx):
    """Apply a world-frame twist ``(dt, dw)`` rotating about the base origin."""
    return RigidTransform(quat_mul(rotvec_to_quat(dx[3:]), base.rotation), base.translation + dx[:3])


def _projected_gradient(g, q, lo, hi, n_joint):
    pg = g.copy()
    jg = pg[:n_joint]
    jg[(q <= lo + _BOUND_TOL) & (jg > 0.0)] = 0.0
    jg[(q >= hi - _BOUND_TOL) & (jg < 0.0)] = 0.0
    return pg


def stationarity(g_smooth, A, q, lo, hi, n_joint, tol=0.0, iterations=2000):
    """Smallest projected (sub)gradient of the energy, in max-norm.

    ``g_smooth`` is the gradient of the differentiable terms and the columns of
    ``A`` come in triples, one per term at the kink of its norm, each of which
    contributes ``A_k u_k`` for any ``|u_k| <= 1``.  The least-norm element is
    found by accelerated projected gradient on ``u`` with adaptive restart;
    it stops early once the max-norm drops below ``tol``.  Returns the norm
    and the subgradient ``g_smooth + A u``, a descent direction when negated.
    """
    def measure(v):
        return float(np.max(np.abs(_projected_gradient(v, q, lo, hi, n_joint)), initial=0.0))

    m = measure(g_smooth)
    if A.shape[1] == 0 or m <= tol:
        return m, g_smooth
    L = float(np.linalg.norm(A, 2)) ** 2
    if L == 0.0:
        return m, g_smooth

    def ball(u):
        u = u.reshape(-1, 3)
        return (u / np.maximum(np.linalg.norm(u, axis=1), 1.0)[:, None]).reshape(-1)

    u = ball(np.linalg.lstsq(A, -g_smooth, rcond=None)[0])
    y, tk = u.copy(), 1.0
    step_tol = 1e-12 * max(1.0, float(np.linalg.norm(u)))
    for _ in range(iterations):
        v = g_smooth + A @ u
        if measure(v) <= tol:
            break
        u_new = ball(y - (A.T @ _projected_gradient(g_smooth + A @ y, q, lo, hi, n_joint)) / L)
        du = u_new - u
        if float(np.linalg.norm(du)) <= step_tol:
            u = u_new
            break
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        if float((y - u_new) @ du) > 0.0:
            # momentum points uphill: restart
            y, tk = u_new.copy(), 1.0
        else:
            y, tk = u_new + ((tk - 1.0) / tn) * du, tn
        u = u_new
    v = g_smooth + A @ u
    return measure(v), v


def retarget_frame(glove_state, glove_model, dex_model, cfg, warm_start=None):
    """Retarget one glove frame ``(j_glove, p_glove, gamma)``.

    Returns ``(j_dex, p_dex, FrameDiagnostics)``.  Deterministic: identical
    inputs give bit-identical outputs.
    """
    j_glove, p_glove, gamma = glove_state
    if not isinstance(p_glove, RigidTransform):
        p_glove = RigidTransform.from_array(p_glove)
    prob = FrameProblem(glove_model, dex_model, cfg, j_glove, p_glove, gamma)
    lo, hi = dex_model._lower, dex_model._upper
    n = dex_model.dof
    if warm_start is None:
        q = dex_model.mid_range()
    else:
        if np.shape(warm_start) != (n,):
            raise DimensionMismatch(f"warm start has shape {np.shape(warm_start)}, dex model needs ({n},)")
        q = clamp_joints(dex_model, warm_start)[0]
    base = p_glove @ cfg.mount_offset

    loss, l_kin, l_tac, g, H = prob.evaluate(q, base)
    mu = cfg.step_damping
    converged = False
    iterations = 0
    gnorm, g = stationarity(*prob.kink, q, lo, hi, n, cfg.gradient_tolerance)
    while True:
        if gnorm <= cfg.gradient_tolerance or loss == 0.0:
            converged = True
            break
        if iterations >= cfg.max_iterations or mu > _MAX_DAMPING:
            break
        iterations += 1
        free = np.ones(prob.n_var, dtype=bool)
        free[:n] = ~(((q <= lo + _BOUND_TOL) & (g[:n] > 0.0)) | ((q >= hi - _BOUND_TOL) & (g[:n] < 0.0)))
        Hf = H[np.ix_(free, free)]
        scale = prob.curvature_scale
        if not scale > 0.0:
            scale = max(float(np.trace(Hf)) / max(len(Hf), 1), 1e-300)
        while True:
            dx = np.zeros(prob.n_var)
            dx[free] = np.linalg.solve(Hf + (mu * scale) * np.eye(len(Hf)), -g[free])
            q_new = np.minimum(np.maximum(q + dx[:n], lo), hi)
            base_new = _step_base(base, dx[n:]) if cfg.optimize_wrist else base
            loss_new = prob.evaluate(q_new, base_new, need_derivatives=False)[0]
            if loss_new < loss:
                mu_used = mu * scale
                mu = max(mu * 0.5, _MIN_DAMPING)
                break
            mu *= 10.0
            if mu > _MAX_DAMPING:
                break
        if mu > _MAX_DAMPING:
            break
        for Hs, gs in prob.snap_H:
            # same damping with one nearly-kinked term pulled onto its kink; keep the better step
            dx = np.zeros(prob.n_var)
            Hs = Hs[np.ix_(free, free)]
            dx[free] = np.linalg.solve(Hs + mu_used * np.eye(len(Hs)), -(g + gs)[free])
            q_s = np.minimum(np.maximum(q + dx[:n], lo), hi)
            base_s = _step_base(base, dx[n:]) if cfg.optimize_wrist else base
            loss_s = prob.evaluate(q_s, base_s, need_derivatives=False)[0]
            if loss_s < loss_new:
                q_new, base_new, loss_new = q_s, base_s, loss_s
        q, base = q_new, base_new
        loss, l_kin, l_tac, g, H = prob.evaluate(q, base)
        gnorm, g = stationarity(*prob.kink, q, lo, hi, n, cfg.gradient_tolerance)

    diag = FrameDiagnostics(loss, l_kin, l_tac, iterations, converged, gnorm, (q <= lo) | (q >= hi))
    return q, base, diag


def retarget_trajectory(demo, glove_model, dex_model, cfg, warm_start=True, on_frame_error="abort"):
    """Retarget every frame, warm-starting each from its predecessor.

    Frame 0 starts from the mid-range joint configuration; with
    ``warm_start=False`` every frame does.  A frame whose energy turns
    non-finite aborts the run, or with ``on_frame_error="skip"`` keeps the
    previous joints and is marked ``skipped`` in its diagnostics.
    """
    if on_frame_error not in ("abort", "skip"):
        raise ValueError(f"on_frame_error must be 'abort' or 'skip', got {on_frame_error!r}")
    T = demo.T
    j_dex = np.empty((T, dex_model.dof))
    p_dex = []
    diags = []
    prev = None
    for t in range(T):
        try:
            q, base, d = retarget_frame(demo.frame(t), glove_model, dex_model, cfg,
                                        warm_start=prev if warm_start else None)
        except NonFiniteLoss as exc:
            if on_frame_error == "abort":
                exc.frame = t
                exc.args = (f"frame {t}: {exc}",) + exc.args[1:]
                raise
            q = prev if prev is not None else dex_model.mid_range()
            base = demo.glove_pose(t) @ cfg.mount_offset
            nan = float("nan")
            d = FrameDiagnostics(nan, nan, nan, 0, False, nan, (q <= dex_model._lower) | (q >= dex_model._upper),
                                 skipped=True)
        except (DimensionMismatch, UnknownSite) as exc:
            exc.frame = t
            exc.args = (f"frame {t}: {exc}",) + exc.args[1:]
            raise
        j_dex[t] = q
        p_dex.append(base)
        diags.append(d)
        prev = q
    gamma = retarget_tactile_trajectory(demo, glove_model, dex_model, j_dex, p_dex, cfg.tactile_map,
                                        cfg.attenuation, cfg.contact_gate)
    return RetargetResult(j_dex, p_dex, gamma, diags)
