"""Articulated kinematic models: URDF subset parsing, FK, site frames, Jacobians."""
from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ModelError, ModelSyntaxError, UnknownSite
from .transforms import RigidTransform, axis_angle_matrix

JOINT_TYPES = ("revolute", "prismatic", "fixed")
SITE_KINDS = ("keypoint", "tactile", "tcp")

_UNIT_TOL = 1e-9
_IGNORED_LINK_CHILDREN = {"visual", "collision", "inertial"}
_IGNORED_JOINT_CHILDREN = {"dynamics", "safety_controller", "calibration", "mimic"}


@dataclass(frozen=True)
class Link:
    name: str


@dataclass(frozen=True, eq=False)
class Joint:
    name: str
    type: str
    parent: str
    child: str
    axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    origin: RigidTransform = field(default_factory=RigidTransform)
    lower: float = 0.0
    upper: float = 0.0


@dataclass(frozen=True, eq=False)
class Site:
    name: str
    parent_link: str
    offset: RigidTransform = field(default_factory=RigidTransform)
    kind: str = "keypoint"
    local_direction: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))


class LinkPoses(dict):
    """Mapping link name -> world :class:`RigidTransform`.

    ``clamped`` flags the joint-vector entries that were outside their limits.
    """

    def __init__(self, poses, clamped):
        super().__init__(poses)
        self.clamped = clamped


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Immutable kinematic tree. Joint vectors follow the declaration order
    of non-fixed joints."""

    name: str
    links: tuple
    joints: tuple
    sites: tuple = ()
    warnings: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "sites", tuple(self.sites))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        _validate_and_index(self)

    @property
    def dof(self):
        return len(self._dof_joints)

    @property
    def base_link(self):
        return self.links[self._base].name

    @property
    def active_joints(self):
        return tuple(self.joints[j] for j in self._dof_joints)

    @property
    def lower(self):
        return self._lower.copy()

    @property
    def upper(self):
        return self._upper.copy()

    def mid_range(self):
        return 0.5 * (self._lower + self._upper)

    def site(self, name):
        try:
            return self.sites[self._site_index[name]]
        except KeyError:
            raise UnknownSite(name) from None

    def site_names(self, kind=None):
        return [s.name for s in self.sites if kind is None or s.kind == kind]

    def site_indices(self, names):
        out = []
        for n in names:
            if n not in self._site_index:
                raise UnknownSite(n)
            out.append(self._site_index[n])
        return np.array(out, dtype=int)

    def with_sites(self, sites):
        return RobotModel(self.name, self.links, self.joints, tuple(self.sites) + tuple(sites), self.warnings)

    def scaled(self, factor, name=None):
        """Copy with every joint-origin and site translation multiplied by ``factor``."""
        joints = [
            Joint(j.name, j.type, j.parent, j.child, j.axis,
                  RigidTransform(j.origin.rotation, factor * j.origin.translation), j.lower, j.upper)
            for j in self.joints
        ]
        sites = [
            Site(s.name, s.parent_link, RigidTransform(s.offset.rotation, factor * s.offset.translation),
                 s.kind, s.local_direction)
            for s in self.sites
        ]
        return RobotModel(name or self.name, self.links, joints, sites, self.warnings)


def _validate_and_index(model):
    link_index = {}
    for i, link in enumerate(model.links):
        if link.name in link_index:
            raise ModelError(f"duplicate link name {link.name!r}")
        link_index[link.name] = i
    if not link_index:
        raise ModelError("model has no links")

    joint_names = set()
    parent_joint = {}
    children = {i: [] for i in range(len(model.links))}
    for k, j in enumerate(model.joints):
        if j.name in joint_names:
            raise ModelError(f"duplicate joint name {j.name!r}")
        joint_names.add(j.name)
        if j.type not in JOINT_TYPES:
            raise ModelError(f"joint {j.name!r}: unsupported type {j.type!r}")
        for end in (j.parent, j.child):
            if end not in link_index:
                raise ModelError(f"joint {j.name!r} references unknown link {end!r}")
        c = link_index[j.child]
        if c in parent_joint:
            raise ModelError(f"link {j.child!r} has more than one parent joint")
        parent_joint[c] = k
        children[link_index[j.parent]].append(k)
        axis = np.asarray(j.axis, dtype=float)
        if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > _UNIT_TOL:
            raise ModelError(f"joint {j.name!r}: axis {axis.tolist()} is not unit length")
        if j.type != "fixed":
            if not (math.isfinite(j.lower) and math.isfinite(j.upper)):
                raise ModelError(f"joint {j.name!r}: limits must be finite")
            if j.lower > j.upper:
                raise ModelError(f"joint {j.name!r}: lower limit exceeds upper limit")

    roots = [i for i in range(len(model.links)) if i not in parent_joint]
    if len(roots) != 1:
        if not roots:
            raise ModelError("joint graph has a cycle (no root link)")
        raise ModelError(f"joint graph is not a single tree; roots: {[model.links[r].name for r in roots]}")
    base = roots[0]

    order = []
    stack = [base]
    seen = {base}
    while stack:
        li = stack.pop()
        for k in reversed(children[li]):
            c = link_index[model.joints[k].child]
            if c in seen:
                raise ModelError("joint graph has a cycle")
            seen.add(c)
            order.append(k)
            stack.append(c)
    if len(seen) != len(model.links):
        raise ModelError("joint graph has a cycle (links unreachable from the base)")

    dof_joints = [k for k, j in enumerate(model.joints) if j.type != "fixed"]
    dof_of_joint = {k: d for d, k in enumerate(dof_joints)}

    # ancestor_dofs[l] : boolean mask of actuated joints on the path base -> l
    n_dof = len(dof_joints)
    ancestor = np.zeros((len(model.links), n_dof), dtype=bool)
    for k in order:
        j = model.joints[k]
        p, c = link_index[j.parent], link_index[j.child]
        ancestor[c] = ancestor[p]
        if k in dof_of_joint:
            ancestor[c, dof_of_joint[k]] = True
    ancestor.flags.writeable = False

    site_index = {}
    for i, s in enumerate(model.sites):
        if s.name in site_index:
            raise ModelError(f"duplicate site name {s.name!r}")
        if s.parent_link not in link_index:
            raise ModelError(f"site {s.name!r} references unknown link {s.parent_link!r}")
        if s.kind not in SITE_KINDS:
            raise ModelError(f"site {s.name!r}: unknown kind {s.kind!r}")
        d = np.asarray(s.local_direction, dtype=float)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > _UNIT_TOL:
            raise ModelError(f"site {s.name!r}: direction is not unit length")
        site_index[s.name] = i

    lower = np.array([model.joints[k].lower for k in dof_joints], dtype=float)
    upper = np.array([model.joints[k].upper for k in dof_joints], dtype=float)

    fields = dict(
        _link_index=link_index,
        _base=base,
        _order=tuple(order),
        _dof_joints=tuple(dof_joints),
        _dof_of_joint=dof_of_joint,
        _ancestor=ancestor,
        _site_index=site_index,
        _lower=lower,
        _upper=upper,
        _origin_mats=[j.origin.matrix() for j in model.joints],
        _joint_parent=[link_index[j.parent] for j in model.joints],
        _joint_child=[link_index[j.child] for j in model.joints],
        _axes=[np.asarray(j.axis, dtype=float) for j in model.joints],
        _site_link=np.array([link_index[s.parent_link] for s in model.sites], dtype=int),
        _site_offset=np.array([s.offset.matrix() for s in model.sites]).reshape(-1, 4, 4),
        _site_dir=np.array([s.local_direction for s in model.sites], dtype=float).reshape(-1, 3),
    )
    for k, v in fields.items():
        object.__setattr__(model, k, v)


# --------------------------------------------------------------------------
# parsing

def _floats(text, n, what):
    try:
        vals = [float(v) for v in text.split()]
    except ValueError:
        raise ModelSyntaxError(f"{what}: expected {n} numbers, got {text!r}") from None
    if len(vals) != n:
        raise ModelSyntaxError(f"{what}: expected {n} numbers, got {text!r}")
    return vals


def _local(tag):
    return tag.rsplit("}", 1)[-1] if isinstance(tag, str) else ""


def _origin(elem, what):
    o = elem.find("origin")
    if o is None:
        return RigidTransform()
    xyz = _floats(o.get("xyz", "0 0 0"), 3, f"{what} origin xyz")
    rpy = _floats(o.get("rpy", "0 0 0"), 3, f"{what} origin rpy")
    return RigidTransform.from_xyz_rpy(xyz, rpy)


def _site_from_attrs(a, what="site"):
    name = a.get("name")
    parent = a.get("parent")
    if not name or not parent:
        raise ModelSyntaxError(f"{what} requires 'name' and 'parent'")
    xyz = a.get("xyz", "0 0 0")
    rpy = a.get("rpy", "0 0 0")
    d = a.get("dir", "1 0 0")
    xyz = _floats(xyz, 3, f"site {name!r} xyz") if isinstance(xyz, str) else [float(v) for v in xyz]
    rpy = _floats(rpy, 3, f"site {name!r} rpy") if isinstance(rpy, str) else [float(v) for v in rpy]
    d = _floats(d, 3, f"site {name!r} dir") if isinstance(d, str) else [float(v) for v in d]
    return Site(name, parent, RigidTransform.from_xyz_rpy(xyz, rpy), a.get("kind", "keypoint"), np.array(d))


def parse_robot_model(document):
    """Parse the structural URDF subset plus ``site`` extension elements.

    Visual, collision, inertial and other unsupported blocks are skipped; each
    skipped element is recorded in ``model.warnings``.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise ModelSyntaxError(f"malformed robot description: {exc}") from None
    if _local(root.tag) != "robot":
        raise ModelSyntaxError(f"root element must be <robot>, got <{_local(root.tag)}>")

    warnings = []
    links, joints, sites = [], [], []
    for elem in root:
        tag = _local(elem.tag)
        if tag == "link":
            name = elem.get("name")
            if not name:
                raise ModelSyntaxError("<link> without a name")
            for sub in elem:
                if _local(sub.tag) in _IGNORED_LINK_CHILDREN:
                    warnings.append(f"link {name!r}: ignored <{_local(sub.tag)}>")
            links.append(Link(name))
        elif tag == "joint":
            joints.append(_parse_joint(elem, warnings))
        elif tag == "site":
            sites.append(_site_from_attrs(elem.attrib))
        elif tag:
            warnings.append(f"ignored top-level <{tag}>")
    return RobotModel(root.get("name", ""), links, joints, sites, warnings)


def _parse_joint(elem, warnings):
    name = elem.get("name")
    jtype = elem.get("type")
    if not name or not jtype:
        raise ModelSyntaxError("<joint> requires 'name' and 'type'")
    parent = elem.find("parent")
    child = elem.find("child")
    if parent is None or child is None or not parent.get("link") or not child.get("link"):
        raise ModelSyntaxError(f"joint {name!r}: missing <parent>/<child> link")
    axis_el = elem.find("axis")
    axis = np.array(_floats(axis_el.get("xyz", "1 0 0"), 3, f"joint {name!r} axis")
                    if axis_el is not None else [1.0, 0.0, 0.0])
    lower = upper = 0.0
    if jtype in ("revolute", "prismatic"):
        lim = elem.find("limit")
        if lim is None or lim.get("lower") is None or lim.get("upper") is None:
            raise ModelError(f"joint {name!r}: non-fixed joint requires <limit lower upper>")
        try:
            lower, upper = float(lim.get("lower")), float(lim.get("upper"))
        except ValueError:
            raise ModelSyntaxError(f"joint {name!r}: non-numeric limit") from None
    for sub in elem:
        if _local(sub.tag) in _IGNORED_JOINT_CHILDREN:
            warnings.append(f"joint {name!r}: ignored <{_local(sub.tag)}>")
    return Joint(name, jtype, parent.get("link"), child.get("link"), axis,
                 _origin(elem, f"joint {name!r}"), lower, upper)


def load_robot_model(path, site_file=None):
    model = parse_robot_model(Path(path).read_text(encoding="utf-8"))
    if site_file is not None:
        model = model.with_sites(load_site_file(site_file))
    return model


def parse_site_records(records):
    if not isinstance(records, list):
        raise ModelSyntaxError("site file must hold a JSON array")
    return [_site_from_attrs(r, "site record") for r in records]


def load_site_file(path):
    try:
        records = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(f"site file {path}: {exc}") from None
    return parse_site_records(records)


# --------------------------------------------------------------------------
# kinematics

def clamp_joints(model, q):
    """Return ``(clamped q, mask of entries that were out of limits)``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.dof,):
        raise DimensionMismatch(f"joint vector has shape {q.shape}, model {model.name!r} needs ({model.dof},)")
    qc = np.minimum(np.maximum(q, model._lower), model._upper)
    return qc, qc != q


class KinematicState:
    """Link frames of one configuration, as 4x4 matrices in the model base frame.

    Cheap batch queries for site positions, directions and Jacobians; used by
    the optimizers so FK runs once per configuration.
    """

    def __init__(self, model, q):
        q, clamped = clamp_joints(model, q)
        self.model = model
        self.q = q
        self.clamped = clamped
        n_links = len(model.links)
        T = np.empty((n_links, 4, 4))
        T[model._base] = np.eye(4)
        axes_w = np.zeros((model.dof, 3))
        origins_w = np.zeros((model.dof, 3))
        for k in model._order:
            j = model.joints[k]
            Tj = T[model._joint_parent[k]] @ model._origin_mats[k]
            d = model._dof_of_joint.get(k)
            if d is None:
                T[model._joint_child[k]] = Tj
                continue
            a = model._axes[k]
            M = np.eye(4)
            if j.type == "revolute":
                M[:3, :3] = axis_angle_matrix(a, q[d])
            else:
                M[:3, 3] = a * q[d]
            T[model._joint_child[k]] = Tj @ M
            axes_w[d] = Tj[:3, :3] @ a
            origins_w[d] = Tj[:3, 3]
        self.link_mats = T
        self._axes_w = axes_w
        self._origins_w = origins_w
        self._revolute = np.array([model.joints[k].type == "revolute" for k in model._dof_joints], dtype=bool)

    def site_mats(self, idx):
        m = self.model
        return self.link_mats[m._site_link[idx]] @ m._site_offset[idx]

    def site_positions(self, idx):
        return self.site_mats(idx)[:, :3, 3]

    def site_directions(self, idx):
        mats = self.site_mats(idx)
        return np.einsum("kij,kj->ki", mats[:, :3, :3], self.model._site_dir[idx])

    def site_jacobians(self, idx):
        """Array ``(K, 6, dof)``: linear rows then angular rows, base frame."""
        m = self.model
        p = self.site_positions(idx)
        mask = m._ancestor[m._site_link[idx]]
        rev = self._revolute[None, :, None]
        lin = np.where(rev, np.cross(self._axes_w[None, :, :], p[:, None, :] - self._origins_w[None, :, :]),
                       self._axes_w[None, :, :])
        ang = np.where(rev, self._axes_w[None, :, :], 0.0)
        lin = lin * mask[:, :, None]
        ang = ang * mask[:, :, None]
        return np.concatenate([lin.transpose(0, 2, 1), ang.transpose(0, 2, 1)], axis=1)


def forward_kinematics(model, q):
    """World pose of every link; the base link sits at identity.

    Out-of-limit entries of ``q`` are clamped; the result's ``clamped``
    attribute records which ones.
    """
    st = KinematicState(model, q)
    poses = {link.name: RigidTransform.from_matrix(st.link_mats[i]) for i, link in enumerate(model.links)}
    return LinkPoses(poses, st.clamped)


def site_poses(model, q, site_names):
    idx = model.site_indices(site_names)
    st = KinematicState(model, q)
    return [RigidTransform.from_matrix(M) for M in st.site_mats(idx)]


def site_directions(model, q, site_names):
    idx = model.site_indices(site_names)
    return KinematicState(model, q).site_directions(idx)


def site_jacobian(model, q, site_name):
    """6 x dof geometric Jacobian of a site: linear velocity rows first."""
    idx = model.site_indices([site_name])
    return KinematicState(model, q).site_jacobians(idx)[0]
