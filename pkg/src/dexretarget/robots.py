"""Built-in robot descriptions used by the synthetic pipeline and the tests.

The glove hand has 20 joints (four per digit) and 32 tactile sites; the
dex-hand defaults to the same topology with every length scaled by 0.9.
"""
from __future__ import annotations

import math

from .kinmodel import parse_robot_model

DIGITS = ("thumb", "index", "middle", "ring", "little")

# (mcp origin xyz, segment lengths, yaw of the digit base)
_FINGERS = {
    "index": ((0.092, 0.026, 0.0), (0.046, 0.026, 0.022), 0.06),
    "middle": ((0.095, 0.006, 0.0), (0.050, 0.029, 0.023), 0.0),
    "ring": ((0.090, -0.013, 0.0), (0.047, 0.028, 0.022), -0.05),
    "little": ((0.082, -0.031, 0.0), (0.038, 0.021, 0.020), -0.10),
}
_THUMB = ((0.030, 0.030, -0.015), (0.040, 0.033, 0.026), 0.6, -0.8)

# tactile sites per digit: (segment index, fraction of segment length)
_TACTILE_LAYOUT = ((2, 0.35), (2, 0.65), (2, 0.9), (1, 0.35), (1, 0.7), (0, 0.5))
_PAD_DEPTH = 0.007


def _fmt(v):
    return " ".join(format(float(x), ".17g") for x in v)


def _joint(name, parent, child, xyz, rpy, axis, lower, upper):
    return (
        f'  <joint name="{name}" type="revolute">\n'
        f'    <parent link="{parent}"/><child link="{child}"/>\n'
        f'    <origin xyz="{_fmt(xyz)}" rpy="{_fmt(rpy)}"/>\n'
        f'    <axis xyz="{_fmt(axis)}"/>\n'
        f'    <limit lower="{lower!r}" upper="{upper!r}" effort="1" velocity="1"/>\n'
        f"  </joint>\n"
    )


def _site(name, parent, xyz, kind, direction=(1.0, 0.0, 0.0)):
    return (f'  <ext:site name="{name}" parent="{parent}" xyz="{_fmt(xyz)}" '
            f'kind="{kind}" dir="{_fmt(direction)}"/>\n')


def hand_urdf(scale=1.0, name="glove"):
    """Robot description text for the five-digit hand at the given size."""
    s = scale
    out = [f'<?xml version="1.0"?>\n<robot name="{name}" xmlns:ext="urn:dexretarget:sites">\n',
           '  <link name="palm"/>\n']
    tactile = []
    for digit in DIGITS:
        if digit == "thumb":
            base, lengths, yaw, roll = _THUMB
            base_rpy = (roll, 0.0, yaw)
            first_axis, first_lim = (0.0, 0.0, 1.0), (-0.5, 0.6)
            flex_lims = ((-0.2, 1.0), (-0.2, 1.1), (-0.2, 1.4))
        else:
            base, lengths, yaw = _FINGERS[digit]
            base_rpy = (0.0, 0.0, yaw)
            first_axis, first_lim = (0.0, 0.0, 1.0), (-0.35, 0.35)
            flex_lims = ((-0.3, 1.6), (0.0, 1.8), (0.0, 1.5))
        seg = [f"{digit}_base", f"{digit}_proximal", f"{digit}_middle", f"{digit}_distal"]
        for link in seg:
            out.append(f'  <link name="{link}"/>\n')
        out.append(_joint(f"{digit}_abd", "palm", seg[0], [s * v for v in base], base_rpy,
                          first_axis, *first_lim))
        out.append(_joint(f"{digit}_j1", seg[0], seg[1], (0.0, 0.0, 0.0), (0.0, 0.0, 0.0),
                          (0.0, 1.0, 0.0), *flex_lims[0]))
        out.append(_joint(f"{digit}_j2", seg[1], seg[2], (s * lengths[0], 0.0, 0.0), (0.0, 0.0, 0.0),
                          (0.0, 1.0, 0.0), *flex_lims[1]))
        out.append(_joint(f"{digit}_j3", seg[2], seg[3], (s * lengths[1], 0.0, 0.0), (0.0, 0.0, 0.0),
                          (0.0, 1.0, 0.0), *flex_lims[2]))
        out.append(_site(f"{digit}_tip", seg[3], (s * lengths[2], 0.0, 0.0), "keypoint"))
        for k, (si, frac) in enumerate(_TACTILE_LAYOUT):
            tactile.append(_site(f"{digit}_tac{k}", seg[si + 1],
                                 (s * frac * lengths[si], 0.0, -s * _PAD_DEPTH), "tactile"))
    tactile.append(_site("palm_tac0", "palm", (s * 0.055, s * 0.015, -s * 0.012), "tactile"))
    tactile.append(_site("palm_tac1", "palm", (s * 0.055, -s * 0.015, -s * 0.012), "tactile"))
    out.append(_site("palm_center", "palm", (s * 0.05, 0.0, 0.0), "keypoint", (0.0, 0.0, -1.0)))
    out.append(_site("wrist_mount", "palm", (0.0, 0.0, 0.0), "tcp"))
    out.extend(tactile)
    out.append("</robot>\n")
    return "".join(out)


def glove_model():
    return parse_robot_model(hand_urdf(1.0, "glove"))


def dex_model(scale=0.9):
    return parse_robot_model(hand_urdf(scale, "dexhand"))


def planar_arm_urdf(link_length=0.5, tip_offset=0.0):
    """Two revolute z-axis joints with links along x."""
    L = link_length
    return (
        '<robot name="planar2">\n'
        '  <link name="base"/><link name="link1"/><link name="link2"/>\n'
        + _joint("j1", "base", "link1", (0, 0, 0), (0, 0, 0), (0, 0, 1), -math.pi, math.pi)
        + _joint("j2", "link1", "link2", (L, 0, 0), (0, 0, 0), (0, 0, 1), -math.pi, math.pi)
        + f'  <site name="tip" parent="link2" xyz="{_fmt((L + tip_offset, 0, 0))}" kind="tcp"/>\n'
        "</robot>\n"
    )


def arm6_urdf():
    """Six-axis industrial arm with UR5-like geometry and a ``tool`` TCP site."""
    h = math.pi / 2
    lim = math.pi
    return (
        '<robot name="arm6">\n'
        '  <link name="base"/><link name="shoulder"/><link name="upper_arm"/><link name="forearm"/>\n'
        '  <link name="wrist1"/><link name="wrist2"/><link name="wrist3"/><link name="flange"/>\n'
        + _joint("shoulder_pan", "base", "shoulder", (0, 0, 0.089159), (0, 0, 0), (0, 0, 1), -lim, lim)
        + _joint("shoulder_lift", "shoulder", "upper_arm", (0, 0.13585, 0), (0, h, 0), (0, 1, 0), -lim, lim)
        + _joint("elbow", "upper_arm", "forearm", (0, -0.1197, 0.425), (0, 0, 0), (0, 1, 0), -lim, lim)
        + _joint("wrist_1", "forearm", "wrist1", (0, 0, 0.39225), (0, h, 0), (0, 1, 0), -lim, lim)
        + _joint("wrist_2", "wrist1", "wrist2", (0, 0.093, 0), (0, 0, 0), (0, 0, 1), -lim, lim)
        + _joint("wrist_3", "wrist2", "wrist3", (0, 0, 0.09465), (0, 0, 0), (0, 1, 0), -lim, lim)
        + '  <joint name="flange_fixed" type="fixed">\n'
          '    <parent link="wrist3"/><child link="flange"/>\n'
          f'    <origin xyz="0 0.0823 0" rpy="{_fmt((-h, 0, 0))}"/>\n'
          "  </joint>\n"
        + '  <site name="tool" parent="flange" xyz="0 0 0" kind="tcp"/>\n'
        "</robot>\n"
    )


def arm_model():
    return parse_robot_model(arm6_urdf())


BUILTIN_MODELS = {
    "glove": glove_model,
    "dex": dex_model,
    "arm6": arm_model,
}
