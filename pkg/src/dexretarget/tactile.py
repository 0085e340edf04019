"""Contact discrepancy, distance-aware tactile attenuation and heatmap rasterization."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, LayoutError
from .kinmodel import KinematicState

CONVENTIONS = ("prose", "verbatim")


@dataclass(frozen=True)
class AttenuationParams:
    """``alpha`` in 1/m, ``beta`` in m.

    ``prose`` fades the signal as the discrepancy grows; ``verbatim``
    evaluates the logistic with the opposite sign, which grows with distance.
    """

    alpha: float = 2000.0
    beta: float = 0.0075
    sign_convention: str = "prose"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.beta >= 0:
            raise ValueError("beta must be non-negative")
        if self.sign_convention not in CONVENTIONS:
            raise ValueError(f"sign_convention must be one of {CONVENTIONS}")


@dataclass(frozen=True)
class ContactGate:
    force_threshold: float = 0.02

    def __post_init__(self):
        if not 0.0 <= self.force_threshold <= 1.0:
            raise ValueError("force_threshold must lie in [0, 1]")

    def active(self, forces):
        return np.asarray(forces, dtype=float) >= self.force_threshold


def site_discrepancy(glove_pt, dex_pt):
    d = np.asarray(glove_pt, dtype=float) - np.asarray(dex_pt, dtype=float)
    return float(math.sqrt(d @ d))


def contact_discrepancy(glove_pts, dex_pts):
    """Row-wise distances between corresponding contact points."""
    g = np.asarray(glove_pts, dtype=float)
    q = np.asarray(dex_pts, dtype=float)
    if g.shape != q.shape:
        raise DimensionMismatch(f"{g.shape} glove points against {q.shape} dex points")
    return np.linalg.norm(g - q, axis=-1)


def _logistic(x):
    # 1 / (1 + exp(-x)) without overflow for large |x|
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def attenuation_factor(delta, params=AttenuationParams()):
    z = params.alpha * (np.asarray(delta, dtype=float) - params.beta)
    if params.sign_convention == "prose":
        z = -z
    return _logistic(z)


def attenuate(gamma, delta, params=AttenuationParams()):
    g = np.clip(np.asarray(gamma, dtype=float), 0.0, 1.0)
    out = g * attenuation_factor(delta, params)
    return float(out) if out.ndim == 0 else out


def tactile_points(model, q, base, site_idx):
    """World positions of ``site_idx`` sites for configuration ``q`` at base pose ``base``."""
    p = KinematicState(model, q).site_positions(site_idx)
    return base.apply(p)


def retarget_tactile_frame(gamma, glove_pts, dex_pts, params=AttenuationParams(), gate=ContactGate()):
    gamma = np.asarray(gamma, dtype=float)
    delta = contact_discrepancy(glove_pts, dex_pts)
    out = np.clip(gamma, 0.0, 1.0) * attenuation_factor(delta, params)
    out[~gate.active(gamma)] = 0.0
    return np.clip(out, 0.0, 1.0), delta


def retarget_tactile_trajectory(demo, glove_model, dex_model, j_dex, p_dex, cmap,
                                params=AttenuationParams(), gate=ContactGate()):
    """Dex-hand tactile trajectory ``(T, M)`` from glove readings and the retargeted states.

    ``p_dex`` is a sequence of dex-hand base poses; glove points come from
    glove FK at the demonstration's wrist poses.
    """
    from .transforms import RigidTransform

    T = len(demo.timestamps)
    if len(j_dex) != T or len(p_dex) != T:
        raise DimensionMismatch(f"trajectory lengths differ: demo {T}, joints {len(j_dex)}, poses {len(p_dex)}")
    glove_idx = glove_model.site_indices(glove_model.site_names("tactile"))
    M = len(glove_idx)
    if demo.gamma_glove.shape[1] != M:
        raise DimensionMismatch(f"demo carries {demo.gamma_glove.shape[1]} tactile channels, glove model has {M}")
    dex_idx = cmap.dex_indices(dex_model, M)
    out = np.zeros((T, M))
    for t in range(T):
        base_g = RigidTransform.from_array(demo.p_glove[t])
        g = tactile_points(glove_model, demo.j_glove[t], base_g, glove_idx)
        q = tactile_points(dex_model, j_dex[t], p_dex[t], dex_idx)
        out[t], _ = retarget_tactile_frame(demo.gamma_glove[t], g, q, params, gate)
    return out


# --------------------------------------------------------------------------
# heatmaps

@dataclass(frozen=True)
class HeatmapLayout:
    """Grid placement of tactile sensors: ``cells[i] = (row, col)``."""

    height: int
    width: int
    cells: tuple
    cell_size: int = 1

    def __post_init__(self):
        seen = {}
        for i, (r, c) in enumerate(self.cells):
            if not (0 <= r < self.height and 0 <= c < self.width):
                raise LayoutError(f"sensor {i}: cell ({r}, {c}) outside {self.height}x{self.width} grid")
            if (r, c) in seen:
                raise LayoutError(f"sensors {seen[(r, c)]} and {i} share cell ({r}, {c})")
            seen[(r, c)] = i

    @classmethod
    def from_dict(cls, d, cell_size=None):
        cells = d.get("cells", {})
        try:
            n = 1 + max((int(k) for k in cells), default=-1)
        except ValueError:
            raise LayoutError("sensor indices must be integers") from None
        missing = [i for i in range(n) if str(i) not in cells and i not in cells]
        if missing:
            raise LayoutError(f"sensors without a cell: {missing}")
        ordered = tuple(tuple(int(v) for v in cells.get(str(i), cells.get(i))) for i in range(n))
        return cls(int(d["H"]), int(d["W"]), ordered, int(cell_size or d.get("cell_size", 1)))

    def to_dict(self):
        return {"H": self.height, "W": self.width, "cell_size": self.cell_size,
                "cells": {str(i): list(rc) for i, rc in enumerate(self.cells)}}

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def default_layout(model, cell_size=8):
    """One row per digit in declaration order, palm sensors on the last row."""
    rows, cols, cells = {}, {}, []
    for name in model.site_names("tactile"):
        group = name.split("_", 1)[0]
        if group not in rows:
            rows[group] = len(rows)
            cols[group] = 0
        cells.append((rows[group], cols[group]))
        cols[group] += 1
    width = max(cols.values(), default=1)
    return HeatmapLayout(max(len(rows), 1), width, tuple(cells), cell_size)


def _round_half_away(x):
    return np.floor(np.abs(x) + 0.5) * np.sign(x)


def rasterize_heatmap(values, layout):
    """RGB uint8 image; a sensor value ``v`` paints ``(255 v, 0, 255 (1 - v))``."""
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    if len(v) != len(layout.cells):
        raise LayoutError(f"frame has {len(v)} sensors, layout assigns {len(layout.cells)}")
    k = layout.cell_size
    img = np.zeros((layout.height * k, layout.width * k, 3), dtype=np.uint8)
    red = _round_half_away(255.0 * v).astype(np.uint8)
    blue = _round_half_away(255.0 * (1.0 - v)).astype(np.uint8)
    for i, (r, c) in enumerate(layout.cells):
        img[r * k:(r + 1) * k, c * k:(c + 1) * k] = (red[i], 0, blue[i])
    return img


def encode_ppm(img):
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = img.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + img.tobytes()


def write_ppm(path, img):
    Path(path).write_bytes(encode_ppm(img))


def read_ppm(path):
    data = Path(path).read_bytes()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+255\s", data)
    if m is None:
        raise ValueError(f"{path}: not an 8-bit binary PPM")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=m.end()).reshape(h, w, 3)
