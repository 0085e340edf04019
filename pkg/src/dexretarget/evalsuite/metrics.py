"""Contact-point error between glove and retargeted dex-hand tactile sites."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch
from ..tactile import ContactGate, contact_discrepancy, tactile_points
from ..transforms import RigidTransform

# published real-object benchmark, kept as context only
REFERENCE_MEAN_MM = 3.86
REFERENCE_NOTE = "published real-object benchmark; not reproduced here (needs the original recordings)"


@dataclass
class ObjectContactError:
    """Statistics of the contact discrepancy for one object, in mm.

    ``series_mm[t]`` is the mean over gated-in sensors at frame ``t`` (NaN
    when no sensor is in contact).
    """

    object: str
    mean_mm: float
    max_mm: float
    std_mm: float
    frames: int
    samples: int
    series_mm: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_json(self):
        return {
            "object": self.object,
            "mean_mm": self.mean_mm,
            "max_mm": self.max_mm,
            "std_mm": self.std_mm,
            "frames": self.frames,
            "samples": self.samples,
            "series_mm": [None if math.isnan(v) else float(v) for v in self.series_mm],
        }

    @classmethod
    def from_json(cls, d):
        series = np.array([np.nan if v is None else v for v in d.get("series_mm", [])], dtype=float)
        return cls(d["object"], float(d["mean_mm"]), float(d["max_mm"]), float(d["std_mm"]),
                   int(d["frames"]), int(d["samples"]), series)


@dataclass
class ContactErrorReport:
    objects: list = field(default_factory=list)

    @property
    def aggregate_mean_mm(self):
        """Per-object means weighted by their sample counts."""
        n = sum(o.samples for o in self.objects)
        if n == 0:
            return 0.0
        return float(sum(o.mean_mm * o.samples for o in self.objects) / n)

    def merge(self, other):
        return ContactErrorReport(list(self.objects) + list(other.objects))

    def to_json(self):
        return {
            "header": {"units": "mm", "reference_mean_mm": REFERENCE_MEAN_MM, "reference_note": REFERENCE_NOTE},
            "aggregate_mean_mm": self.aggregate_mean_mm,
            "objects": [o.to_json() for o in self.objects],
        }

    @classmethod
    def from_json(cls, d):
        return cls([ObjectContactError.from_json(o) for o in d.get("objects", [])])


def frame_discrepancies(result, demo, glove_model, dex_model, cmap, gate=ContactGate()):
    """Per-frame discrepancies ``(T, M)`` in metres and the contact mask."""
    T = demo.T
    if result.T != T or len(result.p_dex) != T:
        raise DimensionMismatch(f"retarget result has {result.T} frames, demonstration {T}")
    gi = glove_model.site_indices(glove_model.site_names("tactile"))
    M = len(gi)
    if demo.gamma_glove.shape[1] != M:
        raise DimensionMismatch(f"demonstration carries {demo.gamma_glove.shape[1]} tactile channels, "
                                f"glove model has {M}")
    di = cmap.dex_indices(dex_model, M)
    delta = np.empty((T, M))
    for t in range(T):
        g = tactile_points(glove_model, demo.j_glove[t], RigidTransform.from_array(demo.p_glove[t]), gi)
        q = tactile_points(dex_model, result.j_dex[t], result.p_dex[t], di)
        delta[t] = contact_discrepancy(g, q)
    return delta, gate.active(demo.gamma_glove)


def contact_error(result, demo, glove_model, dex_model, cmap, gate=ContactGate(), object_name=None):
    """Contact-error statistics over every frame and gated-in sensor."""
    delta, active = frame_discrepancies(result, demo, glove_model, dex_model, cmap, gate)
    mm = delta * 1000.0
    vals = mm[active]
    counts = active.sum(axis=1)
    sums = np.where(active, mm, 0.0).sum(axis=1)
    series = np.full(len(mm), np.nan)
    np.divide(sums, counts, out=series, where=counts > 0)
    name = object_name if object_name is not None else str(demo.metadata.get("object", "object"))
    if len(vals) == 0:
        stats = ObjectContactError(name, 0.0, 0.0, 0.0, 0, 0, series)
    else:
        stats = ObjectContactError(name, float(vals.mean()), float(vals.max()), float(vals.std()),
                                   int((counts > 0).sum()), int(len(vals)), series)
    return ContactErrorReport([stats])
