"""Serialization of contact-error reports: CSV table, JSON document and a figure."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .. import plotting
from ..datastore import dumps_canonical
from .metrics import REFERENCE_MEAN_MM, ContactErrorReport

CSV_COLUMNS = ("object", "mean_mm", "max_mm", "std_mm", "frames")


def _stem(out_path):
    p = Path(out_path)
    if p.suffix in (".csv", ".json", ".png"):
        p = p.with_suffix("")
    return p


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for o in report.objects:
        w.writerow([o.object, repr(o.mean_mm), repr(o.max_mm), repr(o.std_mm), o.frames])
    return buf.getvalue()


def plot_report(report, path, dt=None):
    """Per-frame contact error of every object with the reference level dashed."""
    with plotting.style():
        fig, ax = plotting.plt.subplots(figsize=plotting.figure_size(0.6))
        for o in report.objects:
            t = np.arange(len(o.series_mm)) * (dt if dt else 1.0)
            ax.plot(t, o.series_mm, label=f"{o.object} (mean {o.mean_mm:.2f} mm)")
        ax.axhline(REFERENCE_MEAN_MM, color="0.5", ls="--", lw=0.8, label=f"reference {REFERENCE_MEAN_MM} mm")
        ax.set_xlabel("time [s]" if dt else "frame")
        ax.set_ylabel("contact error [mm]")
        ax.set_ylim(bottom=0.0)
        ax.legend(loc="upper right")
        fig.tight_layout()
        return plotting.save_figure(fig, path)


def emit_report(report, out_path, figure=True, dt=None):
    """Write ``<stem>.csv``, ``<stem>.json`` and optionally ``<stem>.png``.

    Output bytes depend only on the report contents.
    """
    stem = _stem(out_path)
    try:
        stem.parent.mkdir(parents=True, exist_ok=True)
        paths = {"csv": stem.with_suffix(".csv"), "json": stem.with_suffix(".json")}
        paths["csv"].write_text(report_csv(report), encoding="utf-8")
        paths["json"].write_text(dumps_canonical(report.to_json()), encoding="utf-8")
        if figure:
            paths["png"] = plot_report(report, stem.with_suffix(".png"), dt)
    except OSError as exc:
        raise OSError(f"cannot write report {stem}: {exc}") from exc
    return paths


def load_report(path):
    return ContactErrorReport.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
