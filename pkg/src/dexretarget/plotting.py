"""Figure style and deterministic PNG output."""
from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

GOLDEN = (5 ** 0.5 - 1.0) / 2.0
COLUMN_WIDTH = 3.4  # inches

COLORS = ["#08589e", "#d95f02", "#1b9e77", "#7570b3", "#e7298a", "#66a61e"]

STYLE = {
    "axes.prop_cycle": matplotlib.cycler(color=COLORS),
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.family": "sans-serif",
    "font.sans-serif": ["DejaVu Sans"],
    "font.size": 8,
    "legend.fontsize": 7,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "lines.markersize": 3,
    "figure.dpi": 100,
    "savefig.dpi": 150,
    # fixed hash salt keeps SVG/PDF ids stable; PNG is already stable
    "svg.hashsalt": "dexretarget",
    "path.simplify": False,
}


def figure_size(relwidth=1.0, aspect=GOLDEN):
    w = relwidth * 2 * COLUMN_WIDTH
    return (w, w * aspect)


@contextmanager
def style(**overrides):
    params = dict(STYLE)
    params.update(overrides)
    with plt.rc_context(params):
        yield


def save_figure(fig, path):
    """Write ``fig`` as PNG without time or version metadata, then close it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path
