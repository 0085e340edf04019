import numpy as np
import pytest

from dexretarget.errors import DimensionMismatch, LayoutError
from dexretarget.retargeter import CorrespondenceMap
from dexretarget.tactile import (
    AttenuationParams,
    ContactGate,
    HeatmapLayout,
    attenuate,
    attenuation_factor,
    contact_discrepancy,
    default_layout,
    rasterize_heatmap,
    read_ppm,
    retarget_tactile_frame,
    retarget_tactile_trajectory,
    site_discrepancy,
    write_ppm,
)


def test_site_discrepancy_examples():
    assert site_discrepancy([0, 0, 0], [0, 0, 0]) == 0.0
    assert site_discrepancy([0, 0, 0], [0.003, 0.004, 0]) == pytest.approx(0.005, abs=1e-15)
    assert site_discrepancy([1, 2, 3], [1, 2, 3.01]) == pytest.approx(0.01, abs=1e-15)


def test_contact_discrepancy_rows():
    d = contact_discrepancy([[0, 0, 0], [1, 2, 3]], [[0.003, 0.004, 0], [1, 2, 3.01]])
    np.testing.assert_allclose(d, [0.005, 0.01], atol=1e-15)
    with pytest.raises(DimensionMismatch):
        contact_discrepancy(np.zeros((2, 3)), np.zeros((3, 3)))


@pytest.mark.parametrize("conv", ["prose", "verbatim"])
def test_midpoint_half(conv):
    p = AttenuationParams(sign_convention=conv)
    assert attenuate(0.8, p.beta, p) == pytest.approx(0.4, abs=1e-12)


def test_prose_point_values(oracle):
    o = oracle["attenuation_prose"]
    p = AttenuationParams()
    assert attenuate(1.0, 0.0, p) == pytest.approx(o["delta=0"], rel=1e-12)
    assert attenuate(1.0, 0.0175, p) == pytest.approx(o["delta=0.0175"], rel=1e-9)


def test_verbatim_is_mirror():
    d = np.linspace(0, 0.03, 31)
    a = attenuation_factor(d, AttenuationParams(sign_convention="prose"))
    b = attenuation_factor(d, AttenuationParams(sign_convention="verbatim"))
    np.testing.assert_allclose(a + b, 1.0, atol=1e-15)


def test_parameter_validation():
    with pytest.raises(ValueError):
        AttenuationParams(alpha=0.0)
    with pytest.raises(ValueError):
        AttenuationParams(beta=-1e-3)
    with pytest.raises(ValueError):
        AttenuationParams(sign_convention="other")
    with pytest.raises(ValueError):
        ContactGate(1.5)


def test_no_overflow_far_away():
    assert attenuation_factor(10.0) == 0.0
    assert attenuation_factor(10.0, AttenuationParams(sign_convention="verbatim")) == 1.0


def test_gate_zeroes_exactly():
    gamma = np.array([0.0, 0.01, 0.02, 0.5])
    pts = np.zeros((4, 3))
    out, delta = retarget_tactile_frame(gamma, pts, pts)
    assert out[0] == 0.0 and out[1] == 0.0
    assert out[2] > 0.0 and out[3] > 0.0
    np.testing.assert_array_equal(delta, 0.0)


def _constant_demo(short_synth, gamma):
    from dexretarget.datastore import Demonstration

    d = short_synth.demo
    return Demonstration(d.timestamps, d.j_glove, d.p_glove, np.full_like(d.gamma_glove, gamma), d.p_object)


def test_all_zero_frames_give_zero(short_synth, glove):
    demo = _constant_demo(short_synth, 0.0)
    cmap = CorrespondenceMap.anatomical(glove, glove)
    poses = [demo.glove_pose(t) for t in range(demo.T)]
    out = retarget_tactile_trajectory(demo, glove, glove, demo.j_glove, poses, cmap)
    assert not out.any()


def test_far_site_channel_vanishes(oracle):
    gamma = np.array([1.0, 1.0])
    g = np.zeros((2, 3))
    q = np.array([[0.0, 0.0, 0.0], [0.05, 0.0, 0.0]])
    out, _ = retarget_tactile_frame(gamma, g, q)
    assert out[1] <= 1e-30
    assert out[1] == pytest.approx(oracle["attenuation_prose"]["delta=0.05"], rel=1e-9)


def test_trajectory_length_checks(short_synth, glove):
    demo = short_synth.demo
    cmap = CorrespondenceMap.anatomical(glove, glove)
    with pytest.raises(DimensionMismatch):
        retarget_tactile_trajectory(demo, glove, glove, demo.j_glove[:-1], [], cmap)


def test_heatmap_colors(oracle):
    layout = HeatmapLayout(1, 3, ((0, 0), (0, 1), (0, 2)), cell_size=2)
    img = rasterize_heatmap([0.0, 1.0, 0.5], layout)
    assert img.shape == (2, 6, 3)
    assert tuple(img[0, 0]) == (0, 0, 255)
    assert tuple(img[1, 3]) == (255, 0, 0)
    h = oracle["heatmap_half"]
    assert tuple(img[0, 5]) == (h, 0, h)
    zero = rasterize_heatmap(np.zeros(3), layout)
    assert (zero[..., 2] == 255).all() and not zero[..., :2].any()


def test_layout_errors():
    with pytest.raises(LayoutError):
        HeatmapLayout(1, 1, ((0, 0), (0, 0)))
    with pytest.raises(LayoutError):
        HeatmapLayout(1, 1, ((1, 0),))
    with pytest.raises(LayoutError):
        HeatmapLayout.from_dict({"H": 1, "W": 2, "cells": {"1": [0, 1]}})
    with pytest.raises(LayoutError):
        rasterize_heatmap([0.1], HeatmapLayout(1, 2, ((0, 0), (0, 1))))


def test_layout_round_trip_and_default(glove, tmp_path):
    layout = default_layout(glove, 4)
    assert len(layout.cells) == 32
    again = HeatmapLayout.from_dict(layout.to_dict())
    assert again == layout


def test_ppm_round_trip(tmp_path, glove):
    img = rasterize_heatmap(np.linspace(0, 1, 32), default_layout(glove, 3))
    write_ppm(tmp_path / "a.ppm", img)
    np.testing.assert_array_equal(read_ppm(tmp_path / "a.ppm"), img)
    (tmp_path / "b.ppm").write_bytes(b"P3\n1 1\n255\n0 0 0")
    with pytest.raises(ValueError):
        read_ppm(tmp_path / "b.ppm")
