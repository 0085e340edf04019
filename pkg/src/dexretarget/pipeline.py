"""Pipeline stages over a per-demonstration work directory.

Layout of a work directory::

    sync/       synchronized demonstration (bundle format)
    retarget/   j_dex, p_dex, gamma_dex streams + diagnostics.jsonl
    align/      p_tcp, p_object_robot streams + align.json
    ik/         arm_joints stream + ik.json
    dataset/    packaged VLA training records
    report/     contact_error.csv / .json / .png
    summary.json

Every artifact is a pure function of the inputs and the configuration.
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .armik import trajectory_ik
from .datastore import (Demonstration, dumps_canonical, load_demonstration, write_bundle,
                        write_vla_dataset)
from .errors import ConfigError, LengthMismatch, NotConverged
from .evalsuite import contact_error, emit_report
from .frames import CameraExtrinsics, estimate_similarity, load_correspondences, to_robot_frame
from .retargeter import FrameDiagnostics, RetargetResult, retarget_trajectory
from .sync import TimedStream
from .tactile import HeatmapLayout, default_layout
from .transforms import RigidTransform

log = logging.getLogger("dexretarget")

STAGES = ("sync", "retarget", "align", "ik", "package", "eval")


def log_event(event, **fields):
    log.info(json.dumps({"event": event, **fields}, sort_keys=True, default=str))


def _stage_dir(work, name):
    d = Path(work) / name
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_json(path, obj):
    Path(path).write_text(dumps_canonical(obj), encoding="utf-8")


def _pose_stream(name, ts, poses, rate):
    return TimedStream(name, "pose", ts, np.stack([p.as_array() for p in poses]), rate)


def _poses(bundle, name):
    return [RigidTransform.from_array(a) for a in bundle.stream(name).samples]


# --------------------------------------------------------------------------
# loading stage outputs

def load_synced(work):
    """The synchronized demonstration stored under ``work/sync``."""
    b = load_demonstration(Path(work) / "sync")
    names = {s.name: s for s in b.streams}
    try:
        ts = names["j_glove"].timestamps
    except KeyError:
        raise LengthMismatch(f"{work}/sync holds no j_glove stream") from None
    images = {cam: list(paths) for cam, (_, paths) in b.images.items()}
    extras = {k: s.samples for k, s in names.items() if k not in ("j_glove", "p_glove", "gamma_glove", "p_object")}
    return Demonstration(ts, names["j_glove"].samples, names["p_glove"].samples, names["gamma_glove"].samples,
                         names["p_object"].samples, images, b.metadata, extras)


def load_retargeted(work):
    d = Path(work) / "retarget"
    b = load_demonstration(d)
    diags = []
    for line in (d / "diagnostics.jsonl").read_text(encoding="utf-8").splitlines():
        j = json.loads(line)
        n = len(b.stream("j_dex").samples[0])
        at = np.zeros(n, dtype=bool)
        at[j["at_limit"]] = True
        nan = float("nan")
        diags.append(FrameDiagnostics(
            nan if j["loss"] is None else j["loss"], nan if j["kin_loss"] is None else j["kin_loss"],
            nan if j["tac_loss"] is None else j["tac_loss"], j["iterations"], j["converged"],
            nan if j["gradient_norm"] is None else j["gradient_norm"], at, j.get("skipped", False)))
    return RetargetResult(b.stream("j_dex").samples, _poses(b, "p_dex"), b.stream("gamma_dex").samples, diags)


# --------------------------------------------------------------------------
# stages

def stage_sync(bundle_path, work, cfg):
    bundle = load_demonstration(bundle_path)
    demo = bundle.synchronize(cfg.rate)
    images = {cam: (demo.timestamps, refs) for cam, refs in demo.images.items()}
    write_bundle(_stage_dir(work, "sync"), demo.to_streams(), demo.metadata, images)
    log_event("stage_done", stage="sync", frames=demo.T, bundle=str(bundle_path))
    return demo


def stage_retarget(work, cfg):
    demo = load_synced(work)
    glove, dex = cfg.load_model("glove"), cfg.load_model("dex")
    rcfg = cfg.retarget_config(glove, dex)
    result = retarget_trajectory(demo, glove, dex, rcfg, on_frame_error=cfg.on_frame_error)
    out = _stage_dir(work, "retarget")
    rate = demo.metadata.get("rate")
    streams = [
        TimedStream("j_dex", "joint", demo.timestamps, result.j_dex, rate),
        _pose_stream("p_dex", demo.timestamps, result.p_dex, rate),
        TimedStream("gamma_dex", "tactile", demo.timestamps, result.gamma_dex, rate),
    ]
    meta = {"dex_model": dex.name, "glove_model": glove.name, "tactile_map": rcfg.tactile_map.to_dict(),
            "tactile_map_source": rcfg.tactile_map.source,
            "mount_offset": rcfg.mount_offset.as_array().tolist(),
            "sign_convention": rcfg.attenuation.sign_convention}
    write_bundle(out, streams, meta)
    (out / "diagnostics.jsonl").write_text(
        "".join(json.dumps(d.to_json(), sort_keys=True) + "\n" for d in result.diagnostics), encoding="utf-8")
    skipped = [t for t, d in enumerate(result.diagnostics) if d.skipped]
    log_event("stage_done", stage="retarget", frames=result.T, converged=result.converged_fraction(),
              iterations=result.total_iterations(), skipped=skipped)
    return result


def _extrinsics(cfg):
    entry = cfg.align.get("extrinsics")
    if entry is None or entry == "identity":
        return CameraExtrinsics()
    try:
        if isinstance(entry, str):
            return CameraExtrinsics.load(cfg.resolve(entry))
        return CameraExtrinsics.from_matrix(entry)
    except OSError as exc:
        raise ConfigError(f"[align] cannot read extrinsics: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"[align] extrinsics: {exc}") from None


def stage_align(work, cfg):
    demo = load_synced(work)
    ret = load_demonstration(Path(work) / "retarget")
    M = _extrinsics(cfg)
    p_tcp = to_robot_frame(M, _poses(ret, "p_dex"))
    p_obj = to_robot_frame(M, [RigidTransform.from_array(a) for a in demo.p_object])
    info = {"extrinsics": M.transform.matrix().tolist(), "similarity": None}
    corr = cfg.align.get("correspondences")
    if corr is not None:
        src, dst = load_correspondences(cfg.resolve(corr))
        info["similarity"] = estimate_similarity(src, dst).to_dict()
    out = _stage_dir(work, "align")
    rate = demo.metadata.get("rate")
    write_bundle(out, [_pose_stream("p_tcp", demo.timestamps, p_tcp, rate),
                       _pose_stream("p_object_robot", demo.timestamps, p_obj, rate)], {"frame": "robot_base"})
    _write_json(out / "align.json", info)
    log_event("stage_done", stage="align", frames=len(p_tcp),
              similarity_rms=None if info["similarity"] is None else info["similarity"]["residual_rms"])
    return p_tcp


def stage_ik(work, cfg):
    b = load_demonstration(Path(work) / "align")
    arm = cfg.load_model("arm")
    targets = _poses(b, "p_tcp")
    traj = trajectory_ik(arm, targets, cfg.ik.tcp_site, **cfg.ik.solver_kwargs())
    failed = traj.failed_indices()
    if failed and cfg.on_frame_error == "abort":
        i, exc = traj.failures[0]
        raise NotConverged(f"IK failed on {len(failed)} frame(s), first at frame {i}: {exc}",
                           q=exc.q, diagnostics=exc.diagnostics)
    out = _stage_dir(work, "ik")
    ts = b.stream("p_tcp").timestamps
    write_bundle(out, [TimedStream("arm_joints", "joint", ts, traj.q, b.stream("p_tcp").rate)],
                 {"arm_model": arm.name, "tcp_site": cfg.ik.tcp_site})
    _write_json(out / "ik.json", {
        "failed_frames": failed,
        "max_joint_step": traj.max_step,
        "frames": [d.to_json() for d in traj.diagnostics],
    })
    log_event("stage_done", stage="ik", frames=len(targets), failed=failed, max_joint_step=traj.max_step)
    return traj


def stage_package(work, cfg):
    demo = load_synced(work)
    result = load_retargeted(work)
    tcp = _poses(load_demonstration(Path(work) / "align"), "p_tcp")
    arm = load_demonstration(Path(work) / "ik").stream("arm_joints").samples
    layout = None
    if cfg.package.get("heatmaps", True):
        if "layout" in cfg.package:
            layout = HeatmapLayout.load(cfg.resolve(cfg.package["layout"]))
        else:
            layout = default_layout(cfg.load_model("dex"), int(cfg.package.get("cell_size", 8)))
    summary = write_vla_dataset(result, demo, arm, Path(work) / "dataset", tcp_poses=tcp, layout=layout,
                                camera=cfg.package.get("camera"))
    log_event("stage_done", stage="package", frames=summary["frames"], action_dim=summary["action_dim"])
    return summary


def stage_eval(work, cfg, figure=True):
    demo = load_synced(work)
    result = load_retargeted(work)
    glove, dex = cfg.load_model("glove"), cfg.load_model("dex")
    rcfg = cfg.retarget_config(glove, dex)
    report = contact_error(result, demo, glove, dex, rcfg.tactile_map, rcfg.contact_gate)
    rate = demo.metadata.get("rate")
    paths = emit_report(report, _stage_dir(work, "report") / "contact_error", figure=figure,
                        dt=1.0 / rate if rate else None)
    log_event("stage_done", stage="eval", mean_mm=report.aggregate_mean_mm)
    return report, paths


STAGE_FUNCS = {
    "retarget": stage_retarget,
    "align": stage_align,
    "ik": stage_ik,
    "package": stage_package,
}


def run_bundle(bundle_path, work, cfg):
    """All stages for one bundle; returns the summary written to ``summary.json``."""
    t0 = time.perf_counter()
    work = Path(work)
    work.mkdir(parents=True, exist_ok=True)
    demo = stage_sync(bundle_path, work, cfg)
    result = stage_retarget(work, cfg)
    stage_align(work, cfg)
    traj = stage_ik(work, cfg)
    stage_package(work, cfg)
    report, _ = stage_eval(work, cfg)
    summary = {
        "bundle": Path(bundle_path).name,
        "frames": demo.T,
        "rate": cfg.rate,
        "retarget": {"converged_fraction": result.converged_fraction(),
                     "iterations": result.total_iterations(),
                     "skipped_frames": [t for t, d in enumerate(result.diagnostics) if d.skipped]},
        "ik": {"failed_frames": traj.failed_indices(), "max_joint_step": traj.max_step},
        "contact_error_mm": report.aggregate_mean_mm,
    }
    _write_json(work / "summary.json", summary)
    log_event("bundle_done", bundle=str(bundle_path), seconds=round(time.perf_counter() - t0, 3))
    return summary


def _work_dirs(bundle_paths, out):
    seen = {}
    dirs = []
    for p in bundle_paths:
        name = Path(p).resolve().name or "bundle"
        k = seen.get(name, 0)
        seen[name] = k + 1
        dirs.append(Path(out) / (name if k == 0 else f"{name}_{k}"))
    return dirs


def _run_one(args):
    bundle_path, work, cfg = args
    return run_bundle(bundle_path, work, cfg)


def run_pipeline(cfg, bundle_paths, out):
    """Process bundles with a bounded worker pool; the first error is re-raised."""
    if not bundle_paths:
        raise ConfigError("no bundles given")
    jobs = [(str(b), w, cfg) for b, w in zip(bundle_paths, _work_dirs(bundle_paths, out))]
    workers = min(cfg.worker_count, len(jobs))
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))

