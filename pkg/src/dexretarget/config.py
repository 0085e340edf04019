"""Pipeline configuration: one TOML or JSON file shared by every stage.

Sections: ``[pipeline]`` (rate, workers, on_frame_error), ``[models]``,
``[retarget]`` (see :class:`~dexretarget.retargeter.RetargetConfig`),
``[align]``, ``[ik]``, ``[package]`` and ``[scenario]``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .kinmodel import load_robot_model
from .robots import BUILTIN_MODELS

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

ON_FRAME_ERROR = ("skip", "abort")
# world -> robot base used when [align] gives no extrinsics; puts the
# synthetic tabletop workspace ahead of the builtin arm, clear of its base axis
DEFAULT_EXTRINSICS = [[1.0, 0.0, 0.0, 0.4], [0.0, 1.0, 0.0, 0.1], [0.0, 0.0, 1.0, -0.3], [0.0, 0.0, 0.0, 1.0]]
SECTIONS = ("pipeline", "models", "retarget", "align", "ik", "package", "scenario")


def _check_keys(section, d, allowed):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {sorted(unknown)}")


@dataclass(frozen=True)
class IKSettings:
    tcp_site: str = "tool"
    tol_pos: float = 1e-4
    tol_rot: float | None = 1e-3
    max_iter: int = 100
    damping: float = 1e-3
    restarts: int = 32

    def solver_kwargs(self):
        return {"tol_pos": self.tol_pos, "tol_rot": self.tol_rot, "max_iter": self.max_iter,
                "damping": self.damping, "restarts": self.restarts}


@dataclass(frozen=True)
class PipelineConfig:
    rate: float = 30.0
    workers: int = 0
    on_frame_error: str = "abort"
    models: dict = field(default_factory=lambda: {"glove": "builtin:glove", "dex": "builtin:dex",
                                                  "arm": "builtin:arm6"})
    retarget: dict = field(default_factory=lambda: {"mount_offset": "auto"})
    align: dict = field(default_factory=lambda: {"extrinsics": DEFAULT_EXTRINSICS})
    ik: IKSettings = field(default_factory=IKSettings)
    package: dict = field(default_factory=lambda: {"heatmaps": True, "cell_size": 8})
    scenario: dict = field(default_factory=dict)
    source: str | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "rate", float(self.rate))
            object.__setattr__(self, "workers", int(self.workers))
        except (TypeError, ValueError):
            raise ConfigError(f"rate/workers must be numeric, got {self.rate!r}, {self.workers!r}") from None
        if self.on_frame_error not in ON_FRAME_ERROR:
            raise ConfigError(f"on_frame_error must be one of {ON_FRAME_ERROR}, got {self.on_frame_error!r}")
        if not self.rate > 0:
            raise ConfigError("rate must be positive")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0 (0 = available parallelism)")

    @property
    def worker_count(self):
        return self.workers or os.cpu_count() or 1

    @classmethod
    def from_dict(cls, d, source=None):
        _check_keys("top level", d, SECTIONS)
        p = dict(d.get("pipeline", {}))
        _check_keys("pipeline", p, ("rate", "workers", "on_frame_error"))
        kw = {k: p[k] for k in p}
        base = cls()
        models = dict(base.models)
        m = d.get("models", {})
        _check_keys("models", m, ("glove", "dex", "arm", "glove_sites", "dex_sites", "arm_sites"))
        models.update(m)
        kw["models"] = models
        retarget = dict(base.retarget)
        retarget.update(d.get("retarget", {}))
        kw["retarget"] = retarget
        align = dict(base.align)
        align.update(d.get("align", {}))
        _check_keys("align", align, ("extrinsics", "correspondences"))
        kw["align"] = align
        ik = dict(d.get("ik", {}))
        _check_keys("ik", ik, IKSettings.__dataclass_fields__)
        try:
            kw["ik"] = IKSettings(**ik)
        except TypeError as exc:
            raise ConfigError(f"[ik] {exc}") from None
        package = dict(base.package)
        package.update(d.get("package", {}))
        _check_keys("package", package, ("heatmaps", "cell_size", "layout", "camera"))
        kw["package"] = package
        kw["scenario"] = dict(d.get("scenario", {}))
        try:
            return cls(source=source, **kw)
        except TypeError as exc:
            raise ConfigError(f"[pipeline] {exc}") from None

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
        try:
            d = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
        except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        cfg = cls.from_dict(d, source=str(path))
        return cfg

    def with_convention(self, convention):
        if convention is None:
            return self
        r = dict(self.retarget)
        att = dict(r.get("attenuation", {}))
        att["sign_convention"] = convention
        r["attenuation"] = att
        return replace(self, retarget=r)

    def resolve(self, value):
        """Paths in the config are relative to the config file."""
        p = Path(value)
        if not p.is_absolute() and self.source is not None:
            p = Path(self.source).parent / p
        return p

    def load_model(self, role):
        entry = self.models.get(role)
        if entry is None:
            raise ConfigError(f"[models] has no {role!r} entry")
        if entry.startswith("builtin:"):
            name = entry.split(":", 1)[1]
            if name not in BUILTIN_MODELS:
                raise ConfigError(f"unknown builtin model {name!r}; choose from {sorted(BUILTIN_MODELS)}")
            model = BUILTIN_MODELS[name]()
            sites = self.models.get(f"{role}_sites")
            if sites is not None:
                from .kinmodel import load_site_file
                model = model.with_sites(load_site_file(self.resolve(sites)))
            return model
        sites = self.models.get(f"{role}_sites")
        path = self.resolve(entry)
        if not path.is_file():
            raise ConfigError(f"model file not found: {path}")
        return load_robot_model(path, self.resolve(sites) if sites else None)

    def retarget_config(self, glove, dex):
        from .retargeter import RetargetConfig

        r = dict(self.retarget)
        if isinstance(r.get("tactile_map"), str):
            r["tactile_map"] = str(self.resolve(r["tactile_map"]))
        try:
            return RetargetConfig.from_dict(r, glove, dex)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[retarget] {exc}") from None
