"""Glove-to-dexterous-hand demonstration retargeting and dataset packaging.

Submodules
----------
kinmodel    robot descriptions, forward kinematics, Jacobians
retargeter  per-frame hand retargeting by energy minimization
tactile     distance-aware tactile transfer and heatmaps
frames      similarity alignment and camera extrinsics
sync        timestamp synchronization and resampling
armik       damped least-squares arm IK
datastore   demonstration bundles and VLA datasets
evalsuite   synthetic demonstrations and contact-error reports
cli         batch pipeline front end
"""
from .errors import (
    BlobSizeMismatch,
    ConfigError,
    DegenerateInput,
    DexRetargetError,
    DimensionMismatch,
    EmptyOverlap,
    LayoutError,
    LengthMismatch,
    ManifestError,
    ModelError,
    ModelSyntaxError,
    NonFiniteLoss,
    NonMonotonicTimestamps,
    NotConverged,
    UnknownSite,
    UnsupportedVersion,
)
from .kinmodel import RobotModel, forward_kinematics, load_robot_model, parse_robot_model
from .transforms import RigidTransform

__all__ = [
    "BlobSizeMismatch",
    "ConfigError",
    "DegenerateInput",
    "DexRetargetError",
    "DimensionMismatch",
    "EmptyOverlap",
    "LayoutError",
    "LengthMismatch",
    "ManifestError",
    "ModelError",
    "ModelSyntaxError",
    "NonFiniteLoss",
    "NonMonotonicTimestamps",
    "NotConverged",
    "UnknownSite",
    "UnsupportedVersion",
    "RigidTransform",
    "RobotModel",
    "forward_kinematics",
    "load_robot_model",
    "parse_robot_model",
]

__version__ = "0.1.0"
