"""Synthetic demonstrations, contact-error evaluation and reports."""
from .metrics import (
    REFERENCE_MEAN_MM,
    ContactErrorReport,
    ObjectContactError,
    contact_error,
    frame_discrepancies,
)
from .report import emit_report, load_report, report_csv
from .synthetic import Scenario, SyntheticDemo, contact_force, generate_synthetic_demo

__all__ = [
    "REFERENCE_MEAN_MM",
    "ContactErrorReport",
    "ObjectContactError",
    "Scenario",
    "SyntheticDemo",
    "contact_error",
    "contact_force",
    "emit_report",
    "frame_discrepancies",
    "generate_synthetic_demo",
    "load_report",
    "report_csv",
]
