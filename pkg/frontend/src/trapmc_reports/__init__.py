"""Offline reporting for trapmc outputs.

Reads the simulator's CSV / JSON-lines artifacts and renders static figures
plus an HTML index. Pure consumer: every number shown comes from the input
files; nothing is re-estimated here.
"""

from .readers import EmptyInput, ReportError, VersionMismatch
from .render import ReportSpec, render_report

__all__ = [
    "EmptyInput",
    "ReportError",
    "ReportSpec",
    "VersionMismatch",
    "render_report",
]
