"""Parsers for the simulator's output formats.

All inputs are stamped with a `format_version`; a report mixes files from
different format versions only by mistake, so that is a hard error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

SUPPORTED_FORMAT_VERSION = 1


class ReportError(ValueError):
    """Any problem with report inputs."""


class VersionMismatch(ReportError):
    pass


class EmptyInput(ReportError):
    pass


@dataclass
class SweepData:
    meta: dict
    rows: list  # dicts: L, replica, logZ, q50/q90/q99, escape_frac, failed, mu_A

    @property
    def format_version(self) -> int:
        return int(self.meta["format_version"])

    def L_values(self) -> list:
        return sorted({row["L"] for row in self.rows})

    def ok_rows(self, L: float | None = None) -> list:
        return [
            row for row in self.rows
            if not row["failed"] and (L is None or row["L"] == L)
        ]


def read_sweep_csv(path) -> SweepData:
    path = Path(path)
    if not path.exists():
        raise ReportError(f"sweep CSV {path} does not exist")
    meta: dict = {}
    cols: list | None = None
    rows: list = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for part in line[1:].split():
                if "=" in part:
                    k, v = part.split("=", 1)
                    meta[k] = v
            continue
        if cols is None:
            cols = line.split(",")
            continue
        vals = dict(zip(cols, line.split(",")))
        row = {
            "L": float(vals["L"]),
            "replica": int(vals["replica"]),
            "logZ": float(vals["logZ"]),
            "q50": float(vals["q50"]),
            "q90": float(vals["q90"]),
            "q99": float(vals["q99"]),
            "escape_frac": float(vals["escape_frac"]),
            "failed": bool(int(vals["failed"])),
            "mu_A": {
                float(k[4:]): float(v)
                for k, v in vals.items()
                if k.startswith("muA_")
            },
        }
        rows.append(row)
    if "format_version" not in meta:
        raise ReportError(f"{path} carries no format_version stamp")
    if not rows or all(r["failed"] or not math.isfinite(r["logZ"]) for r in rows):
        raise EmptyInput(f"{path} contains no usable sweep records")
    return SweepData(meta=meta, rows=rows)


def read_stamped_json(path, kind: str, required: tuple = ()) -> dict:
    path = Path(path)
    if not path.exists():
        raise ReportError(f"{kind} file {path} does not exist")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ReportError(f"{kind} file {path} is not valid JSON: {exc}") from exc
    if "format_version" not in payload:
        raise ReportError(f"{path} carries no format_version stamp")
    missing = [k for k in required if k not in payload]
    if missing:
        raise ReportError(f"{path} lacks expected keys: {', '.join(missing)}")
    return payload


def check_versions(stamped: dict) -> int:
    """All inputs must agree on one supported format version.

    `stamped` maps a human label to the format_version found in that input.
    """
    versions = {label: int(v) for label, v in stamped.items()}
    if not versions:
        raise ReportError("no inputs given")
    distinct = sorted(set(versions.values()))
    if len(distinct) > 1:
        detail = ", ".join(f"{k}={v}" for k, v in sorted(versions.items()))
        raise VersionMismatch(f"inputs disagree on format_version: {detail}")
    if distinct[0] != SUPPORTED_FORMAT_VERSION:
        raise VersionMismatch(
            f"format_version {distinct[0]} is not supported "
            f"(expected {SUPPORTED_FORMAT_VERSION})"
        )
    return distinct[0]
