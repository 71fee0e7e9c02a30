"""Output stamping, persistence and run-manifest bookkeeping."""

from __future__ import annotations

import hashlib
import json
import subprocess
import time
from pathlib import Path

DATA_FORMAT_VERSION = 1
_version_cache: str | None = None


def tool_version() -> str:
    """git describe of the working tree, falling back to the package version."""
    global _version_cache
    if _version_cache is None:
        try:
            out = subprocess.run(
                ["git", "describe", "--always", "--dirty"],
                capture_output=True, text=True, cwd=Path(__file__).parent, timeout=10,
            )
            _version_cache = out.stdout.strip() if out.returncode == 0 else ""
        except OSError:
            _version_cache = ""
        if not _version_cache:
            _version_cache = "trapmc-0.1.0"
    return _version_cache


def stamp(master_seed: int | None = None) -> dict:
    s = {"format_version": DATA_FORMAT_VERSION, "tool_version": tool_version()}
    if master_seed is not None:
        s["master_seed"] = master_seed
    return s


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def dump_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def append_jsonl(obj: dict, path) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps(obj, sort_keys=True) + "\n")


def append_manifest(
    out_dir, cfg_hash: str, master_seed: int | None, started: float, artifacts: list
) -> None:
    """Manifests are append-only; one entry per completed command."""
    append_jsonl(
        {
            "config_hash": cfg_hash,
            "master_seed": master_seed,
            "tool_version": tool_version(),
            "started_at": started,
            "ended_at": time.time(),
            "artifacts": [str(a) for a in artifacts],
        },
        Path(out_dir) / "run_manifest.jsonl",
    )


def write_sweep_outputs(records, cfg_hash: str, master_seed: int, out_dir) -> list:
    """Persist SweepRecords as JSON lines plus a CSV summary.

    The CSV carries the stamp in leading '#' comment lines; data files contain
    no timestamps (the runtime column is wall-clock duration, reported per
    record as required, and is the only non-reproducible column).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jsonl = out_dir / "records.jsonl"
    with open(jsonl, "w") as fh:
        fh.write(json.dumps({**stamp(master_seed), "config_hash": cfg_hash},
                            sort_keys=True) + "\n")
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    xis = sorted({xi for r in records for xi in r.mu_A})
    csv = out_dir / "summary.csv"
    with open(csv, "w") as fh:
        st = stamp(master_seed)
        fh.write(f"# format_version={st['format_version']}"
                 f" tool_version={st['tool_version']}"
                 f" master_seed={master_seed} config_hash={cfg_hash}\n")
        cols = ["L", "replica", "logZ"] + [f"muA_{xi}" for xi in xis] + [
            "q50", "q90", "q99", "escape_frac", "runtime", "failed"]
        fh.write(",".join(cols) + "\n")
        for r in records:
            row = [r.L, r.replica, r.log_Z_hat]
            row += [r.mu_A.get(xi, float("nan")) for xi in xis]
            row += [r.q50, r.q90, r.q99, r.escape_frac, r.runtime, int(r.failed)]
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")
    return [jsonl, csv]


def read_sweep_csv(path):
    """Read a summary CSV back into lightweight record objects for fitting."""
    from .lab import SweepRecord

    header_meta = {}
    records = []
    with open(path) as fh:
        cols = None
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for part in line[1:].split():
                    if "=" in part:
                        k, v = part.split("=", 1)
                        header_meta[k] = v
                continue
            if cols is None:
                cols = line.split(",")
                continue
            vals = dict(zip(cols, line.split(",")))
            mu_A = {
                float(k[4:]): float(v) for k, v in vals.items() if k.startswith("muA_")
            }
            records.append(
                SweepRecord(
                    L=float(vals["L"]), replica=int(vals["replica"]),
                    field_seed=0, smc_seed=0,
                    log_Z_hat=float(vals["logZ"]), mu_A=mu_A,
                    q50=float(vals["q50"]), q90=float(vals["q90"]),
                    q99=float(vals["q99"]), escape_frac=float(vals["escape_frac"]),
                    runtime=float(vals["runtime"]), failed=bool(int(vals["failed"])),
                )
            )
    return records, header_meta
