"""Strict key-value configuration parsing for sweep runs.

Format: one `key = value` per line, '#' starts a comment. Unknown keys are
fatal (with a nearest-key suggestion) so a typo cannot silently fall back to
a default exponent.
"""

from __future__ import annotations

import difflib
from pathlib import Path

from .geometry import BALL, DEFAULT_XI_GRID, HYPERPLANE
from .lab import SweepConfig
from .params import ModelParams, ValidationError

_REQUIRED = ("d", "alpha", "gamma", "lambda", "L_grid", "replicas", "master_seed")
_OPTIONAL = {
    "xi": "0.95",
    "xi_grid": ",".join(str(x) for x in DEFAULT_XI_GRID),
    "dt": "0.001",
    "particles": "10000",
    "geometry": HYPERPLANE,
    "control": "false",
    "max_time": "",
    "ess_threshold": "0.5",
}
_VALID = set(_REQUIRED) | set(_OPTIONAL)


class ConfigError(ValidationError):
    pass


def _parse_bool(v: str) -> bool:
    if v.lower() in ("true", "1", "yes"):
        return True
    if v.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def _float_list(v: str) -> tuple:
    try:
        return tuple(float(x) for x in v.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated number list, got {v!r}") from exc


def parse_config_text(text: str) -> SweepConfig:
    kv: dict[str, str] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _VALID:
            near = difflib.get_close_matches(key, sorted(_VALID), n=1)
            hint = f"; did you mean {near[0]!r}?" if near else ""
            raise ConfigError(f"line {lineno}: unknown key {key!r}{hint}")
        if key in kv:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        kv[key] = value
    missing = [k for k in _REQUIRED if k not in kv]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    for k, default in _OPTIONAL.items():
        kv.setdefault(k, default)

    try:
        params = ModelParams(
            d=int(kv["d"]), alpha=float(kv["alpha"]),
            gamma=float(kv["gamma"]), lam=float(kv["lambda"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    geometry = kv["geometry"]
    if geometry not in (HYPERPLANE, BALL):
        raise ConfigError(f"geometry must be 'hyperplane' or 'ball', got {geometry!r}")
    xi = float(kv["xi"])
    if not 0.5 < xi < 1.0:
        raise ConfigError("xi must lie in (1/2, 1)")
    xi_grid = _float_list(kv["xi_grid"])
    if any(not 0.5 < x < 1.0 for x in xi_grid):
        raise ConfigError("xi_grid values must lie in (1/2, 1)")
    dt = float(kv["dt"])
    if not 0 < dt <= 0.1:
        raise ConfigError("dt must lie in (0, 0.1]")
    particles = int(kv["particles"])
    if particles < 100:
        raise ConfigError("particles must be >= 100")
    replicas = int(kv["replicas"])
    if replicas < 1:
        raise ConfigError("replicas must be >= 1")
    L_grid = _float_list(kv["L_grid"])
    if not L_grid or any(L <= 1 for L in L_grid):
        raise ConfigError("L_grid must contain values > 1")
    ess_threshold = float(kv["ess_threshold"])
    if not 0.0 <= ess_threshold < 1.0:
        raise ConfigError("ess_threshold must lie in [0, 1)")
    return SweepConfig(
        params=params,
        L_grid=L_grid,
        replicas=replicas,
        master_seed=int(kv["master_seed"]),
        xi=xi,
        xi_grid=xi_grid,
        dt=dt,
        particles=particles,
        geometry=geometry,
        control=_parse_bool(kv["control"]),
        max_time=float(kv["max_time"]) if kv["max_time"] else None,
        ess_threshold=ess_threshold,
    )


def parse_config(path) -> SweepConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config_text(path.read_text())
