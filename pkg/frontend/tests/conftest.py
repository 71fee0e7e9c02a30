"""Fixtures that produce reference artifacts by driving the simulator CLI.

The reporting package is a pure consumer, so its tests exercise the real
producer: every input file comes from a `trapmc` subprocess, never from
hand-built dictionaries.
"""

import subprocess
import sys

import pytest

pytest.importorskip("trapmc_reports")

SWEEP_CFG = """\
d = 2
alpha = 2.2
gamma = 0.2
lambda = 0.001
L_grid = 4,6,9,13
replicas = 2
master_seed = 5
dt = 0.02
particles = 200
control = yes
xi_grid = 0.55,0.75
ess_threshold = 0
"""


def run_trapmc(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "trapmc", *map(str, args)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr + proc.stdout
    return proc


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    """Reference outputs: sweep CSV, fit/bounds/alpha-curve/band JSON."""
    root = tmp_path_factory.mktemp("artifacts")
    sweep_dir = root / "sweep"
    cfg = root / "sweep.cfg"
    cfg.write_text(SWEEP_CFG)
    run_trapmc("sweep", "--config", cfg, "--out-dir", sweep_dir)

    fit_json = root / "fit.json"
    run_trapmc("fit", "--csv", sweep_dir / "summary.csv",
               "--observable", "fluct_q90", "--out", fit_json)

    bounds_json = root / "bounds.json"
    run_trapmc("bounds", "--d", 2, "--alpha", 2.2, "--gamma", 0.2,
               "--xi", 0.75, "--out", bounds_json)

    alpha_json = root / "alpha.json"
    run_trapmc("alpha-curve", "--d", 1, "--alpha", 2.2, "--gamma", 0.2,
               "--lam", 0.5, "--r-grid", "2,3", "--replicas", 2, "--control",
               "--dt", 0.01, "--particles", 200, "--seed", 9,
               "--out", alpha_json)

    field = root / "field.txt"
    run_trapmc("sample-field", "--d", 2, "--alpha", 2.2, "--gamma", 0.2,
               "--lo", "-28,-28", "--hi", "28,28", "--r-max", 4,
               "--seed", 3, "--out", field)
    band_json = root / "band.json"
    run_trapmc("band-resample", "--field", field, "--geometry", "ball",
               "--length", 8, "--xi", 0.75, "--band", 0, "--replicas", 3,
               "--dt", 0.01, "--particles", 200, "--seed", 4,
               "--max-time", 30, "--out", band_json)

    return {
        "sweep_csv": sweep_dir / "summary.csv",
        "fit_json": fit_json,
        "bounds_json": bounds_json,
        "alpha_json": alpha_json,
        "band_json": band_json,
    }
