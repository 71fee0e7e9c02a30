"""Command-line entry point.

Exit codes: 0 success, 1 validation/configuration error, 2 runtime failure.
All data outputs carry the format version, tool version and master seed; a
run_manifest.jsonl next to each output records the emitted artifacts.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import io
from .bounds import theoretical_bounds
from .config import parse_config
from .field import auto_r_max, load_field, sample_field
from .geometry import BALL, DEFAULT_XI_GRID, HYPERPLANE, Geometry
from .lab import (
    alpha_curve,
    band_resample_experiment,
    fit_exponent,
    modified_vs_raw,
    run_sweep,
)
from .params import ModelParams, PotentialSpec, ValidationError
from .seeds import derive_seed
from .smc import SmcFailure, smc_run


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


@click.group()
def cli():
    """Monte Carlo lab for Brownian paths among heavy-tailed soft traps."""


@cli.command("sample-field")
@click.option("--d", type=int, default=2, show_default=True)
@click.option("--alpha", type=float, required=True)
@click.option("--gamma", type=float, required=True)
@click.option("--lam", type=float, default=1.0, show_default=True)
@click.option("--lo", required=True, help="window lower corner, comma separated")
@click.option("--hi", required=True, help="window upper corner, comma separated")
@click.option("--r-max", default="auto", show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), required=True)
def sample_field_cmd(d, alpha, gamma, lam, lo, hi, r_max, seed, out):
    """Sample a trap-field realization and write it as line-delimited text."""
    started = time.time()
    params = ModelParams(d=d, alpha=alpha, gamma=gamma, lam=lam)
    lo_v, hi_v = np.array(_floats(lo)), np.array(_floats(hi))
    rm = auto_r_max(params, lo_v, hi_v) if r_max == "auto" else float(r_max)
    field = sample_field(params, lo_v, hi_v, rm, seed)
    from .field import save_field

    save_field(field, out)
    click.echo(
        f"wrote {field.n_traps} traps to {out} "
        f"(r_max={field.r_max}, expected excess {field.expected_excess:.2e})"
    )
    cfg = io.config_hash(f"sample-field {d} {alpha} {gamma} {lam} {lo} {hi} {rm} {seed}")
    io.append_manifest(Path(out).parent, cfg, seed, started, [out])


def _smc_options(fn):
    fn = click.option("--dt", type=float, default=1e-3, show_default=True)(fn)
    fn = click.option("--particles", type=int, default=10_000, show_default=True)(fn)
    fn = click.option("--seed", type=int, required=True)(fn)
    fn = click.option("--max-time", type=float, default=None)(fn)
    return fn


@cli.command("simulate")
@click.option("--field", "field_path", type=click.Path(exists=True), required=True)
@click.option("--mode", type=click.Choice(["raw", "modified"]), default="modified",
              show_default=True)
@click.option("--geometry", type=click.Choice([HYPERPLANE, BALL]),
              default=HYPERPLANE, show_default=True)
@click.option("--length", "--L", "L", type=float, required=True)
@click.option("--lam", type=float, default=None, help="override the field's lambda")
@click.option("--xi", type=float, default=0.95, show_default=True)
@click.option("--xi-grid", default=",".join(str(x) for x in DEFAULT_XI_GRID))
@_smc_options
@click.option("--out", type=click.Path(), required=True)
def simulate_cmd(field_path, mode, geometry, L, lam, xi, xi_grid,
                 dt, particles, seed, max_time, out):
    """Run the particle sampler on a stored field; append one JSON line."""
    started = time.time()
    field = load_field(field_path)
    spec = PotentialSpec.raw() if mode == "raw" else PotentialSpec.modified(L, xi)
    geom = Geometry(kind=geometry, L=L, d=field.params.d)
    res = smc_run(
        field, spec, geom, dt, particles, seed,
        lam=lam, xi_grid=_floats(xi_grid), max_time=max_time,
    )
    record = {**io.stamp(seed), "field": str(field_path), "mode": mode,
              "geometry": geometry, "L": L, **res.to_record()}
    io.append_jsonl(record, out)
    click.echo(f"log_Z_hat = {res.log_Z_hat:.6f} (escape {res.escape_frac:.3%})")
    cfg = io.config_hash(f"simulate {field_path} {mode} {geometry} {L} {lam} "
                         f"{xi} {dt} {particles} {seed}")
    io.append_manifest(Path(out).parent, cfg, seed, started, [out])


@cli.command("sweep")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--out-dir", type=click.Path(), required=True)
def sweep_cmd(config_path, out_dir):
    """Run an L-sweep with disorder replicas from a key-value config file."""
    started = time.time()
    text = Path(config_path).read_text()
    config = parse_config(config_path)
    records = run_sweep(config)
    cfg = io.config_hash(text)
    artifacts = io.write_sweep_outputs(records, cfg, config.master_seed, out_dir)
    failed = sum(r.failed for r in records)
    click.echo(f"{len(records)} records ({failed} failed) -> {out_dir}")
    io.append_manifest(out_dir, cfg, config.master_seed, started, artifacts)


@cli.command("alpha-curve")
@click.option("--d", type=int, default=2, show_default=True)
@click.option("--alpha", type=float, required=True)
@click.option("--gamma", type=float, required=True)
@click.option("--lam", type=float, default=1.0, show_default=True)
@click.option("--r-grid", required=True, help="comma-separated increasing radii")
@click.option("--replicas", type=int, default=8, show_default=True)
@click.option("--xi", type=float, default=0.75, show_default=True)
@click.option("--control", is_flag=True, help="trap-free control medium")
@_smc_options
@click.option("--out", type=click.Path(), required=True)
def alpha_curve_cmd(d, alpha, gamma, lam, r_grid, replicas, xi, control,
                    dt, particles, seed, max_time, out):
    """Estimate the point-to-point cost curve alpha(r) = -E[log Zbar(0, y_r)]."""
    started = time.time()
    params = ModelParams(d=d, alpha=alpha, gamma=gamma, lam=lam)
    points = alpha_curve(
        params, _floats(r_grid), replicas, seed,
        xi=xi, dt=dt, particles=particles, control=control, max_time=max_time,
    )
    io.dump_json(
        {**io.stamp(seed),
         "points": [{"r": p.r, "mean_neg_logZ": p.mean_neg_logZ,
                     "stderr": p.stderr, "values": p.values} for p in points]},
        out,
    )
    click.echo(f"alpha(r) at {len(points)} radii -> {out}")
    cfg = io.config_hash(f"alpha-curve {d} {alpha} {gamma} {lam} {r_grid} "
                         f"{replicas} {xi} {control} {dt} {particles} {seed}")
    io.append_manifest(Path(out).parent, cfg, seed, started, [out])


@cli.command("band-resample")
@click.option("--field", "field_path", type=click.Path(exists=True), required=True)
@click.option("--geometry", type=click.Choice([HYPERPLANE, BALL]),
              default=BALL, show_default=True)
@click.option("--length", "--L", "L", type=float, required=True)
@click.option("--xi", type=float, default=0.75, show_default=True)
@click.option("--band", type=int, required=True)
@click.option("--replicas", type=int, default=16, show_default=True)
@_smc_options
@click.option("--out", type=click.Path(), required=True)
def band_resample_cmd(field_path, geometry, L, xi, band, replicas,
                      dt, particles, seed, max_time, out):
    """Redraw one dyadic band and measure |Delta log Zbar| (martingale increment)."""
    started = time.time()
    field = load_field(field_path)
    geom = Geometry(kind=geometry, L=L, d=field.params.d)
    res = band_resample_experiment(
        field, PotentialSpec.modified(L, xi), geom, band, replicas, seed,
        dt=dt, particles=particles, max_time=max_time,
    )
    io.dump_json({**io.stamp(seed), **res.to_dict()}, out)
    click.echo(f"band {band}: median |delta| = {res.median_delta:.4f} "
               f"(reference L^chi = {res.reference_scale:.2f})")
    cfg = io.config_hash(f"band-resample {field_path} {geometry} {L} {xi} "
                         f"{band} {replicas} {dt} {particles} {seed}")
    io.append_manifest(Path(out).parent, cfg, seed, started, [out])


@cli.command("compare-potentials")
@click.option("--field", "field_path", type=click.Path(exists=True), required=True)
@click.option("--geometry", type=click.Choice([HYPERPLANE, BALL]),
              default=HYPERPLANE, show_default=True)
@click.option("--length", "--L", "L", type=float, required=True)
@click.option("--xi", type=float, default=0.75, show_default=True)
@_smc_options
@click.option("--out", type=click.Path(), required=True)
def compare_potentials_cmd(field_path, geometry, L, xi, dt, particles, seed,
                           max_time, out):
    """mu(A^xi) under raw vs modified potentials with common random numbers."""
    started = time.time()
    field = load_field(field_path)
    geom = Geometry(kind=geometry, L=L, d=field.params.d)
    mu_raw, mu_mod, gap = modified_vs_raw(
        field, geom, xi, dt=dt, particles=particles, seed=seed, max_time=max_time
    )
    io.dump_json(
        {**io.stamp(seed), "xi": xi, "mu_A_raw": mu_raw,
         "mu_A_modified": mu_mod, "gap": gap},
        out,
    )
    click.echo(f"mu raw={mu_raw:.4f} modified={mu_mod:.4f} gap={gap:.4f}")
    cfg = io.config_hash(f"compare-potentials {field_path} {geometry} {L} {xi} "
                         f"{dt} {particles} {seed}")
    io.append_manifest(Path(out).parent, cfg, seed, started, [out])


@cli.command("bounds")
@click.option("--d", type=int, default=2, show_default=True)
@click.option("--alpha", type=float, required=True)
@click.option("--gamma", type=float, required=True)
@click.option("--xi", type=float, default=0.75, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def bounds_cmd(d, alpha, gamma, xi, out):
    """Print the closed-form bound set as JSON."""
    params = ModelParams(d=d, alpha=alpha, gamma=gamma, lam=1.0)
    b = theoretical_bounds(params, xi)
    payload = {**io.stamp(), "alpha": alpha, "gamma": gamma, "d": d, "xi": xi,
               **b.to_dict()}
    text = json.dumps(payload, sort_keys=True, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    click.echo(text)


@cli.command("fit")
@click.option("--csv", "csv_path", type=click.Path(exists=True), required=True)
@click.option("--observable", type=click.Choice(["fluct_q90", "logZ_disorder_std"]),
              default="fluct_q90", show_default=True)
@click.option("--out", type=click.Path(), default=None)
def fit_cmd(csv_path, observable, out):
    """Fit a power-law exponent from a sweep summary CSV."""
    records, meta = io.read_sweep_csv(csv_path)
    fit = fit_exponent(records, observable)
    seed = int(meta["master_seed"]) if "master_seed" in meta else None
    payload = {**io.stamp(seed), **fit.to_dict()}
    text = json.dumps(payload, sort_keys=True, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    click.echo(text)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(1)
    except click.UsageError as exc:
        exc.show()
        sys.exit(1)
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except SmcFailure as exc:
        click.echo(f"runtime failure: {exc}", err=True)
        sys.exit(2)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        click.echo(f"runtime failure: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
