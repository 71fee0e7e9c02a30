"""Experiment orchestration: sweeps, exponent fits, and disorder experiments."""

from __future__ import annotations

import math
import os
import time
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .bounds import theoretical_bounds
from .field import TrapField, auto_r_max, empty_field, replace_band, sample_field
from .geometry import BALL, DEFAULT_XI_GRID, HYPERPLANE, Geometry, default_window
from .params import ModelParams, PotentialSpec, ValidationError
from .seeds import derive_seed
from .smc import SmcFailure, mu_event_estimates, smc_run

WORKERS_ENV = "TRAPMC_WORKERS"


def n_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


@dataclass
class SweepConfig:
    """Configuration for an L-sweep with disorder replicas."""

    params: ModelParams
    L_grid: tuple
    replicas: int
    master_seed: int
    xi: float = 0.95              # tube exponent used for the modified-potential cutoff
    xi_grid: tuple = DEFAULT_XI_GRID
    dt: float = 1e-3
    particles: int = 10_000
    geometry: str = HYPERPLANE
    control: bool = False         # trap-free control medium
    max_time: float | None = None
    ess_threshold: float = 0.5    # 0 disables resampling (useful in dense disorder,
                                  # where selection re-anchors the cloud and stalls it)

    def __post_init__(self):
        if len(self.L_grid) < 1:
            raise ValidationError("L_grid must be non-empty")
        if self.replicas < 1:
            raise ValidationError("replicas must be >= 1")


@dataclass
class SweepRecord:
    L: float
    replica: int
    field_seed: int
    smc_seed: int
    log_Z_hat: float
    mu_A: dict
    q50: float
    q90: float
    q99: float
    escape_frac: float
    runtime: float
    failed: bool = False
    error: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mu_A"] = {str(k): v for k, v in self.mu_A.items()}
        return d


@dataclass
class ExponentFit:
    observable: str
    slope: float
    intercept: float
    stderr: float
    r_squared: float
    L_values: list
    excluded: list = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _sweep_field(config: SweepConfig, L: float, field_seed: int) -> TrapField:
    geom = Geometry(kind=config.geometry, L=L, d=config.params.d)
    lo, hi = default_window(geom, xi_max=max(config.xi_grid))
    if config.control:
        return empty_field(config.params, lo, hi)
    xi_bar = min(config.xi, config.params.d / config.params.alpha)
    r_max = auto_r_max(config.params, lo, hi, at_least=2.0 * L ** xi_bar)
    return sample_field(config.params, lo, hi, r_max, field_seed)


def _run_one(config: SweepConfig, iL: int, L: float, replica: int) -> SweepRecord:
    field_seed = derive_seed(config.master_seed, [iL, replica, 0])
    smc_seed = derive_seed(config.master_seed, [iL, replica, 1])
    t0 = time.perf_counter()
    try:
        field = _sweep_field(config, L, field_seed)
        geom = Geometry(kind=config.geometry, L=L, d=config.params.d)
        spec = (
            PotentialSpec.raw()
            if config.control
            else PotentialSpec.modified(L, config.xi)
        )
        res = smc_run(
            field, spec, geom, config.dt, config.particles, smc_seed,
            xi_grid=config.xi_grid, max_time=config.max_time,
            ess_threshold=config.ess_threshold,
        )
        return SweepRecord(
            L=L, replica=replica, field_seed=field_seed, smc_seed=smc_seed,
            log_Z_hat=res.log_Z_hat, mu_A=res.mu_A,
            q50=res.fluct_quantiles[0.5], q90=res.fluct_quantiles[0.9],
            q99=res.fluct_quantiles[0.99], escape_frac=res.escape_frac,
            runtime=time.perf_counter() - t0,
        )
    except SmcFailure as exc:
        return SweepRecord(
            L=L, replica=replica, field_seed=field_seed, smc_seed=smc_seed,
            log_Z_hat=math.nan, mu_A={}, q50=math.nan, q90=math.nan, q99=math.nan,
            escape_frac=math.nan, runtime=time.perf_counter() - t0,
            failed=True, error=str(exc),
        )


def run_sweep(config: SweepConfig) -> list[SweepRecord]:
    """One record per (L, replica); deterministic given the master seed.

    Pairs run embarrassingly parallel (TRAPMC_WORKERS); aggregation preserves
    submission order so results do not depend on the schedule.
    """
    tasks = [
        (iL, L, rep)
        for iL, L in enumerate(config.L_grid)
        for rep in range(config.replicas)
    ]
    jobs = n_workers()
    if jobs == 1:
        return [_run_one(config, *t) for t in tasks]
    return Parallel(n_jobs=jobs)(delayed(_run_one)(config, *t) for t in tasks)


def fit_exponent(records, observable: str) -> ExponentFit:
    """OLS of log(per-L aggregate) against log L.

    fluct_q90 aggregates the weighted 0.9-quantile across replicas by median;
    logZ_disorder_std uses the across-replica standard deviation of log Z.
    """
    if observable not in ("fluct_q90", "logZ_disorder_std"):
        raise ValidationError(f"unknown observable {observable!r}")
    by_L: dict[float, list] = {}
    for r in records:
        if getattr(r, "failed", False):
            continue
        by_L.setdefault(float(r.L), []).append(r)
    if len(by_L) < 4:
        raise ValidationError("fit requires >= 4 distinct L values")
    Ls, ys, excluded = [], [], []
    for L in sorted(by_L):
        rs = by_L[L]
        if observable == "fluct_q90":
            y = float(np.median([r.q90 for r in rs]))
        else:
            if len(rs) < 8:
                raise ValidationError(
                    "logZ_disorder_std requires >= 8 replicas per L"
                )
            y = float(np.std([r.log_Z_hat for r in rs], ddof=1))
        if not y > 0 or not math.isfinite(y):
            excluded.append(L)
            continue
        Ls.append(L)
        ys.append(y)
    if len(Ls) < 4:
        raise ValidationError("fewer than 4 usable L values after exclusions")
    fit = stats.linregress(np.log(Ls), np.log(ys))
    return ExponentFit(
        observable=observable,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        stderr=float(fit.stderr),
        r_squared=float(fit.rvalue**2),
        L_values=Ls,
        excluded=excluded,
    )


@dataclass
class AlphaPoint:
    r: float
    mean_neg_logZ: float
    stderr: float
    values: list  # per-replica -log Z estimates


def alpha_curve(
    params: ModelParams,
    r_grid,
    replicas: int,
    master_seed: int,
    *,
    xi: float = 0.75,
    dt: float = 1e-3,
    particles: int = 2000,
    control: bool = False,
    max_time: float | None = None,
) -> list[AlphaPoint]:
    """Estimate alpha(r) = -E[log Zbar(0, y_r)] on an increasing r-grid."""
    r_grid = list(r_grid)
    if any(b <= a for a, b in zip(r_grid, r_grid[1:])):
        raise ValidationError("r-grid must be strictly increasing")

    def one(ir, r, rep):
        geom = Geometry(kind=BALL, L=float(r), d=params.d)
        lo, hi = default_window(geom, xi_max=xi)
        if control:
            field = empty_field(params, lo, hi)
            spec = PotentialSpec.raw()
        else:
            xi_bar = min(xi, params.d / params.alpha)
            r_max = auto_r_max(params, lo, hi, at_least=2.0 * r ** xi_bar)
            field = sample_field(
                params, lo, hi, r_max, derive_seed(master_seed, [ir, rep, 0])
            )
            spec = PotentialSpec.modified(float(r), xi)
        res = smc_run(
            field, spec, geom, dt, particles,
            derive_seed(master_seed, [ir, rep, 1]),
            xi_grid=(xi,), max_time=max_time,
        )
        return -res.log_Z_hat

    tasks = [(ir, r, rep) for ir, r in enumerate(r_grid) for rep in range(replicas)]
    jobs = n_workers()
    if jobs == 1:
        vals = [one(*t) for t in tasks]
    else:
        vals = Parallel(n_jobs=jobs)(delayed(one)(*t) for t in tasks)
    points = []
    for ir, r in enumerate(r_grid):
        v = np.array(vals[ir * replicas : (ir + 1) * replicas])
        points.append(
            AlphaPoint(
                r=float(r),
                mean_neg_logZ=float(v.mean()),
                stderr=float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0,
                values=[float(x) for x in v],
            )
        )
    return points


@dataclass
class BandResampleResult:
    band: int
    deltas: list            # |log Zbar(omega) - log Zbar(omega')| per replacement
    median_delta: float
    chi: float
    reference_scale: float  # L**chi

    def to_dict(self) -> dict:
        return asdict(self)


def band_resample_experiment(
    field: TrapField,
    spec: PotentialSpec,
    geom: Geometry,
    band: int,
    replicas: int,
    master_seed: int,
    *,
    dt: float = 5e-3,
    particles: int = 1000,
    max_time: float | None = None,
) -> BandResampleResult:
    """Empirical martingale increment: redraw one dyadic band, rerun with
    common random numbers (no resampling), and collect |Delta log Zbar|."""
    if spec.mode != "modified":
        raise ValidationError("band resampling is defined for the modified potential")
    if not 0 <= band <= spec.n_max(field.params):
        raise ValidationError(f"band must lie in [0, {spec.n_max(field.params)}]")
    smc_seed = derive_seed(master_seed, [0])
    common = dict(
        dt=dt, n_particles=particles, seed=smc_seed,
        ess_threshold=0.0, max_time=max_time, xi_grid=(spec.xi,),
    )
    base = smc_run(field, spec, geom, **common).log_Z_hat
    deltas = []
    for i in range(replicas):
        other = replace_band(field, band, derive_seed(master_seed, [1, i]))
        deltas.append(abs(smc_run(other, spec, geom, **common).log_Z_hat - base))
    chi = theoretical_bounds(field.params, spec.xi).chi
    return BandResampleResult(
        band=band,
        deltas=[float(x) for x in deltas],
        median_delta=float(np.median(deltas)),
        chi=chi,
        reference_scale=float(geom.L**chi),
    )


def modified_vs_raw(
    field: TrapField,
    geom: Geometry,
    xi: float,
    *,
    dt: float = 5e-3,
    particles: int = 1000,
    seed: int = 0,
    max_time: float | None = None,
) -> tuple[float, float, float]:
    """mu(A^xi) under the raw and modified potentials with common random
    numbers; returns (raw, modified, absolute gap)."""
    common = dict(
        dt=dt, n_particles=particles, seed=seed,
        ess_threshold=0.0, max_time=max_time, xi_grid=(xi,),
    )
    res_raw = smc_run(field, PotentialSpec.raw(), geom, **common)
    res_mod = smc_run(field, PotentialSpec.modified(geom.L, xi), geom, **common)
    mu_raw = res_raw.mu_A[xi]
    mu_mod = res_mod.mu_A[xi]
    return mu_raw, mu_mod, abs(mu_raw - mu_mod)
