"""Sequential Monte Carlo estimation of killed-Brownian survival probabilities.

Particles follow a Gaussian random walk (Euler discretization, variance dt per
coordinate per step). Killing is soft: each step multiplies a particle's
weight by exp(-dt * (lambda + V(x))) with V at the post-step position. The
target hit is detected geometrically (linear interpolation of the hyperplane
crossing; post-step containment for the ball). Systematic resampling fires
when the effective sample size drops below a configurable fraction of N; the
log-mean weight absorbed at each resampling accumulates into the partition
function estimate, which stays unbiased for the discretized dynamics.

Setting ess_threshold=0 disables resampling entirely; in that regime two runs
with the same seed share their full proposal noise, which makes comparisons
under common random numbers exactly monotone in the killing rate and in the
trap configuration.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from numba import njit

from .field import PotentialEvaluator, TrapField, _potential_at
from .geometry import BALL, DEFAULT_XI_GRID, HYPERPLANE, Geometry
from .params import PotentialSpec, ValidationError
from .seeds import derive_seed

ALIVE, HIT, DEAD = 0, 1, 2


class SmcFailure(RuntimeError):
    """All particles died before any reached the target."""


@dataclass(eq=False)
class SmcResult:
    """Outcome of one smc_run, including the final weighted ensemble."""

    log_Z_hat: float
    ess_trace: np.ndarray
    mu_A: dict
    fluct_quantiles: dict
    escape_frac: float
    n_particles: int
    dt: float
    seed: int
    n_steps: int
    truncated: bool
    warnings: list
    geom: Geometry = dc_field(repr=False, default=None)
    # final ensemble (per particle)
    status: np.ndarray = dc_field(repr=False, default=None)
    final_logw: np.ndarray = dc_field(repr=False, default=None)
    max_disp: np.ndarray = dc_field(repr=False, default=None)
    cube_counts: np.ndarray | None = dc_field(repr=False, default=None)
    cube_side: float | None = None

    def to_record(self) -> dict:
        """JSON-serializable summary (trace downsampled to <= 512 points)."""
        trace = self.ess_trace
        if trace.shape[0] > 512:
            stride = int(math.ceil(trace.shape[0] / 512))
            trace = trace[::stride]
        return {
            "log_Z_hat": self.log_Z_hat,
            "mu_A": {str(k): v for k, v in self.mu_A.items()},
            "fluct_quantiles": {str(k): v for k, v in self.fluct_quantiles.items()},
            "escape_frac": self.escape_frac,
            "n_particles": self.n_particles,
            "dt": self.dt,
            "seed": self.seed,
            "n_steps": self.n_steps,
            "truncated": self.truncated,
            "warnings": list(self.warnings),
            "ess_trace": [float(v) for v in trace],
        }


def weighted_quantile(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    """Smallest value v with cumulative normalized weight >= q."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    cw /= cw[-1]
    i = int(np.searchsorted(cw, q))
    return float(v[min(i, v.shape[0] - 1)])


def _lse(a: np.ndarray) -> float:
    """log(sum(exp(a))) without intermediate overflow; -inf for empty input."""
    if a.shape[0] == 0:
        return -math.inf
    m = float(a.max())
    if m == -math.inf:
        return -math.inf
    return m + math.log(float(np.exp(a - m).sum()))


def _systematic_resample(weights: np.ndarray, u0: float) -> np.ndarray:
    n = weights.shape[0]
    positions = (u0 + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum /= cum[-1]
    return np.searchsorted(cum, positions)


@functools.lru_cache(maxsize=None)
def _cube_offsets(d: int) -> np.ndarray:
    return np.array(list(itertools.product(range(-2, 2), repeat=d)), dtype=np.int64)


def _cubes_touching(point: np.ndarray, l: float) -> set:
    """All lattice cubes l*x + [0, l]^d whose l-enlargement contains the point."""
    c = np.floor(point / l).astype(np.int64) + _cube_offsets(point.shape[0])
    gap = np.maximum(l * c - point, 0.0) + np.maximum(point - l * (c + 1), 0.0)
    keep = np.einsum("ij,ij->i", gap, gap) <= l * l
    return set(map(tuple, c[keep].tolist()))


def count_visited_cubes(path: np.ndarray, l: float) -> int:
    """Brute-force A_T for one recorded path (N, d): distinct cubes whose
    l-enlargement is touched by some path point."""
    cubes: set = set()
    for p in np.atleast_2d(path):
        cubes |= _cubes_touching(np.asarray(p, float), l)
    return len(cubes)


@njit(cache=True)
def _ensemble_stats(logw, status):
    """One pass over the ensemble: (max logw, sum e, sum e^2, hit mass,
    alive mass, n_alive, n_live) with e = exp(logw - max), dead excluded."""
    N = logw.shape[0]
    m = -np.inf
    n_alive = 0
    n_live = 0
    for i in range(N):
        if status[i] != 2:
            n_live += 1
            if status[i] == 0:
                n_alive += 1
            if logw[i] > m:
                m = logw[i]
    s1 = 0.0
    s2 = 0.0
    s_hit = 0.0
    s_alive = 0.0
    if n_live == 0 or m == -np.inf:
        return m, s1, s2, s_hit, s_alive, n_alive, n_live
    for i in range(N):
        if status[i] == 2:
            continue
        e = np.exp(logw[i] - m)
        s1 += e
        s2 += e * e
        if status[i] == 1:
            s_hit += e
        else:
            s_alive += e
    return m, s1, s2, s_hit, s_alive, n_alive, n_live


@njit(cache=True)
def _step_kernel(
    pos, inc, logw, status, max_disp, moved,
    lam, dt, is_plane, L, target, lo, hi,
    centers, radii, contrib, band_ptr, cell_size, origin,
    ncells, strides, cellkeys, cellkey_ptr, cell_start, cell_end,
    modified, n_max, r_cut, clips,
):  # pragma: no cover - exercised via smc_run
    """Advance every alive particle one step in place; returns escape count.

    Semantics: hyperplane hits are interpolated to the crossing point and the
    step's killing weight is prorated; ball hits use the full step; particles
    stepping outside the window (without hitting) die with weight zero.
    """
    N, d = pos.shape
    L2 = 0.0
    for j in range(d):
        L2 += target[j] * target[j]
    n_escaped = 0
    for i in range(N):
        moved[i] = 0
        if status[i] != 0:
            continue
        crossed = False
        st = dt
        if is_plane:
            if pos[i, 0] + inc[i, 0] >= L:
                frac = (L - pos[i, 0]) / inc[i, 0]
                st = frac * dt
                for j in range(d):
                    pos[i, j] = pos[i, j] + frac * inc[i, j]
                crossed = True
        else:
            dd = 0.0
            for j in range(d):
                delta = pos[i, j] + inc[i, j] - target[j]
                dd += delta * delta
            crossed = dd <= 1.0
        if not crossed:
            out_w = False
            for j in range(d):
                nj = pos[i, j] + inc[i, j]
                if nj < lo[j] or nj > hi[j]:
                    out_w = True
            if out_w:
                status[i] = 2
                logw[i] = -np.inf
                n_escaped += 1
                continue
            for j in range(d):
                pos[i, j] = pos[i, j] + inc[i, j]
        elif not is_plane:
            for j in range(d):
                pos[i, j] = pos[i, j] + inc[i, j]
        moved[i] = 1
        if radii.shape[0] > 0:
            v = _potential_at(
                pos[i], centers, radii, contrib, band_ptr, cell_size, origin,
                ncells, strides, cellkeys, cellkey_ptr, cell_start, cell_end,
                modified, n_max, r_cut, clips,
            )
        else:
            v = 0.0
        logw[i] = logw[i] - st * (lam + v)
        t = 0.0
        for j in range(d):
            t += pos[i, j] * target[j]
        t /= L2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        dd = 0.0
        for j in range(d):
            delta = pos[i, j] - t * target[j]
            dd += delta * delta
        dist = math.sqrt(dd)
        if dist > max_disp[i]:
            max_disp[i] = dist
        if crossed:
            status[i] = 1
    return n_escaped


def smc_run(
    field: TrapField,
    spec: PotentialSpec,
    geom: Geometry,
    dt: float,
    n_particles: int,
    seed: int,
    *,
    lam: float | None = None,
    ess_threshold: float = 0.5,
    max_time: float | None = None,
    tail_tol: float = 1e-4,
    xi_grid=DEFAULT_XI_GRID,
    cube_side: float | None = None,
) -> SmcResult:
    """Run the particle system to the target; see module docstring.

    Deterministic given all arguments. Raises SmcFailure when every particle
    dies (leaves the window) before any reaches the target.
    """
    if dt > 0.1 or dt <= 0:
        raise ValidationError("dt must be in (0, 0.1]")
    if n_particles < 100:
        raise ValidationError("n_particles must be >= 100")
    if lam is None:
        lam = field.params.lam
    if lam < 0:
        raise ValidationError("lambda override must be nonnegative")
    d = geom.d
    if d != field.params.d:
        raise ValidationError("geometry dimension does not match the field")
    if not field.contains(np.zeros(d)):
        raise ValidationError("start point (origin) is outside the field window")
    xi_grid = tuple(xi_grid)
    _check_tube_fits(field, geom, max(xi_grid) if xi_grid else 0.55)
    if max_time is None:
        max_time = 50.0 + 6.0 * geom.L / max(math.sqrt(2.0 * lam), 0.25)
    max_steps = int(math.ceil(max_time / dt))

    rng = np.random.default_rng(derive_seed(seed, [0]))
    V = PotentialEvaluator(field, spec)
    N = n_particles
    sqrt_dt = math.sqrt(dt)
    pos = np.zeros((N, d))
    logw = np.zeros(N)
    status = np.zeros(N, dtype=np.int8)
    max_disp = np.zeros(N)
    cube_sets = [set() for _ in range(N)] if cube_side is not None else None
    if cube_sets is not None:
        start_cubes = _cubes_touching(np.zeros(d), cube_side)
        for s in cube_sets:
            s |= start_cubes

    log_Z_acc = 0.0
    ess_trace = []
    n_escaped = 0
    target = np.ascontiguousarray(geom.target, dtype=float)
    is_plane = geom.kind == HYPERPLANE
    L = geom.L
    lo = np.ascontiguousarray(field.window_lo, dtype=float)
    hi = np.ascontiguousarray(field.window_hi, dtype=float)
    log_tail = math.log(tail_tol) if tail_tol > 0 else -math.inf
    moved = np.zeros(N, dtype=np.uint8)
    pargs = V._args

    step = 0
    truncated = False
    while True:
        if not (status == ALIVE).any():
            break
        if step >= max_steps:
            truncated = True
            break
        inc = rng.standard_normal((N, d)) * sqrt_dt
        n_escaped += _step_kernel(
            pos, inc, logw, status, max_disp, moved,
            lam, dt, is_plane, L, target, lo, hi, *pargs,
        )
        if cube_sets is not None:
            for i in np.flatnonzero(moved):
                cube_sets[i] |= _cubes_touching(pos[i], cube_side)

        m, s1, s2, s_hit, s_alive, n_alive, n_live = _ensemble_stats(logw, status)
        if n_live == 0 or m == -math.inf:
            break
        lse_all = m + math.log(s1)
        ess = s1 * s1 / s2
        ess_trace.append(ess)

        if ess_threshold > 0 and ess < ess_threshold * N:
            log_Z_acc += lse_all - math.log(N)
            w = np.exp(logw - m)
            w[status == DEAD] = 0.0
            picks = _systematic_resample(w, rng.random())
            pos = pos[picks].copy()
            status = status[picks].copy()
            max_disp = max_disp[picks].copy()
            if cube_sets is not None:
                cube_sets = [set(cube_sets[i]) for i in picks]
            logw = np.zeros(N)
        elif s_hit > 0.0:
            if n_alive == 0:
                break
            if s_alive <= 0.0 or math.log(s_alive) - math.log(s_hit) < log_tail:
                break
        step += 1

    live_mask = status != DEAD
    if live_mask.any():
        log_Z_hat = log_Z_acc + _lse(logw[live_mask]) - math.log(N)
    else:
        log_Z_hat = -math.inf
    hit = status == HIT
    if not hit.any():
        if not live_mask.any():
            raise SmcFailure("all particles died before any reached the target")
        raise SmcFailure("no particle reached the target within the time horizon")

    warnings = []
    escape_frac = n_escaped / N
    if escape_frac > 0.01:
        warnings.append(f"window escape fraction {escape_frac:.3f} exceeds 1%")
    if truncated:
        warnings.append("run truncated at max_time before the weight tail vanished")

    result = SmcResult(
        log_Z_hat=float(log_Z_hat),
        ess_trace=np.array(ess_trace),
        mu_A={},
        fluct_quantiles={},
        escape_frac=escape_frac,
        n_particles=N,
        dt=dt,
        seed=seed,
        n_steps=step,
        truncated=truncated,
        warnings=warnings,
        geom=geom,
        status=status,
        final_logw=logw,
        max_disp=max_disp,
        cube_counts=(
            np.array([len(s) for s in cube_sets]) if cube_sets is not None else None
        ),
        cube_side=cube_side,
    )
    result.mu_A = mu_event_estimates(result, xi_grid)
    hw = _hit_weights(result)
    result.fluct_quantiles = {
        q: weighted_quantile(result.max_disp[hit], hw, q) for q in (0.5, 0.9, 0.99)
    }
    return result


def _check_tube_fits(field: TrapField, geom: Geometry, xi_max: float) -> None:
    half = geom.L ** xi_max + 5.0 * math.sqrt(geom.L)
    lo_need = np.minimum(np.zeros(geom.d), geom.axis_end) - half
    hi_need = np.maximum(np.zeros(geom.d), geom.axis_end) + half
    if np.any(field.window_lo > lo_need + 1e-9) or np.any(
        field.window_hi < hi_need - 1e-9
    ):
        raise ValidationError(
            "field window too small: must contain the tube at the largest "
            "requested xi plus 5*sqrt(L) slack"
        )


def _hit_weights(result: SmcResult) -> np.ndarray:
    hit = result.status == HIT
    lw = result.final_logw[hit]
    w = np.exp(lw - lw.max())
    return w / w.sum()


def mu_event_estimates(result: SmcResult, xi_grid) -> dict:
    """Estimated mu(A^xi): weighted fraction of surviving paths that never left
    the capsule of radius L**xi. Exactly nondecreasing in xi."""
    hit = result.status == HIT
    if not hit.any():
        raise SmcFailure("no surviving particles; mu(A^xi) undefined")
    lw = result.final_logw[hit]
    w = np.exp(lw - lw.max())
    md = result.max_disp[hit]
    L = result.geom.L
    total = float(w.sum())
    # the all-inclusive tube gives exactly 1 (identical reduction order)
    return {float(xi): float(w[md <= L ** xi].sum()) / total for xi in xi_grid}


def visited_cubes_tail(result: SmcResult) -> tuple[np.ndarray, np.ndarray]:
    """Weighted empirical tail P(A_T >= n) over surviving particles, for the
    cube side fixed at run time."""
    if result.cube_counts is None:
        raise ValidationError("run was executed without cube tracking")
    hit = result.status == HIT
    if not hit.any():
        raise SmcFailure("no surviving particles")
    w = _hit_weights(result)
    counts = result.cube_counts[hit]
    ns = np.arange(1, counts.max() + 1)
    tail = np.array([w[counts >= n].sum() for n in ns])
    return ns, tail
