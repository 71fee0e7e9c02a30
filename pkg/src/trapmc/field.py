"""Windowed realizations of the marked Poisson trap field.

A field is a finite set of traps (center, radius) drawn from the Poisson
process with intensity Lebesgue x nu, where nu has tail nu([r, inf)) = r**-alpha
on [1, inf). Radii are organized in dyadic bands [2^n, 2^(n+1)); each band is
drawn over the window padded by the band's maximum radius, so no trap
intersecting the window is missed, and is indexed by a uniform grid of cells
of side 2^(n+1) for O(1) potential queries.

Containment uses the non-strict inequality |x - center| <= radius, evaluated
as squared distance <= radius**2 in every code path so that indexed, brute
force and batched evaluations agree on boundary cases.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Iterator

import numpy as np
from numba import njit

from .params import MODIFIED, ModelParams, PotentialSpec, ValidationError
from .seeds import derive_seed

FIELD_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Trap:
    center: np.ndarray
    radius: float

    @property
    def band(self) -> int:
        return int(math.floor(math.log2(self.radius)))


@dataclass(frozen=True, eq=False)
class _FieldIndex:
    """Grid-bucketed lookup, one grid per dyadic band (cell side 2^(n+1))."""

    n_bands: int
    band_ptr: np.ndarray      # (nb+1,) trap ranges per band in the flat arrays
    cell_size: np.ndarray     # (nb,)
    origin: np.ndarray        # (nb, d)
    ncells: np.ndarray        # (nb, d) int64
    strides: np.ndarray       # (nb, d) int64
    cellkeys: np.ndarray      # concatenated sorted unique cell keys
    cellkey_ptr: np.ndarray   # (nb+1,) segments of cellkeys per band
    cell_start: np.ndarray    # (K,) absolute trap index of first trap in cell
    cell_end: np.ndarray      # (K,)


@dataclass(frozen=True, eq=False)
class TrapField:
    """Immutable quenched disorder realization over a window.

    Trap arrays are stored sorted by (band, cell key, draw order) and are
    read-only; the field is safe for concurrent read access.
    """

    params: ModelParams
    window_lo: np.ndarray
    window_hi: np.ndarray
    r_max: float
    seed: int
    centers: np.ndarray       # (m, d)
    radii: np.ndarray         # (m,)
    bands: np.ndarray         # (m,) int64
    expected_excess: float    # E[# traps with radius > r_max intersecting window]
    index: _FieldIndex = dc_field(repr=False, default=None)

    @property
    def n_traps(self) -> int:
        return int(self.radii.shape[0])

    def iter_traps(self) -> Iterator[Trap]:
        for i in range(self.n_traps):
            yield Trap(self.centers[i], float(self.radii[i]))

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.window_lo) and np.all(x <= self.window_hi))


def _band_bounds(band: int, r_max: float) -> tuple[float, float]:
    return 2.0 ** band, min(2.0 ** (band + 1), r_max)


def _band_mass(params: ModelParams, band: int, r_max: float) -> float:
    """nu([2^n, min(2^(n+1), r_max))) for the truncated radius law."""
    lo, hi = _band_bounds(band, r_max)
    if hi <= lo:
        return 0.0
    return lo ** -params.alpha - hi ** -params.alpha


def band_poisson_mean(
    params: ModelParams,
    window_lo: np.ndarray,
    window_hi: np.ndarray,
    band: int,
    r_max: float,
) -> float:
    """Configured Poisson mean for one band: band mass x padded-window volume."""
    pad = 2.0 ** (band + 1)
    widths = np.asarray(window_hi, float) - np.asarray(window_lo, float) + 2.0 * pad
    return _band_mass(params, band, r_max) * float(np.prod(widths))


def expected_excess_traps(
    params: ModelParams, window_lo: np.ndarray, window_hi: np.ndarray, r_max: float
) -> float:
    """Expected number of traps with radius > r_max whose ball meets the window.

    Overestimates the Minkowski-sum volume by the padded box prod(w_i + 2r);
    the integral of alpha r**(-alpha-1) prod(w_i + 2r) over [r_max, inf) is a
    finite sum because alpha > d.
    """
    w = np.asarray(window_hi, float) - np.asarray(window_lo, float)
    # polynomial coefficients of prod(w_i + 2r) in increasing powers of r
    coeffs = np.array([1.0])
    for wi in w:
        coeffs = np.convolve(coeffs, np.array([wi, 2.0]))
    a = params.alpha
    total = 0.0
    for k, ck in enumerate(coeffs):
        total += ck * a / (a - k) * r_max ** (k - a)
    return total


def auto_r_max(
    params: ModelParams,
    window_lo: np.ndarray,
    window_hi: np.ndarray,
    threshold: float = 0.01,
    at_least: float = 2.0,
) -> float:
    """Smallest power of two >= at_least with expected excess below threshold."""
    r = 2.0
    while r < at_least:
        r *= 2.0
    while expected_excess_traps(params, window_lo, window_hi, r) >= threshold:
        r *= 2.0
    return r


def _draw_band(
    params: ModelParams,
    window_lo: np.ndarray,
    window_hi: np.ndarray,
    r_max: float,
    band: int,
    band_seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one band's traps (in draw order), keeping only window-intersecting ones."""
    d = params.d
    lo_r, hi_r = _band_bounds(band, r_max)
    mass = _band_mass(params, band, r_max)
    if mass <= 0.0:
        return np.empty((0, d)), np.empty(0)
    pad = 2.0 ** (band + 1)
    plo = window_lo - pad
    phi = window_hi + pad
    rng = np.random.default_rng(band_seed)
    n = rng.poisson(band_poisson_mean(params, window_lo, window_hi, band, r_max))
    centers = plo + rng.random((n, d)) * (phi - plo)
    u = rng.random(n)
    radii = (lo_r ** -params.alpha - u * mass) ** (-1.0 / params.alpha)
    # keep traps whose ball intersects the unpadded window (boundary inclusive)
    excess = np.maximum(window_lo - centers, 0.0) + np.maximum(centers - window_hi, 0.0)
    keep = np.einsum("ij,ij->i", excess, excess) <= radii * radii
    return centers[keep], radii[keep]


def _build_index(
    d: int,
    window_lo: np.ndarray,
    window_hi: np.ndarray,
    per_band: list[tuple[np.ndarray, np.ndarray]],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, _FieldIndex]:
    """Sort per-band draws into flat arrays and build the grid index."""
    nb = len(per_band)
    band_ptr = np.zeros(nb + 1, dtype=np.int64)
    cell_size = np.zeros(nb)
    origin = np.zeros((nb, d))
    ncells = np.zeros((nb, d), dtype=np.int64)
    strides = np.zeros((nb, d), dtype=np.int64)
    all_centers, all_radii, all_bands = [], [], []
    cellkeys_parts, cell_start_parts, cell_end_parts = [], [], []
    cellkey_ptr = np.zeros(nb + 1, dtype=np.int64)
    offset = 0
    for b, (centers, radii) in enumerate(per_band):
        s = 2.0 ** (b + 1)
        cell_size[b] = s
        origin[b] = window_lo - 2.0 * s
        nc = np.floor((window_hi - window_lo) / s).astype(np.int64) + 4
        ncells[b] = nc
        st = np.ones(d, dtype=np.int64)
        for i in range(d - 2, -1, -1):
            st[i] = st[i + 1] * nc[i + 1]
        strides[b] = st
        m = centers.shape[0]
        if m:
            coords = np.floor((centers - origin[b]) / s).astype(np.int64)
            keys = coords @ st
            order = np.argsort(keys, kind="stable")
            centers = centers[order]
            radii = radii[order]
            keys = keys[order]
            uniq, first = np.unique(keys, return_index=True)
            starts = offset + first
            ends = np.append(offset + first[1:], offset + m)
            cellkeys_parts.append(uniq)
            cell_start_parts.append(starts)
            cell_end_parts.append(ends)
            cellkey_ptr[b + 1] = cellkey_ptr[b] + uniq.shape[0]
        else:
            cellkey_ptr[b + 1] = cellkey_ptr[b]
        all_centers.append(centers)
        all_radii.append(radii)
        all_bands.append(np.full(m, b, dtype=np.int64))
        offset += m
        band_ptr[b + 1] = offset

    def cat(parts, dtype, shape1=None):
        if not parts:
            return np.empty((0,) if shape1 is None else (0, shape1), dtype=dtype)
        return np.concatenate(parts)

    centers = cat(all_centers, float, d)
    radii = cat(all_radii, float)
    bands = cat(all_bands, np.int64)
    index = _FieldIndex(
        n_bands=nb,
        band_ptr=band_ptr,
        cell_size=cell_size,
        origin=origin,
        ncells=ncells,
        strides=strides,
        cellkeys=cat(cellkeys_parts, np.int64),
        cellkey_ptr=cellkey_ptr,
        cell_start=cat(cell_start_parts, np.int64),
        cell_end=cat(cell_end_parts, np.int64),
    )
    for a in (centers, radii, bands):
        a.setflags(write=False)
    return centers, radii, bands, index


def _assemble(
    params: ModelParams,
    window_lo: np.ndarray,
    window_hi: np.ndarray,
    r_max: float,
    seed: int,
    per_band: list[tuple[np.ndarray, np.ndarray]],
) -> TrapField:
    centers, radii, bands, index = _build_index(params.d, window_lo, window_hi, per_band)
    window_lo = window_lo.copy()
    window_hi = window_hi.copy()
    window_lo.setflags(write=False)
    window_hi.setflags(write=False)
    return TrapField(
        params=params,
        window_lo=window_lo,
        window_hi=window_hi,
        r_max=r_max,
        seed=seed,
        centers=centers,
        radii=radii,
        bands=bands,
        expected_excess=expected_excess_traps(params, window_lo, window_hi, r_max),
        index=index,
    )


def _n_bands(r_max: float) -> int:
    # bands 0 .. B with 2^B < r_max
    return max(1, int(math.ceil(math.log2(r_max))))


def sample_field(
    params: ModelParams,
    window_lo,
    window_hi,
    r_max: float,
    seed: int,
) -> TrapField:
    """Sample a windowed field realization; deterministic given all arguments."""
    window_lo = np.asarray(window_lo, dtype=float)
    window_hi = np.asarray(window_hi, dtype=float)
    if window_lo.shape != (params.d,) or window_hi.shape != (params.d,):
        raise ValidationError("window extents must have length d")
    if np.any(window_hi < window_lo):
        raise ValidationError("window must satisfy lo <= hi in every dimension")
    if r_max < 1.0:
        raise ValidationError("r_max must be >= 1 (nu has no mass below 1)")
    per_band = [
        _draw_band(params, window_lo, window_hi, r_max, b, derive_seed(seed, [b]))
        for b in range(_n_bands(r_max))
    ]
    return _assemble(params, window_lo, window_hi, r_max, seed, per_band)


def empty_field(params: ModelParams, window_lo, window_hi) -> TrapField:
    """A trap-free field over the window (homogeneous control medium)."""
    window_lo = np.asarray(window_lo, dtype=float)
    window_hi = np.asarray(window_hi, dtype=float)
    d = params.d
    per_band = [(np.empty((0, d)), np.empty(0))]
    fld = _assemble(params, window_lo, window_hi, 2.0, 0, per_band)
    object.__setattr__(fld, "expected_excess", 0.0)
    return fld


def replace_band(field: TrapField, band: int, seed: int) -> TrapField:
    """Redraw one dyadic band independently, holding all other bands fixed.

    Replacing every band with the same seed reproduces sample_field(seed)
    exactly, because each band's stream is derived as derive_seed(seed, [band]).
    """
    nb = field.index.n_bands
    if not 0 <= band < nb:
        raise ValidationError(f"band {band} outside the field's range [0, {nb - 1}]")
    per_band = []
    for b in range(nb):
        if b == band:
            per_band.append(
                _draw_band(
                    field.params, field.window_lo, field.window_hi, field.r_max,
                    b, derive_seed(seed, [b]),
                )
            )
        else:
            i0, i1 = field.index.band_ptr[b], field.index.band_ptr[b + 1]
            per_band.append((field.centers[i0:i1].copy(), field.radii[i0:i1].copy()))
    return _assemble(
        field.params, field.window_lo.copy(), field.window_hi.copy(),
        field.r_max, seed, per_band,
    )


def add_trap(field: TrapField, center, radius: float) -> TrapField:
    """Return a new field with one extra trap appended (adversarial setups).

    The center must lie within the window padded by the trap band's cell size,
    matching the support of the sampler's own draws.
    """
    center = np.asarray(center, dtype=float)
    if center.shape != (field.params.d,):
        raise ValidationError("trap center must be a point in R^d")
    if radius < 1.0:
        raise ValidationError("trap radius must be >= 1")
    band = int(math.floor(math.log2(radius)))
    pad = 2.0 ** (band + 1)
    if np.any(center < field.window_lo - pad) or np.any(center > field.window_hi + pad):
        raise ValidationError("trap center lies too far outside the window for its band")
    nb = max(field.index.n_bands, band + 1)
    per_band = []
    for b in range(nb):
        if b < field.index.n_bands:
            i0, i1 = field.index.band_ptr[b], field.index.band_ptr[b + 1]
            c, r = field.centers[i0:i1].copy(), field.radii[i0:i1].copy()
        else:
            c, r = np.empty((0, field.params.d)), np.empty(0)
        if b == band:
            c = np.vstack([c, center[None, :]]) if c.size else center[None, :].copy()
            r = np.append(r, float(radius))
        per_band.append((c, r))
    return _assemble(
        field.params, field.window_lo.copy(), field.window_hi.copy(),
        max(field.r_max, 2.0 ** (band + 1)), field.seed, per_band,
    )


# ---------------------------------------------------------------------------
# potential evaluation


def _require_in_window(field: TrapField, x: np.ndarray) -> None:
    if not field.contains(x):
        raise ValidationError(f"query point {x} lies outside the field window")


def _mode_constants(field: TrapField, spec: PotentialSpec):
    """(modified?, n_max, radius cutoff, per-band clip levels)."""
    nb = field.index.n_bands
    if spec.mode == MODIFIED:
        n_max = spec.n_max(field.params)
        r_cut = spec.radius_cutoff(field.params)
        clips = np.array([spec.clip(n, field.params) for n in range(nb)])
        return True, n_max, r_cut, clips
    return False, nb - 1, math.inf, np.full(nb, math.inf)


def _cells_around(field: TrapField, b: int, x: np.ndarray):
    """Yield (start, end) trap ranges of the 3^d cells around x in band b."""
    idx = field.index
    s = idx.cell_size[b]
    base = np.floor((x - idx.origin[b]) / s).astype(np.int64)
    d = x.shape[0]
    k0, k1 = idx.cellkey_ptr[b], idx.cellkey_ptr[b + 1]
    if k0 == k1:
        return
    keys = idx.cellkeys[k0:k1]
    for flat in range(3 ** d):
        key = 0
        rem = flat
        ok = True
        for i in range(d):
            off = rem % 3 - 1
            rem //= 3
            c = base[i] + off
            if c < 0 or c >= idx.ncells[b, i]:
                ok = False
                break
            key += c * idx.strides[b, i]
        if not ok:
            continue
        j = np.searchsorted(keys, key)
        if j < keys.shape[0] and keys[j] == key:
            yield int(idx.cell_start[k0 + j]), int(idx.cell_end[k0 + j])


def potential(field: TrapField, spec: PotentialSpec, x) -> float:
    """Potential at x via the spatial index, with exactly-rounded band sums.

    Per-band contributions are accumulated with math.fsum, so the result is
    independent of trap enumeration order and bit-identical to a brute-force
    scan (potential_brute).
    """
    x = np.asarray(x, dtype=float)
    _require_in_window(field, x)
    modified, n_max, r_cut, clips = _mode_constants(field, spec)
    gamma = field.params.gamma
    band_vals = []
    for b in range(field.index.n_bands):
        if modified and b > n_max:
            continue
        contribs = []
        for i0, i1 in _cells_around(field, b, x):
            for t in range(i0, i1):
                r = field.radii[t]
                if r > r_cut:
                    continue
                delta = x - field.centers[t]
                if delta @ delta <= r * r:
                    contribs.append(r ** -gamma)
        band_sum = math.fsum(contribs)
        band_vals.append(min(band_sum, clips[b]) if modified else band_sum)
    return math.fsum(band_vals)


def potential_brute(field: TrapField, spec: PotentialSpec, x) -> float:
    """Exhaustive scan over all stored traps; oracle for index correctness."""
    x = np.asarray(x, dtype=float)
    _require_in_window(field, x)
    modified, n_max, r_cut, clips = _mode_constants(field, spec)
    gamma = field.params.gamma
    band_vals = []
    for b in range(field.index.n_bands):
        if modified and b > n_max:
            continue
        i0, i1 = field.index.band_ptr[b], field.index.band_ptr[b + 1]
        contribs = []
        for t in range(i0, i1):
            r = field.radii[t]
            if r > r_cut:
                continue
            delta = x - field.centers[t]
            if delta @ delta <= r * r:
                contribs.append(r ** -gamma)
        band_sum = math.fsum(contribs)
        band_vals.append(min(band_sum, clips[b]) if modified else band_sum)
    return math.fsum(band_vals)


def overlap_count(field: TrapField, x) -> int:
    """Number of traps whose closed ball contains x."""
    x = np.asarray(x, dtype=float)
    _require_in_window(field, x)
    count = 0
    for b in range(field.index.n_bands):
        for i0, i1 in _cells_around(field, b, x):
            for t in range(i0, i1):
                r = field.radii[t]
                delta = x - field.centers[t]
                if delta @ delta <= r * r:
                    count += 1
    return count


@njit(cache=True)
def _potential_at(
    x, centers, radii, contrib,
    band_ptr, cell_size, origin, ncells, strides,
    cellkeys, cellkey_ptr, cell_start, cell_end,
    modified, n_max, r_cut, clips,
):  # pragma: no cover - exercised via potential_batch
    d = x.shape[0]
    nb = band_ptr.shape[0] - 1
    tot = 0.0
    for b in range(nb):
        if modified and b > n_max:
            continue
        k0 = cellkey_ptr[b]
        k1 = cellkey_ptr[b + 1]
        if k0 == k1:
            continue
        s = cell_size[b]
        bandsum = 0.0
        ncomb = 3 ** d
        for flat in range(ncomb):
            key = np.int64(0)
            rem = flat
            ok = True
            for i in range(d):
                off = rem % 3 - 1
                rem //= 3
                c = np.int64(np.floor((x[i] - origin[b, i]) / s)) + off
                if c < 0 or c >= ncells[b, i]:
                    ok = False
                    break
                key += c * strides[b, i]
            if not ok:
                continue
            jlo = np.searchsorted(cellkeys[k0:k1], key)
            if jlo >= k1 - k0 or cellkeys[k0 + jlo] != key:
                continue
            t0 = cell_start[k0 + jlo]
            t1 = cell_end[k0 + jlo]
            for t in range(t0, t1):
                r = radii[t]
                if r > r_cut:
                    continue
                dd = 0.0
                for i in range(d):
                    delta = x[i] - centers[t, i]
                    dd += delta * delta
                if dd <= r * r:
                    bandsum += contrib[t]
        if modified and bandsum > clips[b]:
            bandsum = clips[b]
        tot += bandsum
    return tot


@njit(cache=True)
def _potential_kernel(
    X, centers, radii, contrib,
    band_ptr, cell_size, origin, ncells, strides,
    cellkeys, cellkey_ptr, cell_start, cell_end,
    modified, n_max, r_cut, clips, out,
):  # pragma: no cover - exercised via potential_batch
    for q in range(X.shape[0]):
        out[q] = _potential_at(
            X[q], centers, radii, contrib,
            band_ptr, cell_size, origin, ncells, strides,
            cellkeys, cellkey_ptr, cell_start, cell_end,
            modified, n_max, r_cut, clips,
        )


class PotentialEvaluator:
    """Fast batched potential evaluation bound to one (field, spec) pair."""

    def __init__(self, field: TrapField, spec: PotentialSpec):
        self.field = field
        self.spec = spec
        modified, n_max, r_cut, clips = _mode_constants(field, spec)
        self._args = (
            field.centers, field.radii, field.radii ** -field.params.gamma,
            field.index.band_ptr, field.index.cell_size, field.index.origin,
            field.index.ncells, field.index.strides,
            field.index.cellkeys, field.index.cellkey_ptr,
            field.index.cell_start, field.index.cell_end,
            modified, n_max, r_cut, clips,
        )

    def __call__(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        _potential_kernel(np.ascontiguousarray(X), *self._args, out)
        return out


def potential_batch(field: TrapField, spec: PotentialSpec, X: np.ndarray) -> np.ndarray:
    return PotentialEvaluator(field, spec)(X)


# ---------------------------------------------------------------------------
# serialization (line-delimited text)


def save_field(field: TrapField, path) -> None:
    header = {
        "format_version": FIELD_FORMAT_VERSION,
        "d": field.params.d,
        "alpha": field.params.alpha,
        "gamma": field.params.gamma,
        "lambda": field.params.lam,
        "window_lo": [float(v) for v in field.window_lo],
        "window_hi": [float(v) for v in field.window_hi],
        "r_max": field.r_max,
        "seed": field.seed,
        "n_traps": field.n_traps,
        "expected_excess": field.expected_excess,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for i in range(field.n_traps):
            coords = " ".join(repr(float(c)) for c in field.centers[i])
            fh.write(f"{coords} {float(field.radii[i])!r}\n")


def load_field(path) -> TrapField:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header["format_version"] != FIELD_FORMAT_VERSION:
            raise ValidationError(
                f"unsupported field format version {header['format_version']}"
            )
        d = header["d"]
        rows = [[float(v) for v in line.split()] for line in fh if line.strip()]
    params = ModelParams(
        d=d, alpha=header["alpha"], gamma=header["gamma"], lam=header["lambda"]
    )
    data = np.array(rows) if rows else np.empty((0, d + 1))
    centers, radii = data[:, :d], data[:, d]
    r_max = header["r_max"]
    per_band: list[tuple[np.ndarray, np.ndarray]] = []
    bands = np.floor(np.log2(radii)).astype(np.int64) if rows else np.empty(0, np.int64)
    for b in range(_n_bands(r_max)):
        sel = bands == b
        per_band.append((centers[sel], radii[sel]))
    fld = _assemble(
        params,
        np.array(header["window_lo"], float),
        np.array(header["window_hi"], float),
        r_max,
        header["seed"],
        per_band,
    )
    object.__setattr__(fld, "expected_excess", header["expected_excess"])
    return fld
