"""Figure rendering and the HTML index.

Every figure is drawn into memory first and only written once all inputs have
parsed and all figures have rendered, so a failing report leaves no partial
output behind. Rendering is deterministic: fixed style, fixed SVG hash salt,
no embedded dates.
"""

from __future__ import annotations

import html
import io as _io
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .readers import (  # noqa: E402
    ReportError,
    SweepData,
    check_versions,
    read_stamped_json,
    read_sweep_csv,
)

ALL_FIGURES = ("fluct", "mu", "alpha", "bands")

_STYLE = {
    "figure.figsize": (6.4, 4.4),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "trapmc-reports",
}


@dataclass
class ReportSpec:
    """What to read, what to draw, and where to put it."""

    out_dir: str
    sweep_csv: str | None = None
    fit_json: str | None = None
    bounds_json: str | None = None
    alpha_json: str | None = None
    band_json: str | None = None
    figures: tuple = ()           # empty = every figure whose inputs are present
    image_format: str = "png"
    # overlay parameters, cross-checked against the bounds file when both given
    alpha: float | None = None
    gamma: float | None = None
    d: int | None = None
    xi: float | None = None

    def __post_init__(self):
        if self.image_format not in ("png", "svg"):
            raise ReportError(f"image_format must be png or svg, got "
                              f"{self.image_format!r}")
        unknown = [f for f in self.figures if f not in ALL_FIGURES]
        if unknown:
            raise ReportError(f"unknown figures: {', '.join(unknown)}")


_NEEDS = {
    "fluct": ("sweep_csv", "fit_json"),
    "mu": ("sweep_csv",),
    "alpha": ("alpha_json",),
    "bands": ("band_json",),
}


def _figure_list(spec: ReportSpec) -> list:
    if spec.figures:
        for fig in spec.figures:
            missing = [k for k in _NEEDS[fig] if getattr(spec, k) is None]
            if missing:
                raise ReportError(
                    f"figure {fig!r} requires inputs: {', '.join(missing)}"
                )
        return list(spec.figures)
    figs = [
        f for f in ALL_FIGURES
        if all(getattr(spec, k) is not None for k in _NEEDS[f])
    ]
    if not figs:
        raise ReportError("no inputs given; nothing to render")
    return figs


def _check_overlay_params(spec: ReportSpec, bounds: dict) -> None:
    for name in ("alpha", "gamma", "d", "xi"):
        want = getattr(spec, name)
        if want is not None and name in bounds and float(bounds[name]) != float(want):
            raise ReportError(
                f"overlay parameter {name}={want} disagrees with the bounds "
                f"file ({bounds[name]})"
            )


def _save(fig, fmt: str) -> bytes:
    buf = _io.BytesIO()
    meta = {"Date": None} if fmt == "svg" else None
    fig.savefig(buf, format=fmt, metadata=meta)
    plt.close(fig)
    return buf.getvalue()


def _fig_fluct(sweep: SweepData, fit: dict, bounds: dict | None, fmt: str) -> bytes:
    fig, ax = plt.subplots()
    Ls = [row["L"] for row in sweep.ok_rows() if row["q90"] > 0]
    qs = [row["q90"] for row in sweep.ok_rows() if row["q90"] > 0]
    ax.loglog(Ls, qs, "o", ms=4, alpha=0.6, label="replicas (q90)")
    grid = np.geomspace(min(Ls), max(Ls), 50)
    slope, intercept = fit["slope"], fit["intercept"]
    ax.loglog(grid, np.exp(intercept) * grid**slope, "-",
              label=f"fit: slope = {slope:.4f}")
    if bounds is not None and "xi_tilde" in bounds:
        xt = float(bounds["xi_tilde"])
        anchor = np.exp(intercept) * grid[0] ** slope
        ax.loglog(grid, anchor * (grid / grid[0]) ** xt, "--",
                  label=f"reference slope = {xt:.4f}")
    ax.set_xlabel("L")
    ax.set_ylabel("transversal fluctuation q90")
    ax.set_title("Fluctuation growth")
    ax.legend()
    return _save(fig, fmt)


def _fig_mu(sweep: SweepData, fmt: str) -> bytes:
    fig, ax = plt.subplots()
    for L in sweep.L_values():
        rows = sweep.ok_rows(L)
        if not rows:
            continue
        xis = sorted(rows[0]["mu_A"])
        means = [float(np.mean([r["mu_A"][xi] for r in rows])) for xi in xis]
        ax.plot(xis, means, "o-", label=f"L = {L:g}")
    ax.set_xlabel(r"$\xi$")
    ax.set_ylabel(r"$\mu(A^\xi)$")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("Tube confinement probability")
    ax.legend()
    return _save(fig, fmt)


def _fig_alpha(curve: dict, fmt: str) -> bytes:
    fig, ax = plt.subplots()
    pts = curve["points"]
    rs = [p["r"] for p in pts]
    ys = [p["mean_neg_logZ"] for p in pts]
    es = [p["stderr"] for p in pts]
    ax.errorbar(rs, ys, yerr=es, fmt="o-", capsize=3)
    ax.set_xlabel("r")
    ax.set_ylabel(r"$-\,\mathrm{mean}\ \log \bar Z(0, y_r)$")
    ax.set_title(r"Point-to-point cost $\alpha(r)$")
    return _save(fig, fmt)


def _fig_bands(band: dict, fmt: str) -> bytes:
    fig, ax = plt.subplots()
    deltas = band["deltas"]
    ax.hist(deltas, bins=max(5, len(deltas) // 2), alpha=0.7)
    ax.axvline(band["median_delta"], color="C1",
               label=f"median = {band['median_delta']:.4f}")
    ax.axvline(band["reference_scale"], color="C3", linestyle="--",
               label=f"$L^\\chi$ = {band['reference_scale']:.2f} "
                     f"($\\chi$ = {band['chi']:.4f})")
    ax.set_xlabel(r"$|\Delta \log \bar Z|$")
    ax.set_ylabel("count")
    ax.set_title(f"Band {band['band']} resampling increments")
    ax.legend()
    return _save(fig, fmt)


_CAPTIONS = {
    "fluct": "Per-replica weighted 0.9-quantile of the transversal "
             "fluctuation against L (log-log), with the fitted power law.",
    "mu": "Probability that the path stays inside the tube of width "
          "L^xi, per length L.",
    "alpha": "Point-to-point cost curve with across-replica standard errors.",
    "bands": "Distribution of |change in log Zbar| when one dyadic radius "
             "band of the disorder is redrawn.",
}


def _index_html(figures: dict, fit: dict | None, bounds: dict | None,
                stamped: dict, fmt: str) -> str:
    rows = []
    if fit is not None:
        rows.append(
            f"<tr><td>fitted exponent ({html.escape(str(fit['observable']))})"
            f"</td><td>{fit['slope']:.4f}</td></tr>"
        )
        rows.append(f"<tr><td>fit stderr</td><td>{fit['stderr']:.4f}</td></tr>")
        rows.append(f"<tr><td>fit r&sup2;</td><td>{fit['r_squared']:.4f}</td></tr>")
    if bounds is not None:
        for key in ("xi_tilde", "xi_lower", "chi", "xi_bar", "corollary_value"):
            if bounds.get(key) is not None:
                rows.append(f"<tr><td>{key}</td><td>{bounds[key]:.4f}</td></tr>")
    table = (
        "<table>" + "".join(rows) + "</table>" if rows else ""
    )
    sections = "\n".join(
        f'<section><h2>{name}</h2><img src="{name}.{fmt}" alt="{name}">'
        f"<p>{_CAPTIONS[name]}</p></section>"
        for name in figures
    )
    versions = ", ".join(
        f"{html.escape(k)}: v{v}" for k, v in sorted(stamped.items())
    )
    return f"""<!DOCTYPE html>
<html lang="en">
<head><meta charset="utf-8"><title>trapmc report</title>
<style>
body {{ font-family: sans-serif; max-width: 56rem; margin: 2rem auto; }}
img {{ max-width: 100%; border: 1px solid #ccc; }}
table {{ border-collapse: collapse; }}
td {{ border: 1px solid #ccc; padding: 0.3rem 0.8rem; }}
</style></head>
<body>
<h1>trapmc report</h1>
<p>Input formats: {versions}</p>
{table}
{sections}
</body>
</html>
"""


def render_report(spec: ReportSpec) -> set:
    """Render the requested figures plus index.html; returns written paths.

    Reads only; writes nothing until every input has parsed and every figure
    has rendered.
    """
    figures = _figure_list(spec)
    stamped: dict = {}
    sweep = fit = bounds = curve = band = None
    if spec.sweep_csv is not None:
        sweep = read_sweep_csv(spec.sweep_csv)
        stamped["sweep_csv"] = sweep.format_version
    if spec.fit_json is not None:
        fit = read_stamped_json(spec.fit_json, "fit",
                                required=("slope", "intercept", "observable"))
        stamped["fit_json"] = fit["format_version"]
    if spec.bounds_json is not None:
        bounds = read_stamped_json(spec.bounds_json, "bounds",
                                   required=("xi_tilde", "chi"))
        stamped["bounds_json"] = bounds["format_version"]
        _check_overlay_params(spec, bounds)
    if spec.alpha_json is not None:
        curve = read_stamped_json(spec.alpha_json, "alpha-curve",
                                  required=("points",))
        stamped["alpha_json"] = curve["format_version"]
        if not curve["points"]:
            raise ReportError(f"{spec.alpha_json} contains no points")
    if spec.band_json is not None:
        band = read_stamped_json(spec.band_json, "band-resample",
                                 required=("deltas", "median_delta", "chi"))
        stamped["band_json"] = band["format_version"]
    check_versions(stamped)

    fmt = spec.image_format
    with plt.rc_context(_STYLE):
        blobs: dict = {}
        for name in figures:
            if name == "fluct":
                blobs[name] = _fig_fluct(sweep, fit, bounds, fmt)
            elif name == "mu":
                blobs[name] = _fig_mu(sweep, fmt)
            elif name == "alpha":
                blobs[name] = _fig_alpha(curve, fmt)
            elif name == "bands":
                blobs[name] = _fig_bands(band, fmt)
    index = _index_html(blobs, fit, bounds, stamped, fmt)

    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = set()
    for name, blob in blobs.items():
        path = out / f"{name}.{fmt}"
        path.write_bytes(blob)
        written.add(path)
    index_path = out / "index.html"
    index_path.write_text(index)
    written.add(index_path)
    return written
