"""Rendering contract: round-trips against real simulator outputs."""

import hashlib
import json
from pathlib import Path

import pytest

from trapmc_reports import (
    EmptyInput,
    ReportError,
    ReportSpec,
    VersionMismatch,
    render_report,
)
from trapmc_reports.cli import main as cli_main


def full_spec(artifacts, out_dir, **overrides):
    kwargs = dict(out_dir=str(out_dir), **{k: str(v) for k, v in artifacts.items()})
    kwargs.update(overrides)
    return ReportSpec(**kwargs)


def test_full_report_renders_every_figure(artifacts, tmp_path):
    written = render_report(full_spec(artifacts, tmp_path / "out"))
    names = {p.name for p in written}
    assert names == {"fluct.png", "mu.png", "alpha.png", "bands.png", "index.html"}
    for p in written:
        assert p.stat().st_size > 0


def test_figure_subset_respected(artifacts, tmp_path):
    spec = full_spec(artifacts, tmp_path / "out", figures=("mu",))
    names = {p.name for p in render_report(spec)}
    assert names == {"mu.png", "index.html"}


def test_slopes_match_fit_output_to_4_decimals(artifacts, tmp_path):
    # slopes on the figure are read from the fit JSON, never refit
    spec = full_spec(artifacts, tmp_path / "out", image_format="svg")
    written = render_report(spec)
    fit = json.loads(Path(artifacts["fit_json"]).read_text())
    label = f"slope = {fit['slope']:.4f}"
    svg = next(p for p in written if p.name == "fluct.svg").read_text()
    assert label in svg
    index = next(p for p in written if p.name == "index.html").read_text()
    assert f"{fit['slope']:.4f}" in index


def test_bounds_overlay_comes_from_bounds_file(artifacts, tmp_path):
    spec = full_spec(artifacts, tmp_path / "out", image_format="svg")
    written = render_report(spec)
    bounds = json.loads(Path(artifacts["bounds_json"]).read_text())
    svg = next(p for p in written if p.name == "fluct.svg").read_text()
    assert f"reference slope = {bounds['xi_tilde']:.4f}" in svg


def test_empty_csv_is_an_error_and_writes_nothing(artifacts, tmp_path):
    empty = tmp_path / "empty.csv"
    header = Path(artifacts["sweep_csv"]).read_text().splitlines()[:2]
    empty.write_text("\n".join(header) + "\n")
    out = tmp_path / "out"
    spec = ReportSpec(out_dir=str(out), sweep_csv=str(empty),
                      fit_json=str(artifacts["fit_json"]))
    with pytest.raises(EmptyInput):
        render_report(spec)
    assert not out.exists()


def test_version_mismatch_is_an_error_and_writes_nothing(artifacts, tmp_path):
    fit = json.loads(Path(artifacts["fit_json"]).read_text())
    fit["format_version"] = 2
    bad = tmp_path / "fit_v2.json"
    bad.write_text(json.dumps(fit))
    out = tmp_path / "out"
    spec = full_spec(artifacts, out, fit_json=str(bad))
    with pytest.raises(VersionMismatch):
        render_report(spec)
    assert not out.exists()


def test_unsupported_version_rejected_even_when_consistent(artifacts, tmp_path):
    fit = json.loads(Path(artifacts["fit_json"]).read_text())
    fit["format_version"] = 99
    bad = tmp_path / "fit_v99.json"
    bad.write_text(json.dumps(fit))
    spec = ReportSpec(out_dir=str(tmp_path / "out"), fit_json=str(bad),
                      figures=())
    with pytest.raises(ReportError):
        render_report(spec)


def test_requested_figure_without_its_input(artifacts, tmp_path):
    spec = ReportSpec(out_dir=str(tmp_path / "out"),
                      sweep_csv=str(artifacts["sweep_csv"]),
                      fit_json=str(artifacts["fit_json"]),
                      figures=("bands",))
    with pytest.raises(ReportError, match="band_json"):
        render_report(spec)


def test_unknown_figure_name(tmp_path):
    with pytest.raises(ReportError, match="unknown figures"):
        ReportSpec(out_dir=str(tmp_path), figures=("volcano",))


def test_bad_image_format(tmp_path):
    with pytest.raises(ReportError):
        ReportSpec(out_dir=str(tmp_path), image_format="gif")


def test_no_inputs_at_all(tmp_path):
    with pytest.raises(ReportError, match="nothing to render"):
        render_report(ReportSpec(out_dir=str(tmp_path / "out")))


def test_overlay_parameter_mismatch(artifacts, tmp_path):
    spec = full_spec(artifacts, tmp_path / "out", alpha=9.9)
    with pytest.raises(ReportError, match="alpha"):
        render_report(spec)


def test_overlay_parameters_accepted_when_matching(artifacts, tmp_path):
    spec = full_spec(artifacts, tmp_path / "out",
                     alpha=2.2, gamma=0.2, d=2, xi=0.75)
    assert render_report(spec)


def test_rendering_is_deterministic(artifacts, tmp_path):
    digests = []
    for sub in ("a", "b"):
        written = render_report(full_spec(artifacts, tmp_path / sub))
        digests.append({
            p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in written
        })
    assert digests[0] == digests[1]


def test_inputs_are_never_mutated(artifacts, tmp_path):
    before = {
        k: hashlib.sha256(Path(v).read_bytes()).hexdigest()
        for k, v in artifacts.items()
    }
    render_report(full_spec(artifacts, tmp_path / "out"))
    after = {
        k: hashlib.sha256(Path(v).read_bytes()).hexdigest()
        for k, v in artifacts.items()
    }
    assert before == after


def test_cli_success(artifacts, tmp_path, capsys):
    out = tmp_path / "out"
    with pytest.raises(SystemExit) as exc:
        cli_main([
            "--out-dir", str(out),
            "--sweep-csv", str(artifacts["sweep_csv"]),
            "--fit-json", str(artifacts["fit_json"]),
            "--bounds-json", str(artifacts["bounds_json"]),
        ])
    assert exc.value.code == 0
    listed = capsys.readouterr().out.strip().splitlines()
    assert str(out / "index.html") in listed
    assert (out / "fluct.png").exists()


def test_cli_error_exit_code(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli_main(["--out-dir", str(tmp_path / "out"),
                  "--fit-json", str(tmp_path / "missing.json")])
    assert exc.value.code == 1
    assert "error:" in capsys.readouterr().err
