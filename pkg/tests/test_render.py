"""SVG rendering of emitted timeseries and scatter CSV files."""
import pytest

from qpe_merge.config import load_config
from qpe_merge.errors import DataError
from qpe_merge.pipeline import run_pipeline
from qpe_merge.render import render_run, render_scatter, render_timeseries
from workspace import mini_workspace


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("render_run")
    cfg = load_config(mini_workspace(tmp))
    run_pipeline(cfg)
    return cfg.out_dir


def test_render_run_covers_every_csv(run_dir):
    written = render_run(run_dir)
    names = sorted(p.name for p in written)
    assert "timeseries_ANT.svg" in names
    for product in ("merged", "imerg_e", "stage4"):
        assert f"scatter_ANT_{product}_validation.svg" in names
        assert f"scatter_ANT_{product}_all.svg" in names
    assert len(names) == 7
    for p in written:
        text = p.read_text(encoding="utf-8")
        assert text.startswith("<svg") and text.rstrip().endswith("</svg>")


def test_render_is_deterministic(run_dir, tmp_path):
    first = render_run(run_dir, tmp_path / "a")
    second = render_run(run_dir, tmp_path / "b")
    for pa, pb in zip(first, second):
        assert pa.read_bytes() == pb.read_bytes()


def test_timeseries_svg_shows_series_and_fold_bands(run_dir, tmp_path):
    svg = tmp_path / "ts.svg"
    render_timeseries(run_dir / "timeseries" / "ANT.csv", svg)
    text = svg.read_text(encoding="utf-8")
    assert text.count("<polyline") >= 4  # gauge, two products, merged
    for label in ("Gauge", "IMERG", "StageIV", "Merged", "mm/h"):
        assert label in text
    assert "#e0d4d4" in text  # warm-up shading


def test_scatter_svg_draws_points_and_diagonal(run_dir, tmp_path):
    csv = tmp_path / "pts.csv"
    csv.write_text("log10_obs,log10_pred\n0.0,0.0\n1.0,-1.0\n", encoding="utf-8")
    svg = tmp_path / "pts.svg"
    render_scatter(csv, svg)
    text = svg.read_text(encoding="utf-8")
    assert text.count("<circle") == 2
    assert "<line" in text  # 1:1 reference diagonal


def test_scatter_with_no_points_still_renders(tmp_path):
    csv = tmp_path / "empty.csv"
    csv.write_text("log10_obs,log10_pred\n", encoding="utf-8")
    svg = tmp_path / "empty.svg"
    render_scatter(csv, svg)
    text = svg.read_text(encoding="utf-8")
    assert text.startswith("<svg") and "<circle" not in text


def test_malformed_csv_is_rejected(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n", encoding="utf-8")
    with pytest.raises(DataError):
        render_scatter(bad, tmp_path / "out.svg")
    with pytest.raises(DataError):
        render_timeseries(bad, tmp_path / "out2.svg")
    with pytest.raises(DataError):
        render_run(tmp_path / "not_a_run")
