"""Report files: metric tables, time-series CSVs, log-scatter sets, manifest."""
import json

import numpy as np
import pytest

from helpers import T0, make_series
from qpe_merge.errors import DataError
from qpe_merge.folds import make_folds
from qpe_merge.metrics import MetricsReport, evaluate_all
from qpe_merge.report import (emit_log_scatter, emit_metrics_table, emit_timeseries,
                              file_sha256, fold_phase_columns, product_order,
                              write_manifest)


def report_for(station, product, values, obs, threshold=0.1):
    return evaluate_all(make_series(values, station=station, product=product),
                        make_series(obs, station=station, product="gauge"), threshold)


def test_metrics_table_perfect_product(tmp_path):
    values = np.array([0.0, 0.5, 0.0, 2.0, 1.0])
    r = report_for("ANT", "merged", values, values)
    emit_metrics_table([r], tmp_path / "m.csv", tmp_path / "m.txt")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "station,metric,Merged"
    assert lines[1] == "ANT,CC,1.000"
    assert lines[2] == "ANT,RMSE,0.000"
    assert lines[3] == "ANT,RB (%),0.000"
    assert lines[4] == "ANT,POD,1.000"
    assert lines[5] == "ANT,FAR,0.000"


def test_metrics_table_renders_undefined_cells(tmp_path):
    obs = np.array([0.0, 1.0, 2.0, 0.0, 0.5, 0.3])
    r = report_for("ANT", "merged", np.zeros(6), obs)
    assert "far" in r.undefined
    emit_metrics_table([r], tmp_path / "m.csv", tmp_path / "m.txt")
    csv_text = (tmp_path / "m.csv").read_text()
    assert "ANT,FAR,undef" in csv_text
    assert "ANT,CC,undef" in csv_text
    assert "undef" in (tmp_path / "m.txt").read_text()


def test_metrics_table_block_layout_two_stations_four_products(tmp_path):
    rng = np.random.default_rng(40)
    reports = []
    for station in ("ANT", "GOL"):
        obs = rng.gamma(1.0, 1.5, 50)
        for product in ("merged", "mrms", "imerg_e", "stage4"):
            reports.append(report_for(station, product, rng.gamma(1.0, 1.5, 50), obs))
    emit_metrics_table(reports, tmp_path / "m.csv", tmp_path / "m.txt")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "station,metric,Merged,MRMS,IMERG,StageIV"
    assert len(lines) == 1 + 2 * 5
    assert all(len(line.split(",")) == 6 for line in lines[1:])
    text = (tmp_path / "m.txt").read_text()
    assert text.count("Metric") == 2  # one aligned block per station


def test_metrics_table_requires_reports(tmp_path):
    with pytest.raises(DataError, match="no reports"):
        emit_metrics_table([], tmp_path / "m.csv", tmp_path / "m.txt")


def test_product_order_is_canonical_then_sorted():
    assert product_order({"stage4", "zeta", "merged", "alpha", "imerg_e"}) == \
        ["merged", "imerg_e", "stage4", "alpha", "zeta"]


def fold_fixture(n, k, seq_len):
    return make_folds(n, k, min_block=seq_len), seq_len


def test_fold_phase_columns_full_period():
    folds, seq_len = fold_fixture(1535, 3, 12)
    fold_col, phase_col = fold_phase_columns(1535, folds, seq_len)
    assert list(np.unique(fold_col)) == [0, 1, 2]
    # the phase flips exactly at the fold boundaries
    assert phase_col[511] == "validation" and phase_col[512] == "warmup"
    assert phase_col[1023] == "validation" and phase_col[1024] == "warmup"
    assert phase_col[0] == "warmup" and phase_col[11] == "validation"
    assert (fold_col[512:1024] == 1).all()


def test_fold_phase_columns_require_full_cover():
    folds, _ = fold_fixture(30, 3, 4)
    with pytest.raises(DataError, match="do not cover"):
        fold_phase_columns(40, folds, 4)


def timeseries_fixture(n=10, seq_len=3, k=2):
    rng = np.random.default_rng(41)
    gauge = make_series(rng.uniform(0, 4, n), product="gauge")
    products = [make_series(rng.uniform(0, 4, n), product=p) for p in ("imerg_e", "stage4")]
    folds = make_folds(n, k, min_block=seq_len)
    missing = np.zeros(n, dtype=bool)
    for f in folds:
        a, _ = f.test_range
        missing[a:a + seq_len - 1] = True
    merged = make_series(np.where(missing, 0, rng.uniform(0, 4, n)),
                         missing=missing, product="merged")
    return gauge, products, merged, folds, seq_len


def test_timeseries_layout_and_missing_rendering(tmp_path):
    gauge, products, merged, folds, seq_len = timeseries_fixture()
    path = tmp_path / "ts.csv"
    emit_timeseries(path, gauge, products, merged, folds, seq_len)
    lines = path.read_text().splitlines()
    assert lines[0] == "timestamp,gauge,imerg_e,stage4,merged,fold,phase"
    assert len(lines) == 11
    assert all(len(line.split(",")) == 7 for line in lines[1:])
    # warm-up rows carry NA in the merged column and the warmup phase label
    first = lines[1].split(",")
    assert first[4] == "NA" and first[6] == "warmup"
    assert lines[1].startswith("2017-01-01T00:00:00Z,")


def test_timeseries_roundtrip_exact_values(tmp_path):
    gauge, products, merged, folds, seq_len = timeseries_fixture(n=40, seq_len=4, k=2)
    path = tmp_path / "ts.csv"
    emit_timeseries(path, gauge, products, merged, folds, seq_len)
    rows = [line.split(",") for line in path.read_text().splitlines()[1:]]
    for col, series in zip(range(1, 5), [gauge, *products, merged]):
        for i, row in enumerate(rows):
            if series.missing[i]:
                assert row[col] == "NA"
            else:
                assert float(row[col]) == series.values[i]


def test_timeseries_rejects_misaligned_series(tmp_path):
    gauge, products, merged, folds, seq_len = timeseries_fixture()
    short = make_series(np.zeros(5), product="imerg_e")
    with pytest.raises(DataError, match="not aligned"):
        emit_timeseries(tmp_path / "x.csv", gauge, [short], merged, folds, seq_len)


def scatter_pair(p_vals, o_vals):
    p = make_series(np.asarray(p_vals, dtype=float), product="merged")
    o = make_series(np.asarray(o_vals, dtype=float), product="gauge")
    return p, o


def test_scatter_keeps_in_range_point(tmp_path):
    p, o = scatter_pair([10.0], [10.0])
    count = emit_log_scatter(tmp_path / "s.csv", p, o)
    assert count == 1
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines == ["log10_obs,log10_pred", "1.0,1.0"]


def test_scatter_drops_out_of_range_and_zero_points(tmp_path):
    p, o = scatter_pair([0.001, 0.0, 5.0], [1.0, 2.0, 0.0])
    assert emit_log_scatter(tmp_path / "s.csv", p, o) == 0


def test_scatter_inclusive_boundary(tmp_path):
    p, o = scatter_pair([1.0, 0.01, 100.0], [100.0, 0.01, 1.0])
    count = emit_log_scatter(tmp_path / "s.csv", p, o)
    assert count == 3
    body = (tmp_path / "s.csv").read_text().splitlines()[1:]
    assert body[0] == "2.0,0.0"
    assert body[1] == "-2.0,-2.0"


def test_scatter_never_emits_out_of_range_coordinates(tmp_path):
    rng = np.random.default_rng(42)
    values = rng.lognormal(0, 2.5, 400)
    obs = rng.lognormal(0, 2.5, 400)
    p, o = scatter_pair(values, obs)
    emit_log_scatter(tmp_path / "s.csv", p, o)
    for line in (tmp_path / "s.csv").read_text().splitlines()[1:]:
        x, y = map(float, line.split(","))
        assert -2.0 <= x <= 2.0 and -2.0 <= y <= 2.0


def test_scatter_skips_missing_positions(tmp_path):
    p = make_series([10.0, 10.0], missing=[False, True], product="merged")
    o = make_series([10.0, 10.0], product="gauge")
    assert emit_log_scatter(tmp_path / "s.csv", p, o) == 1


def test_file_sha256_known_value(tmp_path):
    path = tmp_path / "x"
    path.write_bytes(b"abc")
    assert file_sha256(path) == \
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def test_manifest_is_sorted_and_stable(tmp_path):
    manifest = {"b": 1, "a": {"z": [3, 2], "y": 0.5}}
    p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
    write_manifest(p1, manifest)
    write_manifest(p2, {"a": {"y": 0.5, "z": [3, 2]}, "b": 1})
    assert p1.read_bytes() == p2.read_bytes()
    loaded = json.loads(p1.read_text())
    assert loaded["a"]["z"] == [3, 2]
    keys = list(json.loads(p1.read_text(), object_pairs_hook=lambda kv: kv))
    assert keys == sorted(keys)
