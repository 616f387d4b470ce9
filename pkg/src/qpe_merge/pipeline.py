"""Full-run orchestration: ingest, fold, train, predict, stitch, evaluate, report.

Station-by-fold training jobs are independent; they can run in a process
pool and are always reduced in (station, fold) order with per-job derived
seeds, so the emitted tree is byte-identical regardless of job count or
completion order.
"""
from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .errors import ConfigError, DataError, QpeMergeError
from .folds import FoldSpec, assert_no_leakage, make_folds, stitch_validation, window_anchors
from .ingest import (aggregate_halfhourly_to_hourly, fill_missing_linear, gap_stats,
                     parse_canonical, write_canonical)
from .lstm import LstmParams, Scaler, TrainConfig, fit_scaler, predict_series, save_params, train
from .metrics import evaluate_all
from .report import (emit_log_scatter, emit_metrics_table, emit_timeseries, file_sha256,
                     write_manifest)
from .series import GAUGE, AlignedDataset, HourlySeries, StationMeta, align
from .version import __version__

log = logging.getLogger(__name__)

INCOMPLETE_MARKER = "INCOMPLETE"


@dataclass(frozen=True)
class StationData:
    """Everything ingested for one station, aligned onto a common timeline."""

    meta: StationMeta
    dataset: AlignedDataset        # all non-target products as columns
    model_dataset: AlignedDataset  # feature columns only
    products: tuple                # column order of ``dataset``
    gaps: dict                     # product -> pre-fill gap statistics
    checksums: dict                # product -> {path, sha256}


@dataclass(frozen=True)
class TaskSpec:
    """One (station, fold) training job; picklable for the worker pool."""

    station_id: str
    station_index: int
    fold: FoldSpec
    dataset: AlignedDataset
    train_config: TrainConfig
    global_seed: int


@dataclass(frozen=True)
class FoldResult:
    station_id: str
    fold_index: int
    seed: int
    params: LstmParams
    scaler: Scaler
    history: dict
    prediction: HourlySeries


def derived_seed(global_seed: int, station_index: int, fold_index: int) -> int:
    """Per-(station, fold) seed from the global seed.

    Entropy mixing keeps distinct index pairs from colliding the way a
    plain XOR of the three integers would (1 ^ 0 == 0 ^ 1).
    """
    ss = np.random.SeedSequence([int(global_seed), int(station_index), int(fold_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def load_station(cfg: RunConfig, meta: StationMeta) -> StationData:
    """Parse, aggregate, gap-fill, and align every input for one station."""
    files = cfg.inputs[meta.id]
    products = cfg.products_for(meta.id)
    hourly = {}
    gaps = {}
    checksums = {}
    for product in [*products, cfg.target]:
        path = Path(files[product])
        if not path.is_file():
            raise DataError(f"station {meta.id}, product {product}: "
                            f"input file {path} does not exist")
        raw = parse_canonical(path)
        if raw.station_id != meta.id:
            raise DataError(f"{path}: header station {raw.station_id!r} does not match "
                            f"configured station {meta.id!r}")
        if raw.product != product:
            raise DataError(f"{path}: header product {raw.product!r} does not match "
                            f"configured product {product!r}")
        series = aggregate_halfhourly_to_hourly(raw) if raw.step_minutes == 30 else raw.as_hourly()
        gaps[product] = gap_stats(series)
        hourly[product] = fill_missing_linear(series)
        checksums[product] = {"path": str(path), "sha256": file_sha256(path)}
    ds = align([hourly[p] for p in products], hourly[cfg.target])
    log.info("station %s: %d aligned hours, products %s", meta.id, len(ds), ",".join(products))
    return StationData(meta=meta, dataset=ds, model_dataset=ds.select(cfg.features),
                       products=tuple(products), gaps=gaps, checksums=checksums)


def station_folds(cfg: RunConfig, data: StationData):
    return make_folds(len(data.dataset), cfg.folds, cfg.calibration_split,
                      min_block=cfg.train.seq_len)


def _train_predict_task(task: TaskSpec) -> FoldResult:
    """Worker body: fit scaler on calibration rows, train, predict the test block."""
    fold = task.fold
    try:
        seed = derived_seed(task.global_seed, task.station_index, fold.fold_index)
        cfg = dataclasses.replace(task.train_config, seed=seed)
        cal_rows = np.concatenate([np.arange(a, b) for a, b in fold.calibration_ranges])
        scaler = fit_scaler(task.dataset, cal_rows)
        train_anchors = window_anchors(fold.train_indices, fold.calibration_ranges, cfg.seq_len)
        val_anchors = window_anchors(fold.cal_val_indices, fold.calibration_ranges, cfg.seq_len)
        assert_no_leakage(train_anchors, cfg.seq_len, fold.test_range)
        assert_no_leakage(val_anchors, cfg.seq_len, fold.test_range)
        params, history = train(task.dataset, train_anchors, val_anchors, cfg, scaler=scaler)
        prediction = predict_series(task.dataset, fold.test_range, params, scaler, cfg.seq_len)
    except QpeMergeError as exc:
        raise type(exc)(f"station {task.station_id}, fold {fold.fold_index}: {exc}") from exc
    return FoldResult(task.station_id, fold.fold_index, seed, params, scaler,
                      history, prediction)


def _run_tasks(tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [_train_predict_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_train_predict_task, tasks))


def _station_reports(data: StationData, merged: HourlySeries, threshold: float):
    """Merged plus every comparison product, scored on identical positions."""
    ds = data.dataset
    gauge = HourlySeries(ds.station_id, GAUGE, ds.start, ds.target)
    reports = [evaluate_all(merged, gauge, threshold)]
    for product in data.products:
        series = HourlySeries(ds.station_id, product, ds.start, ds.column(product))
        reports.append(evaluate_all(series.mask_where(merged.missing), gauge, threshold))
    return gauge, reports


def prepare_out_dir(out_dir: Path, overwrite: bool) -> Path:
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not overwrite:
        raise ConfigError(f"output directory {out_dir} is not empty; "
                          f"pass --overwrite to replace its contents")
    for sub in ("", "params", "predictions", "timeseries", "scatter"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    return out_dir


def run_pipeline(cfg: RunConfig) -> dict:
    """Execute the full merging experiment; returns the manifest dict."""
    out = prepare_out_dir(cfg.out_dir, cfg.overwrite)
    marker = out / INCOMPLETE_MARKER
    marker.write_text("run in progress\n", encoding="utf-8")
    try:
        manifest = _run_pipeline_body(cfg, out)
    except Exception as exc:
        marker.write_text(f"run failed: {exc}\n", encoding="utf-8")
        raise
    marker.unlink()
    return manifest


def _run_pipeline_body(cfg: RunConfig, out: Path) -> dict:
    stations = [load_station(cfg, meta) for meta in cfg.stations]
    station_index = {st.meta.id: i for i, st in enumerate(stations)}

    tasks = []
    folds_by_station = {}
    for si, st in enumerate(stations):
        folds = station_folds(cfg, st)
        folds_by_station[st.meta.id] = folds
        for fold in folds:
            tasks.append(TaskSpec(st.meta.id, si, fold, st.model_dataset,
                                  cfg.train, cfg.seed))
    log.info("training %d station-fold jobs with %d worker(s)", len(tasks), cfg.jobs)
    results = _run_tasks(tasks, cfg.jobs)
    results.sort(key=lambda r: (station_index[r.station_id], r.fold_index))

    outputs = []

    def emitted(path: Path) -> Path:
        outputs.append(str(path.relative_to(out)))
        return path

    all_reports = []
    derived_seeds = {}
    metrics_block = {}
    scatter_points = {}
    station_summary = {}
    for st in stations:
        sid = st.meta.id
        folds = folds_by_station[sid]
        mine = [r for r in results if r.station_id == sid]
        for r in mine:
            derived_seeds[f"{sid}/fold{r.fold_index}"] = r.seed
            save_params(emitted(out / "params" / f"{sid}_fold{r.fold_index}.txt"),
                        r.params, cfg.train.seq_len, r.scaler)
        merged = stitch_validation([r.prediction for r in mine])
        if len(merged) != len(st.dataset) or merged.start != st.dataset.start:
            raise DataError(f"station {sid}: stitched predictions do not cover the timeline")
        write_canonical(emitted(out / "predictions" / f"{sid}.csv"), merged)

        gauge, reports = _station_reports(st, merged, cfg.threshold)
        all_reports.extend(reports)
        metrics_block[sid] = {
            r.product: {
                "n": r.n,
                "undefined": list(r.undefined),
                **{m: r.value(m) for m in ("cc", "rmse", "rb_percent", "pod", "far")},
            }
            for r in reports
        }

        product_series = [HourlySeries(sid, p, st.dataset.start, st.dataset.column(p))
                          for p in st.products]
        emit_timeseries(emitted(out / "timeseries" / f"{sid}.csv"),
                        gauge, product_series, merged, folds, cfg.train.seq_len)

        scatter_points[sid] = {}
        for series in [merged, *product_series]:
            validation = series.mask_where(merged.missing)
            for variant, view in (("validation", validation), ("all", series)):
                name = f"{sid}_{series.product}_{variant}.csv"
                count = emit_log_scatter(emitted(out / "scatter" / name), view, gauge)
                scatter_points[sid][name] = count

        station_summary[sid] = {
            "n_hours": len(st.dataset),
            "start": st.dataset.start.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "end": st.dataset.timestamp_at(len(st.dataset)).strftime("%Y-%m-%dT%H:%M:%SZ"),
            "products": list(st.products),
        }

    emit_metrics_table(all_reports, emitted(out / "metrics.csv"), emitted(out / "metrics.txt"))

    strict_failures = [f"{r.station_id}/{r.product}: {','.join(r.undefined)}"
                       for r in all_reports if r.undefined]
    if cfg.strict and strict_failures:
        raise DataError("undefined metrics under --strict: " + "; ".join(strict_failures))

    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "derived_seeds": derived_seeds,
        "config": cfg.snapshot(),
        "folds": {
            sid: [{
                "fold": f.fold_index,
                "test_range": list(f.test_range),
                "calibration_ranges": [list(r) for r in f.calibration_ranges],
                "n_train": int(f.train_indices.size),
                "n_cal_val": int(f.cal_val_indices.size),
            } for f in folds]
            for sid, folds in folds_by_station.items()
        },
        "inputs": {st.meta.id: st.checksums for st in stations},
        "gap_stats": {st.meta.id: st.gaps for st in stations},
        "stations": station_summary,
        "metrics": metrics_block,
        "scatter_points": scatter_points,
        "outputs": sorted(outputs),
    }
    write_manifest(out / "manifest.json", manifest)
    if strict_failures:
        log.warning("undefined metrics: %s", "; ".join(strict_failures))
    return manifest


def train_single(cfg: RunConfig, station_id: str, fold_index: int,
                 params_path=None) -> FoldResult:
    """Train one (station, fold) job exactly as the full run would."""
    meta = cfg.station(station_id)
    station_index = [s.id for s in cfg.stations].index(station_id)
    data = load_station(cfg, meta)
    folds = station_folds(cfg, data)
    if not 0 <= fold_index < len(folds):
        raise ConfigError(f"fold {fold_index} out of range for {len(folds)} folds")
    result = _train_predict_task(TaskSpec(station_id, station_index, folds[fold_index],
                                          data.model_dataset, cfg.train, cfg.seed))
    if params_path is not None:
        save_params(params_path, result.params, cfg.train.seq_len, result.scaler)
    return result


def evaluate_predictions(cfg: RunConfig, run_dir) -> list:
    """Recompute metric tables from previously emitted predictions."""
    run_dir = Path(run_dir)
    reports = []
    for meta in cfg.stations:
        data = load_station(cfg, meta)
        path = run_dir / "predictions" / f"{meta.id}.csv"
        if not path.is_file():
            raise DataError(f"station {meta.id}: no prediction file at {path}")
        merged = parse_canonical(path).as_hourly()
        if len(merged) != len(data.dataset) or merged.start != data.dataset.start:
            raise DataError(f"station {meta.id}: predictions at {path} do not match "
                            f"the configured input timeline")
        reports.extend(_station_reports(data, merged, cfg.threshold)[1])
    emit_metrics_table(reports, run_dir / "metrics.csv", run_dir / "metrics.txt")
    return reports


def ingest_check(cfg: RunConfig):
    """Validate every configured input file; no artifacts are written.

    Returns (summaries, problems): per-file stats for readable files and
    (path, message) pairs for rejected ones.
    """
    summaries = []
    problems = []
    for meta in cfg.stations:
        files = cfg.inputs[meta.id]
        for product in [*cfg.products_for(meta.id), cfg.target]:
            path = Path(files[product])
            try:
                if not path.is_file():
                    raise DataError(f"input file {path} does not exist")
                raw = parse_canonical(path)
                if raw.station_id != meta.id:
                    raise DataError(f"header station {raw.station_id!r} != configured "
                                    f"{meta.id!r}")
                if raw.product != product:
                    raise DataError(f"header product {raw.product!r} != configured "
                                    f"{product!r}")
                series = (aggregate_halfhourly_to_hourly(raw) if raw.step_minutes == 30
                          else raw.as_hourly())
                summaries.append({
                    "station": meta.id,
                    "product": product,
                    "path": str(path),
                    "step_minutes": raw.step_minutes,
                    "rows": len(raw),
                    "hours": len(series),
                    **gap_stats(series),
                })
            except QpeMergeError as exc:
                problems.append((str(path), str(exc)))
    return summaries, problems
