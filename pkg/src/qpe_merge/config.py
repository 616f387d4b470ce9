"""Run configuration: one YAML file drives the whole pipeline.

Scalar precedence is flags > config > defaults; the CLI applies flag
overrides after loading.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .errors import ConfigError
from .lstm import TrainConfig
from .series import DEFAULT_FEATURES, GAUGE, StationMeta


@dataclass(frozen=True)
class RunConfig:
    stations: tuple
    inputs: dict              # station id -> {product: Path}
    out_dir: Path
    features: tuple = DEFAULT_FEATURES
    target: str = GAUGE
    train: TrainConfig = field(default_factory=TrainConfig)
    folds: int = 3
    calibration_split: float = 0.7
    threshold: float = 0.1
    seed: int = 0
    jobs: int = 1
    overwrite: bool = False
    strict: bool = False

    def __post_init__(self) -> None:
        if not self.stations:
            raise ConfigError("config: at least one station is required")
        ids = [s.id for s in self.stations]
        if len(set(ids)) != len(ids):
            raise ConfigError("config: duplicate station ids")
        if self.folds < 2:
            raise ConfigError("config: folds must be >= 2")
        if not 0.0 < self.calibration_split <= 1.0:
            raise ConfigError("config: calibration_split must be in (0, 1]")
        if self.jobs < 1:
            raise ConfigError("config: jobs must be >= 1")
        if self.target in self.features:
            raise ConfigError(f"config: target {self.target!r} cannot also be a feature")
        for sid in ids:
            files = self.inputs.get(sid)
            if files is None:
                raise ConfigError(f"config: station {sid} has no input files")
            for product in (*self.features, self.target):
                if product not in files:
                    raise ConfigError(f"config: station {sid} is missing an input file "
                                      f"for product {product!r}")

    def station(self, station_id: str) -> StationMeta:
        for s in self.stations:
            if s.id == station_id:
                return s
        raise ConfigError(f"unknown station {station_id!r}")

    def products_for(self, station_id: str):
        """All non-target products supplied for a station (features first)."""
        files = self.inputs[station_id]
        rest = sorted(p for p in files if p != self.target and p not in self.features)
        return list(self.features) + rest

    def with_overrides(self, seed=None, threshold=None, jobs=None,
                       overwrite=None, strict=None, out_dir=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed), train=replace(cfg.train, seed=int(seed)))
        if threshold is not None:
            cfg = replace(cfg, threshold=float(threshold))
        if jobs is not None:
            cfg = replace(cfg, jobs=int(jobs))
        if overwrite is not None:
            cfg = replace(cfg, overwrite=bool(overwrite))
        if strict is not None:
            cfg = replace(cfg, strict=bool(strict))
        if out_dir is not None:
            cfg = replace(cfg, out_dir=Path(out_dir))
        return cfg

    def snapshot(self) -> dict:
        """JSON-safe view of everything that affects the outputs."""
        return {
            "features": list(self.features),
            "target": self.target,
            "folds": self.folds,
            "calibration_split": self.calibration_split,
            "threshold": self.threshold,
            "seed": self.seed,
            "train": {
                "hidden": self.train.hidden,
                "seq_len": self.train.seq_len,
                "learning_rate": self.train.learning_rate,
                "epochs": self.train.epochs,
                "batch_size": self.train.batch_size,
                "init_scale": self.train.effective_init_scale,
                "forget_bias_init": self.train.forget_bias_init,
                "beta1": self.train.beta1,
                "beta2": self.train.beta2,
                "eps_adam": self.train.eps_adam,
            },
            "stations": [
                {"id": s.id, "name": s.name, "elevation": s.elevation,
                 "elevation_unit": s.elevation_unit, "latitude": s.latitude,
                 "longitude": s.longitude, "nearby_city": s.nearby_city}
                for s in self.stations
            ],
        }


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"config: missing {key!r} in {where}")
    return mapping[key]


def load_config(path) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path}: top level must be a mapping")

    base = path.parent
    stations = []
    for entry in _require(raw, "stations", str(path)):
        try:
            stations.append(StationMeta(
                id=str(_require(entry, "id", "station entry")),
                name=str(entry.get("name", "")),
                elevation=float(entry.get("elevation", 0.0)),
                elevation_unit=str(entry.get("elevation_unit", "m")),
                latitude=float(_require(entry, "latitude", "station entry")),
                longitude=float(_require(entry, "longitude", "station entry")),
                nearby_city=str(entry.get("nearby_city", "")),
            ))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config {path}: bad station entry {entry!r}: {exc}") from exc

    inputs = {}
    for sid, files in _require(raw, "inputs", str(path)).items():
        if not isinstance(files, dict):
            raise ConfigError(f"config {path}: inputs for {sid} must map product -> path")
        inputs[str(sid)] = {str(prod): (base / str(p)).resolve() if not Path(str(p)).is_absolute()
                            else Path(str(p)) for prod, p in files.items()}

    train_raw = raw.get("train", {})
    if not isinstance(train_raw, dict):
        raise ConfigError(f"config {path}: 'train' must be a mapping")
    allowed = {"hidden", "seq_len", "learning_rate", "epochs", "batch_size",
               "init_scale", "forget_bias_init", "beta1", "beta2", "eps_adam"}
    unknown = set(train_raw) - allowed
    if unknown:
        raise ConfigError(f"config {path}: unknown train keys {sorted(unknown)}")
    seed = int(raw.get("seed", 0))
    train = TrainConfig(seed=seed, **train_raw)

    out_dir = Path(str(_require(raw, "out_dir", str(path))))
    if not out_dir.is_absolute():
        out_dir = (base / out_dir).resolve()

    return RunConfig(
        stations=tuple(stations),
        inputs=inputs,
        out_dir=out_dir,
        features=tuple(raw.get("features", DEFAULT_FEATURES)),
        target=str(raw.get("target", GAUGE)),
        train=train,
        folds=int(raw.get("folds", 3)),
        calibration_split=float(raw.get("calibration_split", 0.7)),
        threshold=float(raw.get("threshold", 0.1)),
        seed=seed,
        jobs=int(raw.get("jobs", 1)),
    )
