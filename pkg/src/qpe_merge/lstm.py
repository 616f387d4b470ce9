"""From-scratch LSTM regression engine.

A single-layer gated recurrent cell with a scalar output head. Gates use
the sigmoid of an affine map of [x_t, h_{t-1}]; the candidate state uses
tanh; the cell state blends its previous value through the forget gate
with the gated candidate; the hidden state is the output gate times
tanh(cell). Training minimizes squared error on standardized targets with
exact backpropagation-through-time gradients and an adaptive-moment
optimizer. Everything is float64 and deterministic for a fixed seed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import expit

from .errors import DataError, NumericError
from .series import MERGED, AlignedDataset, HourlySeries

log = logging.getLogger(__name__)

PARAM_FIELDS = ("W_f", "W_i", "W_c", "W_o", "b_f", "b_i", "b_c", "b_o", "w_y", "b_y")
STD_FLOOR = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 12
    seq_len: int = 12
    learning_rate: float = 0.001
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    init_scale: Optional[float] = None  # default 1/sqrt(hidden)
    forget_bias_init: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    def __post_init__(self) -> None:
        for name in ("hidden", "seq_len", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise DataError(f"TrainConfig.{name} must be >= 1")
        if self.learning_rate <= 0.0:
            raise DataError("TrainConfig.learning_rate must be > 0")
        for name in ("beta1", "beta2"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise DataError(f"TrainConfig.{name} must be in (0, 1)")

    @property
    def effective_init_scale(self) -> float:
        return self.init_scale if self.init_scale is not None else 1.0 / math.sqrt(self.hidden)


@dataclass(frozen=True)
class LstmParams:
    """All learnable weights: four gate matrices over [x, h_prev], their
    biases, and the scalar output head."""

    W_f: np.ndarray
    W_i: np.ndarray
    W_c: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray
    w_y: np.ndarray
    b_y: np.ndarray

    def __post_init__(self) -> None:
        for name in PARAM_FIELDS:
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        h, width = self.W_f.shape
        if h < 1 or width <= h:
            raise DataError(f"gate matrices must be hidden x (input_dim + hidden), got {self.W_f.shape}")
        for name in ("W_i", "W_c", "W_o"):
            if getattr(self, name).shape != (h, width):
                raise DataError(f"{name} shape {getattr(self, name).shape} != W_f shape {(h, width)}")
        for name in ("b_f", "b_i", "b_c", "b_o", "w_y"):
            if getattr(self, name).shape != (h,):
                raise DataError(f"{name} must have length hidden={h}")
        if self.b_y.shape != ():
            raise DataError("b_y must be a scalar")

    @property
    def hidden(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_f.shape[1] - self.W_f.shape[0]

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    def all_finite(self) -> bool:
        return all(np.isfinite(getattr(self, name)).all() for name in PARAM_FIELDS)


@dataclass(frozen=True)
class LstmState:
    """Recurrent state: cell vector c and hidden vector h."""

    c: np.ndarray
    h: np.ndarray

    @classmethod
    def zeros(cls, hidden: int) -> "LstmState":
        return cls(np.zeros(hidden), np.zeros(hidden))


def init_params(input_dim: int, hidden: int, rng: np.random.Generator,
                init_scale: Optional[float] = None,
                forget_bias_init: float = 1.0) -> LstmParams:
    """Uniform [-s, s] weights (s defaults to 1/sqrt(hidden)); zero biases
    except the forget gate, which starts at ``forget_bias_init``.

    Draw order is fixed (W_f, W_i, W_c, W_o, w_y) so a given seed always
    yields the same parameters.
    """
    if input_dim < 1 or hidden < 1:
        raise DataError("input_dim and hidden must be >= 1")
    s = init_scale if init_scale is not None else 1.0 / math.sqrt(hidden)
    width = input_dim + hidden
    draws = {name: rng.uniform(-s, s, size=(hidden, width)) for name in ("W_f", "W_i", "W_c", "W_o")}
    w_y = rng.uniform(-s, s, size=hidden)
    return LstmParams(
        b_f=np.full(hidden, float(forget_bias_init)),
        b_i=np.zeros(hidden), b_c=np.zeros(hidden), b_o=np.zeros(hidden),
        w_y=w_y, b_y=np.zeros(()),
        **draws,
    )


def lstm_cell_forward(x, prev: LstmState, params: LstmParams):
    """One recurrence step; returns the next state and the gate activations.

    f, i, o are sigmoids and the candidate is a tanh, all of the affine map
    of [x, h_prev]; c = f*c_prev + i*candidate; h = o*tanh(c).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise DataError(f"input has shape {x.shape}, expected ({params.input_dim},)")
    if prev.c.shape != (params.hidden,) or prev.h.shape != (params.hidden,):
        raise DataError(f"state dimensions {prev.c.shape}/{prev.h.shape} do not match "
                        f"hidden={params.hidden}")
    if not params.all_finite():
        raise DataError("non-finite parameter values")
    z = np.concatenate([x, prev.h])
    f = expit(params.W_f @ z + params.b_f)
    i = expit(params.W_i @ z + params.b_i)
    c_tilde = np.tanh(params.W_c @ z + params.b_c)
    o = expit(params.W_o @ z + params.b_o)
    c = f * prev.c + i * c_tilde
    h = o * np.tanh(c)
    return LstmState(c, h), {"f": f, "i": i, "c_tilde": c_tilde, "o": o}


def forward_window(window, params: LstmParams) -> float:
    """Run the cell over a (seq_len, input_dim) window from a zero initial
    state and return the scalar head output w_y . h_T + b_y (standardized
    units)."""
    window = _check_window(window, params)
    preds, _ = _forward_batch(window[None, :, :], params, need_cache=False)
    return float(preds[0])


def backprop_window(window, target: float, params: LstmParams):
    """Squared-error loss (prediction - target)^2 and its exact gradients
    with respect to every parameter, via backpropagation through time."""
    window = _check_window(window, params)
    preds, cache = _forward_batch(window[None, :, :], params, need_cache=True)
    residual = float(preds[0]) - float(target)
    loss = residual * residual
    grads = _backward_batch(cache, np.array([2.0 * residual]), params)
    return loss, grads


def _check_window(window, params: LstmParams) -> np.ndarray:
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[0] < 1 or window.shape[1] != params.input_dim:
        raise DataError(f"window has shape {window.shape}, expected "
                        f"(seq_len, {params.input_dim})")
    if not params.all_finite():
        raise DataError("non-finite parameter values")
    return window


def _forward_batch(windows: np.ndarray, params: LstmParams, need_cache: bool):
    """Vectorized forward pass over a (batch, seq_len, input_dim) tensor."""
    n, seq_len, _ = windows.shape
    hidden = params.hidden
    Wf_t, Wi_t, Wc_t, Wo_t = params.W_f.T, params.W_i.T, params.W_c.T, params.W_o.T
    c = np.zeros((n, hidden))
    h = np.zeros((n, hidden))
    cache = [] if need_cache else None
    for t in range(seq_len):
        z = np.concatenate([windows[:, t, :], h], axis=1)
        f = expit(z @ Wf_t + params.b_f)
        i = expit(z @ Wi_t + params.b_i)
        c_tilde = np.tanh(z @ Wc_t + params.b_c)
        o = expit(z @ Wo_t + params.b_o)
        c_prev = c
        c = f * c_prev + i * c_tilde
        tanh_c = np.tanh(c)
        h = o * tanh_c
        if need_cache:
            cache.append((z, f, i, c_tilde, o, c_prev, tanh_c))
    preds = h @ params.w_y + float(params.b_y)
    if need_cache:
        return preds, (cache, h)
    return preds, None


def _backward_batch(cache_and_h, dpred: np.ndarray, params: LstmParams) -> LstmParams:
    """Exact gradients for the scalar head + unrolled recurrence.

    ``dpred`` is dLoss/dprediction per window; any batch averaging must
    already be folded into it.
    """
    cache, h_last = cache_and_h
    input_dim = params.input_dim
    g = {name: np.zeros_like(getattr(params, name)) for name in PARAM_FIELDS}
    g["w_y"] = h_last.T @ dpred
    g["b_y"] = np.asarray(dpred.sum())
    dh = dpred[:, None] * params.w_y[None, :]
    dc = np.zeros_like(dh)
    for z, f, i, c_tilde, o, c_prev, tanh_c in reversed(cache):
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c * tanh_c)
        da_f = (dc * c_prev) * f * (1.0 - f)
        da_i = (dc * c_tilde) * i * (1.0 - i)
        da_c = (dc * i) * (1.0 - c_tilde * c_tilde)
        da_o = do * o * (1.0 - o)
        g["W_f"] += da_f.T @ z
        g["W_i"] += da_i.T @ z
        g["W_c"] += da_c.T @ z
        g["W_o"] += da_o.T @ z
        g["b_f"] += da_f.sum(axis=0)
        g["b_i"] += da_i.sum(axis=0)
        g["b_c"] += da_c.sum(axis=0)
        g["b_o"] += da_o.sum(axis=0)
        dz = da_f @ params.W_f + da_i @ params.W_i + da_c @ params.W_c + da_o @ params.W_o
        dh = dz[:, input_dim:]
        dc = dc * f
    return LstmParams(**g)


@dataclass(frozen=True)
class AdamMoments:
    """First/second moment accumulators, one pair per parameter field."""

    m: dict
    v: dict

    @classmethod
    def zeros_like(cls, params: LstmParams) -> "AdamMoments":
        return cls(m={k: np.zeros_like(a) for k, a in params.as_dict().items()},
                   v={k: np.zeros_like(a) for k, a in params.as_dict().items()})


def adam_step(params: LstmParams, grads: LstmParams, moments: AdamMoments,
              t: int, cfg: TrainConfig):
    """One bias-corrected adaptive-moment update; returns new params/moments.

    delta = lr * m_hat / (sqrt(v_hat) + eps).
    """
    if t < 1:
        raise DataError(f"adam_step: step count must be >= 1, got {t}")
    if not grads.all_finite():
        raise NumericError("adam_step: non-finite gradients")
    b1, b2 = cfg.beta1, cfg.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    new_p, new_m, new_v = {}, {}, {}
    for name in PARAM_FIELDS:
        gv = getattr(grads, name)
        m = b1 * moments.m[name] + (1.0 - b1) * gv
        v = b2 * moments.v[name] + (1.0 - b2) * gv * gv
        m_hat = m / bias1
        v_hat = v / bias2
        new_p[name] = getattr(params, name) - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps_adam)
        new_m[name] = m
        new_v[name] = v
    return LstmParams(**new_p), AdamMoments(new_m, new_v)


@dataclass(frozen=True)
class Scaler:
    """Per-feature and target z-score statistics, fitted on calibration rows only."""

    feature_mean: np.ndarray
    feature_std: np.ndarray
    target_mean: float
    target_std: float

    def apply_features(self, features: np.ndarray) -> np.ndarray:
        return (features - self.feature_mean) / self.feature_std

    def invert_features(self, scaled: np.ndarray) -> np.ndarray:
        return scaled * self.feature_std + self.feature_mean

    def apply_target(self, target: np.ndarray) -> np.ndarray:
        return (target - self.target_mean) / self.target_std

    def invert_target(self, scaled: np.ndarray) -> np.ndarray:
        return scaled * self.target_std + self.target_mean


def fit_scaler(ds: AlignedDataset, indices) -> Scaler:
    """Z-score statistics (population convention) from the given rows.

    Standard deviations are floored at 1e-8 so constant features scale to 0
    instead of dividing by zero.
    """
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise DataError("fit_scaler: empty calibration slice")
    rows = ds.features[indices]
    target = ds.target[indices]
    return Scaler(
        feature_mean=rows.mean(axis=0),
        feature_std=np.maximum(rows.std(axis=0), STD_FLOOR),
        target_mean=float(target.mean()),
        target_std=float(max(target.std(), STD_FLOOR)),
    )


def _gather_windows(scaled_features: np.ndarray, anchors: np.ndarray, seq_len: int) -> np.ndarray:
    offsets = np.arange(-seq_len + 1, 1)
    return scaled_features[anchors[:, None] + offsets[None, :]]


def train(ds: AlignedDataset, train_indices, val_indices, cfg: TrainConfig,
          scaler: Optional[Scaler] = None):
    """Train on windows anchored at ``train_indices``; track per-epoch loss.

    Anchors must admit a full window [i - seq_len + 1, i] inside the
    calibration region (the fold harness filters them; here only bounds are
    checked). Windows are reshuffled every epoch with a generator seeded
    from cfg.seed, so identical seed/config/data give bit-identical output.
    Returns (params, history) where history holds per-epoch train/val loss
    in standardized units.
    """
    train_idx = np.asarray(train_indices, dtype=np.int64)
    val_idx = np.asarray(val_indices, dtype=np.int64)
    for name, idx in (("train", train_idx), ("val", val_idx)):
        if idx.size and (idx.min() - cfg.seq_len + 1 < 0 or idx.max() >= len(ds)):
            raise DataError(f"{name} indices leave no room for a full "
                            f"{cfg.seq_len}-step window")
    if train_idx.size == 0:
        raise DataError("train: no valid training windows")
    if scaler is None:
        scaler = fit_scaler(ds, np.sort(np.concatenate([train_idx, val_idx])))

    Xs = scaler.apply_features(ds.features)
    ys = scaler.apply_target(ds.target)
    train_windows = _gather_windows(Xs, train_idx, cfg.seq_len)
    train_targets = ys[train_idx]
    val_windows = _gather_windows(Xs, val_idx, cfg.seq_len) if val_idx.size else None
    val_targets = ys[val_idx] if val_idx.size else None

    rng = np.random.default_rng(cfg.seed)
    params = init_params(ds.features.shape[1], cfg.hidden, rng,
                         cfg.effective_init_scale, cfg.forget_bias_init)
    moments = AdamMoments.zeros_like(params)
    step = 0
    history = {"train_loss": [], "val_loss": []}
    n_train = train_idx.size
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_train)
        sq_sum = 0.0
        for b0 in range(0, n_train, cfg.batch_size):
            batch = order[b0:b0 + cfg.batch_size]
            preds, cache = _forward_batch(train_windows[batch], params, need_cache=True)
            residual = preds - train_targets[batch]
            if not np.isfinite(residual).all():
                raise NumericError(f"non-finite loss at epoch {epoch}, "
                                   f"batch {b0 // cfg.batch_size}")
            sq_sum += float(residual @ residual)
            grads = _backward_batch(cache, (2.0 / batch.size) * residual, params)
            step += 1
            params, moments = adam_step(params, grads, moments, step, cfg)
        history["train_loss"].append(sq_sum / n_train)
        if val_windows is not None:
            vp, _ = _forward_batch(val_windows, params, need_cache=False)
            vr = vp - val_targets
            history["val_loss"].append(float(vr @ vr) / val_idx.size)
        else:
            history["val_loss"].append(float("nan"))
    return params, history


def predict_series(ds: AlignedDataset, region, params: LstmParams, scaler: Scaler,
                   seq_len: int) -> HourlySeries:
    """Predict the merged rate over a contiguous index region of the dataset.

    The first seq_len - 1 positions are warm-up (no full window inside the
    region) and stay missing; predictions are inverse-scaled and clamped at
    zero from below.
    """
    start, stop = int(region[0]), int(region[1])
    if not 0 <= start < stop <= len(ds):
        raise DataError(f"predict_series: region [{start}, {stop}) outside dataset "
                        f"of length {len(ds)}")
    length = stop - start
    values = np.full(length, np.nan)
    missing = np.ones(length, dtype=bool)
    anchors = np.arange(start + seq_len - 1, stop, dtype=np.int64)
    if anchors.size == 0:
        log.warning("%s: region [%d, %d) shorter than seq_len=%d, all predictions missing",
                    ds.station_id, start, stop, seq_len)
    else:
        windows = _gather_windows(scaler.apply_features(ds.features), anchors, seq_len)
        preds, _ = _forward_batch(windows, params, need_cache=False)
        if not np.isfinite(preds).all():
            raise NumericError(f"{ds.station_id}: non-finite prediction in region "
                               f"[{start}, {stop})")
        rates = np.maximum(scaler.invert_target(preds), 0.0)
        values[anchors - start] = rates
        missing[anchors - start] = False
    return HourlySeries(ds.station_id, MERGED, ds.timestamp_at(start), values, missing)


# --- parameter file format -------------------------------------------------

PARAMS_MAGIC = "qpe-merge-lstm-params v1"


def _fmt(x: float) -> str:
    return repr(float(x))


def save_params(path, params: LstmParams, seq_len: int, scaler: Scaler) -> None:
    """Write a versioned textual dump: header with dims and scaler stats,
    then blocks in the fixed order W_f, W_i, W_c, W_o, b_f, b_i, b_c, b_o,
    w_y, b_y (row-major, full float64 precision)."""
    lines = [PARAMS_MAGIC,
             f"input_dim={params.input_dim} hidden={params.hidden} seq_len={seq_len}",
             "feature_mean " + " ".join(_fmt(v) for v in scaler.feature_mean),
             "feature_std " + " ".join(_fmt(v) for v in scaler.feature_std),
             f"target_mean {_fmt(scaler.target_mean)}",
             f"target_std {_fmt(scaler.target_std)}"]
    for name in PARAM_FIELDS:
        lines.append(name)
        block = np.atleast_2d(getattr(params, name))
        for row in block:
            lines.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_params(path):
    """Inverse of save_params; returns (params, seq_len, scaler)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != PARAMS_MAGIC:
        raise DataError(f"{path}: not a {PARAMS_MAGIC!r} file")
    dims = dict(kv.split("=") for kv in lines[1].split())
    input_dim, hidden, seq_len = (int(dims[k]) for k in ("input_dim", "hidden", "seq_len"))

    def floats(line: str, prefix: str) -> np.ndarray:
        tokens = line.split()
        if tokens[0] != prefix:
            raise DataError(f"{path}: expected {prefix!r} line, got {line!r}")
        return np.array([float(t) for t in tokens[1:]])

    scaler = Scaler(feature_mean=floats(lines[2], "feature_mean"),
                    feature_std=floats(lines[3], "feature_std"),
                    target_mean=float(lines[4].split()[1]),
                    target_std=float(lines[5].split()[1]))
    pos = 6
    shapes = {name: (hidden, input_dim + hidden) for name in ("W_f", "W_i", "W_c", "W_o")}
    shapes.update({name: (hidden,) for name in ("b_f", "b_i", "b_c", "b_o", "w_y")})
    shapes["b_y"] = ()
    blocks = {}
    for name in PARAM_FIELDS:
        if lines[pos] != name:
            raise DataError(f"{path}: expected block {name!r} at line {pos + 1}")
        pos += 1
        rows = 1 if len(shapes[name]) < 2 else shapes[name][0]
        data = [[float(t) for t in lines[pos + r].split()] for r in range(rows)]
        pos += rows
        blocks[name] = np.array(data).reshape(shapes[name])
    return LstmParams(**blocks), seq_len, scaler
