"""Shared builders for the test suite: series factories, random parameter
sets drawn independently of the package initializer, parameter perturbation,
and central finite-difference gradients."""
from datetime import datetime, timezone

import numpy as np

from qpe_merge.lstm import PARAM_FIELDS, LstmParams, forward_window
from qpe_merge.series import AlignedDataset, HourlySeries

T0 = datetime(2017, 1, 1, tzinfo=timezone.utc)

# Relative error is meaningless against a ~0 gradient where central
# differences only carry roundoff (~1e-11), so the comparison scale is
# floored; components above the floor are checked in pure relative terms.
GRAD_SCALE_FLOOR = 1e-3


def make_series(values, missing=None, station="ANT", product="gauge", start=T0):
    return HourlySeries(station, product, start, np.asarray(values, dtype=float), missing)


def make_dataset(features, target, names=("imerg_e", "stage4"), station="ANT", start=T0):
    return AlignedDataset(station, start, tuple(names), np.asarray(features, dtype=float),
                          np.asarray(target, dtype=float))


def random_params(rng, input_dim, hidden, scale=0.5):
    """Gaussian parameters built directly, bypassing the package initializer."""
    width = input_dim + hidden
    return LstmParams(
        W_f=rng.normal(0.0, scale, (hidden, width)),
        W_i=rng.normal(0.0, scale, (hidden, width)),
        W_c=rng.normal(0.0, scale, (hidden, width)),
        W_o=rng.normal(0.0, scale, (hidden, width)),
        b_f=rng.normal(0.0, scale, hidden),
        b_i=rng.normal(0.0, scale, hidden),
        b_c=rng.normal(0.0, scale, hidden),
        b_o=rng.normal(0.0, scale, hidden),
        w_y=rng.normal(0.0, scale, hidden),
        b_y=np.asarray(rng.normal(0.0, scale)),
    )


def perturbed(params, name, index, delta):
    arrays = {k: np.array(v) for k, v in params.as_dict().items()}
    if arrays[name].ndim == 0:
        arrays[name] = arrays[name] + delta
    else:
        arrays[name][index] += delta
    return LstmParams(**arrays)


def finite_diff_grads(window, target, params, step=1e-5):
    """Central differences of the squared-error loss per parameter entry.

    The loss is evaluated through the forward pass, which is itself pinned
    to a scalar-loop oracle at 1e-12 elsewhere, so this independently
    checks only the backward pass.
    """
    target = float(target)

    def loss(p):
        r = forward_window(window, p) - target
        return r * r

    grads = {}
    for name in PARAM_FIELDS:
        arr = params.as_dict()[name]
        if arr.ndim == 0:
            grads[name] = np.asarray(
                (loss(perturbed(params, name, (), step))
                 - loss(perturbed(params, name, (), -step))) / (2.0 * step))
            continue
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            g[idx] = (loss(perturbed(params, name, idx, step))
                      - loss(perturbed(params, name, idx, -step))) / (2.0 * step)
        grads[name] = g
    return grads


def max_grad_rel_err(analytic, fd, scale_floor=GRAD_SCALE_FLOOR):
    worst = 0.0
    for name in PARAM_FIELDS:
        a = np.atleast_1d(getattr(analytic, name)).ravel()
        b = np.atleast_1d(fd[name]).ravel()
        for av, bv in zip(a, b):
            denom = max(abs(av), abs(bv), scale_floor)
            worst = max(worst, abs(av - bv) / denom)
    return worst
