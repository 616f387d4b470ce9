"""Recurrent engine: cell and window oracles, exact gradients, optimizer,
scaling, training determinism, and prediction mechanics."""
import math

import numpy as np
import pytest

from helpers import (T0, finite_diff_grads, make_dataset, max_grad_rel_err, perturbed,
                     random_params)
from oracles import (oracle_adam_array, oracle_cell, oracle_forward, oracle_zscore,
                     params_to_lists)
from qpe_merge.errors import DataError, NumericError
from qpe_merge.lstm import (PARAM_FIELDS, AdamMoments, LstmParams, LstmState, Scaler,
                            TrainConfig, adam_step, backprop_window, fit_scaler,
                            forward_window, init_params, load_params, lstm_cell_forward,
                            predict_series, save_params, train)


def zero_params(input_dim=1, hidden=2, b_y=0.0, w_y=None, forget_bias=0.0):
    width = input_dim + hidden
    return LstmParams(
        W_f=np.zeros((hidden, width)), W_i=np.zeros((hidden, width)),
        W_c=np.zeros((hidden, width)), W_o=np.zeros((hidden, width)),
        b_f=np.full(hidden, forget_bias), b_i=np.zeros(hidden), b_c=np.zeros(hidden),
        b_o=np.zeros(hidden), w_y=np.zeros(hidden) if w_y is None else np.asarray(w_y),
        b_y=np.asarray(b_y))


def test_cell_all_zero_parameters_and_state():
    params = zero_params()
    state, gates = lstm_cell_forward(np.array([7.0]), LstmState.zeros(2), params)
    assert np.allclose(gates["f"], 0.5) and np.allclose(gates["i"], 0.5)
    assert np.allclose(gates["o"], 0.5) and np.allclose(gates["c_tilde"], 0.0)
    assert np.allclose(state.c, 0.0) and np.allclose(state.h, 0.0)


def test_cell_zero_weights_unit_cell_state():
    params = zero_params()
    prev = LstmState(c=np.ones(2), h=np.zeros(2))
    state, _ = lstm_cell_forward(np.array([3.0]), prev, params)
    assert np.allclose(state.c, 0.5)
    assert np.allclose(state.h, 0.5 * math.tanh(0.5))
    assert state.h[0] == pytest.approx(0.231059, abs=1e-6)


def test_cell_matches_scalar_oracle():
    rng = np.random.default_rng(19)
    for _ in range(30):
        hidden = int(rng.integers(1, 6))
        input_dim = int(rng.integers(1, 4))
        params = random_params(rng, input_dim, hidden)
        x = rng.normal(0, 1, input_dim)
        prev = LstmState(c=rng.normal(0, 1, hidden), h=rng.uniform(-0.9, 0.9, hidden))
        state, gates = lstm_cell_forward(x, prev, params)
        oh, oc, ogates = oracle_cell(x, prev.h, prev.c, params_to_lists(params))
        assert np.allclose(state.h, oh, rtol=0, atol=1e-12)
        assert np.allclose(state.c, oc, rtol=0, atol=1e-12)
        for key in ("f", "i", "c_tilde", "o"):
            assert np.allclose(gates[key], ogates[key], rtol=0, atol=1e-12)


def test_cell_gate_and_state_ranges():
    # moderate magnitudes: in float64 a saturated tanh rounds to exactly 1.0,
    # so the strict mathematical bound is only observable away from saturation
    rng = np.random.default_rng(20)
    for _ in range(50):
        params = random_params(rng, 2, 3, scale=0.8)
        state = LstmState(c=rng.normal(0, 1, 3), h=rng.uniform(-0.9, 0.9, 3))
        state, gates = lstm_cell_forward(rng.normal(0, 1, 2), state, params)
        for key in ("f", "i", "o"):
            assert ((gates[key] > 0.0) & (gates[key] < 1.0)).all()
        assert ((gates["c_tilde"] > -1.0) & (gates["c_tilde"] < 1.0)).all()
        assert (np.abs(state.h) < 1.0).all()


def test_cell_zero_everything_is_a_fixed_point():
    params = zero_params(input_dim=2, hidden=3)
    state = LstmState.zeros(3)
    for _ in range(10):
        state, _ = lstm_cell_forward(np.zeros(2), state, params)
        assert np.array_equal(state.c, np.zeros(3))
        assert np.array_equal(state.h, np.zeros(3))


def test_cell_rejects_dimension_mismatch_and_nonfinite():
    params = zero_params(input_dim=1, hidden=2)
    with pytest.raises(DataError, match="shape"):
        lstm_cell_forward(np.zeros(3), LstmState.zeros(2), params)
    with pytest.raises(DataError, match="dimensions"):
        lstm_cell_forward(np.zeros(1), LstmState.zeros(5), params)
    bad = perturbed(params, "W_f", (0, 0), np.inf)
    with pytest.raises(DataError, match="non-finite"):
        lstm_cell_forward(np.zeros(1), LstmState.zeros(2), bad)


def test_params_shape_validation():
    with pytest.raises(DataError, match="hidden x"):
        LstmParams(W_f=np.zeros((2, 2)), W_i=np.zeros((2, 2)), W_c=np.zeros((2, 2)),
                   W_o=np.zeros((2, 2)), b_f=np.zeros(2), b_i=np.zeros(2),
                   b_c=np.zeros(2), b_o=np.zeros(2), w_y=np.zeros(2), b_y=np.asarray(0.0))


def test_forward_zero_params_returns_zero():
    params = zero_params(input_dim=2, hidden=3)
    rng = np.random.default_rng(21)
    assert forward_window(rng.normal(0, 2, (5, 2)), params) == 0.0


def test_forward_constant_head():
    params = zero_params(input_dim=2, hidden=3, b_y=3.5)
    rng = np.random.default_rng(22)
    for _ in range(5):
        assert forward_window(rng.normal(0, 2, (4, 2)), params) == 3.5


def test_forward_matches_scalar_oracle():
    rng = np.random.default_rng(23)
    for _ in range(20):
        hidden = int(rng.integers(1, 6))
        input_dim = int(rng.integers(1, 4))
        seq_len = int(rng.integers(1, 9))
        params = random_params(rng, input_dim, hidden)
        window = rng.normal(0, 1, (seq_len, input_dim))
        got = forward_window(window, params)
        want = oracle_forward(window, params_to_lists(params))
        assert abs(got - want) < 1e-12


def test_forward_rejects_wrong_window_width():
    params = zero_params(input_dim=2, hidden=2)
    with pytest.raises(DataError, match="window has shape"):
        forward_window(np.zeros((4, 3)), params)


def test_backprop_zero_residual_means_zero_gradients():
    params = zero_params(input_dim=1, hidden=2)  # prediction 0 everywhere
    loss, grads = backprop_window(np.ones((4, 1)), 0.0, params)
    assert loss == 0.0
    for name in PARAM_FIELDS:
        assert np.array_equal(np.asarray(getattr(grads, name)),
                              np.zeros_like(getattr(params, name)))


def test_backprop_zero_params_head_gradient():
    params = zero_params(input_dim=1, hidden=2)
    for target in (1.5, -2.0, 0.25):
        loss, grads = backprop_window(np.ones((3, 1)), target, params)
        assert loss == pytest.approx(target * target, abs=1e-15)
        assert float(grads.b_y) == pytest.approx(-2.0 * target, abs=1e-15)
        for name in ("W_f", "W_i", "W_c", "W_o"):
            assert np.array_equal(getattr(grads, name), np.zeros_like(getattr(params, name)))
        # hidden state is zero, so the head weight gradient vanishes too
        assert np.array_equal(grads.w_y, np.zeros(2))


def test_backprop_matches_finite_differences_small():
    rng = np.random.default_rng(24)
    for _ in range(4):
        params = random_params(rng, 2, 3, scale=0.6)
        window = rng.normal(0, 1, (5, 2))
        target = float(rng.normal())
        _, grads = backprop_window(window, target, params)
        fd = finite_diff_grads(window, target, params)
        assert max_grad_rel_err(grads, fd) < 1e-6


def test_batched_forward_equals_stacked_single_windows():
    from qpe_merge.lstm import _forward_batch
    rng = np.random.default_rng(25)
    params = random_params(rng, 2, 4, scale=0.7)
    windows = rng.normal(0, 1, (9, 6, 2))
    preds, _ = _forward_batch(windows, params, need_cache=False)
    singles = np.array([forward_window(w, params) for w in windows])
    assert np.allclose(preds, singles, rtol=0, atol=1e-12)


def test_batched_backward_equals_summed_single_gradients():
    from qpe_merge.lstm import _backward_batch, _forward_batch
    rng = np.random.default_rng(26)
    params = random_params(rng, 2, 3, scale=0.7)
    windows = rng.normal(0, 1, (5, 4, 2))
    targets = rng.normal(0, 1, 5)
    preds, cache = _forward_batch(windows, params, need_cache=True)
    batch_grads = _backward_batch(cache, 2.0 * (preds - targets), params)
    for name in PARAM_FIELDS:
        total = np.zeros_like(getattr(params, name))
        for w, t in zip(windows, targets):
            _, g = backprop_window(w, float(t), params)
            total = total + np.asarray(getattr(g, name))
        assert np.allclose(np.asarray(getattr(batch_grads, name)), total,
                           rtol=1e-12, atol=1e-12)


def constant_grads(params, value):
    return LstmParams(**{name: np.full_like(getattr(params, name), value)
                         for name in PARAM_FIELDS})


def test_adam_zero_gradient_is_a_fixed_point_for_params():
    rng = np.random.default_rng(27)
    params = random_params(rng, 1, 2)
    moments = AdamMoments.zeros_like(params)
    new_params, new_moments = adam_step(params, constant_grads(params, 0.0), moments, 1,
                                        TrainConfig(hidden=2, seq_len=2))
    for name in PARAM_FIELDS:
        assert np.array_equal(getattr(new_params, name), getattr(params, name))
        assert np.array_equal(new_moments.m[name], moments.m[name])


def test_adam_first_step_magnitude_is_learning_rate():
    rng = np.random.default_rng(28)
    params = random_params(rng, 1, 2)
    cfg = TrainConfig(hidden=2, seq_len=2, learning_rate=0.001)
    for g in (0.5, -3.0, 1e-4):
        stepped, _ = adam_step(params, constant_grads(params, g), AdamMoments.zeros_like(params),
                               1, cfg)
        delta = np.asarray(stepped.W_f) - np.asarray(params.W_f)
        assert np.allclose(np.abs(delta), cfg.learning_rate, rtol=1e-3)
        assert np.all(np.sign(delta) == -np.sign(g))


def test_adam_two_steps_match_scalar_oracle():
    rng = np.random.default_rng(29)
    params = random_params(rng, 2, 2)
    cfg = TrainConfig(hidden=2, seq_len=2, learning_rate=0.01)
    g1 = rng.normal(0, 1, size=np.asarray(params.W_i).shape)
    g2 = rng.normal(0, 1, size=np.asarray(params.W_i).shape)
    grads1 = LstmParams(**{n: (g1 if n == "W_i" else np.zeros_like(getattr(params, n)))
                           for n in PARAM_FIELDS})
    grads2 = LstmParams(**{n: (g2 if n == "W_i" else np.zeros_like(getattr(params, n)))
                           for n in PARAM_FIELDS})
    p1, m1 = adam_step(params, grads1, AdamMoments.zeros_like(params), 1, cfg)
    p2, _ = adam_step(p1, grads2, m1, 2, cfg)

    flat_prev = [float(v) for v in np.asarray(params.W_i).ravel()]
    zeros = [0.0] * len(flat_prev)
    step1, m, v = oracle_adam_array(flat_prev, [float(x) for x in g1.ravel()], zeros, zeros,
                                    1, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps_adam)
    step2, _, _ = oracle_adam_array(step1, [float(x) for x in g2.ravel()], m, v,
                                    2, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps_adam)
    assert np.allclose(np.asarray(p2.W_i).ravel(), step2, rtol=0, atol=1e-12)
    # untouched fields only see moment decay, never a parameter change
    assert np.allclose(np.asarray(p2.W_o), np.asarray(params.W_o), rtol=0, atol=0)


def test_adam_rejects_bad_step_and_nonfinite_grads():
    rng = np.random.default_rng(30)
    params = random_params(rng, 1, 2)
    cfg = TrainConfig(hidden=2, seq_len=2)
    with pytest.raises(DataError, match="step count"):
        adam_step(params, constant_grads(params, 0.0), AdamMoments.zeros_like(params), 0, cfg)
    with pytest.raises(NumericError, match="non-finite"):
        adam_step(params, constant_grads(params, np.nan), AdamMoments.zeros_like(params), 1, cfg)


def test_init_params_is_seeded_and_bounded():
    a = init_params(2, 12, np.random.default_rng(5))
    b = init_params(2, 12, np.random.default_rng(5))
    scale = 1.0 / math.sqrt(12)
    for name in ("W_f", "W_i", "W_c", "W_o"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
        assert np.abs(getattr(a, name)).max() <= scale
    assert np.array_equal(a.b_f, np.ones(12))
    assert np.array_equal(a.b_i, np.zeros(12))
    assert float(a.b_y) == 0.0


def test_scaler_two_point_feature():
    ds = make_dataset([[0.0, 1.0], [2.0, 1.0]], [1.0, 3.0])
    scaler = fit_scaler(ds, np.array([0, 1]))
    assert scaler.feature_mean[0] == 1.0 and scaler.feature_std[0] == 1.0
    scaled = scaler.apply_features(ds.features)
    assert list(scaled[:, 0]) == [-1.0, 1.0]


def test_scaler_constant_feature_floors_std():
    ds = make_dataset([[5.0, 1.0], [5.0, 2.0]], [0.0, 1.0])
    scaler = fit_scaler(ds, np.array([0, 1]))
    assert scaler.feature_std[0] == 1e-8
    assert np.allclose(scaler.apply_features(ds.features)[:, 0], 0.0)


def test_scaler_roundtrip_identity():
    rng = np.random.default_rng(31)
    ds = make_dataset(rng.uniform(0, 9, (50, 2)), rng.uniform(0, 9, 50))
    scaler = fit_scaler(ds, np.arange(50))
    assert np.allclose(scaler.invert_features(scaler.apply_features(ds.features)),
                       ds.features, rtol=0, atol=1e-12)
    assert np.allclose(scaler.invert_target(scaler.apply_target(ds.target)),
                       ds.target, rtol=0, atol=1e-12)


def test_scaler_matches_population_oracle():
    rng = np.random.default_rng(32)
    ds = make_dataset(rng.uniform(0, 9, (40, 2)), rng.uniform(0, 9, 40))
    rows = np.arange(25)
    scaler = fit_scaler(ds, rows)
    mean, std = oracle_zscore([float(v) for v in ds.target[rows]])
    assert scaler.target_mean == pytest.approx(mean, abs=1e-12)
    assert scaler.target_std == pytest.approx(std, abs=1e-12)


def test_scaler_ignores_rows_outside_calibration():
    rng = np.random.default_rng(33)
    features = rng.uniform(0, 9, (60, 2))
    target = rng.uniform(0, 9, 60)
    ds = make_dataset(features, target)
    cal = np.arange(40)
    before = fit_scaler(ds, cal)
    tampered_features = features.copy()
    tampered_features[40:] += 100.0
    tampered_target = target.copy()
    tampered_target[40:] += 100.0
    after = fit_scaler(make_dataset(tampered_features, tampered_target), cal)
    assert np.array_equal(before.feature_mean, after.feature_mean)
    assert np.array_equal(before.feature_std, after.feature_std)
    assert before.target_mean == after.target_mean
    assert before.target_std == after.target_std


def test_scaler_rejects_empty_slice():
    ds = make_dataset([[1.0, 2.0]], [1.0])
    with pytest.raises(DataError, match="empty calibration"):
        fit_scaler(ds, np.array([], dtype=int))


def small_cfg(**kw):
    base = dict(hidden=4, seq_len=4, epochs=10, batch_size=16, seed=0)
    base.update(kw)
    return TrainConfig(**base)


def test_train_constant_zero_target_reaches_tiny_loss():
    ds = make_dataset(np.zeros((80, 2)), np.zeros(80))
    cfg = small_cfg()
    _, history = train(ds, np.arange(cfg.seq_len - 1, 60), np.arange(60, 80), cfg)
    assert history["val_loss"][-1] < 1e-4
    assert len(history["train_loss"]) == cfg.epochs


def test_train_is_bitwise_deterministic():
    rng = np.random.default_rng(34)
    features = rng.uniform(0, 4, (120, 2))
    target = np.clip(0.6 * features[:, 0] + 0.4 * features[:, 1], 0, None)
    ds = make_dataset(features, target)
    idx_train = np.arange(3, 90)
    idx_val = np.arange(90, 120)
    cfg = small_cfg(epochs=6, seed=77)
    p1, h1 = train(ds, idx_train, idx_val, cfg)
    p2, h2 = train(ds, idx_train, idx_val, cfg)
    for name in PARAM_FIELDS:
        assert np.array_equal(getattr(p1, name), getattr(p2, name))
    assert h1 == h2
    p3, _ = train(ds, idx_train, idx_val, small_cfg(epochs=6, seed=78))
    assert any(not np.array_equal(getattr(p1, n), getattr(p3, n)) for n in PARAM_FIELDS)


def test_train_learns_linear_blend():
    rng = np.random.default_rng(35)
    n = 1500
    features = rng.gamma(1.2, 1.5, (n, 2))
    target = 0.6 * features[:, 0] + 0.4 * features[:, 1]
    ds = make_dataset(features, target)
    cfg = TrainConfig(hidden=12, seq_len=12, epochs=30, seed=3)
    train_idx = np.arange(cfg.seq_len - 1, 1000)
    val_idx = np.arange(1000, n)
    params, history = train(ds, train_idx, val_idx, cfg)
    scaler = fit_scaler(ds, np.arange(0, n))
    pred = predict_series(ds, (900, n), params, scaler, cfg.seq_len)
    keep = ~pred.missing
    r = np.corrcoef(pred.values[keep], ds.target[900:][keep])[0, 1]
    assert r > 0.95
    assert history["val_loss"][-1] < history["val_loss"][0]


def test_train_rejects_unusable_indices():
    ds = make_dataset(np.zeros((30, 2)), np.zeros(30))
    cfg = small_cfg()
    with pytest.raises(DataError, match="no room for a full"):
        train(ds, np.array([0, 1]), np.array([], dtype=int), cfg)
    with pytest.raises(DataError, match="no valid training windows"):
        train(ds, np.array([], dtype=int), np.array([], dtype=int), cfg)


def test_predict_series_warmup_and_counts():
    rng = np.random.default_rng(36)
    ds = make_dataset(rng.uniform(0, 3, (512, 2)), rng.uniform(0, 3, 512))
    params = init_params(2, 4, np.random.default_rng(0))
    scaler = fit_scaler(ds, np.arange(512))
    tail = predict_series(ds, (500, 512), params, scaler, seq_len=12)
    assert len(tail) == 12
    assert int((~tail.missing).sum()) == 1
    assert tail.missing[:11].all()
    full = predict_series(ds, (0, 512), params, scaler, seq_len=12)
    assert int((~full.missing).sum()) == 501
    assert full.start == T0
    assert full.product == "merged"


def test_predict_series_clamps_negative_head_output():
    ds = make_dataset(np.ones((20, 2)), np.ones(20))
    params = zero_params(input_dim=2, hidden=3, b_y=-50.0)
    scaler = Scaler(feature_mean=np.zeros(2), feature_std=np.ones(2),
                    target_mean=0.0, target_std=1.0)
    pred = predict_series(ds, (0, 20), params, scaler, seq_len=4)
    assert (pred.values[~pred.missing] == 0.0).all()


def test_predict_series_short_region_is_all_missing():
    ds = make_dataset(np.ones((20, 2)), np.ones(20))
    params = zero_params(input_dim=2, hidden=2)
    scaler = Scaler(np.zeros(2), np.ones(2), 0.0, 1.0)
    pred = predict_series(ds, (0, 3), params, scaler, seq_len=4)
    assert pred.missing.all()


def test_predict_series_rejects_bad_region():
    ds = make_dataset(np.ones((20, 2)), np.ones(20))
    params = zero_params(input_dim=2, hidden=2)
    scaler = Scaler(np.zeros(2), np.ones(2), 0.0, 1.0)
    with pytest.raises(DataError, match="outside dataset"):
        predict_series(ds, (10, 25), params, scaler, seq_len=4)


def test_params_file_roundtrip(tmp_path):
    rng = np.random.default_rng(37)
    params = random_params(rng, 2, 5)
    scaler = Scaler(feature_mean=rng.normal(0, 1, 2), feature_std=rng.uniform(0.5, 2, 2),
                    target_mean=1.25, target_std=0.75)
    path = tmp_path / "params.txt"
    save_params(path, params, seq_len=12, scaler=scaler)
    loaded, seq_len, loaded_scaler = load_params(path)
    assert seq_len == 12
    for name in PARAM_FIELDS:
        assert np.array_equal(np.asarray(getattr(loaded, name)),
                              np.asarray(getattr(params, name)))
    assert np.array_equal(loaded_scaler.feature_mean, scaler.feature_mean)
    assert loaded_scaler.target_std == scaler.target_std


def test_params_file_rejects_foreign_content(tmp_path):
    path = tmp_path / "junk.txt"
    path.write_text("not a params file\n", encoding="utf-8")
    with pytest.raises(DataError, match="not a"):
        load_params(path)
