import math

import numpy as np
import pytest

from imgaudit.errors import (DegenerateMetricError, DimensionError,
                             EmptyDatasetError)
from imgaudit.learn import (AdamState, Model, Sample, TrainConfig, accuracy,
                            adam_step, forward, forward_batch, history_to_csv,
                            init_model, input_grad, load_checkpoint, logits,
                            loss_and_grad, onecycle_lr, roc_auc,
                            save_checkpoint, train, _eval_batch_indices)


def _logistic(w, b):
    return Model("logistic", len(w), 0,
                 {"w": np.asarray(w, dtype=np.float64),
                  "b": np.array([float(b)])})


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

def test_forward_sigmoid_of_one():
    m = _logistic([1.0], 0.0)
    assert forward(m, np.array([1.0])) == pytest.approx(0.7310585786300049)


def test_forward_zero_logit_is_half():
    m = _logistic([2.0, -1.0], 0.5)
    assert forward(m, np.array([0.25, 1.0])) == pytest.approx(0.5)


def test_forward_batch_matches_scalar():
    g = np.random.default_rng(0)
    m = _logistic(g.normal(size=4), 0.3)
    X = g.uniform(-1, 1, (6, 4))
    batch = forward_batch(m, X)
    for i in range(6):
        assert batch[i] == pytest.approx(forward(m, X[i]))


def test_sigmoid_extreme_logits_stable():
    m = _logistic([1.0], 0.0)
    assert forward(m, np.array([800.0])) == 1.0
    assert forward(m, np.array([-800.0])) == 0.0


def test_mlp_relu_path():
    m = Model("mlp", 2, 2, {
        "W1": np.array([[1.0, 0.0], [0.0, -1.0]]),
        "b1": np.zeros(2),
        "w2": np.array([1.0, 1.0]),
        "b2": np.array([0.0]),
    })
    # x=(1, 1): hidden = (1, 0) -> logit 1
    assert logits(m, np.array([[1.0, 1.0]]))[0] == pytest.approx(1.0)


def test_dimension_mismatch_rejected():
    m = _logistic([1.0, 2.0], 0.0)
    with pytest.raises(DimensionError):
        forward(m, np.array([1.0, 2.0, 3.0]))


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------

def test_logistic_bias_grad_is_prob_minus_label():
    m = _logistic([1.0, -1.0], 0.2)
    x = np.array([0.3, 0.7])
    p = forward(m, x)
    _, grads = loss_and_grad(m, [Sample(x, 1)])
    assert grads["b"][0] == pytest.approx(p - 1.0)
    assert np.allclose(grads["w"], (p - 1.0) * x)


def _fd_param_check(model, batch, rel_tol=1e-6):
    eps = 1e-6
    _, grads = loss_and_grad(model, batch)
    for k, p in model.params.items():
        flat = p.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up, _ = loss_and_grad(model, batch)
            flat[i] = orig - eps
            dn, _ = loss_and_grad(model, batch)
            flat[i] = orig
            fd = (up - dn) / (2 * eps)
            got = grads[k].reshape(-1)[i]
            assert got == pytest.approx(fd, abs=1e-7, rel=rel_tol), (k, i)


def test_logistic_grads_match_finite_differences():
    g = np.random.default_rng(1)
    m = _logistic(g.normal(size=3), 0.1)
    batch = [Sample(g.uniform(-1, 1, 3), i % 2) for i in range(5)]
    _fd_param_check(m, batch)


def test_mlp_grads_match_finite_differences():
    g = np.random.default_rng(2)
    m = init_model("mlp", 4, h=3, seed=7)
    batch = [Sample(g.uniform(-1, 1, 4), i % 2) for i in range(6)]
    _fd_param_check(m, batch)


def test_input_grad_matches_finite_differences():
    g = np.random.default_rng(3)
    for arch, h in [("logistic", 0), ("mlp", 3)]:
        m = init_model(arch, 4, h=h, seed=5)
        if arch == "logistic":
            m.params["w"] = g.normal(size=4)
            m.params["b"] = g.normal(size=1)
        x = g.uniform(-1, 1, 4)
        y = 1
        grad = input_grad(m, x, y)
        eps = 1e-6
        for i in range(4):
            xp, xm = x.copy(), x.copy()
            xp[i] += eps
            xm[i] -= eps
            lp, _ = loss_and_grad(m, [Sample(xp, y)])
            lm, _ = loss_and_grad(m, [Sample(xm, y)])
            assert grad[i] == pytest.approx((lp - lm) / (2 * eps), abs=1e-6)


def test_bce_loss_value():
    m = _logistic([0.0], math.log(3.0))  # prob = 0.75
    loss, _ = loss_and_grad(m, [Sample(np.array([0.0]), 1)])
    assert loss == pytest.approx(-math.log(0.75))


def test_empty_batch_rejected():
    m = _logistic([1.0], 0.0)
    with pytest.raises(EmptyDatasetError):
        loss_and_grad(m, [])


# ---------------------------------------------------------------------------
# Adam and one-cycle
# ---------------------------------------------------------------------------

def test_adam_first_step_moves_by_lr():
    # with zero moments the first bias-corrected step is -lr * sign(g)
    m = _logistic([0.0, 0.0], 0.0)
    state = AdamState.for_model(m)
    grads = {"w": np.array([0.5, -2.0]), "b": np.array([1.0])}
    state, params = adam_step(state, m.params, grads, lr=0.1)
    assert np.allclose(params["w"], [-0.1, 0.1], atol=1e-8)
    assert params["b"][0] == pytest.approx(-0.1, abs=1e-8)
    assert state.t == 1


def test_adam_minimizes_quadratic():
    # f(th) = (th - 3)^2
    params = {"th": np.array([0.0])}
    state = AdamState(m={"th": np.zeros(1)}, v={"th": np.zeros(1)})
    for _ in range(2000):
        g = {"th": 2.0 * (params["th"] - 3.0)}
        state, params = adam_step(state, params, g, lr=0.05)
    assert params["th"][0] == pytest.approx(3.0, abs=1e-3)


def test_adam_functional_no_mutation():
    m = _logistic([1.0], 0.0)
    state = AdamState.for_model(m)
    before = m.params["w"].copy()
    adam_step(state, m.params, {"w": np.ones(1), "b": np.ones(1)}, 0.1)
    assert np.array_equal(m.params["w"], before)
    assert state.t == 0


def test_onecycle_endpoints():
    cfg = TrainConfig(lr_max=2e-3)
    total = 100
    assert onecycle_lr(0, total, cfg) == pytest.approx(8e-5)
    warmup = int(round(0.3 * total))
    assert onecycle_lr(warmup, total, cfg) == pytest.approx(2e-3)
    assert onecycle_lr(total - 1, total, cfg) == pytest.approx(8e-9, rel=1e-6)


def test_onecycle_shape():
    cfg = TrainConfig(lr_max=1e-2)
    total = 50
    lrs = [onecycle_lr(s, total, cfg) for s in range(total)]
    warmup = int(round(0.3 * total))
    assert all(b >= a for a, b in zip(lrs[:warmup], lrs[1 : warmup + 1]))
    assert all(b <= a for a, b in zip(lrs[warmup:-1], lrs[warmup + 1:]))
    assert max(lrs) == pytest.approx(1e-2)
    # continuity at the warmup/anneal boundary
    assert abs(lrs[warmup] - lrs[warmup - 1]) < 0.15 * 1e-2


def test_onecycle_out_of_range():
    cfg = TrainConfig()
    with pytest.raises(DimensionError):
        onecycle_lr(10, 10, cfg)


def test_eval_batch_indices():
    assert _eval_batch_indices(20, 10) == [1, 3, 5, 7, 9, 11, 13, 15, 17, 19]
    assert _eval_batch_indices(3, 10) == [0, 1, 2]
    assert _eval_batch_indices(1, 10) == [0]


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

def _blobs(n, seed, sep=4.0):
    g = np.random.default_rng(seed)
    X0 = g.normal(0.0, 1.0, (n // 2, 2))
    X1 = g.normal(sep, 1.0, (n - n // 2, 2))
    X = np.vstack([X0, X1])
    y = np.array([0] * (n // 2) + [1] * (n - n // 2))
    return [Sample(X[i], int(y[i])) for i in range(n)]


def test_train_separable_blobs_logistic():
    tr = _blobs(200, 0)
    va = _blobs(60, 1)
    cfg = TrainConfig(lr_max=0.05, batch_size=32, epochs=20, patience=100,
                      seed=0)
    best, history = train(tr, va, "logistic", cfg)
    scores = forward_batch(best, np.stack([s.features for s in va]))
    labels = np.array([s.label for s in va])
    assert accuracy(scores, labels) >= 0.98
    assert len(history) >= 1


def test_train_mlp_xor_pattern():
    g = np.random.default_rng(5)
    X = g.uniform(-1, 1, (400, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
    samples = [Sample(X[i], int(y[i])) for i in range(400)]
    cfg = TrainConfig(lr_max=1e-2, batch_size=64, epochs=60,
                      patience=1000, seed=3)
    best, _ = train(samples[:300], samples[300:], "mlp", cfg, h=16)
    scores = forward_batch(best, X[300:])
    assert accuracy(scores, y[300:]) >= 0.9


def test_train_deterministic_history():
    tr, va = _blobs(100, 2), _blobs(40, 3)
    cfg = TrainConfig(batch_size=16, epochs=3, seed=7)
    _, h1 = train(tr, va, "logistic", cfg)
    _, h2 = train(tr, va, "logistic", cfg)
    assert h1 == h2


def test_train_history_val_acc_nan_before_first_eval():
    tr, va = _blobs(100, 2), _blobs(40, 3)
    # 7 batches of 16; first eval index is 0 -> every row should have a value
    cfg = TrainConfig(batch_size=16, epochs=1, evals_per_epoch=2, seed=0)
    _, hist = train(tr, va, "logistic", cfg)
    # evals at batch indices {2, 6}; rows 0..1 must be NaN
    assert math.isnan(hist[0][3]) and math.isnan(hist[1][3])
    assert not math.isnan(hist[2][3])


def test_train_early_stops_on_crafted_eval_stream():
    tr, va = _blobs(64, 4), _blobs(32, 5)
    # 4 batches/epoch, evals_per_epoch=4 -> eval at every batch.
    # stream: one improvement then flat -> stop after patience=3 stale evals,
    # i.e. at the 4th eval overall (batch index 3 of epoch 0).
    stream = iter([0.5] + [0.4] * 100)
    cfg = TrainConfig(batch_size=16, epochs=10, evals_per_epoch=4,
                      patience=3, seed=0)
    _, hist = train(tr, va, "logistic", cfg, _eval_fn=lambda m: next(stream))
    assert len(hist) == 4


def test_train_keeps_best_snapshot_not_last():
    tr, va = _blobs(64, 6), _blobs(32, 7)
    stream = iter([0.9] + [0.1] * 100)
    cfg = TrainConfig(batch_size=16, epochs=10, evals_per_epoch=4,
                      patience=50, seed=0)
    best, _ = train(tr, va, "logistic", cfg,
                    _eval_fn=lambda m: next(stream))
    # the best snapshot is from step 0: exactly one Adam step from zero init,
    # so every weight moved by at most lr(0)
    cfg0 = TrainConfig(batch_size=16, epochs=10, evals_per_epoch=4,
                       patience=50, seed=0)
    lr0 = onecycle_lr(0, 40, cfg0)
    assert np.all(np.abs(best.params["w"]) <= lr0 + 1e-12)


def test_train_accepts_array_tuples():
    tr, va = _blobs(80, 8), _blobs(40, 9)
    Xtr = np.stack([s.features for s in tr])
    ytr = np.array([s.label for s in tr])
    Xva = np.stack([s.features for s in va])
    yva = np.array([s.label for s in va])
    cfg = TrainConfig(batch_size=16, epochs=2, seed=1)
    _, h1 = train(tr, va, "logistic", cfg)
    _, h2 = train((Xtr, ytr), (Xva, yva), "logistic", cfg)
    assert h1 == h2


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def test_accuracy_examples():
    assert accuracy([0.9, 0.2, 0.6, 0.4], [1, 0, 1, 0]) == 1.0
    assert accuracy([0.9, 0.2], [0, 1]) == 0.0
    assert accuracy([0.5], [1]) == 1.0  # 0.5 predicts class 1
    assert accuracy([0.5], [0]) == 0.0


def test_roc_auc_examples():
    # scores: pos {0.8, 0.4}, neg {0.6, 0.1}: pairs won 3 of 4
    assert roc_auc([0.8, 0.4, 0.6, 0.1], [1, 1, 0, 0]) == pytest.approx(0.75)
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == pytest.approx(0.5)


def test_roc_auc_single_class_rejected():
    with pytest.raises(DegenerateMetricError):
        roc_auc([0.1, 0.9], [1, 1])


def _auc_brute(scores, labels):
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def test_roc_auc_matches_brute_force_with_ties():
    g = np.random.default_rng(10)
    for _ in range(50):
        n = int(g.integers(4, 40))
        scores = g.choice([0.1, 0.3, 0.5, 0.7, 0.9], size=n)
        labels = g.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        assert roc_auc(scores, labels) == pytest.approx(
            _auc_brute(scores, labels))


def test_roc_auc_invariant_to_monotone_transform_and_permutation():
    g = np.random.default_rng(11)
    scores = g.uniform(0, 1, 30)
    labels = g.integers(0, 2, 30)
    labels[0], labels[1] = 0, 1
    base = roc_auc(scores, labels)
    assert roc_auc(np.exp(3 * scores), labels) == pytest.approx(base)
    perm = g.permutation(30)
    assert roc_auc(scores[perm], labels[perm]) == pytest.approx(base)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path):
    m = init_model("mlp", 5, h=3, seed=4)
    path = str(tmp_path / "chk.json")
    save_checkpoint(path, m, extra={"note": "x"})
    back, doc = load_checkpoint(path)
    assert back.arch == "mlp" and back.d == 5 and back.h == 3
    assert doc["note"] == "x"
    for k in m.params:
        assert np.allclose(back.params[k], m.params[k], rtol=1e-8)
        assert back.params[k].shape == m.params[k].shape


def test_history_csv_format():
    text = history_to_csv([(0, 8e-5, 0.693, float("nan")), (1, 1e-4, 0.5, 0.75)])
    lines = text.strip().splitlines()
    assert lines[0] == "step,lr,train_loss,val_acc"
    assert lines[1] == "0,8e-05,0.693,nan"
    assert lines[2] == "1,0.0001,0.5,0.75"
