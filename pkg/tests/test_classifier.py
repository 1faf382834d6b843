import numpy as np
import pytest

from prospectnet.autoencoder import AutoencoderConfig, build_autoencoder, encode_batch, freeze, train_autoencoder
from prospectnet.classifier import (
    ARCHITECTURES,
    ClassifierModel,
    TrainConfig,
    build_classifier,
    classify,
    ffn_inputs,
    load_classifier,
    predict_proba,
    save_classifier,
    threshold,
    train_classifier,
)
from prospectnet.metrics import compute_metrics
from prospectnet.nn import PROB_EPS, ClassWeights, OptimizerConfig, forward

FAST_SGD = OptimizerConfig(learning_rate=0.01, momentum=0.92)


def small_encoder(d, seed=0, x=None):
    cfg = AutoencoderConfig(encoded_size=4, first_width=16, epochs=2, seed=seed)
    model = train_autoencoder(x, cfg)[0] if x is not None else build_autoencoder(d, cfg, np.random.default_rng(seed))
    return freeze(model)


def overlap_data(n=1200, d=6, shift=0.8, seed=0):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.2).astype(np.int8)
    x = rng.normal(size=(n, d)) + shift * y[:, None]
    return x, y


def test_architecture_widths():
    assert ARCHITECTURES["A512"] == (512, 256, 128, 64)
    assert ARCHITECTURES["A2048"] == (2048, 1024, 512, 256, 128, 64)
    assert ARCHITECTURES["A4096"] == (4096, 64)
    with pytest.raises(ValueError):
        TrainConfig(architecture="A1024")
    assert TrainConfig(hidden=[8, 4]).architecture_id == "custom-8-4"


def test_default_input_width_for_wide_data():
    enc = freeze(build_autoencoder(734, AutoencoderConfig(), np.random.default_rng(0)))
    model = build_classifier(enc, TrainConfig(), np.random.default_rng(0))
    assert model.ffn.widths == [766, 4096, 64, 1]
    hidden = model.ffn.layers[:-1]
    assert all(l.batch_norm is not None and l.dropout_p == 0.5 and l.activation == "relu" for l in hidden)
    out = model.ffn.layers[-1]
    assert out.batch_norm is None and out.dropout_p == 0.0 and out.activation == "sigmoid"


def test_model_rejects_wrong_widths():
    enc = small_encoder(6)
    good = build_classifier(enc, TrainConfig(hidden=(8,)), np.random.default_rng(0))
    other = build_classifier(small_encoder(7), TrainConfig(hidden=(8,)), np.random.default_rng(0))
    with pytest.raises(ValueError):
        ClassifierModel(enc, other.ffn)
    assert good.ffn.widths == [10, 8, 1]


def test_encoder_must_be_frozen_and_data_two_class():
    x, y = overlap_data(100)
    enc = build_autoencoder(6, AutoencoderConfig(encoded_size=4, first_width=16), np.random.default_rng(0))
    with pytest.raises(ValueError, match="frozen"):
        train_classifier((x, y), enc, TrainConfig(hidden=(8,), epochs=1))
    freeze(enc)
    with pytest.raises(ValueError, match="both classes"):
        train_classifier((x, np.zeros(100)), enc, TrainConfig(hidden=(8,), epochs=1))


def test_separable_data_gives_high_training_recall():
    x, y = overlap_data(1000, shift=5.0, seed=1)
    enc = small_encoder(6, x=x)
    model, _ = train_classifier((x, y), enc, TrainConfig(hidden=(32, 16), epochs=15, optimizer=FAST_SGD))
    assert compute_metrics(classify(model, x), y).recall >= 0.95


def test_heavy_positive_weight_trades_precision_for_recall():
    x, y = overlap_data(seed=2)
    enc = small_encoder(6, x=x)
    reports = []
    for w1 in (1.0, 100.0):
        cfg = TrainConfig(hidden=(32, 16), epochs=10, optimizer=FAST_SGD, class_weights=ClassWeights(1.0, w1))
        model, _ = train_classifier((x, y), enc, cfg)
        reports.append(compute_metrics(classify(model, x), y))
    assert reports[1].recall > reports[0].recall
    assert reports[1].precision < reports[0].precision


def test_training_recall_non_decreasing_in_weight_ratio():
    x, y = overlap_data(seed=3)
    enc = small_encoder(6, x=x)
    recalls = []
    for w1 in (1.0, 2.0, 4.0, 8.0):
        cfg = TrainConfig(hidden=(32, 16), epochs=10, optimizer=FAST_SGD, class_weights=ClassWeights(1.0, w1))
        model, _ = train_classifier((x, y), enc, cfg)
        recalls.append(compute_metrics(classify(model, x), y).recall)
    assert all(a <= b for a, b in zip(recalls, recalls[1:])), recalls


def test_same_seed_same_parameters_and_frozen_encoder_untouched():
    x, y = overlap_data(400, seed=4)
    enc = small_encoder(6, x=x)
    before = [p.copy() for p in enc.parameters()]
    codes = encode_batch(enc, x)
    cfg = TrainConfig(hidden=(16,), epochs=3, optimizer=FAST_SGD, seed=9)
    (a, ta), (b, tb) = train_classifier((x, y), enc, cfg), train_classifier((x, y), enc, cfg)
    assert ta == tb
    assert all(np.array_equal(p, q) for p, q in zip(a.ffn.parameters(), b.ffn.parameters()))
    assert all(np.array_equal(p, q) for p, q in zip(before, enc.parameters()))
    assert sum(float(np.abs(p - q).sum()) for p, q in zip(before, enc.parameters())) == 0.0
    assert np.array_equal(encode_batch(enc, x), codes)


def test_predict_proba_contracts():
    x, y = overlap_data(300, seed=5)
    enc = small_encoder(6, x=x)
    model, _ = train_classifier((x, y), enc, TrainConfig(hidden=(16, 8), epochs=2, optimizer=FAST_SGD))
    p = predict_proba(model, x)
    assert p.shape == (300,)
    assert np.all((p >= PROB_EPS) & (p <= 1 - PROB_EPS))
    dup = predict_proba(model, np.vstack([x[:1], x[:1]]))
    assert dup[0] == dup[1]
    # compositional oracle: manual [x, encode(x)] through the raw ffn
    z = np.hstack([x, encode_batch(enc, x)])
    assert np.array_equal(z, ffn_inputs(enc, x))
    manual, _ = forward(model.ffn, z, mode="eval")
    assert np.max(np.abs(np.clip(manual.ravel(), PROB_EPS, 1 - PROB_EPS) - p)) <= 1e-12
    with pytest.raises(ValueError):
        predict_proba(model, x[:, :5])


def test_threshold_rules():
    assert threshold([0.4, 0.5, 0.6]).tolist() == [0, 1, 1]
    assert threshold(np.array([PROB_EPS, 0.5, 1 - 2 * PROB_EPS]), 1 - PROB_EPS / 2).sum() == 0
    for bad in (0.0, 1.0):
        with pytest.raises(ValueError):
            threshold([0.5], bad)
    rng = np.random.default_rng(0)
    probs, labels = rng.random(500), rng.integers(0, 2, 500)
    recalls = [compute_metrics(threshold(probs, t), labels).recall for t in np.linspace(0.95, 0.05, 19)]
    assert all(a <= b for a, b in zip(recalls, recalls[1:]))


def test_round_trip(tmp_path):
    x, y = overlap_data(300, seed=6)
    enc = small_encoder(6, x=x)
    model, _ = train_classifier((x, y), enc, TrainConfig(hidden=(16, 8), epochs=2, optimizer=FAST_SGD))
    path = tmp_path / "clf.pknn"
    save_classifier(path, model, meta={"seed": 0})
    loaded, meta = load_classifier(path)
    assert meta["seed"] == 0 and meta["architecture_id"] == "custom-16-8"
    assert loaded.encoder.frozen
    assert np.max(np.abs(predict_proba(loaded, x) - predict_proba(model, x))) <= 1e-6
