import json

import numpy as np
import pytest

from bookchat import mlcore
from bookchat.lexicon import FeatureVector
from bookchat.mlcore import (
    Hyperparams,
    Model,
    ModelError,
    ModelSpec,
    TrainingError,
    forward,
    grad_check,
    load_model,
    save_model,
    train,
    zero_model,
)


def raw_spec(dim, hidden=0, task="regression", output_range=None):
    return ModelSpec(
        input_dim=dim, hidden_dim=hidden, output_dim=1, task=task,
        feature_schema_id=f"raw/{dim}", output_range=output_range,
    )


def random_model(rng, dim, hidden, task):
    spec = raw_spec(dim, hidden, task)
    model = zero_model(spec)
    for name in model.weights:
        model.weights[name] = rng.normal(size=model.weights[name].shape)
    return model


# ---------------------------------------------------------------------------
# forward

def test_zero_binary_model_outputs_half():
    model = zero_model(raw_spec(3, task="binary_classification"))
    for x in ([0, 0, 0], [1, -2, 3], [100, 100, 100]):
        assert forward(model, np.array(x, dtype=float)) == 0.5


def test_linear_forward_is_dot_product():
    model = zero_model(raw_spec(3))
    model.weights["w"] = np.array([1.0, 2.0, 3.0])
    model.weights["b"] = np.array(0.5)
    assert forward(model, np.array([1.0, 1.0, 1.0])) == pytest.approx(6.5)


def test_forward_matches_independent_formulas():
    # second implementation of both formulas, written with plain loops
    rng = np.random.default_rng(42)
    for hidden in (0, 5):
        for task in ("regression", "binary_classification"):
            model = random_model(rng, 4, hidden, task)
            x = rng.normal(size=4)
            if hidden == 0:
                z = sum(model.weights["w"][i] * x[i] for i in range(4)) + float(model.weights["b"])
            else:
                a = [
                    np.tanh(sum(model.weights["w1"][j][i] * x[i] for i in range(4)) + model.weights["b1"][j])
                    for j in range(hidden)
                ]
                z = sum(model.weights["w2"][j] * a[j] for j in range(hidden)) + float(model.weights["b2"])
            expect = 1.0 / (1.0 + np.exp(-z)) if task == "binary_classification" else z
            assert forward(model, x, clamp=False) == pytest.approx(expect, rel=1e-12)


def test_forward_schema_mismatch_rejected():
    model = zero_model(raw_spec(3))
    fv = FeatureVector(values=np.zeros(2), schema_id="raw/2")
    with pytest.raises(ValueError):
        forward(model, fv)


def test_regression_clamp_applies_at_inference_only():
    model = zero_model(raw_spec(2, output_range=(-1.0, 1.0)))
    model.weights["w"] = np.array([10.0, 0.0])
    assert forward(model, np.array([1.0, 0.0])) == 1.0
    assert forward(model, np.array([1.0, 0.0]), clamp=False) == pytest.approx(10.0)


# ---------------------------------------------------------------------------
# train

def separable_set(n=80, seed=3):
    rng = np.random.default_rng(seed)
    data = []
    for _ in range(n):
        x = rng.normal(size=2)
        label = 1.0 if x[0] + x[1] > 0 else 0.0
        data.append((x + np.array([0.3, 0.3]) * (1 if label else -1), label))
    return data


def test_linear_classifier_fits_separable_data():
    data = separable_set()
    spec = raw_spec(2, task="binary_classification")
    model = train(spec, data, Hyperparams(learning_rate=0.5, epochs=200, batch_size=8, seed=0))
    correct = sum((forward(model, x) >= 0.5) == (y == 1.0) for x, y in data)
    assert correct / len(data) >= 0.95


def test_regression_fits_line():
    rng = np.random.default_rng(1)
    data = [(np.array([x]), 2.0 * x + 1.0) for x in rng.uniform(-1, 1, size=60)]
    spec = raw_spec(1)
    model = train(spec, data, Hyperparams(learning_rate=0.3, epochs=300, batch_size=8, seed=0))
    mse = np.mean([(forward(model, x) - y) ** 2 for x, y in data])
    assert mse < 1e-3


def test_training_is_bit_reproducible():
    data = separable_set()
    spec = raw_spec(2, task="binary_classification")
    hyper = Hyperparams(learning_rate=0.5, epochs=50, batch_size=8, seed=7)
    a = train(spec, data, hyper)
    b = train(spec, data, hyper)
    for name in a.weights:
        assert np.array_equal(a.weights[name], b.weights[name])
    assert a.train_meta == b.train_meta


def test_empty_dataset_rejected():
    with pytest.raises(TrainingError):
        train(raw_spec(2), [], Hyperparams())


def test_bad_classification_targets_rejected():
    with pytest.raises(TrainingError):
        train(raw_spec(1, task="binary_classification"), [(np.array([1.0]), 0.5)], Hyperparams())


def test_convex_loss_is_nonincreasing_with_small_lr():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 2))
    y = X @ np.array([1.5, -2.0]) + 0.3
    data = list(zip(X, y))
    spec = raw_spec(2)
    losses = []
    for epochs in (1, 5, 20, 80):
        m = train(spec, data, Hyperparams(learning_rate=0.01, epochs=epochs, batch_size=40, seed=0))
        losses.append(m.train_meta["final_loss"])
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


# ---------------------------------------------------------------------------
# grad_check

def test_grad_check_linear_model_is_tight():
    rng = np.random.default_rng(11)
    for task in ("regression", "binary_classification"):
        model = random_model(rng, 5, 0, task)
        x = rng.normal(size=5)
        target = 1.0 if task == "binary_classification" else rng.normal()
        assert grad_check(model, x, target) <= 1e-6


def test_grad_check_hidden_model():
    rng = np.random.default_rng(12)
    model = random_model(rng, 4, 6, "regression")
    x = rng.normal(size=4)
    assert grad_check(model, x, rng.normal()) <= 1e-4


def test_grad_check_degenerate_point_is_finite():
    model = zero_model(raw_spec(3))
    err = grad_check(model, np.zeros(3), 0.0)
    assert np.isfinite(err)


def test_grad_check_property_over_random_draws():
    rng = np.random.default_rng(99)
    for _ in range(30):
        hidden = int(rng.integers(0, 4))
        dim = int(rng.integers(1, 5))
        task = "binary_classification" if rng.random() < 0.5 else "regression"
        model = random_model(rng, dim, hidden, task)
        x = rng.normal(size=dim)
        target = float(rng.integers(0, 2)) if task == "binary_classification" else float(rng.normal())
        bound = 1e-6 if hidden == 0 else 1e-4
        assert grad_check(model, x, target) <= bound


# ---------------------------------------------------------------------------
# save / load

def test_save_load_roundtrip_preserves_outputs(tmp_path):
    rng = np.random.default_rng(21)
    model = random_model(rng, 6, 4, "regression")
    path = tmp_path / "m.json"
    save_model(model, path)
    loaded = load_model(path)
    for name in model.weights:
        assert np.array_equal(model.weights[name], np.atleast_1d(loaded.weights[name]).reshape(model.weights[name].shape))
    for _ in range(100):
        x = rng.normal(size=6)
        assert forward(model, x) == forward(loaded, x)


def test_load_wrong_schema_rejected(tmp_path):
    model = zero_model(raw_spec(2))
    path = tmp_path / "m.json"
    save_model(model, path)
    with pytest.raises(ModelError):
        load_model(path, expect_schema="raw/999")


def test_load_corrupted_file_rejected(tmp_path):
    path = tmp_path / "m.json"
    path.write_text("{not json")
    with pytest.raises(ModelError):
        load_model(path)
    path.write_text(json.dumps({"format": "something-else"}))
    with pytest.raises(ModelError):
        load_model(path)


def test_spec_validation():
    with pytest.raises(ModelError):
        ModelSpec(input_dim=0, hidden_dim=0, output_dim=1, task="regression", feature_schema_id="raw/0")
    with pytest.raises(ModelError):
        ModelSpec(input_dim=2, hidden_dim=0, output_dim=2, task="binary_classification", feature_schema_id="raw/2")
    with pytest.raises(ModelError):
        ModelSpec(input_dim=2, hidden_dim=0, output_dim=1, task="clustering", feature_schema_id="raw/2")
