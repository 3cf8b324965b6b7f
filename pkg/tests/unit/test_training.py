"""Тесты обучения: потери, метрики, оптимизаторы, инициализация, цикл fit"""

from dataclasses import replace

import numpy as np
import pytest

from cp_model import batch_prediction_gradient, extract_coefficient, predict_matrix
from data import Dataset, FeatureSchema, generate_synthetic_poly
from error_handler import (
    ConfigurationException, InputError, TrainingDivergedError, UndefinedMetricError,
)
from feature_maps import FeatureMapSpec
from oracle import materialize, scalar_finite_difference
from regularizers import RegularizerSpec, l2_gradient
from training import (
    AdamOptimizer, FitReport, LinearSolution, SgdOptimizer, TrainConfig, accuracy, bce_derivative,
    bce_loss, compute_metric, evaluate, fit, fit_linear_baseline, get_loss,
    init_linear, init_random, initialize_model, mse_loss, roc_auc,
)
from types_models import InitKind, LossKind, Metric


def _dense_dataset(rows, targets):
    rows = np.asarray(rows, dtype=float)
    schema = tuple(FeatureSchema(f"x{n + 1}") for n in range(rows.shape[1]))
    return Dataset(schema=schema, rows=rows, targets=targets)


# ========================================================================
# ПОТЕРИ И МЕТРИКИ
# ========================================================================

def test_mse_loss():
    assert mse_loss(np.array([1.0, 3.0]), np.array([0.0, 0.0])) == pytest.approx(5.0)


def test_bce_loss_stable_for_large_logits():
    predictions = np.array([800.0, -800.0])
    targets = np.array([1.0, 0.0])
    assert bce_loss(predictions, targets) == pytest.approx(0.0, abs=1e-12)
    assert np.isfinite(bce_loss(-predictions, targets))
    assert np.all(np.isfinite(bce_derivative(-predictions, targets)))


@pytest.mark.parametrize("kind", ["mse", "bce"])
def test_loss_derivatives_match_finite_differences(kind):
    loss = get_loss(kind)
    for prediction in (-2.0, -0.1, 0.3, 4.0):
        for target in (0.0, 1.0):
            numeric = scalar_finite_difference(
                lambda f: loss.value(np.array([f]), np.array([target])), prediction
            )
            assert loss.derivative(np.array([prediction]), np.array([target]))[0] == pytest.approx(numeric, rel=1e-6)


def test_roc_auc_matches_pair_counting(rng):
    for _ in range(20):
        scores = np.round(rng.standard_normal(40), 1)
        labels = (rng.uniform(size=40) > 0.5).astype(float)
        labels[:2] = [0.0, 1.0]
        positives, negatives = scores[labels == 1], scores[labels == 0]
        wins = sum((p > n) + 0.5 * (p == n) for p in positives for n in negatives)
        assert roc_auc(scores, labels) == pytest.approx(wins / (positives.size * negatives.size))


def test_roc_auc_of_random_scores_is_one_half(rng):
    scores = rng.standard_normal(10_000)
    labels = (rng.uniform(size=10_000) > 0.5).astype(float)
    assert abs(roc_auc(scores, labels) - 0.5) <= 0.03


def test_roc_auc_single_class():
    with pytest.raises(UndefinedMetricError):
        roc_auc(np.array([0.1, 0.2]), np.array([1.0, 1.0]))


def test_accuracy_thresholds():
    scores = np.array([-0.2, 0.2, 0.7])
    labels = np.array([0.0, 1.0, 1.0])
    assert accuracy(scores, labels) == pytest.approx(2 / 3)
    assert compute_metric(Metric.ACCURACY, scores, labels, LossKind.LOGISTIC_BCE) == pytest.approx(1.0)
    with pytest.raises(InputError):
        compute_metric("mse", np.array([]), np.array([]))


def test_evaluate_mse(rng, random_model):
    model = random_model(rng, 2, 3, 2)
    rows = rng.standard_normal((10, 2))
    targets = rng.standard_normal(10)
    data = _dense_dataset(rows, targets)
    expected = np.mean((predict_matrix(model, rows) - targets) ** 2)
    assert evaluate(model, data, "mse") == pytest.approx(expected)


# ========================================================================
# ОПТИМИЗАТОРЫ
# ========================================================================

def test_sgd_step_updates_in_place():
    params = [np.array([1.0, 2.0])]
    SgdOptimizer(0.5).step(params, [np.array([2.0, -2.0])])
    np.testing.assert_array_equal(params[0], [0.0, 3.0])


def test_adam_first_step_moves_by_learning_rate():
    params = [np.array([1.0, 1.0])]
    optimizer = AdamOptimizer(0.01, epsilon=1e-12)
    optimizer.step(params, [np.array([3.0, -0.5])])
    np.testing.assert_allclose(params[0], [0.99, 1.01], rtol=1e-9)
    assert optimizer.steps == 1


# ========================================================================
# КОНФИГУРАЦИЯ И ИНИЦИАЛИЗАЦИЯ
# ========================================================================

def test_train_config_validation():
    with pytest.raises(ConfigurationException):
        TrainConfig(rank=0)
    with pytest.raises(ConfigurationException):
        TrainConfig(rank=2, batch_size=0)
    with pytest.raises(ConfigurationException):
        TrainConfig(rank=2, learning_rate=0.0)
    assert TrainConfig(rank=2, loss="bce").validation_metric is Metric.AUC
    assert TrainConfig(rank=2).validation_metric is Metric.MSE


def test_init_random_is_seeded():
    spec = FeatureMapSpec.polynomial(3, 4)
    first = init_random(spec, 5, 0.2, seed=7)
    second = init_random(spec, 5, 0.2, seed=7)
    for a, b in zip(first.factors, second.factors):
        assert np.array_equal(a, b)
        assert a.shape == (4, 5)


def test_init_random_moments_and_seed_dependence():
    spec = FeatureMapSpec.polynomial(4, 5)
    model = init_random(spec, 500, 0.2, seed=3)
    entries = np.concatenate([f.ravel() for f in model.factors])
    assert entries.size == 10_000
    assert abs(entries.mean()) <= 0.01
    assert entries.std() == pytest.approx(0.2, rel=0.03)

    other = init_random(spec, 500, 0.2, seed=4)
    assert not all(np.array_equal(a, b) for a, b in zip(model.factors, other.factors))


def test_linear_baseline_recovers_linear_target():
    data = generate_synthetic_poly(n_samples=400, informative=3, noise_features=0,
                                   noise_std=0.0, seed=3, linear_only=True)
    spec = FeatureMapSpec.polynomial(3, 3)
    solution = fit_linear_baseline(data, spec)
    assert solution.bias == pytest.approx(data.generator.bias, abs=1e-6)
    for n in range(3):
        assert solution.weights[n][0] == pytest.approx(data.generator.linear[n], abs=1e-6)
        assert solution.weights[n][1] == pytest.approx(0.0, abs=1e-6)


def test_linear_baseline_max_power_zeroes_higher_powers(rng):
    data = _dense_dataset(rng.standard_normal((50, 2)), rng.standard_normal(50))
    solution = fit_linear_baseline(data, FeatureMapSpec.polynomial(2, 4), max_power=1)
    for weights in solution.weights:
        np.testing.assert_array_equal(weights[1:], [0.0, 0.0])


def test_linear_baseline_logistic(rng):
    rows = rng.standard_normal((300, 2))
    targets = (rows[:, 0] - 0.5 * rows[:, 1] + 0.3 * rng.standard_normal(300) > 0).astype(float)
    solution = fit_linear_baseline(_dense_dataset(rows, targets), FeatureMapSpec.polynomial(2, 2), loss="bce")
    assert solution.weights[0][0] > 0 > solution.weights[1][0]
    assert compute_metric("auc", solution.predict(rows), targets) > 0.9


def test_init_linear_reproduces_linear_model(rng):
    data = _dense_dataset(rng.standard_normal((60, 3)), rng.standard_normal(60))
    spec = FeatureMapSpec.polynomial(3, 3)
    solution = fit_linear_baseline(data, spec)
    model = init_linear(solution, spec, rank=5)
    rows = rng.standard_normal((25, 3))
    np.testing.assert_allclose(predict_matrix(model, rows), solution.predict(rows), rtol=1e-10, atol=1e-12)
    assert extract_coefficient(model, (1, 1, 0)) == 0.0
    assert extract_coefficient(model, (0, 2, 1)) == 0.0
    assert extract_coefficient(model, (0, 0, 0)) == pytest.approx(solution.bias)
    assert extract_coefficient(model, (0, 2, 0)) == pytest.approx(solution.weights[1][1])


def test_init_linear_categorical(rng):
    spec = FeatureMapSpec.categorical([3, 2])
    schema = (FeatureSchema("a", "categorical", ("p", "q", "r")), FeatureSchema("b", "categorical", ("u", "v")))
    rows = np.column_stack([rng.integers(0, 3, 40), rng.integers(0, 2, 40)])
    data = Dataset(schema=schema, rows=rows, targets=rng.standard_normal(40))
    solution = fit_linear_baseline(data, spec)
    model = init_linear(solution, spec, rank=2)
    np.testing.assert_allclose(predict_matrix(model, rows), solution.predict(rows), rtol=1e-10, atol=1e-12)


def _interaction_mask(shape):
    return (np.indices(shape) != 0).sum(axis=0) >= 2


def _check_linear_init(model, solution, rows):
    expected = solution.predict(rows)
    np.testing.assert_allclose(predict_matrix(model, rows), expected, rtol=1e-10, atol=1e-12)
    weights = materialize(model).weight_tensor.as_array()
    assert np.max(np.abs(weights[_interaction_mask(weights.shape)]), initial=0.0) <= 1e-12
    assert weights[(0,) * weights.ndim] == pytest.approx(solution.bias, rel=1e-12, abs=1e-12)


def test_init_linear_random_dense_solutions(rng):
    for _ in range(50):
        n_features = int(rng.integers(1, 11))
        max_d = max(d for d in (2, 3, 4) if d ** n_features <= 65_536)
        d = int(rng.integers(2, max_d + 1))
        spec = FeatureMapSpec.polynomial(n_features, d)
        solution = LinearSolution(bias=rng.standard_normal(),
                                  weights=tuple(rng.standard_normal(d - 1) for _ in range(n_features)),
                                  map_spec=spec)
        model = init_linear(solution, spec, rank=n_features)
        _check_linear_init(model, solution, rng.standard_normal((20, n_features)))


def test_init_linear_random_categorical_solutions(rng):
    for _ in range(50):
        cardinalities = [int(k) for k in rng.integers(1, 4, size=int(rng.integers(1, 6)))]
        spec = FeatureMapSpec.categorical(cardinalities)
        solution = LinearSolution(bias=rng.standard_normal(),
                                  weights=tuple(rng.standard_normal(k) for k in cardinalities),
                                  map_spec=spec)
        model = init_linear(solution, spec, rank=len(cardinalities))
        rows = np.column_stack([rng.integers(0, k, 20) for k in cardinalities])
        _check_linear_init(model, solution, rows)


def test_init_linear_preconditions(rng):
    data = _dense_dataset(rng.standard_normal((20, 3)), rng.standard_normal(20))
    spec = FeatureMapSpec.polynomial(3, 2)
    solution = fit_linear_baseline(data, spec)
    with pytest.raises(ConfigurationException):
        init_linear(solution, spec, rank=2)
    normalized = FeatureMapSpec.polynomial(3, 2, normalized=True)
    with pytest.raises(ConfigurationException):
        initialize_model(normalized, TrainConfig(rank=3, init=InitKind.LINEAR), data)
    with pytest.raises(ConfigurationException):
        initialize_model(spec, TrainConfig(rank=3, init=InitKind.LINEAR))


# ========================================================================
# ЦИКЛ ОБУЧЕНИЯ
# ========================================================================

def test_zero_epochs_returns_same_model(rng, random_model):
    model = random_model(rng, 2, 2, 2)
    data = _dense_dataset(rng.standard_normal((5, 2)), rng.standard_normal(5))
    trained, report = fit(model, data, TrainConfig(rank=2, epochs=0))
    assert trained is model
    assert report.epochs_completed == 0
    assert report.best()["epoch"] == 0


def test_fit_memorizes_single_sample():
    data = _dense_dataset([[0.5, -0.3]], [1.7])
    spec = FeatureMapSpec.polynomial(2, 2)
    train_config = TrainConfig(rank=2, epochs=500, batch_size=1, optimizer="sgd",
                               learning_rate=0.05, sigma=0.5, seed=0)
    model, report = fit(init_random(spec, 2, 0.5, seed=0), data, train_config)
    assert report.train_losses[-1] < 1e-6
    assert predict_matrix(model, [[0.5, -0.3]])[0] == pytest.approx(1.7, abs=1e-3)


def test_fit_is_deterministic_for_fixed_seed(rng):
    data = _dense_dataset(rng.standard_normal((40, 3)), rng.standard_normal(40))
    spec = FeatureMapSpec.polynomial(3, 3)
    train_config = TrainConfig(rank=3, epochs=3, batch_size=8, seed=11)
    first, _ = fit(init_random(spec, 3, seed=1), data, train_config)
    second, _ = fit(init_random(spec, 3, seed=1), data, train_config)
    for a, b in zip(first.factors, second.factors):
        assert np.array_equal(a, b)


def test_fit_does_not_modify_initial_model(rng, random_model):
    model = random_model(rng, 2, 2, 2, scale=0.3)
    before = [f.copy() for f in model.factors]
    data = _dense_dataset(rng.standard_normal((10, 2)), rng.standard_normal(10))
    fit(model, data, TrainConfig(rank=2, epochs=2, batch_size=4))
    for a, b in zip(before, model.factors):
        assert np.array_equal(a, b)


def test_single_full_batch_step_equals_gradient_step(rng, random_model):
    """Один шаг SGD по всей выборке: A - lr (∇ потери + ∇ штрафа)"""
    model = random_model(rng, 3, 3, 2, scale=0.5)
    rows = rng.standard_normal((12, 3))
    targets = rng.standard_normal(12)
    data = _dense_dataset(rows, targets)
    regularizer = RegularizerSpec.l2(0.1)
    train_config = TrainConfig(rank=2, epochs=1, batch_size=12, optimizer="sgd",
                               learning_rate=1e-3, shuffle=False, regularizer=regularizer)
    trained, _ = fit(model, data, train_config)

    weights = 2.0 * (predict_matrix(model, rows) - targets) / 12
    grads = batch_prediction_gradient(model.factors, model.map_spec, rows, weights)
    extra = l2_gradient(model, 0.1)
    for new, old, g, p in zip(trained.factors, model.factors, grads, extra):
        np.testing.assert_allclose(new, old - 1e-3 * (g + p), rtol=1e-12, atol=1e-14)


def test_first_order_loss_decrease(rng, random_model):
    model = random_model(rng, 3, 3, 2, scale=0.5)
    rows = rng.standard_normal((20, 3))
    targets = rng.standard_normal(20)
    data = _dense_dataset(rows, targets)
    lr = 1e-8
    train_config = TrainConfig(rank=2, epochs=1, batch_size=20, optimizer="sgd",
                               learning_rate=lr, shuffle=False)
    _, report = fit(model, data, train_config)

    weights = 2.0 * (predict_matrix(model, rows) - targets) / 20
    grads = batch_prediction_gradient(model.factors, model.map_spec, rows, weights)
    squared_norm = sum(float(np.sum(g * g)) for g in grads)
    decrease = report.initial["train_loss"] - report.train_losses[0]
    assert decrease == pytest.approx(lr * squared_norm, rel=1e-5, abs=1e-14)


def test_training_divergence_is_reported(rng):
    data = _dense_dataset(rng.standard_normal((100, 3)), 10.0 * rng.standard_normal(100))
    spec = FeatureMapSpec.polynomial(3, 3)
    train_config = TrainConfig(rank=3, epochs=5, batch_size=10, optimizer="sgd", learning_rate=1e6)
    with pytest.raises(TrainingDivergedError) as info:
        fit(init_random(spec, 3, seed=0), data, train_config)
    assert info.value.epoch >= 1


def test_fit_rejects_empty_and_mismatched_data(rng, random_model):
    model = random_model(rng, 2, 2, 2)
    with pytest.raises(InputError):
        fit(model, _dense_dataset(np.zeros((0, 2)), []), TrainConfig(rank=2))
    with pytest.raises(InputError):
        fit(model, _dense_dataset(np.zeros((3, 3)), [0.0, 1.0, 2.0]), TrainConfig(rank=2))


def test_no_degradation_after_linear_init():
    data = generate_synthetic_poly(n_samples=300, informative=2, noise_features=1, seed=5)
    spec = FeatureMapSpec.polynomial(3, 3)
    train_config = TrainConfig(rank=3, epochs=3, batch_size=300, optimizer="sgd",
                               learning_rate=1e-3, init=InitKind.LINEAR, shuffle=False)
    model = initialize_model(spec, train_config, data)
    _, report = fit(model, data, train_config)
    losses = [report.initial["train_loss"]] + report.train_losses
    assert all(b <= a * (1 + 1e-9) for a, b in zip(losses, losses[1:]))


def test_fit_report_with_validation(rng):
    rows = rng.standard_normal((60, 2))
    targets = (rows[:, 0] > 0).astype(float)
    train, validation = _dense_dataset(rows[:40], targets[:40]), _dense_dataset(rows[40:], targets[40:])
    spec = FeatureMapSpec.polynomial(2, 2)
    train_config = TrainConfig(rank=2, epochs=4, batch_size=8, loss="bce", learning_rate=0.05)
    _, report = fit(init_random(spec, 2, seed=0), train, train_config, validation)
    assert isinstance(report, FitReport)
    assert report.metric is Metric.AUC
    assert report.epochs_completed == 4
    assert [r["epoch"] for r in report.epochs] == [1, 2, 3, 4]
    assert all(0.0 <= value <= 1.0 for value in report.val_metrics)
    assert report.best()["val_metric"] == max(report.val_metrics + [report.initial["val_metric"]])
    assert len(report.csv_rows()) == 4
    assert report.total_seconds >= 0.0


def test_order_regularized_fit_stays_finite(rng):
    data = _dense_dataset(rng.standard_normal((50, 3)), rng.standard_normal(50))
    spec = FeatureMapSpec.polynomial(3, 4)
    train_config = replace(TrainConfig(rank=4, epochs=2, batch_size=10),
                           regularizer=RegularizerSpec.order(1e-3, 2.0))
    model, report = fit(init_random(spec, 4, seed=0), data, train_config)
    assert all(np.all(np.isfinite(f)) for f in model.factors)
    assert np.isfinite(report.train_losses[-1])
