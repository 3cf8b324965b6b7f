"""
Обучение CP-предиктора

Функции потерь и метрики, оптимизаторы SGD/Adam, инициализация
(случайная и по обученной линейной модели), линейный baseline и цикл
обучения по мини-батчам.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy import linalg as sla
from scipy.special import expit
from scipy.stats import rankdata

import config
from cp_model import (
    CpModel, batch_prediction_gradient, mode_projections,
    predictions_from_projections,
)
from data import Dataset
from error_handler import (
    ConfigurationException, InputError, NumericRangeError,
    TrainingDivergedError, UndefinedMetricError,
)
from feature_maps import FeatureMapSpec, map_batch
from monitoring import Stopwatch, monitor_performance
from regularizers import RegularizerSpec, build_b_vectors, penalty, penalty_gradient
from types_models import (
    EpochRecord, InitKind, LossKind, MapKind, Metric, OptimizerKind,
    RegularizerKind, parse_enum,
)


# ========================================================================
# ФУНКЦИИ ПОТЕРЬ
# ========================================================================

def mse_loss(predictions: np.ndarray, targets: np.ndarray) -> float:
    return float(np.mean((predictions - targets) ** 2))


def mse_derivative(predictions: np.ndarray, targets: np.ndarray) -> np.ndarray:
    return 2.0 * (predictions - targets)


def bce_loss(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Логистическая потеря по логитам: log(1 + e^f) - y f без переполнения"""
    return float(np.mean(np.logaddexp(0.0, predictions) - targets * predictions))


def bce_derivative(predictions: np.ndarray, targets: np.ndarray) -> np.ndarray:
    return expit(predictions) - targets


@dataclass(frozen=True)
class LossFunction:
    """Значение потери (среднее по строкам) и её производная по предсказанию"""
    kind: LossKind
    value: Callable[[np.ndarray, np.ndarray], float]
    derivative: Callable[[np.ndarray, np.ndarray], np.ndarray]


_LOSSES = {
    LossKind.MSE: LossFunction(LossKind.MSE, mse_loss, mse_derivative),
    LossKind.LOGISTIC_BCE: LossFunction(LossKind.LOGISTIC_BCE, bce_loss, bce_derivative),
}


def get_loss(kind) -> LossFunction:
    return _LOSSES[parse_enum(LossKind, kind)]


# ========================================================================
# МЕТРИКИ
# ========================================================================

def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """
    AUC как статистика Манна-Уитни (средние ранги при совпадениях)

    Raises:
        UndefinedMetricError: В метках только один класс
    """
    labels = np.asarray(labels, dtype=np.float64)
    positive = labels > 0.5
    n_pos = int(positive.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC не определена: в выборке только один класс")
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def accuracy(scores: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> float:
    predicted = np.asarray(scores) >= threshold
    return float(np.mean(predicted == (np.asarray(labels) > 0.5)))


def default_metric(loss) -> Metric:
    """MSE для регрессии, AUC для логистической потери"""
    return Metric.AUC if parse_enum(LossKind, loss) is LossKind.LOGISTIC_BCE else Metric.MSE


def higher_is_better(metric: Metric) -> bool:
    return metric in (Metric.AUC, Metric.ACCURACY)


def compute_metric(metric, scores: np.ndarray, targets: np.ndarray, loss=LossKind.MSE) -> float:
    """
    Метрика по готовым предсказаниям

    Для точности порог 0 для логитов (bce) и 0.5 для предсказаний MSE.
    """
    metric = parse_enum(Metric, metric)
    if len(targets) == 0:
        raise InputError("метрика на пустой выборке не определена")
    if metric is Metric.MSE:
        return mse_loss(scores, targets)
    if metric is Metric.AUC:
        return roc_auc(scores, targets)
    threshold = 0.0 if parse_enum(LossKind, loss) is LossKind.LOGISTIC_BCE else 0.5
    return accuracy(scores, targets, threshold)


def _predict_rows(factors: Sequence[np.ndarray], spec: FeatureMapSpec, rows: np.ndarray) -> np.ndarray:
    if rows.shape[0] == 0:
        return np.zeros(0)
    return predictions_from_projections(mode_projections(factors, spec, rows))


def evaluate(model: CpModel, data: Dataset, metric=Metric.MSE, loss=LossKind.MSE) -> float:
    """
    Качество модели на наборе данных

    Args:
        model: CP-модель
        data: Непустой набор
        metric: mse, auc или accuracy
        loss: Потеря, с которой обучалась модель (порог точности)

    Returns:
        float: Значение метрики

    Raises:
        UndefinedMetricError: AUC на одном классе
        NumericRangeError: Нечисловые предсказания
    """
    if data.n_samples == 0:
        raise InputError("оценка на пустом наборе данных")
    scores = _predict_rows(model.factors, model.map_spec, data.feature_matrix)
    if not np.all(np.isfinite(scores)):
        raise NumericRangeError("предсказания модели содержат нечисловые значения")
    return compute_metric(metric, scores, data.targets, loss)


# ========================================================================
# ОПТИМИЗАТОРЫ
# ========================================================================

class SgdOptimizer:
    """Стохастический градиентный спуск с постоянным шагом"""

    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params: List[np.ndarray], grads: Sequence[np.ndarray]):
        for param, grad in zip(params, grads):
            param -= self.learning_rate * grad


class AdamOptimizer:
    """Adam с поправкой смещения моментов; состояние хранится на каждый фактор"""

    def __init__(self, learning_rate: float, beta1: float = config.DEFAULT_ADAM_BETA1,
                 beta2: float = config.DEFAULT_ADAM_BETA2, epsilon: float = config.DEFAULT_ADAM_EPSILON):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.first_moments: Optional[List[np.ndarray]] = None
        self.second_moments: Optional[List[np.ndarray]] = None
        self.steps = 0

    def step(self, params: List[np.ndarray], grads: Sequence[np.ndarray]):
        if self.first_moments is None:
            self.first_moments = [np.zeros_like(p) for p in params]
            self.second_moments = [np.zeros_like(p) for p in params]
        self.steps += 1
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps
        for param, grad, m, v in zip(params, grads, self.first_moments, self.second_moments):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            param -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.epsilon)


# ========================================================================
# КОНФИГУРАЦИЯ ОБУЧЕНИЯ
# ========================================================================

@dataclass(frozen=True)
class TrainConfig:
    """Гиперпараметры одного запуска обучения"""
    rank: int
    epochs: int = 10
    batch_size: int = config.DEFAULT_BATCH_SIZE
    optimizer: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = config.DEFAULT_LEARNING_RATE
    adam_beta1: float = config.DEFAULT_ADAM_BETA1
    adam_beta2: float = config.DEFAULT_ADAM_BETA2
    adam_epsilon: float = config.DEFAULT_ADAM_EPSILON
    loss: LossKind = LossKind.MSE
    regularizer: RegularizerSpec = field(default_factory=RegularizerSpec.none)
    init: InitKind = InitKind.RANDOM
    sigma: float = config.DEFAULT_INIT_SIGMA
    seed: int = config.DEFAULT_SEED
    shuffle: bool = True
    metric: Optional[Metric] = None

    def __post_init__(self):
        object.__setattr__(self, "optimizer", parse_enum(OptimizerKind, self.optimizer))
        object.__setattr__(self, "loss", parse_enum(LossKind, self.loss))
        object.__setattr__(self, "init", parse_enum(InitKind, self.init))
        if self.metric is not None:
            object.__setattr__(self, "metric", parse_enum(Metric, self.metric))
        if self.rank < 1:
            raise ConfigurationException(f"ранг должен быть >= 1, получено {self.rank}")
        if self.epochs < 0:
            raise ConfigurationException(f"число эпох должно быть >= 0, получено {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationException(f"размер батча должен быть >= 1, получено {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigurationException(f"скорость обучения должна быть > 0, получено {self.learning_rate}")
        if self.init is InitKind.RANDOM and not self.sigma > 0:
            raise ConfigurationException(f"sigma должна быть > 0, получено {self.sigma}")

    @property
    def validation_metric(self) -> Metric:
        return self.metric or default_metric(self.loss)

    def build_optimizer(self):
        if self.optimizer is OptimizerKind.SGD:
            return SgdOptimizer(self.learning_rate)
        return AdamOptimizer(self.learning_rate, self.adam_beta1, self.adam_beta2, self.adam_epsilon)


# ========================================================================
# ИНИЦИАЛИЗАЦИЯ
# ========================================================================

def init_random(map_spec: FeatureMapSpec, rank: int, sigma: float = config.DEFAULT_INIT_SIGMA,
                seed: int = config.DEFAULT_SEED) -> CpModel:
    """Все элементы факторов независимы и распределены N(0, sigma^2)"""
    if not sigma > 0:
        raise ConfigurationException(f"sigma должна быть > 0, получено {sigma}")
    if rank < 1:
        raise ConfigurationException(f"ранг должен быть >= 1, получено {rank}")
    rng = np.random.default_rng(seed)
    factors = tuple(rng.normal(0.0, sigma, size=(d, rank)) for d in map_spec.local_dims)
    return CpModel(factors=factors, map_spec=map_spec)


@dataclass(frozen=True)
class LinearSolution:
    """
    Линейная модель b + Σ_{n,j} w_{n,j} ψ^(j)(x_n)

    weights[n][j - 1] - вес функции ψ^(j) признака n (степень x^j для
    полиномиального отображения, индикатор категории j для категориального).
    """
    bias: float
    weights: Tuple[np.ndarray, ...]
    map_spec: FeatureMapSpec

    def __post_init__(self):
        weights = tuple(np.asarray(w, dtype=np.float64).ravel() for w in self.weights)
        if len(weights) != self.map_spec.n_features:
            raise ConfigurationException(
                f"число векторов весов {len(weights)} не равно числу признаков {self.map_spec.n_features}"
            )
        for n, (w, d) in enumerate(zip(weights, self.map_spec.local_dims)):
            if w.size != d - 1:
                raise ConfigurationException(f"признак {n}: {w.size} весов, ожидается d_n - 1 = {d - 1}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", float(self.bias))

    def predict(self, rows) -> np.ndarray:
        """Прямое вычисление линейной модели"""
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        result = np.full(rows.shape[0], self.bias)
        for n, w in enumerate(self.weights):
            result = result + _raw_features(rows[:, n], n, self.map_spec)[:, 1:] @ w
        return result


def _raw_features(column: np.ndarray, mode: int, spec: FeatureMapSpec) -> np.ndarray:
    """[1, ψ(x)...] для линейной модели; для нормированного отображения - сырые степени"""
    if spec.kind is MapKind.NORMALIZED_POLYNOMIAL:
        spec = FeatureMapSpec.polynomial(spec.n_features, spec.local_dims[0])
    return map_batch(column, mode, spec)


def init_linear(lin: LinearSolution, map_spec: FeatureMapSpec, rank: int) -> CpModel:
    """
    CP-модель, в точности воспроизводящая линейную модель

    Для фактора n: первая строка равна 1 в столбцах r < N (кроме r = n, где
    стоит b / N), строки j >= 1 столбца n содержат w_{n,j}, столбцы r >= N
    нулевые. Все коэффициенты взаимодействий порядка >= 2 равны нулю.

    Raises:
        ConfigurationException: R < N или отображение без единицы в начале
    """
    n_features = map_spec.n_features
    if not map_spec.has_unit_first_entry:
        raise ConfigurationException(
            f"инициализация линейной моделью требует отображения вида [1, ψ(x)...], получено {map_spec.kind.value}"
        )
    if rank < n_features:
        raise ConfigurationException(
            f"инициализация линейной моделью требует ранг R >= N: R={rank}, N={n_features}"
        )
    if lin.map_spec.local_dims != map_spec.local_dims:
        raise ConfigurationException("линейная модель обучена для другого отображения признаков")

    factors = []
    for n, d in enumerate(map_spec.local_dims):
        factor = np.zeros((d, rank))
        factor[0, :n_features] = 1.0
        factor[0, n] = lin.bias / n_features
        factor[1:, n] = lin.weights[n]
        factors.append(factor)
    return CpModel(factors=tuple(factors), map_spec=map_spec)


def _design_matrix(rows: np.ndarray, spec: FeatureMapSpec, max_power: Optional[int]) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Матрица [1, ψ...] и индексы её столбцов для каждого признака"""
    blocks = [np.ones((rows.shape[0], 1))]
    positions = []
    for n in range(spec.n_features):
        features = _raw_features(rows[:, n], n, spec)[:, 1:]
        keep = np.arange(features.shape[1])
        if max_power is not None and spec.kind is not MapKind.CATEGORICAL:
            keep = keep[:max_power]
        blocks.append(features[:, keep])
        positions.append(keep)
    return np.hstack(blocks), positions


def _solve_least_squares(design: np.ndarray, targets: np.ndarray) -> np.ndarray:
    gram = design.T @ design
    gram[np.diag_indices_from(gram)] += config.LINEAR_DAMPING
    try:
        solution = sla.solve(gram, design.T @ targets, assume_a='pos')
    except (sla.LinAlgError, ValueError) as e:
        raise NumericRangeError(f"нормальные уравнения не решаются: {e}")
    if not np.all(np.isfinite(solution)):
        raise NumericRangeError("решение нормальных уравнений содержит нечисловые значения")
    return solution


def _solve_logistic(design: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Градиентный спуск с шагом 1/L, L = λmax(X^T X / n) / 4"""
    n_samples = design.shape[0]
    gram = design.T @ design / n_samples
    lipschitz = 0.25 * float(sla.eigvalsh(gram)[-1])
    step = 1.0 / max(lipschitz, config.LINEAR_DAMPING)
    coefficients = np.zeros(design.shape[1])
    for iteration in range(config.LOGISTIC_MAX_ITER):
        gradient = design.T @ (expit(design @ coefficients) - targets) / n_samples
        if np.linalg.norm(gradient) <= config.LOGISTIC_GRAD_TOL:
            logger.debug(f"📉 Логистическая регрессия сошлась за {iteration} итераций")
            return coefficients
        coefficients = coefficients - step * gradient
    if not np.all(np.isfinite(coefficients)):
        raise NumericRangeError("логистическая регрессия разошлась")
    logger.warning(f"⚠️ Логистическая регрессия: достигнут предел {config.LOGISTIC_MAX_ITER} итераций")
    return coefficients


@monitor_performance("fit_linear_baseline")
def fit_linear_baseline(data: Dataset, map_spec: FeatureMapSpec, loss=LossKind.MSE,
                        max_power: Optional[int] = None) -> LinearSolution:
    """
    Линейная (логистическая) модель на признаках ψ^(j)(x_n)

    Args:
        data: Непустой обучающий набор
        map_spec: Отображение признаков, задающее ψ
        loss: mse - нормальные уравнения с демпфированием 1e-8; bce - градиентный спуск
        max_power: Использовать только степени ψ^(1..max_power) (полиномиальные
            отображения); веса остальных равны нулю

    Returns:
        LinearSolution
    """
    if data.n_samples == 0:
        raise InputError("линейная модель на пустом наборе данных")
    if data.n_features != map_spec.n_features:
        raise InputError(f"в данных {data.n_features} признаков, отображение ожидает {map_spec.n_features}")
    if max_power is not None and max_power < 1:
        raise ConfigurationException(f"max_power должна быть >= 1, получено {max_power}")

    design, positions = _design_matrix(data.feature_matrix, map_spec, max_power)
    if parse_enum(LossKind, loss) is LossKind.LOGISTIC_BCE:
        coefficients = _solve_logistic(design, data.targets)
    else:
        coefficients = _solve_least_squares(design, data.targets)

    weights = []
    offset = 1
    for n, keep in enumerate(positions):
        w = np.zeros(map_spec.local_dims[n] - 1)
        w[keep] = coefficients[offset:offset + keep.size]
        offset += keep.size
        weights.append(w)
    return LinearSolution(bias=float(coefficients[0]), weights=tuple(weights), map_spec=map_spec)


def initialize_model(map_spec: FeatureMapSpec, train_config: TrainConfig,
                     train: Optional[Dataset] = None) -> CpModel:
    """Начальная модель по схеме из TrainConfig (linear требует обучающих данных)"""
    if train_config.init is InitKind.LINEAR:
        if train is None:
            raise ConfigurationException("инициализация линейной моделью требует обучающих данных")
        if not map_spec.has_unit_first_entry:
            raise ConfigurationException(
                f"инициализация линейной моделью несовместима с отображением {map_spec.kind.value}"
            )
        if train_config.rank < map_spec.n_features:
            raise ConfigurationException(
                f"инициализация линейной моделью требует ранг R >= N: R={train_config.rank}, N={map_spec.n_features}"
            )
        solution = fit_linear_baseline(train, map_spec, train_config.loss)
        return init_linear(solution, map_spec, train_config.rank)
    return init_random(map_spec, train_config.rank, train_config.sigma, train_config.seed)


# ========================================================================
# ОТЧЁТ
# ========================================================================

REPORT_HEADER = ("epoch", "train_loss", "val_loss", "val_metric", "seconds")


@dataclass
class FitReport:
    """
    История обучения

    initial - состояние до первой эпохи; epochs - по записи на каждую
    завершённую эпоху.
    """
    metric: Metric
    loss: LossKind
    initial: EpochRecord
    epochs: List[EpochRecord] = field(default_factory=list)

    @property
    def epochs_completed(self) -> int:
        return len(self.epochs)

    @property
    def train_losses(self) -> List[float]:
        return [record["train_loss"] for record in self.epochs]

    @property
    def val_metrics(self) -> List[Optional[float]]:
        return [record["val_metric"] for record in self.epochs]

    @property
    def total_seconds(self) -> float:
        return float(sum(record["seconds"] for record in self.epochs))

    def best(self) -> EpochRecord:
        """Лучшая запись по метрике валидации (включая начальную)"""
        records = [r for r in [self.initial] + self.epochs if r["val_metric"] is not None]
        if not records:
            return self.epochs[-1] if self.epochs else self.initial
        key = (lambda r: r["val_metric"]) if higher_is_better(self.metric) else (lambda r: -r["val_metric"])
        return max(records, key=key)

    def csv_rows(self) -> List[Tuple]:
        return [
            (r["epoch"], r["train_loss"], r["val_loss"], r["val_metric"], r["seconds"])
            for r in self.epochs
        ]


# ========================================================================
# ЦИКЛ ОБУЧЕНИЯ
# ========================================================================

def _epoch_record(epoch: int, factors, spec: FeatureMapSpec, loss_fn: LossFunction,
                  train: Dataset, validation: Optional[Dataset], metric: Metric,
                  seconds: float) -> EpochRecord:
    train_loss = loss_fn.value(_predict_rows(factors, spec, train.feature_matrix), train.targets)
    val_loss = val_metric = None
    if validation is not None and validation.n_samples > 0:
        scores = _predict_rows(factors, spec, validation.feature_matrix)
        val_loss = loss_fn.value(scores, validation.targets)
        val_metric = compute_metric(metric, scores, validation.targets, loss_fn.kind)
    return {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss,
            "val_metric": val_metric, "seconds": seconds}


@monitor_performance("fit")
def fit(model: CpModel, train: Dataset, train_config: TrainConfig,
        validation: Optional[Dataset] = None) -> Tuple[CpModel, FitReport]:
    """
    Обучение мини-батчами: (1/S) Σ loss(f(x), y) + штраф на каждом шаге

    Порядок строк перемешивается каждую эпоху генератором из seed; при
    одинаковом seed результат детерминирован.

    Args:
        model: Начальная модель (не изменяется)
        train: Обучающий набор
        train_config: Гиперпараметры
        validation: Набор для поэпоховой метрики (необязательно)

    Returns:
        (обученная модель, FitReport)

    Raises:
        TrainingDivergedError: Нечисловая потеря (с номерами эпохи и батча)
    """
    spec = model.map_spec
    if train.n_features != spec.n_features:
        raise InputError(f"в данных {train.n_features} признаков, модель ожидает {spec.n_features}")
    if model.rank != train_config.rank:
        logger.debug(f"ℹ️ Ранг модели {model.rank} отличается от rank в конфигурации {train_config.rank}")

    loss_fn = get_loss(train_config.loss)
    metric = train_config.validation_metric
    regularizer = train_config.regularizer
    b_vectors = build_b_vectors(regularizer, spec) if regularizer.kind is RegularizerKind.ORDER else None
    optimizer = train_config.build_optimizer()
    rng = np.random.default_rng(train_config.seed)

    factors = model.writable_factors()
    rows, targets = train.feature_matrix, train.targets
    n_samples = train.n_samples

    if n_samples == 0:
        raise InputError("обучение на пустом наборе данных")
    with np.errstate(over='ignore', invalid='ignore'):
        report = FitReport(metric=metric, loss=loss_fn.kind,
                           initial=_epoch_record(0, factors, spec, loss_fn, train, validation, metric, 0.0))
    if train_config.epochs == 0:
        return model, report

    stopwatch = Stopwatch()
    for epoch in range(1, train_config.epochs + 1):
        order = rng.permutation(n_samples) if train_config.shuffle else np.arange(n_samples)
        for batch, start in enumerate(range(0, n_samples, train_config.batch_size)):
            indices = order[start:start + train_config.batch_size]
            batch_rows, batch_targets = rows[indices], targets[indices]
            with np.errstate(over='ignore', invalid='ignore'):
                projections = mode_projections(factors, spec, batch_rows)
                predictions = predictions_from_projections(projections)
                batch_loss = loss_fn.value(predictions, batch_targets) + penalty(factors, regularizer, b_vectors)
                if not np.isfinite(batch_loss):
                    raise TrainingDivergedError(epoch, batch, batch_loss)

                weights = loss_fn.derivative(predictions, batch_targets) / indices.size
                grads = batch_prediction_gradient(factors, spec, batch_rows, weights, projections)
                extra = penalty_gradient(factors, regularizer, b_vectors)
                if extra is not None:
                    grads = [g + p for g, p in zip(grads, extra)]
                if not all(np.all(np.isfinite(g)) for g in grads):
                    raise TrainingDivergedError(epoch, batch, float("nan"))
            optimizer.step(factors, grads)

        seconds = stopwatch.restart()
        with np.errstate(over='ignore', invalid='ignore'):
            record = _epoch_record(epoch, factors, spec, loss_fn, train, validation, metric, seconds)
        if not np.isfinite(record["train_loss"]):
            raise TrainingDivergedError(epoch, -1, record["train_loss"])
        report.epochs.append(record)
        stopwatch.restart()

        val_text = f", val {metric.value}={record['val_metric']:.6g}" if record["val_metric"] is not None else ""
        logger.info(f"📈 Эпоха {epoch}/{train_config.epochs}: train_loss={record['train_loss']:.6g}{val_text} ({seconds:.2f}s)")

    return model.with_factors(factors), report
