"""
CP-предиктор

Весовой тензор W всех взаимодействий признаков хранится неявно через
N факторных матриц A^(n) формы (d_n, R):

    f(x) = <Φ(x), W> = sum( ⊛_n φ(x_n)^T A^(n) )

Предсказание и градиенты по всем факторам стоят O(NRd); W и Φ(x)
материализуются только в oracle.py.
"""

import itertools
import json
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

import config
from error_handler import (
    InputError, ModelParseError, ModelValidationError, NumericRangeError,
)
from feature_maps import (
    FeatureMapSpec, category_indices, check_row, map_batch, map_feature,
    map_feature_row, _category_index,
)
from file_utils import require_existing_file, write_bytes_atomic
from linalg_core import Matrix
from types_models import MapKind, ModelDocument, parse_enum
from version import MODEL_FORMAT_VERSION


# ========================================================================
# МОДЕЛЬ
# ========================================================================

@dataclass(frozen=True)
class CpModel:
    """
    Факторные матрицы CP-представления весового тензора

    Массивы факторов копируются и помечаются только для чтения; обучение
    работает с собственными копиями и возвращает новую модель.
    """
    factors: Tuple[np.ndarray, ...]
    map_spec: FeatureMapSpec

    def __post_init__(self):
        factors = []
        for n, factor in enumerate(self.factors):
            array = np.array(factor, dtype=np.float64, copy=True)
            if array.ndim != 2:
                raise ModelValidationError(f"фактор {n}: ожидается матрица, получена размерность {array.ndim}")
            if not np.all(np.isfinite(array)):
                raise ModelValidationError(f"фактор {n} содержит нечисловые значения")
            array.setflags(write=False)
            factors.append(array)
        object.__setattr__(self, "factors", tuple(factors))

        if len(factors) != self.map_spec.n_features:
            raise ModelValidationError(
                f"число факторов {len(factors)} не равно числу признаков {self.map_spec.n_features}"
            )
        ranks = {factor.shape[1] for factor in factors}
        if len(ranks) != 1:
            raise ModelValidationError(f"факторы имеют разное число столбцов (ранг): {sorted(ranks)}")
        if factors[0].shape[1] < 1:
            raise ModelValidationError("ранг должен быть >= 1")
        for n, (factor, d) in enumerate(zip(factors, self.map_spec.local_dims)):
            if factor.shape[0] != d:
                raise ModelValidationError(f"фактор {n}: {factor.shape[0]} строк, ожидается d_n={d}")

    @property
    def rank(self) -> int:
        return int(self.factors[0].shape[1])

    @property
    def n_features(self) -> int:
        return len(self.factors)

    def with_factors(self, factors: Sequence[Matrix]) -> "CpModel":
        """Новая модель с тем же отображением и другими факторами"""
        return CpModel(factors=tuple(factors), map_spec=self.map_spec)

    def writable_factors(self) -> List[np.ndarray]:
        """Изменяемые копии факторов (для обучения)"""
        return [factor.copy() for factor in self.factors]


@dataclass(frozen=True)
class PredictionGradient:
    """Частные производные по каждой факторной матрице (формы как у A^(n))"""
    factors: Tuple[np.ndarray, ...]

    def __add__(self, other: "PredictionGradient") -> "PredictionGradient":
        return PredictionGradient(tuple(a + b for a, b in zip(self.factors, other.factors)))

    def scaled(self, coefficient: float) -> "PredictionGradient":
        return PredictionGradient(tuple(coefficient * g for g in self.factors))

    def frobenius_norms(self) -> List[float]:
        return [float(np.linalg.norm(g)) for g in self.factors]


# ========================================================================
# ПРЕДСКАЗАНИЕ (одна строка)
# ========================================================================

def _mode_vector(model: CpModel, mode: int, value: float) -> np.ndarray:
    """φ(x_n)^T A^(n) - вектор длины R"""
    factor = model.factors[mode]
    if model.map_spec.kind is MapKind.CATEGORICAL:
        index = _category_index(value, factor.shape[0] - 1)
        return factor[0] + factor[1 + index]
    return map_feature(value, mode, model.map_spec) @ factor


def predict(model: CpModel, x) -> float:
    """
    Предсказание модели для одной строки признаков

    Args:
        model: CP-модель
        x: N значений признаков (для категориальных - коды категорий)

    Returns:
        float: f(x)

    Raises:
        InputError: Число признаков не совпадает
        NumericRangeError: Нечисловой промежуточный результат
    """
    row = check_row(x, model.map_spec)
    product = np.ones(model.rank)
    with np.errstate(over='ignore', invalid='ignore'):
        for mode, value in enumerate(row):
            product = product * _mode_vector(model, mode, value)
        result = float(np.sum(product))
    if not np.isfinite(result):
        raise NumericRangeError("предсказание не является конечным числом")
    return result


def predict_batch(model: CpModel, rows: Sequence) -> List[float]:
    """
    Поэлементное применение predict с сохранением порядка

    Raises:
        Исключение первой ошибочной строки, с её номером в сообщении
    """
    predictions = []
    for index, row in enumerate(rows):
        try:
            predictions.append(predict(model, row))
        except (InputError, NumericRangeError) as e:
            raise type(e)(f"строка {index}: {e}") from e
    return predictions


# ========================================================================
# ГРАДИЕНТ ПРЕДСКАЗАНИЯ (одна строка)
# ========================================================================

def _excluded_products(vectors: List[np.ndarray], use_division: bool) -> List[np.ndarray]:
    """
    Для каждого n - произведение Адамара всех векторов, кроме n-го

    Префиксные/суффиксные произведения не делят на элементы; деление
    используется только по запросу и когда все |m_n| > DIVISION_SAFE_THRESHOLD.
    """
    if use_division and all(np.all(np.abs(v) > config.DIVISION_SAFE_THRESHOLD) for v in vectors):
        total = reduce(np.multiply, vectors)
        return [total / v for v in vectors]

    count = len(vectors)
    left = [np.ones_like(vectors[0])]
    for v in vectors[:-1]:
        left.append(left[-1] * v)
    right = [np.ones_like(vectors[0])] * count
    for n in range(count - 2, -1, -1):
        right[n] = right[n + 1] * vectors[n + 1]
    return [l * r for l, r in zip(left, right)]


def prediction_gradient(model: CpModel, x, use_division: bool = False) -> PredictionGradient:
    """
    Частные производные f(x) по всем A^(n): φ(x_n) (⊛_{k≠n} φ(x_k)^T A^(k))

    Args:
        model: CP-модель
        x: Строка признаков
        use_division: Разрешить быстрый путь с делением

    Returns:
        PredictionGradient
    """
    row = check_row(x, model.map_spec)
    phis = map_feature_row(row, model.map_spec)
    with np.errstate(over='ignore', invalid='ignore'):
        projections = [phi @ factor for phi, factor in zip(phis, model.factors)]
        others = _excluded_products(projections, use_division)
        grads = tuple(np.outer(phi, rest) for phi, rest in zip(phis, others))
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NumericRangeError("градиент предсказания содержит нечисловые значения")
    return PredictionGradient(grads)


# ========================================================================
# ВЕКТОРИЗОВАННЫЕ ВЕРСИИ (обучение и оценка)
# ========================================================================

def _as_feature_matrix(rows, spec: FeatureMapSpec) -> np.ndarray:
    matrix = np.asarray(rows, dtype=np.float64)
    if matrix.ndim == 1 and matrix.size == 0:
        return matrix.reshape(0, spec.n_features)
    if matrix.ndim != 2 or matrix.shape[1] != spec.n_features:
        raise InputError(f"ожидается матрица (S, {spec.n_features}), получена форма {matrix.shape}")
    return matrix


def mode_projections(factors: Sequence[np.ndarray], spec: FeatureMapSpec, rows) -> List[np.ndarray]:
    """
    Матрицы (S, R) со строками φ(x_n)^T A^(n) для каждого признака n

    Категориальные признаки обрабатываются выборкой строк A[0] + A[1 + k]
    без построения one-hot векторов.
    """
    rows = _as_feature_matrix(rows, spec)
    projections = []
    for mode, factor in enumerate(factors):
        column = rows[:, mode]
        if spec.kind is MapKind.CATEGORICAL:
            indices = category_indices(column, factor.shape[0] - 1)
            projections.append(factor[0][None, :] + factor[1 + indices])
        else:
            projections.append(map_batch(column, mode, spec) @ factor)
    return projections


def predictions_from_projections(projections: Sequence[np.ndarray]) -> np.ndarray:
    with np.errstate(over='ignore', invalid='ignore'):
        return np.sum(reduce(np.multiply, projections), axis=1)


def predict_matrix(model: CpModel, rows) -> np.ndarray:
    """
    Векторизованное предсказание для матрицы строк (S, N)

    Совпадает с predict до ошибок округления, но не побитово.
    """
    rows = _as_feature_matrix(rows, model.map_spec)
    if rows.shape[0] == 0:
        return np.zeros(0)
    predictions = predictions_from_projections(mode_projections(model.factors, model.map_spec, rows))
    if not np.all(np.isfinite(predictions)):
        raise NumericRangeError("предсказания содержат нечисловые значения")
    return predictions


def batch_prediction_gradient(
    factors: Sequence[np.ndarray],
    spec: FeatureMapSpec,
    rows,
    weights: np.ndarray,
    projections: Optional[List[np.ndarray]] = None
) -> List[np.ndarray]:
    """
    Взвешенная сумма градиентов предсказания по строкам батча

        G_n = sum_s weights[s] * φ(x_{s,n}) (⊛_{k≠n} φ(x_{s,k})^T A^(k))

    Суммирование по строкам выполняется матричным произведением в
    фиксированном порядке строк.

    Args:
        factors: Факторные матрицы
        spec: Отображение признаков
        rows: Матрица (S, N)
        weights: Веса строк (например dL/df / S)
        projections: Уже вычисленные mode_projections (необязательно)

    Returns:
        List[np.ndarray]: Градиенты по каждому фактору
    """
    rows = _as_feature_matrix(rows, spec)
    if projections is None:
        projections = mode_projections(factors, spec, rows)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1, 1)

    count = len(projections)
    with np.errstate(over='ignore', invalid='ignore'):
        left = [np.ones_like(projections[0])]
        for projection in projections[:-1]:
            left.append(left[-1] * projection)
        right = [np.ones_like(projections[0])] * count
        for n in range(count - 2, -1, -1):
            right[n] = right[n + 1] * projections[n + 1]

        grads = []
        for mode, factor in enumerate(factors):
            weighted = weights * left[mode] * right[mode]
            if spec.kind is MapKind.CATEGORICAL:
                indices = category_indices(rows[:, mode], factor.shape[0] - 1)
                grad = np.zeros_like(factor)
                grad[0] = weighted.sum(axis=0)
                np.add.at(grad, 1 + indices, weighted)
            else:
                grad = map_batch(rows[:, mode], mode, spec).T @ weighted
            grads.append(grad)
    return grads


# ========================================================================
# ИНТЕРПРЕТАЦИЯ
# ========================================================================

def _integral_index(index, mode: int) -> int:
    try:
        value = float(index)
    except (TypeError, ValueError):
        raise InputError(f"индекс моды {mode} должен быть целым, получено {index!r}")
    if not np.isfinite(value) or value != int(value):
        raise InputError(f"индекс моды {mode} должен быть целым, получено {index!r}")
    return int(value)


def extract_coefficient(model: CpModel, indices: Sequence[int]) -> float:
    """
    Коэффициент w_{i_1..i_N} весового тензора за O(NR)

    Индексы 0-базовые: (0, ..., 0) - свободный член для отображений вида
    [1, ψ(x)...], индекс j > 0 в моде n - функция ψ^(j)(x_n).

    Raises:
        InputError: Неверное число индексов или индекс вне диапазона
    """
    if len(indices) != model.n_features:
        raise InputError(f"ожидается {model.n_features} индексов, получено {len(indices)}")
    product = np.ones(model.rank)
    for mode, (index, factor) in enumerate(zip(indices, model.factors)):
        index = _integral_index(index, mode)
        if not 0 <= index < factor.shape[0]:
            raise InputError(f"индекс {index} моды {mode} вне диапазона [0, {factor.shape[0]})")
        product = product * factor[index]
    return float(np.sum(product))


def coefficient_table(model: CpModel, max_order: int = 2,
                      top: Optional[int] = None) -> List[Tuple[Tuple[int, ...], float]]:
    """
    Коэффициенты взаимодействий порядка не выше max_order

    Порядок взаимодействия - число ненулевых индексов. Результат
    отсортирован по убыванию модуля коэффициента.

    Args:
        model: CP-модель
        max_order: Максимальный порядок взаимодействия
        top: Сколько записей вернуть (None - все)

    Returns:
        List[Tuple[indices, value]]
    """
    n_features = model.n_features
    entries = []
    for order in range(0, min(max_order, n_features) + 1):
        for modes in itertools.combinations(range(n_features), order):
            ranges = [range(1, model.factors[m].shape[0]) for m in modes]
            for values in itertools.product(*ranges):
                indices = [0] * n_features
                for mode, value in zip(modes, values):
                    indices[mode] = value
                entries.append((tuple(indices), extract_coefficient(model, indices)))
    entries.sort(key=lambda item: -abs(item[1]))
    return entries[:top] if top is not None else entries


# ========================================================================
# СЕРИАЛИЗАЦИЯ
# ========================================================================

def to_document(model: CpModel, preprocessing: Optional[Dict[str, Any]] = None) -> ModelDocument:
    """Документ модели: версия формата, отображение, ранг, факторы построчно"""
    document: ModelDocument = {
        "format_version": MODEL_FORMAT_VERSION,
        "map_kind": model.map_spec.kind.value,
        "local_dims": list(model.map_spec.local_dims),
        "rank": model.rank,
        "factors": [[float(v) for v in factor.ravel(order='C')] for factor in model.factors],
    }
    if preprocessing is not None:
        document["preprocessing"] = preprocessing
    return document


def save(model: CpModel, preprocessing: Optional[Dict[str, Any]] = None) -> bytes:
    """Сериализует модель в UTF-8 JSON (побитово точный round-trip)"""
    text = json.dumps(to_document(model, preprocessing), ensure_ascii=False, indent=2)
    return (text + "\n").encode("utf-8")


def _require_int(document: Dict[str, Any], key: str) -> int:
    value = document.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ModelValidationError(f"поле '{key}' должно быть целым числом, получено {value!r}")
    return value


def load_document(payload: Union[bytes, str]) -> Tuple[CpModel, Optional[Dict[str, Any]]]:
    """
    Разбирает документ модели

    Returns:
        (CpModel, preprocessing или None)

    Raises:
        ModelParseError: Повреждённый JSON (с номером строки и столбца)
        ModelValidationError: Несогласованные поля или неизвестная версия
    """
    if isinstance(payload, bytes):
        try:
            payload = payload.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ModelParseError(f"документ модели не в UTF-8: {e.reason}") from e
    try:
        document = json.loads(payload)
    except json.JSONDecodeError as e:
        raise ModelParseError(f"повреждённый документ модели: {e.msg}", e.lineno, e.colno) from e

    if not isinstance(document, dict):
        raise ModelParseError("документ модели должен быть JSON-объектом", 1, 1)

    for key in ("format_version", "map_kind", "local_dims", "rank", "factors"):
        if key not in document:
            raise ModelValidationError(f"в документе модели нет поля '{key}'")

    version = _require_int(document, "format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelValidationError(f"неизвестная версия формата модели: {version}")

    rank = _require_int(document, "rank")
    local_dims = document["local_dims"]
    factors_data = document["factors"]
    if not isinstance(local_dims, list) or not all(isinstance(d, int) and not isinstance(d, bool) for d in local_dims):
        raise ModelValidationError("поле 'local_dims' должно быть списком целых чисел")
    if not isinstance(factors_data, list) or len(factors_data) != len(local_dims):
        raise ModelValidationError("число факторов не совпадает с длиной 'local_dims'")
    if rank < 1:
        raise ModelValidationError(f"ранг должен быть >= 1, получено {rank}")

    try:
        map_spec = FeatureMapSpec(kind=parse_enum(MapKind, document["map_kind"]), local_dims=tuple(local_dims))
    except Exception as e:
        raise ModelValidationError(f"некорректное описание отображения: {e}") from e

    factors = []
    for n, (data, d) in enumerate(zip(factors_data, local_dims)):
        if not isinstance(data, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in data):
            raise ModelValidationError(f"фактор {n} должен быть списком чисел")
        if len(data) != d * rank:
            raise ModelValidationError(
                f"фактор {n}: {len(data)} значений, ожидается d_n*R = {d}*{rank} = {d * rank}"
            )
        factors.append(np.asarray(data, dtype=np.float64).reshape(d, rank))

    model = CpModel(factors=tuple(factors), map_spec=map_spec)
    return model, document.get("preprocessing")


def load(payload: Union[bytes, str]) -> CpModel:
    """Разбирает документ модели (без данных предобработки)"""
    return load_document(payload)[0]


def save_model_file(path: Union[str, Path], model: CpModel,
                    preprocessing: Optional[Dict[str, Any]] = None) -> Path:
    """Атомарно сохраняет модель в файл"""
    path = write_bytes_atomic(path, save(model, preprocessing))
    logger.info(f"💾 Модель сохранена: {path} (N={model.n_features}, R={model.rank})")
    return path


def load_model_file(path: Union[str, Path]) -> Tuple[CpModel, Optional[Dict[str, Any]]]:
    """Загружает модель и данные предобработки из файла"""
    path = require_existing_file(path)
    model, preprocessing = load_document(path.read_bytes())
    logger.debug(f"📂 Модель загружена: {path}")
    return model, preprocessing
