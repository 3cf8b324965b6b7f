"""
Локальные отображения признаков φ: R -> R^d

Полиномиальное [1, x, ..., x^(d-1)], нормированное полиномиальное
(то же, делённое на евклидову норму) и категориальное [1, one-hot].
Признаки предполагаются стандартизованными (см. data.py), но здесь это
не проверяется.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from error_handler import ConfigurationException, InputError, NumericRangeError
from linalg_core import Matrix, Vector
from types_models import FeatureKind, MapKind, parse_enum


# ========================================================================
# СПЕЦИФИКАЦИЯ ОТОБРАЖЕНИЯ
# ========================================================================

@dataclass(frozen=True)
class FeatureMapSpec:
    """
    Какое отображение применяется к признакам и их локальные размерности

    Для полиномиальных отображений все d_n одинаковы и d >= 2; для
    категориального d_n = K_n + 1, где K_n - число категорий признака n.
    """
    kind: MapKind
    local_dims: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_enum(MapKind, self.kind))
        object.__setattr__(self, "local_dims", tuple(int(d) for d in self.local_dims))
        if len(self.local_dims) == 0:
            raise ConfigurationException("отображение должно описывать хотя бы один признак")
        if self.kind is MapKind.CATEGORICAL:
            bad = [d for d in self.local_dims if d < 2]
            if bad:
                raise ConfigurationException("категориальный признак должен иметь хотя бы одну категорию (K_n >= 1)")
        else:
            if len(set(self.local_dims)) != 1:
                raise ConfigurationException("полиномиальное отображение требует одинаковую d для всех признаков")
            if self.local_dims[0] < 2:
                raise ConfigurationException(f"локальная размерность d должна быть >= 2, получено {self.local_dims[0]}")

    @classmethod
    def polynomial(cls, n_features: int, d: int, normalized: bool = False) -> "FeatureMapSpec":
        kind = MapKind.NORMALIZED_POLYNOMIAL if normalized else MapKind.POLYNOMIAL
        return cls(kind=kind, local_dims=(d,) * n_features)

    @classmethod
    def categorical(cls, cardinalities: Sequence[int]) -> "FeatureMapSpec":
        return cls(kind=MapKind.CATEGORICAL, local_dims=tuple(int(k) + 1 for k in cardinalities))

    @classmethod
    def from_schema(cls, schema, kind, d: int = 2) -> "FeatureMapSpec":
        """
        Строит отображение по схеме датасета

        Args:
            schema: Список FeatureSchema (data.py)
            kind: Тип отображения для плотных признаков или categorical
            d: Локальная размерность для полиномиальных отображений

        Raises:
            ConfigurationException: Если схема смешанная или не подходит к kind
        """
        kind = parse_enum(MapKind, kind)
        kinds = {feature.kind for feature in schema}
        if len(kinds) > 1:
            raise ConfigurationException("датасеты со смешанными плотными и категориальными признаками не поддерживаются")
        if FeatureKind.CATEGORICAL in kinds:
            if kind is not MapKind.CATEGORICAL:
                raise ConfigurationException(f"категориальные признаки требуют --map categorical, получено {kind.value}")
            return cls.categorical([feature.cardinality for feature in schema])
        if kind is MapKind.CATEGORICAL:
            raise ConfigurationException("--map categorical требует категориальных признаков в данных")
        return cls(kind=kind, local_dims=(int(d),) * len(schema))

    @property
    def n_features(self) -> int:
        return len(self.local_dims)

    @property
    def cardinalities(self) -> Tuple[int, ...]:
        """K_n для категориального отображения"""
        return tuple(d - 1 for d in self.local_dims)

    @property
    def has_unit_first_entry(self) -> bool:
        """φ(x) имеет вид [1, ψ(x)...] (нужно для инициализации линейной моделью)"""
        return self.kind in (MapKind.POLYNOMIAL, MapKind.CATEGORICAL)


# ========================================================================
# СКАЛЯРНЫЕ ОТОБРАЖЕНИЯ
# ========================================================================

def _check_scalar(x: float) -> float:
    x = float(x)
    if not np.isfinite(x):
        raise InputError(f"значение признака не является конечным числом: {x}")
    return x


def _check_degree(d: int) -> int:
    if int(d) < 2:
        raise ConfigurationException(f"локальная размерность d должна быть >= 2, получено {d}")
    return int(d)


def map_polynomial(x: float, d: int) -> Vector:
    """
    Полиномиальное отображение [1, x, x^2, ..., x^(d-1)]

    Raises:
        InputError: x не конечно
        NumericRangeError: переполнение степеней
    """
    x = _check_scalar(x)
    d = _check_degree(d)
    with np.errstate(over='ignore', invalid='ignore'):
        result = np.power(x, np.arange(d, dtype=np.float64))
    if not np.all(np.isfinite(result)):
        raise NumericRangeError(f"переполнение в полиномиальном отображении: x={x}, d={d}")
    return result


def map_normalized_polynomial(x: float, d: int) -> Vector:
    """
    Полиномиальное отображение, нормированное на единичную длину

    Знаменатель sqrt(sum_k x^(2k)) считается прямым суммированием.
    """
    powers = map_polynomial(x, d)
    with np.errstate(over='ignore', invalid='ignore'):
        squared_norm = np.sum(powers * powers)
    if not np.isfinite(squared_norm):
        raise NumericRangeError(f"переполнение при нормировке: x={x}, d={d}")
    return powers / np.sqrt(squared_norm)


def map_categorical(value_index: int, cardinality: int) -> Vector:
    """
    Категориальное отображение [1, v^T], v - one-hot вектор длины cardinality

    Raises:
        InputError: индекс вне диапазона [0, cardinality)
    """
    index = _category_index(value_index, cardinality)
    result = np.zeros(int(cardinality) + 1)
    result[0] = 1.0
    result[1 + index] = 1.0
    return result


def _category_index(value_index, cardinality: int) -> int:
    value = float(value_index)
    if not np.isfinite(value) or value != int(value):
        raise InputError(f"код категории должен быть целым, получено {value_index}")
    index = int(value)
    if not 0 <= index < int(cardinality):
        raise InputError(f"код категории {index} вне диапазона [0, {cardinality})")
    return index


# ========================================================================
# ПРИМЕНЕНИЕ К СТРОКАМ И СТОЛБЦАМ
# ========================================================================

def map_feature(x: float, mode: int, spec: FeatureMapSpec) -> Vector:
    """Применяет отображение признака mode к значению x"""
    d = spec.local_dims[mode]
    if spec.kind is MapKind.POLYNOMIAL:
        return map_polynomial(x, d)
    if spec.kind is MapKind.NORMALIZED_POLYNOMIAL:
        return map_normalized_polynomial(x, d)
    return map_categorical(x, d - 1)


def check_row(row, spec: FeatureMapSpec) -> np.ndarray:
    """
    Приводит строку признаков к вектору float64 длины N

    Raises:
        InputError: Число признаков не совпадает со спецификацией
    """
    row = np.asarray(row, dtype=np.float64).ravel()
    if row.size != spec.n_features:
        raise InputError(f"ожидается {spec.n_features} признаков, получено {row.size}")
    return row


def map_feature_row(row, spec: FeatureMapSpec) -> List[Vector]:
    """Отображает все признаки строки: [φ(x_1), ..., φ(x_N)]"""
    row = check_row(row, spec)
    return [map_feature(value, mode, spec) for mode, value in enumerate(row)]


def category_indices(column, cardinality: int) -> np.ndarray:
    """
    Проверяет столбец кодов категорий и возвращает целочисленный массив

    Raises:
        InputError: Нецелые коды или коды вне диапазона
    """
    column = np.asarray(column, dtype=np.float64).ravel()
    if column.size == 0:
        return np.zeros(0, dtype=np.int64)
    if not np.all(np.isfinite(column)) or np.any(column != np.floor(column)):
        raise InputError("коды категорий должны быть целыми числами")
    indices = column.astype(np.int64)
    if indices.min() < 0 or indices.max() >= cardinality:
        bad = indices[(indices < 0) | (indices >= cardinality)][0]
        raise InputError(f"код категории {bad} вне диапазона [0, {cardinality})")
    return indices


def map_batch(column, mode: int, spec: FeatureMapSpec) -> Matrix:
    """
    Отображает столбец значений признака mode: матрица (S, d_mode)

    Для категориального отображения строится плотная матрица [1, one-hot];
    быстрый путь cp_model использует category_indices напрямую.
    """
    column = np.asarray(column, dtype=np.float64).ravel()
    d = spec.local_dims[mode]
    if spec.kind is MapKind.CATEGORICAL:
        indices = category_indices(column, d - 1)
        result = np.zeros((column.size, d))
        result[:, 0] = 1.0
        result[np.arange(column.size), 1 + indices] = 1.0
        return result

    if not np.all(np.isfinite(column)):
        raise InputError(f"признак {mode}: значения должны быть конечными числами")
    with np.errstate(over='ignore', invalid='ignore'):
        powers = np.power(column[:, None], np.arange(d, dtype=np.float64)[None, :])
        if spec.kind is MapKind.NORMALIZED_POLYNOMIAL:
            norms = np.sqrt(np.sum(powers * powers, axis=1, keepdims=True))
            powers = powers / norms
    if not np.all(np.isfinite(powers)):
        raise NumericRangeError(f"переполнение в отображении признака {mode} (d={d})")
    return powers
