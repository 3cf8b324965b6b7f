"""
Типы данных и модели для CPPREDICTOR

Этот модуль содержит перечисления и типизированные структуры
документов, общие для всех модулей.
"""

from enum import Enum
from typing import Dict, List, Optional, TypedDict, Union

from error_handler import UsageException


# ========================================================================
# ENUMS - Перечисления
# ========================================================================

class MapKind(Enum):
    """Локальное отображение признака"""
    POLYNOMIAL = "poly"
    NORMALIZED_POLYNOMIAL = "poly-norm"
    CATEGORICAL = "categorical"


class RegularizerKind(Enum):
    """Тип штрафа на факторные матрицы"""
    NONE = "none"
    L2 = "l2"
    ORDER = "order"


class LossKind(Enum):
    """Функция потерь"""
    MSE = "mse"
    LOGISTIC_BCE = "bce"


class OptimizerKind(Enum):
    """Оптимизатор первого порядка"""
    SGD = "sgd"
    ADAM = "adam"


class InitKind(Enum):
    """Схема инициализации факторных матриц"""
    RANDOM = "random"
    LINEAR = "linear"


class Metric(Enum):
    """Метрика качества"""
    MSE = "mse"
    AUC = "auc"
    ACCURACY = "accuracy"


class FeatureKind(Enum):
    """Тип столбца в схеме данных"""
    DENSE = "dense"
    CATEGORICAL = "categorical"


def parse_enum(enum_cls, value: Union[str, Enum]):
    """
    Преобразует строку в значение перечисления

    Args:
        enum_cls: Класс перечисления
        value: Строковое значение или уже значение перечисления

    Returns:
        Значение перечисления

    Raises:
        UsageException: Если значение не поддерживается
    """
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(str(value).strip().lower())
    except ValueError:
        allowed = ", ".join(member.value for member in enum_cls)
        raise UsageException(f"недопустимое значение '{value}' для {enum_cls.__name__}: ожидается одно из {allowed}")


# ========================================================================
# TYPED DICTS - Типизированные документы
# ========================================================================

class FeatureSchemaDocument(TypedDict):
    """Описание одного столбца схемы"""
    name: str
    kind: str
    categories: Optional[List[str]]


class _PreprocessingFields(TypedDict):
    features: List[FeatureSchemaDocument]
    target_column: str
    means: Dict[str, float]
    stds: Dict[str, float]


class PreprocessingDocument(_PreprocessingFields, total=False):
    """Схема данных, статистики стандартизации и функция потерь обучения"""
    loss: str


class ModelDocument(TypedDict, total=False):
    """Структура файла модели"""
    format_version: int
    map_kind: str
    local_dims: List[int]
    rank: int
    factors: List[List[float]]
    preprocessing: PreprocessingDocument


class EpochRecord(TypedDict):
    """Строка отчёта об обучении"""
    epoch: int
    train_loss: float
    val_loss: Optional[float]
    val_metric: Optional[float]
    seconds: float


class SweepRow(TypedDict):
    """Строка таблицы sweep-экспериментов"""
    value: int
    best_val_metric: float
    best_epoch: int
    train_seconds: float
