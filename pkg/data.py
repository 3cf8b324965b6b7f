"""
Данные для CPPREDICTOR

Чтение CSV (pandas), словарное кодирование категориальных столбцов,
стандартизация по обучающей выборке, разбиение train/validation/test и
генерация синтетической полиномиальной задачи регрессии.
"""

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from error_handler import ConfigurationException, DataException, PreprocessingError
from file_utils import require_existing_file, write_csv_atomic
from types_models import FeatureKind, FeatureSchemaDocument, PreprocessingDocument, parse_enum


# Минимальное стандартное отклонение плотного столбца
MIN_STD = 1e-12


# ========================================================================
# СХЕМА
# ========================================================================

@dataclass(frozen=True)
class FeatureSchema:
    """Описание столбца признака: плотный или категориальный со словарём"""
    name: str
    kind: FeatureKind = FeatureKind.DENSE
    categories: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_enum(FeatureKind, self.kind))
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))

    @property
    def cardinality(self) -> int:
        return len(self.categories)

    @property
    def is_categorical(self) -> bool:
        return self.kind is FeatureKind.CATEGORICAL

    def encode(self, value: str, line: Optional[int] = None) -> int:
        """
        Код категории по словарю

        Raises:
            DataException: Значение отсутствует в словаре (с его текстом)
        """
        try:
            return self.categories.index(str(value))
        except ValueError:
            raise DataException(f"неизвестная категория '{value}'", line, self.name)

    def to_document(self) -> FeatureSchemaDocument:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "categories": list(self.categories) if self.is_categorical else None,
        }

    @classmethod
    def from_document(cls, document: Dict) -> "FeatureSchema":
        return cls(
            name=str(document["name"]),
            kind=document.get("kind", "dense"),
            categories=tuple(document.get("categories") or ()),
        )


@dataclass(frozen=True)
class StandardizationStats:
    """Среднее и стандартное отклонение (по n) плотных столбцов обучающей выборки"""
    means: Dict[str, float]
    stds: Dict[str, float]


@dataclass(frozen=True)
class SyntheticPolynomial:
    """Коэффициенты, по которым сгенерирована синтетическая цель"""
    bias: float
    linear: Tuple[float, ...]
    pairwise: Dict[Tuple[int, int], float]
    noise_std: float

    def evaluate(self, informative_rows: np.ndarray) -> np.ndarray:
        """Значение полинома без шума"""
        rows = np.asarray(informative_rows, dtype=np.float64)
        result = self.bias + rows @ np.asarray(self.linear)
        for (i, j), coefficient in self.pairwise.items():
            result = result + coefficient * rows[:, i] * rows[:, j]
        return result


# ========================================================================
# DATASET
# ========================================================================

@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Набор данных: схема, матрица признаков (S, N) и цели

    Категориальные столбцы матрицы содержат целые коды категорий.
    """
    schema: Tuple[FeatureSchema, ...]
    rows: np.ndarray
    targets: np.ndarray
    target_column: str = "target"
    standardization_stats: Optional[StandardizationStats] = None
    generator: Optional[SyntheticPolynomial] = field(default=None, compare=False)

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64, copy=True)
        targets = np.array(self.targets, dtype=np.float64, copy=True).ravel()
        if rows.ndim == 1 and rows.size == 0:
            rows = rows.reshape(0, len(self.schema))
        if rows.ndim != 2 or rows.shape[1] != len(self.schema):
            raise DataException(f"матрица признаков формы {rows.shape} не соответствует схеме из {len(self.schema)} столбцов")
        if rows.shape[0] != targets.shape[0]:
            raise DataException(f"число строк {rows.shape[0]} не равно числу целей {targets.shape[0]}")
        for n, feature in enumerate(self.schema):
            if feature.is_categorical and rows.shape[0] > 0:
                column = rows[:, n]
                if np.any(column != np.floor(column)) or column.min() < 0 or column.max() >= feature.cardinality:
                    raise DataException("коды категорий вне словаря", column=feature.name)
        rows.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "targets", targets)

    @property
    def n_samples(self) -> int:
        return int(self.rows.shape[0])

    @property
    def n_features(self) -> int:
        return len(self.schema)

    @property
    def feature_names(self) -> List[str]:
        return [feature.name for feature in self.schema]

    @property
    def feature_matrix(self) -> np.ndarray:
        return self.rows

    def subset(self, indices: Sequence[int]) -> "Dataset":
        """Подвыборка строк в указанном порядке"""
        indices = np.asarray(indices, dtype=np.int64)
        return replace(self, rows=self.rows[indices], targets=self.targets[indices])

    def preprocessing_document(self) -> PreprocessingDocument:
        """Схема и статистики для сохранения рядом с моделью"""
        stats = self.standardization_stats
        return {
            "features": [feature.to_document() for feature in self.schema],
            "target_column": self.target_column,
            "means": dict(stats.means) if stats else {},
            "stds": dict(stats.stds) if stats else {},
        }


def schema_from_document(document: PreprocessingDocument) -> Tuple[Tuple[FeatureSchema, ...], StandardizationStats, str]:
    """Восстанавливает схему, статистики и имя цели из документа модели"""
    try:
        schema = tuple(FeatureSchema.from_document(item) for item in document["features"])
        stats = StandardizationStats(
            means={k: float(v) for k, v in document.get("means", {}).items()},
            stds={k: float(v) for k, v in document.get("stds", {}).items()},
        )
        return schema, stats, str(document.get("target_column", "target"))
    except (KeyError, TypeError, ValueError) as e:
        raise DataException(f"некорректное описание предобработки в файле модели: {e}")


# ========================================================================
# ЧТЕНИЕ CSV
# ========================================================================

def _read_frame(path: Union[str, Path]) -> pd.DataFrame:
    path = require_existing_file(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DataException(f"CSV без заголовка: {path}", line=1)
    except pd.errors.ParserError as e:
        raise DataException(f"ошибка разбора CSV {path}: {e}")
    except UnicodeDecodeError as e:
        raise DataException(f"CSV {path} не в UTF-8: {e.reason}")
    return frame


def read_header(path: Union[str, Path]) -> List[str]:
    """Имена столбцов CSV"""
    return list(_read_frame(path).columns)


def _parse_float_column(values: pd.Series, name: str) -> np.ndarray:
    """Строки -> float64; первая ошибка сообщается с номером строки файла"""
    stripped = values.str.strip()
    parsed = pd.to_numeric(stripped, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(parsed)
    if bad.any():
        position = int(np.flatnonzero(bad)[0])
        token = stripped.iloc[position]
        # +2: заголовок и нумерация с единицы
        line = position + 2
        if token == "":
            raise DataException("пропущенное значение", line, name)
        raise DataException(f"нечисловое значение '{token}'", line, name)
    return parsed


def _encode_column(values: pd.Series, feature: FeatureSchema) -> np.ndarray:
    codes = np.empty(len(values), dtype=np.float64)
    lookup = {category: index for index, category in enumerate(feature.categories)}
    for position, value in enumerate(values):
        if value == "":
            raise DataException("пропущенное значение", position + 2, feature.name)
        if value not in lookup:
            raise DataException(f"неизвестная категория '{value}'", position + 2, feature.name)
        codes[position] = lookup[value]
    return codes


def load_csv(
    path: Union[str, Path],
    target_column: Optional[str] = None,
    categorical_columns: Iterable[str] = ()
) -> Dataset:
    """
    Загружает CSV с заголовком в Dataset

    Args:
        path: Путь к UTF-8 CSV
        target_column: Имя столбца цели (по умолчанию последний столбец)
        categorical_columns: Столбцы, кодируемые словарём в порядке появления

    Returns:
        Dataset

    Raises:
        FileNotFoundError: Файла нет
        DataException: Ошибка разбора (строка/столбец), пропуски, нет столбца цели
    """
    frame = _read_frame(path)
    columns = list(frame.columns)
    if len(columns) < 2:
        raise DataException(f"CSV должен содержать хотя бы один признак и цель: {path}")

    target_column = target_column or columns[-1]
    if target_column not in columns:
        raise DataException(f"столбец цели не найден в {path}", column=target_column)
    categorical_columns = set(categorical_columns)
    unknown = categorical_columns - set(columns)
    if unknown:
        raise DataException(f"категориальный столбец не найден в {path}", column=sorted(unknown)[0])

    schema = []
    for name in columns:
        if name == target_column:
            continue
        if name in categorical_columns:
            values = frame[name]
            if (values == "").any():
                raise DataException("пропущенное значение", int(np.flatnonzero(values == "")[0]) + 2, name)
            schema.append(FeatureSchema(name, FeatureKind.CATEGORICAL, tuple(pd.unique(values))))
        else:
            schema.append(FeatureSchema(name, FeatureKind.DENSE))

    rows, targets = encode_with_schema(frame, schema, target_column)
    dataset = Dataset(schema=tuple(schema), rows=rows, targets=targets, target_column=target_column)
    logger.info(f"📥 Загружено {dataset.n_samples} строк, {dataset.n_features} признаков из {path}")
    return dataset


def encode_with_schema(
    frame: pd.DataFrame,
    schema: Sequence[FeatureSchema],
    target_column: Optional[str] = None
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Кодирует таблицу по готовой схеме (инференс на новых данных)

    Args:
        frame: Таблица со строковыми значениями
        schema: Схема обучающей выборки
        target_column: Имя цели; если столбца нет в таблице, цели = None

    Returns:
        (матрица признаков, цели или None)

    Raises:
        DataException: Нет столбца схемы или неизвестная категория
    """
    rows = np.empty((len(frame), len(schema)), dtype=np.float64)
    for n, feature in enumerate(schema):
        if feature.name not in frame.columns:
            raise DataException("в данных нет столбца признака", column=feature.name)
        values = frame[feature.name].astype(str)
        if feature.is_categorical:
            rows[:, n] = _encode_column(values, feature)
        else:
            rows[:, n] = _parse_float_column(values, feature.name)

    targets = None
    if target_column is not None and target_column in frame.columns:
        targets = _parse_float_column(frame[target_column].astype(str), target_column)
    return rows, targets


def load_csv_with_schema(
    path: Union[str, Path],
    schema: Sequence[FeatureSchema],
    target_column: Optional[str] = None,
    require_target: bool = False
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Читает CSV и кодирует его по схеме обученной модели"""
    frame = _read_frame(path)
    if require_target and (target_column is None or target_column not in frame.columns):
        raise DataException(f"в {path} нет столбца цели", column=target_column)
    return encode_with_schema(frame, schema, target_column)


def write_csv(dataset: Dataset, path: Union[str, Path]) -> Path:
    """Записывает Dataset в CSV (категории - исходными строками)"""
    header = dataset.feature_names + [dataset.target_column]

    def render(row: np.ndarray, target: float) -> List:
        values = []
        for value, feature in zip(row, dataset.schema):
            values.append(feature.categories[int(value)] if feature.is_categorical else float(value))
        values.append(float(target))
        return values

    return write_csv_atomic(path, header, (render(r, t) for r, t in zip(dataset.rows, dataset.targets)))


# ========================================================================
# СТАНДАРТИЗАЦИЯ
# ========================================================================

def standardize(train: Dataset) -> StandardizationStats:
    """
    Среднее и стандартное отклонение (делитель n) плотных столбцов

    Raises:
        PreprocessingError: Постоянный столбец (std <= 1e-12) или пустая выборка
    """
    if train.n_samples == 0:
        raise PreprocessingError("стандартизация по пустой выборке")
    means, stds = {}, {}
    for n, feature in enumerate(train.schema):
        if feature.is_categorical:
            continue
        column = train.rows[:, n]
        mean = float(np.mean(column))
        std = float(np.std(column))
        if not std > MIN_STD:
            raise PreprocessingError("постоянный столбец нельзя стандартизовать", column=feature.name)
        means[feature.name] = mean
        stds[feature.name] = std
    return StandardizationStats(means=means, stds=stds)


def standardize_rows(stats: StandardizationStats, schema: Sequence[FeatureSchema], rows: np.ndarray) -> np.ndarray:
    """Применяет статистики к матрице признаков (категориальные столбцы без изменений)"""
    result = np.array(rows, dtype=np.float64, copy=True)
    for n, feature in enumerate(schema):
        if feature.is_categorical:
            continue
        if feature.name not in stats.means:
            raise PreprocessingError("нет статистик стандартизации для столбца", column=feature.name)
        result[:, n] = (result[:, n] - stats.means[feature.name]) / stats.stds[feature.name]
    return result


def apply_standardization(stats: StandardizationStats, dataset: Dataset) -> Dataset:
    """Стандартизует набор статистиками обучающей выборки"""
    rows = standardize_rows(stats, dataset.schema, dataset.rows)
    return replace(dataset, rows=rows, standardization_stats=stats)


# ========================================================================
# РАЗБИЕНИЕ
# ========================================================================

@dataclass(frozen=True)
class SplitSpec:
    """Доли теста и валидации (валидация - от остатка после теста)"""
    test_fraction: float = 0.2
    validation_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        for name in ("test_fraction", "validation_fraction"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigurationException(f"{name} должна быть в (0, 1), получено {value}")


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def split(dataset: Dataset, spec: SplitSpec = SplitSpec()) -> Tuple[Dataset, Dataset, Dataset]:
    """
    Перемешивает строки и делит на train / validation / test

    10 строк при долях 0.2/0.2 дают 6/2/2.

    Raises:
        ConfigurationException: Одна из частей получается пустой
    """
    total = dataset.n_samples
    n_test = _round_half_up(total * spec.test_fraction)
    n_validation = _round_half_up((total - n_test) * spec.validation_fraction)
    n_train = total - n_test - n_validation
    if min(n_test, n_validation, n_train) < 1:
        raise ConfigurationException(
            f"разбиение {total} строк долями {spec.test_fraction}/{spec.validation_fraction} "
            f"даёт пустую часть ({n_train}/{n_validation}/{n_test})"
        )

    order = np.random.default_rng(spec.seed).permutation(total)
    test = dataset.subset(order[:n_test])
    validation = dataset.subset(order[n_test:n_test + n_validation])
    train = dataset.subset(order[n_test + n_validation:])
    logger.debug(f"✂️ Разбиение: train={n_train}, validation={n_validation}, test={n_test}")
    return train, validation, test


def prepare_splits(dataset: Dataset, spec: SplitSpec = SplitSpec()) -> Tuple[Dataset, Dataset, Dataset]:
    """Разбиение и стандартизация всех частей статистиками train"""
    train, validation, test = split(dataset, spec)
    stats = standardize(train)
    return tuple(apply_standardization(stats, part) for part in (train, validation, test))


# ========================================================================
# СИНТЕТИЧЕСКИЕ ДАННЫЕ
# ========================================================================

def generate_synthetic_poly(
    n_samples: int = 3000,
    informative: int = 4,
    noise_features: int = 3,
    noise_std: float = 0.35,
    seed: int = 0,
    linear_only: bool = False
) -> Dataset:
    """
    Регрессия: полином второй степени от informative признаков плюс шум

    Признаки - независимые N(0, 1); первые informative столбцов входят в
    полином, остальные noise_features - шумовые. Коэффициенты (свободный
    член, линейные и x_i x_j при i <= j) равномерны в [-1, 1].

    Args:
        n_samples: Число строк
        informative: Число информативных признаков
        noise_features: Число шумовых признаков
        noise_std: Стандартное отклонение шума цели
        seed: Зерно генератора
        linear_only: Без парных членов

    Returns:
        Dataset с заполненным полем generator
    """
    if min(n_samples, informative) < 1 or noise_features < 0:
        raise ConfigurationException("n_samples и informative должны быть >= 1, noise_features >= 0")
    if noise_std < 0:
        raise ConfigurationException(f"noise_std должна быть >= 0, получено {noise_std}")

    rng = np.random.default_rng(seed)
    bias = float(rng.uniform(-1.0, 1.0))
    linear = tuple(float(c) for c in rng.uniform(-1.0, 1.0, size=informative))
    pairwise = {}
    if not linear_only:
        for i in range(informative):
            for j in range(i, informative):
                pairwise[(i, j)] = float(rng.uniform(-1.0, 1.0))
    generator = SyntheticPolynomial(bias=bias, linear=linear, pairwise=pairwise, noise_std=float(noise_std))

    n_features = informative + noise_features
    rows = rng.standard_normal((n_samples, n_features))
    targets = generator.evaluate(rows[:, :informative]) + noise_std * rng.standard_normal(n_samples)

    schema = tuple(FeatureSchema(f"x{n + 1}") for n in range(n_features))
    logger.debug(f"🎲 Синтетические данные: {n_samples} строк, {informative}+{noise_features} признаков")
    return Dataset(schema=schema, rows=rows, targets=targets, target_column="y", generator=generator)
