"""
Конфигурация запуска CLI

Плоский набор параметров: всё из TrainConfig плюс пути к данным и
результатам, выбор отображения и списки значений для sweep-команд.

Приоритет источников (от слабого к сильному):
    значения по умолчанию RunConfig < config_defaults.json < файл --config < флаги CLI
"""

import json
import typing
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from loguru import logger

import config
from data import SplitSpec
from error_handler import ConfigurationException
from file_utils import require_existing_file
from regularizers import RegularizerSpec
from training import TrainConfig
from types_models import RegularizerKind, parse_enum


@dataclass(frozen=True)
class RunConfig:
    """Все параметры запуска под именами флагов CLI (через подчёркивание)"""
    data: Optional[str] = None
    target_column: Optional[str] = None
    categorical: List[str] = field(default_factory=list)
    model: Optional[str] = None
    out: Optional[str] = None

    map: str = "poly"
    local_dim: int = 2
    rank: int = 5
    loss: str = "mse"
    reg: str = "none"
    alpha: float = 0.0
    beta: float = 2.0
    init: str = "random"
    sigma: float = config.DEFAULT_INIT_SIGMA
    optimizer: str = "adam"
    learning_rate: float = config.DEFAULT_LEARNING_RATE
    epochs: int = 10
    batch_size: int = config.DEFAULT_BATCH_SIZE
    seed: int = config.DEFAULT_SEED
    shuffle: bool = True
    metric: Optional[str] = None

    test_fraction: float = 0.2
    validation_fraction: float = 0.2

    d_values: List[int] = field(default_factory=lambda: [2, 3, 5, 10, 25])
    r_values: List[int] = field(default_factory=lambda: [5, 10, 20, 50])

    n_samples: int = 3000
    informative: int = 4
    noise_features: int = 3
    noise_std: float = 0.35

    def regularizer_spec(self) -> RegularizerSpec:
        kind = parse_enum(RegularizerKind, self.reg)
        if kind is RegularizerKind.NONE:
            return RegularizerSpec.none()
        return RegularizerSpec(kind, self.alpha, self.beta if kind is RegularizerKind.ORDER else None)

    def to_train_config(self, rank: Optional[int] = None) -> TrainConfig:
        return TrainConfig(
            rank=self.rank if rank is None else rank,
            epochs=self.epochs,
            batch_size=self.batch_size,
            optimizer=self.optimizer,
            learning_rate=self.learning_rate,
            loss=self.loss,
            regularizer=self.regularizer_spec(),
            init=self.init,
            sigma=self.sigma,
            seed=self.seed,
            shuffle=self.shuffle,
            metric=self.metric,
        )

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.test_fraction, self.validation_fraction, self.seed)

    def output_dir(self) -> Path:
        return Path(self.out) if self.out else Path(config.OUTPUT_DIR)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


_FIELD_TYPES = typing.get_type_hints(RunConfig)


def _coerce(key: str, value: Any) -> Any:
    """Приводит значение из JSON или CLI к типу поля RunConfig"""
    expected = _FIELD_TYPES[key]
    if value is None:
        return None
    try:
        if expected in (int, Optional[int]):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if expected in (float, Optional[float]):
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        if expected is bool:
            if isinstance(value, str):
                lowered = value.strip().lower()
                if lowered not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                return lowered in ("true", "1", "yes")
            if not isinstance(value, bool):
                raise ValueError(value)
            return value
        if expected == List[int]:
            if isinstance(value, str):
                value = [item for item in value.split(",") if item.strip()]
            return [_coerce_int_item(item) for item in value]
        if expected == List[str]:
            if isinstance(value, str):
                value = [item.strip() for item in value.split(",") if item.strip()]
            return [str(item) for item in value]
        return str(value)
    except (TypeError, ValueError):
        raise ConfigurationException(f"параметр '{key}': некорректное значение {value!r}")


def _coerce_int_item(item: Any) -> int:
    if isinstance(item, bool):
        raise ValueError(item)
    if isinstance(item, str):
        return int(item.strip())
    if isinstance(item, float) and not item.is_integer():
        raise ValueError(item)
    return int(item)


def _apply(base: RunConfig, values: Mapping[str, Any], source: str) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigurationException(f"{source}: неизвестные параметры {', '.join(unknown)}")
    updates = {key: _coerce(key, value) for key, value in values.items()}
    return replace(base, **updates)


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Читает плоский JSON-документ параметров

    Raises:
        FileNotFoundError: Файла нет
        ConfigurationException: Не JSON-объект или вложенные объекты
    """
    path = require_existing_file(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigurationException(f"файл конфигурации {path} не разобран: {e}")
    if not isinstance(document, dict):
        raise ConfigurationException(f"файл конфигурации {path} должен быть JSON-объектом")
    nested = [key for key, value in document.items() if isinstance(value, dict)]
    if nested:
        raise ConfigurationException(f"файл конфигурации {path} должен быть плоским: {', '.join(nested)}")
    return document


def load_run_config(
    cli_values: Optional[Mapping[str, Any]] = None,
    config_file: Optional[Union[str, Path]] = None,
    defaults_file: Optional[Union[str, Path]] = config.DEFAULT_CONFIG_FILE
) -> RunConfig:
    """
    Собирает RunConfig из всех источников

    Args:
        cli_values: Явно заданные флаги (значения None пропускаются)
        config_file: Файл --config
        defaults_file: Файл значений по умолчанию проекта (если существует)

    Returns:
        RunConfig
    """
    run_config = RunConfig()
    if defaults_file is not None and Path(defaults_file).is_file():
        run_config = _apply(run_config, read_config_file(defaults_file), str(defaults_file))
        logger.debug(f"📋 Значения по умолчанию из {defaults_file}")
    if config_file is not None:
        run_config = _apply(run_config, read_config_file(config_file), str(config_file))
        logger.debug(f"📋 Конфигурация из {config_file}")
    if cli_values:
        explicit = {key: value for key, value in cli_values.items() if value is not None}
        run_config = _apply(run_config, explicit, "командная строка")
    return run_config
