"""
Модуль валидации для CPPREDICTOR

Проверка конфигурации запуска до начала работы: все ошибки собираются
списком, чтобы пользователь увидел их разом.
"""

from typing import List, Optional, Tuple

from loguru import logger

from error_handler import ConfigurationException, CpPredictorException
from run_config import RunConfig
from types_models import InitKind, LossKind, MapKind, Metric, OptimizerKind, RegularizerKind, parse_enum


# Команды и обязательные для них параметры
COMMANDS_REQUIRING_DATA = ("train", "evaluate", "predict", "sweep-d", "sweep-rank")
COMMANDS_REQUIRING_MODEL = ("evaluate", "predict", "inspect")


def _check_enum(enum_cls, value: Optional[str], name: str, errors: List[str]):
    if value is None:
        return
    try:
        parse_enum(enum_cls, value)
    except CpPredictorException:
        allowed = ", ".join(member.value for member in enum_cls)
        errors.append(f"{name}: '{value}' не входит в {{{allowed}}}")


def validate_hyperparameters(run_config: RunConfig) -> Tuple[bool, List[str]]:
    """
    Валидирует гиперпараметры обучения

    Returns:
        Tuple[bool, List[str]]: (валидность, список ошибок)
    """
    errors = []

    _check_enum(MapKind, run_config.map, "map", errors)
    _check_enum(LossKind, run_config.loss, "loss", errors)
    _check_enum(RegularizerKind, run_config.reg, "reg", errors)
    _check_enum(InitKind, run_config.init, "init", errors)
    _check_enum(OptimizerKind, run_config.optimizer, "optimizer", errors)
    _check_enum(Metric, run_config.metric, "metric", errors)

    if run_config.local_dim < 2:
        errors.append(f"local_dim должна быть >= 2, получено {run_config.local_dim}")
    if run_config.rank < 1:
        errors.append(f"rank должен быть >= 1, получено {run_config.rank}")
    if run_config.epochs < 0:
        errors.append(f"epochs должно быть >= 0, получено {run_config.epochs}")
    if run_config.batch_size < 1:
        errors.append(f"batch_size должен быть >= 1, получено {run_config.batch_size}")
    if not run_config.learning_rate > 0:
        errors.append(f"learning_rate должна быть > 0, получено {run_config.learning_rate}")
    if run_config.alpha < 0:
        errors.append(f"alpha должна быть >= 0, получено {run_config.alpha}")
    if run_config.reg == RegularizerKind.ORDER.value and not run_config.beta > 1:
        errors.append(f"порядковая регуляризация требует beta > 1, получено {run_config.beta}")
    if run_config.init == InitKind.RANDOM.value and not run_config.sigma > 0:
        errors.append(f"sigma должна быть > 0, получено {run_config.sigma}")
    if run_config.init == InitKind.LINEAR.value and run_config.map == MapKind.NORMALIZED_POLYNOMIAL.value:
        errors.append("init linear несовместима с map poly-norm (первый элемент отображения не равен 1)")
    for name in ("test_fraction", "validation_fraction"):
        value = getattr(run_config, name)
        if not 0 < value < 1:
            errors.append(f"{name} должна быть в (0, 1), получено {value}")

    return len(errors) == 0, errors


def validate_command_inputs(run_config: RunConfig, command: str) -> Tuple[bool, List[str]]:
    """
    Валидирует наличие входных файлов и списков для команды

    Returns:
        Tuple[bool, List[str]]: (валидность, список ошибок)
    """
    errors = []

    if command in COMMANDS_REQUIRING_DATA and not run_config.data:
        errors.append(f"команда {command} требует --data")
    if command in COMMANDS_REQUIRING_MODEL and not run_config.model:
        errors.append(f"команда {command} требует --model")
    if command == "sweep-d":
        if not run_config.d_values:
            errors.append("sweep-d требует непустой список --d-values")
        elif min(run_config.d_values) < 2:
            errors.append(f"все значения d должны быть >= 2: {run_config.d_values}")
        if run_config.map == MapKind.CATEGORICAL.value:
            errors.append("sweep-d применим только к полиномиальным отображениям")
    if command == "sweep-rank":
        if not run_config.r_values:
            errors.append("sweep-rank требует непустой список --r-values")
        elif min(run_config.r_values) < 1:
            errors.append(f"все значения R должны быть >= 1: {run_config.r_values}")
    if command == "gen-synthetic":
        if run_config.n_samples < 1 or run_config.informative < 1 or run_config.noise_features < 0:
            errors.append("gen-synthetic: n_samples и informative >= 1, noise_features >= 0")
        if run_config.noise_std < 0:
            errors.append(f"noise_std должна быть >= 0, получено {run_config.noise_std}")

    return len(errors) == 0, errors


def validate_run_config(run_config: RunConfig, command: str) -> Tuple[bool, List[str]]:
    """
    Полная проверка конфигурации запуска

    Returns:
        Tuple[bool, List[str]]: (валидность, список ошибок)
    """
    _, errors = validate_hyperparameters(run_config)
    _, input_errors = validate_command_inputs(run_config, command)
    errors.extend(input_errors)

    for error in errors:
        logger.debug(f"❌ {error}")
    return len(errors) == 0, errors


def require_valid_run_config(run_config: RunConfig, command: str):
    """
    Raises:
        ConfigurationException: Со всеми найденными ошибками через '; '
    """
    ok, errors = validate_run_config(run_config, command)
    if not ok:
        raise ConfigurationException("; ".join(errors))

