"""
Централизованный модуль обработки ошибок для CPPREDICTOR

Обеспечивает единообразную иерархию исключений, логирование
и отображение ошибок на коды возврата CLI.
"""

import sys
import traceback
from typing import Optional
from loguru import logger

import config
from logger_setup import FILE_ONLY


# ========================================================================
# CUSTOM EXCEPTIONS - Специализированные исключения
# ========================================================================

class CpPredictorException(Exception):
    """Базовое исключение для всех ошибок CPPREDICTOR"""
    pass


class UsageException(CpPredictorException):
    """Неверное использование API или CLI"""
    pass


class ConfigurationException(CpPredictorException):
    """Ошибки конфигурации"""
    pass


class DimensionError(CpPredictorException):
    """Несогласованные размеры матриц или тензоров"""
    pass


class CapacityError(CpPredictorException):
    """Попытка материализовать слишком большой тензор"""
    pass


class InputError(CpPredictorException):
    """Некорректные входные данные (признаки, индексы)"""
    pass


class NumericRangeError(CpPredictorException):
    """Переполнение или нечисловые значения в вычислениях"""
    pass


class UndefinedMetricError(NumericRangeError):
    """Метрика не определена на данной выборке (например, AUC на одном классе)"""
    pass


class TrainingDivergedError(NumericRangeError):
    """Функция потерь стала нечисловой во время обучения"""

    def __init__(self, epoch: int, batch: int, value: float):
        self.epoch = epoch
        self.batch = batch
        self.value = value
        super().__init__(
            f"обучение расходится: loss={value} на эпохе {epoch}, батч {batch}"
        )


class ModelParseError(CpPredictorException):
    """Повреждённый документ модели"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        location = f" (строка {line}, столбец {column})" if line is not None else ""
        super().__init__(f"{message}{location}")


class ModelValidationError(CpPredictorException):
    """Документ модели разобран, но несогласован по форме"""
    pass


class DataException(CpPredictorException):
    """Ошибки чтения и разбора данных"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[str] = None):
        self.line = line
        self.column = column
        parts = []
        if line is not None:
            parts.append(f"строка {line}")
        if column is not None:
            parts.append(f"столбец '{column}'")
        location = f" ({', '.join(parts)})" if parts else ""
        super().__init__(f"{message}{location}")


class PreprocessingError(DataException):
    """Ошибки предобработки (стандартизация, схема)"""
    pass


# ========================================================================
# EXIT CODES - Коды возврата CLI
# ========================================================================

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_EXIT_CODES = (
    (UsageException, EXIT_USAGE),
    (ConfigurationException, EXIT_USAGE),
    (DataException, EXIT_DATA),
    (ModelParseError, EXIT_DATA),
    (ModelValidationError, EXIT_DATA),
    (InputError, EXIT_DATA),
    (FileNotFoundError, EXIT_DATA),
    (NumericRangeError, EXIT_NUMERIC),
    (CapacityError, EXIT_NUMERIC),
    (DimensionError, EXIT_NUMERIC),
)


def exit_code_for(exception: BaseException) -> int:
    """
    Возвращает код возврата CLI для исключения

    Args:
        exception: Исключение

    Returns:
        int: 1 - использование, 2 - данные, 3 - численная ошибка
    """
    for exc_type, code in _EXIT_CODES:
        if isinstance(exception, exc_type):
            return code
    return EXIT_USAGE


def format_error_line(exception: BaseException) -> str:
    """Однострочное машинно-разбираемое сообщение об ошибке"""
    message = " ".join(str(exception).split())
    return f"ERROR[{type(exception).__name__}]: {message}"


# ========================================================================
# ERROR HANDLERS - Обработчики ошибок
# ========================================================================

def handle_exception(
    exception: Exception,
    context: Optional[str] = None,
    critical: bool = False
) -> None:
    """
    Централизованная обработка исключений

    Args:
        exception: Исключение для обработки
        context: Контекст возникновения ошибки
        critical: Является ли ошибка критической
    """
    error_type = type(exception).__name__

    log_message = f"[{error_type}]"
    if context:
        log_message += f" в {context}"
    log_message += f": {exception}"

    if critical:
        logger.critical(log_message)
        logger.critical(f"Traceback:\n{traceback.format_exc()}")
    else:
        logger.error(log_message)
        if config.DEBUG_MODE:
            logger.debug(f"Traceback:\n{traceback.format_exc()}")


def report_cli_failure(exception: BaseException, context: Optional[str] = None) -> int:
    """
    Логирует ошибку CLI в файлы и печатает одну строку в stderr

    Консольный sink запись пропускает: единственная строка об ошибке
    в stderr - ERROR[<Исключение>]: <сообщение>.

    Args:
        exception: Исключение
        context: Имя команды

    Returns:
        int: Код возврата
    """
    with logger.contextualize(**{FILE_ONLY: True}):
        handle_exception(exception, context=context)
    print(format_error_line(exception), file=sys.stderr)
    return exit_code_for(exception)

