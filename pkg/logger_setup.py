"""
Настройка логирования CPPREDICTOR

Консоль (rich, если установлен и stderr - терминал) и файлы логов через
loguru. Всё диагностическое идёт в stderr: stdout занят результатами
команд predict, evaluate и inspect.
"""

import platform
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from loguru import logger

import config
from version import __version__

try:
    from rich.console import Console
    from rich.logging import RichHandler
    from rich.table import Table
    RICH_AVAILABLE = True
except ImportError:
    RICH_AVAILABLE = False


CONSOLE_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | <level>{message}</level>"
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} | {message}"

# (имя файла, минимальный уровень, ротация, срок хранения)
ERRORS_SINK = ("errors.log", "ERROR", "5 MB", "60 days")

# Записи с этим ключом в extra идут только в файлы
FILE_ONLY = "file_only"


def _console_filter(record) -> bool:
    return not record["extra"].get(FILE_ONLY, False)


class UnifiedLogger:
    """Набор sink'ов loguru для одного запуска CLI"""

    def __init__(self, use_rich: bool = False):
        self.use_rich = use_rich and RICH_AVAILABLE
        self.console = Console(stderr=True) if self.use_rich else None

    def setup(self, log_level: Optional[str] = None, log_file: Optional[str] = None,
              to_file: Optional[bool] = None):
        """
        Пересоздаёт sink'и loguru

        Args:
            log_level: Уровень консоли (по умолчанию config.LOG_LEVEL)
            log_file: Имя основного файла в config.LOGS_DIR
            to_file: Писать ли файлы (по умолчанию config.LOG_TO_FILE)
        """
        logger.remove()
        level = (log_level or config.LOG_LEVEL).upper()

        if self.console is not None:
            logger.add(RichHandler(console=self.console, rich_tracebacks=True, show_path=False),
                       format="{message}", level=level, filter=_console_filter)
        else:
            logger.add(sys.stderr, format=CONSOLE_FORMAT, level=level, colorize=True,
                       filter=_console_filter)

        if config.LOG_TO_FILE if to_file is None else to_file:
            self._add_file_sinks(Path(config.LOGS_DIR), log_file or config.LOG_FILE)

        logger.debug(f"📊 Уровень логирования: {level}")

    def _add_file_sinks(self, logs_dir: Path, log_file: str):
        logs_dir.mkdir(parents=True, exist_ok=True)
        sinks = [
            (log_file, "DEBUG", config.LOG_ROTATION, config.LOG_RETENTION),
            ERRORS_SINK,
        ]
        for name, level, rotation, retention in sinks:
            logger.add(logs_dir / name, format=FILE_FORMAT, level=level, rotation=rotation,
                       retention=retention, compression="zip", encoding="utf-8")
        logger.debug(f"📁 Логи пишутся в {logs_dir.absolute()}")


_unified_logger: Optional[UnifiedLogger] = None


def setup_logger(use_rich: Optional[bool] = None, log_level: Optional[str] = None,
                 log_file: Optional[str] = None, to_file: Optional[bool] = None) -> UnifiedLogger:
    """Настраивает логирование процесса; use_rich=None - по терминалу stderr"""
    global _unified_logger

    if use_rich is None:
        use_rich = RICH_AVAILABLE and sys.stderr.isatty()
    _unified_logger = UnifiedLogger(use_rich)
    _unified_logger.setup(log_level, log_file, to_file)
    return _unified_logger


def log_system_info(settings: Optional[Dict[str, Any]] = None):
    """Версии окружения и эффективная конфигурация запуска"""
    import numpy

    logger.info(f"🌟 CPPREDICTOR v{__version__}")
    logger.debug(f"💻 {platform.system()} {platform.release()}, Python {platform.python_version()}, numpy {numpy.__version__}")
    for key in sorted(settings or {}):
        logger.debug(f"  ✓ {key}: {settings[key]}")


def _render(value: Any) -> str:
    return f"{value:.6g}" if isinstance(value, float) else str(value)


def print_table(title: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]):
    """
    Таблица результатов в stderr (rich) или строками в лог

    Args:
        title: Заголовок
        columns: Названия столбцов
        rows: Строки значений
    """
    if not RICH_AVAILABLE:
        logger.info(f"📋 {title}: {' | '.join(columns)}")
        for row in rows:
            logger.info("   " + " | ".join(_render(v) for v in row))
        return

    table = Table(title=title)
    for column in columns:
        table.add_column(str(column), style="cyan")
    for row in rows:
        table.add_row(*[_render(v) for v in row])
    Console(stderr=True).print(table)
