"""
Утилиты для безопасной работы с файлами

Атомарная запись (временный файл + переименование) для документов
моделей, отчётов и таблиц экспериментов.
"""

import csv
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterable, Sequence, Union
from loguru import logger

WINDOWS = os.name == 'nt'


# ========================================================================
# АТОМАРНЫЕ ОПЕРАЦИИ
# ========================================================================

@contextmanager
def atomic_write(filepath: Union[str, Path], mode: str = 'w', encoding: str = 'utf-8'):
    """
    Контекстный менеджер для атомарной записи в файл

    Сначала записывает во временный файл, затем атомарно перемещает его.

    Args:
        filepath: Путь к целевому файлу
        mode: Режим открытия файла ('w' или 'wb')
        encoding: Кодировка файла (игнорируется для бинарного режима)

    Yields:
        file: Файловый объект для записи
    """
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)

    temp_fd, temp_path = tempfile.mkstemp(
        dir=filepath.parent,
        prefix=f".{filepath.name}.",
        suffix='.tmp'
    )

    try:
        if 'b' in mode:
            with os.fdopen(temp_fd, mode) as temp_file:
                yield temp_file
        else:
            with os.fdopen(temp_fd, mode, encoding=encoding, newline='') as temp_file:
                yield temp_file

        if WINDOWS and filepath.exists():
            filepath.unlink()

        Path(temp_path).replace(filepath)

    except BaseException:
        try:
            Path(temp_path).unlink()
        except OSError:
            pass
        raise


def write_bytes_atomic(filepath: Union[str, Path], payload: bytes) -> Path:
    """
    Атомарно записывает байты в файл

    Args:
        filepath: Путь к файлу
        payload: Содержимое

    Returns:
        Path: Путь к записанному файлу
    """
    filepath = Path(filepath)
    with atomic_write(filepath, 'wb') as f:
        f.write(payload)
    logger.debug(f"💾 Записан файл {filepath} ({len(payload)} байт)")
    return filepath


def safe_json_write(filepath: Union[str, Path], data: Any, indent: int = 2) -> bool:
    """
    Безопасная запись JSON файла с атомарностью

    Args:
        filepath: Путь к JSON файлу
        data: Данные для сохранения
        indent: Отступ для форматирования

    Returns:
        bool: True если запись успешна
    """
    try:
        with atomic_write(filepath, 'w', 'utf-8') as f:
            json.dump(data, f, ensure_ascii=False, indent=indent)
        return True
    except (OSError, TypeError, ValueError) as e:
        logger.error(f"Ошибка записи JSON в {filepath}: {e}")
        return False


def write_csv_atomic(filepath: Union[str, Path], header: Sequence[str],
                     rows: Iterable[Sequence[Any]]) -> Path:
    """
    Атомарно записывает CSV таблицу (RFC-4180, UTF-8)

    Args:
        filepath: Путь к файлу
        header: Заголовок
        rows: Строки

    Returns:
        Path: Путь к записанному файлу
    """
    filepath = Path(filepath)
    with atomic_write(filepath, 'w', 'utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    logger.debug(f"💾 Записан CSV {filepath}")
    return filepath


# ========================================================================
# УПРАВЛЕНИЕ ФАЙЛАМИ
# ========================================================================

def ensure_directory(dirpath: Union[str, Path]) -> Path:
    """
    Убеждается что директория существует, создаёт если нет

    Args:
        dirpath: Путь к директории

    Returns:
        Path: Путь к директории
    """
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    return dirpath


def require_existing_file(filepath: Union[str, Path]) -> Path:
    """
    Проверяет, что файл существует

    Raises:
        FileNotFoundError: Если файла нет (сообщение содержит путь)
    """
    filepath = Path(filepath)
    if not filepath.is_file():
        raise FileNotFoundError(f"файл не найден: {filepath}")
    return filepath

