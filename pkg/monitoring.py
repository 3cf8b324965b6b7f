"""
Модуль мониторинга и метрик для CPPREDICTOR

Время выполнения операций (обучение, линейный baseline, sweep),
секундомер для поэпоховых замеров и память процесса через psutil.
"""

import platform
import time
from dataclasses import asdict, dataclass
from datetime import datetime
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

from loguru import logger

import config
from file_utils import safe_json_write

try:
    import psutil
    PSUTIL_AVAILABLE = True
except ImportError:
    PSUTIL_AVAILABLE = False


# Операции дольше этого порога логируются как медленные
SLOW_OPERATION_MS = 60_000


# ========================================================================
# СТРУКТУРЫ ДАННЫХ
# ========================================================================

@dataclass
class OperationStats:
    """Накопленная статистика одной именованной операции"""
    calls: int = 0
    failures: int = 0
    total_ms: float = 0.0
    max_ms: float = 0.0
    last_error: Optional[str] = None

    @property
    def mean_ms(self) -> float:
        return self.total_ms / self.calls if self.calls else 0.0

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["mean_ms"] = self.mean_ms
        return payload


@dataclass
class ProcessMetric:
    """Состояние текущего процесса"""
    timestamp: str
    rss_mb: float
    cpu_count: int
    platform: str


# ========================================================================
# СЕКУНДОМЕР
# ========================================================================

class Stopwatch:
    """Секундомер на perf_counter (время эпохи, время sweep-точки)"""

    def __init__(self):
        self._start = time.perf_counter()

    def restart(self) -> float:
        """Возвращает прошедшее время и запускает отсчёт заново"""
        now = time.perf_counter()
        elapsed = now - self._start
        self._start = now
        return elapsed

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self._start


# ========================================================================
# КОЛЛЕКТОР МЕТРИК
# ========================================================================

class MetricsCollector:
    """Статистика времени по операциям за время жизни процесса"""

    def __init__(self):
        self.operations: Dict[str, OperationStats] = {}
        self.started_at = datetime.now()

    def record(self, operation: str, duration_ms: float, error: Optional[str] = None):
        """
        Учитывает один вызов операции

        Args:
            operation: Имя операции
            duration_ms: Длительность вызова
            error: Текст исключения, если вызов завершился ошибкой
        """
        stats = self.operations.setdefault(operation, OperationStats())
        stats.calls += 1
        stats.total_ms += duration_ms
        stats.max_ms = max(stats.max_ms, duration_ms)
        if error is not None:
            stats.failures += 1
            stats.last_error = error

        if duration_ms > SLOW_OPERATION_MS:
            logger.debug(f"🐢 Долгая операция {operation}: {duration_ms / 1000:.1f}s")

    def collect_process_metrics(self) -> Optional[ProcessMetric]:
        """ProcessMetric или None, если psutil недоступен"""
        if not PSUTIL_AVAILABLE:
            return None
        process = psutil.Process()
        return ProcessMetric(
            timestamp=datetime.now().isoformat(),
            rss_mb=process.memory_info().rss / (1024 * 1024),
            cpu_count=psutil.cpu_count() or 1,
            platform=platform.platform()
        )

    def get_summary(self) -> Dict[str, Any]:
        process = self.collect_process_metrics()
        return {
            "started_at": self.started_at.isoformat(),
            "operations": {name: stats.to_dict() for name, stats in self.operations.items()},
            "process": asdict(process) if process else None,
        }

    def save_metrics(self, filepath: Union[str, Path]) -> bool:
        """Сохраняет сводку в JSON (атомарно)"""
        return safe_json_write(filepath, self.get_summary())

    def reset(self):
        self.operations.clear()
        self.started_at = datetime.now()


metrics_collector = MetricsCollector()


def monitor_performance(operation_name: Optional[str] = None):
    """
    Декоратор: время каждого вызова функции попадает в metrics_collector

    Args:
        operation_name: Название операции (по умолчанию имя функции)
    """
    def decorator(func: Callable) -> Callable:
        name = operation_name or func.__name__

        @wraps(func)
        def wrapper(*args, **kwargs):
            stopwatch = Stopwatch()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                metrics_collector.record(name, stopwatch.elapsed * 1000, error=str(e))
                raise
            metrics_collector.record(name, stopwatch.elapsed * 1000)
            return result

        return wrapper
    return decorator


def log_process_summary():
    """Логирует итог запуска и сохраняет его в CPPRED_METRICS_FILE, если задан"""
    summary = metrics_collector.get_summary()
    if summary["process"] is not None:
        logger.debug(f"🧠 Память процесса: {summary['process']['rss_mb']:.1f} MB")
    for name, stats in summary["operations"].items():
        logger.debug(f"⏱️ {name}: {stats['calls']} вызов(ов), в среднем {stats['mean_ms'] / 1000:.3f}s")
    if config.METRICS_FILE:
        metrics_collector.save_metrics(config.METRICS_FILE)
