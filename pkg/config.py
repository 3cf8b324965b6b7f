"""
Конфигурация CPPREDICTOR

Значения по умолчанию задаются здесь; любое из них можно переопределить
переменной окружения CPPRED_<ИМЯ> (в том числе через файл .env).
"""

import os
import sys
from pathlib import Path
from typing import Optional

# ==================================================
# ПУТИ И ДИРЕКТОРИИ
# ==================================================

BASE_DIR = Path(__file__).parent
LOGS_DIR = BASE_DIR / "logs"
OUTPUT_DIR = BASE_DIR / "runs"
DEFAULT_CONFIG_FILE = BASE_DIR / "config_defaults.json"

# ==================================================
# ЛОГИРОВАНИЕ
# ==================================================

LOG_LEVEL = "INFO"  # DEBUG, INFO, WARNING, ERROR
LOG_FILE = "cppredictor.log"
LOG_ROTATION = "10 MB"
LOG_RETENTION = "30 days"
LOG_TO_FILE = True

# ==================================================
# ВЫЧИСЛЕНИЯ
# ==================================================

# Максимальное число элементов плотного тензора (оракул)
DENSE_TENSOR_CAPACITY = 10_000_000

# Порог, ниже которого деление в алгоритмах градиента запрещено
DIVISION_SAFE_THRESHOLD = 1e-12

# Демпфирование нормальных уравнений линейной модели
LINEAR_DAMPING = 1e-8
LOGISTIC_GRAD_TOL = 1e-6
LOGISTIC_MAX_ITER = 20_000

# ==================================================
# ОБУЧЕНИЕ ПО УМОЛЧАНИЮ
# ==================================================

DEFAULT_BATCH_SIZE = 32
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_ADAM_BETA1 = 0.9
DEFAULT_ADAM_BETA2 = 0.999
DEFAULT_ADAM_EPSILON = 1e-8
DEFAULT_INIT_SIGMA = 0.2
DEFAULT_SEED = 0

# ==================================================
# РЕЖИМЫ РАБОТЫ
# ==================================================

DEBUG_MODE = False


def get_env_var(key: str, default: Optional[str] = None) -> Optional[str]:
    """
    Безопасное получение переменной окружения с префиксом CPPRED_

    Args:
        key: Имя параметра без префикса
        default: Значение по умолчанию

    Returns:
        str: Значение переменной или default
    """
    value = os.getenv(f"CPPRED_{key}")
    return value if value not in (None, "") else default


# ==================================================
# ЗАГРУЗКА ИЗ ОКРУЖЕНИЯ (если есть .env)
# ==================================================

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass  # dotenv не установлен - используем значения из файла

LOG_LEVEL = get_env_var("LOG_LEVEL", LOG_LEVEL).upper()
LOG_FILE = get_env_var("LOG_FILE", LOG_FILE)
LOGS_DIR = Path(get_env_var("LOGS_DIR", str(LOGS_DIR)))
OUTPUT_DIR = Path(get_env_var("OUTPUT_DIR", str(OUTPUT_DIR)))
LOG_TO_FILE = get_env_var("LOG_TO_FILE", "1" if LOG_TO_FILE else "0") not in ("0", "false", "no")
DEBUG_MODE = get_env_var("DEBUG", "1" if DEBUG_MODE else "0") in ("1", "true", "yes")
DENSE_TENSOR_CAPACITY = int(get_env_var("DENSE_TENSOR_CAPACITY", str(DENSE_TENSOR_CAPACITY)))
# JSON со временем операций за запуск CLI (не пишется, если не задан)
METRICS_FILE = get_env_var("METRICS_FILE")


# ==================================================
# ВАЛИДАЦИЯ ПРИ ИМПОРТЕ
# ==================================================

def validate_config():
    """Проверяет корректность конфигурации"""
    errors = []

    if LOG_LEVEL not in ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"):
        errors.append(f"LOG_LEVEL некорректен: {LOG_LEVEL}")

    if DENSE_TENSOR_CAPACITY < 1:
        errors.append("DENSE_TENSOR_CAPACITY должен быть положительным")

    return errors


config_errors = validate_config()
if config_errors:
    print("⚠️ ПРЕДУПРЕЖДЕНИЕ: Обнаружены проблемы с конфигурацией:", file=sys.stderr)
    for error in config_errors:
        print(f"  - {error}", file=sys.stderr)
