"""
Общие фикстуры тестов CPPREDICTOR
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest
from loguru import logger

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

# Тесты не пишут файловые логи в каталог проекта
os.environ.setdefault("CPPRED_LOG_TO_FILE", "0")
os.environ.setdefault("CPPRED_LOG_LEVEL", "WARNING")


@pytest.fixture(autouse=True)
def detached_logger():
    """Sink'и loguru не переживают тест (capsys закрывает свои потоки)"""
    logger.remove()
    yield
    logger.remove()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_model():
    """Фабрика случайных CP-моделей с полиномиальным отображением"""
    from cp_model import CpModel
    from feature_maps import FeatureMapSpec

    def build(rng, n_features, d, rank, scale=1.0, normalized=False):
        spec = FeatureMapSpec.polynomial(n_features, d, normalized=normalized)
        factors = tuple(scale * rng.standard_normal((d, rank)) for _ in range(n_features))
        return CpModel(factors=factors, map_spec=spec)

    return build


@pytest.fixture(scope="session")
def housing_csv():
    """Путь к CSV California Housing из CPPRED_HOUSING_CSV (иначе тест пропускается)"""
    path = os.getenv("CPPRED_HOUSING_CSV")
    if not path or not Path(path).is_file():
        pytest.skip("CPPRED_HOUSING_CSV не задан или файл отсутствует")
    return Path(path)
