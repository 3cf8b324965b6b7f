"""
Эксперименты CPPREDICTOR

Общие для CLI и тестов сценарии: обучение на готовом разбиении, sweep по
локальной размерности d и по рангу R, сравнение с линейной моделью и
сравнение схем инициализации.
"""

from dataclasses import replace
from typing import Dict, List, Sequence, Tuple

from loguru import logger

from cp_model import CpModel
from data import Dataset
from feature_maps import FeatureMapSpec
from monitoring import Stopwatch, monitor_performance
from training import (
    FitReport, TrainConfig, compute_metric, fit, fit_linear_baseline,
    initialize_model,
)
from types_models import InitKind, MapKind, SweepRow, parse_enum


def train_on_splits(
    train: Dataset,
    validation: Dataset,
    map_kind,
    local_dim: int,
    train_config: TrainConfig
) -> Tuple[CpModel, FitReport]:
    """
    Инициализация и обучение модели на уже стандартизованных частях

    Returns:
        (модель, отчёт)
    """
    map_spec = FeatureMapSpec.from_schema(train.schema, map_kind, local_dim)
    model = initialize_model(map_spec, train_config, train)
    return fit(model, train, train_config, validation)


def _deduplicate(values: Sequence[int], name: str) -> List[int]:
    unique = list(dict.fromkeys(int(v) for v in values))
    if len(unique) != len(values):
        logger.warning(f"⚠️ Повторяющиеся значения {name} удалены: {list(values)} -> {unique}")
    return unique


def _sweep_row(value: int, report: FitReport, seconds: float) -> SweepRow:
    best = report.best()
    return {
        "value": value,
        "best_val_metric": best["val_metric"],
        "best_epoch": best["epoch"],
        "train_seconds": seconds,
    }


@monitor_performance("sweep_local_dim")
def run_local_dim_sweep(
    train: Dataset,
    validation: Dataset,
    map_kind,
    d_values: Sequence[int],
    train_config: TrainConfig
) -> List[SweepRow]:
    """
    По строке на каждое d: лучшая метрика валидации и время обучения

    Повторяющиеся d удаляются с предупреждением.
    """
    map_kind = parse_enum(MapKind, map_kind)
    rows = []
    for d in _deduplicate(d_values, "d"):
        stopwatch = Stopwatch()
        _, report = train_on_splits(train, validation, map_kind, d, train_config)
        row = _sweep_row(d, report, stopwatch.elapsed)
        logger.info(f"🔬 d={d}: лучшая {report.metric.value}={row['best_val_metric']:.6g} (эпоха {row['best_epoch']})")
        rows.append(row)
    return rows


@monitor_performance("sweep_rank")
def run_rank_sweep(
    train: Dataset,
    validation: Dataset,
    map_kind,
    local_dim: int,
    r_values: Sequence[int],
    train_config: TrainConfig
) -> List[SweepRow]:
    """По строке на каждый ранг R (зеркало run_local_dim_sweep)"""
    rows = []
    for rank in _deduplicate(r_values, "R"):
        stopwatch = Stopwatch()
        _, report = train_on_splits(train, validation, map_kind, local_dim, replace(train_config, rank=rank))
        row = _sweep_row(rank, report, stopwatch.elapsed)
        logger.info(f"🔬 R={rank}: лучшая {report.metric.value}={row['best_val_metric']:.6g} (эпоха {row['best_epoch']})")
        rows.append(row)
    return rows


def compare_linear_vs_cp(
    train: Dataset,
    validation: Dataset,
    local_dim: int,
    train_config: TrainConfig,
    map_kind=MapKind.POLYNOMIAL
) -> Dict[str, float]:
    """
    Метрика валидации линейной модели на исходных признаках и CP-модели

    Линейная модель использует только первые степени признаков.

    Returns:
        Dict: linear, cp (лучшая по эпохам), ratio = cp / linear
    """
    metric = train_config.validation_metric
    linear_spec = FeatureMapSpec.from_schema(train.schema, MapKind.POLYNOMIAL, 2)
    solution = fit_linear_baseline(train, linear_spec, train_config.loss)
    linear_value = compute_metric(metric, solution.predict(validation.feature_matrix),
                                  validation.targets, train_config.loss)

    _, report = train_on_splits(train, validation, map_kind, local_dim, train_config)
    cp_value = report.best()["val_metric"]
    logger.info(f"⚖️ Линейная модель: {linear_value:.6g}, CP: {cp_value:.6g}")
    return {"linear": linear_value, "cp": cp_value, "ratio": cp_value / linear_value}


def compare_initialisations(
    train: Dataset,
    validation: Dataset,
    local_dim: int,
    train_config: TrainConfig
) -> Dict[str, FitReport]:
    """
    Одинаковое обучение от линейной и от случайной инициализации

    Returns:
        Dict: linear -> FitReport, random -> FitReport
    """
    reports = {}
    for init in (InitKind.LINEAR, InitKind.RANDOM):
        _, reports[init.value] = train_on_splits(
            train, validation, MapKind.POLYNOMIAL, local_dim, replace(train_config, init=init)
        )
    first = {name: report.epochs[0]["val_metric"] for name, report in reports.items() if report.epochs}
    if first:
        logger.info(f"🏁 Метрика после первой эпохи: {first}")
    return reports
