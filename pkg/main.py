#!/usr/bin/env python3
"""
CPPREDICTOR - предсказание с CP-представлением тензора весов

Командная строка: обучение, оценка, предсказание, просмотр
коэффициентов взаимодействий, sweep-эксперименты и генерация
синтетических данных.

Коды возврата: 0 - успех, 1 - ошибка использования или конфигурации,
2 - ошибка данных или файла модели, 3 - численная ошибка.
"""

import argparse
import re
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

import config
from cp_model import (
    coefficient_table, extract_coefficient, load_model_file, predict_batch,
    save_model_file,
)
from data import (
    FeatureSchema, StandardizationStats, generate_synthetic_poly, load_csv,
    load_csv_with_schema, prepare_splits, read_header, schema_from_document,
    standardize_rows, write_csv,
)
from error_handler import (
    EXIT_OK, InputError, UsageException, report_cli_failure,
)
from experiments import run_local_dim_sweep, run_rank_sweep, train_on_splits
from file_utils import ensure_directory, write_csv_atomic
from logger_setup import log_system_info, print_table, setup_logger
from monitoring import log_process_summary
from run_config import RunConfig, load_run_config
from training import REPORT_HEADER, compute_metric, default_metric, evaluate
from types_models import LossKind, Metric, parse_enum
from validation import require_valid_run_config
from version import __description__, __version__


MODEL_FILE = "model.json"
REPORT_FILE = "report.csv"


# ========================================================================
# РАЗБОР АРГУМЕНТОВ
# ========================================================================

class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser, который сообщает об ошибке исключением (код 1)"""

    def error(self, message):
        raise UsageException(message)


def _add_run_flags(parser: argparse.ArgumentParser):
    """Флаги RunConfig; значение None означает 'не задано в командной строке'"""
    parser.add_argument('--config', help='JSON-файл параметров (плоский объект)')
    parser.add_argument('--data', help='CSV с заголовком')
    parser.add_argument('--target-column', help='Столбец цели (по умолчанию последний)')
    parser.add_argument('--categorical', help='Категориальные столбцы через запятую')
    parser.add_argument('--model', help='Файл модели')
    parser.add_argument('--out', help='Каталог или файл результатов')
    parser.add_argument('--map', help='poly | poly-norm | categorical')
    parser.add_argument('--local-dim', type=int, help='Локальная размерность d')
    parser.add_argument('--rank', type=int, help='CP-ранг R')
    parser.add_argument('--loss', help='mse | bce')
    parser.add_argument('--reg', help='none | l2 | order')
    parser.add_argument('--alpha', type=float, help='Сила регуляризации')
    parser.add_argument('--beta', type=float, help='Основание порядковой регуляризации (> 1)')
    parser.add_argument('--init', help='random | linear')
    parser.add_argument('--sigma', type=float, help='СКО случайной инициализации')
    parser.add_argument('--optimizer', help='adam | sgd')
    parser.add_argument('--learning-rate', type=float, help='Шаг оптимизатора')
    parser.add_argument('--epochs', type=int, help='Число эпох')
    parser.add_argument('--batch-size', type=int, help='Размер мини-батча')
    parser.add_argument('--seed', type=int, help='Зерно генераторов')
    parser.add_argument('--metric', help='mse | auc | accuracy')
    parser.add_argument('--no-shuffle', dest='shuffle', action='store_const', const=False,
                        help='Не перемешивать строки между эпохами')
    parser.add_argument('--log-level', help='DEBUG | INFO | WARNING | ERROR')
    parser.add_argument('--no-log-file', action='store_true', help='Не писать логи в файлы')


def build_parser() -> argparse.ArgumentParser:
    parser = CliArgumentParser(
        prog="cppredictor",
        description=f"CPPREDICTOR - {__description__}",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Примеры использования:
  python main.py gen-synthetic --out runs/synthetic.csv
  python main.py train --data runs/synthetic.csv --local-dim 3 --rank 7 --init linear --out runs/poly
  python main.py inspect --model runs/poly/model.json --index 1,1,1,1,1,1,1
  python main.py sweep-d --data housing.csv --map poly-norm --d-values 2,25 --rank 20 --reg l2 --alpha 1e-4
        """
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest='command', parser_class=CliArgumentParser)

    for name, help_text in (
        ('train', 'Обучить модель и сохранить её с поэпоховым отчётом'),
        ('evaluate', 'Метрика сохранённой модели на CSV'),
        ('predict', 'Предсказания сохранённой модели для строк CSV'),
    ):
        _add_run_flags(commands.add_parser(name, help=help_text))

    inspect = commands.add_parser('inspect', help='Коэффициент взаимодействия признаков')
    _add_run_flags(inspect)
    inspect.add_argument('--index', help='Кортеж индексов с единицы, например 2,1,2')
    inspect.add_argument('--top', type=int, help='Показать K крупнейших коэффициентов')
    inspect.add_argument('--max-order', type=int, default=2, help='Максимальный порядок для --top')

    sweep_d = commands.add_parser('sweep-d', help='Sweep по локальной размерности d')
    _add_run_flags(sweep_d)
    sweep_d.add_argument('--d-values', help='Список d через запятую')

    sweep_rank = commands.add_parser('sweep-rank', help='Sweep по рангу R')
    _add_run_flags(sweep_rank)
    sweep_rank.add_argument('--r-values', help='Список R через запятую')

    synthetic = commands.add_parser('gen-synthetic', help='Синтетическая полиномиальная регрессия в CSV')
    _add_run_flags(synthetic)
    synthetic.add_argument('--n-samples', type=int, help='Число строк')
    synthetic.add_argument('--informative', type=int, help='Информативные признаки')
    synthetic.add_argument('--noise-features', type=int, help='Шумовые признаки')
    synthetic.add_argument('--noise-std', type=float, help='СКО шума цели')

    return parser


_CLI_ONLY = {'command', 'config', 'log_level', 'no_log_file', 'index', 'top', 'max_order'}


def _run_config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {key: value for key, value in vars(args).items() if key not in _CLI_ONLY}
    return load_run_config(values, args.config)


def parse_index_tuple(text: Optional[str]) -> List[int]:
    """
    '(2,1,2)' / '2,1,2' / '2 1 2' -> [2, 1, 2]

    Raises:
        UsageException: Пустая или некорректная строка
    """
    if not text or not re.fullmatch(r"\s*\(?\s*\d+(\s*[,\s]\s*\d+)*\s*\)?\s*", text):
        raise UsageException(f"некорректный кортеж индексов: {text!r}")
    return [int(token) for token in re.findall(r"\d+", text)]


# ========================================================================
# КОМАНДЫ
# ========================================================================

def _load_training_splits(run_config: RunConfig):
    dataset = load_csv(run_config.data, run_config.target_column, run_config.categorical)
    return prepare_splits(dataset, run_config.split_spec())


def cmd_train(run_config: RunConfig) -> int:
    """Обучает модель; пишет model.json и report.csv в каталог --out"""
    train, validation, test = _load_training_splits(run_config)
    train_config = run_config.to_train_config()
    model, report = train_on_splits(train, validation, run_config.map, run_config.local_dim, train_config)

    out_dir = ensure_directory(run_config.output_dir())
    preprocessing = train.preprocessing_document()
    preprocessing["loss"] = train_config.loss.value
    model_path = save_model_file(out_dir / MODEL_FILE, model, preprocessing)
    report_path = write_csv_atomic(out_dir / REPORT_FILE, REPORT_HEADER, report.csv_rows())

    metric = train_config.validation_metric
    test_value = evaluate(model, test, metric, train_config.loss)
    best = report.best()
    print_table("Итог обучения", ["epoch", f"val_{metric.value}", f"test_{metric.value}"],
                [[best["epoch"], best["val_metric"], test_value]])
    logger.success(f"✅ Модель: {model_path}, отчёт: {report_path}")
    print(model_path)
    return EXIT_OK


def _load_model_and_rows(run_config: RunConfig, require_target: bool):
    """Модель, стандартизованная матрица признаков, цели (или None) и документ предобработки"""
    model, preprocessing = load_model_file(run_config.model)
    if preprocessing is not None:
        schema, stats, target_column = schema_from_document(preprocessing)
        target_column = run_config.target_column or target_column
    else:
        schema, stats, target_column = None, None, run_config.target_column

    if schema is None:
        header = read_header(run_config.data)
        target_column = target_column or (header[-1] if require_target else None)
        schema = tuple(FeatureSchema(name) for name in header if name != target_column)
        stats = StandardizationStats(means={}, stds={})
        if len(schema) != model.n_features:
            raise InputError(f"в {run_config.data} {len(schema)} признаков, модель ожидает {model.n_features}")

    rows, targets = load_csv_with_schema(run_config.data, schema, target_column, require_target)
    if stats.means:
        rows = standardize_rows(stats, schema, rows)
    return model, rows, targets, preprocessing


def cmd_evaluate(run_config: RunConfig, loss_flag: Optional[str] = None) -> int:
    """
    Печатает метрику модели на CSV в stdout

    Функция потерь: флаг --loss, иначе сохранённая при обучении, иначе из RunConfig.
    """
    model, rows, targets, preprocessing = _load_model_and_rows(run_config, require_target=True)
    loss = parse_enum(LossKind, loss_flag or (preprocessing or {}).get("loss") or run_config.loss)
    metric = parse_enum(Metric, run_config.metric) if run_config.metric else default_metric(loss)
    if rows.shape[0] == 0:
        raise InputError(f"в {run_config.data} нет строк для оценки")
    scores = np.asarray(predict_batch(model, rows))
    value = compute_metric(metric, scores, targets, loss)
    print(f"{metric.value}={value!r}")
    return EXIT_OK


def cmd_predict(run_config: RunConfig) -> int:
    """Предсказания по строкам CSV: файл --out или stdout"""
    model, rows, _, _ = _load_model_and_rows(run_config, require_target=False)
    predictions = predict_batch(model, rows)
    if run_config.out:
        path = write_csv_atomic(run_config.out, ["prediction"], ([value] for value in predictions))
        logger.success(f"✅ {len(predictions)} предсказаний записано в {path}")
    else:
        sys.stdout.write("prediction\n")
        for value in predictions:
            sys.stdout.write(f"{value!r}\n")
    return EXIT_OK


def cmd_inspect(run_config: RunConfig, index: Optional[str], top: Optional[int], max_order: int) -> int:
    """Коэффициент по кортежу индексов с единицы или таблица крупнейших"""
    model, _ = load_model_file(run_config.model)
    if top is not None:
        entries = coefficient_table(model, max_order=max_order, top=top)
        rows = [[",".join(str(i + 1) for i in indices), value] for indices, value in entries]
        print_table(f"Коэффициенты порядка <= {max_order}", ["indices", "value"], rows)
        for indices, value in rows:
            print(f"{indices}\t{value!r}")
        return EXIT_OK

    one_based = parse_index_tuple(index)
    if any(i < 1 for i in one_based):
        raise InputError(f"индексы нумеруются с единицы: {index}")
    value = extract_coefficient(model, [i - 1 for i in one_based])
    print(repr(value))
    return EXIT_OK


def _write_sweep(run_config: RunConfig, name: str, label: str, rows) -> Path:
    out_dir = ensure_directory(run_config.output_dir())
    path = write_csv_atomic(
        out_dir / f"{name}.csv",
        [label, "best_val_metric", "best_epoch", "train_seconds"],
        ([r["value"], r["best_val_metric"], r["best_epoch"], r["train_seconds"]] for r in rows)
    )
    print_table(name, [label, "best_val_metric", "best_epoch", "train_seconds"],
                [[r["value"], r["best_val_metric"], r["best_epoch"], r["train_seconds"]] for r in rows])
    print(path)
    return path


def cmd_sweep_local_dim(run_config: RunConfig) -> int:
    """Строка (d, лучшая метрика валидации, время) на каждое d"""
    train, validation, _ = _load_training_splits(run_config)
    rows = run_local_dim_sweep(train, validation, run_config.map, run_config.d_values,
                               run_config.to_train_config())
    _write_sweep(run_config, "sweep_d", "d", rows)
    return EXIT_OK


def cmd_sweep_rank(run_config: RunConfig) -> int:
    """Строка (R, лучшая метрика валидации, время) на каждый R"""
    train, validation, _ = _load_training_splits(run_config)
    rows = run_rank_sweep(train, validation, run_config.map, run_config.local_dim,
                          run_config.r_values, run_config.to_train_config())
    _write_sweep(run_config, "sweep_rank", "R", rows)
    return EXIT_OK


def cmd_gen_synthetic(run_config: RunConfig) -> int:
    dataset = generate_synthetic_poly(
        n_samples=run_config.n_samples,
        informative=run_config.informative,
        noise_features=run_config.noise_features,
        noise_std=run_config.noise_std,
        seed=run_config.seed,
    )
    path = Path(run_config.out) if run_config.out else Path(config.OUTPUT_DIR) / "synthetic.csv"
    write_csv(dataset, path)
    logger.success(f"✅ Синтетические данные: {path} ({dataset.n_samples} строк)")
    print(path)
    return EXIT_OK


# ========================================================================
# ТОЧКА ВХОДА
# ========================================================================

def main(argv: Optional[Sequence[str]] = None) -> int:
    """Главная функция приложения; возвращает код возврата"""
    command = None
    try:
        # до разбора аргументов: ошибки разбора тоже проходят через фильтр консоли
        setup_logger()
        parser = build_parser()
        args = parser.parse_args(argv)
        command = args.command
        if command is None:
            raise UsageException("не указана команда (train, evaluate, predict, inspect, sweep-d, sweep-rank, gen-synthetic)")

        setup_logger(log_level=args.log_level, to_file=False if args.no_log_file else None)
        run_config = _run_config_from_args(args)
        log_system_info(run_config.as_dict())
        require_valid_run_config(run_config, command)

        if command == 'train':
            code = cmd_train(run_config)
        elif command == 'evaluate':
            code = cmd_evaluate(run_config, args.loss)
        elif command == 'predict':
            code = cmd_predict(run_config)
        elif command == 'inspect':
            code = cmd_inspect(run_config, args.index, args.top, args.max_order)
        elif command == 'sweep-d':
            code = cmd_sweep_local_dim(run_config)
        elif command == 'sweep-rank':
            code = cmd_sweep_rank(run_config)
        else:
            code = cmd_gen_synthetic(run_config)

        log_process_summary()
        return code

    except KeyboardInterrupt:
        logger.info("⏹️ Остановлено пользователем")
        return 1
    except Exception as e:
        return report_cli_failure(e, context=command)


if __name__ == "__main__":
    sys.exit(main())
