"""Тесты командной строки: команды, коды возврата, приоритет конфигурации"""

import csv
import json

import numpy as np
import pytest

from cp_model import extract_coefficient, load_model_file, predict_batch, save
from data import load_csv, load_csv_with_schema, prepare_splits, schema_from_document, standardize_rows
from feature_maps import FeatureMapSpec
from main import main, parse_index_tuple
from error_handler import EXIT_DATA, EXIT_OK, EXIT_USAGE, UsageException
from run_config import RunConfig
from training import fit_linear_baseline, init_random


def _run(argv):
    return main(list(argv) + ["--no-log-file", "--log-level", "ERROR"])


@pytest.fixture
def synthetic_csv(tmp_path, capsys):
    path = tmp_path / "synthetic.csv"
    code = _run(["gen-synthetic", "--n-samples", "120", "--informative", "2",
                 "--noise-features", "1", "--seed", "3", "--out", str(path)])
    assert code == EXIT_OK
    capsys.readouterr()
    return path


@pytest.fixture
def trained_model(tmp_path, synthetic_csv, capsys):
    out_dir = tmp_path / "run"
    code = _run(["train", "--data", str(synthetic_csv), "--local-dim", "3", "--rank", "3",
                 "--epochs", "2", "--batch-size", "16", "--out", str(out_dir)])
    assert code == EXIT_OK
    capsys.readouterr()
    return out_dir / "model.json"


def _error_lines(err):
    return [line for line in err.splitlines() if line.strip()]


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_gen_synthetic_writes_csv(synthetic_csv):
    rows = _read_csv(synthetic_csv)
    assert rows[0] == ["x1", "x2", "x3", "y"]
    assert len(rows) == 121


def test_train_writes_model_and_report(trained_model):
    report = _read_csv(trained_model.parent / "report.csv")
    assert report[0] == ["epoch", "train_loss", "val_loss", "val_metric", "seconds"]
    assert [row[0] for row in report[1:]] == ["1", "2"]

    model, preprocessing = load_model_file(trained_model)
    assert model.rank == 3
    assert model.map_spec.local_dims == (3, 3, 3)
    assert [f["name"] for f in preprocessing["features"]] == ["x1", "x2", "x3"]
    assert preprocessing["target_column"] == "y"


def test_evaluate_prints_metric(trained_model, synthetic_csv, capsys):
    code = _run(["evaluate", "--model", str(trained_model), "--data", str(synthetic_csv)])
    assert code == EXIT_OK
    name, value = capsys.readouterr().out.strip().split("=")
    assert name == "mse"
    assert float(value) >= 0.0


def test_predict_to_stdout_and_file(trained_model, synthetic_csv, tmp_path, capsys):
    assert _run(["predict", "--model", str(trained_model), "--data", str(synthetic_csv)]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "prediction"
    assert len(lines) == 121

    out = tmp_path / "pred.csv"
    assert _run(["predict", "--model", str(trained_model), "--data", str(synthetic_csv), "--out", str(out)]) == EXIT_OK
    assert [float(row[0]) for row in _read_csv(out)[1:]] == [float(v) for v in lines[1:]]


def test_inspect_uses_one_based_indices(trained_model, capsys):
    assert _run(["inspect", "--model", str(trained_model), "--index", "2,1,2"]) == EXIT_OK
    printed = float(capsys.readouterr().out.strip())
    model, _ = load_model_file(trained_model)
    assert printed == extract_coefficient(model, (1, 0, 1))


def test_inspect_top_table(trained_model, capsys):
    assert _run(["inspect", "--model", str(trained_model), "--top", "4"]) == EXIT_OK
    entries = [line for line in capsys.readouterr().out.splitlines() if "\t" in line]
    assert len(entries) == 4


def test_inspect_out_of_range_index(trained_model, capsys):
    assert _run(["inspect", "--model", str(trained_model), "--index", "4,1,1"]) == EXIT_DATA
    lines = _error_lines(capsys.readouterr().err)
    assert len(lines) == 1
    assert lines[0].startswith("ERROR[InputError]:")


def test_unknown_flag_is_usage_error(capsys):
    assert _run(["train", "--no-such-flag"]) == EXIT_USAGE
    lines = _error_lines(capsys.readouterr().err)
    assert len(lines) == 1
    assert lines[0].startswith("ERROR[UsageException]:")


def test_missing_command_is_usage_error(capsys):
    assert main([]) == EXIT_USAGE
    assert _error_lines(capsys.readouterr().err)[0].startswith("ERROR[UsageException]:")


def test_invalid_hyperparameters_are_reported_together(synthetic_csv, capsys):
    code = _run(["train", "--data", str(synthetic_csv), "--rank", "0", "--loss", "hinge"])
    assert code == EXIT_USAGE
    err = capsys.readouterr().err
    assert "rank" in err and "hinge" in err


def test_missing_data_file(tmp_path, capsys):
    assert _run(["train", "--data", str(tmp_path / "absent.csv")]) == EXIT_DATA
    assert "absent.csv" in capsys.readouterr().err


def test_truncated_model_file(tmp_path, trained_model, synthetic_csv, capsys):
    broken = tmp_path / "broken.json"
    payload = trained_model.read_bytes()
    broken.write_bytes(payload[: len(payload) // 2])
    assert _run(["evaluate", "--model", str(broken), "--data", str(synthetic_csv)]) == EXIT_DATA
    lines = _error_lines(capsys.readouterr().err)
    assert len(lines) == 1
    assert lines[0].startswith("ERROR[ModelParseError]:")


def test_cli_flags_override_config_file(tmp_path, synthetic_csv):
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps({"epochs": 1, "rank": 2, "local_dim": 2}), encoding="utf-8")
    out_dir = tmp_path / "cfg"
    code = _run(["train", "--config", str(config_path), "--data", str(synthetic_csv),
                 "--epochs", "3", "--out", str(out_dir)])
    assert code == EXIT_OK
    assert len(_read_csv(out_dir / "report.csv")) == 4
    model, _ = load_model_file(out_dir / "model.json")
    assert model.rank == 2


def test_sweep_commands_write_tables(tmp_path, synthetic_csv):
    out_dir = tmp_path / "sweep"
    base = ["--data", str(synthetic_csv), "--epochs", "1", "--out", str(out_dir)]
    assert _run(["sweep-d", *base, "--d-values", "2,3,3", "--rank", "2"]) == EXIT_OK
    rows = _read_csv(out_dir / "sweep_d.csv")
    assert rows[0] == ["d", "best_val_metric", "best_epoch", "train_seconds"]
    assert [row[0] for row in rows[1:]] == ["2", "3"]

    assert _run(["sweep-rank", *base, "--r-values", "1,4", "--local-dim", "2"]) == EXIT_OK
    rows = _read_csv(out_dir / "sweep_rank.csv")
    assert [row[0] for row in rows[1:]] == ["1", "4"]


def test_parse_index_tuple():
    assert parse_index_tuple("(2,1,2)") == [2, 1, 2]
    assert parse_index_tuple("2 1 2") == [2, 1, 2]
    with pytest.raises(UsageException):
        parse_index_tuple("2,a")
    with pytest.raises(UsageException):
        parse_index_tuple(None)


def _train(tmp_path, synthetic_csv, name, *extra):
    out_dir = tmp_path / name
    code = _run(["train", "--data", str(synthetic_csv), "--local-dim", "2", "--rank", "3",
                 "--batch-size", "16", "--out", str(out_dir), *extra])
    assert code == EXIT_OK
    return out_dir / "model.json"


def test_same_config_gives_identical_model_file(tmp_path, synthetic_csv):
    first = _train(tmp_path, synthetic_csv, "a", "--epochs", "2", "--seed", "4")
    second = _train(tmp_path, synthetic_csv, "b", "--epochs", "2", "--seed", "4")
    assert first.read_bytes() == second.read_bytes()


def test_zero_epochs_writes_initial_model(tmp_path, synthetic_csv):
    path = _train(tmp_path, synthetic_csv, "zero", "--epochs", "0", "--sigma", "0.3", "--seed", "11")
    _, preprocessing = load_model_file(path)
    initial = init_random(FeatureMapSpec.polynomial(3, 2), 3, sigma=0.3, seed=11)
    assert path.read_bytes() == save(initial, preprocessing)


def test_inspect_all_ones_on_linear_init_is_bias(tmp_path, synthetic_csv, capsys):
    path = _train(tmp_path, synthetic_csv, "lin", "--epochs", "0", "--init", "linear")
    capsys.readouterr()
    assert _run(["inspect", "--model", str(path), "--index", "1,1,1"]) == EXIT_OK
    printed = float(capsys.readouterr().out.strip())

    train, _, _ = prepare_splits(load_csv(synthetic_csv), RunConfig().split_spec())
    bias = fit_linear_baseline(train, FeatureMapSpec.polynomial(3, 2), "mse").bias
    assert printed == pytest.approx(bias, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("n_rows", [0, 1, 100])
def test_predict_output_matches_predict_batch(trained_model, synthetic_csv, tmp_path, capsys, n_rows):
    lines = synthetic_csv.read_text(encoding="utf-8").splitlines()
    subset = tmp_path / f"rows_{n_rows}.csv"
    subset.write_text("\n".join(lines[:1 + n_rows]) + "\n", encoding="utf-8")

    assert _run(["predict", "--model", str(trained_model), "--data", str(subset)]) == EXIT_OK
    printed = capsys.readouterr().out.splitlines()
    assert printed[0] == "prediction"

    model, preprocessing = load_model_file(trained_model)
    schema, stats, target_column = schema_from_document(preprocessing)
    rows, _ = load_csv_with_schema(subset, schema, target_column)
    expected = predict_batch(model, standardize_rows(stats, schema, rows))
    assert len(printed) == 1 + n_rows
    assert [float(v) for v in printed[1:]] == expected


def test_evaluate_uses_loss_stored_with_model(tmp_path, capsys):
    rng = np.random.default_rng(8)
    x = rng.standard_normal((80, 2))
    y = (x[:, 0] + 0.3 * x[:, 1] > 0).astype(float)
    path = tmp_path / "binary.csv"
    path.write_text("x1,x2,y\n" + "".join(f"{a!r},{b!r},{t!r}\n" for (a, b), t in zip(x, y)), encoding="utf-8")

    out_dir = tmp_path / "bce"
    assert _run(["train", "--data", str(path), "--loss", "bce", "--local-dim", "2", "--rank", "2",
                 "--epochs", "1", "--out", str(out_dir)]) == EXIT_OK
    _, preprocessing = load_model_file(out_dir / "model.json")
    assert preprocessing["loss"] == "bce"
    capsys.readouterr()

    assert _run(["evaluate", "--model", str(out_dir / "model.json"), "--data", str(path)]) == EXIT_OK
    name, value = capsys.readouterr().out.strip().split("=")
    assert name == "auc"
    assert 0.0 <= float(value) <= 1.0

    assert _run(["evaluate", "--model", str(out_dir / "model.json"), "--data", str(path),
                 "--loss", "mse"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("mse=")
