"""Тесты конфигурации запуска и её валидации"""

import json
from dataclasses import replace

import pytest

from error_handler import ConfigurationException
from regularizers import RegularizerSpec
from run_config import RunConfig, load_run_config, read_config_file
from types_models import OptimizerKind, RegularizerKind
from validation import (
    require_valid_run_config, validate_command_inputs,
    validate_hyperparameters,
)


def _write_json(tmp_path, name, document):
    path = tmp_path / name
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def test_precedence_of_sources(tmp_path):
    defaults = _write_json(tmp_path, "defaults.json", {"rank": 4, "epochs": 7, "alpha": 0.1})
    run_file = _write_json(tmp_path, "run.json", {"epochs": 3, "reg": "l2"})
    run_config = load_run_config({"alpha": 0.5, "rank": None}, run_file, defaults)
    assert run_config.rank == 4
    assert run_config.epochs == 3
    assert run_config.reg == "l2"
    assert run_config.alpha == 0.5
    assert run_config.batch_size == RunConfig().batch_size


def test_missing_defaults_file_is_ignored(tmp_path):
    assert load_run_config({}, None, tmp_path / "absent.json") == RunConfig()


def test_lists_and_booleans_are_coerced(tmp_path):
    run_file = _write_json(tmp_path, "run.json", {"d_values": [2, 4], "shuffle": "false"})
    run_config = load_run_config({"r_values": "5, 10", "categorical": "city,zip"}, run_file, None)
    assert run_config.d_values == [2, 4]
    assert run_config.r_values == [5, 10]
    assert run_config.categorical == ["city", "zip"]
    assert run_config.shuffle is False


def test_bad_values_and_unknown_keys(tmp_path):
    with pytest.raises(ConfigurationException, match="rank"):
        load_run_config({"rank": "many"}, None, None)
    with pytest.raises(ConfigurationException, match="colour"):
        load_run_config({}, _write_json(tmp_path, "a.json", {"colour": "red"}), None)
    with pytest.raises(ConfigurationException):
        read_config_file(_write_json(tmp_path, "b.json", {"train": {"epochs": 1}}))
    with pytest.raises(ConfigurationException):
        read_config_file(_write_json(tmp_path, "c.json", [1, 2]))
    broken = tmp_path / "d.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigurationException):
        read_config_file(broken)
    with pytest.raises(FileNotFoundError):
        read_config_file(tmp_path / "absent.json")


def test_project_defaults_file_matches_dataclass_defaults():
    assert load_run_config() == RunConfig()


def test_to_train_config():
    run_config = RunConfig(reg="order", alpha=0.01, beta=3.0, optimizer="sgd", rank=6)
    train_config = run_config.to_train_config()
    assert train_config.regularizer == RegularizerSpec.order(0.01, 3.0)
    assert train_config.optimizer is OptimizerKind.SGD
    assert train_config.rank == 6
    assert run_config.to_train_config(rank=9).rank == 9
    assert RunConfig(reg="l2", alpha=0.2).regularizer_spec().kind is RegularizerKind.L2
    assert RunConfig(alpha=0.2).regularizer_spec() == RegularizerSpec.none()


def test_validate_hyperparameters_collects_all_errors():
    run_config = RunConfig(map="spline", rank=0, local_dim=1, reg="order", beta=1.0, learning_rate=0.0)
    ok, errors = validate_hyperparameters(run_config)
    assert not ok
    assert len(errors) == 5
    assert validate_hyperparameters(RunConfig()) == (True, [])


def test_linear_init_incompatible_with_normalized_map():
    ok, errors = validate_hyperparameters(RunConfig(init="linear", map="poly-norm"))
    assert not ok
    assert "poly-norm" in errors[0]


def test_validate_command_inputs():
    assert not validate_command_inputs(RunConfig(), "train")[0]
    assert not validate_command_inputs(RunConfig(data="x.csv"), "evaluate")[0]
    assert validate_command_inputs(RunConfig(model="m.json"), "inspect")[0]
    assert not validate_command_inputs(RunConfig(data="x.csv", d_values=[1, 2]), "sweep-d")[0]
    assert not validate_command_inputs(RunConfig(data="x.csv", map="categorical"), "sweep-d")[0]
    assert not validate_command_inputs(RunConfig(data="x.csv", r_values=[]), "sweep-rank")[0]
    assert not validate_command_inputs(RunConfig(noise_std=-1.0), "gen-synthetic")[0]
    assert validate_command_inputs(RunConfig(), "gen-synthetic")[0]


def test_require_valid_run_config_joins_errors():
    with pytest.raises(ConfigurationException) as info:
        require_valid_run_config(replace(RunConfig(), rank=0, epochs=-1), "gen-synthetic")
    assert "; " in str(info.value)

