"""
Tests for run configuration loading
File: tests/test_config.py
"""

import pytest

from config.settings import RunConfig, load_run_config, read_config_file
from errors import ConfigError


def test_defaults(clean_env):
    config = load_run_config(environ={}, use_dotenv=False)
    assert config == RunConfig()
    assert config.backend == "mock"
    assert config.weights == (0.1, 0.1, 0.4, 0.4)
    assert config.seed_list == (0,)


def test_seed_list_counts_up():
    assert RunConfig(seed=5, seeds=3).seed_list == (5, 6, 7)


def test_flag_beats_env_beats_file_beats_default(clean_env):
    (clean_env / "sage.toml").write_text('model = "from-file"\nsteps = 30\nseed = 4\n')
    environ = {"SAGE_MODEL": "from-env", "SAGE_MAX_RETRIES": "5"}
    config = load_run_config({"model": "from-flag", "seed": None}, environ=environ, use_dotenv=False)
    assert config.model == "from-flag"
    assert config.max_retries == 5
    assert config.steps == 30
    assert config.seed == 4
    assert config.timeout_s == 60.0


def test_empty_env_value_counts_as_unset(clean_env):
    assert load_run_config(environ={"SAGE_MODEL": ""}, use_dotenv=False).model == "gpt-4"


def test_explicit_config_path(clean_env, tmp_path):
    path = tmp_path / "other.toml"
    path.write_text('weights = [0.25, 0.25, 0.25, 0.25]\nmodeling_budget = 3\n')
    config = load_run_config(config_path=str(path), environ={}, use_dotenv=False)
    assert config.weights == (0.25, 0.25, 0.25, 0.25)
    assert config.modeling_budget == 3
    assert config.to_dict()["weights"] == [0.25, 0.25, 0.25, 0.25]


def test_missing_explicit_config_file(clean_env):
    with pytest.raises(ConfigError) as info:
        read_config_file("nowhere.toml")
    assert info.value.key == "config"


def test_unknown_key_in_file(clean_env):
    (clean_env / "sage.toml").write_text('colour = "red"\n')
    with pytest.raises(ConfigError) as info:
        load_run_config(environ={}, use_dotenv=False)
    assert info.value.key == "colour"


def test_malformed_file(clean_env):
    (clean_env / "sage.toml").write_text("steps = \n")
    with pytest.raises(ConfigError, match="sage.toml"):
        load_run_config(environ={}, use_dotenv=False)


def test_unknown_flag(clean_env):
    with pytest.raises(ConfigError) as info:
        load_run_config({"colour": "red"}, environ={}, use_dotenv=False)
    assert info.value.key == "colour"


@pytest.mark.parametrize("flags, key", [
    ({"steps": "many"}, "steps"),
    ({"seed": 1.5}, "seed"),
    ({"timeout_s": True}, "timeout_s"),
    ({"backend": "carrier-pigeon"}, "backend"),
    ({"backend": "remote"}, "endpoint"),
    ({"timeout_s": 0}, "timeout_s"),
    ({"max_retries": -1}, "max_retries"),
    ({"max_in_flight": 0}, "max_in_flight"),
    ({"solving_budget": 0}, "solving_budget"),
    ({"steps": -1}, "steps"),
    ({"weights": "0.5,0.5"}, "weights"),
    ({"weights": "0.5,0.5,0.5,0.5"}, "weights"),
    ({"weights": "-0.5,0.5,0.5,0.5"}, "weights"),
    ({"log_level": "chatty"}, "log_level"),
])
def test_invalid_values(clean_env, flags, key):
    with pytest.raises(ConfigError) as info:
        load_run_config(flags, environ={}, use_dotenv=False)
    assert info.value.key == key


def test_env_values_are_converted(clean_env):
    environ = {"SAGE_BACKEND": "remote", "SAGE_ENDPOINT": "http://llm.local", "SAGE_TIMEOUT_S": "2.5",
               "SAGE_MAX_IN_FLIGHT": "8", "SAGE_LOG_LEVEL": "debug"}
    config = load_run_config(environ=environ, use_dotenv=False)
    assert (config.backend, config.endpoint, config.timeout_s) == ("remote", "http://llm.local", 2.5)
    assert config.max_in_flight == 8
    assert config.log_level == "debug"


def test_weights_flag_string(clean_env):
    config = load_run_config({"weights": "0.25,0.25,0.25,0.25"}, environ={}, use_dotenv=False)
    assert config.weights == (0.25, 0.25, 0.25, 0.25)


def test_dotenv_file_is_read(clean_env, monkeypatch):
    # registers SAGE_MODEL with monkeypatch so the value load_dotenv sets is undone
    monkeypatch.setenv("SAGE_MODEL", "placeholder")
    monkeypatch.delenv("SAGE_MODEL")
    (clean_env / ".env").write_text("SAGE_MODEL=from-dotenv\n")
    config = load_run_config()
    assert config.model == "from-dotenv"
