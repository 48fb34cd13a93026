import copy
import json
from os import path
from typing import Dict, List, Literal, Optional, TypedDict, Union

import jsonschema
import yaml

from . import config_schema
from .models import ExperimentConfig

# type declaration
ConfigElement = Union[str, int, float, bool, "ConfigList", "ConfigValue"]
ConfigList = List[ConfigElement]
ConfigValue = Dict[str, ConfigElement]

# constants
DEFAULT_CONFIG_FILES = [
    "experiment-config.yaml",
    "experiment-config.yml",
    "experiment-config.json",
]


class ConfigFile(TypedDict):
    """Config File

    Args:
        TypedDict (_type_): typed dict
    """

    FilePath: str
    Type: Literal["json", "yaml"]


def load(file_path: Optional[str]) -> ConfigValue:
    """Loads configuration from specified file path

    Args:
        file_path (str): file path, or None if use the default config file

    Returns:
        ConfigValue: config dict with defaults and globals merged into every experiment
    """
    config_file = _resolve_file_path(file_path)
    with open(config_file["FilePath"], "r") as f:
        if config_file["Type"] == "json":
            config = json.load(f)
        else:
            config = yaml.safe_load(f)
    jsonschema.validate(config, config_schema.get_schema())

    return _merge_configs(config)


def default_config_file_exists() -> bool:
    """Tells whether one of the default config files exists in the working directory"""
    return any(path.exists(file_name) for file_name in DEFAULT_CONFIG_FILES)


def builtin_config(experiment_type: str) -> ConfigValue:
    """Gets the configuration used when no config file is given

    Args:
        experiment_type (str): experiment type, also used as the experiment key

    Returns:
        ConfigValue: config dict with one experiment
    """
    if experiment_type not in DEFAULT_EXPERIMENT_CONFIGS:
        raise ValueError(
            f"no such experiment type: {experiment_type} (expected one of {list(DEFAULT_EXPERIMENT_CONFIGS)})"
        )
    return _merge_configs({"experiments": {experiment_type: {"experiment_type": experiment_type}}})


def experiment_config(config: ConfigValue, name: str) -> ExperimentConfig:
    """Picks one merged experiment by key

    A built-in experiment type may be named even when the config file has no entry for it; the file's
    globals still apply.

    Args:
        config (ConfigValue): loaded config
        name (str): experiment key or type

    Returns:
        ExperimentConfig: merged experiment config
    """
    experiments = config["experiments"]
    assert isinstance(experiments, dict)
    if name in experiments:
        selected = experiments[name]
    elif name in DEFAULT_EXPERIMENT_CONFIGS:
        globals_ = config.get("globals") or {}
        assert isinstance(globals_, dict)
        # globals left at their built-in values keep the type's own run settings
        default_glo = default_global_config()
        overrides = {k: v for k, v in globals_.items() if default_glo.get(k) != v}
        selected = _merge_configs({"globals": overrides, "experiments": {name: {"experiment_type": name}}})[
            "experiments"
        ][
            name  # type: ignore
        ]
    else:
        raise ValueError(f"no such experiment: {name} (configured: {list(experiments)})")
    return selected  # type: ignore


def _config_file(config_file_path: str) -> ConfigFile:
    conf: ConfigFile = {
        "FilePath": config_file_path,
        "Type": "json",  # default
    }
    if config_file_path.endswith("yaml") or config_file_path.endswith("yml"):
        conf["Type"] = "yaml"

    return conf


def _resolve_file_path(file_path: Optional[str]) -> ConfigFile:
    if file_path:
        if path.exists(file_path):
            return _config_file(file_path)
        else:
            raise FileNotFoundError(file_path)
    else:
        for file_name in DEFAULT_CONFIG_FILES:
            if path.exists(file_name):
                return _config_file(file_name)

        raise ValueError("config file not found. locate `experiment-config.yaml` or specify `-c your-config.yaml`")


def _merge_configs(config: ConfigValue) -> ConfigValue:
    default_glo = default_global_config()
    user_glo = config.get("globals") or {}
    assert isinstance(user_glo, dict)
    glo = _merge_dicts(default_glo, user_glo)

    merged = {}
    experiments = config["experiments"]
    for key in experiments:  # type: ignore
        experiment = experiments[key]  # type: ignore
        # built-in globals < built-in type defaults < file globals < file entry
        defaults = _merge_dicts(default_glo, copy.deepcopy(DEFAULT_EXPERIMENT_CONFIGS[experiment["experiment_type"]]))
        experiment_config = _merge_dicts(_merge_dicts(defaults, user_glo), experiment)
        experiment_config["name"] = key
        _validate_experiment(experiment_config)

        merged[key] = experiment_config

    return dict(config, **{"globals": glo, "experiments": merged})


def _validate_experiment(experiment: ConfigValue) -> None:
    schedule = experiment["lambda_schedule"]
    assert isinstance(schedule, dict)
    if experiment["experiment_type"] == "consistency" and not 0 < schedule["exponent"] < 1:  # type: ignore
        raise ValueError(
            f"{experiment['name']}: lambda_schedule.exponent must lie in (0, 1) so that lambda_n decays slowly"
            f" to zero: {schedule['exponent']}"
        )
    sizes = experiment["sample_sizes"]
    assert isinstance(sizes, list)
    if sorted(sizes) != sizes:  # type: ignore
        raise ValueError(f"{experiment['name']}: sample_sizes must be increasing: {sizes}")


DEFAULT_SEED = 20060701
DEFAULT_MAX_ITER = 2000
DEFAULT_SUPPORT_THRESHOLD = 1e-6
DEFAULT_LAMBDA_SCHEDULE: ConfigValue = {"c": 1.0, "exponent": 0.5}


def default_global_config() -> ConfigValue:
    """Gets default configuration of `globals` key

    Returns:
        ConfigValue: default global config dict
    """
    return {
        "seed": DEFAULT_SEED,
        "backend": "subgrad",
        "max_iter": DEFAULT_MAX_ITER,
        "step_c": 1.0,
        "support_threshold": DEFAULT_SUPPORT_THRESHOLD,
    }


def _experiment_defaults(
    sample_sizes: ConfigList,
    replicates: int,
    params: ConfigValue,
    loss: str = "hinge",
    kernel: str = "gauss:1.0",
    lambda_c: float = 1.0,
    **run_settings: ConfigElement,
) -> ConfigValue:
    return dict(
        {
            "sample_sizes": sample_sizes,
            "replicates": replicates,
            "lambda_schedule": dict(DEFAULT_LAMBDA_SCHEDULE, c=lambda_c),
            "kernel": kernel,
            "loss": loss,
            "params": params,
        },
        **run_settings,
    )


DEFAULT_EXPERIMENT_CONFIGS: Dict[str, ConfigValue] = {
    "psi_bound": _experiment_defaults(
        [1],
        10_000,
        {"max_atoms": 6, "decision_bound": 3.0, "losses": ["hinge", "logistic", "exp", "quad"]},
    ),
    "sieve_bound": _experiment_defaults(
        [40],
        100,
        {
            "lambda_min": 1e-3,
            "lambda_max": 10.0,
            "losses": ["hinge", "logistic", "exp", "quad"],
            "kernels": ["linear", "gauss:1.0", "poly:2:1.0"],
            "tolerance": 1e-6,
        },
    ),
    "sv_fraction": _experiment_defaults(
        [200, 2000],
        10,
        {"separation": 1.0, "lower": 0.20, "upper": 0.44, "test_size": 20_000},
        lambda_c=0.2,
        step_c=0.1,
        max_iter=10_000,
    ),
    "calibration": _experiment_defaults(
        [2000],
        10,
        {"separation": 1.0, "losses": ["logistic", "quad"], "max_mae": 0.1, "test_size": 5_000, "hinge_size": 50},
        lambda_c=0.1,
        step_c=0.1,
    ),
    "consistency": _experiment_defaults(
        [250, 1000, 4000],
        10,
        {"separation": 1.0, "tolerance": 0.03, "test_size": 20_000},
    ),
    "cca_power": _experiment_defaults(
        [500],
        20,
        {
            "kappa": 1e-2,
            "permutations": 99,
            "level": 0.05,
            "min_power": 0.9,
            "identical_size": 50,
            "identical_kappa": 1e-6,
            "min_identical_rho": 0.99,
            "null_size": 100,
            "null_runs": 200,
            "max_ks": 0.15,
        },
    ),
    "sdr_recovery": _experiment_defaults(
        [500],
        10,
        {
            "dim": 5,
            "noise": 0.1,
            "epsilon": 1e-3,
            "restarts": 2,
            "max_iter": 100,
            "max_angle": 10.0,
            "min_successes": 8,
            "sweep_size": 300,
            "sweep_step": 0.01,
            "sweep_tolerance": 2.0,
            "response_kernel": "gauss:1.0",
        },
    ),
    "low_rank": _experiment_defaults(
        [200],
        1,
        {"dim": 3, "tol_fraction": 1e-3, "max_error": 1e-8, "energy": 0.99},
    ),
}


def _merge_dicts(conf1: dict, conf2: dict) -> ConfigValue:
    ret = conf1.copy()
    for k, v2 in conf2.items():
        if k in ret:
            v1 = ret[k]
            if isinstance(v1, dict) and isinstance(v2, dict):
                ret[k] = _merge_dicts(v1, v2)
            else:
                ret[k] = v2  # overwrite
        else:
            ret[k] = v2

    return ret
