from pathlib import Path

from margin_craft import config_loader


def test_sample_yaml():
    """Tests if sample yaml complies the config schema"""
    curr_dir = Path(__file__).parent

    config_loader.load(str(curr_dir.parent / "config-min-sample.yaml"))
    config_loader.load(str(curr_dir.parent / "config-sample.yaml"))


def test_sample_yaml_covers_every_experiment_type():
    """Tests if the full sample configures every experiment type"""
    curr_dir = Path(__file__).parent

    config = config_loader.load(str(curr_dir.parent / "config-sample.yaml"))
    types = {e["experiment_type"] for e in config["experiments"].values()}  # type: ignore
    assert types == set(config_loader.DEFAULT_EXPERIMENT_CONFIGS)
