import logging
import os
import pkgutil
from typing import Dict, Sequence, Type

from margin_craft.models import ExperimentConfig, ExperimentReport

from .experiment import Experiment, experiment_class_name_postfix, experiment_module_name_prefix

logger = logging.getLogger(__name__)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Runs one experiment of the battery

    Args:
        config (ExperimentConfig): merged experiment config

    Returns:
        ExperimentReport: rows and verdicts
    """
    experiments = _get_experiment_dict()
    experiment_type = config["experiment_type"]
    experiment_cls = experiments.get(experiment_type)
    if experiment_cls is None:
        raise ValueError(f"no such experiment type: {experiment_type}")

    logger.info("experiment %s (%s) started, seed=%d", config["name"], experiment_type, config["seed"])
    report = experiment_cls(config).run()
    logger.info(
        "experiment %s finished: %d rows, %d/%d verdicts passed",
        config["name"],
        len(report.rows),
        sum(v["passed"] for v in report.verdicts),
        len(report.verdicts),
    )
    return report


def experiment_types() -> Sequence[str]:
    """Gets the registered experiment types"""
    return sorted(_get_experiment_dict())


# implementations


def _get_experiment_dict() -> Dict[str, Type[Experiment]]:
    """Gets a dict mapping experiment_type and Experiment classes

    Searches Experiment classes and dynamically loads them

    Returns:
        Dict[str, Type[Experiment]]: mapping for experiment_type and experiment
    """
    repository = {}
    pkg = __package__
    curr_dir = os.path.dirname(__file__)
    logger.debug("package:%s, current dir:%s", pkg, curr_dir)
    for _, module_name, ispkg in pkgutil.iter_modules([curr_dir], pkg + "."):
        logger.debug("module_name: %s, ispkg: %s", module_name, ispkg)
        if module_name.startswith(experiment_module_name_prefix):
            # import experiment_* module
            module = __import__(name=module_name, fromlist=[""])
            for member in dir(module):
                if member.endswith(experiment_class_name_postfix):
                    # Load *Experiment class
                    cls = getattr(module, member)
                    if cls is Experiment:
                        continue
                    if hasattr(cls, "experiment_type"):
                        repository[cls.experiment_type] = cls
                    else:
                        logger.warning(
                            "The class: %s is not registered, because it has no `@experiment('xxxxx')` decorator",
                            cls,
                        )

    return repository
