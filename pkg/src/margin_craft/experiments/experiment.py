import logging
import time
from abc import ABC, abstractmethod
from contextlib import contextmanager
from typing import Any, Final, Iterator, List, Sequence

import numpy as np

from margin_craft import seeding
from margin_craft.kernels import Kernel, parse_kernel_spec
from margin_craft.models import ExperimentConfig, ExperimentReport, ReportRow
from margin_craft.optim import OptConfig

logger = logging.getLogger(__name__)


class Experiment(ABC):
    """Experiment of the battery

    Subclasses declare their CSV `columns` and are registered with `@experiment("type")`.
    """

    experiment_type: str
    columns: Sequence[str]

    def __init__(self, config: ExperimentConfig):
        """Constructor

        Args:
            config (ExperimentConfig): merged experiment config
        """
        self.config = config
        self.seed: int = config["seed"]
        self.params = config.get("params", {})

    def run(self) -> ExperimentReport:
        """Runs every replicate and evaluates the verdicts

        Returns:
            ExperimentReport: rows ordered by (n, replicate) and verdicts
        """
        report = ExperimentReport(experiment=self.config["name"], columns=list(self.columns))
        report.rows.extend(self.run_rows())
        self.evaluate(report)
        return report

    @abstractmethod
    def run_rows(self) -> List[ReportRow]:
        """Executes the runs

        Returns:
            List[ReportRow]: one row per run
        """
        pass

    @abstractmethod
    def evaluate(self, report: ExperimentReport) -> None:
        """Adds verdicts computed from the rows

        Args:
            report (ExperimentReport): report with rows
        """
        pass

    def param(self, key: str) -> Any:
        """Gets an experiment-specific setting"""
        if key not in self.params:
            raise ValueError(f"{self.config['name']}: missing params.{key}")
        return self.params[key]

    def kernel(self) -> Kernel:
        """Gets the configured kernel"""
        return parse_kernel_spec(self.config["kernel"])

    def lambda_for(self, n: int) -> float:
        """Gets lambda_n = c * n^(-exponent)"""
        schedule = self.config["lambda_schedule"]
        return float(schedule["c"] * n ** (-schedule["exponent"]))

    def opt_config(self) -> OptConfig:
        """Gets the optimizer settings"""
        return OptConfig(
            max_iter=self.config["max_iter"],
            step_c=self.config["step_c"],
            backend=self.config["backend"],
        )

    def run_seed(self, *keys: int) -> int:
        """Gets the seed of a run, derived from the experiment seed and the run keys"""
        return seeding.derive_seed(self.seed, *keys)

    @contextmanager
    def timed(self, row: ReportRow) -> Iterator[ReportRow]:
        """Records the wall time of a run in `row["wall_time"]` and logs it"""
        started = time.perf_counter()
        yield row
        row["wall_time"] = time.perf_counter() - started
        logger.info(
            "%s run %s: %.3fs",
            self.config["name"],
            {k: v for k, v in row.items() if k in ("n", "replicate", "run", "loss", "study")},
            row["wall_time"],
        )


def median_of(rows: Sequence[ReportRow], value: str, **where: Any) -> float:
    """Gets the median of a column over the rows matching the filters

    Args:
        rows (Sequence[ReportRow]): report rows
        value (str): measured column
        **where (Any): column filters, e.g. `n=2000`

    Returns:
        float: median, nan when no row matches
    """
    selected = [r[value] for r in rows if all(r.get(k) == v for k, v in where.items())]
    return float(np.median(selected)) if selected else float("nan")


#
# Decorator declaration
#

experiment_module_name_prefix: Final[str] = __package__ + ".experiment_"

experiment_class_name_postfix: Final[str] = "Experiment"


def experiment(experiment_type: str):  # type: ignore
    """Decorator for Experiment classes.

    Args:
        experiment_type (str): experiment type
    """

    def _inner_decorator(experiment_cls: type[Experiment]):  # type: ignore
        # validation
        assert experiment_cls.__module__.startswith(experiment_module_name_prefix)
        assert experiment_cls.__name__.endswith(experiment_class_name_postfix)

        # inject `experiment_type`
        setattr(experiment_cls, "experiment_type", experiment_type)
        return experiment_cls

    return _inner_decorator
