from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence, TypedDict


class LambdaSchedule(TypedDict):
    """Regularization schedule lambda_n = c * n^(-exponent)

    Args:
        TypedDict (_type_): typed dict
    """

    c: float
    exponent: float


class GlobalConfig(TypedDict, total=False):
    """Settings shared by every experiment

    Args:
        TypedDict (_type_): typed dict
    """

    seed: int
    backend: str
    max_iter: int
    step_c: float
    support_threshold: float


class ExperimentConfig(GlobalConfig, total=False):
    """Experiment Config, globals merged in

    Args:
        TypedDict (_type_): typed dict
    """

    name: str
    experiment_type: str
    sample_sizes: Sequence[int]
    replicates: int
    lambda_schedule: LambdaSchedule
    kernel: str
    loss: str
    output_path: str
    params: Mapping[str, Any]


class Verdict(TypedDict):
    """Outcome of one acceptance check

    Args:
        TypedDict (_type_): typed dict
    """

    check: str
    passed: bool
    detail: str


ReportRow = Dict[str, Any]


@dataclass
class ExperimentReport:
    """Per-run rows and verdicts of an experiment"""

    experiment: str
    columns: Sequence[str]
    rows: List[ReportRow] = field(default_factory=list)
    verdicts: List[Verdict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """True when every verdict passes"""
        return all(v["passed"] for v in self.verdicts)

    def add_verdict(self, check: str, passed: bool, detail: str) -> None:
        """Records a verdict

        Args:
            check (str): name of the checked invariant
            passed (bool): outcome
            detail (str): measured values
        """
        self.verdicts.append(Verdict(check=check, passed=bool(passed), detail=detail))
