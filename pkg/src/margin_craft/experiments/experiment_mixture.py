import logging
from typing import List

import numpy as np

from margin_craft import analysis, classify, losses
from margin_craft.losses import Unavailable
from margin_craft.models import ExperimentReport, ReportRow

from .experiment import Experiment, experiment, median_of

logger = logging.getLogger(__name__)

# stream keys of a replicate
TRAIN_KEY = 0
TEST_KEY = 1


class MixtureExperimentBase(Experiment):
    """Trains on the symmetric two-component mixture and measures risks with the exact eta oracle"""

    def benchmark(self) -> analysis.MixtureBenchmark:
        """Gets the mixture at +-separation"""
        return analysis.MixtureBenchmark.symmetric(separation=float(self.param("separation")))

    def train_replicate(self, n: int, replicate: int, loss: str) -> classify.Model:
        """Trains on a fresh sample of size n"""
        data = analysis.sample(self.benchmark(), n, self.run_seed(n, replicate, TRAIN_KEY))
        return classify.train(data, self.kernel(), loss, self.lambda_for(n), self.opt_config())

    def measure(self, row: ReportRow, model: classify.Model, replicate: int) -> None:
        """Adds test risk, phi-risk, norm and support fraction of a model to a row"""
        benchmark = self.benchmark()
        test_seed = self.run_seed(row["n"], replicate, TEST_KEY)
        test_size = int(self.param("test_size"))

        def f(xs: np.ndarray) -> np.ndarray:
            return classify.decision_batch(model, xs)

        row["test_risk"] = analysis.mixture_risk(benchmark, f, test_size, test_seed)
        row["phi_risk"] = analysis.mixture_phi_risk(benchmark, f, model.loss, test_size, test_seed)
        row["rkhs_norm_sq"] = classify.rkhs_norm_sq(model)
        row["support_fraction"] = classify.support_fraction(model, self.config["support_threshold"])


@experiment("sv_fraction")
class SvFractionExperiment(MixtureExperimentBase):
    """The support-vector fraction of hinge models approaches twice the Bayes risk"""

    columns = ["n", "replicate", "lambda", "test_risk", "phi_risk", "rkhs_norm_sq", "support_fraction", "sv_gap"]

    def run_rows(self) -> List[ReportRow]:
        """Trains `replicates` models per sample size"""
        target = 2.0 * self.benchmark().bayes_risk
        rows = []
        for n in self.config["sample_sizes"]:
            for replicate in range(self.config["replicates"]):
                row: ReportRow = {"n": n, "replicate": replicate, "lambda": self.lambda_for(n)}
                with self.timed(row):
                    model = self.train_replicate(n, replicate, self.config["loss"])
                self.measure(row, model, replicate)
                row["sv_gap"] = abs(row["support_fraction"] - target)
                rows.append(row)
        return rows

    def evaluate(self, report: ExperimentReport) -> None:
        """Adds the range and trend verdicts"""
        sizes = self.config["sample_sizes"]
        smallest, largest = sizes[0], sizes[-1]
        fraction = median_of(report.rows, "support_fraction", n=largest)
        lower, upper = float(self.param("lower")), float(self.param("upper"))
        report.add_verdict(
            "support_fraction_in_range",
            lower <= fraction <= upper,
            f"median support fraction {fraction:.4f} at n={largest}, range [{lower}, {upper}],"
            f" 2R*={2.0 * self.benchmark().bayes_risk:.5f}",
        )
        gap_small = median_of(report.rows, "sv_gap", n=smallest)
        gap_large = median_of(report.rows, "sv_gap", n=largest)
        report.add_verdict(
            "support_fraction_approaches_twice_bayes_risk",
            gap_large < gap_small,
            f"median |fraction - 2R*| {gap_small:.4f} at n={smallest}, {gap_large:.4f} at n={largest}",
        )


@experiment("calibration")
class CalibrationExperiment(MixtureExperimentBase):
    """Probability estimates of logistic and quadratic models match eta; hinge models refuse"""

    columns = ["n", "replicate", "loss", "lambda", "test_risk", "probability_mae"]

    def run_rows(self) -> List[ReportRow]:
        """Trains one model per calibrated loss, sample size and replicate"""
        benchmark = self.benchmark()
        test_size = int(self.param("test_size"))
        rows = []
        for n in self.config["sample_sizes"]:
            for replicate in range(self.config["replicates"]):
                for loss in self.param("losses"):
                    row: ReportRow = {"n": n, "replicate": replicate, "loss": loss, "lambda": self.lambda_for(n)}
                    with self.timed(row):
                        model = self.train_replicate(n, replicate, loss)
                    test_seed = self.run_seed(n, replicate, TEST_KEY)
                    row["test_risk"] = analysis.mixture_risk(
                        benchmark, lambda xs: classify.decision_batch(model, xs), test_size, test_seed
                    )
                    row["probability_mae"] = analysis.probability_mae(
                        benchmark, lambda xs: _probabilities(model, xs), test_size, test_seed
                    )
                    rows.append(row)
        return rows

    def evaluate(self, report: ExperimentReport) -> None:
        """Adds one verdict per loss and the hinge refusal verdict"""
        largest = self.config["sample_sizes"][-1]
        max_mae = float(self.param("max_mae"))
        for loss in self.param("losses"):
            mae = median_of(report.rows, "probability_mae", n=largest, loss=loss)
            report.add_verdict(
                f"probability_estimates_calibrated[{loss}]",
                mae <= max_mae,
                f"median MAE {mae:.4f} at n={largest} (limit {max_mae})",
            )

        hinge_model = self.train_replicate(int(self.param("hinge_size")), 0, "hinge")
        refusal = classify.estimate_probability(hinge_model, hinge_model.points[0])
        report.add_verdict(
            "hinge_outputs_carry_no_probability",
            isinstance(refusal, Unavailable),
            f"estimate_probability returned {refusal!r}",
        )


@experiment("consistency")
class ConsistencyExperiment(MixtureExperimentBase):
    """Test risk approaches the Bayes risk as n grows with lambda_n -> 0 slowly"""

    columns = [
        "n",
        "replicate",
        "lambda",
        "test_risk",
        "phi_risk",
        "excess_risk",
        "excess_phi_risk",
        "excess_risk_bound",
        "rkhs_norm_sq",
        "support_fraction",
    ]

    def run_rows(self) -> List[ReportRow]:
        """Trains `replicates` models per sample size"""
        benchmark = self.benchmark()
        loss = self.config["loss"]
        test_size = int(self.param("test_size"))
        optimal = analysis.mixture_optimal_phi_risk(benchmark, loss, test_size, self.run_seed(TEST_KEY))
        rows = []
        for n in self.config["sample_sizes"]:
            for replicate in range(self.config["replicates"]):
                row: ReportRow = {"n": n, "replicate": replicate, "lambda": self.lambda_for(n)}
                with self.timed(row):
                    model = self.train_replicate(n, replicate, loss)
                self.measure(row, model, replicate)
                row["excess_risk"] = row["test_risk"] - benchmark.bayes_risk
                row["excess_phi_risk"] = row["phi_risk"] - optimal
                row["excess_risk_bound"] = losses.excess_risk_bound(loss, row["excess_phi_risk"])
                rows.append(row)
        return rows

    def evaluate(self, report: ExperimentReport) -> None:
        """Adds the closeness and trend verdicts"""
        sizes = self.config["sample_sizes"]
        smallest, largest = sizes[0], sizes[-1]
        bayes = self.benchmark().bayes_risk
        tolerance = float(self.param("tolerance"))
        risk_small = median_of(report.rows, "test_risk", n=smallest)
        risk_large = median_of(report.rows, "test_risk", n=largest)
        report.add_verdict(
            "test_risk_near_bayes_risk",
            abs(risk_large - bayes) <= tolerance,
            f"median test risk {risk_large:.5f} at n={largest}, R*={bayes:.5f}, tolerance {tolerance}",
        )
        report.add_verdict(
            "test_risk_decreases_with_n",
            risk_large < risk_small,
            f"median test risk {risk_small:.5f} at n={smallest}, {risk_large:.5f} at n={largest}",
        )


# implementations


def _probabilities(model: classify.Model, xs: np.ndarray) -> np.ndarray:
    estimates = [losses.invert_link(model.loss, float(v)) for v in classify.decision_batch(model, xs)]
    return np.array(estimates, dtype=float)
