import logging
from typing import Dict, List

import numpy as np

from margin_craft import analysis, classify, losses, seeding
from margin_craft.kernels import parse_kernel_spec
from margin_craft.models import ExperimentReport, ReportRow

from .experiment import Experiment, experiment

logger = logging.getLogger(__name__)


@experiment("psi_bound")
class PsiBoundExperiment(Experiment):
    """psi(R(f) - R*) <= R_phi(f) - R_phi* on random finite distributions

    Each replicate draws a DiscreteJoint and decision values and checks every configured loss. One row
    per loss aggregates the replicates.
    """

    columns = [
        "loss",
        "checks",
        "violations",
        "max_psi_gap",
        "upper_bound_violations",
        "minimizer_max_gap",
        "hinge_identity_error",
    ]

    def run_rows(self) -> List[ReportRow]:
        """Checks the inequality on `replicates` random triples per loss"""
        loss_names = list(self.param("losses"))
        bound = float(self.param("decision_bound"))
        max_atoms = int(self.param("max_atoms"))
        rows: Dict[str, ReportRow] = {
            name: {
                "loss": name,
                "checks": 0,
                "violations": 0,
                "max_psi_gap": -np.inf,
                "upper_bound_violations": 0,
                "minimizer_max_gap": 0.0,
                "hinge_identity_error": _hinge_identity_error() if name == "hinge" else 0.0,
            }
            for name in loss_names
        }

        for i in range(self.config["replicates"]):
            generator = seeding.rng(self.seed, i)
            joint = analysis.random_joint(generator, max_atoms)
            values = generator.uniform(-bound, bound, size=joint.size)
            # exact zeros exercise the sign(0) = +1 convention
            values[generator.random(joint.size) < 0.1] = 0.0
            for name in loss_names:
                row = rows[name]
                check = analysis.check_psi_bound(joint, values, name)
                row["checks"] += 1
                row["violations"] += 0 if check.holds else 1
                row["max_psi_gap"] = max(row["max_psi_gap"], check.psi_value - check.excess_phi_risk)
                if analysis.risk(joint, values) > analysis.phi_risk(joint, values, name) + analysis.PSI_SLACK:
                    row["upper_bound_violations"] += 1
                row["minimizer_max_gap"] = max(row["minimizer_max_gap"], _minimizer_gap(joint, name))

        return [rows[name] for name in loss_names]

    def evaluate(self, report: ExperimentReport) -> None:
        """Adds the inequality, upper-bound, minimizer and hinge-identity verdicts"""
        for row in report.rows:
            report.add_verdict(
                f"psi_bound[{row['loss']}]",
                row["violations"] == 0,
                f"{row['violations']} violations in {row['checks']} checks, max gap {row['max_psi_gap']:.3g}",
            )
            report.add_verdict(
                f"risk_below_phi_risk[{row['loss']}]",
                row["upper_bound_violations"] == 0,
                f"{row['upper_bound_violations']} violations",
            )
            report.add_verdict(
                f"pointwise_minimizer_attains_optimal_phi_risk[{row['loss']}]",
                row["minimizer_max_gap"] <= 1e-8,
                f"max gap {row['minimizer_max_gap']:.3g}",
            )
            if row["loss"] == "hinge":
                report.add_verdict(
                    "hinge_psi_is_identity",
                    row["hinge_identity_error"] <= 1e-6,
                    f"max |psi(theta) - theta| {row['hinge_identity_error']:.3g}",
                )


@experiment("sieve_bound")
class SieveBoundExperiment(Experiment):
    """||f_n||_H^2 <= phi(0) / lambda for randomized training runs"""

    columns = ["run", "n", "loss", "kernel", "lambda", "rkhs_norm_sq", "bound", "objective", "phi_zero", "holds"]

    def run_rows(self) -> List[ReportRow]:
        """Trains one model per replicate with a random loss, kernel and lambda"""
        loss_names = list(self.param("losses"))
        kernel_specs = list(self.param("kernels"))
        log_lambda = np.log10([float(self.param("lambda_min")), float(self.param("lambda_max"))])
        tolerance = float(self.param("tolerance"))
        n = int(self.config["sample_sizes"][0])

        rows = []
        for i in range(self.config["replicates"]):
            generator = seeding.rng(self.seed, i)
            loss = losses.get_loss(loss_names[i % len(loss_names)])
            kernel = parse_kernel_spec(kernel_specs[(i // len(loss_names)) % len(kernel_specs)])
            lam = float(10 ** generator.uniform(*log_lambda))
            points = generator.uniform(-1.0, 1.0, size=(n, 2))
            labels = np.where(points[:, 0] + 0.5 * generator.standard_normal(n) >= 0, 1, -1)
            data = classify.LabeledDataset(points=points, labels=labels)

            row: ReportRow = {"run": i, "n": n, "loss": loss.name, "kernel": kernel.spec, "lambda": lam}
            with self.timed(row):
                model = classify.train(data, kernel, loss, lam, self.opt_config())
            phi_zero = float(loss.value(0.0))
            row.update(
                {
                    "rkhs_norm_sq": classify.rkhs_norm_sq(model),
                    "bound": phi_zero / lam,
                    "objective": classify.objective(model, data),
                    "phi_zero": phi_zero,
                }
            )
            row["holds"] = row["rkhs_norm_sq"] <= row["bound"] + tolerance
            rows.append(row)
        return rows

    def evaluate(self, report: ExperimentReport) -> None:
        """Adds the sieve and objective verdicts"""
        failures = [r["run"] for r in report.rows if not r["holds"]]
        report.add_verdict(
            "sieve_bound",
            not failures,
            f"{len(report.rows) - len(failures)}/{len(report.rows)} runs within phi(0)/lambda; failing runs {failures}",
        )
        above = [r["run"] for r in report.rows if r["objective"] > r["phi_zero"] + 1e-9]
        report.add_verdict("objective_at_most_phi_zero", not above, f"failing runs {above}")


# implementations


def _hinge_identity_error() -> float:
    thetas = np.linspace(0.0, 1.0, 1001)
    return float(max(abs(losses.psi_transform("hinge", float(t)) - t) for t in thetas))


def _minimizer_gap(joint: analysis.DiscreteJoint, loss: str) -> float:
    if np.any((joint.eta == 0.0) | (joint.eta == 1.0)):
        return 0.0
    minimizers = [losses.conditional_minimizer(loss, float(e)) for e in joint.eta]
    return abs(analysis.phi_risk(joint, minimizers, loss) - analysis.optimal_phi_risk(joint, loss))
