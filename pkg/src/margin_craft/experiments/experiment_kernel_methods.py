import logging
from typing import List

import numpy as np
from scipy.stats import kstest

from margin_craft import kmethods, seeding
from margin_craft.kernels import effective_rank, incomplete_cholesky, parse_kernel_spec
from margin_craft.models import ExperimentReport, ReportRow

from .experiment import Experiment, experiment

logger = logging.getLogger(__name__)

# study keys, the first component of every stream key path
IDENTICAL, NULL, POWER, SWEEP, RECOVERY, LOW_RANK = range(6)


@experiment("cca_power")
class CcaPowerExperiment(Experiment):
    """Kernel CCA: maximal on identical inputs, calibrated under independence, powerful on Y = X^2"""

    columns = ["study", "run", "n", "rho", "p_value"]

    def run_rows(self) -> List[ReportRow]:
        """Runs the identical-input, null-calibration and power studies"""
        kernel = self.kernel()
        kappa = float(self.param("kappa"))
        permutations = int(self.param("permutations"))
        rows = []

        n = int(self.param("identical_size"))
        xs = seeding.rng(self.seed, IDENTICAL).uniform(-1.0, 1.0, size=n)
        row: ReportRow = {"study": "identical", "run": 0, "n": n}
        with self.timed(row):
            row["rho"] = kmethods.kernel_cca(xs, xs, kernel, kernel, float(self.param("identical_kappa"))).rho
            row["p_value"] = kmethods.independence_test(
                xs, xs, kernel, kernel, kappa, permutations, self.run_seed(IDENTICAL)
            ).p_value
        rows.append(row)

        n = int(self.param("null_size"))
        for run in range(int(self.param("null_runs"))):
            generator = seeding.rng(self.seed, NULL, run)
            rows.append(self._test(NULL, run, generator.uniform(-1.0, 1.0, n), generator.uniform(-1.0, 1.0, n)))

        for n in self.config["sample_sizes"]:
            for run in range(self.config["replicates"]):
                generator = seeding.rng(self.seed, POWER, n, run)
                xs = generator.uniform(-1.0, 1.0, n)
                rows.append(self._test(POWER, run, xs, xs**2))
        return rows

    def evaluate(self, report: ExperimentReport) -> None:
        """Adds the identical-input, calibration and power verdicts"""
        identical = [r for r in report.rows if r["study"] == "identical"]
        min_rho = float(self.param("min_identical_rho"))
        report.add_verdict(
            "identical_inputs_maximally_correlated",
            all(r["rho"] >= min_rho for r in identical),
            f"rho {[round(r['rho'], 6) for r in identical]} (minimum {min_rho})",
        )

        null_p = [r["p_value"] for r in report.rows if r["study"] == "null"]
        max_ks = float(self.param("max_ks"))
        ks = float(kstest(null_p, "uniform").statistic) if null_p else float("nan")
        report.add_verdict(
            "null_p_values_uniform",
            ks <= max_ks,
            f"KS distance {ks:.4f} over {len(null_p)} runs (limit {max_ks})",
        )

        level = float(self.param("level"))
        min_power = float(self.param("min_power"))
        for n in self.config["sample_sizes"]:
            power_p = [r["p_value"] for r in report.rows if r["study"] == "power" and r["n"] == n]
            power = float(np.mean(np.array(power_p) <= level)) if power_p else float("nan")
            report.add_verdict(
                f"detects_quadratic_dependence[n={n}]",
                power >= min_power,
                f"power {power:.3f} at level {level} over {len(power_p)} runs (minimum {min_power})",
            )

    def _test(self, study: int, run: int, xs: np.ndarray, ys: np.ndarray) -> ReportRow:
        kernel = self.kernel()
        row: ReportRow = {"study": "null" if study == NULL else "power", "run": run, "n": len(xs)}
        with self.timed(row):
            result = kmethods.independence_test(
                xs,
                ys,
                kernel,
                kernel,
                float(self.param("kappa")),
                int(self.param("permutations")),
                self.run_seed(study, len(xs), run),
            )
        row.update({"rho": result.rho, "p_value": result.p_value})
        return row


@experiment("sdr_recovery")
class SdrRecoveryExperiment(Experiment):
    """Kernel dimension reduction recovers a one-dimensional central subspace"""

    columns = ["study", "run", "n", "dim", "objective", "angle_to_truth", "angle_to_sweep"]

    def run_rows(self) -> List[ReportRow]:
        """Runs the two-dimensional sweep comparison and the recovery study"""
        rows = [self._sweep()]
        n = int(self.config["sample_sizes"][-1])
        dim = int(self.param("dim"))
        truth = np.zeros((dim, 1))
        truth[0, 0] = 1.0
        for run in range(self.config["replicates"]):
            generator = seeding.rng(self.seed, RECOVERY, run)
            xs = generator.standard_normal((n, dim))
            ys = xs @ truth[:, 0] + float(self.param("noise")) * generator.standard_normal(n)
            row: ReportRow = {"study": "recovery", "run": run, "n": n, "dim": dim}
            with self.timed(row):
                result = self._estimate(xs, ys, self.run_seed(RECOVERY, run))
            row.update(
                {
                    "objective": result.objective,
                    "angle_to_truth": kmethods.principal_angle(result.B, truth),
                    "angle_to_sweep": float("nan"),
                }
            )
            rows.append(row)
        return rows

    def evaluate(self, report: ExperimentReport) -> None:
        """Adds the sweep-agreement and recovery verdicts"""
        sweep = [r for r in report.rows if r["study"] == "sweep"][0]
        tolerance = float(self.param("sweep_tolerance"))
        report.add_verdict(
            "estimate_matches_angle_sweep",
            sweep["angle_to_sweep"] <= tolerance,
            f"principal angle to the sweep minimizer {sweep['angle_to_sweep']:.3f} deg (limit {tolerance})",
        )
        recovery = [r for r in report.rows if r["study"] == "recovery"]
        max_angle = float(self.param("max_angle"))
        successes = sum(r["angle_to_truth"] <= max_angle for r in recovery)
        needed = int(self.param("min_successes"))
        report.add_verdict(
            "central_subspace_recovered",
            successes >= needed,
            f"{successes}/{len(recovery)} runs within {max_angle} deg (minimum {needed})",
        )

    def _estimate(self, xs: np.ndarray, ys: np.ndarray, seed: int) -> kmethods.SdrResult:
        return kmethods.estimate_sdr(
            xs,
            ys,
            1,
            self.kernel(),
            parse_kernel_spec(self.param("response_kernel")),
            epsilon=float(self.param("epsilon")),
            restarts=int(self.param("restarts")),
            seed=seed,
            max_iter=int(self.param("max_iter")),
        )

    def _sweep(self) -> ReportRow:
        n = int(self.param("sweep_size"))
        generator = seeding.rng(self.seed, SWEEP)
        xs = generator.standard_normal((n, 2))
        ys = xs[:, 0] + float(self.param("noise")) * generator.standard_normal(n)
        kx, ky = self.kernel(), parse_kernel_spec(self.param("response_kernel"))
        epsilon = float(self.param("epsilon"))

        row: ReportRow = {"study": "sweep", "run": 0, "n": n, "dim": 2}
        with self.timed(row):
            angles = np.arange(0.0, np.pi, float(self.param("sweep_step")))
            values = [
                kmethods.kdr_objective(np.array([[np.cos(a)], [np.sin(a)]]), xs, ys, kx, ky, epsilon) for a in angles
            ]
            best = angles[int(np.argmin(values))]
            result = self._estimate(xs, ys, self.run_seed(SWEEP))
        row.update(
            {
                "objective": result.objective,
                "angle_to_truth": kmethods.principal_angle(result.B, np.array([[1.0], [0.0]])),
                "angle_to_sweep": kmethods.principal_angle(result.B, np.array([[np.cos(best)], [np.sin(best)]])),
            }
        )
        return row


@experiment("low_rank")
class LowRankExperiment(Experiment):
    """Incomplete Cholesky meets its trace tolerance with n (k + 1) kernel evaluations"""

    columns = [
        "n",
        "tol",
        "rank",
        "residual_trace",
        "kernel_evaluations",
        "evaluation_limit",
        "max_abs_error",
        "effective_rank",
    ]

    def run_rows(self) -> List[ReportRow]:
        """Factorizes at the tolerance and at full rank for every sample size"""
        kernel = self.kernel()
        rows = []
        for n in self.config["sample_sizes"]:
            points = seeding.rng(self.seed, LOW_RANK, n).standard_normal((n, int(self.param("dim"))))
            gram = kernel.gram(points)
            trace = float(np.trace(gram))
            for tol in (float(self.param("tol_fraction")) * trace, 0.0):
                row: ReportRow = {"n": n, "tol": tol}
                with self.timed(row):
                    factor = incomplete_cholesky(kernel, points, tol, n)
                row.update(
                    {
                        "rank": factor.rank,
                        "residual_trace": factor.residual_trace,
                        "kernel_evaluations": factor.kernel_evaluations,
                        "evaluation_limit": n * (factor.rank + 1),
                        "max_abs_error": float(np.max(np.abs(gram - factor.reconstruct()))),
                        "effective_rank": effective_rank(gram, float(self.param("energy"))),
                    }
                )
                rows.append(row)
        return rows

    def evaluate(self, report: ExperimentReport) -> None:
        """Adds the tolerance, reconstruction and cost verdicts"""
        truncated = [r for r in report.rows if r["tol"] > 0]
        full = [r for r in report.rows if r["tol"] == 0]
        report.add_verdict(
            "residual_trace_within_tolerance",
            all(r["residual_trace"] <= r["tol"] for r in truncated),
            "; ".join(
                f"n={r['n']}: rank {r['rank']}, residual {r['residual_trace']:.3g} <= {r['tol']:.3g}"
                for r in truncated
            ),
        )
        max_error = float(self.param("max_error"))
        report.add_verdict(
            "full_rank_reconstruction_exact",
            all(r["max_abs_error"] <= max_error for r in full),
            "; ".join(f"n={r['n']}: max error {r['max_abs_error']:.3g}" for r in full),
        )
        report.add_verdict(
            "kernel_evaluations_within_n_k_plus_1",
            all(r["kernel_evaluations"] <= r["evaluation_limit"] for r in report.rows),
            "; ".join(f"n={r['n']}: {r['kernel_evaluations']} <= {r['evaluation_limit']}" for r in report.rows),
        )
