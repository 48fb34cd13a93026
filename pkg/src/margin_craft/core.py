import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence

import jsonschema
import numpy as np

from . import analysis, classify, config_loader, formats, kmethods, losses, optim
from .experiments import run_experiment
from .kernels import parse_kernel_spec
from .models import ExperimentConfig, ExperimentReport

logger = logging.getLogger(__name__)

# exit status
EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

PSI_TABLE_THETAS = tuple(np.round(np.linspace(0.0, 1.0, 11), 1))


@dataclass
class CommandOpts:
    """Command Options"""

    command: Optional[str] = None
    # inputs
    data: Optional[str] = None
    data2: Optional[str] = None
    model: Optional[str] = None
    joint: Optional[str] = None
    format: str = "csv"
    n_features: Optional[int] = None
    # training
    kernel: Optional[str] = None
    kernel2: Optional[str] = None
    loss: Optional[str] = None
    lam: Optional[float] = None
    backend: Optional[str] = None
    max_iter: Optional[int] = None
    step_c: Optional[float] = None
    # kernel methods
    kappa: float = kmethods.DEFAULT_KAPPA
    permutations: int = 99
    dim: int = 1
    epsilon: float = kmethods.DEFAULT_EPSILON
    restarts: int = kmethods.DEFAULT_RESTARTS
    # experiments
    experiment: Optional[str] = None
    config_file: Optional[str] = None
    seed: Optional[int] = None
    out: Optional[str] = None


def main(opts: CommandOpts) -> int:
    """The main function

    Args:
        opts (CommandOpts): command options

    Returns:
        int: exit status, 0 pass, 1 a verdict failed, 2 usage or input error
    """
    commands: Dict[str, Callable[[CommandOpts], int]] = {
        "train": train_cmd,
        "predict": predict_cmd,
        "probe": probe_cmd,
        "cca": cca_cmd,
        "sdr": sdr_cmd,
        "experiment": experiment_cmd,
    }
    command = commands.get(opts.command or "")
    if command is None:
        logger.error("no such command: %s (expected one of %s)", opts.command, list(commands))
        return EXIT_USAGE
    try:
        return command(opts)
    except (ValueError, OSError, ArithmeticError, jsonschema.ValidationError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_USAGE


def train_cmd(opts: CommandOpts) -> int:
    """Trains a model and writes the model file"""
    data = formats.ingest(_required(opts.data, "DATA"), opts.format, opts.n_features)
    kernel = parse_kernel_spec(_required(opts.kernel, "--kernel"))
    defaults = optim.OptConfig()
    opt_config = optim.OptConfig(
        max_iter=defaults.max_iter if opts.max_iter is None else opts.max_iter,
        step_c=defaults.step_c if opts.step_c is None else opts.step_c,
        backend=defaults.backend if opts.backend is None else opts.backend,
    )
    model = classify.train(data, kernel, _required(opts.loss, "--loss"), _required(opts.lam, "--lambda"), opt_config)
    formats.save_model(model, _required(opts.out, "--out"))

    _print_block(
        {
            "n": len(data),
            "kernel": kernel.spec,
            "loss": model.loss,
            "lambda": model.lam,
            "objective": classify.objective(model, data),
            "training_risk": classify.empirical_risk(model, data),
            "rkhs_norm_sq": classify.rkhs_norm_sq(model),
            "sieve_radius_sq": float(model.surrogate.value(0.0)) / model.lam,
            "support_fraction": classify.support_fraction(model),
        }
    )
    return EXIT_PASS


def predict_cmd(opts: CommandOpts) -> int:
    """Emits `decision,label` for every input row"""
    model = formats.load_model(_required(opts.model, "MODEL"))
    n_features = opts.n_features
    if n_features is None and opts.format == "svmlight" and np.ndim(model.points) == 2:
        # trailing all-zero features are absent from svmlight rows
        n_features = int(np.shape(model.points)[1])
    points = formats.read_points(_required(opts.data, "DATA"), opts.format, n_features)
    decisions = classify.decision_batch(model, points)
    rows = [{"decision": float(d), "label": 1 if d >= 0 else -1} for d in decisions]
    if opts.out:
        formats.write_rows_csv(opts.out, ["decision", "label"], rows)
    else:
        _print("decision,label")
        for row in rows:
            _print(f"{formats.format_number(row['decision'])},{row['label']}")
    return EXIT_PASS


def probe_cmd(opts: CommandOpts) -> int:
    """Prints the Bayes risk, optimal phi-risks and psi tables of a DiscreteJoint file"""
    joint = formats.read_discrete_joint(_required(opts.joint, "JOINT_FILE"))
    names = losses.loss_names()
    _print_block({"atoms": joint.size, "bayes_risk": analysis.bayes_risk(joint)})
    _print_block({f"optimal_phi_risk[{name}]": analysis.optimal_phi_risk(joint, name) for name in names})

    rows = [
        dict({"theta": float(theta)}, **{name: losses.psi_transform(name, float(theta)) for name in names})
        for theta in PSI_TABLE_THETAS
    ]
    columns = ["theta", *names]
    _print(",".join(columns))
    for row in rows:
        _print(",".join(formats.format_number(row[c]) for c in columns))
    if opts.out:
        formats.write_rows_csv(opts.out, columns, rows)
    return EXIT_PASS


def cca_cmd(opts: CommandOpts) -> int:
    """Runs the kernel CCA independence test on two samples"""
    xs = formats.read_points(_required(opts.data, "DATA_X"))
    ys = formats.read_points(_required(opts.data2, "DATA_Y"))
    k1 = parse_kernel_spec(opts.kernel or "gauss:1.0")
    k2 = parse_kernel_spec(opts.kernel2 or k1.spec)
    seed = opts.seed if opts.seed is not None else config_loader.DEFAULT_SEED

    cca = kmethods.kernel_cca(xs, ys, k1, k2, opts.kappa)
    test = kmethods.independence_test(xs, ys, k1, k2, opts.kappa, opts.permutations, seed)
    _print_block(
        {
            "n": len(xs),
            "kernel_x": k1.spec,
            "kernel_y": k2.spec,
            "kappa": cca.kappa,
            "rho": cca.rho,
            "rho_unclipped": cca.rho_unclipped,
            "permutations": test.permutations,
            "p_value": test.p_value,
        }
    )
    if opts.out:
        rows = [{"permutation": i, "rho": float(rho)} for i, rho in enumerate(test.null_samples)]
        formats.write_rows_csv(opts.out, ["permutation", "rho"], rows)
    return EXIT_PASS


def sdr_cmd(opts: CommandOpts) -> int:
    """Estimates a central subspace from a CSV whose last column is the response"""
    table = formats.read_table(_required(opts.data, "DATA"))
    if table.shape[1] < 2:
        raise ValueError("sdr needs at least one predictor column and a response column")
    xs, ys = table[:, :-1], table[:, -1]
    kx = parse_kernel_spec(opts.kernel or "gauss:1.0")
    ky = parse_kernel_spec(opts.kernel2 or kx.spec)
    seed = opts.seed if opts.seed is not None else config_loader.DEFAULT_SEED

    result = kmethods.estimate_sdr(xs, ys, opts.dim, kx, ky, opts.epsilon, opts.restarts, seed)
    lines = [
        *_block_lines({"n": len(xs), "d": xs.shape[1], "m": opts.dim, "objective": result.objective}),
        *_block_lines({"restarts_used": result.restarts_used}),
        *(f"B[{i}] = " + " ".join(formats.format_number(v) for v in row) for i, row in enumerate(result.B)),
    ]
    for line in lines:
        _print(line)
    if opts.out:
        Path(opts.out).write_text("\n".join(lines) + "\n")
        logger.info("sdr result written to %s", opts.out)
    return EXIT_PASS


def experiment_cmd(opts: CommandOpts) -> int:
    """Runs one experiment and writes its CSV and verdict files"""
    name = _required(opts.experiment, "NAME")
    if opts.config_file or config_loader.default_config_file_exists():
        config = config_loader.load(opts.config_file)
    else:
        config = config_loader.builtin_config(name)
    experiment = _with_overrides(config_loader.experiment_config(config, name), opts)

    report = run_experiment(experiment)
    csv_path = Path(experiment.get("output_path") or f"{name}.csv")
    formats.write_rows_csv(str(csv_path), report.columns, report.rows)
    verdict_path = csv_path.with_name(csv_path.stem + ".verdicts.txt")
    verdict_path.write_text("\n".join(_verdict_lines(report)) + "\n")
    logger.info("verdicts written to %s", verdict_path)

    for line in _verdict_lines(report)[1:]:
        _print(line)
    return EXIT_PASS if report.passed else EXIT_FAIL


# implementations


def _with_overrides(experiment: ExperimentConfig, opts: CommandOpts) -> ExperimentConfig:
    overrides = {
        "seed": opts.seed,
        "backend": opts.backend,
        "kernel": opts.kernel,
        "loss": opts.loss,
        "output_path": opts.out,
    }
    merged = dict(experiment, **{k: v for k, v in overrides.items() if v is not None})
    if opts.kernel:
        parse_kernel_spec(opts.kernel)
    if opts.loss:
        losses.get_loss(opts.loss)
    return merged  # type: ignore


def _verdict_lines(report: ExperimentReport) -> Sequence[str]:
    generated_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    lines = [f"generated-at: {generated_at}", f"experiment: {report.experiment}"]
    for verdict in report.verdicts:
        lines.append(f"{'PASS' if verdict['passed'] else 'FAIL'} {verdict['check']}: {verdict['detail']}")
    lines.append(f"result: {'PASS' if report.passed else 'FAIL'}")
    return lines


def _required(value: Optional[object], flag: str):  # type: ignore
    if value is None:
        raise ValueError(f"{flag} is required")
    return value


def _block_lines(values: Dict[str, object]) -> Sequence[str]:
    return [f"{key} = {formats.format_number(value)}" for key, value in values.items()]


def _print_block(values: Dict[str, object]) -> None:
    for line in _block_lines(values):
        _print(line)


def _print(text: str) -> None:
    print(text)  # noqa: T201

