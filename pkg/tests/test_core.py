import csv
from pathlib import Path
from typing import Dict, List

import numpy as np
import pytest
import yaml
from pytest_mock import MockerFixture

from margin_craft import classify, cli, core, formats, seeding


def _write_dataset(file_path: Path, n: int = 30, seed: int = 1) -> None:
    generator = seeding.rng(seed)
    points = generator.standard_normal((n, 2))
    labels = np.where(points[:, 0] + 0.3 * generator.standard_normal(n) >= 0, 1, -1)
    lines = ["x1,x2,label"] + [f"{x!r},{y!r},{label}" for (x, y), label in zip(points.tolist(), labels)]
    file_path.write_text("\n".join(lines) + "\n")


def _write_low_rank_config(file_path: Path, output_path: Path, **params: float) -> None:
    config = {
        "globals": {"seed": 3},
        "experiments": {
            "quick-low-rank": {
                "experiment_type": "low_rank",
                "sample_sizes": [20, 30],
                "output_path": str(output_path),
                "params": dict(params),
            }
        },
    }
    file_path.write_text(yaml.safe_dump(config))


def _block(out: str) -> Dict[str, str]:
    return dict(line.split(" = ", 1) for line in out.splitlines() if " = " in line)


def _read_csv(file_path: Path) -> List[Dict[str, str]]:
    with open(file_path, newline="") as f:
        return list(csv.DictReader(f))


def test_train_predict_round_trip(tmp_path: Path, capfd: pytest.CaptureFixture[str]):
    """Tests decisions of a saved model reproduce the in-memory model exactly

    Args:
        tmp_path (Path): temporary directory path
        capfd (CaptureFixture): capture
    """
    data_path, model_path, out_path = tmp_path / "train.csv", tmp_path / "model.yaml", tmp_path / "pred.csv"
    _write_dataset(data_path)

    status = core.main(
        core.CommandOpts(
            command="train",
            data=str(data_path),
            kernel="gauss:1.0",
            loss="hinge",
            lam=0.1,
            max_iter=300,
            out=str(model_path),
        )
    )
    assert status == core.EXIT_PASS
    summary = _block(capfd.readouterr().out)
    assert summary["n"] == "30"
    assert summary["kernel"] == "gauss:1.0"
    assert float(summary["rkhs_norm_sq"]) <= float(summary["sieve_radius_sq"]) + 1e-9

    predict_opts = core.CommandOpts(command="predict", model=str(model_path), data=str(data_path), out=str(out_path))
    status = core.main(predict_opts)
    assert status == core.EXIT_PASS

    model = formats.load_model(str(model_path))
    expected = classify.decision_batch(model, formats.read_points(str(data_path)))
    rows = _read_csv(out_path)
    assert [float(r["decision"]) for r in rows] == expected.tolist()
    assert [int(r["label"]) for r in rows] == [1 if d >= 0 else -1 for d in expected]

    # without --out the table goes to stdout
    core.main(core.CommandOpts(command="predict", model=str(model_path), data=str(data_path)))
    out = capfd.readouterr().out.splitlines()
    assert out[0] == "decision,label"
    assert out[1:] == [f"{r['decision']},{r['label']}" for r in rows]


def test_train_explicit_zero_iterations(tmp_path: Path):
    """Tests an explicit iteration cap of 0 is rejected rather than replaced by the default"""
    data_path, model_path = tmp_path / "train.csv", tmp_path / "model.yaml"
    _write_dataset(data_path)

    status = core.main(
        core.CommandOpts(
            command="train",
            data=str(data_path),
            kernel="linear",
            loss="hinge",
            lam=0.1,
            max_iter=0,
            out=str(model_path),
        )
    )

    assert status == core.EXIT_USAGE
    assert not model_path.exists()


def test_predict_svmlight_takes_dimensionality_from_model(tmp_path: Path):
    """Tests svmlight rows missing trailing features are padded to the model's dimensionality"""
    train_path, model_path = tmp_path / "train.svm", tmp_path / "model.yaml"
    predict_path, out_path = tmp_path / "predict.svm", tmp_path / "pred.csv"
    train_path.write_text("1 1:0.5 2:1\n-1 1:-1 2:0.3\n1 1:2\n-1 2:-2 3:0.1\n")
    predict_path.write_text("1 1:0.5\n-1 1:-1\n")

    status = core.main(
        core.CommandOpts(
            command="train",
            data=str(train_path),
            format="svmlight",
            kernel="gauss:1.0",
            loss="hinge",
            lam=0.1,
            max_iter=50,
            out=str(model_path),
        )
    )
    assert status == core.EXIT_PASS

    status = core.main(
        core.CommandOpts(
            command="predict", model=str(model_path), data=str(predict_path), format="svmlight", out=str(out_path)
        )
    )

    assert status == core.EXIT_PASS
    model = formats.load_model(str(model_path))
    expected = classify.decision_batch(model, np.array([[0.5, 0.0, 0.0], [-1.0, 0.0, 0.0]]))
    assert [float(r["decision"]) for r in _read_csv(out_path)] == expected.tolist()


def test_probe(tmp_path: Path, capfd: pytest.CaptureFixture[str]):
    """Tests the probe report of an uninformative distribution

    Args:
        tmp_path (Path): temporary directory path
        capfd (CaptureFixture): capture
    """
    joint_path, table_path = tmp_path / "joint.txt", tmp_path / "psi.csv"
    joint_path.write_text("3\n0 0.2 0.5\n1 0.3 0.5\n2 0.5 0.5\n")

    status = core.main(core.CommandOpts(command="probe", joint=str(joint_path), out=str(table_path)))

    assert status == core.EXIT_PASS
    out = capfd.readouterr().out
    values = _block(out)
    assert values["atoms"] == "3"
    assert float(values["bayes_risk"]) == pytest.approx(0.5)
    for loss in ("hinge", "logistic", "exp", "quad"):
        # H(1/2) = phi(0) = 1
        assert float(values[f"optimal_phi_risk[{loss}]"]) == pytest.approx(1.0)

    assert "theta,hinge,logistic,exp,quad" in out.splitlines()
    rows = _read_csv(table_path)
    assert len(rows) == len(core.PSI_TABLE_THETAS)
    assert [float(r["hinge"]) for r in rows] == pytest.approx([float(r["theta"]) for r in rows], abs=1e-6)


def test_cca(tmp_path: Path, capfd: pytest.CaptureFixture[str]):
    """Tests the independence test command on a dependent pair

    Args:
        tmp_path (Path): temporary directory path
        capfd (CaptureFixture): capture
    """
    xs = seeding.rng(4).uniform(-1.0, 1.0, 40)
    x_path, y_path, null_path = tmp_path / "x.csv", tmp_path / "y.csv", tmp_path / "null.csv"
    x_path.write_text("x\n" + "\n".join(repr(v) for v in xs) + "\n")
    y_path.write_text("y\n" + "\n".join(repr(v) for v in xs**2) + "\n")

    opts = core.CommandOpts(
        command="cca", data=str(x_path), data2=str(y_path), kappa=0.05, permutations=19, seed=2, out=str(null_path)
    )
    assert core.main(opts) == core.EXIT_PASS

    values = _block(capfd.readouterr().out)
    assert values["kernel_y"] == "gauss:1.0"
    assert values["permutations"] == "19"
    assert 0.0 <= float(values["rho"]) <= 1.0
    assert float(values["p_value"]) == pytest.approx(1.0 / 20.0)
    assert len(_read_csv(null_path)) == 19


def test_sdr(tmp_path: Path, capfd: pytest.CaptureFixture[str]):
    """Tests the dimension reduction command prints an orthonormal basis

    Args:
        tmp_path (Path): temporary directory path
        capfd (CaptureFixture): capture
    """
    generator = seeding.rng(5)
    xs = generator.standard_normal((25, 2))
    ys = xs[:, 1] + 0.1 * generator.standard_normal(25)
    data_path, out_path = tmp_path / "sdr.csv", tmp_path / "sdr.txt"
    data_path.write_text("x1,x2,y\n" + "\n".join(f"{a!r},{b!r},{y!r}" for (a, b), y in zip(xs.tolist(), ys)) + "\n")

    opts = core.CommandOpts(command="sdr", data=str(data_path), dim=1, restarts=1, seed=0, out=str(out_path))
    assert core.main(opts) == core.EXIT_PASS

    out = capfd.readouterr().out
    assert out == out_path.read_text()
    values = _block(out)
    assert values["d"] == "2"
    assert values["restarts_used"] == "1"
    basis = np.array([float(values["B[0]"]), float(values["B[1]"])])
    assert np.linalg.norm(basis) == pytest.approx(1.0, abs=1e-8)


def _usage_error_data():
    return [
        core.CommandOpts(command="deploy"),
        core.CommandOpts(command="train", data="missing.csv", kernel="linear", loss="hinge", lam=0.1, out="m.yaml"),
        core.CommandOpts(command="predict", model="missing.yaml", data="missing.csv"),
        core.CommandOpts(command="probe", joint="missing.txt"),
        core.CommandOpts(command="experiment", experiment="no_such_experiment"),
    ]


@pytest.mark.parametrize("opts", _usage_error_data())
def test_usage_errors(tmp_path: Path, monkeypatch: pytest.MonkeyPatch, opts: core.CommandOpts):
    """Tests unknown commands, missing files and unknown experiments exit with status 2

    Args:
        tmp_path (Path): temporary directory path
        monkeypatch (MonkeyPatch): monkeypatch
        opts (CommandOpts): command options
    """
    monkeypatch.chdir(tmp_path)
    assert core.main(opts) == core.EXIT_USAGE


@pytest.mark.parametrize(
    "kernel, loss, lam",
    [
        ("rbf:1.0", "hinge", 0.1),
        ("gauss:1.0", "zero_one", 0.1),
        ("gauss:1.0", "hinge", 0.0),
    ],
)
def test_train_invalid_arguments(tmp_path: Path, kernel: str, loss: str, lam: float):
    """Tests invalid kernel, loss and lambda exit with status 2

    Args:
        tmp_path (Path): temporary directory path
        kernel (str): kernel spec
        loss (str): loss name
        lam (float): lambda
    """
    data_path = tmp_path / "train.csv"
    _write_dataset(data_path)
    opts = core.CommandOpts(
        command="train", data=str(data_path), kernel=kernel, loss=loss, lam=lam, out=str(tmp_path / "model.yaml")
    )

    assert core.main(opts) == core.EXIT_USAGE
    assert not (tmp_path / "model.yaml").exists()


def test_experiment_outputs(tmp_path: Path, capfd: pytest.CaptureFixture[str]):
    """Tests the experiment CSV and verdict files and their reproducibility

    Args:
        tmp_path (Path): temporary directory path
        capfd (CaptureFixture): capture
    """
    config_path, csv_path = tmp_path / "config.yaml", tmp_path / "reports" / "low.csv"
    csv_path.parent.mkdir()
    _write_low_rank_config(config_path, csv_path)
    opts = core.CommandOpts(command="experiment", experiment="quick-low-rank", config_file=str(config_path))

    assert core.main(opts) == core.EXIT_PASS
    verdict_path = tmp_path / "reports" / "low.verdicts.txt"
    first_csv, first_verdicts = csv_path.read_bytes(), verdict_path.read_text().splitlines()

    assert first_verdicts[0].startswith("generated-at: ")
    assert first_verdicts[1] == "experiment: quick-low-rank"
    assert first_verdicts[-1] == "result: PASS"
    rows = _read_csv(csv_path)
    assert [int(r["n"]) for r in rows] == [20, 20, 30, 30]
    assert "wall_time" not in rows[0]
    assert capfd.readouterr().out.splitlines() == first_verdicts[1:]

    assert core.main(opts) == core.EXIT_PASS
    assert csv_path.read_bytes() == first_csv
    assert verdict_path.read_text().splitlines()[1:] == first_verdicts[1:]


def test_experiment_failed_verdict(tmp_path: Path, capfd: pytest.CaptureFixture[str]):
    """Tests a failing verdict exits with status 1

    Args:
        tmp_path (Path): temporary directory path
        capfd (CaptureFixture): capture
    """
    config_path, csv_path = tmp_path / "config.yaml", tmp_path / "low.csv"
    _write_low_rank_config(config_path, csv_path, max_error=-1.0)
    opts = core.CommandOpts(command="experiment", experiment="quick-low-rank", config_file=str(config_path))

    assert core.main(opts) == core.EXIT_FAIL
    out = capfd.readouterr().out.splitlines()
    assert any(line.startswith("FAIL full_rank_reconstruction_exact") for line in out)
    assert out[-1] == "result: FAIL"


def test_experiment_overrides(tmp_path: Path, capfd: pytest.CaptureFixture[str]):
    """Tests command line overrides of seed and output path, and invalid overrides

    Args:
        tmp_path (Path): temporary directory path
        capfd (CaptureFixture): capture
    """
    config_path = tmp_path / "config.yaml"
    _write_low_rank_config(config_path, tmp_path / "unused.csv")
    outputs = []
    for seed in (1, 2):
        out_path = tmp_path / f"seed-{seed}.csv"
        opts = core.CommandOpts(
            command="experiment",
            experiment="quick-low-rank",
            config_file=str(config_path),
            seed=seed,
            out=str(out_path),
        )
        assert core.main(opts) == core.EXIT_PASS
        outputs.append(out_path.read_bytes())

    assert outputs[0] != outputs[1]
    assert not (tmp_path / "unused.csv").exists()

    opts = core.CommandOpts(
        command="experiment", experiment="quick-low-rank", config_file=str(config_path), kernel="rbf"
    )
    assert core.main(opts) == core.EXIT_USAGE


def test_experiment_without_config_file(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch, capfd: pytest.CaptureFixture[str]
):
    """Tests an experiment type runs with built-in settings when no config file exists

    Args:
        tmp_path (Path): temporary directory path
        monkeypatch (MonkeyPatch): monkeypatch
        capfd (CaptureFixture): capture
    """
    monkeypatch.chdir(tmp_path)
    opts = core.CommandOpts(command="experiment", experiment="low_rank")

    assert core.main(opts) == core.EXIT_PASS
    assert (tmp_path / "low_rank.csv").exists()
    assert (tmp_path / "low_rank.verdicts.txt").exists()
    assert "experiment: low_rank" in capfd.readouterr().out


def test_invalid_config_file(tmp_path: Path):
    """Tests a config file violating the schema exits with status 2

    Args:
        tmp_path (Path): temporary directory path
    """
    config_path = tmp_path / "config.yaml"
    config_path.write_text(yaml.safe_dump({"experiments": {"x": {"experiment_type": "low_rank", "replicates": 0}}}))
    opts = core.CommandOpts(command="experiment", experiment="x", config_file=str(config_path))

    assert core.main(opts) == core.EXIT_USAGE


def test_cli_run(mocker: MockerFixture, tmp_path: Path, capfd: pytest.CaptureFixture[str]):
    """Tests the console script parses arguments and exits with the command status

    Args:
        mocker (MockerFixture): mocker
        tmp_path (Path): temporary directory path
        capfd (CaptureFixture): capture
    """
    joint_path = tmp_path / "joint.txt"
    joint_path.write_text("2\n0 0.5 0.9\n1 0.5 0.2\n")
    mocker.patch("sys.argv", ["margin-craft", "probe", str(joint_path)])

    with pytest.raises(SystemExit) as e:
        cli.run()

    assert e.value.code == 0
    assert float(_block(capfd.readouterr().out)["bayes_risk"]) == pytest.approx(0.15)


@pytest.mark.parametrize(
    "argv",
    [
        ["margin-craft"],
        ["margin-craft", "train", "data.csv"],
        ["margin-craft", "train", "data.csv", "--kernel", "linear", "--loss", "zero_one", "--lambda", "1"],
        ["margin-craft", "predict", "model.yaml", "data.csv", "--format", "parquet"],
    ],
)
def test_cli_usage_errors(mocker: MockerFixture, argv: List[str]):
    """Tests argument errors exit with status 2

    Args:
        mocker (MockerFixture): mocker
        argv (List[str]): command line
    """
    mocker.patch("sys.argv", argv)
    mock_main = mocker.patch("margin_craft.core.main")

    with pytest.raises(SystemExit) as e:
        cli.run()

    assert e.value.code == 2
    mock_main.assert_not_called()
