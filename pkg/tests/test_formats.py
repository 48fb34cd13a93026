from pathlib import Path

import numpy as np
import pytest
import yaml

from margin_craft import formats
from margin_craft.analysis import DiscreteJoint
from margin_craft.classify import Model
from margin_craft.formats import DataFormatError, ModelFormatError
from margin_craft.kernels import GaussianKernel, PolynomialKernel, SpectrumKernel


def _write(tmp_path: Path, name: str, text: str) -> str:
    file_path = tmp_path / name
    file_path.write_text(text)
    return str(file_path)


def _ingest_data():
    return [
        (
            "csv",
            "x1,x2,label\n0.5,-1,1\n2,3e-2,0\n\n-4,0,-1\n",
            [[0.5, -1.0], [2.0, 0.03], [-4.0, 0.0]],
            [1, -1, -1],
        ),
        (
            "svmlight",
            "+1 1:0.5 3:2 # comment\n-1 qid:4 2:-1\n\n0 1:1e-3\n",
            [[0.5, 0.0, 2.0], [0.0, -1.0, 0.0], [0.001, 0.0, 0.0]],
            [1, -1, -1],
        ),
    ]


@pytest.mark.parametrize("fmt, text, points, labels", _ingest_data())
def test_ingest(tmp_path: Path, fmt: str, text: str, points, labels):
    """Tests numeric data formats and label mapping"""
    data = formats.ingest(_write(tmp_path, "data", text), fmt)

    assert np.array_equal(data.points, np.array(points))
    assert list(data.labels) == labels


def test_ingest_text(tmp_path: Path):
    """Tests string points for the spectrum kernel"""
    data = formats.ingest(_write(tmp_path, "words.csv", "text,label\nabab,1\nbaba,-1\n"), "text")

    assert list(data.points) == ["abab", "baba"]
    assert list(data.labels) == [1, -1]
    assert formats.read_points(_write(tmp_path, "more.csv", "text\nab\n"), "text") == ["ab"]


def test_ingest_svmlight_dimensionality(tmp_path: Path):
    """Tests the declared svmlight dimensionality pads and bounds the feature indices"""
    file_path = _write(tmp_path, "data.svm", "1 2:1\n-1 1:1\n")

    assert formats.ingest(file_path, "svmlight", n_features=4).points.shape == (2, 4)
    with pytest.raises(DataFormatError):
        formats.ingest(file_path, "svmlight", n_features=1)


def _ingest_error_data():
    return [
        ("csv", "", 0),
        ("csv", "x,label\n", 0),
        ("csv", "x,y\n1,1\n", 1),
        ("csv", "x,label\n1,1\n2\n", 3),
        ("csv", "x,label\n1,1\nfoo,1\n", 3),
        ("csv", "x,label\n1,2\n", 2),
        ("csv", "x,label\nnan,1\n", 2),
        ("svmlight", "1 1:1\n1 0:1\n", 2),
        ("svmlight", "1 1:1\n1 x\n", 2),
        ("svmlight", "\n\n", 0),
        ("svmlight", "2 1:1\n", 1),
        ("text", "a,b,label\nx,y,1\n", 1),
    ]


@pytest.mark.parametrize("fmt, text, line_number", _ingest_error_data())
def test_ingest_errors(tmp_path: Path, fmt: str, text: str, line_number: int):
    """Tests malformed files report the offending line"""
    file_path = _write(tmp_path, "bad", text)
    with pytest.raises(DataFormatError) as e:
        formats.ingest(file_path, fmt)

    assert e.value.line_number == line_number
    assert e.value.file_path == file_path
    if line_number:
        assert f"{file_path}:{line_number}" in str(e.value)


def test_ingest_missing_file_and_format(tmp_path: Path):
    """Tests a missing file and an unknown format"""
    with pytest.raises(FileNotFoundError):
        formats.ingest(str(tmp_path / "none.csv"))
    with pytest.raises(ValueError):
        formats.ingest(_write(tmp_path, "data.csv", "x,label\n1,1\n"), "parquet")


def test_read_points_and_table(tmp_path: Path):
    """Tests points drop the label column and tables keep every column"""
    file_path = _write(tmp_path, "data.csv", "x1,label,x2\n1,1,2\n3,-1,4\n")

    assert np.array_equal(formats.read_points(file_path), [[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(formats.read_table(file_path), [[1.0, 1.0, 2.0], [3.0, -1.0, 4.0]])
    with pytest.raises(DataFormatError):
        formats.read_points(_write(tmp_path, "labels.csv", "label\n1\n"))


def _model_data():
    return [
        Model(
            kernel=GaussianKernel(0.3),
            loss="logistic",
            lam=1e-3,
            points=np.array([[0.1, -2.5], [1.0 / 3.0, 7e-12]]),
            coefficients=np.array([0.1 + 0.2, -1.0 / 7.0]),
        ),
        Model(
            kernel=PolynomialKernel(3, 1.5),
            loss="hinge",
            lam=0.25,
            points=np.array([[np.pi], [-np.e], [1e300]]),
            coefficients=np.array([1e-300, 0.0, -2.0]),
        ),
        Model(
            kernel=SpectrumKernel(2),
            loss="quad",
            lam=0.5,
            points=["abba", "b: a", "- x"],
            coefficients=np.array([0.5, -0.25, 1.0 / 3.0]),
        ),
    ]


@pytest.mark.parametrize("model", _model_data())
def test_model_file_round_trip(tmp_path: Path, model: Model):
    """Tests saved models load back bit-for-bit"""
    file_path = str(tmp_path / "model.yaml")
    formats.save_model(model, file_path)
    loaded = formats.load_model(file_path)

    assert loaded.kernel == model.kernel
    assert loaded.loss == model.loss
    assert loaded.lam == model.lam
    assert loaded.format_version == model.format_version
    assert np.array_equal(loaded.coefficients, model.coefficients)
    if isinstance(model.kernel, SpectrumKernel):
        assert list(loaded.points) == list(model.points)
    else:
        assert np.array_equal(loaded.points, model.points)


def _bad_model_data():
    document = {
        "format_version": 1,
        "kernel": "gauss:1.0",
        "loss": "hinge",
        "lambda": 0.1,
        "n": 1,
        "points": [[0.0]],
        "coefficients": [1.0],
    }
    return [
        dict(document, format_version=2),
        dict(document, loss="zero_one"),
        dict(document, n=2),
        dict(document, coefficients=[1.0, 2.0], n=1),
        dict(document, extra=True),
        {k: v for k, v in document.items() if k != "kernel"},
    ]


@pytest.mark.parametrize("document", _bad_model_data())
def test_load_model_errors(tmp_path: Path, document: dict):
    """Tests invalid model documents"""
    file_path = _write(tmp_path, "model.yaml", yaml.safe_dump(document))
    with pytest.raises(ModelFormatError):
        formats.load_model(file_path)


def test_load_model_unreadable(tmp_path: Path):
    """Tests a missing file and a non-YAML file"""
    with pytest.raises(FileNotFoundError):
        formats.load_model(str(tmp_path / "none.yaml"))
    with pytest.raises(ModelFormatError):
        formats.load_model(_write(tmp_path, "model.yaml", "points: [1, 2\n"))


def test_discrete_joint_files(tmp_path: Path):
    """Tests reading a commented file and writing it back"""
    text = "# two atoms\n2\n0 0.25 0.9\n\n1 0.75 0.2  # second\n"
    joint = formats.read_discrete_joint(_write(tmp_path, "joint.txt", text))

    assert np.array_equal(joint.support, [[0.0], [1.0]])
    assert np.array_equal(joint.p, [0.25, 0.75])
    assert np.array_equal(joint.eta, [0.9, 0.2])

    written = str(tmp_path / "copy.txt")
    original = DiscreteJoint(support=[[0.0, 1.5], [2.0, -1.0]], p=[1.0 / 3.0, 2.0 / 3.0], eta=[0.1, 1.0])
    formats.write_discrete_joint(original, written)
    copy = formats.read_discrete_joint(written)
    assert Path(written).read_text().splitlines()[0] == "2"
    assert np.array_equal(copy.support, original.support)
    assert np.array_equal(copy.p, original.p)
    assert np.array_equal(copy.eta, original.eta)


@pytest.mark.parametrize(
    "text, line_number",
    [
        ("", 0),
        ("x\n0 1 0.5\n", 1),
        ("0\n", 1),
        ("2\n0 1 0.5\n", 0),
        ("2\n0 0.5 0.5\n1 0.5\n", 3),
        ("1\n0 1 y\n", 2),
        ("2\n0 0.5 0.5\n1 0.6 0.5\n", 0),
        ("1\n0 1 1.5\n", 0),
    ],
)
def test_read_discrete_joint_errors(tmp_path: Path, text: str, line_number: int):
    """Tests malformed distribution files"""
    with pytest.raises(DataFormatError) as e:
        formats.read_discrete_joint(_write(tmp_path, "joint.txt", text))

    assert e.value.line_number == line_number


@pytest.mark.parametrize(
    "value, expected",
    [
        (0.1, "0.10000000000000001"),
        (1.0, "1"),
        (np.float64(2.5), "2.5"),
        (3, "3"),
        (np.int64(-4), "-4"),
        (True, "true"),
        (np.bool_(False), "false"),
        ("hinge", "hinge"),
        (float("nan"), "nan"),
    ],
)
def test_format_number(value, expected: str):
    """Tests table cell formatting"""
    assert formats.format_number(value) == expected


def test_write_rows_csv(tmp_path: Path):
    """Tests column order and cell formatting of result tables"""
    file_path = tmp_path / "table.csv"
    rows = [{"b": 0.5, "a": "x", "ignored": 1}, {"b": 1.0 / 3.0, "a": "y"}]
    formats.write_rows_csv(str(file_path), ["a", "b"], rows)

    assert file_path.read_text() == "a,b\nx,0.5\ny,0.33333333333333331\n"
