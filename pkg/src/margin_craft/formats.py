"""File formats.

- data files: ``csv`` (header, final column ``label``), ``text`` (csv with one string feature, for the
  spectrum kernel) and ``svmlight`` (``label idx:val ...``, 1-based indices)
- model files: YAML documents validated against ``model_schema.json``
- DiscreteJoint files: a line with the atom count ``m``, then ``m`` rows ``x-coords... p eta``
- result tables: CSV with 17 significant digits
"""
import csv
import logging
from os import path
from typing import Any, Final, Iterable, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np
import yaml

from . import config_schema
from .analysis import DiscreteJoint
from .classify import MODEL_FORMAT_VERSION, LabeledDataset, Model
from .kernels import SpectrumKernel, parse_kernel_spec

logger = logging.getLogger(__name__)

# constants
DATA_FORMATS: Final[Tuple[str, ...]] = ("csv", "text", "svmlight")
LABEL_COLUMN: Final[str] = "label"
NEGATIVE_LABELS: Final[Tuple[float, ...]] = (0.0, -1.0)
POSITIVE_LABELS: Final[Tuple[float, ...]] = (1.0,)


class DataFormatError(ValueError):
    """Malformed data file"""

    def __init__(self, file_path: str, line_number: int, message: str):
        """Initialize

        Args:
            file_path (str): data file
            line_number (int): 1-based line number, 0 for the whole file
            message (str): description
        """
        self.file_path = file_path
        self.line_number = line_number
        location = f"{file_path}:{line_number}" if line_number else file_path
        super().__init__(f"{location}: {message}")


class ModelFormatError(ValueError):
    """Unreadable model file"""


#
# labelled data
#


def ingest(file_path: str, fmt: str = "csv", n_features: Optional[int] = None) -> LabeledDataset:
    """Reads a labelled data file

    Args:
        file_path (str): path
        fmt (str): `csv`, `text` or `svmlight`
        n_features (Optional[int]): svmlight dimensionality, the largest index seen when omitted

    Returns:
        LabeledDataset: dense points with labels mapped {0, -1} -> -1 and {1, +1} -> +1
    """
    if fmt == "csv":
        header, rows = _read_csv(file_path)
        if header[-1].strip() != LABEL_COLUMN:
            raise DataFormatError(file_path, 1, f"the final column must be `{LABEL_COLUMN}`: {header}")
        if len(header) < 2:
            raise DataFormatError(file_path, 1, "no feature columns")
        points = [_floats(file_path, line, values[:-1]) for line, values in rows]
        labels = [_label(file_path, line, values[-1]) for line, values in rows]
        dataset = LabeledDataset(points=np.array(points), labels=np.array(labels))
    elif fmt == "text":
        header, rows = _read_csv(file_path)
        if len(header) != 2 or header[-1].strip() != LABEL_COLUMN:
            raise DataFormatError(file_path, 1, f"expected columns `<text>,{LABEL_COLUMN}`: {header}")
        dataset = LabeledDataset(
            points=[values[0] for _, values in rows],
            labels=np.array([_label(file_path, line, values[1]) for line, values in rows]),
        )
    elif fmt == "svmlight":
        dataset = _read_svmlight(file_path, n_features)
    else:
        raise ValueError(f"no such data format: {fmt!r} (expected one of {list(DATA_FORMATS)})")

    logger.debug("ingested %d examples from %s", len(dataset), file_path)
    return dataset


def read_points(file_path: str, fmt: str = "csv", n_features: Optional[int] = None) -> Any:
    """Reads the points of a data file; a `label` column is dropped when present

    Args:
        file_path (str): path
        fmt (str): `csv`, `text` or `svmlight`
        n_features (Optional[int]): svmlight dimensionality

    Returns:
        Any: n x d matrix, or a list of strings for `text`
    """
    if fmt == "svmlight":
        return _read_svmlight(file_path, n_features).points
    header, rows = _read_csv(file_path)
    keep = [i for i, name in enumerate(header) if name.strip() != LABEL_COLUMN]
    if not keep:
        raise DataFormatError(file_path, 1, "no feature columns")
    if fmt == "text":
        return [values[keep[0]] for _, values in rows]
    if fmt != "csv":
        raise ValueError(f"no such data format: {fmt!r} (expected one of {list(DATA_FORMATS)})")
    return np.array([_floats(file_path, line, [values[i] for i in keep]) for line, values in rows])


def read_table(file_path: str) -> np.ndarray:
    """Reads a numeric csv file with a header into an n x columns matrix"""
    _, rows = _read_csv(file_path)
    return np.array([_floats(file_path, line, values) for line, values in rows])


#
# model files
#


def save_model(model: Model, file_path: str) -> None:
    """Writes a model document; floats are written in shortest round-trip form

    Args:
        model (Model): model
        file_path (str): destination
    """
    if isinstance(model.kernel, SpectrumKernel):
        points: List[Any] = list(model.points)
    else:
        points = np.asarray(model.points, dtype=float).tolist()
    document = {
        "format_version": model.format_version,
        "kernel": model.kernel.spec,
        "loss": model.loss,
        "lambda": float(model.lam),
        "n": len(points),
        "points": points,
        "coefficients": model.coefficients.tolist(),
    }
    with open(file_path, "w") as f:
        yaml.safe_dump(document, f, sort_keys=False, default_flow_style=None, width=1_000_000)
    logger.info("model written to %s", file_path)


def load_model(file_path: str) -> Model:
    """Reads a model document

    Args:
        file_path (str): model file

    Returns:
        Model: model
    """
    if not path.exists(file_path):
        raise FileNotFoundError(file_path)
    with open(file_path, "r") as f:
        try:
            document = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ModelFormatError(f"{file_path}: not a YAML document: {e}") from e
    try:
        jsonschema.validate(document, config_schema.get_model_schema())
    except jsonschema.ValidationError as e:
        raise ModelFormatError(f"{file_path}: {e.message}") from e

    if document["format_version"] != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"{file_path}: format version {document['format_version']} is not supported "
            f"(expected {MODEL_FORMAT_VERSION})"
        )
    if not document["n"] == len(document["points"]) == len(document["coefficients"]):
        raise ModelFormatError(f"{file_path}: `n`, `points` and `coefficients` disagree in length")

    kernel = parse_kernel_spec(document["kernel"])
    points = document["points"]
    return Model(
        kernel=kernel,
        loss=document["loss"],
        lam=float(document["lambda"]),
        points=points if isinstance(kernel, SpectrumKernel) else np.array(points, dtype=float),
        coefficients=np.array(document["coefficients"], dtype=float),
    )


#
# DiscreteJoint files
#


def read_discrete_joint(file_path: str) -> DiscreteJoint:
    """Reads a DiscreteJoint file; blank lines and `#` comments are skipped

    Args:
        file_path (str): path

    Returns:
        DiscreteJoint: distribution
    """
    lines = [(i, line.split("#", 1)[0].split()) for i, line in enumerate(_read_lines(file_path), start=1)]
    lines = [(i, fields) for i, fields in lines if fields]
    if not lines:
        raise DataFormatError(file_path, 0, "empty file")

    header_line, header = lines[0]
    if len(header) != 1 or not header[0].isdigit() or int(header[0]) < 1:
        raise DataFormatError(file_path, header_line, f"the first line must be the atom count: {header}")
    m = int(header[0])
    rows = lines[1:]
    if len(rows) != m:
        raise DataFormatError(file_path, 0, f"header announces {m} atoms, found {len(rows)} rows")

    width = len(rows[0][1])
    values = []
    for line, fields in rows:
        if len(fields) != width or width < 3:
            raise DataFormatError(file_path, line, f"expected {max(width, 3)} columns `x... p eta`: {fields}")
        values.append(_floats(file_path, line, fields))
    table = np.array(values)
    try:
        return DiscreteJoint(support=table[:, :-2], p=table[:, -2], eta=table[:, -1])
    except ValueError as e:
        raise DataFormatError(file_path, 0, str(e)) from e


def write_discrete_joint(joint: DiscreteJoint, file_path: str) -> None:
    """Writes a DiscreteJoint file"""
    with open(file_path, "w") as f:
        f.write(f"{joint.size}\n")
        for x, p, eta in zip(joint.support, joint.p, joint.eta):
            f.write(" ".join(format_number(v) for v in [*x, p, eta]) + "\n")


#
# result tables
#


def format_number(value: Any) -> str:
    """Formats a table cell; floats get 17 significant digits"""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_rows_csv(file_path: str, columns: Sequence[str], rows: Iterable[dict]) -> None:
    """Writes dict rows as CSV restricted to `columns`

    Args:
        file_path (str): destination
        columns (Sequence[str]): header and column order
        rows (Iterable[dict]): rows keyed by column name
    """
    with open(file_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_number(row[c]) for c in columns])
    logger.info("table written to %s", file_path)


# implementations


def _read_lines(file_path: str) -> List[str]:
    if not path.exists(file_path):
        raise FileNotFoundError(file_path)
    with open(file_path, "r") as f:
        return f.read().splitlines()


def _read_csv(file_path: str) -> Tuple[List[str], List[Tuple[int, List[str]]]]:
    lines = _read_lines(file_path)
    reader = csv.reader(lines)
    records = [(i, values) for i, values in enumerate(reader, start=1) if values]
    if not records:
        raise DataFormatError(file_path, 0, "empty file")
    _, header = records[0]
    rows = records[1:]
    if not rows:
        raise DataFormatError(file_path, 0, "no data rows")
    for line, values in rows:
        if len(values) != len(header):
            raise DataFormatError(file_path, line, f"expected {len(header)} fields, found {len(values)}")
    return header, rows


def _floats(file_path: str, line: int, values: Sequence[str]) -> List[float]:
    try:
        parsed = [float(v) for v in values]
    except ValueError as e:
        raise DataFormatError(file_path, line, f"non-numeric value: {e}") from e
    if not np.all(np.isfinite(parsed)):
        raise DataFormatError(file_path, line, "non-finite value")
    return parsed


def _label(file_path: str, line: int, value: str) -> int:
    try:
        label = float(value)
    except ValueError:
        raise DataFormatError(file_path, line, f"label is not a number: {value!r}") from None
    if label in NEGATIVE_LABELS:
        return -1
    if label in POSITIVE_LABELS:
        return 1
    raise DataFormatError(file_path, line, f"label must be one of 0, -1, 1, +1: {value!r}")


def _read_svmlight(file_path: str, n_features: Optional[int]) -> LabeledDataset:
    labels: List[int] = []
    entries: List[List[Tuple[int, float]]] = []
    largest = 0
    for line, text in enumerate(_read_lines(file_path), start=1):
        fields = text.split("#", 1)[0].split()
        if not fields:
            continue
        labels.append(_label(file_path, line, fields[0]))
        row = []
        for item in fields[1:]:
            key, sep, value = item.partition(":")
            if not sep:
                raise DataFormatError(file_path, line, f"expected `index:value`, found {item!r}")
            if key == "qid":
                continue
            if not key.isdigit() or int(key) < 1:
                raise DataFormatError(file_path, line, f"feature indices are 1-based integers: {key!r}")
            row.append((int(key), _floats(file_path, line, [value])[0]))
            largest = max(largest, int(key))
        entries.append(row)
    if not labels:
        raise DataFormatError(file_path, 0, "empty file")

    dim = largest if n_features is None else n_features
    if largest > dim:
        raise DataFormatError(file_path, 0, f"feature index {largest} exceeds the dimensionality {dim}")
    if dim < 1:
        raise DataFormatError(file_path, 0, "no features")
    points = np.zeros((len(labels), dim))
    for i, row in enumerate(entries):
        for index, value in row:
            points[i, index - 1] = value
    return LabeledDataset(points=points, labels=np.array(labels))
