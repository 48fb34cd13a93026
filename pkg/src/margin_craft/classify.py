import logging
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Any, Final, Optional

import numpy as np

from . import losses, optim
from .kernels import Kernel, Point, Points
from .losses import LossLike, Probability

logger = logging.getLogger(__name__)

# constants
MODEL_FORMAT_VERSION: Final[int] = 1
DEFAULT_SUPPORT_THRESHOLD: Final[float] = 1e-6


@dataclass(frozen=True)
class LabeledDataset:
    """Points with labels in {-1, +1}"""

    points: Any
    labels: np.ndarray

    def __post_init__(self) -> None:
        """Validates lengths and labels"""
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or len(labels) != len(self.points):
            raise ValueError(f"{len(self.points)} points but {labels.size} labels")
        if not np.all(np.isin(labels, (-1, 1))):
            raise ValueError(f"labels must be -1 or +1: {sorted(set(labels.tolist()))}")
        object.__setattr__(self, "labels", labels.astype(int))

    def __len__(self) -> int:
        """Gets the number of examples"""
        return len(self.labels)


@dataclass(frozen=True)
class Model:
    """RKHS discriminant f(x) = sum_i c_i k(x_i, x)"""

    kernel: Kernel
    loss: str
    lam: float
    points: Any
    coefficients: np.ndarray
    format_version: int = MODEL_FORMAT_VERSION

    def __post_init__(self) -> None:
        """Validates the expansion"""
        object.__setattr__(self, "points", self.kernel.prepare(self.points))
        coefficients = np.asarray(self.coefficients, dtype=float).reshape(-1)
        if len(coefficients) != len(self.points):
            raise ValueError(f"{len(self.points)} points but {len(coefficients)} coefficients")
        object.__setattr__(self, "coefficients", coefficients)
        losses.get_loss(self.loss)
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive: {self.lam}")

    @cached_property
    def gram(self) -> np.ndarray:
        """Gets the Gram matrix of the training points"""
        return self.kernel.gram(self.points)

    @property
    def surrogate(self) -> losses.SurrogateLoss:
        """Gets the loss"""
        return losses.get_loss(self.loss)


def train(
    data: LabeledDataset,
    kernel: Kernel,
    loss: LossLike,
    lam: float,
    opt_config: Optional[optim.OptConfig] = None,
) -> Model:
    """Minimizes J(c) = (1/n) sum_i phi(y_i (Kc)_i) + lam c^T K c from c = 0

    The optimizer works in the RKHS geometry (metric K) and keeps every iterate inside the sieve ball
    c^T K c <= phi(0) / lam. The step constant is divided by 2 lam.

    Args:
        data (LabeledDataset): training set
        kernel (Kernel): kernel
        loss (LossLike): surrogate loss or its name
        lam (float): regularization coefficient, positive
        opt_config (Optional[optim.OptConfig]): optimizer settings

    Returns:
        Model: trained model
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive: {lam}")
    n = len(data)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    surrogate = losses.get_loss(loss)
    opt_config = opt_config or optim.OptConfig()

    points = kernel.prepare(data.points)
    k = kernel.gram(points)
    y = data.labels.astype(float)
    radius_sq = float(surrogate.value(0.0)) / lam

    def evaluate(c: np.ndarray) -> optim.Evaluation:
        f = k @ c
        margins = y * f
        value = float(np.mean(surrogate.value(margins))) + lam * float(c @ f)
        representer = y * surrogate.subgradient(margins) / n + 2.0 * lam * c
        return value, representer

    def project(c: np.ndarray) -> np.ndarray:
        norm_sq = _norm_sq(k, c)
        if norm_sq > radius_sq:
            return c * np.sqrt(radius_sq / norm_sq)
        return c

    oracle = optim.ObjectiveOracle(dimension=n, evaluate=evaluate, metric=k, project=project)
    result = optim.minimize(oracle, np.zeros(n), replace(opt_config, step_c=opt_config.step_c / (2.0 * lam)))
    logger.debug("trained %s model on n=%d, lambda=%g: J=%.12g", surrogate.name, n, lam, result.objective)

    return Model(kernel=kernel, loss=surrogate.name, lam=float(lam), points=points, coefficients=result.minimizer)


def decision(model: Model, x: Point) -> float:
    """Evaluates f(x) = sum_i c_i k(x_i, x)

    Args:
        model (Model): model
        x (Point): query point of the training dimensionality

    Returns:
        float: decision value
    """
    return float(model.kernel.cross(x, model.points) @ model.coefficients)


def decision_batch(model: Model, xs: Points) -> np.ndarray:
    """Evaluates the decision function on every query point"""
    return model.kernel.matrix(xs, model.points) @ model.coefficients


def predict(model: Model, x: Point) -> int:
    """Gets the label sign(f(x)), +1 at f(x) = 0"""
    return 1 if decision(model, x) >= 0 else -1


def predict_batch(model: Model, xs: Points) -> np.ndarray:
    """Gets labels for every query point"""
    return np.where(decision_batch(model, xs) >= 0, 1, -1)


def rkhs_norm_sq(model: Model) -> float:
    """Gets ||f||_H^2 = c^T K c"""
    return _norm_sq(model.gram, model.coefficients)


def support_fraction(model: Model, threshold: float = DEFAULT_SUPPORT_THRESHOLD) -> float:
    """Gets the fraction of coefficients with |c_i| > threshold

    Args:
        model (Model): model
        threshold (float): absolute threshold, nonnegative

    Returns:
        float: fraction in [0, 1]
    """
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative: {threshold}")
    return float(np.mean(np.abs(model.coefficients) > threshold))


def estimate_probability(model: Model, x: Point) -> Probability:
    """Estimates P(Y = 1 | x) through the loss link; Unavailable for the hinge loss"""
    return losses.invert_link(model.loss, decision(model, x))


def empirical_risk(model: Model, data: LabeledDataset) -> float:
    """Gets the misclassification rate on a dataset"""
    return float(np.mean(predict_batch(model, data.points) != data.labels))


def empirical_phi_risk(model: Model, data: LabeledDataset) -> float:
    """Gets the mean surrogate loss on a dataset"""
    margins = data.labels * decision_batch(model, data.points)
    return float(np.mean(model.surrogate.value(margins)))


def objective(model: Model, data: LabeledDataset) -> float:
    """Gets the regularized objective (1/n) sum_i phi(y_i f(x_i)) + lambda ||f||_H^2"""
    return empirical_phi_risk(model, data) + model.lam * rkhs_norm_sq(model)


# implementations


def _norm_sq(k: np.ndarray, c: np.ndarray) -> float:
    scale = float(np.max(np.abs(c))) if c.size else 0.0
    if scale == 0.0:
        return 0.0
    u = c / scale
    return max(float(u @ k @ u), 0.0) * scale**2
