import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Final, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import brentq
from scipy.spatial import ConvexHull
from scipy.special import expit, logit, xlogy

logger = logging.getLogger(__name__)

# constants
LN2: Final[float] = float(np.log(2.0))
PSI_GRID_STEP: Final[float] = 1e-3
ALPHA_GRID_BOUND: Final[float] = 30.0
ALPHA_GRID_POINTS: Final[int] = 100_001

loss_class_name_postfix: Final[str] = "Loss"

_LOSSES: Dict[str, "SurrogateLoss"] = {}


@dataclass(frozen=True)
class Unavailable:
    """Typed refusal: the loss carries no probability information"""

    reason: str


Probability = Union[float, Unavailable]


def surrogate_loss(name: str):  # type: ignore
    """Decorator registering a SurrogateLoss class under its CLI/config name.

    Args:
        name (str): loss name, e.g. `hinge`
    """

    def _inner_decorator(loss_cls: type):  # type: ignore
        # validation
        assert loss_cls.__name__.endswith(loss_class_name_postfix)

        setattr(loss_cls, "name", name)
        _LOSSES[name] = loss_cls()
        return loss_cls

    return _inner_decorator


class SurrogateLoss(ABC):
    """Convex margin loss phi(alpha) upper-bounding the 0-1 loss, with phi(0) = 1

    All methods accept scalars or arrays and broadcast.
    """

    name: str

    @abstractmethod
    def value(self, alpha: ArrayLike) -> np.ndarray:
        """Gets phi(alpha)"""
        pass

    @abstractmethod
    def subdifferential(self, alpha: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """Gets the subdifferential as closed intervals [lower, upper]"""
        pass

    def subgradient(self, alpha: ArrayLike) -> np.ndarray:
        """Gets one element of the subdifferential (the lower end)"""
        lower, _ = self.subdifferential(alpha)
        return lower

    @abstractmethod
    def minimal_conditional_risk(self, eta: ArrayLike) -> np.ndarray:
        """Gets H(eta) = inf over alpha of eta phi(alpha) + (1 - eta) phi(-alpha)"""
        pass

    def wrong_sign_conditional_risk(self, eta: ArrayLike) -> np.ndarray:
        """Gets H^-(eta), the same infimum restricted to alpha (2 eta - 1) <= 0

        Convex losses with phi'(0) < 0 attain the restricted infimum at alpha = 0.
        """
        return np.broadcast_to(self.value(0.0), np.shape(eta)).astype(float)

    @abstractmethod
    def conditional_minimizer(self, eta: ArrayLike) -> np.ndarray:
        """Gets a global minimizer of the conditional risk; +-inf where none is finite"""
        pass

    def link_inverse(self, f_value: float) -> Probability:
        """Maps a decision value back to P(Y = 1 | x)"""
        return Unavailable(f"the {self.name} loss does not determine class probabilities")

    def psi_tilde(self, theta: ArrayLike) -> np.ndarray:
        """Gets H^-((1 + theta) / 2) - H((1 + theta) / 2)"""
        eta = (1.0 + np.asarray(theta, dtype=float)) / 2.0
        return np.maximum(self.wrong_sign_conditional_risk(eta) - self.minimal_conditional_risk(eta), 0.0)

    def __repr__(self) -> str:
        """Gets the registered name"""
        return f"{type(self).__name__}({self.name!r})"


@surrogate_loss("hinge")
class HingeLoss(SurrogateLoss):
    """phi(alpha) = max(0, 1 - alpha)"""

    def value(self, alpha: ArrayLike) -> np.ndarray:
        """Gets phi(alpha)"""
        return np.maximum(0.0, 1.0 - np.asarray(alpha, dtype=float))

    def subdifferential(self, alpha: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """Gets [-1, -1] below the kink, [-1, 0] at alpha = 1 and [0, 0] above"""
        a = np.asarray(alpha, dtype=float)
        return np.where(a <= 1.0, -1.0, 0.0), np.where(a < 1.0, -1.0, 0.0)

    def subgradient(self, alpha: ArrayLike) -> np.ndarray:
        """Gets -1 strictly below the kink and 0 elsewhere"""
        _, upper = self.subdifferential(alpha)
        return upper

    def minimal_conditional_risk(self, eta: ArrayLike) -> np.ndarray:
        """Gets 2 min(eta, 1 - eta)"""
        e = np.asarray(eta, dtype=float)
        return 2.0 * np.minimum(e, 1.0 - e)

    def conditional_minimizer(self, eta: ArrayLike) -> np.ndarray:
        """Gets sign(2 eta - 1), 0 at eta = 1/2"""
        return np.sign(2.0 * np.asarray(eta, dtype=float) - 1.0)


@surrogate_loss("logistic")
class LogisticLoss(SurrogateLoss):
    """Binomial deviance scaled to phi(0) = 1: ln(1 + exp(-alpha)) / ln 2"""

    def value(self, alpha: ArrayLike) -> np.ndarray:
        """Gets phi(alpha)"""
        return np.logaddexp(0.0, -np.asarray(alpha, dtype=float)) / LN2

    def subdifferential(self, alpha: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """Gets the derivative as a degenerate interval"""
        derivative = -expit(-np.asarray(alpha, dtype=float)) / LN2
        return derivative, derivative

    def minimal_conditional_risk(self, eta: ArrayLike) -> np.ndarray:
        """Gets the binary entropy of eta in bits"""
        e = np.asarray(eta, dtype=float)
        return -(xlogy(e, e) + xlogy(1.0 - e, 1.0 - e)) / LN2

    def conditional_minimizer(self, eta: ArrayLike) -> np.ndarray:
        """Gets the log-odds of eta"""
        return logit(np.asarray(eta, dtype=float))

    def link_inverse(self, f_value: float) -> Probability:
        """Gets 1 / (1 + exp(-f))"""
        return float(expit(f_value))


@surrogate_loss("exp")
class ExponentialLoss(SurrogateLoss):
    """phi(alpha) = exp(-alpha)"""

    def value(self, alpha: ArrayLike) -> np.ndarray:
        """Gets phi(alpha)"""
        return np.exp(-np.asarray(alpha, dtype=float))

    def subdifferential(self, alpha: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """Gets the derivative as a degenerate interval"""
        derivative = -np.exp(-np.asarray(alpha, dtype=float))
        return derivative, derivative

    def minimal_conditional_risk(self, eta: ArrayLike) -> np.ndarray:
        """Gets 2 sqrt(eta (1 - eta))"""
        e = np.asarray(eta, dtype=float)
        return 2.0 * np.sqrt(e * (1.0 - e))

    def conditional_minimizer(self, eta: ArrayLike) -> np.ndarray:
        """Gets half the log-odds of eta"""
        return 0.5 * logit(np.asarray(eta, dtype=float))

    def link_inverse(self, f_value: float) -> Probability:
        """Gets 1 / (1 + exp(-2 f))"""
        return float(expit(2.0 * f_value))


@surrogate_loss("quad")
class QuadraticLoss(SurrogateLoss):
    """phi(alpha) = (1 - alpha)^2"""

    def value(self, alpha: ArrayLike) -> np.ndarray:
        """Gets phi(alpha)"""
        return np.square(1.0 - np.asarray(alpha, dtype=float))

    def subdifferential(self, alpha: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """Gets the derivative as a degenerate interval"""
        derivative = -2.0 * (1.0 - np.asarray(alpha, dtype=float))
        return derivative, derivative

    def minimal_conditional_risk(self, eta: ArrayLike) -> np.ndarray:
        """Gets 4 eta (1 - eta)"""
        e = np.asarray(eta, dtype=float)
        return 4.0 * e * (1.0 - e)

    def conditional_minimizer(self, eta: ArrayLike) -> np.ndarray:
        """Gets 2 eta - 1"""
        return 2.0 * np.asarray(eta, dtype=float) - 1.0

    def link_inverse(self, f_value: float) -> Probability:
        """Gets clamp((f + 1) / 2, 0, 1)"""
        return float(np.clip((f_value + 1.0) / 2.0, 0.0, 1.0))


LossLike = Union[str, SurrogateLoss]


def loss_names() -> Tuple[str, ...]:
    """Gets the registered loss names"""
    return tuple(_LOSSES)


def get_loss(loss: LossLike) -> SurrogateLoss:
    """Resolves a loss name (`hinge`, `logistic`, `exp`, `quad`)

    Args:
        loss (LossLike): name or loss instance

    Returns:
        SurrogateLoss: loss
    """
    if isinstance(loss, SurrogateLoss):
        return loss
    resolved = _LOSSES.get(loss)
    if resolved is None:
        raise ValueError(f"no such loss: {loss!r} (expected one of {list(_LOSSES)})")
    return resolved


def loss_value(loss: LossLike, alpha: float) -> float:
    """Evaluates phi(alpha)

    Args:
        loss (LossLike): loss
        alpha (float): margin

    Returns:
        float: loss value
    """
    return float(get_loss(loss).value(alpha))


def subdifferential(loss: LossLike, alpha: float) -> Tuple[float, float]:
    """Gets the exact subdifferential of phi at alpha

    Args:
        loss (LossLike): loss
        alpha (float): margin

    Returns:
        Tuple[float, float]: closed interval (g_lo, g_hi)
    """
    lower, upper = get_loss(loss).subdifferential(alpha)
    return float(lower), float(upper)


def conditional_risk(loss: LossLike, eta: ArrayLike, alpha: ArrayLike) -> np.ndarray:
    """Gets eta phi(alpha) + (1 - eta) phi(-alpha)

    Args:
        loss (LossLike): loss
        eta (ArrayLike): P(Y = 1 | x) in [0, 1]
        alpha (ArrayLike): finite decision value(s)

    Returns:
        np.ndarray: conditional phi-risk
    """
    e = _check_probability(eta)
    a = np.asarray(alpha, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("conditional risk is undefined at an infinite decision value")
    phi = get_loss(loss)
    return e * phi.value(a) + (1.0 - e) * phi.value(-a)


def conditional_minimizer(loss: LossLike, eta: float) -> float:
    """Gets a global minimizer of the conditional risk

    Args:
        loss (LossLike): loss
        eta (float): P(Y = 1 | x) in [0, 1]

    Returns:
        float: minimizer; +-inf marks a minimum attained only in the limit
    """
    return float(get_loss(loss).conditional_minimizer(_check_probability(eta)))


def psi_transform(loss: LossLike, theta: float) -> float:
    """Gets psi(theta), the convex lower envelope of psi~ on [0, 1]

    psi~(theta) = H^-((1 + theta) / 2) - H((1 + theta) / 2). The envelope is the lower convex hull of
    psi~ sampled on a 1e-3 grid together with theta itself.

    Args:
        loss (LossLike): loss
        theta (float): excess risk in [0, 1]

    Returns:
        float: psi(theta) >= 0
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must be in [0, 1]: {theta}")
    phi = get_loss(loss)
    hull_x, hull_y = _psi_hull(phi.name)
    exact = float(phi.psi_tilde(theta))
    return max(0.0, min(exact, float(np.interp(theta, hull_x, hull_y))))


def invert_link(loss: LossLike, f_value: float) -> Probability:
    """Maps a decision value to a class probability estimate

    Args:
        loss (LossLike): loss
        f_value (float): finite decision value

    Returns:
        Probability: P(Y = 1 | x), or Unavailable for the hinge loss
    """
    if not np.isfinite(f_value):
        raise ValueError(f"decision value must be finite: {f_value}")
    return get_loss(loss).link_inverse(float(f_value))


def excess_risk_bound(loss: LossLike, excess_phi_risk: float) -> float:
    """Gets the largest excess 0-1 risk theta with psi(theta) <= excess_phi_risk

    Args:
        loss (LossLike): loss
        excess_phi_risk (float): R_phi(f) - R_phi*

    Returns:
        float: upper bound on R(f) - R* in [0, 1]
    """
    if excess_phi_risk <= 0.0:
        return 0.0
    if psi_transform(loss, 1.0) <= excess_phi_risk:
        return 1.0
    return float(brentq(lambda theta: psi_transform(loss, theta) - excess_phi_risk, 0.0, 1.0, xtol=1e-12))


def grid_conditional_infimum(
    loss: LossLike, eta: float, wrong_sign_only: bool = False, grid_points: int = ALPHA_GRID_POINTS
) -> float:
    """Minimizes the conditional risk over a uniform alpha grid on [-30, 30] with 0 added

    Numeric oracle for H(eta) and, with `wrong_sign_only`, for H^-(eta).

    Args:
        loss (LossLike): loss
        eta (float): P(Y = 1 | x)
        wrong_sign_only (bool): restrict to alpha (2 eta - 1) <= 0
        grid_points (int): number of grid points

    Returns:
        float: grid minimum
    """
    alphas = np.union1d(np.linspace(-ALPHA_GRID_BOUND, ALPHA_GRID_BOUND, grid_points), 0.0)
    if wrong_sign_only:
        alphas = alphas[alphas * (2.0 * eta - 1.0) <= 0.0]
    return float(np.min(conditional_risk(loss, eta, alphas)))


# implementations

_PSI_HULLS: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}


def _psi_hull(name: str) -> Tuple[np.ndarray, np.ndarray]:
    hull = _PSI_HULLS.get(name)
    if hull is None:
        thetas = np.linspace(0.0, 1.0, int(round(1.0 / PSI_GRID_STEP)) + 1)
        hull = _lower_convex_hull(thetas, _LOSSES[name].psi_tilde(thetas))
        _PSI_HULLS[name] = hull
        logger.debug("psi envelope for %s: %d hull vertices", name, len(hull[0]))
    return hull


def _lower_convex_hull(xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # an apex above the samples keeps collinear input two-dimensional for qhull
    apex = (0.5 * (xs[0] + xs[-1]), float(np.max(ys)) + 1.0)
    points = np.vstack([np.column_stack([xs, ys]), apex])
    # counterclockwise vertices walk the lower chain from the leftmost point to the rightmost
    vertices = ConvexHull(points).vertices
    start = int(np.argmin(points[vertices, 0]))
    chain = []
    for index in np.roll(vertices, -start):
        chain.append(index)
        if points[index, 0] == xs[-1]:
            break
    hull = points[chain]
    return hull[:, 0], hull[:, 1]


def _check_probability(eta: ArrayLike) -> np.ndarray:
    e = np.asarray(eta, dtype=float)
    if np.any((e < 0.0) | (e > 1.0)) or np.any(np.isnan(e)):
        raise ValueError(f"eta must be a probability: {eta}")
    return e
