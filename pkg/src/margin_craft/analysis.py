import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Final, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import quad
from scipy.special import expit
from scipy.stats import norm

from . import losses, seeding
from .classify import LabeledDataset
from .losses import LossLike

logger = logging.getLogger(__name__)

# type declaration
DecisionValues = Union[Callable[[np.ndarray], float], ArrayLike]
BatchDecision = Callable[[np.ndarray], np.ndarray]

# constants
TOL_MARGINAL: Final[float] = 1e-12
PSI_SLACK: Final[float] = 1e-9
QUAD_TOL: Final[float] = 1e-6


@dataclass(frozen=True)
class DiscreteJoint:
    """Finite joint distribution of (X, Y): support points, marginal p and eta = P(Y = 1 | X)"""

    support: np.ndarray
    p: np.ndarray
    eta: np.ndarray

    def __post_init__(self) -> None:
        """Validates the distribution"""
        support = np.asarray(self.support, dtype=float)
        if support.ndim == 1:
            support = support[:, np.newaxis]
        p = np.asarray(self.p, dtype=float).reshape(-1)
        eta = np.asarray(self.eta, dtype=float).reshape(-1)
        m = support.shape[0]
        if m == 0 or len(p) != m or len(eta) != m:
            raise ValueError(f"support, p and eta need the same positive length: {m}, {len(p)}, {len(eta)}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > TOL_MARGINAL:
            raise ValueError(f"marginal must be a probability vector: sum={p.sum()!r}")
        if np.any((eta < 0) | (eta > 1)):
            raise ValueError("eta must lie in [0, 1]")
        if len(np.unique(support, axis=0)) != m:
            raise ValueError("support points must be distinct")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "eta", eta)

    @property
    def size(self) -> int:
        """Gets the number of atoms"""
        return len(self.p)


@dataclass(frozen=True)
class PsiBoundCheck:
    """Both sides of psi(R(f) - R*) <= R_phi(f) - R_phi*"""

    excess_risk: float
    excess_phi_risk: float
    psi_value: float
    holds: bool


@dataclass(frozen=True)
class MixtureBenchmark:
    """Two gaussian components with a shared isotropic scale and prior 1/2 each

    eta(x) is the posterior of the positive component.
    """

    mean_positive: np.ndarray
    mean_negative: np.ndarray
    scale: float = 1.0

    def __post_init__(self) -> None:
        """Validates parameters"""
        mp = np.atleast_1d(np.asarray(self.mean_positive, dtype=float))
        mn = np.atleast_1d(np.asarray(self.mean_negative, dtype=float))
        if mp.shape != mn.shape or mp.ndim != 1:
            raise ValueError(f"component means must be vectors of one dimension: {mp.shape}, {mn.shape}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive: {self.scale}")
        object.__setattr__(self, "mean_positive", mp)
        object.__setattr__(self, "mean_negative", mn)

    @classmethod
    def symmetric(cls, separation: float = 1.0, dim: int = 1, scale: float = 1.0) -> "MixtureBenchmark":
        """Creates components at +-separation along the first axis"""
        axis = np.zeros(dim)
        axis[0] = separation
        return cls(mean_positive=axis, mean_negative=-axis, scale=scale)

    @property
    def dim(self) -> int:
        """Gets the dimensionality"""
        return len(self.mean_positive)

    def eta(self, xs: ArrayLike) -> np.ndarray:
        """Gets P(Y = 1 | x) for each row of xs"""
        x = _rows(xs, self.dim)
        log_ratio = (
            np.sum((x - self.mean_negative) ** 2, axis=1) - np.sum((x - self.mean_positive) ** 2, axis=1)
        ) / (2.0 * self.scale**2)
        return expit(log_ratio)

    @cached_property
    def bayes_risk(self) -> float:
        """Gets R*, integrated once"""
        return mixture_bayes_risk(self)


def bayes_risk(joint: DiscreteJoint) -> float:
    """Gets R* = sum_j p_j min(eta_j, 1 - eta_j)"""
    return float(joint.p @ np.minimum(joint.eta, 1.0 - joint.eta))


def risk(joint: DiscreteJoint, f: DecisionValues) -> float:
    """Gets P(Y != sign(f(X))) with sign(0) = +1

    Args:
        joint (DiscreteJoint): distribution
        f (DecisionValues): decision function of a point, or its values on the support

    Returns:
        float: misclassification risk
    """
    values = _support_values(joint, f)
    errors = np.where(values >= 0, 1.0 - joint.eta, joint.eta)
    return float(joint.p @ errors)


def phi_risk(joint: DiscreteJoint, f: DecisionValues, loss: LossLike) -> float:
    """Gets E phi(Y f(X))"""
    values = _support_values(joint, f)
    return float(joint.p @ losses.conditional_risk(loss, joint.eta, values))


def optimal_phi_risk(joint: DiscreteJoint, loss: LossLike) -> float:
    """Gets R_phi* = sum_j p_j H(eta_j)"""
    return float(joint.p @ losses.get_loss(loss).minimal_conditional_risk(joint.eta))


def check_psi_bound(joint: DiscreteJoint, f: DecisionValues, loss: LossLike) -> PsiBoundCheck:
    """Evaluates both sides of psi(R(f) - R*) <= R_phi(f) - R_phi* exactly

    Args:
        joint (DiscreteJoint): distribution
        f (DecisionValues): decision function or its values on the support
        loss (LossLike): surrogate loss

    Returns:
        PsiBoundCheck: excess risks, psi value and verdict at slack 1e-9
    """
    values = _support_values(joint, f)
    excess_risk = risk(joint, values) - bayes_risk(joint)
    excess_phi_risk = phi_risk(joint, values, loss) - optimal_phi_risk(joint, loss)
    psi_value = losses.psi_transform(loss, float(np.clip(excess_risk, 0.0, 1.0)))
    return PsiBoundCheck(
        excess_risk=excess_risk,
        excess_phi_risk=excess_phi_risk,
        psi_value=psi_value,
        holds=psi_value <= excess_phi_risk + PSI_SLACK,
    )


def sample(source: Union[DiscreteJoint, MixtureBenchmark], n: int, seed: int) -> LabeledDataset:
    """Draws n i.i.d. labelled examples

    Args:
        source (Union[DiscreteJoint, MixtureBenchmark]): distribution
        n (int): sample size
        seed (int): seed

    Returns:
        LabeledDataset: sample
    """
    if n < 1:
        raise ValueError(f"sample size must be positive: {n}")
    generator = seeding.rng(seed)
    if isinstance(source, DiscreteJoint):
        index = generator.choice(source.size, size=n, p=source.p)
        labels = np.where(generator.random(n) < source.eta[index], 1, -1)
        return LabeledDataset(points=source.support[index], labels=labels)
    if isinstance(source, MixtureBenchmark):
        labels = np.where(generator.random(n) < 0.5, 1, -1)
        means = np.where(labels[:, np.newaxis] > 0, source.mean_positive, source.mean_negative)
        return LabeledDataset(points=means + source.scale * generator.standard_normal((n, source.dim)), labels=labels)
    raise TypeError(f"cannot sample from {type(source).__name__}")


def mixture_bayes_risk(benchmark: MixtureBenchmark) -> float:
    """Integrates min(eta, 1 - eta) against the mixture density

    The integral reduces to one dimension along the axis through both means.

    Args:
        benchmark (MixtureBenchmark): mixture

    Returns:
        float: R* in [0, 1/2]
    """
    half_gap = 0.5 * float(np.linalg.norm(benchmark.mean_positive - benchmark.mean_negative))
    if half_gap == 0.0:
        return 0.5
    s = benchmark.scale

    def integrand(z: float) -> float:
        return 0.5 * min(norm.pdf(z, loc=half_gap, scale=s), norm.pdf(z, loc=-half_gap, scale=s))

    bound = half_gap + 12.0 * s
    left, _ = quad(integrand, -bound, 0.0, epsabs=QUAD_TOL)
    right, _ = quad(integrand, 0.0, bound, epsabs=QUAD_TOL)
    return float(np.clip(left + right, 0.0, 0.5))


def mixture_risk(benchmark: MixtureBenchmark, f: BatchDecision, n_test: int, seed: int) -> float:
    """Estimates R(f) by averaging the exact conditional error over fresh draws of X

    Args:
        benchmark (MixtureBenchmark): mixture
        f (BatchDecision): decision values for a matrix of points
        n_test (int): number of draws
        seed (int): seed

    Returns:
        float: risk estimate
    """
    xs, eta = _draw_marginal(benchmark, n_test, seed)
    return float(np.mean(np.where(f(xs) >= 0, 1.0 - eta, eta)))


def mixture_phi_risk(benchmark: MixtureBenchmark, f: BatchDecision, loss: LossLike, n_test: int, seed: int) -> float:
    """Estimates R_phi(f) by averaging the exact conditional phi-risk over fresh draws of X"""
    xs, eta = _draw_marginal(benchmark, n_test, seed)
    return float(np.mean(losses.conditional_risk(loss, eta, f(xs))))


def mixture_optimal_phi_risk(benchmark: MixtureBenchmark, loss: LossLike, n_test: int, seed: int) -> float:
    """Estimates R_phi* = E H(eta(X)) over fresh draws of X"""
    _, eta = _draw_marginal(benchmark, n_test, seed)
    return float(np.mean(losses.get_loss(loss).minimal_conditional_risk(eta)))


def probability_mae(
    benchmark: MixtureBenchmark, estimate: Callable[[np.ndarray], np.ndarray], n_test: int, seed: int
) -> float:
    """Gets the mean absolute error of probability estimates against eta(x) over fresh draws of X"""
    xs, eta = _draw_marginal(benchmark, n_test, seed)
    return float(np.mean(np.abs(estimate(xs) - eta)))


def random_joint(generator: np.random.Generator, max_atoms: int = 6, dim: int = 1) -> DiscreteJoint:
    """Draws a random DiscreteJoint with 1..max_atoms atoms

    Args:
        generator (np.random.Generator): generator
        max_atoms (int): largest support size
        dim (int): dimensionality of the support

    Returns:
        DiscreteJoint: distribution with distinct integer-grid support points
    """
    m = int(generator.integers(1, max_atoms + 1))
    support = generator.permutation(100 * max_atoms)[:m].reshape(m, 1).astype(float)
    if dim > 1:
        support = np.hstack([support, np.zeros((m, dim - 1))])
    p = generator.dirichlet(np.ones(m))
    p[-1] = max(1.0 - p[:-1].sum(), 0.0)
    return DiscreteJoint(support=support, p=p, eta=generator.random(m))


# implementations


def _support_values(joint: DiscreteJoint, f: DecisionValues) -> np.ndarray:
    if callable(f):
        return np.array([float(f(x)) for x in joint.support])
    values = np.asarray(f, dtype=float).reshape(-1)
    if len(values) != joint.size:
        raise ValueError(f"{len(values)} decision values for {joint.size} support points")
    return values


def _rows(xs: ArrayLike, dim: int) -> np.ndarray:
    x = np.asarray(xs, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, dim) if dim > 1 else x[:, np.newaxis]
    if x.shape[1] != dim:
        raise ValueError(f"dimension mismatch: {x.shape[1]} != {dim}")
    return x


def _draw_marginal(benchmark: MixtureBenchmark, n_test: int, seed: int) -> Sequence[np.ndarray]:
    test = sample(benchmark, n_test, seed)
    xs = np.asarray(test.points)
    return xs, benchmark.eta(xs)
