import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Final, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize as scipy_minimize

logger = logging.getLogger(__name__)

# type declaration
Evaluation = Tuple[float, np.ndarray]
Backend = Callable[["ObjectiveOracle", np.ndarray, "OptConfig"], "OptResult"]

# constants
DEFAULT_MAX_ITER: Final[int] = 2000
DEFAULT_BUNDLE_SIZE: Final[int] = 50
# a serious step needs this fraction of the decrease predicted by the cutting-plane model
DESCENT_FRACTION: Final[float] = 0.1

_BACKENDS: Dict[str, Backend] = {}


def optimizer_backend(name: str):  # type: ignore
    """Decorator registering a minimization backend.

    Args:
        name (str): backend name used by the CLI and configuration files
    """

    def _inner_decorator(backend: Backend) -> Backend:
        _BACKENDS[name] = backend
        return backend

    return _inner_decorator


class NonFiniteOracleError(ArithmeticError):
    """The oracle returned a non-finite value or subgradient"""

    def __init__(self, iterate: np.ndarray, iteration: int, value: float):
        """Initialize

        Args:
            iterate (np.ndarray): point at which the oracle was evaluated
            iteration (int): iteration number (0 for the start point)
            value (float): returned objective value
        """
        self.iterate = iterate
        self.iteration = iteration
        self.value = value
        preview = np.array2string(iterate, threshold=10, precision=6)
        super().__init__(f"non-finite oracle output at iteration {iteration} (value={value}): x={preview}")


@dataclass(frozen=True)
class ObjectiveOracle:
    """Convex objective given by a value and subgradient oracle

    With a `metric` M (symmetric PSD), `evaluate` returns the representer g of the subgradient in the
    inner product <u, v>_M = u^T M v, i.e. f(y) >= f(x) + g^T M (y - x). Without it M is the identity.
    `project`, when given, maps any point onto the feasible set.
    """

    dimension: int
    evaluate: Callable[[np.ndarray], Evaluation]
    metric: Optional[np.ndarray] = None
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def lower(self, g: np.ndarray) -> np.ndarray:
        """Maps a representer to the Euclidean subgradient M g"""
        return g if self.metric is None else self.metric @ g

    def norm(self, g: np.ndarray) -> float:
        """Gets ||g||_M"""
        return float(np.sqrt(max(float(g @ self.lower(g)), 0.0)))


@dataclass(frozen=True)
class OptConfig:
    """Minimization settings"""

    max_iter: int = DEFAULT_MAX_ITER
    step_c: float = 1.0
    backend: str = "subgrad"
    bundle_size: int = DEFAULT_BUNDLE_SIZE


@dataclass(frozen=True)
class OptResult:
    """Best iterate visited"""

    minimizer: np.ndarray
    objective: float
    iterations: int
    best_subgradient_norm: float
    # best-so-far objective after each iteration
    history: np.ndarray = field(repr=False)


def backend_names() -> Tuple[str, ...]:
    """Gets the registered backend names"""
    return tuple(_BACKENDS)


def minimize(oracle: ObjectiveOracle, start: np.ndarray, config: Optional[OptConfig] = None) -> OptResult:
    """Minimizes a nonsmooth convex objective

    Runs the configured number of iterations (no other stopping rule) and returns the best iterate,
    the start point included.

    Args:
        oracle (ObjectiveOracle): objective
        start (np.ndarray): start point with `oracle.dimension` entries
        config (Optional[OptConfig]): settings, defaults when omitted

    Returns:
        OptResult: best iterate, its objective and the optimization trace
    """
    config = config or OptConfig()
    x0 = np.array(start, dtype=float).reshape(-1)
    if x0.shape[0] != oracle.dimension:
        raise ValueError(f"start has {x0.shape[0]} entries, the oracle expects {oracle.dimension}")
    if not config.step_c > 0:
        raise ValueError(f"step_c must be positive: {config.step_c}")
    if config.max_iter < 1:
        raise ValueError(f"max_iter must be positive: {config.max_iter}")
    backend = _BACKENDS.get(config.backend)
    if backend is None:
        raise ValueError(f"no such backend: {config.backend!r} (expected one of {list(_BACKENDS)})")

    result = backend(oracle, x0, config)
    logger.debug(
        "%s: objective=%.12g after %d iterations, |g|=%.3g",
        config.backend,
        result.objective,
        result.iterations,
        result.best_subgradient_norm,
    )
    return result


@optimizer_backend("subgrad")
def _subgradient_descent(oracle: ObjectiveOracle, start: np.ndarray, config: OptConfig) -> OptResult:
    x = _project(oracle, start)
    value, g = _evaluate(oracle, x, 0)
    best = _Best(x, value, g)
    history = np.empty(config.max_iter)
    report_every = max(1, config.max_iter // 10)

    for t in range(1, config.max_iter + 1):
        x = _project(oracle, x - (config.step_c / np.sqrt(t)) * g)
        value, g = _evaluate(oracle, x, t)
        best.offer(x, value, g)
        history[t - 1] = best.value
        if t % report_every == 0:
            logger.debug("subgrad iteration %d: value=%.12g, best=%.12g", t, value, best.value)

    return best.result(oracle, config.max_iter, history)


@dataclass
class _Cut:
    point: np.ndarray
    value: float
    representer: np.ndarray
    slope: np.ndarray
    weight: float = 0.0


@optimizer_backend("bundle")
def _proximal_bundle(oracle: ObjectiveOracle, start: np.ndarray, config: OptConfig) -> OptResult:
    """Proximal cutting-plane method

    The candidate minimizes the cut model plus ||x - center||_M^2 / (2 t). `t` starts at step_c, is
    halved on a null step and doubled (capped at step_c) on a serious step. Halving t halves the step
    and doubles the proximal coefficient 1 / (2 t).
    """
    center = _project(oracle, start)
    center_value, g = _evaluate(oracle, center, 0)
    best = _Best(center, center_value, g)
    cuts = [_Cut(center, center_value, g, oracle.lower(g))]
    prox_step = config.step_c
    history = np.empty(config.max_iter)
    report_every = max(1, config.max_iter // 10)
    serious_steps = 0

    for k in range(1, config.max_iter + 1):
        candidate, predicted = _proximal_point(cuts, center, center_value, prox_step)
        candidate = _project(oracle, candidate)
        value, g = _evaluate(oracle, candidate, k)
        best.offer(candidate, value, g)
        history[k - 1] = best.value

        cuts.append(_Cut(candidate, value, g, oracle.lower(g)))
        if len(cuts) > config.bundle_size:
            _drop_cut(cuts)

        if center_value - value >= DESCENT_FRACTION * predicted:
            center, center_value = candidate, value
            prox_step = min(2.0 * prox_step, config.step_c)
            serious_steps += 1
        else:
            prox_step *= 0.5

        if k % report_every == 0:
            logger.debug(
                "bundle iteration %d: center=%.12g, t=%.3g, cuts=%d, serious=%d",
                k,
                center_value,
                prox_step,
                len(cuts),
                serious_steps,
            )

    return best.result(oracle, config.max_iter, history)


# implementations


class _Best:
    def __init__(self, x: np.ndarray, value: float, g: np.ndarray):
        self.x, self.value, self.g = x, value, g

    def offer(self, x: np.ndarray, value: float, g: np.ndarray) -> None:
        if value < self.value:
            self.x, self.value, self.g = x, value, g

    def result(self, oracle: ObjectiveOracle, iterations: int, history: np.ndarray) -> OptResult:
        return OptResult(
            minimizer=self.x.copy(),
            objective=float(self.value),
            iterations=iterations,
            best_subgradient_norm=oracle.norm(self.g),
            history=history,
        )


def _evaluate(oracle: ObjectiveOracle, x: np.ndarray, iteration: int) -> Evaluation:
    value, g = oracle.evaluate(x)
    value = float(value)
    g = np.asarray(g, dtype=float)
    if not np.isfinite(value) or not np.all(np.isfinite(g)):
        raise NonFiniteOracleError(x.copy(), iteration, value)
    return value, g


def _project(oracle: ObjectiveOracle, x: np.ndarray) -> np.ndarray:
    return x if oracle.project is None else np.asarray(oracle.project(x), dtype=float)


def _proximal_point(cuts: List[_Cut], center: np.ndarray, center_value: float, t: float) -> Tuple[np.ndarray, float]:
    """Minimizes max_j cut_j(x) + ||x - center||_M^2 / (2 t) through its dual over the simplex

    Returns the minimizer and the decrease the model predicts there.
    """
    offsets = np.array([c.value + c.slope @ (center - c.point) for c in cuts])
    representers = np.array([c.representer for c in cuts])
    slopes = np.array([c.slope for c in cuts])
    gram = representers @ slopes.T
    gram = 0.5 * (gram + gram.T)
    m = len(cuts)

    if m == 1:
        weights = np.ones(1)
    else:
        solution = scipy_minimize(
            lambda mu: 0.5 * t * mu @ gram @ mu - offsets @ mu,
            np.full(m, 1.0 / m),
            jac=lambda mu: t * gram @ mu - offsets,
            method="SLSQP",
            bounds=[(0.0, 1.0)] * m,
            constraints=[{"type": "eq", "fun": lambda mu: mu.sum() - 1.0, "jac": lambda mu: np.ones_like(mu)}],
            options={"maxiter": 200, "ftol": 1e-14},
        )
        if not solution.success:
            logger.warning("bundle subproblem: %s", solution.message)
        weights = np.clip(solution.x, 0.0, None)
        total = weights.sum()
        weights = weights / total if total > 0 else np.full(m, 1.0 / m)

    for cut, weight in zip(cuts, weights):
        cut.weight = float(weight)

    candidate = center - t * (weights @ representers)
    model_value = max(c.value + c.slope @ (candidate - c.point) for c in cuts)
    return candidate, max(center_value - model_value, 0.0)


def _drop_cut(cuts: List[_Cut]) -> None:
    # the oldest inactive cut, else the oldest cut; the newest cut always stays
    for i, cut in enumerate(cuts[:-1]):
        if cut.weight <= 1e-12:
            del cuts[i]
            return
    del cuts[0]
