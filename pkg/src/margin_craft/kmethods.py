import logging
from dataclasses import dataclass, field
from typing import Callable, Final, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh, solve, subspace_angles, svd

from . import seeding
from .kernels import Kernel, Points, center_gram

logger = logging.getLogger(__name__)

# constants
DEFAULT_KAPPA: Final[float] = 1e-2
DEFAULT_EPSILON: Final[float] = 1e-3
DEFAULT_RESTARTS: Final[int] = 5
DEFAULT_SDR_MAX_ITER: Final[int] = 200
MIN_PERMUTATIONS: Final[int] = 19
TOL_ORTHONORMAL: Final[float] = 1e-8
FD_STEP: Final[float] = 1e-4
MIN_LINE_STEP: Final[float] = 1e-8


@dataclass(frozen=True)
class CcaResult:
    """First regularized kernel canonical correlation"""

    rho: float
    rho_unclipped: float
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    kappa: float


@dataclass(frozen=True)
class IndependenceTestResult:
    """Permutation test of rho = 0"""

    rho: float
    p_value: float
    permutations: int
    null_samples: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SdrResult:
    """Estimated central subspace basis"""

    B: np.ndarray
    objective: float
    restarts_used: int


def kernel_cca(x1s: Points, x2s: Points, k1: Kernel, k2: Kernel, kappa: float = DEFAULT_KAPPA) -> CcaResult:
    """Computes the largest regularized kernel canonical correlation

    Solves [[0, K1 K2], [K2 K1, 0]] (a; b) = rho [[R1^2, 0], [0, R2^2]] (a; b) with centered Grams Ki and
    Ri = Ki + (n kappa / 2) I through the singular values of (R1^-1 K1)(K2 R2^-1).

    Args:
        x1s (Points): first sample
        x2s (Points): second sample, same length
        k1 (Kernel): kernel on the first sample
        k2 (Kernel): kernel on the second sample
        kappa (float): regularization, positive

    Returns:
        CcaResult: correlation and dual coefficients
    """
    (a_op, r1), (b_op, r2) = _cca_operators(x1s, x2s, k1, k2, kappa)
    u, s, vt = svd(a_op @ b_op)
    rho_raw = float(s[0])
    # R1 a = u and R2 b = v
    a = solve(r1, u[:, 0], assume_a="pos")
    b = solve(r2, vt[0], assume_a="pos")
    return CcaResult(rho=float(np.clip(rho_raw, 0.0, 1.0)), rho_unclipped=rho_raw, a=a, b=b, kappa=float(kappa))


def independence_test(
    x1s: Points,
    x2s: Points,
    k1: Kernel,
    k2: Kernel,
    kappa: float = DEFAULT_KAPPA,
    permutations: int = 99,
    seed: int = 0,
) -> IndependenceTestResult:
    """Permutation test of independence with the kernel canonical correlation as statistic

    Each replicate permutes the second sample with the generator of (seed, replicate index), redrawing
    the identity permutation so that no shuffle reproduces the observed pairing.

    Args:
        x1s (Points): first sample
        x2s (Points): second sample
        k1 (Kernel): kernel on the first sample
        k2 (Kernel): kernel on the second sample
        kappa (float): regularization
        permutations (int): number of shuffles, at least 19
        seed (int): seed

    Returns:
        IndependenceTestResult: observed rho, add-one p-value and the null sample
    """
    if permutations < MIN_PERMUTATIONS:
        raise ValueError(f"at least {MIN_PERMUTATIONS} permutations are needed: {permutations}")
    (a_op, _), (b_op, _) = _cca_operators(x1s, x2s, k1, k2, kappa)
    n = a_op.shape[0]
    rho = float(np.clip(np.linalg.norm(a_op @ b_op, 2), 0.0, 1.0))

    identity = np.arange(n)
    null = np.empty(permutations)
    for i in range(permutations):
        generator = seeding.rng(seed, i)
        order = generator.permutation(n)
        while np.array_equal(order, identity):
            order = generator.permutation(n)
        null[i] = np.clip(np.linalg.norm(a_op @ b_op[order, :], 2), 0.0, 1.0)

    p_value = (1 + int(np.sum(null >= rho))) / (permutations + 1)
    logger.debug("independence test: rho=%.6g, p=%.4g over %d permutations", rho, p_value, permutations)
    return IndependenceTestResult(rho=rho, p_value=p_value, permutations=permutations, null_samples=null)


def kdr_objective(
    B: np.ndarray, xs: Points, ys: Points, kx: Kernel, ky: Kernel, epsilon: float = DEFAULT_EPSILON
) -> float:
    """Evaluates Tr[G_Y (G_X^B + n epsilon I)^-1] with centered Grams

    G_X^B is the Gram matrix of the projected points B^T x.

    Args:
        B (np.ndarray): d x m matrix with orthonormal columns
        xs (Points): n x d predictors
        ys (Points): n responses
        kx (Kernel): kernel on projected predictors
        ky (Kernel): kernel on responses
        epsilon (float): regularization, positive

    Returns:
        float: trace of the regularized conditional covariance
    """
    x = _predictors(xs)
    basis = _check_orthonormal(B, x.shape[1])
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive: {epsilon}")
    return _projected_trace(basis, x, _response_factor(ys, ky, len(x)), kx, epsilon)


def kdr_gradient(
    B: np.ndarray,
    xs: Points,
    ys: Points,
    kx: Kernel,
    ky: Kernel,
    epsilon: float = DEFAULT_EPSILON,
    step: float = FD_STEP,
    stencil: int = 3,
) -> np.ndarray:
    """Central finite-difference gradient of kdr_objective in the entries of B

    Args:
        B (np.ndarray): d x m orthonormal matrix
        xs (Points): predictors
        ys (Points): responses
        kx (Kernel): kernel on projected predictors
        ky (Kernel): kernel on responses
        epsilon (float): regularization
        step (float): difference step
        stencil (int): 3 or 5 points

    Returns:
        np.ndarray: d x m gradient
    """
    x = _predictors(xs)
    basis = _check_orthonormal(B, x.shape[1])
    factor = _response_factor(ys, ky, len(x))
    return _finite_difference(lambda b: _projected_trace(b, x, factor, kx, epsilon), basis, step, stencil)


def estimate_sdr(
    xs: Points,
    ys: Points,
    m: int,
    kx: Kernel,
    ky: Kernel,
    epsilon: float = DEFAULT_EPSILON,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    max_iter: int = DEFAULT_SDR_MAX_ITER,
) -> SdrResult:
    """Minimizes kdr_objective over d x m orthonormal matrices

    Gradient descent along the normalized finite-difference gradient with backtracking from step 1.0,
    re-orthonormalized after every step; the best of `restarts` random starts is returned.

    Args:
        xs (Points): n x d predictors
        ys (Points): n responses
        m (int): target dimension, 1 <= m <= d
        kx (Kernel): kernel on projected predictors
        ky (Kernel): kernel on responses
        epsilon (float): regularization
        restarts (int): number of random starts
        seed (int): seed; restart r uses the generator of (seed, r)
        max_iter (int): iteration cap per restart

    Returns:
        SdrResult: best basis and its objective
    """
    x = _predictors(xs)
    n, d = x.shape
    if not 1 <= m <= d:
        raise ValueError(f"target dimension must be in [1, {d}]: {m}")
    if n < m + 1:
        raise ValueError(f"need at least {m + 1} observations, got {n}")
    if np.all(x == x[0]):
        raise ValueError("all predictor rows are identical")
    if restarts < 1:
        raise ValueError(f"restarts must be positive: {restarts}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive: {epsilon}")
    factor = _response_factor(ys, ky, n)

    if m == d:
        basis = np.eye(d)
        return SdrResult(B=basis, objective=_projected_trace(basis, x, factor, kx, epsilon), restarts_used=0)

    def objective(b: np.ndarray) -> float:
        return _projected_trace(b, x, factor, kx, epsilon)

    best_basis, best_value = None, np.inf
    for r in range(restarts):
        start = _orthonormalize(seeding.rng(seed, r).standard_normal((d, m)))
        basis, value = _descend(objective, start, max_iter)
        logger.debug("sdr restart %d: objective=%.12g", r, value)
        if value < best_value:
            best_basis, best_value = basis, value

    assert best_basis is not None
    return SdrResult(B=best_basis, objective=best_value, restarts_used=restarts)


def principal_angle(B1: np.ndarray, B2: np.ndarray) -> float:
    """Gets the largest principal angle between two column spaces, in degrees"""
    angles = subspace_angles(np.atleast_2d(np.asarray(B1, dtype=float)), np.atleast_2d(np.asarray(B2, dtype=float)))
    return float(np.degrees(np.max(angles)))


# implementations


def _cca_operators(
    x1s: Points, x2s: Points, k1: Kernel, k2: Kernel, kappa: float
) -> Tuple[Tuple[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    if not kappa > 0:
        raise ValueError(f"kappa must be positive: {kappa}")
    g1, g2 = k1.gram(x1s), k2.gram(x2s)
    n = g1.shape[0]
    if g2.shape[0] != n:
        raise ValueError(f"sample sizes differ: {n} != {g2.shape[0]}")
    if n < 2:
        raise ValueError(f"need at least 2 observations, got {n}")
    if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
        raise ValueError("non-finite Gram matrix entries")

    ridge = 0.5 * n * kappa * np.eye(n)
    operators = []
    for g in (center_gram(g1), center_gram(g2)):
        r = g + ridge
        operators.append((solve(r, g, assume_a="pos"), r))
    # B = K2 R2^-1 is the transpose of R2^-1 K2
    (a_op, r1), (b_op, r2) = operators
    return (a_op, r1), (b_op.T, r2)


def _predictors(xs: Points) -> np.ndarray:
    x = np.asarray(xs, dtype=float)
    if x.ndim == 1:
        x = x[:, np.newaxis]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"predictors must be a nonempty n x d matrix, got shape {x.shape}")
    return x


def _check_orthonormal(B: np.ndarray, d: int) -> np.ndarray:
    basis = np.asarray(B, dtype=float)
    if basis.ndim == 1:
        basis = basis[:, np.newaxis]
    if basis.shape[0] != d:
        raise ValueError(f"B has {basis.shape[0]} rows, predictors have {d} columns")
    deviation = np.max(np.abs(basis.T @ basis - np.eye(basis.shape[1])))
    if deviation > TOL_ORTHONORMAL:
        raise ValueError(f"B does not have orthonormal columns (deviation {deviation:.3g})")
    return basis


def _response_factor(ys: Points, ky: Kernel, n: int) -> np.ndarray:
    """Gets F with F F^T = centered G_Y"""
    gy = center_gram(ky.gram(ys))
    if gy.shape[0] != n:
        raise ValueError(f"{gy.shape[0]} responses for {n} predictors")
    values, vectors = eigh(gy)
    keep = values > 1e-12 * max(float(values[-1]), 0.0)
    return vectors[:, keep] * np.sqrt(values[keep])


def _projected_trace(basis: np.ndarray, x: np.ndarray, response: np.ndarray, kx: Kernel, epsilon: float) -> float:
    n = x.shape[0]
    gx = center_gram(kx.gram(x @ basis))
    try:
        factor = cho_factor(gx + n * epsilon * np.eye(n))
    except LinAlgError as e:
        raise ArithmeticError(f"regularized predictor Gram matrix is not positive definite: {e}") from e
    return float(np.sum(response * cho_solve(factor, response)))


def _finite_difference(f: Callable[[np.ndarray], float], basis: np.ndarray, step: float, stencil: int) -> np.ndarray:
    if stencil not in (3, 5):
        raise ValueError(f"stencil must be 3 or 5: {stencil}")
    gradient = np.zeros_like(basis)
    for index in np.ndindex(basis.shape):
        offset = np.zeros_like(basis)
        offset[index] = step
        if stencil == 3:
            gradient[index] = (f(basis + offset) - f(basis - offset)) / (2.0 * step)
        else:
            gradient[index] = (
                -f(basis + 2.0 * offset) + 8.0 * f(basis + offset) - 8.0 * f(basis - offset) + f(basis - 2.0 * offset)
            ) / (12.0 * step)
    return gradient


def _orthonormalize(matrix: np.ndarray) -> np.ndarray:
    # polar factor: the nearest matrix with orthonormal columns
    u, _, vt = svd(matrix, full_matrices=False)
    return u @ vt


def _descend(objective: Callable[[np.ndarray], float], start: np.ndarray, max_iter: int) -> Tuple[np.ndarray, float]:
    basis, value = start, objective(start)
    for _ in range(max_iter):
        gradient = _finite_difference(objective, basis, FD_STEP, 3)
        norm = float(np.linalg.norm(gradient))
        if norm == 0.0:
            break
        direction = gradient / norm
        step = 1.0
        while step >= MIN_LINE_STEP:
            candidate = _orthonormalize(basis - step * direction)
            candidate_value = objective(candidate)
            if candidate_value < value:
                basis, value = candidate, candidate_value
                break
            step *= 0.5
        else:
            break
    return basis, value
