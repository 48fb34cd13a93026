import logging
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from typing import Any, Final, List, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

# type declaration
Point = Union[np.ndarray, Sequence[float], float, str]
Points = Union[np.ndarray, Sequence[Any]]

# constants
TOL_PSD_RELATIVE: Final[float] = 1e-8
TOL_CENTER: Final[float] = 1e-10
# residual diagonal entries below this fraction of trace(K) are treated as zero by the factorization
PIVOT_FLOOR_RELATIVE: Final[float] = 1e-12

kernel_class_name_postfix: Final[str] = "Kernel"

_KERNEL_VARIANTS: dict = {}


def kernel_variant(name: str):  # type: ignore
    """Decorator registering a Kernel class under a spec prefix.

    Args:
        name (str): spec prefix, e.g. `gauss`
    """

    def _inner_decorator(kernel_cls: type):  # type: ignore
        # validation
        assert kernel_cls.__name__.endswith(kernel_class_name_postfix)
        assert hasattr(kernel_cls, "from_args")

        setattr(kernel_cls, "variant", name)
        _KERNEL_VARIANTS[name] = kernel_cls
        return kernel_cls

    return _inner_decorator


class Kernel(ABC):
    """Reproducing kernel

    Subclasses are registered for the kernel specification grammar with `@kernel_variant("name")`.
    """

    variant: str

    @property
    @abstractmethod
    def spec(self) -> str:
        """Gets the specification string, e.g. `gauss:1.0`

        Returns:
            str: specification string parsed back by `parse_kernel_spec`
        """
        pass

    @abstractmethod
    def prepare(self, points: Points) -> Any:
        """Validates a point list and converts it to the kernel's internal representation

        Args:
            points (Points): point list

        Returns:
            Any: prepared points, indexable by position
        """
        pass

    @abstractmethod
    def eval(self, x: Point, y: Point) -> float:
        """Evaluates k(x, y)

        Args:
            x (Point): first point
            y (Point): second point

        Returns:
            float: kernel value
        """
        pass

    @abstractmethod
    def cross(self, x: Any, points: Any) -> np.ndarray:
        """Evaluates k(x, p) for every prepared point p

        Args:
            x (Any): a single prepared point
            points (Any): prepared points

        Returns:
            np.ndarray: kernel values, one per point
        """
        pass

    @abstractmethod
    def gram(self, points: Points) -> np.ndarray:
        """Builds the Gram matrix

        Args:
            points (Points): point list

        Returns:
            np.ndarray: n x n symmetric matrix
        """
        pass

    def diag(self, points: Any) -> np.ndarray:
        """Evaluates k(p, p) for every prepared point p"""
        return np.array([self.cross(p, points[i : i + 1])[0] for i, p in enumerate(points)], dtype=float)

    def matrix(self, points_a: Points, points_b: Points) -> np.ndarray:
        """Builds the rectangular kernel matrix between two point lists

        Args:
            points_a (Points): row points
            points_b (Points): column points

        Returns:
            np.ndarray: len(points_a) x len(points_b) matrix
        """
        prepared_b = self.prepare(points_b)
        return np.vstack([self.cross(x, prepared_b) for x in self.prepare(points_a)])


class VectorKernel(Kernel):
    """Kernel over points of R^d"""

    def prepare(self, points: Points) -> np.ndarray:
        """Converts points to an n x d float matrix

        Args:
            points (Points): a list of points of uniform dimensionality, or a 1-d list of scalars

        Returns:
            np.ndarray: n x d matrix
        """
        try:
            array = np.asarray(points, dtype=float)
        except ValueError as e:
            raise ValueError(f"points must have uniform dimensionality: {e}") from e
        if array.ndim == 1:
            array = array[:, np.newaxis]
        if array.ndim != 2:
            raise ValueError(f"points must be a list of vectors, got an array of shape {array.shape}")
        if array.shape[0] == 0:
            raise ValueError("point list is empty")
        return array

    def eval(self, x: Point, y: Point) -> float:
        """Evaluates k(x, y)"""
        xv, yv = _vector(x), _vector(y)
        if xv.shape != yv.shape:
            raise ValueError(f"dimension mismatch: {xv.shape[0]} != {yv.shape[0]}")
        return float(self.pairwise(xv[np.newaxis, :], yv[np.newaxis, :])[0, 0])

    def cross(self, x: Any, points: Any) -> np.ndarray:
        """Evaluates k(x, p) for every point p"""
        xv = _vector(x)
        if xv.shape[0] != points.shape[1]:
            raise ValueError(f"dimension mismatch: {xv.shape[0]} != {points.shape[1]}")
        return self.pairwise(xv[np.newaxis, :], points)[0]

    def gram(self, points: Points) -> np.ndarray:
        """Builds the Gram matrix, symmetric by construction"""
        array = self.prepare(points)
        entries = self.pairwise(array, array)
        return 0.5 * (entries + entries.T)

    def matrix(self, points_a: Points, points_b: Points) -> np.ndarray:
        """Builds the rectangular kernel matrix between two point lists"""
        a, b = self.prepare(points_a), self.prepare(points_b)
        if a.shape[1] != b.shape[1]:
            raise ValueError(f"dimension mismatch: {a.shape[1]} != {b.shape[1]}")
        return self.pairwise(a, b)

    @abstractmethod
    def pairwise(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Evaluates the kernel between every row of `a` and every row of `b`"""
        pass


@kernel_variant("linear")
@dataclass(frozen=True)
class LinearKernel(VectorKernel):
    """k(x, y) = <x, y>"""

    @property
    def spec(self) -> str:
        """Gets the specification string"""
        return "linear"

    def pairwise(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Evaluates inner products"""
        return a @ b.T

    @classmethod
    def from_args(cls, args: List[str]) -> "LinearKernel":
        """Creates the kernel from spec arguments"""
        if args:
            raise ValueError(f"linear kernel takes no parameters: {args}")
        return cls()


@kernel_variant("poly")
@dataclass(frozen=True)
class PolynomialKernel(VectorKernel):
    """k(x, y) = (<x, y> + offset)^degree"""

    degree: int
    offset: float = 0.0

    def __post_init__(self) -> None:
        """Validates parameters"""
        if int(self.degree) != self.degree or self.degree < 1:
            raise ValueError(f"polynomial degree must be a positive integer: {self.degree}")
        if not self.offset >= 0:
            raise ValueError(f"polynomial offset must be nonnegative: {self.offset}")

    @property
    def spec(self) -> str:
        """Gets the specification string"""
        return f"poly:{int(self.degree)}:{float(self.offset)!r}"

    def pairwise(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Evaluates shifted inner products raised to the degree"""
        return np.power(a @ b.T + self.offset, int(self.degree))

    @classmethod
    def from_args(cls, args: List[str]) -> "PolynomialKernel":
        """Creates the kernel from spec arguments"""
        if len(args) != 2:
            raise ValueError(f"polynomial kernel spec is `poly:<degree>:<offset>`: {args}")
        return cls(degree=int(args[0]), offset=float(args[1]))


@kernel_variant("gauss")
@dataclass(frozen=True)
class GaussianKernel(VectorKernel):
    """k(x, y) = exp(-||x - y||^2 / (2 sigma^2))"""

    sigma: float

    def __post_init__(self) -> None:
        """Validates parameters"""
        if not self.sigma > 0:
            raise ValueError(f"gaussian bandwidth must be positive: {self.sigma}")

    @property
    def spec(self) -> str:
        """Gets the specification string"""
        return f"gauss:{float(self.sigma)!r}"

    def pairwise(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Evaluates the gaussian of squared distances; exact ones for identical rows"""
        sq_dists = cdist(a, b, metric="sqeuclidean")
        return np.exp(-sq_dists / (2.0 * self.sigma**2))

    @classmethod
    def from_args(cls, args: List[str]) -> "GaussianKernel":
        """Creates the kernel from spec arguments"""
        if len(args) != 1:
            raise ValueError(f"gaussian kernel spec is `gauss:<sigma>`: {args}")
        return cls(sigma=float(args[0]))


@kernel_variant("spectrum")
@dataclass(frozen=True)
class SpectrumKernel(Kernel):
    """p-spectrum string kernel: sum over length-p substrings u of count_s(u) * count_t(u)"""

    p: int

    def __post_init__(self) -> None:
        """Validates parameters"""
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"spectrum length p must be a positive integer: {self.p}")

    @property
    def spec(self) -> str:
        """Gets the specification string"""
        return f"spectrum:{int(self.p)}"

    def prepare(self, points: Points) -> List[str]:
        """Validates that every point is a string"""
        strings = list(points)
        if not strings:
            raise ValueError("point list is empty")
        for s in strings:
            _check_string(s)
        return strings

    def profile(self, s: str) -> Counter:
        """Counts the length-p substrings of s"""
        p = int(self.p)
        return Counter(s[i : i + p] for i in range(len(s) - p + 1))

    def eval(self, x: Point, y: Point) -> float:
        """Evaluates k(x, y)"""
        return _profile_product(self.profile(_check_string(x)), self.profile(_check_string(y)))

    def cross(self, x: Any, points: Any) -> np.ndarray:
        """Evaluates k(x, p) for every string p"""
        px = self.profile(_check_string(x))
        return np.array([_profile_product(px, self.profile(s)) for s in points], dtype=float)

    def gram(self, points: Points) -> np.ndarray:
        """Builds the Gram matrix from substring profiles"""
        profiles = [self.profile(s) for s in self.prepare(points)]
        n = len(profiles)
        entries = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                entries[i, j] = entries[j, i] = _profile_product(profiles[i], profiles[j])
        return entries

    @classmethod
    def from_args(cls, args: List[str]) -> "SpectrumKernel":
        """Creates the kernel from spec arguments"""
        if len(args) != 1:
            raise ValueError(f"spectrum kernel spec is `spectrum:<p>`: {args}")
        return cls(p=int(args[0]))


@dataclass(frozen=True)
class LowRankFactor:
    """Pivoted partial Cholesky factor K ~ L L^T"""

    factor: np.ndarray
    pivots: Tuple[int, ...]
    residual_trace: float
    kernel_evaluations: int

    @property
    def rank(self) -> int:
        """Gets the number of pivots"""
        return len(self.pivots)

    def reconstruct(self) -> np.ndarray:
        """Gets L L^T"""
        return self.factor @ self.factor.T


def eval_kernel(kernel: Kernel, x: Point, y: Point) -> float:
    """Evaluates a kernel on two points

    Args:
        kernel (Kernel): kernel
        x (Point): first point
        y (Point): second point

    Returns:
        float: k(x, y)
    """
    return kernel.eval(x, y)


def spectrum_eval(p: int, s: str, t: str) -> float:
    """Evaluates the p-spectrum kernel on two strings

    Args:
        p (int): substring length, positive
        s (str): first string
        t (str): second string

    Returns:
        float: number of matching length-p substring pairs
    """
    return SpectrumKernel(p).eval(s, t)


def gram(kernel: Kernel, points: Points) -> np.ndarray:
    """Builds the Gram matrix of a kernel on a point list

    Args:
        kernel (Kernel): kernel
        points (Points): nonempty point list of uniform dimensionality

    Returns:
        np.ndarray: n x n Gram matrix
    """
    return kernel.gram(points)


def center_gram(gram_matrix: np.ndarray) -> np.ndarray:
    """Centers a Gram matrix: H G H with H = I - 11^T / n

    Args:
        gram_matrix (np.ndarray): n x n Gram matrix

    Returns:
        np.ndarray: centered matrix whose rows and columns sum to ~0
    """
    g = np.asarray(gram_matrix, dtype=float)
    centered = g - g.mean(axis=0)[np.newaxis, :] - g.mean(axis=1)[:, np.newaxis] + g.mean()
    return 0.5 * (centered + centered.T)


def psd_tolerance(gram_matrix: np.ndarray) -> float:
    """Gets the scale-relative PSD tolerance 1e-8 * trace(G)"""
    return TOL_PSD_RELATIVE * float(np.trace(gram_matrix))


def effective_rank(gram_matrix: np.ndarray, energy: float = 0.99) -> int:
    """Gets the smallest k whose top-k eigenvalues carry `energy` of the trace

    Args:
        gram_matrix (np.ndarray): PSD matrix
        energy (float): fraction of the trace in (0, 1]

    Returns:
        int: effective rank
    """
    if not 0 < energy <= 1:
        raise ValueError(f"energy must be in (0, 1]: {energy}")
    eigenvalues = np.clip(np.linalg.eigvalsh(gram_matrix)[::-1], 0.0, None)
    total = eigenvalues.sum()
    if total <= 0:
        return 0
    cumulative = np.cumsum(eigenvalues) / total
    return int(np.searchsorted(cumulative, energy - 1e-12) + 1)


def incomplete_cholesky(kernel: Kernel, points: Points, tol: float, max_rank: int) -> LowRankFactor:
    """Greedy pivoted partial Cholesky factorization of the Gram matrix

    The pivot is the largest residual diagonal entry, lowest index first on ties. Only the diagonal
    and one kernel column per pivot are evaluated, so the cost is O(n k^2) arithmetic plus n (k + 1)
    kernel evaluations.

    Args:
        kernel (Kernel): kernel
        points (Points): nonempty point list
        tol (float): stop once trace(K - L L^T) <= tol
        max_rank (int): stop after this many pivots

    Returns:
        LowRankFactor: factor, pivots, residual trace and evaluation count
    """
    if tol < 0:
        raise ValueError(f"tol must be nonnegative: {tol}")
    if max_rank < 1:
        raise ValueError(f"max_rank must be positive: {max_rank}")

    prepared = kernel.prepare(points)
    n = len(prepared)
    max_rank = min(int(max_rank), n)

    residual = kernel.diag(prepared)
    evaluations = n
    floor = PIVOT_FLOOR_RELATIVE * float(residual.sum())
    factor = np.zeros((n, max_rank))
    pivots: List[int] = []

    for j in range(max_rank):
        if float(residual.sum()) <= tol:
            break
        pivot = int(np.argmax(residual))
        if residual[pivot] <= floor:
            logger.debug("residual diagonal exhausted at rank %d", j)
            break

        column = kernel.cross(prepared[pivot], prepared)
        evaluations += n
        factor[:, j] = (column - factor[:, :j] @ factor[pivot, :j]) / np.sqrt(residual[pivot])

        pivots.append(pivot)
        residual -= factor[:, j] ** 2
        residual[pivots] = 0.0
        np.maximum(residual, 0.0, out=residual)

    logger.debug("incomplete cholesky: n=%d, rank=%d, residual trace=%g", n, len(pivots), residual.sum())
    return LowRankFactor(
        factor=factor[:, : len(pivots)],
        pivots=tuple(pivots),
        residual_trace=float(residual.sum()),
        kernel_evaluations=evaluations,
    )


#
# Kernel specification grammar
#


def parse_kernel_spec(spec: str) -> Kernel:
    """Parses `linear`, `poly:<degree>:<offset>`, `gauss:<sigma>` or `spectrum:<p>`

    Args:
        spec (str): kernel specification

    Returns:
        Kernel: kernel
    """
    name, *args = spec.strip().split(":")
    kernel_cls = _KERNEL_VARIANTS.get(name)
    if kernel_cls is None:
        raise ValueError(f"no such kernel: {spec!r} (expected one of {sorted(_KERNEL_VARIANTS)})")
    try:
        kernel: Kernel = kernel_cls.from_args(args)
    except (TypeError, ValueError) as e:
        raise ValueError(f"invalid kernel spec {spec!r}: {e}") from e
    return kernel


# implementations


def _vector(x: Point) -> np.ndarray:
    if isinstance(x, str):
        raise ValueError(f"string input to a vector kernel: {x!r}")
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"a point must be a vector, got shape {v.shape}")
    return v


def _check_string(s: Any) -> str:
    if not isinstance(s, str):
        raise ValueError(f"spectrum kernel takes strings, got {type(s).__name__}")
    return s


def _profile_product(a: Counter, b: Counter) -> float:
    if len(b) < len(a):
        a, b = b, a
    return float(sum(count * b[u] for u, count in a.items() if u in b))
