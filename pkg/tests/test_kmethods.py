import numpy as np
import pytest
from scipy.linalg import eigh
from scipy.stats import ortho_group

from margin_craft import kmethods, seeding
from margin_craft.kernels import GaussianKernel, LinearKernel, center_gram

GAUSS = GaussianKernel(1.0)


def _dependent_pair(n: int, seed: int):
    generator = seeding.rng(seed)
    xs = generator.uniform(-1.0, 1.0, n)
    return xs, xs**2 + 0.1 * generator.standard_normal(n)


def _sdr_data(n: int, d: int, seed: int):
    generator = seeding.rng(seed)
    xs = generator.standard_normal((n, d))
    return xs, xs[:, 0] + 0.1 * generator.standard_normal(n)


def _unit(d: int, i: int) -> np.ndarray:
    basis = np.zeros((d, 1))
    basis[i, 0] = 1.0
    return basis


def test_cca_identical_inputs():
    """Tests rho is close to 1 when both samples coincide"""
    xs = seeding.rng(50).uniform(-1.0, 1.0, 30)
    result = kmethods.kernel_cca(xs, xs, GAUSS, GAUSS, 1e-6)

    assert result.rho >= 0.99
    assert result.rho <= 1.0
    assert result.kappa == 1e-6
    assert result.a.shape == (30,)
    assert result.b.shape == (30,)


@pytest.mark.parametrize("n, kappa", [(10, 0.1), (25, 0.01), (50, 0.05)])
def test_cca_matches_generalized_eigenproblem(n: int, kappa: float):
    """Tests rho against the largest eigenvalue of the dense block problem"""
    xs, ys = _dependent_pair(n, n)
    k1, k2 = center_gram(GAUSS.gram(xs)), center_gram(GAUSS.gram(ys))
    r1 = k1 + 0.5 * n * kappa * np.eye(n)
    r2 = k2 + 0.5 * n * kappa * np.eye(n)
    zero = np.zeros((n, n))
    lhs = np.block([[zero, k1 @ k2], [k2 @ k1, zero]])
    rhs = np.block([[r1 @ r1, zero], [zero, r2 @ r2]])
    expected = eigh(lhs, rhs, eigvals_only=True)[-1]

    result = kmethods.kernel_cca(xs, ys, GAUSS, GAUSS, kappa)

    assert result.rho_unclipped == pytest.approx(expected, abs=1e-6)
    # the returned directions attain the correlation
    a, b = result.a, result.b
    correlation = (a @ k1 @ k2 @ b) / np.sqrt((a @ r1 @ r1 @ a) * (b @ r2 @ r2 @ b))
    assert correlation == pytest.approx(result.rho_unclipped, abs=1e-6)


def test_cca_symmetry_and_regularization():
    """Tests rho is invariant to swapping the samples and nonincreasing in kappa"""
    xs, ys = _dependent_pair(40, 51)
    kernel_y = GaussianKernel(0.5)

    forward = kmethods.kernel_cca(xs, ys, GAUSS, kernel_y, 0.01)
    backward = kmethods.kernel_cca(ys, xs, kernel_y, GAUSS, 0.01)
    assert forward.rho == pytest.approx(backward.rho, abs=1e-8)

    rhos = [kmethods.kernel_cca(xs, ys, GAUSS, kernel_y, kappa).rho for kappa in (1e-4, 1e-3, 1e-2, 1e-1, 1.0)]
    assert all(later <= earlier + 1e-12 for earlier, later in zip(rhos, rhos[1:]))


@pytest.mark.parametrize(
    "x1s, x2s, kappa",
    [
        ([0.0, 1.0, 2.0], [0.0, 1.0], 0.1),
        ([0.0], [0.0], 0.1),
        ([0.0, 1.0, 2.0], [0.0, 1.0, 2.0], 0.0),
        ([0.0, 1.0, 2.0], [0.0, 1.0, 2.0], -1.0),
        ([0.0, 1.0, np.inf], [0.0, 1.0, 2.0], 0.1),
    ],
)
def test_cca_errors(x1s, x2s, kappa: float):
    """Tests invalid samples and regularization"""
    with pytest.raises(ValueError):
        kmethods.kernel_cca(x1s, x2s, LinearKernel(), LinearKernel(), kappa)


def test_independence_test_identical_inputs():
    """Tests identical samples get the smallest attainable p-value"""
    xs = seeding.rng(52).uniform(-1.0, 1.0, 10)
    result = kmethods.independence_test(xs, xs, GAUSS, GAUSS, 0.1, 23, 7)

    assert result.p_value == pytest.approx(1.0 / 24.0)
    assert result.permutations == 23
    assert len(result.null_samples) == 23
    assert np.all(result.null_samples < result.rho)


def test_independence_test_skips_identity_shuffles():
    """Tests small samples, where shuffles often draw the identity, still get p = 1/(B+1) for identical inputs"""
    xs = seeding.rng(65).uniform(-1.0, 1.0, 6)
    for seed in range(200):
        result = kmethods.independence_test(xs, xs, GAUSS, GAUSS, 0.1, 19, seed)
        assert result.p_value == pytest.approx(1.0 / 20.0), seed


def test_independence_test_properties():
    """Tests p-value range, determinism and power on a strong dependence"""
    generator = seeding.rng(53)
    xs, noise = generator.uniform(-1.0, 1.0, 60), generator.uniform(-1.0, 1.0, 60)

    first = kmethods.independence_test(xs, noise, GAUSS, GAUSS, 0.05, 49, 11)
    second = kmethods.independence_test(xs, noise, GAUSS, GAUSS, 0.05, 49, 11)
    assert first.p_value == second.p_value
    assert np.array_equal(first.null_samples, second.null_samples)
    assert 1.0 / 50.0 <= first.p_value <= 1.0
    assert first.rho == pytest.approx(kmethods.kernel_cca(xs, noise, GAUSS, GAUSS, 0.05).rho, abs=1e-10)

    dependent = kmethods.independence_test(xs, xs**2, GAUSS, GAUSS, 0.05, 49, 11)
    assert dependent.p_value <= 0.05


@pytest.mark.parametrize("permutations, kappa", [(18, 0.1), (0, 0.1), (19, 0.0)])
def test_independence_test_errors(permutations: int, kappa: float):
    """Tests too few permutations and invalid regularization"""
    xs = np.linspace(0.0, 1.0, 5)
    with pytest.raises(ValueError):
        kmethods.independence_test(xs, xs, GAUSS, GAUSS, kappa, permutations, 0)


def test_kdr_objective_invariance():
    """Tests the objective depends on the span of B only"""
    xs, ys = _sdr_data(40, 3, 54)
    basis = ortho_group.rvs(3, random_state=seeding.rng(55))[:, :2]
    rotation = ortho_group.rvs(2, random_state=seeding.rng(56))

    assert kmethods.kdr_objective(basis @ rotation, xs, ys, GAUSS, GAUSS) == pytest.approx(
        kmethods.kdr_objective(basis, xs, ys, GAUSS, GAUSS), rel=1e-9
    )

    full = ortho_group.rvs(3, random_state=seeding.rng(57))
    assert kmethods.kdr_objective(full, xs, ys, GAUSS, GAUSS) == pytest.approx(
        kmethods.kdr_objective(np.eye(3), xs, ys, GAUSS, GAUSS), rel=1e-9
    )


def test_kdr_objective_prefers_the_informative_direction():
    """Tests the response direction scores below an irrelevant one"""
    xs, ys = _sdr_data(60, 2, 58)
    informative = kmethods.kdr_objective(_unit(2, 0), xs, ys, GAUSS, GAUSS)
    irrelevant = kmethods.kdr_objective(_unit(2, 1), xs, ys, GAUSS, GAUSS)

    assert informative < irrelevant


@pytest.mark.parametrize(
    "B, epsilon",
    [
        (np.array([[1.0], [1.0]]), 1e-3),
        (np.array([[2.0], [0.0]]), 1e-3),
        (np.ones((3, 1)) / np.sqrt(3.0), 1e-3),
        (np.array([[1.0], [0.0]]), 0.0),
    ],
)
def test_kdr_objective_errors(B: np.ndarray, epsilon: float):
    """Tests non-orthonormal or misshaped bases and invalid regularization"""
    xs, ys = _sdr_data(10, 2, 59)
    with pytest.raises(ValueError):
        kmethods.kdr_objective(B, xs, ys, GAUSS, GAUSS, epsilon)


def test_kdr_gradient():
    """Tests the 3- and 5-point stencils agree and match a directional difference"""
    xs, ys = _sdr_data(30, 3, 60)
    basis = ortho_group.rvs(3, random_state=seeding.rng(61))[:, :1]

    three = kmethods.kdr_gradient(basis, xs, ys, GAUSS, GAUSS, stencil=3)
    five = kmethods.kdr_gradient(basis, xs, ys, GAUSS, GAUSS, stencil=5)
    assert three.shape == (3, 1)
    assert np.allclose(three, five, rtol=1e-4, atol=1e-6 * np.max(np.abs(five)))

    with pytest.raises(ValueError):
        kmethods.kdr_gradient(basis, xs, ys, GAUSS, GAUSS, stencil=4)
    with pytest.raises(ValueError):
        kmethods.kdr_gradient(2.0 * basis, xs, ys, GAUSS, GAUSS)


def test_estimate_sdr_full_dimension():
    """Tests m = d returns the identity without restarts"""
    xs, ys = _sdr_data(20, 2, 62)
    result = kmethods.estimate_sdr(xs, ys, 2, GAUSS, GAUSS)

    assert np.array_equal(result.B, np.eye(2))
    assert result.restarts_used == 0
    assert result.objective == pytest.approx(kmethods.kdr_objective(np.eye(2), xs, ys, GAUSS, GAUSS))


def test_estimate_sdr_recovers_the_response_direction():
    """Tests recovery of span(e1) from y = x1 + noise"""
    xs, ys = _sdr_data(60, 3, 63)
    result = kmethods.estimate_sdr(xs, ys, 1, GAUSS, GAUSS, restarts=2, seed=1, max_iter=40)

    assert result.B.shape == (3, 1)
    assert np.allclose(result.B.T @ result.B, np.eye(1), atol=1e-8)
    assert result.restarts_used == 2
    assert result.objective == pytest.approx(kmethods.kdr_objective(result.B, xs, ys, GAUSS, GAUSS))
    assert kmethods.principal_angle(result.B, _unit(3, 0)) <= 20.0


def test_estimate_sdr_restarts():
    """Tests determinism and that more restarts never do worse"""
    xs, ys = _sdr_data(30, 3, 64)
    one = kmethods.estimate_sdr(xs, ys, 1, GAUSS, GAUSS, restarts=1, seed=5, max_iter=10)
    again = kmethods.estimate_sdr(xs, ys, 1, GAUSS, GAUSS, restarts=1, seed=5, max_iter=10)
    three = kmethods.estimate_sdr(xs, ys, 1, GAUSS, GAUSS, restarts=3, seed=5, max_iter=10)

    assert np.array_equal(one.B, again.B)
    assert three.objective <= one.objective


@pytest.mark.parametrize(
    "xs, m, restarts",
    [
        (np.zeros((10, 2)) + np.arange(10)[:, np.newaxis], 3, 1),
        (np.zeros((10, 2)) + np.arange(10)[:, np.newaxis], 0, 1),
        (np.zeros((10, 2)) + np.arange(10)[:, np.newaxis], 1, 0),
        (np.ones((10, 2)), 1, 1),
        (np.arange(2.0).reshape(1, 2), 1, 1),
    ],
)
def test_estimate_sdr_errors(xs: np.ndarray, m: int, restarts: int):
    """Tests invalid target dimensions, restarts and degenerate predictors"""
    with pytest.raises(ValueError):
        kmethods.estimate_sdr(xs, np.arange(len(xs), dtype=float), m, GAUSS, GAUSS, restarts=restarts)


@pytest.mark.parametrize(
    "B1, B2, expected",
    [
        (_unit(2, 0), _unit(2, 1), 90.0),
        (_unit(2, 0), -3.0 * _unit(2, 0), 0.0),
        (_unit(2, 0), np.array([[1.0], [1.0]]), 45.0),
        (np.eye(3)[:, :2], np.eye(3)[:, [1, 0]], 0.0),
    ],
)
def test_principal_angle(B1: np.ndarray, B2: np.ndarray, expected: float):
    """Tests principal angles in degrees"""
    assert kmethods.principal_angle(B1, B2) == pytest.approx(expected, abs=1e-6)
