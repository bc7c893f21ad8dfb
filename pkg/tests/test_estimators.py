import numpy as np
import pytest

from mlmoments import (DomainError, Estimator, MultiIndex, SourceMeasure,
                       TransportSolution)
from mlmoments.estimators import (TrimDomain, cell_weights, estimate_lmoments,
                                  estimate_rosenblatt,
                                  hermite_lmoment_from_transport,
                                  hermite_lmoment_matrix,
                                  lmoment_from_transport, lmoment_matrix,
                                  lmoment_ratio, trimmed_lmoment)
from mlmoments.rosenblatt import (lmoment_rosenblatt_direct,
                                  lmoment_rosenblatt_unbiased)
from mlmoments.transport import SolverConfig, solve

RNG = np.random.default_rng(seed=271828)

CORNERS = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])


def fixed_solution(points, h, source='uniform'):
    """Transport with a given potential, bypassing the solver."""
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    return TransportSolution(
        h_star=np.asarray(h, dtype=float), cell_mass=np.full(n, 1/n), points=points,
        source=SourceMeasure(source, d), niter=0, grad_norm=0.0, step_size=1.0,
        tolerance=1.0, mc_samples=1, seed=0, success=True, status='converged',
        empty_cells=np.zeros(0, dtype=np.int64))


def exact_univariate_solution(x):
    """Uniform-source transport onto sorted univariate points with the exact
    potential, whose cell boundaries are the levels i/n."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    h = np.zeros(n)
    for i in range(n - 1):
        h[i+1] = h[i] - (i + 1)/n*(x[i+1] - x[i])
    return fixed_solution(x[:, None], h - h.mean())


@pytest.fixture
def quadrants():
    "Uniform-source transport sending each quadrant of the square to a corner"
    return solve(CORNERS, 'uniform', SolverConfig(seed=1))


@pytest.fixture
def gaussian_quadrants():
    "Gaussian-source transport sending each quadrant of the plane to a corner"
    return solve(CORNERS, 'gaussian', SolverConfig(seed=1))


@pytest.fixture
def grid():
    "Identity-like transport onto the centers of a 20x20 grid of the square"
    t = (np.arange(20) + 0.5)/20
    points = np.array([[a, b] for a in t for b in t])
    return fixed_solution(points, -np.sum(points**2, axis=1)/2)


def test_cell_weights(quadrants):
    alphas = [MultiIndex((1, 1)), MultiIndex((2, 1))]
    weights = cell_weights(quadrants, alphas, 100000, 3)
    assert weights.shape == (2, 4)
    # the mean row holds mass frequencies
    assert np.sum(weights[0]) == pytest.approx(1.0)
    assert np.allclose(weights[0], 0.25, atol=0.01)
    # L_2(u_1) integrates to +1/8 on the right half and -1/8 on the left
    assert np.allclose(weights[1], [0.125, 0.125, -0.125, -0.125], atol=0.01)
    # dimension mismatch
    with pytest.raises(DomainError):
        _ = cell_weights(quadrants, [MultiIndex((2, 1, 1))], 100, 0)
    with pytest.raises(DomainError):
        _ = cell_weights(quadrants, alphas, 0, 0)


def test_mean_and_second_lmoment(quadrants):
    values = lmoment_from_transport(quadrants, [MultiIndex((1, 1)), MultiIndex((2, 1)),
                                                MultiIndex((1, 2)), MultiIndex((2, 2))],
                                    200000, seed=2)
    assert values.shape == (4, 2)
    assert np.allclose(values[0], CORNERS.mean(axis=0), atol=0.01)
    assert np.allclose(values[1], [0.5, 0.0], atol=0.01)
    assert np.allclose(values[2], [0.0, 0.5], atol=0.01)
    assert np.allclose(values[3], [0.0, 0.0], atol=0.01)
    # a single index gives a vector
    assert lmoment_from_transport(quadrants, (2, 1), 1000, seed=2).shape == (2,)


def test_lmoment_is_reproducible(quadrants):
    a = lmoment_from_transport(quadrants, (2, 1), 50000, seed=8)
    b = lmoment_from_transport(quadrants, (2, 1), 50000, seed=8)
    c = lmoment_from_transport(quadrants, (2, 1), 50000, seed=9)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_estimator_requires_matching_source(quadrants, gaussian_quadrants):
    with pytest.raises(DomainError):
        _ = lmoment_from_transport(gaussian_quadrants, (2, 1))
    with pytest.raises(DomainError):
        _ = hermite_lmoment_from_transport(quadrants, (2, 1))
    with pytest.raises(DomainError):
        _ = trimmed_lmoment(gaussian_quadrants, (1, 1), (0.1, 0.1))


def test_hermite_lmoment(gaussian_quadrants):
    values = hermite_lmoment_from_transport(
        gaussian_quadrants, [MultiIndex((1, 1)), MultiIndex((2, 1))], 200000, seed=4)
    assert np.allclose(values[0], 0.0, atol=0.01)
    # int sign(y_1) y_1 dN = E|N|
    assert np.allclose(values[1], [np.sqrt(2/np.pi), 0.0], atol=0.01)
    matrix = hermite_lmoment_matrix(gaussian_quadrants, 2, 200000, seed=4)
    assert np.allclose(matrix, np.sqrt(2/np.pi)*np.eye(2), atol=0.01)


def test_hermite_two_points():
    # symmetric pair on the first axis: lambda = (x_1 - x_2)/sqrt(2 pi)
    sol = fixed_solution([[1.0, 0.0], [-1.0, 0.0]], [0.0, 0.0], 'gaussian')
    value = hermite_lmoment_from_transport(sol, (2, 1), 400000, seed=5)
    assert np.allclose(value, [2/np.sqrt(2*np.pi), 0.0], atol=0.01)


def test_lmoment_matrix(quadrants):
    matrix = lmoment_matrix(quadrants, 2, 200000, seed=6)
    assert matrix.shape == (2, 2)
    assert np.allclose(matrix, 0.5*np.eye(2), atol=0.01)
    with pytest.raises(DomainError):
        _ = lmoment_matrix(quadrants, 1)


def test_trim_domain():
    trim = TrimDomain((0.1, 0.25))
    assert trim.dim == 2
    assert trim.volume == pytest.approx(0.8*0.5)
    mask = trim.contains(np.array([[0.5, 0.5], [0.05, 0.5], [0.5, 0.8]]))
    assert mask.tolist() == [True, False, False]
    assert TrimDomain.parse('0.1,0.2').lower == (0.1, 0.2)
    # empty domain
    with pytest.raises(DomainError):
        _ = TrimDomain((0.5, 0.1))
    with pytest.raises(DomainError):
        _ = TrimDomain.parse('a,b')


def test_trimmed_without_trimming_matches_untrimmed(quadrants):
    alphas = [MultiIndex((1, 1)), MultiIndex((2, 1))]
    assert np.allclose(trimmed_lmoment(quadrants, alphas, (0.0, 0.0), 50000, seed=3),
                       lmoment_from_transport(quadrants, alphas, 50000, seed=3))


def test_trimmed_mean_of_identity_transport(grid):
    # int_D t_1 dt over D = [0.1, 0.9]^2
    value = trimmed_lmoment(grid, (1, 1), TrimDomain((0.1, 0.1)), 400000, seed=7)
    assert np.allclose(value, [0.32, 0.32], atol=0.005)
    with pytest.raises(DomainError):
        _ = trimmed_lmoment(grid, (1, 1), (0.1, 0.1, 0.1))


def test_trimmed_lmoment_is_robust_to_an_outlier():
    x = np.sort(RNG.standard_normal(50))
    y = x.copy()
    y[-1] = 100.0
    sol_x = exact_univariate_solution(x)
    sol_y = exact_univariate_solution(y)
    plain = abs(lmoment_from_transport(sol_y, (2,), 100000, 1)[0]
                - lmoment_from_transport(sol_x, (2,), 100000, 1)[0])
    trimmed = abs(trimmed_lmoment(sol_y, (2,), (0.1,), 100000, 1)[0]
                  - trimmed_lmoment(sol_x, (2,), (0.1,), 100000, 1)[0])
    assert trimmed < 0.1
    assert trimmed < plain


def test_translation_and_scale_equivariance(grid):
    m = np.array([3.0, -2.0])
    moved = fixed_solution(2.5*grid.points + m, 2.5*grid.h_star)
    alphas = [MultiIndex((1, 1)), MultiIndex((2, 1)), MultiIndex((1, 3))]
    base = lmoment_from_transport(grid, alphas, 100000, seed=1)
    values = lmoment_from_transport(moved, alphas, 100000, seed=1)
    assert np.allclose(values[0], 2.5*base[0] + m)
    # sum of the cell weights of L_alpha is a Monte-Carlo estimate of 0
    assert np.allclose(values[1:], 2.5*base[1:], atol=0.05)


def test_lmoment_ratio():
    assert lmoment_ratio([0.0, 0.0], [[0.0, 1.0], [1.0, 3.0]]).tolist() == [0.0, 0.0]
    # comonotone coordinates
    y = RNG.standard_normal(30)
    samples = np.column_stack([y, y])
    lam = lmoment_rosenblatt_unbiased(samples, 2)
    assert np.allclose(lmoment_ratio(lam, samples), [1.0, 1.0])
    # degenerate coordinate
    with pytest.raises(DomainError):
        _ = lmoment_ratio([0.1, 0.1], np.column_stack([y, np.ones(30)]))
    # mean index
    with pytest.raises(DomainError):
        _ = lmoment_ratio([0.1, 0.1], samples, alpha=MultiIndex((1, 1)))
    # wrong shape
    with pytest.raises(DomainError):
        _ = lmoment_ratio([0.1], samples)


def test_lmoment_ratio_bound_for_rosenblatt_estimates():
    laws = (lambda n: RNG.standard_normal((n, 2)),
            lambda n: RNG.standard_cauchy((n, 2)),
            lambda n: RNG.exponential(size=(n, 2))*[1.0, -3.0],
            lambda n: np.column_stack([RNG.random(n), RNG.random(n)**4]))
    for k in range(100):
        n = int(RNG.integers(5, 51))
        samples = laws[k % len(laws)](n)
        for r in (2, 3, 4):
            tau = lmoment_ratio(lmoment_rosenblatt_direct(samples, r), samples)
            assert np.all(np.abs(tau) <= 2.0 + 1e-12)


def test_estimate_lmoments(quadrants):
    alphas = [MultiIndex((1, 1)), MultiIndex((2, 1))]
    results = estimate_lmoments(quadrants, alphas, 20000, seed=1)
    assert [r.alpha for r in results] == alphas
    assert all(r.estimator is Estimator.MONOTONE_UNIFORM for r in results)
    assert results[1].to_record()['alpha'] == [2, 1]
    trimmed = estimate_lmoments(quadrants, alphas, 20000, seed=1, trim=TrimDomain((0.1, 0.1)))
    assert trimmed[0].estimator is Estimator.TRIMMED_MONOTONE
    assert trimmed[0].to_record()['trim'] == [0.1, 0.1]


def test_estimate_rosenblatt():
    samples = RNG.standard_normal((20, 2))
    results = estimate_rosenblatt(samples, [MultiIndex((1, 1)), MultiIndex((3, 1))])
    assert np.allclose(results[0].value, samples.mean(axis=0))
    assert np.allclose(results[1].value, lmoment_rosenblatt_direct(samples, 3))
    assert results[0].mc_samples is None
    unbiased = estimate_rosenblatt(samples, [MultiIndex((2, 1))], unbiased=True)
    assert unbiased[0].estimator is Estimator.ROSENBLATT_UNBIASED
    assert np.allclose(unbiased[0].value, lmoment_rosenblatt_unbiased(samples, 2))
    # index not of the form (r, 1, ..., 1)
    with pytest.raises(DomainError):
        _ = estimate_rosenblatt(samples, [MultiIndex((1, 2))])
    with pytest.raises(DomainError):
        _ = estimate_rosenblatt(samples, [MultiIndex((2, 1, 1))])


@pytest.mark.slow
def test_gaussian_lambda2_uniform_source():
    # diagonal scale: the transport is m + A Phi^-1(u), Lambda_2 = A/sqrt(pi)
    A = np.diag([1.0, 0.5])
    for seed in range(3):
        samples = np.random.default_rng(seed).standard_normal((100, 2)) @ A
        config = SolverConfig(mc_samples=20000, max_iterations=3000, seed=seed)
        sol = solve(samples, 'uniform', config)
        matrix = lmoment_matrix(sol, 2, 200000, seed)
        assert np.linalg.norm(matrix - A/np.sqrt(np.pi)) < 0.25


@pytest.mark.slow
def test_gaussian_lambda2_hermite():
    # the Gaussian-source transport of N(0, A^2) is x -> A x, Lambda_2^H = A
    A = np.array([[1.0, 0.8], [0.8, 1.0]])
    samples = np.random.default_rng(3).standard_normal((100, 2)) @ A
    sol = solve(samples, 'gaussian', SolverConfig(mc_samples=20000, max_iterations=3000, seed=3))
    matrix = hermite_lmoment_matrix(sol, 2, 200000, seed=3)
    assert np.linalg.norm(matrix - A) < 0.6


@pytest.mark.slow
def test_hermite_rotation_equivariance():
    samples = RNG.standard_normal((100, 2))*[1.0, 0.3]
    theta = 0.7
    P = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    config = SolverConfig(mc_samples=50000, max_iterations=3000, seed=4)
    base = hermite_lmoment_matrix(solve(samples, 'gaussian', config), 2, 200000, 4)
    rotated = hermite_lmoment_matrix(solve(samples @ P.T, 'gaussian', config), 2, 200000, 4)
    assert np.linalg.norm(rotated - P @ base @ P.T) < 0.2


SEEDS = range(20)


@pytest.mark.slow
def test_gaussian_lambda2_uniform_source_n500():
    A = np.diag([1.0, 0.5])
    errors = []
    for seed in SEEDS:
        samples = np.random.default_rng(seed).standard_normal((500, 2)) @ A
        sol = solve(samples, 'uniform', SolverConfig(max_iterations=3000, seed=seed))
        matrix = lmoment_matrix(sol, 2, 200000, seed)
        errors.append(np.linalg.norm(matrix - A/np.sqrt(np.pi)))
    assert np.median(errors) <= 0.1


@pytest.mark.slow
def test_gaussian_lambda2_hermite_n500():
    A = np.array([[1.0, 0.8], [0.8, 1.0]])
    errors = []
    for seed in SEEDS:
        samples = np.random.default_rng(seed).standard_normal((500, 2)) @ A
        sol = solve(samples, 'gaussian', SolverConfig(max_iterations=3000, seed=seed))
        matrix = hermite_lmoment_matrix(sol, 2, 200000, seed)
        errors.append(np.linalg.norm(matrix - A))
    assert np.median(errors) <= 0.1


@pytest.mark.slow
def test_hermite_rotation_equivariance_n500():
    theta = 0.7
    P = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    errors = []
    for seed in SEEDS:
        samples = np.random.default_rng(seed).standard_normal((500, 2))*[1.0, 0.3]
        config = SolverConfig(max_iterations=3000, seed=seed)
        base = hermite_lmoment_matrix(solve(samples, 'gaussian', config), 2, 200000, seed)
        rotated = hermite_lmoment_matrix(solve(samples @ P.T, 'gaussian', config),
                                         2, 200000, seed)
        errors.append(np.linalg.norm(rotated - P @ base @ P.T))
    assert np.median(errors) <= 0.1
