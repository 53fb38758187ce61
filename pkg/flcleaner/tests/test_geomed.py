import itertools

import numpy as np
import pytest

from flcleaner.services.geomed import geometric_median, geometric_median_objective
from flcleaner.services.oracles import check_geomed_instance, grid_geometric_median, run_geomed_oracle
from flcleaner.utils.exceptions import ShapeMismatchException


def test_single_point_is_its_own_median():
    result = geometric_median([[3.0, -1.0, 2.0]])
    assert result.median.tolist() == [3.0, -1.0, 2.0]
    assert result.converged


def test_majority_point_wins_on_the_line():
    result = geometric_median([[0.0], [0.0], [10.0]])
    assert result.converged
    assert abs(result.median[0]) < 1e-5


def test_equilateral_triangle_median_is_centroid():
    h = np.sqrt(3) / 2
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, h]])
    result = geometric_median(points)
    assert np.allclose(result.median, [0.5, h / 3], atol=1e-6)


def test_square_corners_median_is_center():
    points = np.array([[0, 0], [0, 2], [2, 0], [2, 2]], dtype=float)
    assert np.allclose(geometric_median(points).median, [1.0, 1.0], atol=1e-9)


def test_objective_trace_never_increases(rng):
    points = rng.normal(size=(50, 5))
    trace = np.asarray(geometric_median(points).objective_trace)
    assert np.all(np.diff(trace) <= 1e-12)


def test_median_moves_with_translation(rng):
    points = rng.random((9, 3))
    shift = np.array([5.0, -2.0, 0.5])
    base = geometric_median(points, tol=1e-10, max_iters=2000).median
    moved = geometric_median(points + shift, tol=1e-10, max_iters=2000).median
    assert np.allclose(moved, base + shift, atol=1e-6)


def test_median_ignores_point_order(rng):
    points = rng.random((7, 4))
    a = geometric_median(points, tol=1e-10, max_iters=2000).median
    b = geometric_median(points[::-1], tol=1e-10, max_iters=2000).median
    assert np.allclose(a, b, atol=1e-8)


def test_median_beats_the_mean(rng):
    points = np.vstack([rng.normal(size=(10, 2)), [[100.0, 100.0]]])
    median = geometric_median(points).median
    mean = points.mean(axis=0)
    assert geometric_median_objective(points, median) < geometric_median_objective(points, mean)
    assert np.linalg.norm(median) < 2.0


def test_iteration_cap_reports_non_convergence():
    result = geometric_median([[0.0], [0.0], [10.0]], max_iters=2)
    assert not result.converged
    assert result.iterations == 2


def test_rejects_non_matrix_input():
    with pytest.raises(ShapeMismatchException):
        geometric_median(np.zeros(3))


def test_grid_search_finds_square_center():
    point, value = grid_geometric_median(np.array([[0, 0], [0, 0.2], [0.2, 0], [0.2, 0.2]]))
    assert np.allclose(point, [0.1, 0.1], atol=1e-3)
    assert value == pytest.approx(np.sqrt(0.02), abs=1e-6)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_weiszfeld_agrees_with_grid_search(seed):
    points = np.random.default_rng(seed).random((5, 2))
    assert check_geomed_instance(points) == []


def test_geomed_oracle_summary():
    summary = run_geomed_oracle(instances=50, seed=7)
    assert summary == {"oracle": "geomed", "instances": 50, "failures": 0}


def barycentric(point, triangle):
    a, b, c = triangle
    l1, l2 = np.linalg.solve(np.column_stack([b - a, c - a]), point - a)
    return np.array([1.0 - l1 - l2, l1, l2])


def inside_some_triangle(point, points):
    for combo in itertools.combinations(range(len(points)), 3):
        triangle = points[list(combo)]
        if abs(np.linalg.det(np.column_stack([triangle[1] - triangle[0], triangle[2] - triangle[0]]))) < 1e-12:
            continue
        if barycentric(point, triangle).min() >= -1e-9:
            return True
    return False


@pytest.mark.parametrize("seed", range(10))
def test_median_lies_in_triangle_of_its_points(seed):
    points = np.random.default_rng(seed).normal(size=(3, 2))
    median = geometric_median(points).median
    assert barycentric(median, points).min() >= -1e-9


@pytest.mark.parametrize("seed", range(10))
def test_median_lies_in_convex_hull(seed):
    rng = np.random.default_rng(100 + seed)
    points = rng.uniform(-5.0, 5.0, (int(rng.integers(4, 7)), 2))
    assert inside_some_triangle(geometric_median(points).median, points)
