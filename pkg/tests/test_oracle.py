import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simec.errors import ConfigError, NumericalError
from simec.nn import forward, network_jacobian
from simec.oracle import (
    GridSpec,
    coverage_fraction,
    covered_area,
    directed_hausdorff,
    distance_to_segments,
    fd_jacobian,
    grid_preimage,
    hausdorff,
    marching_contour,
)

SQUARE = ((-1.0, 1.0), (-1.0, 1.0))


def radius2(p):
    return p[:, 0] ** 2 + p[:, 1] ** 2


def test_fd_linear_and_quadratic(rng):
    a = rng.normal(size=(3, 2))
    np.testing.assert_allclose(fd_jacobian(lambda x: a @ x, [0.4, -0.2]), a, atol=1e-10)
    assert fd_jacobian(lambda x: x ** 2, [3.0])[0, 0] == pytest.approx(6.0, abs=1e-9)


def test_fd_agrees_with_network_jacobian(circle_model):
    p = np.array([0.1, -0.6])
    fd = fd_jacobian(lambda x: forward(circle_model, x), p)
    np.testing.assert_allclose(fd, network_jacobian(circle_model, p), rtol=1e-6)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_fd_errors():
    with pytest.raises(ConfigError):
        fd_jacobian(lambda x: x, [1.0], h=0.0)
    with pytest.raises(NumericalError):
        fd_jacobian(lambda x: np.log(x), [0.0])


def test_grid_spec_validation():
    with pytest.raises(ConfigError):
        GridSpec(((1.0, 0.0), (0.0, 1.0)))
    with pytest.raises(ConfigError):
        GridSpec(SQUARE, 1)
    g = GridSpec(SQUARE, 512)
    assert g.cell_diagonal == pytest.approx(math.sqrt(2) * 2 / 511)
    assert len(g.nodes()) == 512 * 512


def test_circle_contour():
    grid = GridSpec(SQUARE, 512)
    c = marching_contour(radius2, grid, 0.125)
    assert len(c) == 1
    line = c.polylines[0]
    np.testing.assert_array_equal(line[0], line[-1])
    r = np.hypot(line[:, 0], line[:, 1])
    assert np.max(np.abs(r - math.sqrt(0.125))) <= 2 * 2 / 512
    theta = np.linspace(0, 2 * math.pi, 4000)
    circle = math.sqrt(0.125) * np.column_stack([np.cos(theta), np.sin(theta)])
    assert hausdorff(c.points(), circle) <= 2 * grid.cell_diagonal


def test_contour_out_of_range_is_empty():
    c = marching_contour(radius2, GridSpec(SQUARE, 64), -1.0)
    assert len(c) == 0 and c.points().shape == (0, 2) and c.segments().shape == (0, 2, 2)


def test_sine_contour():
    box = ((-math.pi, math.pi), (-1.0, 1.0))
    c = marching_contour(lambda p: p[:, 1] - np.sin(p[:, 0]), GridSpec(box, 512), 0.0)
    pts = c.points()
    assert np.max(np.abs(pts[:, 1] - np.sin(pts[:, 0]))) <= 1e-4
    assert pts[:, 0].min() == pytest.approx(-math.pi) and pts[:, 0].max() == pytest.approx(math.pi)


def test_saddle_cells_resolved():
    # level set of xy = 0.01 has two branches; the center sample separates them
    c = marching_contour(lambda p: p[:, 0] * p[:, 1], GridSpec(SQUARE, 65), 0.01)
    assert len(c) == 2
    for line in c.polylines:
        assert np.all(np.sign(line[:, 0]) == np.sign(line[0, 0]))


def test_contour_vertices_near_level(circle_model):
    grid = GridSpec(SQUARE, 256)
    c = marching_contour(lambda p: forward(circle_model, p)[:, 0], grid, 0.16)
    vals = forward(circle_model, c.points())[:, 0]
    assert np.max(np.abs(vals - 0.16)) <= 1e-4


def test_grid_preimage_strip():
    grid = GridSpec(((0.0, 1.0), (0.0, 1.0)), 101)
    pts = grid_preimage(lambda p: p[:, 0] + 2 * p[:, 1], grid, (1.4, 1.6))
    s = pts[:, 0] + 2 * pts[:, 1]
    assert len(pts) > 0 and np.all((s >= 1.4) & (s <= 1.6))
    with pytest.raises(ConfigError):
        grid_preimage(radius2, grid, (0.5, 0.4))


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0, 1), b=st.floats(0, 1), c=st.floats(0, 0.5), d=st.floats(0, 0.5))
def test_grid_preimage_monotone(a, b, c, d):
    lo, hi = min(a, b), max(a, b)
    grid = GridSpec(SQUARE, 40)
    inner = {tuple(p) for p in grid_preimage(radius2, grid, (lo, hi))}
    outer = {tuple(p) for p in grid_preimage(radius2, grid, (lo - c, hi + d))}
    assert inner <= outer


def test_hausdorff_examples():
    a = np.array([[0.0, 0.0], [1.0, 1.0]])
    assert hausdorff(a, a) == 0.0
    assert hausdorff([[0.0, 0.0]], [[3.0, 4.0]]) == 5.0
    assert directed_hausdorff([[0.0, 0.0]], [[0.0, 0.0], [9.0, 0.0]]) == 0.0
    with pytest.raises(ConfigError):
        hausdorff(np.empty((0, 2)), a)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_hausdorff_symmetric_and_triangle(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.normal(size=(int(rng.integers(1, 20)), 2)) for _ in range(3))
    assert hausdorff(a, b) == hausdorff(b, a)
    assert hausdorff(a, c) <= hausdorff(a, b) + hausdorff(b, c) + 1e-12


def test_distance_to_segments():
    segs = np.array([[[0.0, 0.0], [1.0, 0.0]], [[5.0, 5.0], [5.0, 5.0]]])
    d = distance_to_segments([[0.5, 2.0], [-3.0, 4.0], [5.0, 6.0]], segs)
    np.testing.assert_allclose(d, [2.0, 5.0, 1.0])


def test_coverage_and_area():
    grid = GridSpec(((0.0, 1.0), (0.0, 1.0)), 11)
    nodes = grid.nodes()
    assert coverage_fraction(nodes, nodes, 1e-9) == 1.0
    assert coverage_fraction(nodes, [[0.0, 0.0]], 0.05) == pytest.approx(1 / 121)
    assert covered_area(grid, nodes, 1e-9) == pytest.approx(121 * 0.01)
