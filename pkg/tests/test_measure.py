"""Source measures, quadrature grids, and indicator integration."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiftpart import SourceMeasure, build_grid, integrate_indicator
from shiftpart.errors import InvalidArgumentError

from conftest import FLAT_TRIANGLE, UNIT_BOX, in_triangle


# ---------------------------------------------------------------------------
# construction and frozen examples


def test_two_by_two_grid_centers_and_weights(unit_measure):
    grid = build_grid(unit_measure, 2)
    assert grid.n_cells == 4
    np.testing.assert_array_equal(grid.weights_full(), [0.25] * 4)
    assert {tuple(c) for c in grid.centers()} == {
        (0.25, 0.25),
        (0.75, 0.25),
        (0.25, 0.75),
        (0.75, 0.75),
    }


def test_large_uniform_grid_weights(unit_measure):
    grid = build_grid(unit_measure, 1024)
    w = grid.weights_full()
    assert w.shape == (1024 * 1024,)
    np.testing.assert_array_equal(w, np.full(w.shape, 1.0 / 1048576))


def test_density_grid_weights_proportional_to_density():
    measure = SourceMeasure(
        box=UNIT_BOX, density=np.array([[1.0, 3.0], [1.0, 3.0]])
    )
    grid = build_grid(measure, 2)
    # centers in C order (second coordinate fastest):
    # (1/4,1/4),(1/4,3/4),(3/4,1/4),(3/4,3/4)
    np.testing.assert_allclose(
        grid.weights_full(), [1 / 8, 3 / 8, 1 / 8, 3 / 8], rtol=1e-15
    )


def test_total_mass_is_density_integral():
    assert SourceMeasure.uniform(((0.0, 2.0), (0.0, 1.0))).total_mass == 2.0
    measure = SourceMeasure(
        box=((0.0, 2.0), (0.0, 1.0)), density=np.array([[1.0, 3.0], [1.0, 3.0]])
    )
    assert measure.total_mass == 4.0  # mean density 2 times volume 2


def test_density_file_round_trip(tmp_path):
    path = tmp_path / "density.txt"
    path.write_text("2 2 3\n0 1 0 2\n1 2 3 4 5 6\n")
    measure = SourceMeasure.from_density_file(path)
    assert measure.box == ((0.0, 1.0), (0.0, 2.0))
    np.testing.assert_array_equal(
        measure.density, [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]
    )
    grid = build_grid(measure, (2, 3))
    w = grid.weights_full()
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(w, np.arange(1.0, 7.0) / 21.0, rtol=1e-12)


def test_rejects_degenerate_box():
    with pytest.raises(InvalidArgumentError):
        SourceMeasure.uniform(((0.0, 0.0), (0.0, 1.0)))


def test_rejects_negative_density():
    with pytest.raises(InvalidArgumentError):
        SourceMeasure(box=UNIT_BOX, density=np.array([[1.0, -0.5], [1.0, 1.0]]))


def test_rejects_resolution_below_two(unit_measure):
    with pytest.raises(InvalidArgumentError):
        build_grid(unit_measure, 1)
    with pytest.raises(InvalidArgumentError):
        build_grid(unit_measure, (64, 1))


# ---------------------------------------------------------------------------
# integrate_indicator frozen examples


def test_always_true_integrates_to_one(grid256):
    assert integrate_indicator(grid256, lambda pts: np.ones(len(pts), bool)) == 1.0


def test_half_space_is_exact_at_even_resolution(unit_measure):
    grid = build_grid(unit_measure, 1024)
    # no cell center lies on the line x1 = 1/2
    assert integrate_indicator(grid, lambda pts: pts[:, 0] < 0.5) == 0.5


def test_flat_triangle_area(unit_measure):
    grid = build_grid(unit_measure, 2048)
    est = integrate_indicator(grid, lambda pts: in_triangle(pts, FLAT_TRIANGLE))
    assert est == pytest.approx(1 / 16, abs=2e-3)


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(0, 1))
def test_complementary_predicates_sum_to_one(threshold, axis):
    measure = SourceMeasure.uniform(UNIT_BOX)
    grid = build_grid(measure, 64)
    inside = integrate_indicator(grid, lambda pts: pts[:, axis] < threshold)
    outside = integrate_indicator(grid, lambda pts: ~(pts[:, axis] < threshold))
    assert inside + outside == 1.0


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.45), st.floats(0.0, 0.5))
def test_indicator_monotone_under_set_inclusion(radius, extra):
    measure = SourceMeasure.uniform(UNIT_BOX)
    grid = build_grid(measure, 64)
    center = np.array([0.5, 0.5])

    def ball(r):
        return lambda pts: np.linalg.norm(pts - center, axis=1) <= r

    small = integrate_indicator(grid, ball(radius))
    large = integrate_indicator(grid, ball(radius + extra))
    assert small <= large


@pytest.mark.parametrize("resolution", [256, 512, 1024])
def test_half_space_refinement_error_is_order_one_over_r(unit_measure, resolution):
    grid = build_grid(unit_measure, resolution)
    est = integrate_indicator(grid, lambda pts: pts[:, 0] < 1 / 3)
    assert abs(est - 1 / 3) <= 1.0 / resolution


@settings(max_examples=30, deadline=None)
@given(
    st.integers(2, 5),
    st.integers(2, 5),
    st.integers(0, 10_000),
)
def test_random_density_grids_normalize(m1, m2, seed):
    rng = np.random.default_rng(seed)
    density = rng.random((m1, m2)) + 0.01
    measure = SourceMeasure(box=UNIT_BOX, density=density)
    grid = build_grid(measure, (4 * m1, 4 * m2))
    w = grid.weights_full()
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) <= 1e-10
