# Stationary stadium solutions, circle fits, foliation, disk fronts and fattening

import numpy as np
import pytest

from curveflow.errors import DegenerateFitError
from curveflow.geometry_checks import (
    BOUNDARY_LAYER,
    UNIT_STADIUM,
    FatteningReport,
    LevelCurve,
    admitted_nodes,
    circle_fit,
    disk_field,
    explicit_field,
    explicit_solution,
    extract_level_curves,
    fattening_probe,
    foliation_check,
    hausdorff,
    indicator_evolution,
    level_circle_fits,
    residual_on_U,
    stationarity_check,
)
from curveflow.levelset_2d import Grid2D


def test_explicit_solution_values():
    assert float(explicit_solution(1.5, 0.0)) == pytest.approx(-0.5)
    assert float(explicit_solution(0.6, 0.8)) == pytest.approx(0.0, abs=1e-12)
    assert float(explicit_solution(-0.5, 0.3)) == 0.0
    assert float(explicit_solution(1.5, 0.0, lambda s: s ** 3)) == pytest.approx(-0.125)


def test_explicit_solution_rejects_bad_input():
    with pytest.raises(ValueError):
        explicit_solution(0.0, 1.5)
    with pytest.raises(ValueError):
        explicit_solution(1.5, 0.0, lambda s: s + 1.0)


def test_explicit_field_is_nan_outside():
    grid = Grid2D(L=2.5, dx=0.1)
    field = explicit_field(grid)
    X, Y = grid.mesh()
    inside = UNIT_STADIUM.contains(X, Y)
    assert np.all(np.isnan(field[~inside]))
    assert np.all(np.isfinite(field[inside]))
    assert np.all(field[inside] <= 0.0)


@pytest.mark.parametrize("dx", [0.05, 0.02])
@pytest.mark.parametrize("reparam", [None, lambda s: s ** 3])
def test_explicit_family_is_stationary(reparam, dx):
    grid = Grid2D(L=2.5, dx=dx)
    eps = grid.dx ** 2
    residual = residual_on_U(explicit_field(grid, reparam), grid, eps)
    assert residual <= 10 * (grid.dx + eps)


def test_admitted_nodes_keep_off_the_flat_sides():
    grid = Grid2D(L=2.5, dx=0.02)
    X, Y = grid.mesh()
    admitted = admitted_nodes(grid)
    assert np.all(np.abs(Y[admitted]) <= 1.0 - BOUNDARY_LAYER + 1e-12)
    assert np.all(np.abs(np.hypot(X[admitted], Y[admitted]) - 1.0) > 2 * grid.dx)
    wider = admitted_nodes(grid, boundary_margin=2 * grid.dx)
    assert np.count_nonzero(wider) > np.count_nonzero(admitted)


def test_linear_field_is_not_stationary():
    grid = Grid2D(L=2.5, dx=0.05)
    X, _ = grid.mesh()
    assert residual_on_U(X, grid) == pytest.approx(1.0, abs=1e-4)


def test_circle_fit_exact():
    theta = np.linspace(0.0, 2 * np.pi, 100, endpoint=False)
    fit = circle_fit(np.c_[np.cos(theta), np.sin(theta)])
    assert fit.center == pytest.approx((0.0, 0.0), abs=1e-12)
    assert fit.radius == pytest.approx(1.0)
    assert fit.rms < 1e-12

    half = np.linspace(0.0, np.pi, 50)
    arc = np.c_[2.0 + 0.5 * np.cos(half), -1.0 + 0.5 * np.sin(half)]
    fit = circle_fit(LevelCurve(level=0.0, points=arc, closed=False))
    assert fit.center == pytest.approx((2.0, -1.0), abs=1e-10)
    assert fit.radius == pytest.approx(0.5)


def test_circle_fit_is_rotation_invariant():
    rng = np.random.default_rng(3)
    theta = rng.uniform(0.0, np.pi, 40)
    points = np.c_[0.3 + 1.7 * np.cos(theta), 0.4 + 1.7 * np.sin(theta)]
    angle = 0.7
    rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    assert circle_fit(points @ rotation.T).radius == pytest.approx(circle_fit(points).radius)


def test_circle_fit_degenerate():
    t = np.linspace(0.0, 1.0, 20)
    with pytest.raises(DegenerateFitError):
        circle_fit(np.c_[t, 2 * t])
    with pytest.raises(DegenerateFitError):
        circle_fit(np.c_[np.cos(t[:5]), np.sin(t[:5])])
    with pytest.raises(ValueError):
        circle_fit(np.zeros((10, 3)))


def test_disk_contour():
    grid = Grid2D(L=2.0, dx=0.05)
    X, Y = grid.mesh()
    curves = extract_level_curves(disk_field(1.0)(X, Y), grid, 0.0)
    assert len(curves) == 1
    curve = curves[0]
    assert curve.closed
    assert curve.max_gap <= 2 * grid.dx
    assert circle_fit(curve).radius == pytest.approx(1.0, abs=0.01)


def test_hausdorff_is_symmetric():
    a = np.array([[0.0, 0.0], [1.0, 0.0]])
    b = np.array([[0.0, 0.5]])
    assert hausdorff(a, b) == hausdorff(b, a) == pytest.approx(np.hypot(1.0, 0.5))


def test_level_curves_are_unit_circles():
    grid = Grid2D(L=2.5, dx=0.02)
    field = explicit_field(grid)
    X, Y = grid.mesh()
    mask = UNIT_STADIUM.contains(X, Y)
    levels = (-0.7, -0.5, -0.3)
    fits = level_circle_fits(field, grid, levels)
    assert sorted(fits) == sorted(levels)
    for level in levels:
        assert fits[level]
        longest = max(extract_level_curves(field, grid, level, mask=mask), key=len)
        fit = circle_fit(longest)
        assert fit.radius == pytest.approx(1.0, abs=0.05)
        # the level -s curve is centered at (s, 0)
        assert fit.center[0] == pytest.approx(-level, abs=0.05)
        assert fit.center[1] == pytest.approx(0.0, abs=0.05)


@pytest.fixture(scope="module")
def foliation_grid():
    return Grid2D(L=2.5, dx=0.04)


def test_foliation_of_the_explicit_family(foliation_grid):
    grid = foliation_grid
    v = explicit_field(grid)
    same = foliation_check(v, v, grid)
    assert same.ok
    assert same.max_distance <= 2 * grid.dx
    cubed = foliation_check(explicit_field(grid, lambda s: s ** 3), v, grid)
    assert cubed.ok


def test_tilted_field_is_not_foliated(foliation_grid):
    grid = foliation_grid
    v = explicit_field(grid)
    _, Y = grid.mesh()
    report = foliation_check(v + 0.3 * Y, v, grid)
    assert not report.ok


def test_unit_disk_is_stationary():
    report = stationarity_check(1.0, T=1.0, dx=0.1)
    assert report.hausdorff <= 0.3
    assert report.ode_radius == pytest.approx(1.0, abs=1e-8)


def test_disks_grow_and_shrink():
    assert stationarity_check(2.0, T=1.0, dx=0.1).motion == 1
    small = stationarity_check(0.5, T=0.5, dx=0.05)
    assert small.motion == -1
    assert small.ode_radius == 0.0


def test_indicator_evolution():
    grid = Grid2D(L=3.0, dx=0.05)

    def disk(radius):
        return lambda x1, x2: np.hypot(x1, x2) < radius

    big = indicator_evolution(disk(2.0), 0.3, grid)
    small = indicator_evolution(disk(0.5), 0.3, grid)
    unit = indicator_evolution(disk(1.0), 0.3, grid)
    assert big.areaT > big.area0
    assert small.areaT < small.area0
    assert abs(unit.areaT - unit.area0) < abs(big.areaT - big.area0)


def test_tangent_disks_fatten_more():
    tangent = fattening_probe(0.0, T=0.2, dx=0.04)
    apart = fattening_probe(0.5, T=0.2, dx=0.04)
    assert tangent.factor > apart.factor
    with pytest.raises(ValueError):
        fattening_probe(-0.1)


def test_fattening_report_arithmetic():
    report = FatteningReport(separation=0.0, delta=0.1, window=0.04, area0=0.5, areaT=1.5)
    assert report.factor == pytest.approx(3.0)


def test_fattening_band_follows_the_gap():
    report = fattening_probe(0.5, T=0.0, dx=0.04)
    assert report.window == pytest.approx(0.08)
    assert report.factor == 1.0
    with pytest.raises(ValueError):
        fattening_probe(0.52, T=0.1, dx=0.04, window=0.01)


@pytest.mark.slow
def test_fattening_contract():
    tangent = fattening_probe(0.0, T=0.2, dx=0.02)
    apart = fattening_probe(0.5, T=0.2, dx=0.02)
    assert tangent.factor > 1.5
    assert apart.factor <= 1.2


if __name__ == "__main__":
    test_level_curves_are_unit_circles()
    test_tangent_disks_fatten_more()
