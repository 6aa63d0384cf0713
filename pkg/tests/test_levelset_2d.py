# Planar level-set solver: operator, time stepping, flatness and scaled limit

import types

import numpy as np
import pytest

from curveflow.errors import CFLError
from curveflow.levelset_2d import (
    Grid2D,
    LevelSetField2D,
    StadiumSpec,
    curvature_term,
    driving_term,
    evolve2d,
    flatness_on_U,
    gamma_membership,
    scaled_limit_check,
    spatial_operator,
)
from curveflow.radial_hj import RadialField, RadialGrid, evolve
from curveflow.source_model import tent


def test_grid():
    grid = Grid2D(L=1.0, dx=0.1)
    assert grid.size == 21
    assert grid.axis[0] == -1.0 and grid.axis[-1] == 1.0
    assert grid.cfl_bound() == pytest.approx(0.01 / 8)
    X, Y = grid.mesh()
    assert X[1, 0] > X[0, 0] and Y[0, 1] > Y[0, 0]
    with pytest.raises(ValueError):
        Grid2D(L=0.1, dx=0.1)


@pytest.mark.parametrize("k", [2.0, -3.0])
def test_linear_field(k):
    grid = Grid2D(L=1.0, dx=0.1)
    X, _ = grid.mesh()
    u = k * X
    np.testing.assert_allclose(driving_term(u, grid.dx)[1:-1, 1:-1], abs(k), rtol=1e-12)
    np.testing.assert_allclose(curvature_term(u, grid.dx, grid.dx), 0.0, atol=1e-9)
    assert np.all(driving_term(u, grid.dx)[0] == 0.0)


def test_constant_field():
    u = np.full((11, 11), 4.0)
    np.testing.assert_array_equal(spatial_operator(u, 0.1), 0.0)
    with pytest.raises(ValueError):
        spatial_operator(u, 0.1, epsilon=0.0)


def test_cone_curvature():
    grid = Grid2D(L=3.0, dx=0.02)
    X, Y = grid.mesh()
    radius = np.hypot(X, Y)
    u = -radius
    ring = (radius >= 1.5) & (radius <= 2.5)
    curvature = curvature_term(u, grid.dx, grid.dx)
    np.testing.assert_allclose(curvature[ring], -1.0 / radius[ring], atol=0.01)
    np.testing.assert_allclose(driving_term(u, grid.dx)[ring], 1.0, atol=0.02)


def test_plateau_rim_gets_no_curvature():
    grid = Grid2D(L=2.0, dx=0.05)
    X, Y = grid.mesh()
    radius = np.hypot(X, Y)
    u = -np.maximum(radius - 1.0, 0.0) ** 2
    inside = radius <= 1.0
    assert np.all(curvature_term(u, grid.dx, grid.dx)[inside] == 0.0)
    assert np.all(spatial_operator(u, grid.dx)[inside] == 0.0)


def test_ridge_crest_is_held():
    grid = Grid2D(L=3.0, dx=0.05)
    X, Y = grid.mesh()
    u = -np.abs(np.hypot(X, Y) - 2.0)
    i, j = np.argmin(np.abs(grid.axis - 2.0)), np.argmin(np.abs(grid.axis))
    assert spatial_operator(u, grid.dx)[i, j] == 0.0
    # inside the crest u = r - 2, level lines of curvature 1/r
    k = np.argmin(np.abs(grid.axis - 1.5))
    assert spatial_operator(u, grid.dx)[k, j] == pytest.approx(1.0 + 1.0 / 1.5, abs=0.01)


def test_tight_peak_drops():
    grid = Grid2D(L=1.0, dx=0.05)
    X, Y = grid.mesh()
    u = 0.5 - np.hypot(X, Y)
    center = grid.size // 2
    assert curvature_term(u, grid.dx, grid.dx)[center, center] < -10.0
    # a smooth apex drops at about its second derivative
    smooth = -0.01 * (X ** 2 + Y ** 2)
    assert curvature_term(smooth, grid.dx, grid.dx)[center, center] == pytest.approx(
        -0.02, abs=0.002
    )


def test_one_step_from_zero():
    grid = Grid2D(L=2.0, dx=0.1)
    src = tent(center=1.0, width=0.5)
    dt = 0.5 * grid.cfl_bound()
    u = evolve2d(0.0, dt, src, grid=grid, dt=dt)
    X, Y = grid.mesh()
    expected = dt * src.planar_values(X, Y)
    np.testing.assert_allclose(u.values[1:-1, 1:-1], expected[1:-1, 1:-1], atol=1e-15)
    assert u.time == pytest.approx(dt)


def test_cfl_and_grid_errors():
    grid = Grid2D(L=1.0, dx=0.1)
    with pytest.raises(CFLError):
        evolve2d(0.0, 0.1, grid=grid, dt=2 * grid.cfl_bound())
    with pytest.raises(ValueError):
        evolve2d(0.0, 0.1)


def test_zero_time():
    grid = Grid2D(L=1.0, dx=0.1)
    u0 = LevelSetField2D.from_function(grid, lambda x1, x2: x1 * x2)
    u = evolve2d(u0, 0.0)
    np.testing.assert_array_equal(u.values, u0.values)
    assert u.at(0.5, 0.5) == pytest.approx(0.25)


def test_upper_barrier():
    grid = Grid2D(L=2.5, dx=0.1)
    src = tent(center=1.0, width=0.5)
    T = 0.5
    u = evolve2d(0.0, T, src, grid=grid)
    assert u.values.max() <= 1.0 * T + 0.01


def test_radial_source_keeps_symmetry():
    grid = Grid2D(L=2.0, dx=0.1)
    u = evolve2d(0.0, 0.2, tent(center=0.5, width=0.4), grid=grid).values
    np.testing.assert_allclose(u, u.T, atol=1e-12)
    np.testing.assert_allclose(u, u[::-1, :], atol=1e-12)
    np.testing.assert_allclose(u, u[:, ::-1], atol=1e-12)


def test_flatness_controls():
    grid = Grid2D(L=3.0, dx=0.1)
    spec = StadiumSpec(a=1.0)
    at_start = LevelSetField2D(grid=grid, values=np.zeros((grid.size, grid.size)))
    assert flatness_on_U(at_start, spec, c=1.0) == 0.0
    no_source = evolve2d(0.0, 1.0, grid=grid)
    assert flatness_on_U(no_source, spec, c=1.0) == pytest.approx(1.0)


def test_flatness_on_stadium():
    spec = StadiumSpec(a=1.0)
    grid = Grid2D(L=3.5, dx=0.1)
    u = evolve2d(0.0, 1.0, spec.source(c=1.0), grid=grid)
    # nodes of U have no higher neighbor and advance at exactly c
    assert flatness_on_U(u, spec, c=1.0) <= 1e-9


@pytest.mark.slow
def test_flatness_on_stadium_fine():
    spec = StadiumSpec(a=1.0)
    grid = Grid2D(L=5.0, dx=0.05)
    u = evolve2d(0.0, 2.0, spec.source(c=1.0), grid=grid)
    assert flatness_on_U(u, spec, c=1.0) <= 0.1



def test_stadium_membership():
    spec = StadiumSpec(a=1.0)
    assert spec.contains(1.5, 0.0)
    assert spec.contains(0.0, 1.0)
    assert not spec.contains(0.0, 1.01)
    assert not spec.contains(2.5, 0.0)
    assert spec.distance(3.0, 0.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        StadiumSpec(a=0.0)


@pytest.mark.slow
def test_radial_and_planar_agree():
    src = tent(center=2.0)
    grid = Grid2D(L=6.0, dx=0.05)
    u = evolve2d(0.0, 2.0, src, grid=grid)
    rgrid = RadialGrid(r_min=0.05, r_max=10.0, dr=0.05)
    phi = evolve(RadialField(grid=rgrid, values=np.zeros(rgrid.size)), 2.0, src)
    X, Y = grid.mesh()
    radius = np.hypot(X, Y)
    ring = (radius >= 0.5) & (radius <= 4.0)
    assert np.max(np.abs(u.values[ring] - phi.at(radius[ring]))) <= 0.1
    # the crest grows at the asymptotic speed, as in the radial solver
    assert u.at(2.0, 0.0) == pytest.approx(2.0, abs=0.05)



def test_scaled_limit():
    report = scaled_limit_check(
        tent(center=2.0), lambdas=(8.0, 16.0), samples=((0.0, 1.0), (0.5, 1.0))
    )
    assert set(report.deviations) == {8.0, 16.0}
    assert report.decreasing
    assert report.max_deviation[16.0] < report.max_deviation[8.0]


class _Flat:
    def __init__(self, value):
        self.value = value

    def at(self, r):
        return np.full(np.shape(r), self.value)


def test_gamma_membership():
    grid = Grid2D(L=3.0, dx=0.1)
    X, Y = grid.mesh()
    envelope = types.SimpleNamespace(c=1.0, a=1.0, upper=_Flat(0.5), lower=_Flat(-0.5))
    T = 2.0
    inside = LevelSetField2D(grid=grid, values=T + 3.0 + 0.1 * np.sin(X), time=T)
    report = gamma_membership(inside, envelope)
    assert report.shift == pytest.approx(3.0, abs=0.1)
    assert report.contained(0.0)
    outside = LevelSetField2D(
        grid=grid, values=T + 3.0 + 2.0 * (np.hypot(X, Y) > 1.5), time=T
    )
    assert not gamma_membership(outside, envelope).contained(0.1)


if __name__ == "__main__":
    test_cone_curvature()
    test_scaled_limit()
