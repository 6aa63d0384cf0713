"""Geometric checks for stationary and evolving fronts of V = curvature + 1.

Covers the explicit family of stationary solutions on the stadium, level
curve extraction and circle fits, the foliation comparison, stationarity
of the unit disk, the evolution of indicator functions and the fattening
check for two touching disks.
"""

import dataclasses
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.optimize import minimize_scalar
from scipy.spatial.distance import directed_hausdorff
from skimage import measure

from curveflow.errors import DegenerateFitError
from curveflow.levelset_2d import (
    Grid2D,
    LevelSetField2D,
    StadiumSpec,
    centered_gradient,
    evolve2d,
    tangential_curvature,
)
from curveflow.radial_hj import front_radius_ode

logger = logging.getLogger(__name__)

UNIT_STADIUM = StadiumSpec(a=1.0)
# level curves of the explicit solutions run tangent to the flat sides of U,
# where their derivatives blow up
BOUNDARY_LAYER = 0.1


@dataclasses.dataclass(frozen=True)
class LevelCurve:
    """Polyline of a level set, points in (x1, x2) coordinates."""

    level: float
    points: np.ndarray
    closed: bool

    def __len__(self):
        return len(self.points)

    @property
    def max_gap(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return float(np.max(np.hypot(*np.diff(self.points, axis=0).T)))


@dataclasses.dataclass(frozen=True)
class CircleFit:
    center: Tuple[float, float]
    radius: float
    rms: float


def extract_level_curves(
    values: np.ndarray,
    grid: Grid2D,
    level: float,
    mask: Optional[np.ndarray] = None,
    min_points: int = 2,
) -> List[LevelCurve]:
    """Returns the marching squares curves of values at level.

    Args:
        values: nodal values, non finite entries are masked out.
        grid: grid of values.
        level: contour value.
        mask: nodes allowed to take part, defaults to the finite ones.
        min_points: shorter polylines are dropped.
    """
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    mask = finite if mask is None else (np.asarray(mask, dtype=bool) & finite)
    contours = measure.find_contours(np.where(finite, values, 0.0), level, mask=mask)
    curves = []
    for contour in contours:
        if len(contour) < min_points:
            continue
        points = -grid.L + grid.dx * contour
        closed = bool(np.allclose(contour[0], contour[-1]))
        curves.append(LevelCurve(level=float(level), points=points, closed=closed))
    return curves


def circle_fit(curve, min_points: int = 8, cond_tol: float = 1e-10) -> CircleFit:
    """Returns the algebraic least squares circle through the curve points.

    Solves 2 x cx + 2 y cy + k = x^2 + y^2 in the least squares sense, with
    radius^2 = k + cx^2 + cy^2.

    Args:
        curve: LevelCurve or (m, 2) array of points.
        min_points: fewer points are rejected.
        cond_tol: smallest accepted ratio of singular values, collinear
            points fall below it.
    """
    points = curve.points if isinstance(curve, LevelCurve) else np.asarray(curve, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("circle_fit expects (m, 2) points")
    if len(points) < min_points:
        raise DegenerateFitError(f"circle fit needs {min_points} points, got {len(points)}")
    x, y = points[:, 0], points[:, 1]
    A = np.c_[2 * x, 2 * y, np.ones_like(x)]
    b = x ** 2 + y ** 2
    coef, _, rank, singular = np.linalg.lstsq(A, b, rcond=None)
    if rank < 3 or singular[-1] <= cond_tol * singular[0]:
        raise DegenerateFitError("points are collinear, no circle through them")
    cx, cy = coef[0], coef[1]
    radius = float(np.sqrt(coef[2] + cx ** 2 + cy ** 2))
    rms = float(np.sqrt(np.mean((np.hypot(x - cx, y - cy) - radius) ** 2)))
    return CircleFit(center=(float(cx), float(cy)), radius=radius, rms=rms)


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


# explicit stationary solutions on the unit stadium


def _check_reparam(reparam: Optional[Callable]) -> Callable:
    if reparam is None:
        return lambda s: s
    if abs(float(reparam(0.0))) > 1e-12:
        raise ValueError("reparametrization must fix 0")
    return reparam


def explicit_solution(x1, x2, reparam: Optional[Callable] = None) -> np.ndarray:
    """Returns reparam(v(x)) for the stationary solution v on the unit stadium.

    v = 0 where x1 <= 0 or |x| <= 1, and sqrt(1 - x2^2) - x1 elsewhere in U.
    Points outside U are rejected.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if not np.all(UNIT_STADIUM.contains(x1, x2, margin=-1e-12)):
        raise ValueError("explicit_solution is only defined on the stadium")
    theta = _check_reparam(reparam)
    flat = (x1 <= 0) | (np.hypot(x1, x2) <= 1.0)
    arc = np.sqrt(np.clip(1.0 - x2 ** 2, 0.0, None)) - x1
    v = np.where(flat, 0.0, arc)
    return np.asarray(theta(v), dtype=float)


def explicit_field(grid: Grid2D, reparam: Optional[Callable] = None) -> np.ndarray:
    """Returns explicit_solution on the grid nodes in U, nan elsewhere."""
    X, Y = grid.mesh()
    inside = UNIT_STADIUM.contains(X, Y)
    out = np.full(X.shape, np.nan)
    out[inside] = explicit_solution(X[inside], Y[inside], reparam)
    return out


def admitted_nodes(
    grid: Grid2D, margin: Optional[float] = None, boundary_margin: Optional[float] = None
) -> np.ndarray:
    """Interior nodes of U away from its boundary and from {x1 = 0} and {|x| = 1}.

    Args:
        grid: grid.
        margin: distance kept from the corner loci, 2 dx by default.
        boundary_margin: distance kept from the boundary of U, the larger of
            margin and BOUNDARY_LAYER by default.
    """
    margin = 2 * grid.dx if margin is None else margin
    boundary_margin = max(margin, BOUNDARY_LAYER) if boundary_margin is None else boundary_margin
    X, Y = grid.mesh()
    return (
        UNIT_STADIUM.contains(X, Y, margin=boundary_margin)
        & (np.abs(X) > margin)
        & (np.abs(np.hypot(X, Y) - 1.0) > margin)
    )


def level_set_residual(values: np.ndarray, dx: float, epsilon: float) -> np.ndarray:
    """Returns (div(Du/|Du|) + 1)|Du| with centered differences.

    Nodes whose centered gradient is shorter than epsilon are treated as
    critical, see tangential_curvature.
    """
    u = np.asarray(values, dtype=float)
    return tangential_curvature(u, dx, epsilon) + centered_gradient(u, dx)


def residual_on_U(
    values: np.ndarray,
    grid: Grid2D,
    epsilon: Optional[float] = None,
    margin: Optional[float] = None,
    boundary_margin: Optional[float] = None,
) -> float:
    """Returns the max stationary level-set residual over admitted nodes.

    Args:
        values: field sampled on the grid, only nodes within one cell of an
            admitted node are read.
        grid: grid of values.
        epsilon: critical gradient length, defaults to dx^2.
        margin: distance kept from the corner loci, 2 dx by default.
        boundary_margin: distance kept from the boundary of U, see admitted_nodes.
    """
    epsilon = grid.dx ** 2 if epsilon is None else epsilon
    admitted = admitted_nodes(grid, margin, boundary_margin)
    if not np.any(admitted):
        raise ValueError("no admitted node, refine the grid")
    with np.errstate(invalid="ignore"):
        residual = level_set_residual(values, grid.dx, epsilon)
    return float(np.max(np.abs(residual[admitted])))


@dataclasses.dataclass
class FoliationReport:
    max_distance: float
    distances: Dict[float, float]
    matched_levels: Dict[float, float]
    bad_levels: List[float]
    boundary_monotone: bool

    @property
    def ok(self) -> bool:
        return self.boundary_monotone and not self.bad_levels


def boundary_monotone(values: np.ndarray, grid: Grid2D, spec: StadiumSpec = UNIT_STADIUM) -> bool:
    """Checks strict decrease in x1 along the outermost node rows of the flat sides of U.

    Columns with x1 in [a/2, a] are sampled on both the upper and lower side.
    """
    X, Y = grid.mesh()
    inside = spec.contains(X, Y) & np.isfinite(values)
    columns = np.nonzero((grid.axis >= 0.5 * spec.a) & (grid.axis <= spec.a))[0]
    if len(columns) < 2:
        return False
    for pick in (np.argmax, np.argmin):
        samples = []
        for i in columns:
            rows = np.nonzero(inside[i])[0]
            if len(rows) == 0:
                return False
            j = rows[pick(grid.axis[rows])]
            samples.append(values[i, j])
        if not np.all(np.diff(samples) < 0):
            return False
    return True


def _curve_points(values, grid, level, mask) -> np.ndarray:
    curves = extract_level_curves(values, grid, level, mask=mask)
    if not curves:
        return np.empty((0, 2))
    return np.concatenate([curve.points for curve in curves])


def foliation_check(
    u: np.ndarray,
    v: np.ndarray,
    grid: Grid2D,
    levels: Optional[Sequence[float]] = None,
    candidates: int = 41,
    tol: Optional[float] = None,
) -> FoliationReport:
    """Matches negative level curves of u with level curves of v.

    For each u level the v level minimizing the Hausdorff distance between
    the curves is searched on a grid of candidates, then refined by a
    bounded scalar search. Levels matched worse than tol are reported.

    Args:
        u: field on U (nan outside).
        v: reference field on U (nan outside).
        grid: common grid.
        levels: u levels, defaults to 9 evenly spread negative levels.
        candidates: v levels tried before refinement.
        tol: distance above which a level is reported, defaults to 2 dx.
    """
    tol = 2 * grid.dx if tol is None else tol
    X, Y = grid.mesh()
    mask = UNIT_STADIUM.contains(X, Y) & np.isfinite(u) & np.isfinite(v)
    u_min = float(np.min(u[mask]))
    v_min = float(np.min(v[mask]))
    if levels is None:
        levels = np.linspace(u_min, 0.0, 11)[1:-1]
    v_levels = np.linspace(v_min, 0.0, candidates)[1:-1]
    step = v_levels[1] - v_levels[0]

    distances, matched, bad = {}, {}, []
    for level in levels:
        level = float(level)
        target = _curve_points(u, grid, level, mask)
        if len(target) == 0:
            bad.append(level)
            continue

        def distance(vl):
            points = _curve_points(v, grid, vl, mask)
            return hausdorff(target, points) if len(points) else np.inf

        coarse = [distance(vl) for vl in v_levels]
        best = int(np.argmin(coarse))
        lo = max(v_levels[best] - step, v_min)
        hi = min(v_levels[best] + step, 0.0)
        refined = minimize_scalar(
            distance, bounds=(lo, hi), method="bounded", options={"xatol": 1e-4}
        )
        value, vl = (
            (float(refined.fun), float(refined.x))
            if refined.fun < coarse[best]
            else (float(coarse[best]), float(v_levels[best]))
        )
        distances[level] = value
        matched[level] = vl
        if not value <= tol:
            bad.append(level)
    monotone = boundary_monotone(u, grid)
    report = FoliationReport(
        max_distance=max(distances.values()) if distances else float("inf"),
        distances=distances,
        matched_levels=matched,
        bad_levels=bad,
        boundary_monotone=monotone,
    )
    logger.info(
        "foliation: max distance %.3g over %d levels, %d bad, boundary monotone %s",
        report.max_distance,
        len(distances),
        len(bad),
        monotone,
    )
    return report


def level_circle_fits(
    values: np.ndarray, grid: Grid2D, levels: Sequence[float]
) -> Dict[float, List[CircleFit]]:
    """Fits a circle to every level curve of values (nan outside U) at each level."""
    X, Y = grid.mesh()
    mask = UNIT_STADIUM.contains(X, Y) & np.isfinite(values)
    fits = {}
    for level in levels:
        curves = extract_level_curves(values, grid, level, mask=mask, min_points=8)
        fits[float(level)] = [circle_fit(curve) for curve in curves]
    return fits


# evolving fronts


def disk_field(radius: float = 1.0, center: Tuple[float, float] = (0.0, 0.0)):
    """Returns x -> radius - |x - center|, positive inside the disk."""

    def func(x1, x2):
        return radius - np.hypot(x1 - center[0], x2 - center[1])

    return func


def zero_set_area(values: np.ndarray, grid: Grid2D, level: float = 0.0) -> float:
    return float(np.count_nonzero(values > level)) * grid.dx ** 2


@dataclasses.dataclass
class StationarityReport:
    radius: float
    T: float
    hausdorff: float
    mean_radius: float
    ode_radius: float
    ode_hausdorff: float

    @property
    def motion(self) -> int:
        """Sign of the front motion, -1 for shrinking or extinct fronts."""
        if self.mean_radius == 0.0:
            return -1
        return int(np.sign(round(self.mean_radius - self.radius, 12)))


def _circle(radius: float, samples: int = 720) -> np.ndarray:
    theta = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    return radius * np.c_[np.cos(theta), np.sin(theta)]


def stationarity_check(
    radius: float = 1.0,
    T: float = 1.0,
    dx: float = 0.05,
    L: Optional[float] = None,
    epsilon: Optional[float] = None,
    verbosity: int = 0,
) -> StationarityReport:
    """Evolves the disk of the given radius with f = 0 and measures its zero level set.

    Returns the Hausdorff distance of the zero level set from the initial
    circle and from the circle predicted by dr/dt = 1 - 1/r.
    """
    trajectory = front_radius_ode(radius, T, n=2)
    ode_radius = trajectory.final_radius
    if L is None:
        L = max(radius, ode_radius) + 1.5
    grid = Grid2D(L=L, dx=dx)
    u0 = LevelSetField2D.from_function(grid, disk_field(radius))
    u = evolve2d(u0, T, grid=grid, epsilon=epsilon, verbosity=verbosity)
    curves = extract_level_curves(u.values, grid, 0.0)
    if not curves:
        logger.info("stationarity: radius %g front extinct by T=%g", radius, T)
        return StationarityReport(
            radius=radius,
            T=T,
            hausdorff=float("inf"),
            mean_radius=0.0,
            ode_radius=ode_radius,
            ode_hausdorff=float("inf") if ode_radius > 0 else 0.0,
        )
    points = np.concatenate([curve.points for curve in curves])
    report = StationarityReport(
        radius=radius,
        T=T,
        hausdorff=hausdorff(points, _circle(radius)),
        mean_radius=float(np.mean(np.hypot(points[:, 0], points[:, 1]))),
        ode_radius=ode_radius,
        ode_hausdorff=hausdorff(points, _circle(ode_radius))
        if ode_radius > 0
        else float("inf"),
    )
    logger.info(
        "stationarity: radius %g -> mean %.4f (ode %.4f), hausdorff %.3g",
        radius,
        report.mean_radius,
        ode_radius,
        report.hausdorff,
    )
    return report


@dataclasses.dataclass
class IndicatorReport:
    area0: float
    areaT: float
    symmetric_difference: float


def mask_level_function(mask: np.ndarray, dx: float) -> np.ndarray:
    """Returns 1/2 plus the signed distance to the boundary of the mask.

    Positive distances are inside, so the mask is the superlevel set {u > 1/2}.
    """
    mask = np.asarray(mask, dtype=bool)
    inside = ndimage.distance_transform_edt(mask, sampling=dx)
    outside = ndimage.distance_transform_edt(~mask, sampling=dx)
    return 0.5 + np.where(mask, inside - 0.5 * dx, 0.5 * dx - outside)


def indicator_evolution(
    inside: Callable[[np.ndarray, np.ndarray], np.ndarray],
    T: float,
    grid: Grid2D,
    epsilon: Optional[float] = None,
    verbosity: int = 0,
) -> IndicatorReport:
    """Evolves an open set D0 and compares its superlevel set {u > 1/2} with D0.

    The evolution of a set does not depend on the function carrying it as a
    superlevel set. The indicator of D0 is replaced by mask_level_function,
    which has the same superlevel set {u > 1/2} and a unit gradient the
    scheme can move.

    Args:
        inside: vectorized membership test (x1, x2) -> bool.
        T: duration.
        grid: grid.
        epsilon: critical gradient length, defaults to dx.
        verbosity: > 0 shows a progress bar.
    """
    X, Y = grid.mesh()
    mask0 = np.asarray(inside(X, Y), dtype=bool)
    u0 = mask_level_function(mask0, grid.dx)
    u = evolve2d(u0, T, grid=grid, epsilon=epsilon, verbosity=verbosity)
    maskT = u.values > 0.5
    cell = grid.dx ** 2
    report = IndicatorReport(
        area0=float(mask0.sum()) * cell,
        areaT=float(maskT.sum()) * cell,
        symmetric_difference=float(np.count_nonzero(mask0 ^ maskT)) * cell,
    )
    logger.info(
        "indicator evolution: area %.4f -> %.4f, symmetric difference %.4f",
        report.area0,
        report.areaT,
        report.symmetric_difference,
    )
    return report


@dataclasses.dataclass
class FatteningReport:
    separation: float
    delta: float
    window: float
    area0: float
    areaT: float

    @property
    def factor(self) -> float:
        return self.areaT / self.area0


def _slab_area(values, grid, delta, separation, window) -> float:
    X, _ = grid.mesh()
    band = np.abs(np.abs(X) - 0.5 * separation) <= window
    slab = (np.abs(values) <= delta) & band
    return float(np.count_nonzero(slab)) * grid.dx ** 2


def fattening_probe(
    separation: float = 0.0,
    T: float = 0.2,
    dx: float = 0.02,
    delta: Optional[float] = None,
    window: Optional[float] = None,
    epsilon: Optional[float] = None,
    verbosity: int = 0,
) -> FatteningReport:
    """Measures the growth of the slab {|u| <= delta} between two unit disks.

    The disks are centered at (+-(1 + separation/2), 0), u0 is the max of
    their signed distance functions and f = 0. The slab area is counted in
    the bands ||x1| - separation/2| <= window through the points where the
    disks come closest, which is a single band |x1| <= window for tangent
    disks.

    Args:
        separation: gap between the disks, 0 for tangent disks.
        T: duration.
        dx: grid spacing.
        delta: slab half width, defaults to 4 dx.
        window: half width of the bands, defaults to 2 dx.
        epsilon: critical gradient length, defaults to dx.
        verbosity: > 0 shows progress bars.
    """
    if separation < 0:
        raise ValueError(f"separation must be nonnegative, got {separation}")
    delta = 4 * dx if delta is None else delta
    window = 2 * dx if window is None else window
    shift = 1.0 + 0.5 * separation
    grid = Grid2D(L=shift + 1.5, dx=dx)
    left, right = disk_field(1.0, (-shift, 0.0)), disk_field(1.0, (shift, 0.0))
    u0 = LevelSetField2D.from_function(
        grid, lambda x1, x2: np.maximum(left(x1, x2), right(x1, x2))
    )
    area0 = _slab_area(u0.values, grid, delta, separation, window)
    if area0 == 0:
        raise ValueError("band does not meet the slab, widen the window")
    u = evolve2d(u0, T, grid=grid, epsilon=epsilon, verbosity=verbosity)
    report = FatteningReport(
        separation=separation,
        delta=delta,
        window=window,
        area0=area0,
        areaT=_slab_area(u.values, grid, delta, separation, window),
    )
    logger.info(
        "fattening separation=%g: slab %.4f -> %.4f (factor %.3f)",
        separation,
        area0,
        report.areaT,
        report.factor,
    )
    return report
