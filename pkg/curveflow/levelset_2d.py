"""Explicit finite difference solver for the planar level-set equation

    u_t = (div(Du/|Du|) + 1) |Du| + f(x),

The curvature part is the centered second difference of u along the level
line, replaced by the Hessian eigenvalue closest to 0 where the gradient is
shorter than eps. The driving part |Du| is the upwind form that draws from
the higher neighbor on each axis and also weights the curvature part. The
outer ring of nodes is held at its initial values.
"""

import dataclasses
import logging
import math
import time
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from tqdm import tqdm

from curveflow.errors import CFLError, NumericalError
from curveflow.radial_hj import RadialField, RadialGrid, evolve
from curveflow.source_model import (
    SourceModel,
    asymptotic_speed,
    stadium_distance,
    stadium_plateau,
)

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Grid2D:
    """Square grid [-L, L]^2 with spacing dx (array index [i, j] is (x_i, x_j))."""

    L: float
    dx: float

    def __post_init__(self):
        if not self.L > 0 or not self.dx > 0:
            raise ValueError(f"Grid2D needs L > 0 and dx > 0, got L={self.L}, dx={self.dx}")
        if self.size < 5:
            raise ValueError("Grid2D needs at least 5 nodes per axis")

    @property
    def size(self) -> int:
        return int(round(2 * self.L / self.dx)) + 1

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.size)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    def cfl_bound(self) -> float:
        return min(self.dx ** 2 / 8.0, self.dx / 2.0)


@dataclasses.dataclass
class LevelSetField2D:
    grid: Grid2D
    values: np.ndarray
    time: float = 0.0
    epsilon: Optional[float] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        shape = (self.grid.size, self.grid.size)
        if self.values.shape != shape:
            raise ValueError(f"expected shape {shape}, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise NumericalError(f"non finite values in 2D field at t={self.time:g}")

    @classmethod
    def from_function(
        cls, grid: Grid2D, func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ) -> "LevelSetField2D":
        X, Y = grid.mesh()
        values = np.broadcast_to(np.asarray(func(X, Y), dtype=float), X.shape)
        return cls(grid=grid, values=values.copy())

    def at(self, x1, x2) -> np.ndarray:
        interpolator = RegularGridInterpolator(
            (self.grid.axis, self.grid.axis), self.values, method="linear"
        )
        points = np.stack(np.broadcast_arrays(x1, x2), axis=-1)
        return interpolator(points)


@dataclasses.dataclass(frozen=True)
class StadiumSpec:
    """Union of closed unit disks centered on [-a, a] x {0}."""

    a: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"stadium half length must be positive, got {self.a}")

    def segment_distance(self, x1, x2) -> np.ndarray:
        return np.hypot(np.maximum(np.abs(x1) - self.a, 0.0), x2)

    def distance(self, x1, x2) -> np.ndarray:
        return stadium_distance(x1, x2, self.a)

    def contains(self, x1, x2, margin: float = 0.0) -> np.ndarray:
        return self.segment_distance(x1, x2) <= 1.0 - margin

    def source(self, c: float = 1.0, width: float = 0.5) -> SourceModel:
        return stadium_plateau(a=self.a, c=c, width=width)


def _one_sided_gradients(u: np.ndarray, dx: float) -> Tuple[np.ndarray, np.ndarray]:
    """Returns |Du| on interior nodes drawn from the higher and from the lower
    neighbor on each axis."""
    c = u[1:-1, 1:-1]
    up, down = 0.0, 0.0
    for plus, minus in (
        (u[2:, 1:-1], u[:-2, 1:-1]),
        (u[1:-1, 2:], u[1:-1, :-2]),
    ):
        forward = (plus - c) / dx
        backward = (c - minus) / dx
        up = up + np.maximum(np.maximum(forward, 0.0), -np.minimum(backward, 0.0)) ** 2
        down = down + np.maximum(np.maximum(-forward, 0.0), np.maximum(backward, 0.0)) ** 2
    return np.sqrt(up), np.sqrt(down)


def _upwind_gradient(u: np.ndarray, dx: float) -> np.ndarray:
    return _one_sided_gradients(u, dx)[0]


def strict_maxima(u: np.ndarray) -> np.ndarray:
    """Interior nodes above all eight neighbors, as a mask over the interior."""
    c = u[1:-1, 1:-1]
    ni, nj = u.shape
    peak = np.ones_like(c, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                peak &= c > u[1 + di : ni - 1 + di, 1 + dj : nj - 1 + dj]
    return peak


def _centered_derivatives(u: np.ndarray, dx: float):
    c = u[1:-1, 1:-1]
    east, west = u[2:, 1:-1], u[:-2, 1:-1]
    north, south = u[1:-1, 2:], u[1:-1, :-2]
    ux = (east - west) / (2 * dx)
    uy = (north - south) / (2 * dx)
    uxx = (east - 2 * c + west) / dx ** 2
    uyy = (north - 2 * c + south) / dx ** 2
    uxy = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * dx ** 2)
    return ux, uy, uxx, uyy, uxy


def tangential_curvature(u: np.ndarray, dx: float, epsilon: float) -> np.ndarray:
    """Returns div(Du/|Du|) |Du| from centered differences, 0 on the outer ring.

    Where the centered gradient is longer than epsilon this is the second
    difference of u along the level line, D2u(t, t) with t perpendicular to
    the gradient. Below epsilon the level line direction is unresolved and
    the eigenvalue of the discrete Hessian closest to 0 is used instead,
    which is 0 on flat ground and the tangential second derivative across
    ridges and valleys.
    """
    out = np.zeros_like(u)
    ux, uy, uxx, uyy, uxy = _centered_derivatives(u, dx)
    g2 = ux ** 2 + uy ** 2
    resolved = g2 > epsilon ** 2
    num = uxx * uy ** 2 - 2 * ux * uy * uxy + uyy * ux ** 2
    along = np.divide(num, g2, out=np.zeros_like(num), where=resolved)
    mean = 0.5 * (uxx + uyy)
    radius = np.hypot(0.5 * (uxx - uyy), uxy)
    nearest = np.minimum(np.maximum(0.0, mean - radius), mean + radius)
    out[1:-1, 1:-1] = np.where(resolved, along, nearest)
    return out


def centered_gradient(u: np.ndarray, dx: float) -> np.ndarray:
    """Returns the centered |Du| on interior nodes, 0 on the outer ring."""
    out = np.zeros_like(u)
    ux, uy = _centered_derivatives(u, dx)[:2]
    out[1:-1, 1:-1] = np.hypot(ux, uy)
    return out


def curvature_term(u: np.ndarray, dx: float, epsilon: float) -> np.ndarray:
    """Returns the tangential curvature weighted for the explicit scheme.

    The weight is the upwind gradient over the centered one, capped at 1,
    with epsilon standing in for the centered gradient at critical nodes.
    A node with no higher neighbor, such as the rim of a plateau or the
    crest of a ridge, gets no curvature contribution.

    A strict local maximum is the apex of closed level lines. There the
    level lines shrink when their curvature exceeds 1 and the node gets
    min(0, D2u(t, t) + |Du|), |Du| drawn from the lower neighbors.
    """
    out = tangential_curvature(u, dx, epsilon)
    along = out[1:-1, 1:-1]
    up, down = _one_sided_gradients(u, dx)
    scale = np.maximum(centered_gradient(u, dx)[1:-1, 1:-1], epsilon)
    peak = strict_maxima(u)
    out[1:-1, 1:-1] = np.where(
        peak, np.minimum(0.0, along + down), along * np.minimum(1.0, up / scale)
    )
    return out


def driving_term(u: np.ndarray, dx: float) -> np.ndarray:
    """Returns the upwind |Du| on interior nodes, 0 on the outer ring."""
    out = np.zeros_like(u)
    out[1:-1, 1:-1] = _upwind_gradient(u, dx)
    return out


def spatial_operator(u: np.ndarray, dx: float, epsilon: Optional[float] = None) -> np.ndarray:
    """Returns (div(Du/|Du|) + 1)|Du| discretized on the grid.

    Args:
        u: nodal values.
        dx: grid spacing.
        epsilon: centered gradient length below which a node counts as
            critical, defaults to dx.
    """
    epsilon = dx if epsilon is None else epsilon
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return curvature_term(u, dx, epsilon) + driving_term(u, dx)


def _initial_values(u0, grid: Grid2D) -> np.ndarray:
    if isinstance(u0, LevelSetField2D):
        return u0.values.copy()
    if callable(u0):
        return LevelSetField2D.from_function(grid, u0).values
    values = np.asarray(u0, dtype=float)
    if np.ndim(values) == 0:
        return np.full((grid.size, grid.size), float(values))
    return values.copy()


def evolve2d(
    u0: Union[LevelSetField2D, Callable, np.ndarray, float],
    T: float,
    src: Optional[SourceModel] = None,
    grid: Optional[Grid2D] = None,
    epsilon: Optional[float] = None,
    cfl: float = 0.9,
    dt: Optional[float] = None,
    verbosity: int = 0,
) -> LevelSetField2D:
    """Returns u(., T) by forward Euler steps of u_t = spatial_operator + f.

    Args:
        u0: initial field, a callable (x1, x2) -> values, an array or a constant.
        T: duration.
        src: source term, none means f = 0.
        grid: required unless u0 is a LevelSetField2D.
        epsilon: critical gradient length, defaults to dx.
        cfl: safety factor applied to min(dx^2/8, dx/2).
        dt: explicit time step, rejected above the CFL bound.
        verbosity: > 0 shows a progress bar.
    """
    if isinstance(u0, LevelSetField2D):
        grid = grid or u0.grid
        t0 = u0.time
    else:
        t0 = 0.0
    if grid is None:
        raise ValueError("evolve2d needs a grid")
    if not T >= 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    dx = grid.dx
    epsilon = dx if epsilon is None else epsilon
    bound = grid.cfl_bound()
    if dt is not None:
        if dt > bound * (1 + 1e-12) or not dt > 0:
            raise CFLError(dt, bound)
        steps = int(math.ceil(T / dt - 1e-12)) if T > 0 else 0
    else:
        steps = int(math.ceil(T / (cfl * bound) - 1e-12)) if T > 0 else 0
    dt = T / steps if steps else 0.0

    u = _initial_values(u0, grid)
    forcing = np.zeros_like(u)
    if src is not None:
        X, Y = grid.mesh()
        forcing[1:-1, 1:-1] = src.planar_values(X, Y)[1:-1, 1:-1]

    start = time.time()
    for k in tqdm(range(steps), disable=verbosity <= 0, desc="levelset2d"):
        u = u + dt * (spatial_operator(u, dx, epsilon) + forcing)
        if k % 200 == 0 and not np.all(np.isfinite(u)):
            raise NumericalError(f"non finite values at t={t0 + (k + 1) * dt:g}")
    logger.info(
        "evolve2d to T=%g on %d^2 nodes: %d steps, dt=%.3g, %.2fs",
        T,
        grid.size,
        steps,
        dt,
        time.time() - start,
    )
    return LevelSetField2D(grid=grid, values=u, time=t0 + T, epsilon=epsilon)


def flatness_on_U(
    u: LevelSetField2D, spec: StadiumSpec, c: float, t: Optional[float] = None
) -> float:
    """Returns max over grid nodes in U of |u - c t|."""
    t = u.time if t is None else t
    X, Y = u.grid.mesh()
    inside = spec.contains(X, Y)
    if not np.any(inside):
        raise ValueError("no grid node lies in the stadium")
    return float(np.max(np.abs(u.values[inside] - c * t)))


@dataclasses.dataclass
class ScaledLimitReport:
    samples: Tuple[Tuple[float, float], ...]
    deviations: Dict[float, np.ndarray]

    @property
    def max_deviation(self) -> Dict[float, float]:
        return {lam: float(dev.max()) for lam, dev in self.deviations.items()}

    @property
    def decreasing(self) -> bool:
        lambdas = sorted(self.deviations)
        return all(
            np.all(self.deviations[b] < self.deviations[a])
            for a, b in zip(lambdas, lambdas[1:])
        )


def scaled_limit_check(
    src: SourceModel,
    lambdas: Sequence[float] = (8.0, 16.0),
    samples: Sequence[Tuple[float, float]] = (
        (0.0, 1.0),
        (0.25, 1.0),
        (0.5, 1.0),
        (0.6, 1.0),
        (0.75, 1.0),
    ),
    dr: float = 0.05,
    cfl: float = 0.9,
    verbosity: int = 0,
) -> ScaledLimitReport:
    """Compares u(lam x, lam t)/lam with max{c (t - |x|), 0} for radial data u0 = 0.

    Args:
        src: radial source.
        lambdas: scale factors.
        samples: (|x|, t) pairs.
        dr: radial grid spacing.
        cfl: safety factor.
        verbosity: > 0 shows progress bars.
    """
    c = asymptotic_speed(src).c
    samples = tuple((float(x), float(t)) for x, t in samples)
    x_max = max(x for x, _ in samples)
    t_max = max(t for _, t in samples)
    times = sorted({t for _, t in samples})
    deviations = {}
    for lam in lambdas:
        grid = RadialGrid(r_max=lam * (x_max + t_max) + src.R + 5.0, dr=dr)
        phi0 = RadialField(grid=grid, values=np.zeros(grid.size))
        result = evolve(
            phi0,
            lam * t_max,
            src,
            c=c,
            cfl=cfl,
            record_times=[lam * t for t in times],
            verbosity=verbosity,
        )
        history = result.history
        dev = []
        for x, t in samples:
            snap = history[np.isclose(history["t"], lam * t)]
            value = np.interp(lam * x, snap["r"].to_numpy(), snap["phi"].to_numpy()) / lam
            dev.append(abs(value - max(c * (t - x), 0.0)))
        deviations[float(lam)] = np.array(dev)
        logger.info("scaled limit lambda=%g: deviations %s", lam, np.round(dev, 4))
    return ScaledLimitReport(samples=samples, deviations=deviations)


@dataclasses.dataclass
class GammaReport:
    upper_slack: float
    lower_slack: float
    shift: float

    def contained(self, tol: float) -> bool:
        return self.upper_slack <= tol and self.lower_slack >= -tol


def gamma_membership(
    u: LevelSetField2D,
    envelope,
    T: Optional[float] = None,
    r_check: Optional[float] = None,
    normalize_radius: Optional[float] = None,
) -> GammaReport:
    """Measures u(., T) - cT against the envelope profiles.

    After subtracting its median over |x| <= normalize_radius (default the
    radius where the lower envelope stops being maximal), u - cT should lie
    between the lower and upper envelope profiles. Returns the largest
    excess over the upper one and the smallest margin over the lower one,
    on nodes with |x| <= r_check.

    Args:
        u: evolved field.
        envelope: EnvelopeSolutions with upper, lower profiles and speed c.
        T: time, defaults to u.time.
        r_check: radius of the compared disk, defaults to L - 1.
        normalize_radius: radius of the normalization disk.
    """
    T = u.time if T is None else T
    X, Y = u.grid.mesh()
    radius = np.hypot(X, Y)
    w = u.values - envelope.c * T
    normalize_radius = envelope.a if normalize_radius is None else normalize_radius
    core = radius <= normalize_radius
    if not np.any(core):
        raise ValueError("normalization disk contains no grid node")
    shift = float(np.median(w[core]))
    w = w - shift
    r_check = u.grid.L - 1.0 if r_check is None else r_check
    mask = radius <= r_check
    upper = envelope.upper.at(radius[mask])
    lower = envelope.lower.at(radius[mask])
    return GammaReport(
        upper_slack=float(np.max(w[mask] - upper)),
        lower_slack=float(np.min(w[mask] - lower)),
        shift=shift,
    )
