"""Radial Hamilton-Jacobi solver.

Radially symmetric solutions u(x, t) = phi(|x|, t) solve

    phi_t = (n-1)/r phi_r + |phi_r| + f~(r),   r > 0,

which is singular at r = 0. The transport part G(p) = (n-1)/r p + |p| is
convex in p; the explicit scheme uses its Godunov flux, which is monotone
under the CFL bound dt <= dr / (1 + (n-1)/r_min).

control_oracle is an independent semi-Lagrangian value iteration of the
optimal control representation, used to cross-check evolve.
"""

import dataclasses
import logging
import math
import time
from typing import Callable, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from tqdm import tqdm

from curveflow.errors import CFLError, NumericalError
from curveflow.source_model import SourceModel, asymptotic_speed

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["t", "r", "phi", "phi_minus_ct"]


@dataclasses.dataclass(frozen=True)
class RadialGrid:
    """Uniform radius grid r_min, r_min + dr, ... <= r_max."""

    r_max: float
    dr: float
    r_min: Optional[float] = None

    def __post_init__(self):
        if not self.dr > 0:
            raise ValueError(f"dr must be positive, got {self.dr}")
        if self.r_min is None:
            object.__setattr__(self, "r_min", 0.5 * self.dr)
        if not 0 < self.r_min < self.r_max:
            raise ValueError(
                f"grid needs 0 < r_min < r_max, got r_min={self.r_min}, r_max={self.r_max}"
            )

    @property
    def size(self) -> int:
        return int(math.floor((self.r_max - self.r_min) / self.dr + 1e-9)) + 1

    @property
    def nodes(self) -> np.ndarray:
        return self.r_min + self.dr * np.arange(self.size)

    def cfl_bound(self, n: int) -> float:
        return self.dr / (1.0 + (n - 1) / self.r_min)

    def nearest(self, r: float) -> int:
        return int(np.clip(round((r - self.r_min) / self.dr), 0, self.size - 1))


@dataclasses.dataclass
class RadialField:
    """Grid function phi(r, t).

    history holds recorded snapshots (columns t, r, phi, phi_minus_ct) when
    evolve was asked to record.
    """

    grid: RadialGrid
    values: np.ndarray
    time: float = 0.0
    history: Optional[pd.DataFrame] = None
    lipschitz_estimate: float = float("nan")

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise ValueError(
                f"expected {self.grid.size} values, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise NumericalError(f"non finite values in radial field at t={self.time:g}")

    @classmethod
    def from_function(
        cls, grid: RadialGrid, func: Callable[[np.ndarray], np.ndarray], time: float = 0.0
    ) -> "RadialField":
        values = np.broadcast_to(np.asarray(func(grid.nodes), dtype=float), (grid.size,))
        return cls(grid=grid, values=values.copy(), time=time)

    def at(self, r) -> np.ndarray:
        return np.interp(r, self.grid.nodes, self.values)


def hamiltonian(r, p, src: SourceModel) -> np.ndarray:
    """Returns H(r, p) = -(n-1) p / r - |p| - f~(r), concave in p."""
    r = np.asarray(r, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(r <= 0):
        raise ValueError("hamiltonian is singular at r <= 0")
    n = src.n
    return -(n - 1) * p / r - np.abs(p) - src.radial_profile(r)


def transport_rate(values: np.ndarray, r: np.ndarray, dr: float, n: int, c: float):
    """Returns the Godunov flux of (n-1)/r phi_r + |phi_r| at every node.

    With G(p) = (n-1)/r p + |p| convex, the flux is the larger of G at the
    two one-sided slopes where the backward slope is below the forward one,
    and the minimum of G between them at a peak. G has its minimum 0 at
    p = 0 for r >= n-1 and is increasing below n-1.

    The node past r_max is a ghost at slope -c; at r_min the backward
    difference is replaced by the forward one.
    """
    ghost = values[-1] - c * dr
    forward = np.diff(np.append(values, ghost)) / dr
    backward = np.empty_like(forward)
    backward[1:] = forward[:-1]
    backward[0] = forward[0]
    drift = (n - 1) / r

    def G(p):
        return drift * p + np.abs(p)

    spread = np.maximum(G(backward), G(forward))
    # argmin of G restricted to [forward, backward]
    lowest = np.where(drift <= 1.0, 0.0, -np.inf)
    peak = G(np.minimum(np.maximum(lowest, forward), backward))
    return np.where(backward <= forward, spread, peak)


def step(
    phi: RadialField, dt: float, src: SourceModel, c: Optional[float] = None
) -> RadialField:
    """Returns one forward Euler step of the radial equation.

    Args:
        phi: current field.
        dt: time step, must satisfy the CFL bound.
        src: radial source.
        c: far field slope, defaults to the asymptotic speed of src.
    """
    grid = phi.grid
    dt_max = grid.cfl_bound(src.n)
    if dt > dt_max * (1 + 1e-12) or not dt >= 0:
        raise CFLError(dt, dt_max)
    if c is None:
        c = asymptotic_speed(src).c
    r = grid.nodes
    rate = transport_rate(phi.values, r, grid.dr, src.n, c) + src.radial_profile(r)
    return RadialField(grid=grid, values=phi.values + dt * rate, time=phi.time + dt)


def _snapshot(t: float, r: np.ndarray, values: np.ndarray, c: float) -> pd.DataFrame:
    return pd.DataFrame(
        {"t": t, "r": r, "phi": values, "phi_minus_ct": values - c * t},
        columns=HISTORY_COLUMNS,
    )


def evolve(
    phi0: RadialField,
    T: float,
    src: SourceModel,
    c: Optional[float] = None,
    cfl: float = 0.9,
    record_every: Optional[float] = None,
    record_times: Optional[Sequence[float]] = None,
    verbosity: int = 0,
) -> RadialField:
    """Returns phi(., phi0.time + T).

    Time steps are the largest equal steps below cfl times the CFL bound that
    land exactly on every recording time.

    Args:
        phi0: initial field.
        T: duration, nonnegative.
        src: radial source.
        c: far field slope, defaults to the asymptotic speed of src.
        cfl: safety factor in (0, 1].
        record_every: snapshot interval, including t=0 and T.
        record_times: explicit snapshot times in [0, T] (relative to phi0.time).
        verbosity: > 0 shows a progress bar.
    """
    if not T >= 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    if not 0 < cfl <= 1:
        raise ValueError(f"cfl must be in (0, 1], got {cfl}")
    if c is None:
        c = asymptotic_speed(src).c
    grid = phi0.grid
    r = grid.nodes
    forcing = src.radial_profile(r)
    dt_max = cfl * grid.cfl_bound(src.n)

    times = set()
    if record_every:
        times.update(np.arange(0.0, T + 0.5 * record_every, record_every).tolist())
        times.add(T)
    if record_times is not None:
        times.update(float(t) for t in record_times)
    if any(t < 0 or t > T * (1 + 1e-12) for t in times):
        raise ValueError("record times must lie in [0, T]")
    events = sorted(times | {T})
    recording = bool(times)

    values = phi0.values.copy()
    t0 = phi0.time
    t = 0.0
    snapshots = []
    if recording and 0.0 in times:
        snapshots.append(_snapshot(t0, r, values, c))
    total = sum(
        int(math.ceil((b - a) / dt_max - 1e-12)) for a, b in zip([0.0] + events, events)
    )
    start = time.time()
    steps = 0
    with tqdm(total=total, disable=verbosity <= 0, desc="radial") as progress:
        for target in events:
            span = target - t
            if span <= 0:
                continue
            count = int(math.ceil(span / dt_max - 1e-12))
            dt = span / count
            for _ in range(count):
                values = values + dt * (
                    transport_rate(values, r, grid.dr, src.n, c) + forcing
                )
                steps += 1
                progress.update(1)
            if not np.all(np.isfinite(values)):
                raise NumericalError(f"non finite values at t={t0 + target:g}")
            t = target
            logger.debug("radial: t=%.6g after %d steps", t0 + t, steps)
            if recording and target in times:
                snapshots.append(_snapshot(t0 + t, r, values, c))
    logger.info(
        "radial evolve of %s to T=%g: %d steps, dt<=%.3g, %.2fs",
        src.name,
        T,
        steps,
        dt_max,
        time.time() - start,
    )
    history = pd.concat(snapshots, ignore_index=True) if snapshots else None
    return RadialField(
        grid=grid,
        values=values,
        time=t0 + T,
        history=history,
        lipschitz_estimate=float(np.max(np.abs(np.diff(values))) / grid.dr)
        if grid.size > 1
        else 0.0,
    )


def _interp_with_sentinel(y: np.ndarray, nodes: np.ndarray, values: np.ndarray):
    """Linear interpolation keeping -inf as unreachable.

    y <= 0 is unreachable, y in (0, r_min) takes the first value and y past
    the last node the last value.
    """
    out = np.interp(y, nodes, np.where(np.isfinite(values), values, 0.0))
    j = np.clip(np.searchsorted(nodes, y), 1, len(nodes) - 1)
    dead = ~np.isfinite(values)
    touches = dead[j] | dead[j - 1]
    touches |= (y <= nodes[0]) & dead[0]
    touches |= (y >= nodes[-1]) & dead[-1]
    out[touches] = -np.inf
    out[y <= 0] = -np.inf
    return out


def control_oracle(
    r: Union[float, np.ndarray],
    t: float,
    phi0: Union[Callable[[np.ndarray], np.ndarray], RadialField],
    src: SourceModel,
    h: float = 0.01,
    K: int = 41,
    grid: Optional[RadialGrid] = None,
) -> Union[float, np.ndarray]:
    """Returns the discrete optimal control value at (r, t).

    Maximizes sum h f~(gamma_k) + u0(gamma_0) over curves with
    gamma_{k+1} = gamma_k + h (a_k - (n-1)/gamma_k), a_k in K points of
    [-1, 1], by backward value iteration on a radius grid with linear
    interpolation. Unreachable states carry -inf.

    Args:
        r: radius or radii.
        t: time, a multiple of h.
        phi0: initial profile u0(r) as a callable or a RadialField.
        src: radial source.
        h: time step.
        K: number of controls.
        grid: state grid, defaults to spacing h reaching r + 2t + 1.
    """
    m = int(round(t / h))
    if t < 0 or abs(m * h - t) > 1e-9 * max(1.0, t):
        raise ValueError(f"t={t} must be a nonnegative multiple of h={h}")
    if K < 2:
        raise ValueError("need at least 2 controls")
    r_query = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_query <= 0):
        raise ValueError("control_oracle needs r > 0")
    if grid is None:
        grid = RadialGrid(r_max=float(r_query.max()) + 2.0 * t + 1.0, dr=h)
    initial = phi0.at if isinstance(phi0, RadialField) else phi0
    nodes = grid.nodes
    n = src.n
    values = np.broadcast_to(np.asarray(initial(nodes), dtype=float), nodes.shape).copy()
    gain = h * src.radial_profile(nodes)
    controls = np.linspace(-1.0, 1.0, K)
    departures = nodes[None, :] + h * ((n - 1) / nodes[None, :] - controls[:, None])
    for _ in range(m):
        candidates = np.stack(
            [_interp_with_sentinel(y, nodes, values) for y in departures]
        )
        values = candidates.max(axis=0) + gain
    result = _interp_with_sentinel(r_query, nodes, values)
    return float(result[0]) if np.ndim(r) == 0 else result


@dataclasses.dataclass(frozen=True)
class FrontTrajectory:
    t: np.ndarray
    r: np.ndarray
    extinct_at: Optional[float] = None

    @property
    def final_radius(self) -> float:
        return 0.0 if self.extinct_at is not None else float(self.r[-1])


def front_radius_ode(r0: float, T: float, n: int = 2) -> FrontTrajectory:
    """Integrates dr/dt = 1 - (n-1)/r for a circular front of radius r0.

    The front stops at extinction (r reaching 0).
    """
    if not r0 > 0:
        raise ValueError(f"r0 must be positive, got {r0}")
    if T <= 0:
        return FrontTrajectory(t=np.array([0.0]), r=np.array([float(r0)]))

    def rhs(_, y):
        return [1.0 - (n - 1) / y[0]]

    def extinction(_, y):
        return y[0] - 1e-6

    extinction.terminal = True
    extinction.direction = -1
    sol = solve_ivp(
        rhs,
        (0.0, T),
        [r0],
        events=extinction,
        rtol=1e-10,
        atol=1e-12,
        dense_output=False,
    )
    extinct_at = float(sol.t_events[0][0]) if len(sol.t_events[0]) else None
    return FrontTrajectory(t=sol.t, r=sol.y[0], extinct_at=extinct_at)


def relaxed_limits(history: pd.DataFrame, window: float) -> pd.DataFrame:
    """Returns upper/lower limits of phi - ct over the trailing time window.

    Columns r, upper, lower, gap; the gap tends to 0 when phi - ct converges.
    """
    if history is None or history.empty:
        raise ValueError("history is empty")
    t_end = history["t"].max()
    recent = history[history["t"] >= t_end - window]
    grouped = recent.groupby("r", sort=True)["phi_minus_ct"]
    out = pd.DataFrame({"upper": grouped.max(), "lower": grouped.min()})
    out["gap"] = out["upper"] - out["lower"]
    return out.reset_index()
