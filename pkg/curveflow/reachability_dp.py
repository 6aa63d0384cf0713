"""Reachability distance d(r, s) and the asymptotic profile.

d(r, s) is the largest accumulated value of f~ - c over admissible curves
from s to r, where admissible means |gamma' + (n-1)/gamma| <= 1. Since
f~ - c <= 0 on r >= n-1 it is a shortest path problem on the radius
grid: crossing a cell costs (c - f~(midpoint)) dr / speed at the fastest
admissible speed (the slowest where the cost is negative, which only
happens below n-1 where motion is forced leftward). Rightward motion is
impossible from r <= n-1, so those starts never reach the outside and get
the -inf sentinel.
"""

import dataclasses
import logging
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from curveflow.errors import InconsistencyError
from curveflow.parallel import map_chunks
from curveflow.radial_hj import RadialGrid
from curveflow.source_model import (
    EquilibriumSet,
    SourceModel,
    asymptotic_speed,
    equilibrium_set,
)

logger = logging.getLogger(__name__)

# unreachable marker, distinct from any finite cost
REACH_NONE = -np.inf

Profile = Union[Callable[[np.ndarray], np.ndarray], np.ndarray, None]


def speed_range(r, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Returns admissible radial velocities [-1 - (n-1)/r, 1 - (n-1)/r]."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("speed_range needs r > 0")
    drift = (n - 1) / r
    v_min, v_max = -1.0 - drift, 1.0 - drift
    if v_min.ndim == 0:
        return float(v_min), float(v_max)
    return v_min, v_max


@dataclasses.dataclass
class DistanceTable:
    """d[target node, start column] with -inf for unreachable pairs."""

    grid: RadialGrid
    starts: np.ndarray
    d: np.ndarray
    c: float
    n: int

    @property
    def sources(self) -> np.ndarray:
        return self.grid.nodes[self.starts]

    @property
    def reachable(self) -> np.ndarray:
        return np.isfinite(self.d)

    @property
    def all_starts(self) -> bool:
        return len(self.starts) == self.grid.size and np.array_equal(
            self.starts, np.arange(self.grid.size)
        )

    def column(self, s: float) -> np.ndarray:
        node = self.grid.nearest(s)
        hits = np.nonzero(self.starts == node)[0]
        if len(hits) == 0:
            raise KeyError(f"no start column at r={s:g}")
        return self.d[:, hits[0]]

    def value(self, r: float, s: float) -> float:
        return float(self.column(s)[self.grid.nearest(r)])

    def to_frame(self) -> pd.DataFrame:
        nodes = self.grid.nodes
        targets, columns = np.meshgrid(
            np.arange(len(nodes)), np.arange(len(self.starts)), indexing="ij"
        )
        return pd.DataFrame(
            {
                "r": nodes[targets.ravel()],
                "s": self.sources[columns.ravel()],
                "d": self.d.ravel(),
            }
        )


def transition_costs(
    src: SourceModel, c: float, grid: RadialGrid
) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (rightward, leftward) costs of every cell, nan where no edge."""
    nodes = grid.nodes
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    n1 = src.n - 1
    gap = c - src.radial_profile(mid)
    gap = np.where(mid >= n1, np.maximum(gap, 0.0), gap)
    drift = n1 / mid

    right = np.full(mid.shape, np.nan)
    movable = (nodes[:-1] > n1) & (1.0 - drift > 0)
    right[movable] = gap[movable] * grid.dr / (1.0 - drift[movable])

    left_speed = np.where(gap >= 0, 1.0 + drift, drift - 1.0)
    left = gap * grid.dr / left_speed
    return right, left


def _graph(src: SourceModel, c: float, grid: RadialGrid) -> Tuple[csr_matrix, bool]:
    right, left = transition_costs(src, c, grid)
    idx = np.arange(grid.size - 1)
    has_right = np.isfinite(right)
    rows = np.concatenate([idx[has_right], idx + 1])
    cols = np.concatenate([idx[has_right] + 1, idx])
    weights = np.concatenate([right[has_right], left])
    # explicit zeros stay edges in the sparse representation
    graph = csr_matrix((weights, (rows, cols)), shape=(grid.size, grid.size))
    return graph, bool(np.any(weights < 0))


def _start_indices(
    starts: Union[str, Sequence[float]],
    grid: RadialGrid,
    equilibria: Optional[EquilibriumSet],
) -> np.ndarray:
    if isinstance(starts, str):
        if starts == "all":
            return np.arange(grid.size)
        if starts == "equilibria":
            indices = equilibria.node_indices(grid.nodes)
            if len(indices) == 0:
                raise InconsistencyError("no grid node lies in the equilibrium set")
            return indices
        raise ValueError(f"starts must be 'all', 'equilibria' or radii, got {starts!r}")
    return np.array(sorted({grid.nearest(float(s)) for s in starts}), dtype=int)


def compute_d(
    src: SourceModel,
    c: Optional[float],
    grid: RadialGrid,
    starts: Union[str, Sequence[float]] = "equilibria",
    tol: float = 1e-3,
    equilibria: Optional[EquilibriumSet] = None,
    threads: Optional[int] = 1,
) -> DistanceTable:
    """Returns d(r, s) for every node r and every start s.

    Args:
        src: radial source.
        c: asymptotic speed, computed when None.
        grid: radius grid.
        starts: "equilibria" (nodes of the equilibrium set), "all", or radii.
        tol: equilibrium detection tolerance.
        equilibria: precomputed equilibrium set.
        threads: worker count, columns are split in contiguous chunks.
    """
    if c is None:
        c = asymptotic_speed(src, tol=tol).c
    if equilibria is None and starts == "equilibria":
        equilibria = equilibrium_set(src, c, tol)
    indices = _start_indices(starts, grid, equilibria)
    graph, negative = _graph(src, c, grid)
    method = "J" if negative else "D"

    def solve(chunk):
        dist = shortest_path(graph, method=method, directed=True, indices=np.asarray(chunk))
        return list(dist)

    rows = map_chunks(solve, indices, threads=threads)
    dist = np.array(rows).T
    d = np.where(dist == 0, 0.0, -dist)
    # no admissible curve returns to a start below n - 1
    inner = grid.nodes[indices] < src.n - 1
    d[indices[inner], np.nonzero(inner)[0]] = -np.inf
    logger.info(
        "compute_d %s: %d nodes, %d starts, method %s, %d unreachable pairs",
        src.name,
        grid.size,
        len(indices),
        method,
        int(np.sum(~np.isfinite(d))),
    )
    return DistanceTable(grid=grid, starts=indices, d=d, c=c, n=src.n)


def _on_grid(profile: Profile, nodes: np.ndarray) -> np.ndarray:
    if profile is None:
        return np.zeros_like(nodes)
    if callable(profile):
        return np.broadcast_to(np.asarray(profile(nodes), dtype=float), nodes.shape).copy()
    values = np.asarray(profile, dtype=float)
    if values.shape != nodes.shape:
        raise ValueError(f"profile has shape {values.shape}, grid has {nodes.shape}")
    return values


def compute_v0(src: SourceModel, u0: Profile, table: DistanceTable) -> np.ndarray:
    """Returns v0(r) = max over rho of d(r, rho) + u0(rho)."""
    if not table.all_starts:
        raise ValueError("compute_v0 needs a table with every node as a start")
    u0 = _on_grid(u0, table.grid.nodes)
    return np.max(table.d + u0[None, :], axis=1)


@dataclasses.dataclass
class ProfileResult:
    grid: RadialGrid
    v0: np.ndarray
    psi_inf: np.ndarray
    equilibria: EquilibriumSet
    argmax_map: np.ndarray
    table: DistanceTable
    c: float

    def as_series(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.grid.nodes, self.psi_inf

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "r": self.grid.nodes,
                "v0": self.v0,
                "psi_inf": self.psi_inf,
                "argmax_s": self.argmax_map,
            }
        )


def compute_psi_inf(
    src: SourceModel,
    u0: Profile = None,
    grid: Optional[RadialGrid] = None,
    tol: float = 1e-3,
    table: Optional[DistanceTable] = None,
    threads: Optional[int] = 1,
) -> ProfileResult:
    """Returns psi_inf(r) = max over s in the equilibrium set of d(r, s) + v0(s).

    Ties go to the smallest s.
    """
    grid = grid or RadialGrid(r_max=30.0, dr=0.05)
    c = table.c if table is not None else asymptotic_speed(src, tol=tol).c
    equilibria = equilibrium_set(src, c, tol)
    if table is None:
        table = compute_d(src, c, grid, starts="all", tol=tol, threads=threads)
    grid = table.grid
    v0 = compute_v0(src, u0, table)
    eq_nodes = equilibria.node_indices(grid.nodes)
    if len(eq_nodes) == 0:
        raise InconsistencyError("no grid node lies in the equilibrium set")
    candidates = table.d[:, eq_nodes] + v0[eq_nodes][None, :]
    best = np.argmax(candidates, axis=1)
    psi_inf = candidates[np.arange(grid.size), best]
    argmax_map = np.where(np.isfinite(psi_inf), grid.nodes[eq_nodes][best], np.nan)
    return ProfileResult(
        grid=grid,
        v0=v0,
        psi_inf=psi_inf,
        equilibria=equilibria,
        argmax_map=argmax_map,
        table=table,
        c=c,
    )


@dataclasses.dataclass
class EnvelopeData:
    w0_plus: np.ndarray
    w0_minus: np.ndarray
    v0_plus: np.ndarray
    v0_minus: np.ndarray
    matched_on_A: bool
    mismatch: float


def envelope_profiles(
    u0_radial: Profile,
    perturbation: Callable[[np.ndarray, np.ndarray], np.ndarray],
    src: SourceModel,
    table: DistanceTable,
    n_angles: int = 360,
    tol: float = 1e-6,
    eq_tol: float = 1e-3,
    threads: Optional[int] = 1,
) -> EnvelopeData:
    """Compares the initial values built from the angular envelopes of u0.

    For u0(x) = u0~(|x|) + phi(x), w0+ and w0- add the angular max and min
    of phi to u0~; the large time limit is radial when their values v0+
    and v0- agree on the equilibrium set.
    """
    nodes = table.grid.nodes
    theta = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
    cos, sin = np.cos(theta), np.sin(theta)

    def sample(radii):
        radii = np.asarray(radii)[:, None]
        values = np.asarray(perturbation(radii * cos, radii * sin), dtype=float)
        values = np.broadcast_to(values, (radii.shape[0], n_angles))
        return list(zip(values.max(axis=1), values.min(axis=1)))

    pairs = map_chunks(sample, nodes, threads=threads)
    upper = np.array([p[0] for p in pairs])
    lower = np.array([p[1] for p in pairs])
    base = _on_grid(u0_radial, nodes)
    w0_plus, w0_minus = base + upper, base + lower
    v0_plus = compute_v0(src, w0_plus, table)
    v0_minus = compute_v0(src, w0_minus, table)
    eq_nodes = equilibrium_set(src, table.c, eq_tol).node_indices(nodes)
    mismatch = float(np.max(np.abs(v0_plus[eq_nodes] - v0_minus[eq_nodes])))
    return EnvelopeData(
        w0_plus=w0_plus,
        w0_minus=w0_minus,
        v0_plus=v0_plus,
        v0_minus=v0_minus,
        matched_on_A=mismatch <= tol,
        mismatch=mismatch,
    )


def brute_force_d(
    src: SourceModel,
    c: float,
    r: float,
    s: float,
    T: float = 10.0,
    h: float = 0.05,
    K: int = 41,
    bin_width: Optional[float] = None,
) -> float:
    """Returns d(r, s) by enumerating discrete admissible trajectories.

    All control sequences gamma_{k+1} = gamma_k + h (a_k - (n-1)/gamma_k)
    with a_k in K points of [-1, 1] are expanded up to the horizon T. Of
    the trajectories ending in the same radius bin only the best one is
    kept (its exact radius is preserved). The value is the best left point
    sum of h (f~ - c) over trajectories ending within half a bin of r.
    """
    if r <= 0 or s <= 0:
        raise ValueError("brute_force_d needs positive radii")
    q = bin_width or h / 10.0
    n1 = src.n - 1
    controls = np.linspace(-1.0, 1.0, K)
    radii = np.array([float(s)])
    values = np.array([0.0])
    best = 0.0 if abs(s - r) <= 0.5 * q and s >= n1 else REACH_NONE
    for _ in range(int(round(T / h))):
        gain = h * (src.radial_profile(radii) - c)
        new_r = (radii[:, None] + h * (controls[None, :] - n1 / radii[:, None])).ravel()
        new_v = (values + gain)[:, None].repeat(K, axis=1).ravel()
        keep = new_r > 0
        new_r, new_v = new_r[keep], new_v[keep]
        bins = np.round(new_r / q).astype(np.int64)
        order = np.lexsort((-new_v, bins))
        bins, new_r, new_v = bins[order], new_r[order], new_v[order]
        first = np.concatenate([[True], bins[1:] != bins[:-1]])
        radii, values = new_r[first], new_v[first]
        hits = np.abs(radii - r) <= 0.5 * q
        if np.any(hits):
            best = max(best, float(values[hits].max()))
    return best
