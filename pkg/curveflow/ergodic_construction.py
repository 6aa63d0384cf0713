"""Explicit radial solutions of the ergodic problem.

With h = f~ - c the stationary radial equation reads

    -(n-1)/r psi_r - |psi_r| = h(r).

Since h <= 0 on r >= n-1 it is solved branch by branch:

    decreasing branch  psi_r = r h / (r - (n-1))   (psi_r <= 0)
    increasing branch  psi_r = -r h / (r + (n-1))  (psi_r >= 0)

Inside (0, n-1) the sign of h decides: h < 0 (set A) takes the increasing
branch, h = 0 (set B) gives psi_r = 0, h > 0 (set C) the decreasing one.
"""

import dataclasses
import logging
from typing import Any, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid

from curveflow.errors import UniquenessError
from curveflow.source_model import (
    EquilibriumSet,
    SourceModel,
    angular_envelopes,
    asymptotic_speed,
    equilibrium_set,
)

logger = logging.getLogger(__name__)

TAGS = ("A", "B", "C", "outer")


def excess(src: SourceModel, c: float, r: np.ndarray) -> np.ndarray:
    """Returns h = f~ - c, clipped to <= 0 on r >= n-1 where c is the max."""
    r = np.asarray(r, dtype=float)
    h = src.radial_profile(r) - c
    outer = r >= src.n - 1
    h[outer] = np.minimum(h[outer], 0.0)
    return h


@dataclasses.dataclass
class ErgodicProfile:
    """Radial profile psi on the grid r = 0, dr, 2dr, ..."""

    r: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    h: np.ndarray
    tags: np.ndarray
    corner_radii: Tuple[float, ...]
    c: float
    n: int
    lipschitz_bound: float
    equilibria: EquilibriumSet

    @property
    def dr(self) -> float:
        return float(self.r[1] - self.r[0])

    def as_series(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.r, self.psi

    def at(self, r) -> np.ndarray:
        return np.interp(r, self.r, self.psi)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"r": self.r, "psi": self.psi, "dpsi": self.dpsi, "tag": self.tags}
        )


def _branches(src: SourceModel, c: float, r: np.ndarray, h: np.ndarray, dr: float):
    n1 = src.n - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        decreasing = r * h / (r - n1)
    increasing = -r * h / (r + n1)
    at_n1 = np.isclose(r, n1, rtol=0.0, atol=1e-9 * dr)
    if np.any(at_n1):
        # one sided limit (n-1) h'(n-1)
        ends = excess(src, c, np.array([float(n1), n1 + dr]))
        decreasing[at_n1] = n1 * (ends[1] - ends[0]) / dr
    return decreasing, increasing, at_n1


def _inner_tags(h: np.ndarray, inner: np.ndarray, eq_tol: float) -> np.ndarray:
    tags = np.full(h.shape, "outer", dtype=object)
    tags[inner & (h < -eq_tol)] = "A"
    tags[inner & (np.abs(h) <= eq_tol)] = "B"
    tags[inner & (h > eq_tol)] = "C"
    return tags


def _component_of(equilibria: EquilibriumSet, radius: float, slack: float) -> int:
    for k, (lo, hi) in enumerate(equilibria.intervals):
        if lo - slack <= radius <= hi + slack:
            return k
    return -1


def build_psi(
    src: SourceModel,
    c: Optional[float] = None,
    r_max: float = 30.0,
    dr: float = 0.05,
    tol: float = 1e-3,
    anchors: Optional[Mapping[float, float]] = None,
    equilibria: Optional[EquilibriumSet] = None,
) -> ErgodicProfile:
    """Returns an explicit solution psi of the radial ergodic equation.

    Without anchors this is the canonical profile: increasing branch on
    [n-1, r0), decreasing branch past r0 = min of the equilibrium set, and
    psi(0) = 0.

    With anchors (radius -> value, one per equilibrium component) psi takes
    the given values on the equilibrium set. Between consecutive components
    it follows the decreasing branch out of the left one and the increasing
    branch into the right one, switching at the corner where they meet.

    Args:
        src: radial source.
        c: asymptotic speed, computed from src when omitted.
        r_max: outer end of the grid.
        dr: grid spacing.
        tol: equilibrium detection tolerance.
        anchors: prescribed values on the equilibrium set.
        equilibria: precomputed equilibrium set.
    """
    if c is None:
        c = asymptotic_speed(src, tol=tol).c
    if equilibria is None:
        equilibria = equilibrium_set(src, c, tol)
    n1 = src.n - 1
    N = int(round(r_max / dr))
    r = dr * np.arange(N + 1)
    h = excess(src, c, r)
    eq_tol = 1e-12 * max(1.0, c)
    decreasing, increasing, at_n1 = _branches(src, c, r, h, dr)

    inner = (r < n1) & ~at_n1
    tags = _inner_tags(h, inner, eq_tol)
    dpsi = np.zeros_like(r)
    dpsi[tags == "A"] = increasing[tags == "A"]
    dpsi[tags == "C"] = decreasing[tags == "C"]
    outer = ~inner
    corners: List[float] = []

    if anchors is None:
        r0 = equilibria.r0
        r0_at_n1 = abs(r0 - n1) <= equilibria.spacing
        before = outer & (r < r0) & ~(at_n1 & r0_at_n1)
        dpsi[before] = increasing[before]
        dpsi[outer & ~before] = decreasing[outer & ~before]
        psi = cumulative_trapezoid(dpsi, r, initial=0.0)
    else:
        psi = _anchored(
            r, dpsi, decreasing, increasing, outer, equilibria, anchors, corners
        )

    logger.debug(
        "build_psi %s: c=%.6g r0=%.6g corners=%s", src.name, c, equilibria.r0, corners
    )
    return ErgodicProfile(
        r=r,
        psi=psi,
        dpsi=dpsi,
        h=h,
        tags=tags,
        corner_radii=tuple(corners),
        c=c,
        n=src.n,
        lipschitz_bound=src.lipschitz_bound,
        equilibria=equilibria,
    )


def _integrate_forward(start_value, dpsi, dr):
    steps = 0.5 * (dpsi[1:] + dpsi[:-1]) * dr
    return start_value + np.concatenate([[0.0], np.cumsum(steps)])


def _integrate_backward(end_value, dpsi, dr):
    steps = 0.5 * (dpsi[1:] + dpsi[:-1]) * dr
    return end_value - np.concatenate([np.cumsum(steps[::-1])[::-1], [0.0]])


def _anchored(r, dpsi, decreasing, increasing, outer, equilibria, anchors, corners):
    dr = float(r[1] - r[0])
    half = 0.5 * dr * (1 + 1e-9)
    values: List[Optional[float]] = [None] * len(equilibria.intervals)
    for radius, value in anchors.items():
        k = _component_of(equilibria, float(radius), max(half, equilibria.spacing))
        if k < 0:
            raise UniquenessError(f"anchor radius {radius} is not in the equilibrium set")
        values[k] = float(value)
    if any(v is None for v in values):
        raise UniquenessError("every equilibrium component needs an anchor value")

    psi = np.full_like(r, np.nan)
    first_outer = int(np.nonzero(outer)[0][0])
    spans = []
    for (lo, hi), value in zip(equilibria.intervals, values):
        members = np.nonzero(outer & (r >= lo - half) & (r <= hi + half))[0]
        if len(members) == 0:
            members = np.array([int(np.argmin(np.abs(r - 0.5 * (lo + hi))))])
        spans.append((int(members[0]), int(members[-1])))
        psi[members[0] : members[-1] + 1] = value
        dpsi[members[0] : members[-1] + 1] = decreasing[members[0] : members[-1] + 1]

    # [n-1, first component): increasing branch into it
    a0 = spans[0][0]
    if a0 > first_outer:
        seg = slice(first_outer, a0 + 1)
        dpsi[first_outer:a0] = increasing[first_outer:a0]
        psi[seg] = _integrate_backward(values[0], increasing[seg], dr)

    for k in range(len(spans) - 1):
        b, a = spans[k][1], spans[k + 1][0]
        seg = slice(b, a + 1)
        left = _integrate_forward(values[k], decreasing[seg], dr)
        right = _integrate_backward(values[k + 1], increasing[seg], dr)
        slack = 1e-9 * (1.0 + abs(values[k]) + abs(values[k + 1]))
        if left[-1] > values[k + 1] + slack or right[0] > values[k] + slack:
            raise UniquenessError(
                f"anchors {values[k]:.6g} at r={r[b]:.6g} and {values[k + 1]:.6g} at "
                f"r={r[a]:.6g} are not attainable"
            )
        use_left = left >= right
        psi[seg] = np.maximum(left, right)
        inside = np.arange(b + 1, a)
        dpsi[inside] = np.where(
            use_left[1:-1], decreasing[inside], increasing[inside]
        )
        switch = np.nonzero(use_left[:-1] & ~use_left[1:])[0]
        if len(switch):
            i = int(switch[0])
            gap0 = left[i] - right[i]
            gap1 = left[i + 1] - right[i + 1]
            corners.append(float(r[b + i] + dr * gap0 / (gap0 - gap1)))

    # past the last component: decreasing branch
    last = spans[-1][1]
    seg = slice(last, len(r))
    dpsi[last:] = decreasing[last:]
    psi[seg] = _integrate_forward(values[-1], decreasing[seg], dr)

    # inside (0, n-1): integrate the A/B/C slopes back to the origin
    seg = slice(0, first_outer + 1)
    psi[seg] = _integrate_backward(psi[first_outer], dpsi[seg], dr)
    return psi


def residual(profile: ErgodicProfile, src: SourceModel, c: float) -> float:
    """Returns max |-(n-1)/r psi_r - |psi_r| - h| over interior nodes.

    Nodes within one cell of a corner or of an A/B/C interface are skipped.
    """
    r = profile.r
    dpsi = profile.dpsi
    h = excess(src, c, r)
    n1 = src.n - 1
    dr = profile.dr
    interior = np.zeros(r.shape, dtype=bool)
    interior[1:-1] = True
    for corner in profile.corner_radii:
        interior &= np.abs(r - corner) > dr * (1 + 1e-9)
    tags = profile.tags
    change = np.nonzero(tags[1:] != tags[:-1])[0]
    for i in change:
        if "outer" in (tags[i], tags[i + 1]):
            continue
        interior[max(i - 1, 0) : i + 3] = False
    if not np.any(interior):
        return 0.0
    rr, p = r[interior], dpsi[interior]
    res = np.abs(-n1 / rr * p - np.abs(p) - h[interior])
    return float(res.max())


def growth_rate(profile: ErgodicProfile, fraction: float = 0.2) -> float:
    """Returns the least squares slope of psi over the outer fraction of the grid."""
    r = profile.r
    outer = r >= r[-1] * (1.0 - fraction)
    slope, _ = np.polyfit(r[outer], profile.psi[outer], 1)
    return float(slope)


@dataclasses.dataclass
class CornerReport:
    corners_from_above: List[float]
    corners_from_below: List[float]
    violations: List[Tuple[float, str]]

    @property
    def ok(self) -> bool:
        return not self.violations


def corner_audit(profile: ErgodicProfile, threshold: Optional[float] = None) -> CornerReport:
    """Locates kinks of psi and checks the corner structure.

    A kink is a sign change of psi_r with a jump above threshold (default
    10 dr times the Lipschitz bound of f). Corners from above inside
    {h < 0} are violations, and so is more than one corner from below in a
    gap between consecutive equilibrium components, or any past the last one.
    """
    dpsi, r, h = profile.dpsi, profile.r, profile.h
    dr = profile.dr
    if threshold is None:
        threshold = 10.0 * dr * profile.lipschitz_bound
    above: List[float] = []
    below: List[float] = []
    violations: List[Tuple[float, str]] = []
    n1 = profile.n - 1
    intervals = profile.equilibria.intervals
    per_gap = {}
    jumps = np.diff(dpsi)
    candidates = np.nonzero((np.abs(jumps) > threshold) & (dpsi[:-1] * dpsi[1:] < 0))[0]
    for i in candidates:
        radius = float(r[i] + dr * dpsi[i] / (dpsi[i] - dpsi[i + 1]))
        if dpsi[i] > 0:
            above.append(radius)
            if h[i] < 0 and h[i + 1] < 0:
                violations.append((radius, "corner from above where h < 0"))
            continue
        below.append(radius)
        if radius < n1:
            continue
        gap = sum(1 for lo, hi in intervals if hi < radius)
        if gap == 0:
            continue
        if gap == len(intervals):
            violations.append((radius, "corner from below past the equilibrium set"))
            continue
        per_gap[gap] = per_gap.get(gap, 0) + 1
        if per_gap[gap] > 1:
            violations.append((radius, "second corner from below between equilibria"))
    return CornerReport(
        corners_from_above=above, corners_from_below=below, violations=violations
    )


def _series(profile: Any) -> Tuple[np.ndarray, np.ndarray]:
    if hasattr(profile, "as_series"):
        return profile.as_series()
    r, values = profile
    return np.asarray(r, dtype=float), np.asarray(values, dtype=float)


def uniqueness_check(
    profile1: Any,
    profile2: Any,
    equilibria: EquilibriumSet,
    tol: float = 0.05,
    r_range: Optional[Tuple[float, float]] = None,
) -> float:
    """Returns sup |psi1 - psi2 - shift| after matching at the first equilibrium.

    Profiles are ErgodicProfile, ProfileResult or (r, values) pairs. Raises
    UniquenessError when, after the shift, they differ by more than tol at
    any point of the equilibrium set.
    """
    r1, v1 = _series(profile1)
    r2, v2 = _series(profile2)
    lo = max(r1.min(), r2.min())
    hi = min(r1.max(), r2.max())
    if r_range is not None:
        lo, hi = max(lo, r_range[0]), min(hi, r_range[1])
    finite2 = np.isfinite(v2)

    def second(r):
        return np.interp(r, r2[finite2], v2[finite2])

    def first(r):
        return np.interp(r, r1, v1)

    points = [p for p in equilibria.points() if r1.min() <= p <= r1.max()]
    points = [p for p in points if r2[finite2].min() <= p <= r2[finite2].max()]
    if not points:
        raise UniquenessError("no equilibrium point lies on both grids")
    shift = float(first(points[0]) - second(points[0]))
    for p in points[1:]:
        gap = abs(float(first(p) - second(p)) - shift)
        if gap > tol:
            raise UniquenessError(
                f"profiles differ by {gap:.4g} at equilibrium r={p:.6g} after matching "
                f"at r={points[0]:.6g}"
            )
    mask = (r1 >= lo) & (r1 <= hi)
    diff = np.abs(v1[mask] - second(r1[mask]) - shift)
    return float(diff.max()) if diff.size else 0.0


@dataclasses.dataclass
class EnvelopeSolutions:
    """Profiles built from the upper and lower angular envelopes of f."""

    upper: ErgodicProfile
    lower: ErgodicProfile
    c: float
    a: float
    b: float


def envelope_solutions(
    src: SourceModel,
    c: Optional[float] = None,
    r_max: float = 30.0,
    dr: float = 0.05,
    tol: float = 1e-3,
    n_angles: int = 720,
    threads: Optional[int] = 1,
) -> EnvelopeSolutions:
    """Returns the canonical profiles of the upper and lower envelope sources.

    Both share the speed c = max f and vanish at the origin; every profile
    of the planar problem lies between them up to normalization.
    """
    r_samples = dr * np.arange(int(round(max(r_max, src.R + 2 * dr) / dr)) + 1)
    envelopes = angular_envelopes(
        src, r_samples, n_angles=n_angles, c=c, threads=threads
    )
    upper_src = envelopes.upper_source()
    lower_src = envelopes.lower_source()
    if c is None:
        c = asymptotic_speed(upper_src, tol=tol).c
    upper = build_psi(upper_src, c, r_max=r_max, dr=dr, tol=tol)
    lower = build_psi(lower_src, c, r_max=r_max, dr=dr, tol=tol)
    return EnvelopeSolutions(upper=upper, lower=lower, c=c, a=envelopes.a, b=envelopes.b)
