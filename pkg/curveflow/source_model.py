"""Source terms f and their radial profiles.

A SourceModel is either radial, f(x) = f~(|x|), evaluated on radii, or
planar, evaluated on (x1, x2). Both are nonnegative, Lipschitz and vanish
outside the ball of radius R.
"""

import dataclasses
import logging
import math
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from curveflow.errors import InconsistencyError, SourceError
from curveflow.parallel import map_chunks

logger = logging.getLogger(__name__)

KINDS = ("radial", "planar")

# detection grid for equilibrium sets, shared by every tolerance
EQUILIBRIUM_SPACING = 1e-3

# hard cap on dense sampling grids
MAX_SAMPLES = 2_000_001


def cubic_cutoff(s):
    """C1 cutoff: 1 at s <= 0, 0 at s >= 1, 1 - 3s^2 + 2s^3 in between."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return 1.0 - 3.0 * s ** 2 + 2.0 * s ** 3


@dataclasses.dataclass(frozen=True)
class SourceModel:
    """Source term f.

    Args:
        kind: "radial" or "planar".
        n: space dimension.
        R: support radius, f = 0 for |x| >= R.
        func: f~(r) for radial kind, f(x1, x2) for planar kind (vectorized).
        lipschitz_bound: Lipschitz constant of f.
        name: label used in artifact names.
    """

    kind: str
    n: int
    R: float
    func: Callable[..., np.ndarray] = dataclasses.field(compare=False, repr=False)
    lipschitz_bound: float
    name: str = "custom"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SourceError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if int(self.n) != self.n or self.n < 2:
            raise SourceError(f"dimension n must be an integer >= 2, got {self.n}")
        if not self.R > 0:
            raise SourceError(f"support radius R must be positive, got {self.R}")
        if not self.lipschitz_bound >= 0:
            raise SourceError(
                f"lipschitz_bound must be nonnegative, got {self.lipschitz_bound}"
            )

    def eval(self, *coords) -> np.ndarray:
        coords = [np.asarray(c, dtype=float) for c in coords]
        if self.kind == "radial":
            if len(coords) != 1:
                raise SourceError("radial source takes a single radius argument")
            return np.asarray(self.func(coords[0]), dtype=float)
        if len(coords) != 2:
            raise SourceError("planar source takes (x1, x2)")
        return np.asarray(self.func(coords[0], coords[1]), dtype=float)

    def radial_profile(self, r) -> np.ndarray:
        if self.kind != "radial":
            raise SourceError(
                f"{self.name}: planar source has no radial profile, use angular_envelopes"
            )
        return self.eval(r)

    def planar_values(self, x1, x2) -> np.ndarray:
        if self.kind == "radial":
            return self.eval(np.hypot(x1, x2))
        return self.eval(x1, x2)

    def scaled(self, lam: float) -> "SourceModel":
        if not lam > 0:
            raise SourceError(f"scale factor must be positive, got {lam}")
        func = self.func
        return dataclasses.replace(
            self,
            func=lambda *coords: lam * np.asarray(func(*coords), dtype=float),
            lipschitz_bound=lam * self.lipschitz_bound,
            name=f"{self.name}_x{lam:g}",
        )

    def shifted(self, offset: Tuple[float, float]) -> "SourceModel":
        """Returns the planar source x -> f(x - offset)."""
        o1, o2 = float(offset[0]), float(offset[1])
        values = self.planar_values
        return SourceModel(
            kind="planar",
            n=self.n,
            R=self.R + math.hypot(o1, o2),
            func=lambda x1, x2: values(np.asarray(x1) - o1, np.asarray(x2) - o2),
            lipschitz_bound=self.lipschitz_bound,
            name=f"{self.name}_shift",
        )

    def validate(self, samples: int = 4001) -> "SourceModel":
        """Checks nonnegativity, support and the Lipschitz bound on samples."""
        slack = 1e-9 * max(1.0, self.lipschitz_bound) + 1e-12
        if self.kind == "radial":
            r = np.linspace(0.0, 2.0 * self.R, samples)
            values = self.eval(r)
            steps = [np.abs(np.diff(values)) / (r[1] - r[0])]
            outside = r >= self.R
        else:
            x = np.linspace(-2.0 * self.R, 2.0 * self.R, min(samples, 401))
            X1, X2 = np.meshgrid(x, x, indexing="ij")
            values = self.eval(X1, X2)
            dx = x[1] - x[0]
            steps = [
                np.abs(np.diff(values, axis=0)) / dx,
                np.abs(np.diff(values, axis=1)) / dx,
            ]
            outside = np.hypot(X1, X2) >= self.R
        if not np.all(np.isfinite(values)):
            raise SourceError(f"{self.name}: source has non finite values")
        if values.min() < -1e-14:
            raise SourceError(f"{self.name}: source is negative ({values.min():.3g})")
        if np.any(np.abs(values[outside]) > 1e-12):
            raise SourceError(f"{self.name}: source does not vanish outside R={self.R}")
        quotient = max(float(s.max()) for s in steps)
        if quotient > self.lipschitz_bound + slack:
            raise SourceError(
                f"{self.name}: difference quotient {quotient:.6g} exceeds "
                f"lipschitz_bound {self.lipschitz_bound:.6g}"
            )
        return self


# presets


def tent(
    center: float = 2.0, height: float = 1.0, width: float = 1.0, n: int = 2
) -> SourceModel:
    """Returns f~(r) = height * max(0, 1 - |r - center| / width)."""

    def func(r):
        return height * np.maximum(0.0, 1.0 - np.abs(r - center) / width)

    return SourceModel(
        kind="radial",
        n=n,
        R=center + width,
        func=func,
        lipschitz_bound=height / width,
        name=f"tent{center:g}",
    )


def bump(
    center: float = 2.0, height: float = 1.0, width: float = 1.0, n: int = 2
) -> SourceModel:
    """Returns the C1 bump height * cutoff(|r - center| / width)."""

    def func(r):
        return height * cubic_cutoff(np.abs(r - center) / width)

    return SourceModel(
        kind="radial",
        n=n,
        R=center + width,
        func=func,
        lipschitz_bound=1.5 * height / width,
        name=f"bump{center:g}",
    )


def multi_bump(bumps: Sequence[Mapping[str, Any]], n: int = 2) -> SourceModel:
    """Returns the sum of tents or bumps.

    Args:
        bumps: mappings with center, height, width and optional shape
            ("tent" or "bump", default "tent").
        n: space dimension.
    """
    if len(bumps) == 0:
        raise SourceError("multi_bump needs at least one bump")
    parts = []
    for spec in bumps:
        spec = dict(spec)
        shape = spec.pop("shape", "tent")
        if shape not in ("tent", "bump"):
            raise SourceError(f"unknown bump shape {shape!r}")
        parts.append((tent if shape == "tent" else bump)(n=n, **spec))

    def func(r):
        return sum(part.func(r) for part in parts)

    return SourceModel(
        kind="radial",
        n=n,
        R=max(part.R for part in parts),
        func=func,
        lipschitz_bound=sum(part.lipschitz_bound for part in parts),
        name="multi_" + "_".join(part.name for part in parts),
    )


def zero(n: int = 2, R: float = 1.0) -> SourceModel:
    return SourceModel(
        kind="radial",
        n=n,
        R=R,
        func=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        lipschitz_bound=0.0,
        name="zero",
    )


def stadium_distance(x1, x2, a: float = 1.0) -> np.ndarray:
    """Distance to the stadium, the union of unit disks centered on [-a, a] x {0}."""
    segment = np.hypot(np.maximum(np.abs(x1) - a, 0.0), x2)
    return np.maximum(segment - 1.0, 0.0)


def stadium_plateau(
    a: float = 1.0, c: float = 1.0, width: float = 0.5, n: int = 2
) -> SourceModel:
    """Returns the planar f = c * cutoff(dist(x, U) / width) on the stadium U."""

    def func(x1, x2):
        return c * cubic_cutoff(stadium_distance(x1, x2, a) / width)

    return SourceModel(
        kind="planar",
        n=n,
        R=a + 1.0 + width,
        func=func,
        lipschitz_bound=1.5 * c / width,
        name=f"stadium{a:g}",
    )


def radial_planar(src: SourceModel) -> SourceModel:
    """Returns the planar lift x -> f~(|x|) of a radial source."""
    if src.kind != "radial":
        raise SourceError("radial_planar expects a radial source")
    profile = src.func
    return dataclasses.replace(
        src,
        kind="planar",
        func=lambda x1, x2: profile(np.hypot(x1, x2)),
        name=f"{src.name}_planar",
    )


def from_table(
    r: Sequence[float], values: Sequence[float], n: int = 2, name: str = "table"
) -> SourceModel:
    """Returns the radial source interpolating sampled (r, value) pairs.

    The profile is linear between samples, constant before the first one
    and zero after the last one, which must therefore be 0.
    """
    r = np.asarray(r, dtype=float)
    values = np.asarray(values, dtype=float)
    if r.ndim != 1 or r.shape != values.shape or len(r) < 2:
        raise SourceError("table needs matching 1D radius and value arrays of length >= 2")
    if np.any(np.diff(r) <= 0) or r[0] < 0:
        raise SourceError("table radii must be nonnegative and strictly increasing")
    if values.min() < 0:
        raise SourceError("table values must be nonnegative")
    if values[-1] != 0:
        raise SourceError("table must end with a zero value")
    positive = np.nonzero(values > 0)[0]
    R = float(r[positive[-1] + 1]) if len(positive) else float(r[-1])
    lipschitz = float(np.max(np.abs(np.diff(values) / np.diff(r))))

    def func(radius):
        return np.interp(radius, r, values, left=values[0], right=0.0)

    return SourceModel(
        kind="radial", n=n, R=R, func=func, lipschitz_bound=lipschitz, name=name
    )


PRESETS: Dict[str, Callable[..., SourceModel]] = {
    "tent": tent,
    "bump": bump,
    "multi_bump": multi_bump,
    "zero": zero,
    "stadium_plateau": stadium_plateau,
}


def from_config(cfg: Any) -> SourceModel:
    """Returns the validated source described by a SourceConfig or mapping.

    Keys: kind, n, R, preset with params, or table of (r, value) pairs.
    """
    get = cfg.get if isinstance(cfg, Mapping) else lambda key, default=None: getattr(
        cfg, key, default
    )
    kind = get("kind", "radial")
    n = int(get("n", 2))
    table = get("table")
    if table:
        pairs = np.asarray(table, dtype=float)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise SourceError("table must be a list of (r, value) pairs")
        src = from_table(pairs[:, 0], pairs[:, 1], n=n)
    else:
        preset = get("preset")
        if preset not in PRESETS:
            raise SourceError(f"unknown preset {preset!r}, choose from {sorted(PRESETS)}")
        params = dict(get("params") or {})
        src = PRESETS[preset](n=n, **params)
    if kind == "planar" and src.kind == "radial":
        src = radial_planar(src)
    elif kind == "radial" and src.kind == "planar":
        raise SourceError(f"preset {src.name} is planar but kind is radial")
    R = get("R")
    if R is not None:
        src = dataclasses.replace(src, R=float(R))
    return src.validate()


# speed and equilibria


@dataclasses.dataclass(frozen=True)
class SpeedReport:
    c: float
    argmax_radii: Tuple[float, ...]
    tol: float


@dataclasses.dataclass(frozen=True)
class EquilibriumSet:
    """Merged intervals of {r >= n-1 : |f~(r) - c| <= tol}."""

    intervals: Tuple[Tuple[float, float], ...]
    tol: float
    spacing: float

    @property
    def r0(self) -> float:
        return self.intervals[0][0]

    @property
    def M(self) -> float:
        return self.intervals[-1][1]

    def contains(self, r, slack: float = 0.0) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        inside = np.zeros(r.shape, dtype=bool)
        for lo, hi in self.intervals:
            inside |= (r >= lo - slack) & (r <= hi + slack)
        return inside

    def node_indices(self, nodes: np.ndarray) -> np.ndarray:
        """Returns sorted indices of nodes within half a cell of the set.

        Every interval contributes at least its nearest node.
        """
        nodes = np.asarray(nodes, dtype=float)
        half = 0.5 * float(nodes[1] - nodes[0]) * (1 + 1e-9)
        picked = set(np.nonzero(self.contains(nodes, slack=half))[0].tolist())
        for lo, hi in self.intervals:
            if not np.isfinite(hi):
                hi = lo
            mid = 0.5 * (lo + hi)
            nearest = int(np.argmin(np.abs(nodes - mid)))
            if abs(nodes[nearest] - mid) <= 0.5 * (hi - lo) + half:
                picked.add(nearest)
        return np.array(sorted(picked), dtype=int)

    def points(self) -> List[float]:
        """Representative radii: endpoints and midpoints of finite intervals."""
        out = []
        for lo, hi in self.intervals:
            if not np.isfinite(hi):
                out.append(lo)
            elif hi - lo <= self.spacing:
                out.append(0.5 * (lo + hi))
            else:
                out.extend([lo, 0.5 * (lo + hi), hi])
        return out


def _radial_sampler(src: SourceModel, n_angles: int = 720) -> Callable:
    if src.kind == "radial":
        return src.radial_profile

    def upper(r):
        return angular_envelopes(src, np.atleast_1d(r), n_angles=n_angles).upper

    return upper


def _dense_radii(lo: float, hi: float, spacing: float) -> np.ndarray:
    m = int(math.ceil((hi - lo) / spacing)) + 1
    if m > MAX_SAMPLES:
        raise SourceError(
            f"sampling [{lo:g}, {hi:g}] at spacing {spacing:.3g} needs {m} points"
        )
    return np.linspace(lo, hi, max(m, 2))


def asymptotic_speed(src: SourceModel, tol: float = 1e-3) -> SpeedReport:
    """Returns c = max of the radial profile over r >= n - 1.

    Planar sources use their upper angular envelope. The sampling spacing
    is tol / lipschitz_bound, so the sampled max is within tol of the true one.
    """
    if not tol > 0:
        raise SourceError(f"tol must be positive, got {tol}")
    lo = float(src.n - 1)
    hi = max(src.R, lo)
    spacing = tol / src.lipschitz_bound if src.lipschitz_bound > 0 else max(hi - lo, 1.0)
    r = _dense_radii(lo, hi if hi > lo else lo + spacing, spacing)
    values = _radial_sampler(src)(r)
    c = max(float(values.max()), 0.0)

    at_max = values >= c - 1e-12 * max(1.0, c)
    radii = []
    for start, stop in _runs(at_max):
        radii.append(float(r[start]) if stop == start else 0.5 * float(r[start] + r[stop]))
    logger.debug("asymptotic speed of %s: c=%.6g at %s", src.name, c, radii)
    return SpeedReport(c=c, argmax_radii=tuple(radii), tol=tol)


def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Returns (first, last) index pairs of the True runs of mask."""
    idx = np.nonzero(mask)[0]
    if len(idx) == 0:
        return []
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    stops = np.concatenate([idx[breaks], [idx[-1]]])
    return list(zip(starts.tolist(), stops.tolist()))


def equilibrium_set(
    src: SourceModel, c: float, tol: float = 1e-3, spacing: Optional[float] = None
) -> EquilibriumSet:
    """Returns {r >= n-1 : |f~(r) - c| <= tol} as merged closed intervals.

    The detection grid does not depend on tol, so the set grows with tol.
    With c = 0 the set reaches infinity (upper end np.inf).
    """
    if spacing is None:
        spacing = EQUILIBRIUM_SPACING / max(src.lipschitz_bound, 1.0)
    lo = float(src.n - 1)
    hi = max(src.R, lo) + spacing
    r = _dense_radii(lo, hi, spacing)
    values = _radial_sampler(src)(r)
    member = np.abs(values - c) <= tol
    runs = _runs(member)
    if not runs:
        raise InconsistencyError(
            f"{src.name}: no radius r >= {lo:g} has |f - c| <= {tol:g} for c={c:.6g}; "
            "was c computed with a different tolerance?"
        )
    intervals = [[float(r[a]), float(r[b])] for a, b in runs]
    if member[-1]:
        intervals[-1][1] = np.inf
    return EquilibriumSet(
        intervals=tuple((a, b) for a, b in intervals), tol=tol, spacing=spacing
    )


# angular envelopes


@dataclasses.dataclass(frozen=True)
class Envelopes:
    """Angular max (upper) and min (lower) of f on circles of radius r."""

    r: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    # last radii where each envelope equals c
    a: float
    b: float
    n: int

    def upper_source(self) -> SourceModel:
        return _envelope_source(self.r, self.upper, self.n, "upper_envelope")

    def lower_source(self) -> SourceModel:
        return _envelope_source(self.r, self.lower, self.n, "lower_envelope")


def _envelope_source(r, values, n, name) -> SourceModel:
    r = np.asarray(r, dtype=float)
    values = np.clip(np.asarray(values, dtype=float), 0.0, None)
    if r[0] > 0:
        r = np.concatenate([[0.0], r])
        values = np.concatenate([[values[0]], values])
    if values[-1] != 0:
        r = np.concatenate([r, [r[-1] + (r[-1] - r[-2])]])
        values = np.concatenate([values, [0.0]])
    return from_table(r, values, n=n, name=name)


def angular_envelopes(
    src: SourceModel,
    r_samples: Sequence[float],
    n_angles: int = 720,
    c: Optional[float] = None,
    tol: float = 1e-9,
    threads: Optional[int] = 1,
) -> Envelopes:
    """Returns the angular envelopes of f at r_samples.

    Args:
        src: planar (or radial, lifted) source.
        r_samples: increasing radii.
        n_angles: angular samples per circle, a multiple of 4 hits the axes.
        c: level for the radii a, b; defaults to max of the upper envelope.
        tol: slack when comparing envelope values to c.
        threads: worker count for the per-radius sampling.
    """
    r = np.asarray(r_samples, dtype=float)
    if r.ndim != 1 or len(r) == 0:
        raise ValueError("r_samples must be a nonempty 1D sequence")
    if np.any(r < 0):
        raise ValueError("r_samples must be nonnegative")
    theta = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
    cos, sin = np.cos(theta), np.sin(theta)

    def sample(radii):
        radii = np.asarray(radii)[:, None]
        values = src.planar_values(radii * cos[None, :], radii * sin[None, :])
        return list(zip(values.max(axis=1), values.min(axis=1)))

    pairs = map_chunks(sample, r, threads=threads)
    upper = np.array([p[0] for p in pairs])
    lower = np.array([p[1] for p in pairs])
    if c is None:
        c = float(upper.max())

    def last_at(values):
        hits = np.nonzero(values >= c - tol)[0]
        return float(r[hits[-1]]) if len(hits) else float("nan")

    return Envelopes(
        r=r, upper=upper, lower=lower, a=last_at(lower), b=last_at(upper), n=src.n
    )
