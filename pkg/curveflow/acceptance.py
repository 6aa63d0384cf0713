"""Acceptance suite run by `curveflow verify`.

Every criterion runs at its own pinned grid; the "coarse" resolution
doubles all spacings. Results are plain dicts matching schemas.Criterion.
"""

import dataclasses
import functools
import io
import logging
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from curveflow import geometry_checks as geometry
from curveflow.config import RESOLUTIONS
from curveflow.ergodic_construction import (
    build_psi,
    growth_rate,
    residual,
    uniqueness_check,
)
from curveflow.errors import ConfigError, UniquenessError
from curveflow.levelset_2d import (
    Grid2D,
    StadiumSpec,
    evolve2d,
    flatness_on_U,
    scaled_limit_check,
)
from curveflow.outputs import FLOAT_FORMAT
from curveflow.radial_hj import RadialField, RadialGrid, evolve
from curveflow.reachability_dp import compute_d, compute_psi_inf
from curveflow.source_model import (
    asymptotic_speed,
    multi_bump,
    tent,
)

logger = logging.getLogger(__name__)


def criterion(cid: int, name: str, passed: bool, message: str = "", **metrics) -> Dict[str, Any]:
    return dict(id=cid, name=name, passed=bool(passed), metrics=metrics, message=message)


@dataclasses.dataclass
class AcceptanceRun:
    """Shared state of one verify run.

    Args:
        resolution: key of RESOLUTIONS, multiplies every pinned spacing.
        threads: worker count for the parallel parts.
        seed: seed of the randomized property suites.
        verbosity: > 0 shows progress bars.
    """

    resolution: str = "fine"
    threads: int = 1
    seed: int = 0
    verbosity: int = 0

    def __post_init__(self):
        if self.resolution not in RESOLUTIONS:
            raise ConfigError(
                f"resolution must be one of {sorted(RESOLUTIONS)}, got {self.resolution!r}"
            )
        self.scale = RESOLUTIONS[self.resolution]

    def spacing(self, value: float) -> float:
        return value * self.scale

    # shared runs

    @functools.cached_property
    def tent_src(self):
        return tent(center=2.0)

    @functools.cached_property
    def two_tent_src(self):
        return multi_bump([dict(center=2.0), dict(center=5.0)])

    @functools.cached_property
    def radial_grid(self) -> RadialGrid:
        dr = self.spacing(0.05)
        return RadialGrid(r_min=dr, r_max=30.0, dr=dr)

    @functools.cached_property
    def radial_run(self) -> RadialField:
        phi0 = RadialField(grid=self.radial_grid, values=np.zeros(self.radial_grid.size))
        return evolve(phi0, 50.0, self.tent_src, record_every=1.0, verbosity=self.verbosity)

    def psi_inf(self, src):
        return compute_psi_inf(src, grid=self.radial_grid, threads=self.threads)

    @functools.cached_property
    def tent_psi_inf(self):
        return self.psi_inf(self.tent_src)

    # criteria

    def speed(self):
        phi = self.radial_run
        ratio = float(phi.at(2.0)) / phi.time
        return criterion(
            1, "asymptotic speed", abs(ratio - 1.0) <= 0.05, phi_over_T=ratio
        )

    def convergence(self):
        phi = self.radial_run
        c = asymptotic_speed(self.tent_src).c
        result = self.tent_psi_inf
        r = self.radial_grid.nodes
        window = (r >= 0.5) & (r <= 10.0)
        w = phi.values - c * phi.time
        psi = result.psi_inf - np.interp(2.0, r, result.psi_inf) + np.interp(2.0, r, w)
        deviation = float(np.max(np.abs(w[window] - psi[window])))
        return criterion(
            2, "convergence to the profile", deviation <= 0.1, sup_deviation=deviation
        )

    def uniqueness(self):
        metrics, passed, message = {}, True, ""
        for label, src in (("tent", self.tent_src), ("two_tent", self.two_tent_src)):
            dp = self.tent_psi_inf if label == "tent" else self.psi_inf(src)
            anchors = None
            if label == "two_tent":
                points = [lo for lo, _ in dp.equilibria.intervals]
                anchors = {p: float(np.interp(p, dp.grid.nodes, dp.psi_inf)) for p in points}
            profile = build_psi(
                src, dp.c, r_max=30.0, dr=self.spacing(0.05), anchors=anchors
            )
            try:
                gap = uniqueness_check(
                    profile, dp, dp.equilibria, tol=0.05, r_range=(0.5, 10.0)
                )
            except UniquenessError as e:
                gap, message = float("inf"), str(e)
            metrics[f"{label}_sup_difference"] = gap
            passed &= gap <= 0.05
        return criterion(3, "profile uniqueness", passed, message, **metrics)

    def exactness(self):
        c = asymptotic_speed(self.tent_src).c
        profile = build_psi(self.tent_src, c, r_max=30.0, dr=self.spacing(0.05))
        res = residual(profile, self.tent_src, c)
        slope = growth_rate(profile)
        return criterion(
            4,
            "construction exactness",
            res <= 1e-10 and abs(slope + c) <= 0.05,
            residual=res,
            growth_rate=slope,
        )

    def monotonicity(self):
        history = self.radial_run.history
        at2 = history[np.isclose(history["r"], self.radial_grid.nodes[self.radial_grid.nearest(2.0)])]
        t = at2["t"].to_numpy()
        w = at2["phi_minus_ct"].to_numpy()
        drops = np.diff(w) / np.diff(t)
        worst = float(drops.min())
        return criterion(
            5, "monotonicity at equilibria", worst >= -1e-3, min_rate=worst
        )

    def barrier(self):
        grid = self.radial_grid
        table = self.tent_psi_inf.table
        eq = self.tent_psi_inf.equilibria.node_indices(grid.nodes)
        inner = np.nonzero(grid.nodes < 0.95)[0]
        blocked = bool(np.all(np.isneginf(table.d[np.ix_(eq, inner)])))
        c = table.c
        R = self.tent_src.R
        far = np.nonzero(grid.nodes > R + 6 * R / c)[0]
        bound = float(np.max(table.d[np.ix_(eq, far)])) if len(far) else float("-inf")
        return criterion(
            6,
            "reachability barrier",
            blocked and bound <= -3 * R + 0.2,
            inner_blocked=blocked,
            far_start_max_d=bound,
        )

    def radial_2d(self):
        dx = self.spacing(0.05)
        grid = Grid2D(L=6.0, dx=dx)
        u = evolve2d(0.0, 2.0, self.tent_src, grid=grid, verbosity=self.verbosity)
        rgrid = RadialGrid(r_min=dx, r_max=10.0, dr=dx)
        phi = evolve(
            RadialField(grid=rgrid, values=np.zeros(rgrid.size)),
            2.0,
            self.tent_src,
            verbosity=self.verbosity,
        )
        X, Y = grid.mesh()
        radius = np.hypot(X, Y)
        ring = (radius >= 0.5) & (radius <= 4.0)
        deviation = float(np.max(np.abs(u.values[ring] - phi.at(radius[ring]))))
        return criterion(7, "radial and 2D agree", deviation <= 0.1, max_deviation=deviation)

    def flatness(self):
        spec = StadiumSpec(a=1.0)
        src = spec.source(c=1.0)
        grid = Grid2D(L=5.0, dx=self.spacing(0.05))
        u = evolve2d(0.0, 2.0, src, grid=grid, verbosity=self.verbosity)
        deviation = flatness_on_U(u, spec, c=1.0)
        return criterion(8, "flatness on the stadium", deviation <= 0.1, max_deviation=deviation)

    def scaled_limit(self):
        report = scaled_limit_check(self.tent_src, dr=self.spacing(0.05), verbosity=self.verbosity)
        return criterion(
            9,
            "scaled limit",
            report.decreasing,
            **{f"deviation_lambda{lam:g}": list(dev) for lam, dev in report.deviations.items()},
        )

    def stadium_residual(self):
        dx = self.spacing(0.02)
        grid = Grid2D(L=2.5, dx=dx)
        eps = dx ** 2
        bound = 10 * (dx + eps)
        plain = geometry.residual_on_U(geometry.explicit_field(grid), grid, eps)
        cubed = geometry.residual_on_U(
            geometry.explicit_field(grid, lambda s: s ** 3), grid, eps
        )
        return criterion(
            10,
            "stadium non-uniqueness",
            plain <= bound and cubed <= bound,
            residual=plain,
            residual_cubed=cubed,
            bound=bound,
        )

    def alexandrov(self):
        dx = self.spacing(0.04)
        report = geometry.stationarity_check(1.0, T=1.0, dx=dx, verbosity=self.verbosity)
        grid = Grid2D(L=2.5, dx=self.spacing(0.02))
        levels = np.linspace(-0.9, -0.1, 9)
        fits = geometry.level_circle_fits(geometry.explicit_field(grid), grid, levels)
        radii = [fit.radius for level in fits.values() for fit in level]
        worst = max(abs(r - 1.0) for r in radii) if radii else float("inf")
        return criterion(
            11,
            "stationary unit disk",
            report.hausdorff <= 3 * dx and worst <= 0.05,
            hausdorff=report.hausdorff,
            worst_radius_error=worst,
        )

    def fattening(self):
        dx = self.spacing(0.02)
        tangent = geometry.fattening_probe(0.0, T=0.2, dx=dx, verbosity=self.verbosity)
        apart = geometry.fattening_probe(0.5, T=0.2, dx=dx, verbosity=self.verbosity)
        return criterion(
            12,
            "fattening",
            tangent.factor > 1.5 and apart.factor <= 1.2 and tangent.factor > apart.factor,
            tangent_factor=tangent.factor,
            separated_factor=apart.factor,
        )

    def properties(self):
        rng = np.random.default_rng(self.seed)
        radial_ok = all(_radial_comparison(rng) for _ in range(10))
        planar_ok = all(_planar_comparison(rng) for _ in range(10))

        grid = RadialGrid(r_max=10.0, dr=self.spacing(0.1))
        table = compute_d(self.tent_src, None, grid, starts="all", threads=self.threads)
        triples = rng.integers(0, grid.size, size=(100, 3))
        superadditive = all(
            table.d[r, s] >= table.d[r, m] + table.d[m, s] - 1e-9
            for r, m, s in triples
        )

        serial = _csv_bytes(compute_d(self.tent_src, None, grid, starts="all", threads=1))
        pooled = _csv_bytes(compute_d(self.tent_src, None, grid, starts="all", threads=4))
        deterministic = serial == pooled
        return criterion(
            13,
            "property suites",
            radial_ok and planar_ok and superadditive and deterministic,
            radial_comparison=radial_ok,
            planar_comparison=planar_ok,
            superadditivity=superadditive,
            thread_determinism=deterministic,
        )

    def checks(self) -> Dict[int, Callable[[], Dict[str, Any]]]:
        return {
            1: self.speed,
            2: self.convergence,
            3: self.uniqueness,
            4: self.exactness,
            5: self.monotonicity,
            6: self.barrier,
            7: self.radial_2d,
            8: self.flatness,
            9: self.scaled_limit,
            10: self.stadium_residual,
            11: self.alexandrov,
            12: self.fattening,
            13: self.properties,
        }


def _csv_bytes(table) -> bytes:
    buffer = io.StringIO()
    table.to_frame().to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buffer.getvalue().encode()


def ordered_pair(rng: np.random.Generator, x: np.ndarray, gap: float = 0.05):
    """Returns u1 <= u2 - gap built from random smooth modes on x."""
    k = rng.uniform(0.5, 2.0, size=3)
    a = rng.uniform(-0.5, 0.5, size=3)
    u1 = sum(ai * np.sin(ki * x + i) for i, (ai, ki) in enumerate(zip(a, k)))
    bump = rng.uniform(0.0, 0.3) * np.exp(-((x - rng.uniform(-1, 1)) ** 2))
    return u1, u1 + gap + bump


def _radial_comparison(rng) -> bool:
    grid = RadialGrid(r_max=8.0, dr=0.1)
    u1, u2 = ordered_pair(rng, grid.nodes)
    src = tent(center=2.0)
    phi1 = evolve(RadialField(grid=grid, values=u1), 1.0, src)
    phi2 = evolve(RadialField(grid=grid, values=u2), 1.0, src)
    return bool(np.all(phi1.values <= phi2.values + 1e-12))


def _planar_comparison(rng) -> bool:
    grid = Grid2D(L=2.0, dx=0.1)
    X, Y = grid.mesh()
    u1, u2 = ordered_pair(rng, X + 0.5 * Y)
    src = tent(center=1.0, width=0.5)
    v1 = evolve2d(u1, 0.2, src, grid=grid)
    v2 = evolve2d(u2, 0.2, src, grid=grid)
    return bool(np.all(v1.values <= v2.values + 1e-12))


def run_acceptance(
    resolution: str = "fine",
    threads: int = 1,
    seed: int = 0,
    only: Optional[Sequence[int]] = None,
    verbosity: int = 0,
) -> List[Dict[str, Any]]:
    """Runs the selected criteria (all by default) and returns their results in id order."""
    run = AcceptanceRun(resolution=resolution, threads=threads, seed=seed, verbosity=verbosity)
    checks = run.checks()
    selected = sorted(checks) if not only else sorted(set(int(i) for i in only))
    unknown = [i for i in selected if i not in checks]
    if unknown:
        raise ConfigError(f"unknown acceptance criteria {unknown}, choose from 1-{len(checks)}")
    results = []
    for cid in selected:
        result = checks[cid]()
        logger.info(
            "criterion %d (%s): %s", cid, result["name"], "pass" if result["passed"] else "FAIL"
        )
        results.append(result)
    return results
