"""Command line entry point.

    curveflow radial-evolve --config my.json --out runs
    curveflow verify --resolution coarse --only 1,4

Every command writes its CSV/SVG artifacts, the run settings as YAML and a
summary.json under --out. Errors map to exit codes: 1 configuration,
2 numerical failure, 3 failed acceptance criteria.
"""

import logging
import sys
from typing import Any, Dict, List, Optional, Sequence, Union

import fire
import numpy as np
import pandas as pd

from curveflow import geometry_checks as geometry
from curveflow.acceptance import run_acceptance
from curveflow.config import RunConfig, config_to_dict, load_config
from curveflow.ergodic_construction import (
    build_psi,
    corner_audit,
    envelope_solutions,
    growth_rate,
    residual,
)
from curveflow.errors import AcceptanceError, ConfigError, CurveflowError
from curveflow.levelset_2d import (
    Grid2D,
    StadiumSpec,
    evolve2d,
    flatness_on_U,
    gamma_membership,
)
from curveflow.outputs import Artifacts, curves_frame, field_frame, write_summary
from curveflow.parallel import resolve_threads
from curveflow.radial_hj import RadialField, RadialGrid, evolve, relaxed_limits
from curveflow.reachability_dp import compute_d, compute_psi_inf
from curveflow.source_model import (
    SourceModel,
    asymptotic_speed,
    from_config,
)

logger = logging.getLogger(__name__)


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("curveflow").setLevel(level)


class Run:
    """Config, artifacts and summary of one command invocation."""

    def __init__(
        self,
        command: str,
        config: Optional[str],
        out: Optional[str],
        threads: Optional[int],
        resolution: str,
        verbosity: int,
        **extra,
    ):
        _setup_logging(verbosity)
        self.command = command
        self.resolution = resolution
        self.verbosity = verbosity
        self.config: RunConfig = load_config(config, resolution=resolution)
        self.threads = resolve_threads(threads)
        settings = dict(command=command, resolution=resolution, **config_to_dict(self.config))
        settings.update({k: v for k, v in extra.items() if v is not None})
        self.artifacts = Artifacts(
            out or self.config.out, f"{self.config.experiment}_{command}", settings
        )
        self.artifacts.write_settings()
        self.metrics: Dict[str, Any] = {}

    def source(self) -> SourceModel:
        return from_config(self.config.source)

    def radial_grid(self) -> RadialGrid:
        grid = self.config.grid
        return RadialGrid(r_max=grid.r_max, dr=grid.dr, r_min=grid.r_min)

    def planar_grid(self) -> Grid2D:
        return Grid2D(L=self.config.grid.L, dx=self.config.grid.dx)

    def finish(self, criteria: Optional[List[Dict[str, Any]]] = None) -> None:
        passed = None if criteria is None else all(c["passed"] for c in criteria)
        write_summary(
            dict(
                command=self.command,
                experiment=self.config.experiment,
                resolution=self.resolution,
                settings_hash=self.artifacts.stem.rsplit("_", 1)[-1],
                artifacts=sorted(self.artifacts.written),
                metrics=self.metrics,
                criteria=criteria or [],
                passed=passed,
            ),
            self.artifacts.dirpath,
        )


def radial_evolve(
    config: Optional[str] = None,
    out: Optional[str] = None,
    threads: Optional[int] = None,
    resolution: str = "fine",
    verbosity: int = 0,
) -> None:
    """Evolves the radial equation from phi0 = 0 and writes the time series."""
    run = Run("radial-evolve", config, out, threads, resolution, verbosity)
    src = run.source()
    speed = asymptotic_speed(src, tol=run.config.tol)
    grid = run.radial_grid()
    phi0 = RadialField(grid=grid, values=np.zeros(grid.size))
    phi = evolve(
        phi0, run.config.T, src, c=speed.c, record_every=run.config.record_every, verbosity=verbosity
    )
    run.artifacts.write_csv(phi.history)
    final = pd.Series(phi.values - speed.c * phi.time, index=grid.nodes, name="phi_minus_ct")
    run.artifacts.write_plot(final, xlabel="r", ylabel="phi - ct")
    limits = relaxed_limits(phi.history, window=min(10.0, 0.2 * run.config.T))
    r_star = speed.argmax_radii[0] if speed.argmax_radii else float(src.n - 1)
    run.metrics.update(
        c=speed.c,
        argmax_radius=r_star,
        speed_estimate=float(phi.at(r_star)) / phi.time if phi.time > 0 else None,
        lipschitz_estimate=phi.lipschitz_estimate,
        relaxed_gap=float(limits["gap"].max()),
    )
    run.finish()


def ergodic_profile(
    config: Optional[str] = None,
    out: Optional[str] = None,
    threads: Optional[int] = None,
    resolution: str = "fine",
    verbosity: int = 0,
) -> None:
    """Builds the explicit ergodic profile and writes r, psi, dpsi, tag."""
    run = Run("ergodic-profile", config, out, threads, resolution, verbosity)
    src = run.source()
    if src.kind == "planar":
        envelopes = envelope_solutions(
            src, r_max=run.config.grid.r_max, dr=run.config.grid.dr, tol=run.config.tol, threads=run.threads
        )
        run.artifacts.write_csv(envelopes.upper.to_frame(), tag="upper")
        run.artifacts.write_csv(envelopes.lower.to_frame(), tag="lower")
        run.artifacts.write_plot(
            {
                "upper": pd.Series(envelopes.upper.psi, index=envelopes.upper.r),
                "lower": pd.Series(envelopes.lower.psi, index=envelopes.lower.r),
            },
            xlabel="r",
            ylabel="psi",
        )
        run.metrics.update(c=envelopes.c, a=envelopes.a, b=envelopes.b)
        run.finish()
        return
    c = asymptotic_speed(src, tol=run.config.tol).c
    profile = build_psi(src, c, r_max=run.config.grid.r_max, dr=run.config.grid.dr, tol=run.config.tol)
    run.artifacts.write_csv(profile.to_frame())
    run.artifacts.write_plot(pd.Series(profile.psi, index=profile.r, name="psi"), xlabel="r", ylabel="psi")
    audit = corner_audit(profile)
    run.metrics.update(
        c=c,
        residual=residual(profile, src, c),
        growth_rate=growth_rate(profile),
        corners_from_above=audit.corners_from_above,
        corners_from_below=audit.corners_from_below,
        corner_violations=len(audit.violations),
        equilibria=[lo for lo, _ in profile.equilibria.intervals],
    )
    run.finish()


def dp_profile(
    config: Optional[str] = None,
    out: Optional[str] = None,
    threads: Optional[int] = None,
    resolution: str = "fine",
    verbosity: int = 0,
    starts: str = "all",
) -> None:
    """Computes the reachability table and, with every node as a start, psi_inf.

    Args:
        starts: "all" writes r, v0, psi_inf, argmax_s; "equilibria" writes
            only the distance columns of the equilibrium nodes.
    """
    if starts not in ("all", "equilibria"):
        raise ConfigError(f"starts must be 'all' or 'equilibria', got {starts!r}")
    run = Run("dp-profile", config, out, threads, resolution, verbosity, starts=starts)
    src = run.source()
    grid = run.radial_grid()
    c = asymptotic_speed(src, tol=run.config.tol).c
    if starts == "equilibria":
        table = compute_d(src, c, grid, starts="equilibria", tol=run.config.tol, threads=run.threads)
        run.artifacts.write_csv(table.to_frame(), tag="d")
        run.metrics.update(c=c, starts=[float(s) for s in table.sources])
        run.finish()
        return
    result = compute_psi_inf(src, grid=grid, tol=run.config.tol, threads=run.threads)
    frame = result.to_frame()
    run.artifacts.write_csv(frame)
    finite = np.isfinite(result.psi_inf)
    run.artifacts.write_plot(
        pd.Series(result.psi_inf[finite], index=grid.nodes[finite], name="psi_inf"),
        xlabel="r",
        ylabel="psi_inf",
    )
    run.metrics.update(
        c=c,
        equilibria=[lo for lo, _ in result.equilibria.intervals],
        unreachable_nodes=int(np.sum(~finite)),
    )
    run.finish()


def levelset2d(
    config: Optional[str] = None,
    out: Optional[str] = None,
    threads: Optional[int] = None,
    resolution: str = "fine",
    verbosity: int = 0,
) -> None:
    """Evolves the planar level-set equation from u0 = 0 and writes the field."""
    run = Run("levelset2d", config, out, threads, resolution, verbosity)
    src = run.source()
    grid = run.planar_grid()
    T = run.config.T2d
    u = evolve2d(0.0, T, src, grid=grid, epsilon=run.config.epsilon, verbosity=verbosity)
    c = asymptotic_speed(src, tol=run.config.tol).c
    run.artifacts.write_csv(field_frame(u.values, grid.axis))
    run.artifacts.write_plot((u.values - c * T, grid.axis), label="u - cT")
    run.metrics.update(c=c, T=T, max_u_minus_cT=float(np.max(u.values - c * T)))
    if src.kind == "radial":
        rgrid = RadialGrid(r_min=grid.dx, r_max=grid.L * np.sqrt(2.0) + 1.0, dr=grid.dx)
        phi = evolve(RadialField(grid=rgrid, values=np.zeros(rgrid.size)), T, src, c=c)
        X, Y = grid.mesh()
        radius = np.hypot(X, Y)
        ring = (radius >= 0.5) & (radius <= grid.L - 2.0)
        if np.any(ring):
            run.metrics["max_radial_deviation"] = float(
                np.max(np.abs(u.values[ring] - phi.at(radius[ring])))
            )
    run.finish()


def stadium(
    config: Optional[str] = None,
    out: Optional[str] = None,
    threads: Optional[int] = None,
    resolution: str = "fine",
    verbosity: int = 0,
) -> None:
    """Runs the stadium source, checks flatness on U and writes the explicit solutions."""
    run = Run("stadium", config, out, threads, resolution, verbosity)
    spec = StadiumSpec(a=run.config.stadium_a)
    src = spec.source(c=1.0)
    T = run.config.T2d
    L = max(run.config.grid.L, src.R + T + 0.5)
    grid = Grid2D(L=L, dx=run.config.grid.dx)
    u = evolve2d(0.0, T, src, grid=grid, epsilon=run.config.epsilon, verbosity=verbosity)
    run.artifacts.write_csv(field_frame(u.values, grid.axis), tag="u")
    run.artifacts.write_plot((u.values - T, grid.axis), tag="u", label="u - cT", levels=[-0.5, -0.1])
    envelopes = envelope_solutions(src, c=1.0, r_max=L * np.sqrt(2.0) + 1.0, dr=grid.dx, threads=run.threads)
    gamma = gamma_membership(u, envelopes)
    run.metrics.update(
        flatness=flatness_on_U(u, spec, c=1.0),
        gamma_upper_slack=gamma.upper_slack,
        gamma_lower_slack=gamma.lower_slack,
    )
    if spec.a == 1.0:
        sgrid = Grid2D(L=2.5, dx=run.config.grid.dx)
        v = geometry.explicit_field(sgrid)
        run.artifacts.write_csv(field_frame(v, sgrid.axis, name="v"), tag="explicit")
        levels = np.linspace(-0.9, -0.1, 9)
        fits = geometry.level_circle_fits(v, sgrid, levels)
        mask = np.isfinite(v)
        curves = [
            curve
            for level in levels
            for curve in geometry.extract_level_curves(v, sgrid, level, mask=mask, min_points=8)
        ]
        run.artifacts.write_csv(curves_frame(curves), tag="curves")
        run.artifacts.write_plot((v, sgrid.axis), tag="explicit", label="v", levels=list(levels))
        radii = [fit.radius for level in fits.values() for fit in level]
        run.metrics.update(
            explicit_residual=geometry.residual_on_U(v, sgrid),
            circle_radii=radii,
        )
    run.finish()


def verify(
    config: Optional[str] = None,
    out: Optional[str] = None,
    threads: Optional[int] = None,
    resolution: str = "fine",
    verbosity: int = 0,
    only: Optional[Union[int, str, Sequence[int]]] = None,
) -> None:
    """Runs the acceptance criteria and fails with exit code 3 if any fails.

    Args:
        only: criterion id or ids (e.g. 4 or 1,4) to run instead of all.
    """
    if isinstance(only, str):
        only = [int(part) for part in only.split(",") if part.strip()]
    elif isinstance(only, int):
        only = [only]
    run = Run("verify", config, out, threads, resolution, verbosity, only=list(only) if only else None)
    criteria = run_acceptance(
        resolution=resolution,
        threads=run.threads,
        seed=run.config.seed,
        only=only,
        verbosity=verbosity,
    )
    run.metrics.update(criteria_run=len(criteria))
    run.finish(criteria)
    failed = [c["id"] for c in criteria if not c["passed"]]
    if failed:
        raise AcceptanceError(f"acceptance criteria failed: {failed}")


COMMANDS = {
    "radial_evolve": radial_evolve,
    "ergodic_profile": ergodic_profile,
    "dp_profile": dp_profile,
    "levelset2d": levelset2d,
    "stadium": stadium,
    "verify": verify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Runs one command and returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and not argv[0].startswith("-"):
        argv[0] = argv[0].replace("-", "_")
    try:
        fire.Fire(COMMANDS, command=argv, name="curveflow")
    except CurveflowError as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except fire.core.FireExit as e:
        return int(e.code or 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
