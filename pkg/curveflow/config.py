""" store configuration
"""

__all__ = ["PATH", "RunConfig", "SourceConfig", "GridConfig", "load_config"]

import dataclasses
import pathlib
from typing import Any, Dict, List, Optional, Union

import omegaconf
from omegaconf import MISSING, OmegaConf

from curveflow.errors import ConfigError

module_path = pathlib.Path(__file__).parent.absolute()
repo_path = module_path.parent
configs_path = module_path / "configs"


class Path:
    module = module_path
    repo = repo_path
    configs = configs_path
    default_config = configs_path / "default.json"


PATH = Path()

# grid spacing multipliers; "fine" runs the config as written
RESOLUTIONS = {"coarse": 2.0, "fine": 1.0}
SPACING_FIELDS = ("dr", "dx")


@dataclasses.dataclass
class SourceConfig:
    kind: str = "radial"
    n: int = 2
    preset: Optional[str] = "tent"
    params: Dict[str, Any] = dataclasses.field(default_factory=dict)
    table: Optional[List[Any]] = None
    R: Optional[float] = None


@dataclasses.dataclass
class GridConfig:
    dr: float = MISSING
    r_min: Optional[float] = None
    r_max: float = 30.0
    dx: float = 0.05
    L: float = 6.0


@dataclasses.dataclass
class RunConfig:
    experiment: str = "run"
    source: SourceConfig = dataclasses.field(default_factory=SourceConfig)
    grid: GridConfig = dataclasses.field(default_factory=GridConfig)
    T: float = 50.0
    # duration of the planar runs (levelset2d, stadium)
    T2d: float = 2.0
    epsilon: Optional[float] = None
    out: str = "curveflow_out"
    seed: int = 0
    # radial time series sampling
    record_every: float = 1.0
    # speed / equilibrium detection tolerance
    tol: float = 1e-3
    # stadium half length
    stadium_a: float = 1.0


def _check_positive(section: Any, prefix: str = "") -> None:
    for field in dataclasses.fields(section):
        value = getattr(section, field.name)
        key = f"{prefix}{field.name}"
        if dataclasses.is_dataclass(value):
            _check_positive(value, prefix=f"{key}.")
        elif isinstance(value, bool) or value is None:
            continue
        elif isinstance(value, (int, float)):
            if field.name == "seed":
                if value < 0:
                    raise ConfigError(f"{key} must be nonnegative, got {value}")
            elif value <= 0:
                raise ConfigError(f"{key} must be positive, got {value}")


def load_config(
    path: Optional[Union[str, pathlib.Path]] = None,
    resolution: str = "fine",
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Returns a validated RunConfig.

    Args:
        path: JSON config file, defaults to the bundled default.json.
        resolution: name in RESOLUTIONS scaling the grid spacings.
        overrides: dotted-key values merged last.
    """
    path = pathlib.Path(path) if path else PATH.default_config
    if resolution not in RESOLUTIONS:
        raise ConfigError(
            f"resolution must be one of {sorted(RESOLUTIONS)}, got {resolution!r}"
        )
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")

    schema = OmegaConf.structured(RunConfig)
    try:
        cfg = OmegaConf.merge(schema, OmegaConf.load(path))
        if overrides:
            cfg = OmegaConf.merge(cfg, OmegaConf.from_dotlist(
                [f"{key}={value}" for key, value in overrides.items()]
            ))
        config = OmegaConf.to_object(cfg)
    except omegaconf.errors.OmegaConfBaseException as e:
        key = getattr(e, "full_key", None)
        raise ConfigError(f"invalid config {path.name}: field {key}: {e}") from e

    factor = RESOLUTIONS[resolution]
    for name in SPACING_FIELDS:
        setattr(config.grid, name, getattr(config.grid, name) * factor)

    _check_positive(config)
    if config.source.n < 2:
        raise ConfigError(f"source.n must be >= 2, got {config.source.n}")
    return config


def config_to_dict(config: RunConfig) -> Dict[str, Any]:
    return OmegaConf.to_container(OmegaConf.structured(config))


if __name__ == "__main__":
    print(PATH)
