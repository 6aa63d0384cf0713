"""Artifact writers: CSV series, YAML run settings and the JSON summary."""

import hashlib
import json
import logging
import math
import pathlib
from typing import Any, Dict, Optional, Union

import numpy as np
import omegaconf
import pandas as pd

from curveflow.schemas import Summary
from curveflow.visualization import emit_plot

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"

PathType = Union[str, pathlib.Path]


def dict_to_name(**kwargs) -> str:
    """Returns name from a dict."""
    kv = []

    for key in sorted(kwargs):
        if isinstance(key, str):
            value = kwargs[key]
            if value is not None:
                kv += [f"{key}{to_string(value)}"]
    return "_".join(kv)


def to_string(value):
    if isinstance(value, (list, tuple)):
        return "_".join(to_string(i) for i in value)
    if isinstance(value, dict):
        return dict_to_name(**value)
    return str(value)


def settings_hash(settings: Dict[str, Any]) -> str:
    """Returns the first 8 hex digits of the md5 of the sorted settings string."""
    return hashlib.md5(to_string(settings).encode()).hexdigest()[:8]


class Artifacts:
    """Names and writes the files of one run under dirpath.

    Files are named <experiment>_<hash>.<suffix>, the hash taken from the
    run settings, which are dumped next to them as YAML.
    """

    def __init__(self, dirpath: PathType, experiment: str, settings: Dict[str, Any]):
        self.dirpath = pathlib.Path(dirpath)
        self.dirpath.mkdir(exist_ok=True, parents=True)
        self.experiment = experiment
        self.settings = settings
        self.stem = f"{experiment}_{settings_hash(settings)}"
        self.written = []

    def path(self, suffix: str, tag: Optional[str] = None) -> pathlib.Path:
        name = self.stem if tag is None else f"{self.stem}_{tag}"
        return self.dirpath / f"{name}.{suffix}"

    def _record(self, path: pathlib.Path) -> pathlib.Path:
        self.written.append(path.name)
        logger.info("wrote %s", path)
        return path

    def write_settings(self) -> pathlib.Path:
        path = self.path("yml")
        path.write_text(omegaconf.OmegaConf.to_yaml(self.settings))
        return self._record(path)

    def write_csv(self, df: pd.DataFrame, tag: Optional[str] = None) -> pathlib.Path:
        path = self.path("csv", tag)
        write_csv(df, path)
        return self._record(path)

    def svg_path(self, tag: Optional[str] = None) -> pathlib.Path:
        return self.path("svg", tag)

    def write_plot(self, data, tag: Optional[str] = None, **kwargs) -> pathlib.Path:
        """Writes an SVG plot of data, see emit_plot, and records it once saved."""
        path = self.svg_path(tag)
        emit_plot(data, path, **kwargs)
        return self._record(path)


def write_csv(df: pd.DataFrame, path: PathType) -> pathlib.Path:
    """Writes df with a header row and a fixed float format."""
    if df.empty:
        raise ValueError(f"refusing to write an empty table to {path}")
    path = pathlib.Path(path)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def field_frame(values: np.ndarray, axis: np.ndarray, name: str = "u") -> pd.DataFrame:
    """Returns a 2D nodal field as long format columns x1, x2, <name>."""
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    return pd.DataFrame({"x1": X.ravel(), "x2": Y.ravel(), name: np.asarray(values).ravel()})


def curves_frame(curves) -> pd.DataFrame:
    """Returns level curves as polylines with columns level, curve, point, x1, x2."""
    rows = []
    for k, curve in enumerate(curves):
        for m, (x1, x2) in enumerate(curve.points):
            rows.append((curve.level, k, m, x1, x2))
    return pd.DataFrame(rows, columns=["level", "curve", "point", "x1", "x2"])


def jsonable(value: Any) -> Any:
    """Returns value with numpy scalars converted and non finite floats as None."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_summary(summary: Dict[str, Any], dirpath: PathType) -> pathlib.Path:
    """Validates summary against the Summary model and writes summary.json.

    The JSON schema of the model is written next to it as summary.schema.json.
    """
    dirpath = pathlib.Path(dirpath)
    dirpath.mkdir(exist_ok=True, parents=True)
    model = Summary.model_validate(jsonable(summary))
    path = dirpath / "summary.json"
    path.write_text(
        json.dumps(model.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
    )
    (dirpath / "summary.schema.json").write_text(
        json.dumps(Summary.model_json_schema(), sort_keys=True, indent=2) + "\n"
    )
    logger.info("wrote %s", path)
    return path
