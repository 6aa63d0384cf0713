# Artifact naming, CSV format, summary schema and SVG plots

import json

import numpy as np
import pandas as pd
import pydantic
import pytest

from curveflow.geometry_checks import LevelCurve
from curveflow.outputs import (
    Artifacts,
    curves_frame,
    dict_to_name,
    field_frame,
    jsonable,
    settings_hash,
    write_csv,
    write_summary,
)
from curveflow.schemas import Criterion, Summary
from curveflow.visualization import emit_plot, plot_field, plot_lines


def test_dict_to_name():
    assert dict_to_name(a=1, b=[1, 2], c=None) == "a1_b1_2"
    assert dict_to_name(b=2, a=1) == "a1_b2"
    assert dict_to_name(grid=dict(dr=0.1)) == "griddr0.1"


def test_settings_hash():
    settings = dict(experiment="tent", grid=dict(dr=0.05, r_max=30.0))
    h = settings_hash(settings)
    assert len(h) == 8
    assert int(h, 16) >= 0
    assert settings_hash(dict(settings)) == h
    assert settings_hash(dict(settings, experiment="other")) != h


def test_artifacts(tmp_path):
    settings = dict(experiment="tent", T=2.0)
    artifacts = Artifacts(tmp_path / "out", "tent_radial", settings)
    assert artifacts.stem == f"tent_radial_{settings_hash(settings)}"
    yml = artifacts.write_settings()
    assert "T: 2.0" in yml.read_text()
    csv = artifacts.write_csv(pd.DataFrame({"r": [1.0]}), tag="psi")
    assert csv.name == f"{artifacts.stem}_psi.csv"
    assert artifacts.written == [yml.name, csv.name]
    assert artifacts.svg_path("psi").suffix == ".svg"
    assert artifacts.written == [yml.name, csv.name]


def test_plot_is_recorded_once_saved(tmp_path):
    artifacts = Artifacts(tmp_path / "out", "tent_radial", dict(T=2.0))
    with pytest.raises(ValueError):
        artifacts.write_plot({}, tag="empty")
    assert artifacts.written == []
    assert not artifacts.svg_path("empty").exists()
    path = artifacts.write_plot(pd.Series([0.0, 1.0], index=[1.0, 2.0], name="psi"), tag="psi")
    assert path.exists()
    assert artifacts.written == [path.name]


def test_csv_format(tmp_path):
    df = pd.DataFrame({"r": [0.1, 1.0 / 3.0], "d": [-np.inf, 2.0]})
    path = write_csv(df, tmp_path / "a.csv")
    assert path.read_text() == "r,d\n0.1,-inf\n0.3333333333,2\n"
    with pytest.raises(ValueError):
        write_csv(pd.DataFrame({"r": []}), tmp_path / "b.csv")


def test_frames():
    axis = np.array([-1.0, 0.0, 1.0])
    frame = field_frame(np.arange(9.0).reshape(3, 3), axis)
    assert list(frame.columns) == ["x1", "x2", "u"]
    assert frame.loc[1].tolist() == [-1.0, 0.0, 1.0]
    curve = LevelCurve(level=-0.5, points=np.array([[0.0, 1.0], [1.0, 0.0]]), closed=False)
    curves = curves_frame([curve, curve])
    assert list(curves.columns) == ["level", "curve", "point", "x1", "x2"]
    assert curves["curve"].tolist() == [0, 0, 1, 1]


def test_jsonable():
    value = jsonable(
        {
            "a": np.float64(1.5),
            "b": np.inf,
            "c": np.array([1.0, np.nan]),
            "d": np.bool_(True),
            2: (np.int64(3),),
        }
    )
    assert value == {"a": 1.5, "b": None, "c": [1.0, None], "d": True, "2": [3]}
    json.dumps(value)


def test_write_summary(tmp_path):
    summary = dict(
        command="verify",
        experiment="acceptance",
        resolution="coarse",
        settings_hash="0123abcd",
        metrics={"c": np.float64(1.0), "gap": np.nan},
        criteria=[dict(id=1, name="speed", passed=True, metrics={"c": 1.0})],
        passed=True,
    )
    path = write_summary(summary, tmp_path)
    data = json.loads(path.read_text())
    assert data["metrics"] == {"c": 1.0, "gap": None}
    assert data["criteria"][0]["passed"] is True
    schema = json.loads((tmp_path / "summary.schema.json").read_text())
    assert "settings_hash" in schema["properties"]


def test_summary_is_strict():
    with pytest.raises(pydantic.ValidationError):
        Summary(command="x", experiment="x", resolution="fine", settings_hash="XYZ")
    with pytest.raises(pydantic.ValidationError):
        Summary(
            command="x", experiment="x", resolution="fine", settings_hash="0123abcd", extra=1
        )
    with pytest.raises(pydantic.ValidationError):
        Criterion(id=0, name="x", passed=True)


def test_plots_are_deterministic(tmp_path):
    series = pd.Series(np.sin(np.linspace(0, 3, 50)), index=np.linspace(0, 3, 50), name="psi")
    first = plot_lines(series, tmp_path / "a.svg")
    second = emit_plot(series, tmp_path / "b.svg")
    assert "<svg" in first.read_text()
    assert first.read_bytes() == second.read_bytes()


def test_field_plot(tmp_path):
    axis = np.linspace(-1.0, 1.0, 21)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    values = 0.5 - np.hypot(X, Y)
    path = emit_plot((values, axis), tmp_path / "u.svg", levels=[0.0, 10.0])
    assert path.exists()
    with pytest.raises(ValueError):
        plot_field(np.full((3, 3), np.nan), axis[:3], tmp_path / "nan.svg")
    with pytest.raises(ValueError):
        plot_lines({}, tmp_path / "empty.svg")


if __name__ == "__main__":
    test_dict_to_name()
    test_jsonable()
