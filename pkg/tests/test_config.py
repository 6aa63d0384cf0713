# Config loading, resolution scaling and thread settings

import json

import pytest

from curveflow.config import PATH, RunConfig, config_to_dict, load_config
from curveflow.errors import ConfigError
from curveflow.parallel import THREADS_ENV, map_chunks, resolve_threads


def write(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_default_config():
    assert PATH.default_config.exists()
    config = load_config()
    assert isinstance(config, RunConfig)
    assert config.grid.dr == pytest.approx(0.05)
    assert config.source.preset == "tent"
    assert config.source.params["center"] == 2.0


def test_coarse_resolution_doubles_spacings():
    fine = load_config(resolution="fine")
    coarse = load_config(resolution="coarse")
    assert coarse.grid.dr == pytest.approx(2 * fine.grid.dr)
    assert coarse.grid.dx == pytest.approx(2 * fine.grid.dx)
    assert coarse.grid.r_max == fine.grid.r_max


def test_missing_spacing(tmp_path):
    with pytest.raises(ConfigError, match="dr"):
        load_config(write(tmp_path, {"grid": {"r_max": 10.0}}))


def test_rejected_values(tmp_path):
    with pytest.raises(ConfigError, match="T must be positive"):
        load_config(write(tmp_path, {"grid": {"dr": 0.1}, "T": -1.0}))
    with pytest.raises(ConfigError, match="grid.dx"):
        load_config(write(tmp_path, {"grid": {"dr": 0.1, "dx": 0.0}}))
    with pytest.raises(ConfigError, match="source.n"):
        load_config(write(tmp_path, {"grid": {"dr": 0.1}, "source": {"n": 1}}))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, {"grid": {"dr": 0.1}, "bogus": 1}))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, {"grid": {"dr": "fine"}}))


def test_bad_resolution_and_path(tmp_path):
    with pytest.raises(ConfigError, match="resolution"):
        load_config(resolution="medium")
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")


def test_overrides(tmp_path):
    path = write(tmp_path, {"grid": {"dr": 0.1}})
    config = load_config(path, overrides={"T": 3.0, "grid.r_max": 12.0})
    assert config.T == 3.0
    assert config.grid.r_max == 12.0
    assert config.grid.dr == pytest.approx(0.1)


def test_config_to_dict():
    data = config_to_dict(load_config())
    assert data["grid"]["dr"] == pytest.approx(0.05)
    assert set(data) >= {"experiment", "source", "grid", "T", "seed"}


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_threads() == 1
    assert resolve_threads(4) == 4
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_threads() == 3
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        resolve_threads()
    with pytest.raises(ConfigError):
        resolve_threads(0)


def test_map_chunks_keeps_order():
    items = list(range(23))

    def square(chunk):
        return [i * i for i in chunk]

    assert map_chunks(square, items, threads=4) == [i * i for i in items]
    assert map_chunks(square, [], threads=2) == []


if __name__ == "__main__":
    test_default_config()
