# Acceptance harness: selection, result records and the cheap criteria

import numpy as np
import pytest

from curveflow.acceptance import AcceptanceRun, criterion, ordered_pair, run_acceptance
from curveflow.errors import ConfigError
from curveflow.schemas import Criterion


def test_criterion_record():
    record = criterion(4, "exactness", np.bool_(True), residual=1e-13)
    assert record == dict(
        id=4, name="exactness", passed=True, metrics={"residual": 1e-13}, message=""
    )
    assert type(record["passed"]) is bool
    Criterion.model_validate(record)


def test_selection_errors():
    with pytest.raises(ConfigError):
        run_acceptance(only=[99])
    with pytest.raises(ConfigError):
        AcceptanceRun(resolution="medium")


def test_every_criterion_is_registered():
    assert sorted(AcceptanceRun().checks()) == list(range(1, 14))


def test_coarse_doubles_spacing():
    assert AcceptanceRun(resolution="coarse").spacing(0.05) == pytest.approx(0.1)
    assert AcceptanceRun().spacing(0.05) == pytest.approx(0.05)


def test_ordered_pair():
    rng = np.random.default_rng(0)
    x = np.linspace(0.0, 5.0, 101)
    for _ in range(10):
        u1, u2 = ordered_pair(rng, x, gap=0.05)
        assert np.all(u1 <= u2 - 0.05 + 1e-12)


def test_cheap_criteria_pass():
    results = run_acceptance(resolution="coarse", only=[4, 6])
    assert [r["id"] for r in results] == [4, 6]
    for result in results:
        assert result["passed"], result
        Criterion.model_validate(result)


@pytest.fixture(scope="module")
def pinned_run():
    return AcceptanceRun(threads=2)


@pytest.mark.slow
@pytest.mark.parametrize("cid", range(1, 14))
def test_criterion_at_pinned_spacing(pinned_run, cid):
    result = pinned_run.checks()[cid]()
    assert result["passed"], result


if __name__ == "__main__":
    for result in run_acceptance():
        print(result["id"], result["name"], result["passed"])
