# Source presets, asymptotic speed, equilibrium sets and angular envelopes

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curveflow.errors import CurveflowError, InconsistencyError, SourceError
from curveflow.source_model import (
    SourceModel,
    angular_envelopes,
    asymptotic_speed,
    equilibrium_set,
    from_config,
    from_table,
    multi_bump,
    radial_planar,
    stadium_plateau,
    tent,
    zero,
)


def test_tent_speed():
    speed = asymptotic_speed(tent(center=2.0))
    assert speed.c == pytest.approx(1.0, abs=1e-3)
    assert len(speed.argmax_radii) == 1
    assert speed.argmax_radii[0] == pytest.approx(2.0, abs=1e-3)


def test_inner_peak_is_ignored():
    src = multi_bump(
        [dict(center=0.5, height=2.0, width=0.5), dict(center=3.0, height=1.0, width=1.0)]
    )
    assert asymptotic_speed(src).c == pytest.approx(1.0, abs=1e-3)


def test_zero_source():
    src = zero()
    assert asymptotic_speed(src).c == 0.0
    eq = equilibrium_set(src, 0.0)
    assert eq.r0 == pytest.approx(1.0)
    assert np.isinf(eq.M)


def test_equilibrium_set_single_tent():
    eq = equilibrium_set(tent(center=2.0), c=1.0, tol=1e-3)
    assert len(eq.intervals) == 1
    assert eq.r0 == pytest.approx(2.0, abs=2e-3)
    assert eq.M == pytest.approx(2.0, abs=2e-3)
    assert eq.contains(2.0)


def test_equilibrium_set_two_tents():
    src = multi_bump([dict(center=2.0), dict(center=5.0)])
    eq = equilibrium_set(src, c=1.0, tol=1e-3)
    assert len(eq.intervals) == 2
    assert eq.r0 == pytest.approx(2.0, abs=2e-3)
    assert eq.M == pytest.approx(5.0, abs=2e-3)


def test_equilibrium_set_plateau():
    src = from_table([0.0, 1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 1.0, 1.0, 0.0])
    eq = equilibrium_set(src, c=1.0, tol=1e-3)
    assert len(eq.intervals) == 1
    lo, hi = eq.intervals[0]
    assert lo == pytest.approx(2.0, abs=2e-3)
    assert hi == pytest.approx(3.0, abs=2e-3)


def test_equilibrium_set_monotone_in_tol():
    src = tent(center=2.0)
    narrow = equilibrium_set(src, 1.0, tol=1e-3)
    wide = equilibrium_set(src, 1.0, tol=1e-2)
    for lo, hi in narrow.intervals:
        assert wide.contains(lo) and wide.contains(hi)


def test_wrong_speed_is_inconsistent():
    with pytest.raises(InconsistencyError):
        equilibrium_set(tent(center=2.0), c=2.0)


@settings(max_examples=20, deadline=None)
@given(
    center=st.floats(1.5, 5.0),
    height=st.floats(0.2, 2.0),
    width=st.floats(0.5, 1.5),
    lam=st.floats(0.2, 5.0),
)
def test_speed_is_positively_homogeneous(center, height, width, lam):
    src = tent(center=center, height=height, width=width)
    c = asymptotic_speed(src).c
    scaled = asymptotic_speed(src.scaled(lam)).c
    assert scaled == pytest.approx(lam * c, abs=1e-3 * (1.0 + lam))


def test_invalid_sources_rejected():
    with pytest.raises(SourceError):
        SourceModel(kind="cubic", n=2, R=1.0, func=np.zeros_like, lipschitz_bound=0.0)
    with pytest.raises(SourceError):
        SourceModel(kind="radial", n=1, R=1.0, func=np.zeros_like, lipschitz_bound=0.0)
    with pytest.raises(SourceError):
        SourceModel(
            kind="radial", n=2, R=3.0, func=tent().func, lipschitz_bound=0.5
        ).validate()
    with pytest.raises(SourceError):
        SourceModel(
            kind="radial", n=2, R=3.0, func=lambda r: -np.ones_like(r), lipschitz_bound=1.0
        ).validate()
    assert issubclass(SourceError, CurveflowError)


def test_table_must_end_at_zero():
    with pytest.raises(SourceError):
        from_table([0.0, 1.0, 2.0], [1.0, 1.0, 0.5])


def test_from_config_preset_and_table():
    src = from_config(
        {"kind": "radial", "n": 2, "preset": "tent", "params": {"center": 2.0}}
    )
    assert src.name == "tent2"
    assert asymptotic_speed(src).c == pytest.approx(1.0, abs=1e-3)

    table = from_config({"table": [[0.0, 0.0], [1.0, 0.0], [2.0, 1.0], [3.0, 0.0]]})
    assert table.kind == "radial"
    assert float(table.eval(2.0)) == pytest.approx(1.0)

    planar = from_config({"kind": "planar", "preset": "tent"})
    assert planar.kind == "planar"

    with pytest.raises(SourceError):
        from_config({"preset": "volcano"})


def test_radial_envelopes_coincide():
    src = radial_planar(tent(center=2.0))
    r = np.linspace(0.0, 5.0, 51)
    env = angular_envelopes(src, r)
    np.testing.assert_allclose(env.upper, env.lower, atol=1e-12)
    np.testing.assert_allclose(env.upper, tent(center=2.0).eval(r), atol=1e-12)


def test_zero_envelopes():
    env = angular_envelopes(radial_planar(zero()), np.linspace(0.0, 3.0, 31))
    assert np.all(env.upper == 0.0)
    assert np.all(env.lower == 0.0)


def test_stadium_envelopes():
    src = stadium_plateau(a=1.0, c=1.0, width=0.5)
    r = np.linspace(0.0, 3.0, 61)
    env = angular_envelopes(src, r, c=1.0)
    assert np.all(env.lower <= env.upper)
    np.testing.assert_allclose(env.upper[r <= 2.0 + 1e-9], 1.0, atol=1e-9)
    np.testing.assert_allclose(env.lower[r <= 1.0 + 1e-9], 1.0, atol=1e-9)
    assert env.a == pytest.approx(1.0, abs=1e-9)
    assert env.b == pytest.approx(2.0, abs=1e-9)


def test_envelope_sandwich_on_samples():
    src = stadium_plateau(a=1.0, c=1.0, width=0.5)
    rng = np.random.default_rng(0)
    x1, x2 = rng.uniform(-3.0, 3.0, size=(2, 200))
    radius = np.hypot(x1, x2)
    order = np.argsort(radius)
    env = angular_envelopes(src, radius[order], n_angles=2880)
    values = src.eval(x1[order], x2[order])
    # angular sampling misses each point by at most r pi / n_angles
    slack = src.lipschitz_bound * radius[order] * np.pi / 2880 + 1e-12
    assert np.all(env.lower <= values + slack)
    assert np.all(values <= env.upper + slack)


if __name__ == "__main__":
    test_tent_speed()
    test_stadium_envelopes()
