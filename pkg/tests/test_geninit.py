import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fannet.fan import NotConnected, transition
from fannet.geninit import (
    evolve_generalized,
    generalized_transition,
    regularity_scan,
    switch_schedule,
)
from fannet.library import FIXTURES, single_track, three_trains
from fannet.semiflow import advance


@pytest.mark.parametrize(
    "T, taus, J",
    [
        ((0, 0, 0), (0.0,), [{1, 2, 3}]),
        ((0, 3), (0.0, 3.0), [{1}, {1, 2}]),
        ((2, 1, 2), (1.0, 2.0), [{2}, {1, 2, 3}]),
    ],
)
def test_schedule_examples(T, taus, J):
    s = switch_schedule(T)
    assert s.taus == taus and [set(j) for j in s.started] == J


@given(st.lists(st.floats(0, 10), min_size=1, max_size=6))
def test_schedule_round_trip(T):
    s = switch_schedule(T)
    assert set(s.taus) == set(T)
    assert all(a < b for a, b in zip(s.started, s.started[1:]))
    assert s.started[-1] == frozenset(range(1, len(T) + 1))


def test_schedule_rejects_negative():
    with pytest.raises(ValueError):
        switch_schedule((0.0, -1.0))


def test_single_track_positions_at_one_and_a_quarter():
    fan = single_track().fan
    tr = evolve_generalized(fan, fan.init_point(), (0.0, 0.0), 2.0)
    assert np.allclose(tr.state_at(1.25), [-1.375, -0.5], atol=1e-6)


def test_single_track_late_start_collides_at_origin():
    fan = single_track().fan
    tr = evolve_generalized(fan, fan.init_point(), (0.0, 3.0), 10.0)
    assert np.allclose(tr.state_at(4.0), [0.0, 0.0], atol=1e-6)
    assert np.allclose(tr.final_state, [0.0, 0.0], atol=1e-6)


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_zero_start_times_reproduce_plain_flow_bitwise(name):
    fan = FIXTURES[name]().fan
    a = advance(fan.net, fan.init_point(), None, 15.0)
    b = evolve_generalized(fan, fan.init_point(), (0.0,) * fan.k, 15.0)
    assert np.array_equal(a.x, b.x) and a.times == b.times


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.0, 4.0), min_size=3, max_size=3))
def test_nodes_frozen_until_start(T):
    fan = three_trains().fan
    X = fan.init_point()
    tr = evolve_generalized(fan, X, T, 8.0)
    T = np.array(T)
    for t, x in zip(tr.times, tr.states):
        held = T >= t
        assert np.array_equal(x[held], X[held])


def test_single_track_terminal_times():
    fan = single_track().fan
    Y, S = generalized_transition(fan, fan.init_point(), (0.0, 0.0), 30.0)
    assert np.allclose(S, (8.0, 2.0), atol=1e-6)


def test_hidden_deadlock_is_not_connected():
    fan = single_track().fan
    with pytest.raises(NotConnected):
        generalized_transition(fan, fan.init_point(), (0.0, 3.0), 30.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 5.0))
def test_uniform_shift(T):
    fan = three_trains().fan
    X = fan.init_point()
    Y0, S0 = transition(fan, X, 60.0)
    Y, S = generalized_transition(fan, X, (T,) * 3, 60.0)
    assert np.allclose(Y, Y0, atol=1e-6)
    assert np.allclose(S, np.array(S0) + T, atol=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(0.0, 4.0), min_size=3, max_size=3))
def test_start_times_bound_timing(T):
    fan = three_trains().fan
    _, S = generalized_transition(fan, fan.init_point(), T, 60.0)
    assert all(s >= t for s, t in zip(S, T))


def test_regularity_scan_three_trains_connected():
    rep = regularity_scan(three_trains().fan, 1, 20, 3.0, seed=2)
    assert rep.connected_fraction == 1.0 and rep.failures == []


def test_regularity_scan_single_track_reports_deadlocks():
    rep = regularity_scan(single_track().fan, 1, 40, 4.0, seed=0)
    assert rep.connected_fraction < 1.0
    for f in rep.failures:
        assert 1.75 <= f["T"][1] - f["T"][0] <= 4.25
        assert f["classification"] == "total"


def test_regularity_scan_only_zero_times():
    rep = regularity_scan(three_trains().fan, 1, 1, 3.0)
    assert rep.samples == 1 and rep.connected_fraction == 1.0
