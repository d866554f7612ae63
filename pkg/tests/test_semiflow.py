import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fannet.library import FIXTURES, phase_livelock, term_deadlock, three_trains
from fannet.netcore import LINE, AsyncNetwork, Cmp, Constant, EventClause, active_clauses, stop_edges
from fannet.semiflow import IntegratorConfig, ZenoSuspected, advance, semigroup_check


@pytest.fixture(scope="module")
def td():
    return term_deadlock().fan.net


def test_state_at_one(td):
    tr = advance(td, [0, 0, 0], None, 1.0)
    assert np.allclose(tr.final_state, [1.0, 1.0, 0.5], atol=1e-12)
    latch = tr.events_of("latch")
    assert latch and latch[0]["t"] == 1.0 and latch[0]["payload"]["node"] == 2


def test_unlatch_and_speedup_at_one_and_a_half(td):
    tr = advance(td, [0, 0, 0], None, 3.0)
    assert [e["t"] for e in tr.events_of("unlatch")] == [1.5]
    assert np.allclose(tr.state_at(2.0), [2.0, 1.5, 1.25], atol=1e-12)


def test_zero_duration(td):
    tr = advance(td, [0, 0, 0], None, 0.0)
    assert tr.times == [0.0] and tr.events == []


def test_negative_duration_rejected(td):
    with pytest.raises(ValueError):
        advance(td, [0, 0, 0], None, -1.0)


def test_semigroup_examples(td):
    assert semigroup_check(td, [0, 0, 0], 0.0, 2.0) == 0.0
    assert semigroup_check(td, [0, 0, 0], 0.5, 0.5) <= 1e-6


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 20.0), st.floats(0.0, 20.0))
def test_semigroup_three_trains(s, t):
    net = three_trains().fan.net
    assert semigroup_check(net, [3.0, -3.0, 6.0], s, t) <= 1e-6


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3), min_size=3, max_size=3), st.floats(0.1, 10))
def test_constant_fields_advance_exactly(speeds, t):
    net = AsyncNetwork((LINE,) * 3, tuple(Constant(v) for v in speeds))
    tr = advance(net, [0.0, 1.0, -1.0], None, t)
    expected = np.array([0.0, 1.0, -1.0]) + np.array(speeds) * t
    assert np.array_equal(tr.final_state, expected)


def test_antiphase_preserved_for_a_hundred_time_units():
    fan = phase_livelock(0.5).fan
    tr = advance(fan.net, fan.init_point(), None, 100.0)
    d = (tr.x[:, 3] - tr.x[:, 2]) % 1.0
    assert np.max(np.abs(d - 0.5)) <= 1e-6


def test_clause_set_constant_between_switches():
    fan = three_trains().fan
    tr = advance(fan.net, fan.init_point(), None, 20.0)
    switches = {e["t"] for e in tr.events_of("switch")}
    for (t0, c0), (t1, c1) in zip(zip(tr.times, tr.clauses), zip(tr.times[1:], tr.clauses[1:])):
        mid = 0.5 * (t0 + t1)
        x = tr.state_at(mid)
        assert set(active_clauses(fan.net, x, tr_latches_at(tr, mid))) == set(c0) or t1 in switches


def tr_latches_at(tr, t):
    lat = {}
    for e in tr.events:
        if e["t"] > t:
            break
        if e["kind"] == "latch":
            lat[e["payload"]["node"]] = e["payload"]["value"]
        elif e["kind"] == "unlatch":
            lat.pop(e["payload"]["node"], None)
    return lat


def test_chattering_raises_zeno():
    net = AsyncNetwork(
        (LINE,),
        (Constant(1.0),),
        (
            EventClause("up", stop_edges([1]), Cmp("lt", 1, 0.0), {1: Constant(1.0)}),
            EventClause("down", stop_edges([1]), Cmp("ge", 1, 0.0), {1: Constant(-1.0)}),
        ),
    )
    with pytest.raises(ZenoSuspected):
        advance(net, [-1.0], None, 5.0)


def test_config_must_be_positive():
    with pytest.raises(ValueError):
        IntegratorConfig(h_max=0.0)


def test_times_strictly_increase_on_fixtures():
    for build in FIXTURES.values():
        fan = build().fan
        tr = advance(fan.net, fan.init_point(), None, 10.0)
        assert np.all(np.diff(tr.t) > 0)


def test_csv_and_jsonl(td):
    tr = advance(td, [0, 0, 0], None, 3.0, watches=[(3, 2.0)])
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,x_1,x_2,x_3,activeClauses"
    row = next(r for r in lines[1:] if r.startswith("2.75,"))
    assert abs(float(row.split(",")[3]) - 2.0) <= 1e-6
    recs = [json.loads(s) for s in tr.events_jsonl().splitlines()]
    assert {"t", "kind", "payload"} <= set(recs[0])
    assert any(r["kind"] == "terminalHit" and r["t"] == 2.75 for r in recs)
