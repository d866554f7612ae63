"""End-to-end acceptance checks; each prints one PASS/FAIL line.

Run directly with ``python3 tests/test_acceptance.py`` for the summary alone.
"""
import numpy as np
import pytest

from fannet.deadlock import LIVELOCK, NONE, PARTIAL, TOTAL, detect_livelock, detect_stall, hidden_deadlock_scan
from fannet.fan import transit, transition
from fannet.factor import factorize, order_from_layers, verify_modularization
from fannet.geninit import evolve_generalized, generalized_transit, generalized_transition
from fannet.library import (
    NINE_NODE_ALT_LAYERS,
    NINE_NODE_LAYERS,
    nine_node,
    phase_livelock,
    single_track,
    six_node,
    term_deadlock,
    three_trains,
)
from fannet.netcore import evaluate_event_map, network_field
from fannet.properties import run_all
from fannet.semiflow import advance
from fannet.transform import core, default_clamp, shifted_clamp, stopped

TOL = 1e-6


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str = "") -> None:
        with capsys.disabled():
            print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def _dev(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def criterion_1():
    fan = term_deadlock().fan
    rec = transit(fan, fan.init_point(), 20.0)
    d = max(_dev(rec.S, (1.0, 2.5, 2.75)), _dev(rec.Y, (1.0, 2.0, 2.0)))
    return rec.reached and d <= TOL, f"S={rec.S} Y={rec.Y}"


def criterion_2():
    fan = stopped(term_deadlock().fan)
    tr = advance(fan.net, fan.init_point(), None, 20.0)
    rep = detect_stall(tr, fan)
    s3 = generalized_transit(fan, fan.init_point(), (0.0,) * 3, 20.0).S[2]
    ok = (rep.kind == PARTIAL and rep.stalled_nodes == (2,) and abs(rep.sink_state[1] - 1.0) <= TOL
          and s3 is not None and abs(s3 - 4.0) <= TOL)
    return ok, f"kind={rep.kind} stalled={rep.stalled_nodes} y={rep.sink_state[1]} S3={s3}"


def criterion_3():
    fan = single_track().fan
    ok_run = evolve_generalized(fan, fan.init_point(), (0.0, 0.0), 30.0)
    rec = generalized_transit(fan, fan.init_point(), (0.0, 0.0), 30.0)
    pos = ok_run.state_at(1.25)
    bad = evolve_generalized(fan, fan.init_point(), (0.0, 3.0), 30.0)
    rep = detect_stall(bad, fan)
    scan = hidden_deadlock_scan(fan, [0, 1, 2, 3, 4])
    found = {tuple(w["T"]) for w in scan.witnesses}
    ok = (rec.reached and _dev(pos, (-1.375, -0.5)) <= TOL and rep.kind == TOTAL
          and abs(rep.entry_time - 4.0) <= TOL and _dev(rep.sink_state, (0.0, 0.0)) <= TOL
          and (0.0, 3.0) in found)
    return ok, f"x(1.25)={pos.tolist()} deadlock={rep.kind}@{rep.entry_time} witnesses={sorted(found)}"


def criterion_4():
    from scipy.integrate import solve_ivp

    scn = phase_livelock(0.5)
    tr = advance(scn.fan.net, scn.fan.init_point(), None, 100.0)
    d = _dev((tr.x[:, 3] - tr.x[:, 2]) % 1.0, np.full(len(tr.times), 0.5))
    live = detect_livelock(tr, scn.fan, scn.sim.min_period, scn.sim.max_period)

    near = phase_livelock(0.4)
    rec = transit(near.fan, near.fan.init_point(), 100.0)

    def hit(t, y):
        return y[0] - 0.1

    hit.terminal = True
    sol = solve_ivp(lambda t, y: [-0.5 * np.sin(2 * np.pi * y[0])], (0, 100), [0.4], events=hit,
                    rtol=1e-12, atol=1e-14)
    expected = max(1.0, float(sol.t_events[0][0])) + 1.0
    no_live = detect_livelock(rec.trajectory, near.fan, near.sim.min_period, near.sim.max_period).kind == NONE
    ok = d <= TOL and live.kind == LIVELOCK and rec.reached and no_live and abs(rec.S[0] - expected) <= TOL
    return ok, f"antiphase dev={d:.1e} period={live.period} near-sync S={rec.S[:2]} oracle={expected:.6f}"


def criterion_5():
    fan = three_trains().fan
    rng = np.random.default_rng(0)
    Y0, S0 = transition(fan, fan.init_point(), 60.0)
    worst = 0.0
    for _ in range(100):
        T = rng.uniform(0.0, 10.0)
        Y, S = generalized_transition(fan, fan.init_point(), (T,) * 3, 60.0)
        worst = max(worst, _dev(Y, Y0), _dev(S, np.array(S0) + T))
    return worst <= TOL, f"max deviation {worst:.2e} over 100 shifts"


def criterion_6():
    fan = three_trains().fan
    sfan = stopped(fan)
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(50):
        T = rng.uniform(0.0, 3.0, 3)
        S = generalized_transit(fan, fan.init_point(), T, 60.0).S
        a = evolve_generalized(fan, fan.init_point(), T, 60.0)
        b = evolve_generalized(sfan, fan.init_point(), T, 60.0)
        for i, s in enumerate(S):
            before = np.linspace(0.0, s, 40)
            after = np.linspace(s, 60.0, 40)
            worst = max(worst, _dev(a.state_at(before)[:, i], b.state_at(before)[:, i]),
                        _dev(b.state_at(after)[:, i], np.full(40, fan.guards[i].term)))
    return worst <= TOL, f"max deviation {worst:.2e} over 50 start-time draws"


def criterion_7():
    fan = three_trains().fan
    cfan = core(fan)
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        T = rng.uniform(0.0, 3.0, 3)
        S = generalized_transit(fan, fan.init_point(), T, 60.0).S
        a = evolve_generalized(fan, fan.init_point(), T, 60.0)
        b = evolve_generalized(cfan, fan.init_point(), T, 60.0)
        ts = np.linspace(0.0, min(S), 60)
        worst = max(worst, _dev(a.state_at(ts), b.state_at(ts)))
    ca, cb = core(fan, default_clamp(fan)), core(fan, shifted_clamp(fan))
    mismatches = 0
    for _ in range(1000):
        x = np.array([rng.uniform(-4, 4), rng.uniform(-4, 7), rng.uniform(-4, 7)])
        lat = {n: float(x[n - 1]) for n in (1, 2, 3) if rng.random() < 0.5}
        same = (evaluate_event_map(ca.net, x, lat)[0] == evaluate_event_map(cb.net, x, lat)[0]
                and np.array_equal(network_field(ca.net, x, lat), network_field(cb.net, x, lat)))
        mismatches += not same
    return worst <= TOL and mismatches == 0, f"trajectory dev {worst:.2e}, clamp mismatches {mismatches}/1000"


def criterion_8():
    scn = three_trains()
    rep = verify_modularization(scn.fan, factorize(scn.fan, scn.primitives), 50, seed=0)
    return rep.ok(TOL), f"maxStateDev={rep.max_state_dev:.2e} maxTimeDev={rep.max_time_dev:.2e} failures={len(rep.failures)}"


def criterion_9():
    six = six_node()
    d6 = factorize(six.fan, six.primitives).dag
    q = {i: sorted(d6.q(i)) for i in range(1, 7)}
    ok6 = (sorted(d6.hasse.edges()) == [("P1", "P2"), ("P2", "P3")]
           and q == {1: [3], 2: [1, 3], 3: [1, 2, 3], 4: [1, 2], 5: [2], 6: []})
    nine = nine_node()
    d9 = factorize(nine.fan, nine.primitives).dag
    ok9 = (d9.layers == NINE_NODE_LAYERS
           and order_from_layers(nine.primitives, NINE_NODE_LAYERS) == d9.order
           and order_from_layers(nine.primitives, NINE_NODE_ALT_LAYERS) == d9.order)
    return ok6 and ok9, f"six_node q={q} nine_node layers={d9.layers}"


def criterion_10():
    results = run_all(0)
    failed = [r.name for r in results if not r.passed]
    return not failed, "; ".join(f"{r.name}={'ok' if r.passed else 'FAIL'}" for r in results)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("n", range(1, 11))
def test_criterion(n, report):
    ok, detail = CRITERIA[n - 1]()
    report(n, ok, detail)


if __name__ == "__main__":
    for n, fn in enumerate(CRITERIA, start=1):
        ok, detail = fn()
        print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
