"""Built-in scenarios."""
from __future__ import annotations

from .factor import PrimitiveDecl
from .fan import Fan, NodeGuard
from .netcore import (
    CIRCLE,
    LINE,
    ZERO,
    And,
    AsyncNetwork,
    At,
    CircDistLt,
    Cmp,
    ConnectionStructure,
    Constant,
    EventClause,
    Kuramoto,
    Not,
    Or,
    stop_edges,
)
from .scenario import Scenario, SimSettings


def term_deadlock() -> Scenario:
    """y waits at 1 while x < 1.5; z speeds up once x >= 1.5."""
    net = AsyncNetwork(
        (LINE, LINE, LINE),
        (Constant(1.0), Constant(1.0), Constant(0.5)),
        (
            EventClause("ystop", stop_edges([2]), And((At(2, 1.0), Cmp("lt", 1, 1.5))), {2: ZERO}),
            EventClause(
                "zfast",
                ConnectionStructure(frozenset({(1, 3)})),
                Cmp("ge", 1, 1.5),
                {1: Constant(1.0), 3: Constant(1.0)},
            ),
        ),
    )
    guards = (NodeGuard(0.0, 1.0), NodeGuard(0.0, 2.0), NodeGuard(0.0, 2.0))
    return Scenario("term_deadlock", Fan(net, guards), sim=SimSettings(t_max=20.0))


def single_track(collision_band: float = 0.5) -> Scenario:
    """Two trains on one track; they stop for good if they meet inside the band around 0."""
    b = collision_band
    meet = And((
        Cmp("ge", 1, 0.0, other=2),
        Cmp("ge", 1, -b), Cmp("le", 1, b),
        Cmp("ge", 2, -b), Cmp("le", 2, b),
    ))
    net = AsyncNetwork(
        (LINE, LINE),
        (Constant(0.5), Constant(-2.0)),
        (EventClause("collide", stop_edges([1, 2]), meet, {1: ZERO, 2: ZERO}),),
    )
    guards = (NodeGuard(-2.0, 2.0, 1), NodeGuard(2.0, -2.0, -1))
    return Scenario("single_track", Fan(net, guards), sim=SimSettings(t_max=30.0, T_max=4.0),
                    start_times=(0.0, 3.0))


def phase_livelock(gap: float = 0.5, omega: float = 1.0, kappa: float = 0.25, eps: float = 0.1) -> Scenario:
    """Two trains wait at a loop until a pair of coupled phase oscillators is nearly in phase."""
    wait = Not(CircDistLt(3, 4, eps))
    net = AsyncNetwork(
        (LINE, LINE, CIRCLE, CIRCLE),
        (Constant(1.0), Constant(-1.0), Kuramoto(omega, kappa, 4), Kuramoto(omega, kappa, 3)),
        (
            EventClause("hold1", stop_edges([1]), And((At(1, 0.0), wait)), {1: ZERO}),
            EventClause("hold2", stop_edges([2]), And((At(2, 0.0), wait)), {2: ZERO}),
        ),
    )
    guards = (NodeGuard(-1.0, 1.0, 1), NodeGuard(1.0, -1.0, -1), None, None)
    return Scenario(
        "phase_livelock",
        Fan(net, guards, aux=(0.0, 0.0, 0.0, gap % 1.0)),
        sim=SimSettings(t_max=100.0, min_period=0.5, max_period=2.0),
    )


THREE_TRAINS_PARAMS = dict(L=2.0, p=3.0, q=3.0, r=6.0, v1=-1.0, v2=1.0, v3=-0.5)


def three_trains(L=2.0, p=3.0, q=3.0, r=6.0, v1=-1.0, v2=1.0, v3=-0.5, join_rows: bool = True) -> Scenario:
    """Three trains and two passing loops at 0 and L."""
    a1 = And((At(1, 0.0), Cmp("lt", 2, 0.0)))
    a2a = And((Cmp("gt", 1, 0.0), At(2, 0.0)))
    a2b = And((At(2, L), Cmp("gt", 3, L)))
    a3 = And((Cmp("lt", 2, L), At(3, L)))
    clauses = [
        EventClause("a1", stop_edges([1]), a1, {1: ZERO}),
        EventClause("a2a", stop_edges([2]), a2a, {2: ZERO}),
        EventClause("a2b", stop_edges([2]), a2b, {2: ZERO}),
        EventClause("a3", stop_edges([3]), a3, {3: ZERO}),
    ]
    if join_rows:
        clauses += [
            EventClause("a1a3", stop_edges([1, 3]), And((At(1, 0.0), Cmp("lt", 2, 0.0), At(3, L))), {1: ZERO, 3: ZERO}),
            EventClause("a2a3", stop_edges([2, 3]), And((Cmp("gt", 1, 0.0), At(2, 0.0), At(3, L))), {2: ZERO, 3: ZERO}),
        ]
    net = AsyncNetwork((LINE,) * 3, (Constant(v1), Constant(v2), Constant(v3)), tuple(clauses))
    guards = (NodeGuard(p, -q, -1), NodeGuard(-q, r, 1), NodeGuard(r, -q, -1))
    prims = (
        PrimitiveDecl("Pa", {1, 2}, {1: (p, -q), 2: (-q, L / 2)}, ("a1", "a2a")),
        PrimitiveDecl("Pb", {2, 3}, {2: (L / 2, r), 3: (r, -q)}, ("a2b", "a3")),
    )
    return Scenario("three_trains", Fan(net, guards), prims, SimSettings(t_max=60.0, T_max=3.0))


def barrier_scenario(name: str, k: int, chain: list, speeds, T_max: float = 2.0) -> Scenario:
    """Nodes on lines from 0; each primitive is a rendezvous at the midpoint of its stage.

    ``chain`` lists (id, support) in an order compatible with the intended
    partial order; stages along each node are consecutive unit intervals.
    """
    pos = {i: 0.0 for i in range(1, k + 1)}
    prims, clauses = [], []
    for pid, sup in chain:
        stages = {i: (pos[i], pos[i] + 1.0) for i in sup}
        mid = {i: pos[i] + 0.5 for i in sup}
        ids = []
        for i in sorted(sup):
            others = Or(tuple(Cmp("lt", j, mid[j]) for j in sorted(sup) if j != i))
            cid = f"{pid}_{i}"
            clauses.append(EventClause(cid, stop_edges([i]), And((At(i, mid[i]), others)), {i: ZERO}))
            ids.append(cid)
        for i in sup:
            pos[i] += 1.0
        prims.append(PrimitiveDecl(pid, sup, stages, ids))
    net = AsyncNetwork((LINE,) * k, tuple(Constant(float(v)) for v in speeds), tuple(clauses))
    guards = tuple(NodeGuard(0.0, max(pos[i], 1.0), 1) for i in range(1, k + 1))
    return Scenario(name, Fan(net, guards), tuple(prims), SimSettings(t_max=60.0, T_max=T_max))


def six_node() -> Scenario:
    chain = [("P1", {2, 3, 4}), ("P2", {3, 4, 5}), ("P3", {1, 2, 3})]
    return barrier_scenario("six_node", 6, chain, (1.0, 0.8, 1.25, 0.5, 1.0, 0.75))


NINE_NODE_LAYERS = [["a", "c"], ["b"], ["d", "f"], ["e", "g"], ["h"]]
NINE_NODE_ALT_LAYERS = [["a"], ["b"], ["d"], ["c", "e", "f"], ["g", "h"]]


def nine_node() -> Scenario:
    chain = [
        ("a", {1, 2}), ("c", {8, 9}), ("b", {2, 3, 4}), ("d", {3, 5}),
        ("f", {4, 6}), ("e", {5, 7}), ("g", {1, 6}), ("h", {7, 9}),
    ]
    speeds = (1.0, 0.9, 1.1, 0.7, 1.3, 0.6, 1.0, 0.8, 1.2)
    return barrier_scenario("nine_node", 9, chain, speeds)


FIXTURES = {
    "term_deadlock": term_deadlock,
    "single_track": single_track,
    "phase_livelock": phase_livelock,
    "three_trains": three_trains,
    "six_node": six_node,
    "nine_node": nine_node,
}
