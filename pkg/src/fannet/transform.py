"""Core (clamped event evaluation) and stopped-network rewrites."""
from __future__ import annotations

from .fan import Fan
from .netcore import ZERO, AsyncNetwork, At, ClampSpec, EventClause, NetworkError, stop_edges


def default_clamp(fan: Fan, tol: float = 1e-9) -> ClampSpec:
    """Representatives placed exactly on the init and term thresholds."""
    entries = []
    for g in fan.guards:
        entries.append(None if g is None else (g.init, g.term, g.direction, g.init, g.term))
    return ClampSpec(tuple(entries), tol)


def shifted_clamp(fan: Fan, fraction: float = 0.5, tol: float = 1e-9) -> ClampSpec:
    """Representatives pushed ``fraction`` of the margin outward; an alternative valid choice."""
    entries = []
    for g in fan.guards:
        if g is None:
            entries.append(None)
            continue
        m = fraction * g.v_margin
        entries.append((g.init, g.term, g.direction, g.init - g.direction * m, g.term + g.direction * m))
    return ClampSpec(tuple(entries), tol)


def _check_clamp(fan: Fan, clamp: ClampSpec) -> None:
    if len(clamp.entries) != fan.k:
        raise NetworkError("clamp needs one entry per node")
    for i, (g, e) in enumerate(zip(fan.guards, clamp.entries), start=1):
        if (g is None) != (e is None):
            raise NetworkError(f"node {i}: clamp entry must exist exactly for guarded nodes")
        if g is None:
            continue
        init, term, d, cm, cp = e
        if (init, term, d) != (g.init, g.term, g.direction):
            raise NetworkError(f"node {i}: clamp thresholds disagree with guards")
        m = g.v_margin
        if not -m <= d * (cm - init) <= 0 or not 0 <= d * (cp - term) <= m:
            raise NetworkError(f"node {i}: clamp representatives must lie outside the zero region within the margin")


def core(fan: Fan, clamp: ClampSpec | None = None) -> Fan:
    """Evaluate the event map on the clamped state; exterior nodes keep their default fields."""
    clamp = clamp or default_clamp(fan)
    _check_clamp(fan, clamp)
    net = fan.net
    return fan.with_net(AsyncNetwork(net.spaces, net.default_fields, net.clauses, clamp))


def stopped(fan: Fan) -> Fan:
    """Each guarded node latches permanently on first contact with its term threshold."""
    net = fan.net
    ids = {c.id for c in net.clauses}
    extra = []
    for i in fan.guarded():
        cid = f"stop{i}"
        while cid in ids:
            cid = "_" + cid
        ids.add(cid)
        extra.append(EventClause(cid, stop_edges([i]), At(i, fan.guards[i - 1].term), {i: ZERO}, override=True))
    return fan.with_net(AsyncNetwork(net.spaces, net.default_fields, net.clauses + tuple(extra), net.clamp))
