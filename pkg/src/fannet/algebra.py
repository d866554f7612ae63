"""Independence, amalgamation, precedence and concatenation over a shared node set."""
from __future__ import annotations

from .fan import Fan, NodeGuard
from .netcore import AsyncNetwork, linked_nodes


class IncompatibleNetworks(ValueError):
    pass


class NotIndependent(ValueError):
    pass


class NotPreceding(ValueError):
    pass


def support(fan: Fan) -> frozenset:
    """Nodes that any clause links or reads."""
    out: set = set()
    for c in fan.net.clauses:
        out |= linked_nodes(c.alpha)
        out |= c.predicate.nodes()
    return frozenset(out)


def _compatible(a: Fan, b: Fan) -> None:
    if a.net.spaces != b.net.spaces:
        raise IncompatibleNetworks("node sets or phase spaces differ")
    if a.net.default_fields != b.net.default_fields:
        raise IncompatibleNetworks("default fields differ")


def independent(a: Fan, b: Fan) -> bool:
    _compatible(a, b)
    return not (support(a) & support(b)) and a.guards == b.guards


def _merge_clauses(fans) -> tuple:
    out, seen = [], {}
    for f in fans:
        for c in f.net.clauses:
            if c.id in seen:
                if seen[c.id] != c:
                    raise IncompatibleNetworks(f"clause id {c.id!r} used for two different clauses")
                continue
            seen[c.id] = c
            out.append(c)
    return tuple(out)


def amalgamate(fans) -> Fan:
    fans = list(fans)
    if not fans:
        raise ValueError("nothing to amalgamate")
    for i, a in enumerate(fans):
        for b in fans[i + 1:]:
            if not independent(a, b):
                raise NotIndependent("amalgamation needs pairwise independent networks")
    if len(fans) == 1:
        return fans[0]
    base = fans[0]
    net = AsyncNetwork(base.net.spaces, base.net.default_fields, _merge_clauses(fans))
    return Fan(net, base.guards, base.aux)


def precedes(a: Fan, b: Fan) -> bool:
    """a hands over to b: shared support, a's term threshold is b's init threshold on the union of supports."""
    _compatible(a, b)
    sa, sb = support(a), support(b)
    if not sa & sb:
        return False
    for i in range(1, a.k + 1):
        ga, gb = a.guards[i - 1], b.guards[i - 1]
        if (ga is None) != (gb is None):
            return False
        if ga is None:
            continue
        if i in sa | sb:
            if ga.direction != gb.direction or ga.term != gb.init:
                return False
        elif ga != gb and not (ga.coincident and ga.direction == gb.direction and ga.term == gb.init):
            # off-support nodes may only pass through unchanged, or start moving in b from where a left them
            return False
    return True


def concatenate(b: Fan, a: Fan) -> Fan:
    """Run a, then b: init thresholds from a, term thresholds from b, union of clauses."""
    if not precedes(a, b):
        raise NotPreceding("first argument must be preceded by the second")

    guards = []
    for ga, gb in zip(a.guards, b.guards):
        if ga is None:
            guards.append(None)
            continue
        coincident = ga.init == gb.term
        guards.append(NodeGuard(ga.init, gb.term, ga.direction, coincident, ga.margin))
    net = AsyncNetwork(a.net.spaces, a.net.default_fields, _merge_clauses([a, b]))
    return Fan(net, tuple(guards), a.aux)
