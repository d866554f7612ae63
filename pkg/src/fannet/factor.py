"""Partial order of declared primitive events, layered factorization and modular verification."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .algebra import concatenate
from .fan import Fan, NodeGuard, NotConnected
from .geninit import generalized_transition, sample_init_points
from .netcore import AsyncNetwork


class CyclicOrder(ValueError):
    pass


@dataclass(frozen=True)
class PrimitiveDecl:
    id: str
    support: frozenset
    stages: tuple  # sorted ((node, (from, to)), ...)
    clauses: tuple

    def __init__(self, id: str, support, stages: dict, clauses):
        object.__setattr__(self, "id", str(id))
        object.__setattr__(self, "support", frozenset(int(n) for n in support))
        object.__setattr__(self, "stages", tuple(sorted((int(n), (float(a), float(b))) for n, (a, b) in dict(stages).items())))
        object.__setattr__(self, "clauses", tuple(clauses))
        if len(self.support) < 2:
            raise ValueError(f"primitive {self.id!r} needs at least two nodes")
        if set(self.stage_map) != set(self.support):
            raise ValueError(f"primitive {self.id!r}: one stage interval per support node required")
        for n, (a, b) in self.stages:
            if a == b:
                raise ValueError(f"primitive {self.id!r}: empty stage on node {n}")

    @property
    def stage_map(self) -> dict:
        return dict(self.stages)


def _before(p: PrimitiveDecl, q: PrimitiveDecl, node: int) -> bool | None:
    """True if p's stage on ``node`` ends where or before q's begins, False if after, None if they overlap."""
    pa, pb = p.stage_map[node]
    qa, qb = q.stage_map[node]
    d = 1.0 if pb > pa else -1.0
    if d * (qa - pb) >= 0:
        return True
    if d * (pa - qb) >= 0:
        return False
    return None


@dataclass
class FeedforwardDag:
    prims: dict  # id -> PrimitiveDecl
    graph: nx.DiGraph  # generated relation
    hasse: nx.DiGraph  # transitive reduction
    layers: list  # list of lists of ids

    @property
    def order(self) -> frozenset:
        """The partial order as the set of (P, Q) pairs with P before Q."""
        closure = nx.transitive_closure_dag(self.graph)
        return frozenset(closure.edges())

    def node_chain(self, i: int) -> list:
        ids = [p for p in nx.topological_sort(self.graph) if i in self.prims[p].support]
        return ids

    def q(self, i: int) -> frozenset:
        return frozenset(j for j, layer in enumerate(self.layers, start=1) if any(i in self.prims[p].support for p in layer))


def partial_order(prims) -> FeedforwardDag:
    prims = list(prims)
    by_id = {p.id: p for p in prims}
    if len(by_id) != len(prims):
        raise ValueError("primitive ids must be unique")
    g = nx.DiGraph()
    g.add_nodes_from(by_id)
    for i, p in enumerate(prims):
        for q in prims[i + 1:]:
            shared = p.support & q.support
            if not shared:
                continue
            rel = {_before(p, q, n) for n in shared}
            if None in rel:
                raise ValueError(f"stages of {p.id!r} and {q.id!r} overlap")
            if len(rel) > 1:
                raise CyclicOrder(f"{p.id!r} and {q.id!r} are ordered both ways on shared nodes")
            g.add_edge(*((p.id, q.id) if rel.pop() else (q.id, p.id)))
    if not nx.is_directed_acyclic_graph(g):
        raise CyclicOrder(f"cycle among primitives: {nx.find_cycle(g)}")
    hasse = nx.transitive_reduction(g)
    hasse.add_nodes_from(g.nodes)
    layers = [sorted(gen) for gen in nx.topological_generations(g)]
    return FeedforwardDag(by_id, g, hasse, layers)


def order_from_layers(prims, layers) -> frozenset:
    """Transitive closure of 'earlier layer, shared node' over an explicit layering."""
    by_id = {p.id: p for p in prims}
    g = nx.DiGraph()
    g.add_nodes_from(by_id)
    for j, layer in enumerate(layers):
        for later in layers[j + 1:]:
            for a in layer:
                for b in later:
                    if by_id[a].support & by_id[b].support:
                        g.add_edge(a, b)
    if not nx.is_directed_acyclic_graph(g):
        raise CyclicOrder("layering induces a cycle")
    return frozenset(nx.transitive_closure_dag(g).edges())


def layering_valid(prims, layers) -> bool:
    """Disjoint supports inside each layer and stage order respected across layers."""
    by_id = {p.id: p for p in prims}
    for layer in layers:
        for i, a in enumerate(layer):
            for b in layer[i + 1:]:
                if by_id[a].support & by_id[b].support:
                    return False
    for j, layer in enumerate(layers):
        for later in layers[j + 1:]:
            for a in layer:
                for b in later:
                    for n in by_id[a].support & by_id[b].support:
                        if not _before(by_id[a], by_id[b], n):
                            return False
    return True


@dataclass
class FactorizationResult:
    dag: FeedforwardDag
    factors: list  # Fan per layer, in order
    layer_ids: list
    dropped_clauses: tuple = ()

    @property
    def q(self) -> int:
        return len(self.factors)


def _check_stages(fan: Fan, prims) -> None:
    for i in range(1, fan.k + 1):
        stages = sorted(
            (p.stage_map[i] for p in prims if i in p.support),
            key=lambda s: (fan.guards[i - 1].direction if fan.guards[i - 1] else 1) * s[0],
        )
        if not stages:
            continue
        g = fan.guards[i - 1]
        if g is None:
            raise ValueError(f"node {i} is in a primitive but has no guards")
        pos = g.init
        for a, b in stages:
            if a != pos:
                raise ValueError(f"node {i}: stages are not contiguous from the init threshold (expected {pos}, got {a})")
            pos = b
        if pos != g.term:
            raise ValueError(f"node {i}: last stage must end on the term threshold")


def factorize(fan: Fan, prims) -> FactorizationResult:
    prims = list(prims)
    dag = partial_order(prims)
    _check_stages(fan, prims)
    known = {c.id for c in fan.net.clauses}
    for p in prims:
        missing = set(p.clauses) - known
        if missing:
            raise ValueError(f"primitive {p.id!r} names unknown clauses {sorted(missing)}")
    used = {c for p in prims for c in p.clauses}
    dropped = tuple(c.id for c in fan.net.clauses if c.id not in used)

    pos = {i: (g.init if g else None) for i, g in enumerate(fan.guards, start=1)}
    factors = []
    q = len(dag.layers)
    for j, layer in enumerate(dag.layers, start=1):
        stage_of = {}
        for pid in layer:
            stage_of.update(dag.prims[pid].stage_map)
        guards = []
        for i, g in enumerate(fan.guards, start=1):
            if g is None:
                guards.append(None)
                continue
            if i in stage_of:
                a, b = stage_of[i]
                guards.append(NodeGuard(a, b, g.direction, margin=g.margin))
                pos[i] = b
            elif j == q and pos[i] != g.term:
                guards.append(NodeGuard(pos[i], g.term, g.direction, margin=g.margin))
                pos[i] = g.term
            else:
                guards.append(NodeGuard(pos[i], pos[i], g.direction, coincident=True, margin=g.margin))
        clauses = tuple(c for c in fan.net.clauses if any(c.id in dag.prims[p].clauses for p in layer))
        net = AsyncNetwork(fan.net.spaces, fan.net.default_fields, clauses)
        factors.append(Fan(net, tuple(guards), fan.aux))
    return FactorizationResult(dag, factors, [list(l) for l in dag.layers], dropped)


def primitive_fan(result: FactorizationResult, pid: str) -> Fan:
    """The primitive alone, with the guards of the layer it sits in."""
    j = next(j for j, layer in enumerate(result.layer_ids) if pid in layer)
    layer_fan = result.factors[j]
    ids = set(result.dag.prims[pid].clauses)
    net = layer_fan.net
    clauses = tuple(c for c in net.clauses if c.id in ids)
    return Fan(AsyncNetwork(net.spaces, net.default_fields, clauses), layer_fan.guards, layer_fan.aux)


def reconcatenate(result: FactorizationResult) -> Fan:
    """Right-folded concatenation of the layers."""
    out = result.factors[0]
    for f in result.factors[1:]:
        out = concatenate(f, out)
    return out


@dataclass
class ModularReport:
    samples: int
    max_state_dev: float = 0.0
    max_time_dev: float = 0.0
    failures: list = field(default_factory=list)

    def ok(self, tol: float) -> bool:
        return not self.failures and self.max_state_dev <= tol and self.max_time_dev <= tol

    def to_dict(self) -> dict:
        return {"samples": self.samples, "maxStateDev": self.max_state_dev,
                "maxTimeDev": self.max_time_dev, "failures": self.failures}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def compose_transitions(factors, X, T, t_max: float, cfg=None):
    """Thread (Y, S_hat) through the factors in order."""
    Y, S = np.array(X, dtype=float), tuple(float(t) for t in T)
    for f in factors:
        Y, S = generalized_transition(f, Y, S, t_max, cfg)
    return Y, S


def _dev(fan: Fan, a, b) -> float:
    idx = [i - 1 for i in fan.guarded()]
    if not idx:
        return 0.0
    return float(np.max(np.abs(np.asarray(a, dtype=float)[idx] - np.asarray(b, dtype=float)[idx])))


def verify_modularization(
    fan: Fan,
    result: FactorizationResult,
    n_samples: int = 50,
    seed: int = 0,
    T_max: float = 3.0,
    t_max: float = 100.0,
    cfg=None,
) -> ModularReport:
    rng = np.random.default_rng(seed)
    rep = ModularReport(n_samples)
    Xs = sample_init_points(fan, n_samples, rng)
    for X in Xs:
        T = rng.uniform(0.0, T_max, fan.k)
        try:
            Yf, Sf = generalized_transition(fan, X, T, t_max, cfg)
            Yc, Sc = compose_transitions(result.factors, X, T, t_max, cfg)
        except NotConnected as exc:
            rep.failures.append({"X": X.tolist(), "T": T.tolist(), "error": str(exc)})
            continue
        rep.max_state_dev = max(rep.max_state_dev, _dev(fan, Yf, Yc))
        rep.max_time_dev = max(rep.max_time_dev, _dev(fan, [s or 0.0 for s in Sf], [s or 0.0 for s in Sc]))
    return rep


def verify_products(result: FactorizationResult, n_samples: int = 25, seed: int = 0, T_max: float = 3.0,
                    t_max: float = 100.0, cfg=None) -> ModularReport:
    """Each layer's transition restricted to a primitive's support equals that primitive's own transition."""
    rng = np.random.default_rng(seed)
    rep = ModularReport(n_samples)
    for _ in range(n_samples):
        j = int(rng.integers(len(result.factors)))
        layer = result.factors[j]
        X = layer.init_point()
        T = rng.uniform(0.0, T_max, layer.k)
        try:
            Yl, Sl = generalized_transition(layer, X, T, t_max, cfg)
            for pid in result.layer_ids[j]:
                pf = primitive_fan(result, pid)
                Yp, Sp = generalized_transition(pf, X, T, t_max, cfg)
                idx = [i - 1 for i in sorted(result.dag.prims[pid].support)]
                rep.max_state_dev = max(rep.max_state_dev, float(np.max(np.abs(Yl[idx] - Yp[idx]))))
                rep.max_time_dev = max(rep.max_time_dev, max(abs(Sl[i] - Sp[i]) for i in idx))
        except NotConnected as exc:
            rep.failures.append({"layer": j + 1, "T": T.tolist(), "error": str(exc)})
    return rep


def to_dot(dag: FeedforwardDag | None) -> str:
    lines = ["digraph fan {"]
    if dag is not None and dag.prims:
        lines.append("  rankdir=LR;")
        for pid, p in sorted(dag.prims.items()):
            nodes = ",".join(str(n) for n in sorted(p.support))
            lines.append(f'  "{pid}" [label="{pid}\\n{{{nodes}}}"];')
        for a, b in sorted(dag.hasse.edges()):
            lines.append(f'  "{a}" -> "{b}";')
        for layer in dag.layers:
            members = "; ".join(f'"{p}"' for p in layer)
            lines.append(f"  {{ rank=same; {members}; }}")
    lines.append("}")
    return "\n".join(lines) + "\n"
