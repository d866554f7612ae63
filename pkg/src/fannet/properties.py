"""Invariant checks run by ``fannet verify-properties``."""
from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .factor import factorize
from .geninit import evolve_generalized
from .library import FIXTURES
from .netcore import ConnectionStructure, EMPTY
from .semiflow import IntegratorConfig, advance, semigroup_check


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str


def random_structure(rng: np.random.Generator, k: int = 5, p: float = 0.2) -> ConnectionStructure:
    edges = {(s, t) for s in range(0, k + 1) for t in range(1, k + 1) if s != t and rng.random() < p}
    return ConnectionStructure(frozenset(edges))


def join_laws(n: int = 10_000, seed: int = 0) -> PropertyResult:
    rng = np.random.default_rng(seed)
    for _ in range(n):
        a, b, c = (random_structure(rng) for _ in range(3))
        if not (a | b == b | a and (a | b) | c == a | (b | c) and a | a == a and a | EMPTY == a):
            return PropertyResult("join lattice laws", False, f"violated for {a}, {b}, {c}")
    return PropertyResult("join lattice laws", True, f"{n} random triples")


def semigroup(splits: int = 4, seed: int = 0, tol: float = 1e-6) -> PropertyResult:
    rng = np.random.default_rng(seed)
    worst, where = 0.0, ""
    for name, build in FIXTURES.items():
        fan = build().fan
        for _ in range(splits):
            s, t = rng.uniform(0.0, 10.0, 2)
            dev = semigroup_check(fan.net, fan.init_point(), s, t)
            if dev > worst:
                worst, where = dev, f"{name} s={s:.3f} t={t:.3f}"
    return PropertyResult("semigroup", worst <= tol, f"max deviation {worst:.3g} {where}".strip())


def freeze(samples: int = 5, seed: int = 0) -> PropertyResult:
    rng = np.random.default_rng(seed)
    for name, build in FIXTURES.items():
        fan = build().fan
        for _ in range(samples):
            T = rng.uniform(0.0, 3.0, fan.k)
            X = fan.init_point()
            traj = evolve_generalized(fan, X, T, float(T.max()) + 2.0)
            for t, x in zip(traj.times, traj.states):
                held = T >= t
                if np.any(x[held] != X[held]):
                    return PropertyResult("freeze", False, f"{name}: node moved before its start time at t={t}")
    return PropertyResult("freeze", True, "exact on all fixtures")


def continuity(cfg: IntegratorConfig | None = None) -> PropertyResult:
    cfg = cfg or IntegratorConfig()
    worst = 0.0
    for build in FIXTURES.values():
        fan = build().fan
        traj = advance(fan.net, fan.init_point(), None, 20.0, cfg)
        for e in traj.events_of("latch"):
            worst = max(worst, e["payload"]["snap"])
    return PropertyResult("continuity at switches", worst <= cfg.latch_eps, f"max latch snap {worst:.3g}")


def dag_acyclic() -> PropertyResult:
    for name, build in FIXTURES.items():
        scn = build()
        if not scn.primitives:
            continue
        res = factorize(scn.fan, scn.primitives)
        if not nx.is_directed_acyclic_graph(res.dag.graph):
            return PropertyResult("DAG acyclicity", False, name)
    return PropertyResult("DAG acyclicity", True, "all fixtures with primitives")


def run_all(seed: int = 0) -> list[PropertyResult]:
    return [join_laws(seed=seed), semigroup(seed=seed), freeze(seed=seed), continuity(), dag_acyclic()]
