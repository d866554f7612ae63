"""Guards, regions, transit times and the transition function of a network with function."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .netcore import (
    CIRCLE,
    At,
    AsyncNetwork,
    EvalContext,
    NetworkError,
    active_clauses,
    linked_nodes,
    resolve_fields,
)
from .semiflow import IntegratorConfig, Trajectory, advance

MINUS, INIT, ZERO_REGION, TERM, PLUS = "minus", "init", "zero", "term", "plus"


@dataclass(frozen=True)
class NodeGuard:
    """Point thresholds on a line coordinate; ``direction`` is the sign of travel from init to term."""

    init: float
    term: float
    direction: int = 1
    coincident: bool = False
    margin: float | None = None

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise NetworkError("direction must be +1 or -1")
        if self.coincident and self.init != self.term:
            raise NetworkError("coincident guards need init == term")
        if not self.coincident and self.direction * (self.term - self.init) < 0:
            raise NetworkError("term threshold lies behind init for this direction")
        if self.margin is not None and not self.margin > 0:
            raise NetworkError("margin must be positive")

    @property
    def extent(self) -> float:
        return abs(self.term - self.init)

    @property
    def v_margin(self) -> float:
        if self.margin is not None:
            return self.margin
        return 0.05 * self.extent if self.extent > 0 else 0.05

    def interior_ok(self, x: float) -> bool:
        """x lies in the zero region at least one margin away from both thresholds."""
        if self.coincident:
            return False
        m = self.v_margin
        s = self.direction * (x - self.init)
        return s >= m and self.direction * (self.term - x) >= m

    def near_boundary_or_outside(self, x: float) -> bool:
        s = self.direction * (x - self.init)
        u = self.direction * (x - self.term)
        m = self.v_margin
        return s < m or u > -m


@dataclass(frozen=True)
class Fan:
    net: AsyncNetwork
    guards: tuple  # NodeGuard or None per node
    aux: tuple | None = None  # starting values of unguarded nodes

    def __post_init__(self):
        object.__setattr__(self, "guards", tuple(self.guards))
        if len(self.guards) != self.net.k:
            raise NetworkError("one guard entry per node required")
        for i, g in enumerate(self.guards, start=1):
            if g is not None and self.net.spaces[i - 1] == CIRCLE:
                raise NetworkError(f"node {i}: guards are supported on line coordinates only")
        if self.aux is not None and len(self.aux) != self.net.k:
            raise NetworkError("aux must give one value per node")

    @property
    def k(self) -> int:
        return self.net.k

    def guarded(self) -> list[int]:
        return [i for i, g in enumerate(self.guards, start=1) if g is not None]

    def init_point(self) -> np.ndarray:
        x = np.zeros(self.k) if self.aux is None else np.array(self.aux, dtype=float)
        for i, g in enumerate(self.guards):
            if g is not None:
                x[i] = g.init
        return x

    def term_point(self) -> np.ndarray:
        x = self.init_point()
        for i, g in enumerate(self.guards):
            if g is not None:
                x[i] = g.term
        return x

    def with_net(self, net: AsyncNetwork) -> "Fan":
        return Fan(net, self.guards, self.aux)


def region_of(fan: Fan, i: int, x_i: float, tol: float = 1e-6) -> str:
    g = fan.guards[i - 1]
    if g is None:
        raise NetworkError(f"node {i} has no guards")
    s = g.direction * (x_i - g.init)
    u = g.direction * (x_i - g.term)
    if g.coincident and abs(s) <= tol:
        return TERM
    if abs(s) <= tol:
        return INIT
    if s < 0:
        return MINUS
    if abs(u) <= tol:
        return TERM
    if u > 0:
        return PLUS
    return ZERO_REGION


@dataclass
class TransitRecord:
    S: tuple  # per node: first-hit time of the term threshold, or None
    Y: tuple  # per node: state at S_i (final state for unguarded or unreached nodes)
    status: str  # "reached" | "stall" | "tmax"
    trajectory: Trajectory = field(repr=False, default=None)

    @property
    def reached(self) -> bool:
        return self.status == "reached"


class NotConnected(RuntimeError):
    def __init__(self, msg: str, record: TransitRecord | None = None):
        super().__init__(msg)
        self.record = record


def transit(fan: Fan, X, t_max: float, cfg: IntegratorConfig | None = None, latches=None) -> TransitRecord:
    cfg = cfg or IntegratorConfig()
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    X = np.array(X, dtype=float)
    for i in fan.guarded():
        expected = TERM if fan.guards[i - 1].coincident else INIT
        if region_of(fan, i, X[i - 1], cfg.state_tol) != expected:
            raise NetworkError(f"node {i}: state {X[i - 1]} is not on its initialization threshold")
    watches = [(i, fan.guards[i - 1].term) for i in fan.guarded() if not fan.guards[i - 1].coincident]
    traj = advance(fan.net, X, latches, t_max, cfg, watches=watches, stop_when_watched=True)
    return _record_from(fan, traj, {i: 0.0 for i in fan.guarded() if fan.guards[i - 1].coincident}, X)


def _record_from(fan: Fan, traj: Trajectory, known: dict, X, after: dict | None = None) -> TransitRecord:
    S, Y = [], []
    final = traj.final_state
    for i in range(1, fan.k + 1):
        g = fan.guards[i - 1]
        if g is None:
            S.append(None)
            Y.append(float(final[i - 1]))
            continue
        if i in known:
            S.append(known[i])
            Y.append(float(g.term) if g.coincident else float(traj.state_at(known[i])[i - 1]))
            continue
        hit = traj.first_hit(i, after=(after or {}).get(i, -np.inf))
        S.append(hit)
        Y.append(float(g.term) if hit is not None else float(final[i - 1]))
    reached = all(S[i - 1] is not None for i in fan.guarded())
    if reached:
        status = "reached"
    elif traj.events_of("stall"):
        status = "stall"
    else:
        status = "tmax"
    return TransitRecord(tuple(S), tuple(Y), status, traj)


def transition(fan: Fan, X, t_max: float, cfg: IntegratorConfig | None = None):
    """Return (Y, S): terminal states at per-node transit times."""
    rec = transit(fan, X, t_max, cfg)
    if not rec.reached:
        missing = [i for i in fan.guarded() if rec.S[i - 1] is None]
        raise NotConnected(f"nodes {missing} did not reach their term threshold ({rec.status})", rec)
    return np.array(rec.Y), rec.S


# --------------------------------------------------------------------------
# geometric and simple-type conditions


@dataclass
class ConditionResult:
    passed: bool = True
    witnesses: list = field(default_factory=list)

    def fail(self, **w) -> None:
        self.passed = False
        if len(self.witnesses) < 10:
            self.witnesses.append(w)


@dataclass
class GeometricReport:
    results: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def to_json(self) -> str:
        return json.dumps(
            {k: {"passed": r.passed, "witnesses": r.witnesses} for k, r in self.results.items()},
            indent=2,
            sort_keys=True,
        )


def _box(g: NodeGuard) -> tuple[float, float]:
    pad = max(g.extent, 1.0)
    return min(g.init, g.term) - pad, max(g.init, g.term) + pad


def _sample_state(fan: Fan, rng: np.random.Generator, at_values: dict) -> tuple[np.ndarray, dict]:
    x = np.empty(fan.k)
    latches = {}
    for i in range(1, fan.k + 1):
        g = fan.guards[i - 1]
        if g is None:
            x[i - 1] = rng.uniform(0.0, 1.0) if fan.net.spaces[i - 1] == CIRCLE else rng.normal()
            continue
        if at_values.get(i) and rng.random() < 0.5:
            c = at_values[i][rng.integers(len(at_values[i]))]
            x[i - 1] = c
            latches[i] = c
            continue
        lo, hi = _box(g)
        x[i - 1] = rng.uniform(lo, hi)
    return x, latches


def _outside_sample(g: NodeGuard, rng: np.random.Generator, init_side: bool) -> float:
    """A point in M^- (or M^+) together with the margin band on that side."""
    lo, hi = _box(g)
    m = g.v_margin
    if init_side:
        a, b = (lo, g.init + m) if g.direction > 0 else (g.init - m, hi)
    else:
        a, b = (g.term - m, hi) if g.direction > 0 else (lo, g.term + m)
    return float(rng.uniform(a, b))


def check_geometric(fan: Fan, samples: int = 2000, seed: int = 0) -> GeometricReport:
    rng = np.random.default_rng(seed)
    net = fan.net
    res = {name: ConditionResult() for name in ("G", "T", "S1c", "S2a", "S2b")}
    probe = fan.init_point()

    for i in fan.guarded():
        g = fan.guards[i - 1]
        if g.init == g.term and not g.coincident:
            res["G"].fail(node=i, reason="init and term thresholds coincide", threshold=g.init)
        f = net.default_fields[i - 1]
        for name, thr in (("init", g.init), ("term", g.term)):
            for _ in range(4):
                xs = probe.copy()
                xs[i - 1] = thr
                for j in fan.guarded():
                    if j != i:
                        xs[j - 1] = rng.uniform(*_box(fan.guards[j - 1]))
                rate = f.rate(xs)
                if rate == 0:
                    res["T"].fail(node=i, guard=name, reason="default field vanishes", state=xs.tolist())
                    break
                if g.direction * rate < 0:
                    res["T"].fail(node=i, guard=name, reason="default field points the wrong way", state=xs.tolist())
                    break

    at_values: dict = {}
    for a in net.atoms():
        if isinstance(a, At):
            at_values.setdefault(a.node, []).append(a.value)

    for c in net.clauses:
        for i in linked_nodes(c.alpha):
            g = fan.guards[i - 1]
            if g is None:
                continue
            for a in c.latch_atoms():
                if a.node == i and not g.interior_ok(a.value):
                    res["S1c"].fail(clause=c.id, node=i, reason="latch threshold outside the margin-shrunk zero region",
                                    value=a.value)

    for _ in range(samples):
        x, latches = _sample_state(fan, rng, at_values)
        ctx = EvalContext(x, latches)
        for c in net.clauses:
            if not c.predicate.evaluate(ctx):
                continue
            for i in linked_nodes(c.alpha):
                g = fan.guards[i - 1]
                if g is not None and not g.interior_ok(x[i - 1]):
                    res["S1c"].fail(clause=c.id, node=i, state=x.tolist(), latches=latches)

        active = active_clauses(net, x, latches)
        for i in fan.guarded():
            g = fan.guards[i - 1]
            if g.coincident:
                continue
            if g.near_boundary_or_outside(x[i - 1]):
                try:
                    fields = resolve_fields(net, active, x)
                except Exception as exc:  # conflicting assignment counts as a violation
                    res["S2b"].fail(node=i, state=x.tolist(), reason=str(exc))
                    continue
                if fields[i - 1] != net.default_fields[i - 1]:
                    res["S2b"].fail(node=i, state=x.tolist(), latches=latches)
                # perturb within the same exterior band and compare the event map
                if i in latches:
                    continue
                y = x.copy()
                y[i - 1] = _outside_sample(g, rng, g.direction * (x[i - 1] - g.init) < g.v_margin)
                if set(active_clauses(net, y, latches)) != set(active):
                    res["S2a"].fail(node=i, state=x.tolist(), perturbed=y.tolist())
    return GeometricReport(res)
