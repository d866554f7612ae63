"""Numerical semiflow of a switched network.

Between events the active clause set is fixed. Segments where every node
field is constant are advanced in closed form and linear crossings are
solved exactly; otherwise classical RK4 with step doubling is used and
crossings are bisected down to ``t_event_localize``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .netcore import (
    CIRCLE,
    At,
    AsyncNetwork,
    Cmp,
    Zero,
    active_clauses,
    field_rates,
    resolve_fields,
    wrap_half,
)


class ZenoSuspected(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    t_event_localize: float = 1e-9
    h_max: float = 1.0 / 64.0
    state_tol: float = 1e-6
    latch_eps: float = 1e-9
    zero_tol: float = 1e-12
    rk_tol: float = 1e-10
    h_min: float = 1.0 / 2**20
    zeno_limit: int = 1000
    settle_limit: int = 64

    def __post_init__(self):
        for name in ("t_event_localize", "h_max", "state_tol", "latch_eps", "zero_tol", "rk_tol", "h_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass
class Trajectory:
    spaces: tuple
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    clauses: list = field(default_factory=list)
    events: list = field(default_factory=list)
    final_latches: dict = field(default_factory=dict)
    final_velocity: np.ndarray | None = None

    def record(self, t: float, x: np.ndarray, active: Sequence[str]) -> None:
        if self.times and t <= self.times[-1]:
            if t < self.times[-1]:
                raise RuntimeError("trajectory times must increase")
            self.states[-1] = np.array(x)
            self.clauses[-1] = tuple(active)
            return
        self.times.append(float(t))
        self.states.append(np.array(x))
        self.clauses.append(tuple(active))

    def log(self, t: float, kind: str, **payload) -> None:
        self.events.append({"t": float(t), "kind": kind, "payload": payload})

    # ---- access

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times)

    @property
    def x(self) -> np.ndarray:
        return np.vstack(self.states)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def t_end(self) -> float:
        return self.times[-1]

    def wrapped(self, x: np.ndarray) -> np.ndarray:
        x = np.array(x, dtype=float)
        for i, s in enumerate(self.spaces):
            if s == CIRCLE:
                x[..., i] = x[..., i] % 1.0
        return x

    def state_at(self, t) -> np.ndarray:
        """Linear interpolation in unwrapped coordinates (exact on constant-field segments)."""
        ts = self.t
        xs = self.x
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.column_stack([np.interp(t, ts, xs[:, i]) for i in range(xs.shape[1])])
        return out if out.shape[0] > 1 else out[0]

    def events_of(self, kind: str) -> list:
        return [e for e in self.events if e["kind"] == kind]

    def first_hit(self, node: int, after: float = -math.inf) -> float | None:
        for e in self.events:
            if e["kind"] == "terminalHit" and e["payload"]["node"] == node and e["t"] >= after:
                return e["t"]
        return None

    def extend(self, other: "Trajectory") -> None:
        for t, x, c in zip(other.times, other.states, other.clauses):
            self.record(t, x, c)
        self.events.extend(other.events)
        self.final_latches = dict(other.final_latches)
        self.final_velocity = other.final_velocity

    # ---- serialization

    def to_csv(self, fh=None) -> str:
        buf = fh or io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        k = len(self.spaces)
        w.writerow(["t"] + [f"x_{i}" for i in range(1, k + 1)] + ["activeClauses"])
        for t, x, c in zip(self.times, self.states, self.clauses):
            xw = self.wrapped(x)
            w.writerow([repr(float(t))] + [repr(float(v)) for v in xw] + [";".join(c)])
        return buf.getvalue() if fh is None else ""

    def events_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)


# --------------------------------------------------------------------------
# crossing functions


@dataclass(frozen=True)
class _Crossing:
    kind: str  # "atom" | "latch" | "watch"
    atom: object
    clamped: bool  # evaluate g on the clamp-mapped state

    def nodes(self) -> tuple:
        return self.atom.atom_nodes()

    def linear(self) -> bool:
        return isinstance(self.atom, (Cmp, At)) and not self.clamped


def _crossings(net: AsyncNetwork, latches, frozen, watches) -> list[_Crossing]:
    out = []
    clamped = net.clamp is not None
    for a in net.atoms():
        if isinstance(a, At):
            if a.node not in latches and a.node not in frozen:
                out.append(_Crossing("latch", a, False))
        else:
            out.append(_Crossing("atom", a, clamped))
    for node, value in watches:
        if node not in frozen:
            out.append(_Crossing("watch", At(node, value), False))
    return out


def _g(net: AsyncNetwork, c: _Crossing, x: np.ndarray) -> float:
    if c.clamped:
        x, _ = net.clamp.apply(x)
    return c.atom.g(x)


def _holds(net: AsyncNetwork, active: Iterable[str], node: int, value: float) -> bool:
    """Some active clause depends on the latch (node, value) and stops the node."""
    atom = At(node, value)
    for cid in active:
        c = net.clause(cid)
        f = c.fields.get(node)
        if isinstance(f, Zero) and atom in c.latch_atoms():
            return True
    return False


def _settle(net, x, latches, frozen, cfg, vel, candidates, traj, t, log=True):
    """Resolve the discrete state at an event instant (fixed point over clause set, latches, velocity)."""
    if vel is None:
        act = active_clauses(net, x, latches, frozen)
        vel = field_rates(resolve_fields(net, act, x, frozen), x)
    for _ in range(cfg.settle_limit):
        active = active_clauses(net, x, latches, frozen, vel, cfg.zero_tol)
        changed = False
        for n, c in list(latches.items()):
            if not _holds(net, active, n, c):
                del latches[n]
                changed = True
                if log:
                    traj.log(t, "unlatch", node=n, value=c)
        if changed:
            continue
        for atom in candidates:
            n = atom.node
            if n in latches or n in frozen:
                continue
            trial = dict(latches)
            trial[n] = atom.value
            xt = np.array(x)
            xt[n - 1] = atom.value
            if _holds(net, active_clauses(net, xt, trial, frozen, vel, cfg.zero_tol), n, atom.value):
                snap = abs(float(x[n - 1]) - atom.value)
                latches[n] = atom.value
                x[n - 1] = atom.value
                changed = True
                if log:
                    traj.log(t, "latch", node=n, value=atom.value, snap=snap)
        if changed:
            continue
        fields = resolve_fields(net, active, x, frozen)
        new_vel = field_rates(fields, x)
        if np.array_equal(new_vel, vel):
            return active, fields, vel
        vel = new_vel
    raise ZenoSuspected(f"discrete state did not settle at t={t}")


def _rk4(fields, x, h):
    def f(y):
        return field_rates(fields, y)

    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def _rk4_double(fields, x, h):
    return _rk4(fields, _rk4(fields, x, 0.5 * h), 0.5 * h)


def advance(
    net: AsyncNetwork,
    x0,
    latches0=None,
    t_end: float = 0.0,
    cfg: IntegratorConfig | None = None,
    *,
    frozen=frozenset(),
    watches: Sequence[tuple] = (),
    t0: float = 0.0,
    stop_when_watched: bool = False,
    until: float | None = None,
) -> Trajectory:
    """Integrate the switched system from ``x0`` for ``t_end`` time units.

    ``frozen`` nodes get the zero field and never latch. ``watches`` are
    (node, threshold) pairs whose crossings are logged as ``terminalHit``
    without affecting the dynamics. ``until`` pins the absolute end time
    so consecutive segments meet exactly.
    """
    cfg = cfg or IntegratorConfig()
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    x = np.array(x0, dtype=float)
    latches = dict(latches0 or {})
    frozen = frozenset(frozen)
    traj = Trajectory(spaces=tuple(net.spaces))
    t = float(t0)
    if t_end == 0:
        act = active_clauses(net, x, latches, frozen)
        traj.record(t, x, act)
        traj.final_latches = latches
        traj.final_velocity = field_rates(resolve_fields(net, act, x, frozen), x)
        return traj

    t_stop = t + t_end if until is None else float(until)
    ztol = cfg.zero_tol
    start_candidates = [
        a
        for a in net.atoms()
        if isinstance(a, At) and a.node not in frozen and a.node not in latches and abs(a.g(x)) <= ztol
    ]
    active, fields, vel = _settle(net, x, latches, frozen, cfg, None, start_candidates, traj, t)
    traj.record(t, x, active)
    pending = {(n, v) for n, v in watches if n not in frozen}
    for n, v in list(pending):
        if abs(x[n - 1] - v) <= ztol:
            traj.log(t, "terminalHit", node=n, value=v, state=float(x[n - 1]))
            pending.discard((n, v))
    stalled = False
    burst, last_event = 0, -math.inf

    while t < t_stop:
        if stop_when_watched and not pending and watches:
            break
        crossings = _crossings(net, latches, frozen, watches)
        constant = all(f.is_constant for f in fields)
        moving = bool(np.any(vel != 0.0)) or not constant
        nonlinear = any(not c.linear() for c in crossings)
        remaining = t_stop - t
        if not moving:
            if not stalled:
                traj.log(t, "stall")
                stalled = True
            h = remaining
        elif constant and not nonlinear:
            h = remaining
        else:
            h = min(cfg.h_max, remaining)
        stalled = stalled and not moving

        if constant:
            v = vel
            x_start = x

            def prop(tau, x_start=x_start, v=v):
                return x_start + v * tau

            x1 = prop(h)
        else:
            while True:
                y_full = _rk4(fields, x, h)
                y_half = _rk4_double(fields, x, h)
                if np.max(np.abs(y_full - y_half)) <= cfg.rk_tol or h <= cfg.h_min:
                    break
                h *= 0.5
            x_start = x

            def prop(tau, x_start=x_start):
                return _rk4_double(fields, x_start, tau)

            x1 = y_half

        hits = []
        if moving:
            for c in crossings:
                g0 = _g(net, c, x)
                if abs(g0) <= ztol:
                    continue
                g1 = _g(net, c, x1)
                s1 = 0.0 if abs(g1) <= ztol else math.copysign(1.0, g1)
                if s1 != 0.0 and s1 == math.copysign(1.0, g0):
                    continue
                if c.linear() and all(fields[n - 1].is_constant for n in c.nodes()):
                    rate = c.atom.gdot(vel)
                    tau = min(max(-g0 / rate, 0.0), h) if rate != 0 else h
                else:
                    lo, hi = 0.0, h
                    while hi - lo > cfg.t_event_localize:
                        mid = 0.5 * (lo + hi)
                        gm = _g(net, c, prop(mid))
                        if abs(gm) > ztol and math.copysign(1.0, gm) == math.copysign(1.0, g0):
                            lo = mid
                        else:
                            hi = mid
                    tau = hi
                hits.append((tau, c))

        if not hits:
            t = t + h if h < remaining else t_stop
            x = x1
            traj.record(t, x, active)
            continue

        tau_min = min(tau for tau, _ in hits)
        tie = 1e-12 * max(1.0, abs(t))
        group = [c for tau, c in hits if tau <= tau_min + tie]
        x = prop(tau_min)
        t = min(t + tau_min, t_stop)
        if t - last_event <= cfg.t_event_localize:
            burst += 1
            if burst > cfg.zeno_limit:
                raise ZenoSuspected(f"more than {cfg.zeno_limit} events near t={t}")
        else:
            burst = 0
        last_event = t

        for c in group:
            if c.kind == "watch" and (c.atom.node, c.atom.value) in pending:
                traj.log(t, "terminalHit", node=c.atom.node, value=c.atom.value, state=float(x[c.atom.node - 1]))
                pending.discard((c.atom.node, c.atom.value))
            elif c.kind == "watch":
                traj.log(t, "terminalHit", node=c.atom.node, value=c.atom.value, state=float(x[c.atom.node - 1]))
        candidates = [c.atom for c in group if c.kind == "latch"]
        before = active
        active, fields, vel = _settle(net, x, latches, frozen, cfg, vel, candidates, traj, t)
        if tuple(active) != tuple(before):
            traj.log(t, "switch", before=list(before), after=list(active))
        traj.record(t, x, active)

    traj.final_latches = dict(latches)
    traj.final_velocity = vel
    return traj


def semigroup_check(net: AsyncNetwork, x0, s: float, t: float, cfg: IntegratorConfig | None = None,
                    latches0=None, frozen=frozenset()) -> float:
    """max-norm gap between Phi(x0, s + t) and Phi(Phi(x0, s), t)."""
    whole = advance(net, x0, latches0, s + t, cfg, frozen=frozen)
    first = advance(net, x0, latches0, s, cfg, frozen=frozen)
    second = advance(net, first.final_state, first.final_latches, t, cfg, frozen=frozen)
    diff = whole.final_state - second.final_state
    for i, sp in enumerate(net.spaces):
        if sp == CIRCLE:
            diff[i] = wrap_half(diff[i])
    return float(np.max(np.abs(diff))) if diff.size else 0.0
