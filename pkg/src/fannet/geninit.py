"""Evolution from staggered per-node start times."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .fan import Fan, NotConnected, TransitRecord, _record_from
from .netcore import CIRCLE
from .semiflow import IntegratorConfig, Trajectory, advance


@dataclass(frozen=True)
class SwitchSchedule:
    taus: tuple
    started: tuple  # frozensets J_l of nodes with T_i <= tau_l


def switch_schedule(T) -> SwitchSchedule:
    T = [float(t) for t in T]
    if any(not np.isfinite(t) or t < 0 for t in T):
        raise ValueError("start times must be finite and nonnegative")
    taus = tuple(sorted(set(T)))
    started = tuple(frozenset(i for i, t in enumerate(T, start=1) if t <= tau) for tau in taus)
    return SwitchSchedule(taus, started)


def evolve_generalized(
    fan: Fan,
    X,
    T,
    t_end: float,
    cfg: IntegratorConfig | None = None,
    *,
    watches=(),
    stop_when_watched: bool = False,
    latches=None,
) -> Trajectory:
    """Hold node i at x_i until T_i, then let it evolve with the network.

    Nodes that have not started get the zero field and cannot latch.
    With all T_i = 0 this is a single plain ``advance`` call.
    """
    cfg = cfg or IntegratorConfig()
    net = fan.net
    sched = switch_schedule(T)
    if len(T) != net.k:
        raise ValueError("one start time per node required")
    everyone = frozenset(range(1, net.k + 1))
    x = np.array(X, dtype=float)
    lat = dict(latches or {})
    if sched.taus == (0.0,):
        return advance(net, x, lat, t_end, cfg, watches=watches, stop_when_watched=stop_when_watched)

    traj = Trajectory(spaces=tuple(net.spaces))
    t = 0.0
    first = sched.taus[0]
    if first > 0:
        hold = min(first, t_end)
        traj.record(0.0, x, ())
        traj.record(hold, x, ())
        t = hold
    bounds = list(sched.taus[1:]) + [None]
    for tau, J, nxt in zip(sched.taus, sched.started, bounds):
        if t >= t_end or tau > t_end:
            break
        stop = t_end if nxt is None else min(nxt, t_end)
        last = nxt is None
        seg = advance(
            net, x, lat, stop - tau, cfg,
            frozen=everyone - J, watches=watches, t0=tau,
            stop_when_watched=stop_when_watched and last, until=stop,
        )
        traj.extend(seg)
        x = np.array(seg.final_state)
        lat = dict(seg.final_latches)
        t = seg.t_end
    traj.final_latches = lat
    return traj


def generalized_transit(fan: Fan, X, T, t_max: float, cfg: IntegratorConfig | None = None) -> TransitRecord:
    """Per-node first term hits at or after T_i along the generalized trajectory."""
    T = tuple(float(t) for t in T)
    watches = [(i, fan.guards[i - 1].term) for i in fan.guarded() if not fan.guards[i - 1].coincident]
    horizon = max(T) + t_max
    traj = evolve_generalized(fan, X, T, horizon, cfg, watches=watches, stop_when_watched=True)
    known = {i: T[i - 1] for i in fan.guarded() if fan.guards[i - 1].coincident}
    rec = _record_from(fan, traj, known, X, after={i: T[i - 1] for i in fan.guarded()})
    if rec.status == "stall" and not any(e["t"] >= max(T) for e in traj.events_of("stall")):
        rec.status = "tmax"
    return rec


def generalized_transition(fan: Fan, X, T, t_max: float, cfg: IntegratorConfig | None = None):
    """Return (Y, S_hat); raises NotConnected when some node misses its term threshold."""
    rec = generalized_transit(fan, X, T, t_max, cfg)
    if not rec.reached:
        missing = [i for i in fan.guarded() if rec.S[i - 1] is None]
        raise NotConnected(f"nodes {missing} did not reach their term threshold ({rec.status})", rec)
    return np.array(rec.Y), rec.S


def sample_init_points(fan: Fan, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """The first point is the fan's own; others redraw the unguarded circle coordinates."""
    base = fan.init_point()
    out = [base]
    for _ in range(n - 1):
        x = base.copy()
        for i, g in enumerate(fan.guards):
            if g is None and fan.net.spaces[i] == CIRCLE:
                x[i] = rng.uniform(0.0, 1.0)
        out.append(x)
    return out


@dataclass
class RegularityReport:
    samples: int
    connected: int
    failures: list

    @property
    def connected_fraction(self) -> float:
        return self.connected / self.samples if self.samples else 1.0

    def to_dict(self) -> dict:
        return {"samples": self.samples, "connectedFraction": self.connected_fraction, "failures": self.failures}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def regularity_scan(
    fan: Fan,
    n_x: int,
    n_t: int,
    T_max: float,
    seed: int = 0,
    t_max: float = 50.0,
    cfg: IntegratorConfig | None = None,
) -> RegularityReport:
    """Sample (X, T) pairs and count how many reach every term threshold.

    The first start-time sample is always T = 0.
    """
    from .deadlock import classify

    if n_x < 1 or n_t < 1:
        raise ValueError("sample counts must be at least 1")
    rng = np.random.default_rng(seed)
    Xs = sample_init_points(fan, n_x, rng)
    Ts = [np.zeros(fan.k)] + [rng.uniform(0.0, T_max, fan.k) for _ in range(n_t - 1)]
    connected, failures = 0, []
    for X in Xs:
        for T in Ts:
            rec = generalized_transit(fan, X, T, t_max, cfg)
            if rec.reached:
                connected += 1
                continue
            rep = classify(rec.trajectory, fan)
            failures.append({"X": X.tolist(), "T": list(map(float, T)), "classification": rep.kind,
                             "entryTime": rep.entry_time})
    return RegularityReport(len(Xs) * len(Ts), connected, failures)
