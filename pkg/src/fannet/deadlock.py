"""Stall, livelock and hidden-deadlock detection along trajectories."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .fan import PLUS, TERM, Fan, region_of, transit
from .geninit import generalized_transit, sample_init_points
from .netcore import CIRCLE, wrap_half
from .semiflow import Trajectory

TOTAL, PARTIAL, LIVELOCK, NONE = "total", "partial", "livelock", "none"


@dataclass
class DeadlockReport:
    kind: str
    entry_time: float | None = None
    sink_state: list | None = None
    period: float | None = None
    terminal_nodes: tuple = ()
    stalled_nodes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "entryTime": self.entry_time,
            "sinkState": self.sink_state,
            "period": self.period,
            "terminalNodes": list(self.terminal_nodes),
            "stalledNodes": list(self.stalled_nodes),
        }


def _gap(spaces, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    circ = np.array([s == CIRCLE for s in spaces])
    if circ.any():
        d[..., circ] = wrap_half(d[..., circ])
    return np.abs(d)


def _done(fan: Fan, x: np.ndarray, tol: float) -> list[int]:
    return [i for i in fan.guarded() if region_of(fan, i, x[i - 1], tol) in (TERM, PLUS)]


def detect_stall(traj: Trajectory, fan: Fan, stall_window: float = 1.0, state_tol: float = 1e-6) -> DeadlockReport:
    """Report a total or partial deadlock if nothing has moved for ``stall_window`` and some node is off its term set."""
    if not stall_window > 0:
        raise ValueError("stall_window must be positive")
    if traj.final_velocity is None or np.any(traj.final_velocity != 0):
        return DeadlockReport(NONE)
    xs, ts = traj.x, traj.t
    final = xs[-1]
    k = len(ts) - 1
    while k > 0 and np.max(_gap(traj.spaces, xs[k - 1], final)) <= state_tol:
        k -= 1
    entry = float(ts[k])
    if ts[-1] - entry < stall_window:
        return DeadlockReport(NONE)
    done = _done(fan, final, state_tol)
    stuck = [i for i in fan.guarded() if i not in done]
    if not stuck:
        return DeadlockReport(NONE)
    kind = PARTIAL if done else TOTAL
    return DeadlockReport(kind, entry, final.tolist(), None, tuple(done), tuple(stuck))


def _progress(fan: Fan, x: np.ndarray) -> np.ndarray:
    return np.array([fan.guards[i - 1].direction * (x[i - 1] - fan.guards[i - 1].init) for i in fan.guarded()])


def detect_livelock(
    traj: Trajectory,
    fan: Fan,
    min_period: float = 0.25,
    max_period: float = 4.0,
    tol: float = 1e-4,
    state_tol: float = 1e-6,
    periods: int = 3,
    resolution: int = 400,
) -> DeadlockReport:
    """Recurrence test over the tail of the trajectory.

    Looks for the smallest P in [min_period, max_period] with
    ``|X(t + P) - X(t)| <= tol`` over ``periods`` consecutive periods while
    no guarded node makes progress towards its term threshold.
    """
    if not 0 < min_period < max_period:
        raise ValueError("need 0 < min_period < max_period")
    t_end = traj.t_end
    t0 = traj.times[0]
    final = traj.final_state
    if _done(fan, final, state_tol) == fan.guarded() and fan.guarded():
        return DeadlockReport(NONE)
    step = min_period / 100.0
    for P in np.arange(min_period, max_period + step / 2, step):
        span = periods * P
        if t_end - span < t0:
            break
        grid = np.linspace(t_end - span, t_end - P, resolution)
        a = traj.state_at(grid)
        b = traj.state_at(grid + P)
        if a.ndim == 1:
            a, b = a[None, :], b[None, :]
        if np.max(_gap(traj.spaces, b, a)) > tol:
            continue
        if np.max(np.ptp(a, axis=0)) <= state_tol:
            return DeadlockReport(NONE)  # an equilibrium, not a periodic orbit
        if fan.guarded():
            start, end = _progress(fan, a[0]), _progress(fan, traj.state_at(t_end))
            if np.any(end - start > state_tol):
                continue
        entry = t_end - span
        while entry - P >= t0:
            back = np.linspace(entry - P, entry, max(resolution // periods, 8))
            if np.max(_gap(traj.spaces, traj.state_at(back + P), traj.state_at(back))) > tol:
                break
            entry -= P
        done = _done(fan, final, state_tol)
        stuck = [i for i in fan.guarded() if i not in done]
        return DeadlockReport(LIVELOCK, float(entry), final.tolist(), float(P), tuple(done), tuple(stuck))
    return DeadlockReport(NONE)


def classify(traj: Trajectory, fan: Fan, stall_window: float = 1.0, **livelock_kw) -> DeadlockReport:
    rep = detect_stall(traj, fan, stall_window)
    if rep.kind != NONE:
        return rep
    return detect_livelock(traj, fan, **livelock_kw)


@dataclass
class HiddenScan:
    witnesses: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # X not connected at synchronized start

    def to_json(self) -> str:
        return json.dumps({"witnesses": self.witnesses, "skipped": self.skipped}, indent=2)


def _grid(T_grid, k: int):
    """Accept a list of full T vectors or a list of scalar values (expanded to a product grid)."""
    T_grid = list(T_grid)
    if T_grid and np.ndim(T_grid[0]) == 0:
        return [tuple(map(float, t)) for t in itertools.product(T_grid, repeat=k)]
    return [tuple(map(float, t)) for t in T_grid]


def hidden_deadlock_scan(
    fan: Fan,
    T_grid,
    n_x: int = 1,
    t_max: float = 50.0,
    seed: int = 0,
    stall_window: float = 1.0,
    cfg=None,
) -> HiddenScan:
    """Start-time vectors whose generalized trajectory enters a sink although T = 0 is connected."""
    rng = np.random.default_rng(seed)
    out = HiddenScan()
    for X in sample_init_points(fan, n_x, rng):
        if not transit(fan, X, t_max, cfg).reached:
            out.skipped.append(X.tolist())
            continue
        for T in _grid(T_grid, fan.k):
            rec = generalized_transit(fan, X, T, t_max, cfg)
            if rec.reached:
                continue
            rep = classify(rec.trajectory, fan, stall_window)
            if rep.kind != NONE:
                out.witnesses.append({"X": X.tolist(), "T": list(T), **rep.to_dict()})
    return out
