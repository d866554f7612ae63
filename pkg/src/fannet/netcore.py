"""Asynchronous networks: connection structures, node fields, predicates and the event map.

Node indices run from 1 to k; index 0 is the constraining node N_0, which has
no state. A network state is a float array of length k (node i at position
i - 1). Circle coordinates are stored unwrapped and reduced mod 1 only when
compared or reported.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy.special import sindg

LINE = "line"
CIRCLE = "circle"


class ConflictingAssignment(RuntimeError):
    """Two simultaneously active clauses assign different fields to one node."""


class NetworkError(ValueError):
    pass


# --------------------------------------------------------------------------
# connection structures


@dataclass(frozen=True)
class ConnectionStructure:
    edges: frozenset = frozenset()

    def __post_init__(self):
        edges = frozenset((int(s), int(t)) for s, t in self.edges)
        for s, t in edges:
            if s == t:
                raise NetworkError(f"self-edge on node {s}")
            if t < 1 or s < 0:
                raise NetworkError(f"bad edge {s}->{t}")
        object.__setattr__(self, "edges", edges)

    def __or__(self, other: "ConnectionStructure") -> "ConnectionStructure":
        return ConnectionStructure(self.edges | other.edges)

    def __bool__(self) -> bool:
        return bool(self.edges)

    def __iter__(self):
        return iter(sorted(self.edges))

    def __repr__(self) -> str:
        if not self.edges:
            return "∅"
        return "{" + ", ".join(f"N{s}->N{t}" for s, t in sorted(self.edges)) + "}"


EMPTY = ConnectionStructure()


def stop_edges(nodes: Iterable[int]) -> ConnectionStructure:
    """xi_A = {N_0 -> N_i | i in A}."""
    return ConnectionStructure(frozenset((0, i) for i in nodes))


def join(a: ConnectionStructure, b: ConnectionStructure) -> ConnectionStructure:
    return a | b


def linked_nodes(a: ConnectionStructure) -> frozenset:
    return frozenset(n for e in a.edges for n in e if n >= 1)


# --------------------------------------------------------------------------
# node fields


def wrap_half(d):
    """Reduce a circle difference to [-0.5, 0.5)."""
    return (np.asarray(d) + 0.5) % 1.0 - 0.5


def circ_dist(a: float, b: float) -> float:
    return abs(float(wrap_half(a - b)))


@dataclass(frozen=True)
class Constant:
    value: float
    kind = "constant"
    is_constant = True

    def rate(self, x: np.ndarray) -> float:
        return self.value


@dataclass(frozen=True)
class Zero:
    kind = "zero"
    is_constant = True

    def rate(self, x: np.ndarray) -> float:
        return 0.0


@dataclass(frozen=True)
class Kuramoto:
    """omega + kappa * sin 2pi(theta_partner - theta_self); needs the owner index bound."""

    omega: float
    kappa: float
    partner: int
    owner: int = 0
    kind = "kuramoto"
    is_constant = False

    def rate(self, x: np.ndarray) -> float:
        # sindg is exact at multiples of 180 degrees, so antiphase stays antiphase
        d = float(wrap_half(x[self.partner - 1] - x[self.owner - 1]))
        return self.omega + self.kappa * float(sindg(360.0 * d))


@dataclass(frozen=True)
class Affine:
    coeffs: tuple = ()  # ((node, coefficient), ...)
    offset: float = 0.0
    kind = "affine"
    is_constant = False

    def rate(self, x: np.ndarray) -> float:
        return self.offset + sum(c * x[n - 1] for n, c in self.coeffs)


ZERO = Zero()
FieldSpec = Constant | Zero | Kuramoto | Affine


def bind_field(f: FieldSpec, owner: int) -> FieldSpec:
    if isinstance(f, Kuramoto) and f.owner != owner:
        return Kuramoto(f.omega, f.kappa, f.partner, owner)
    return f


# --------------------------------------------------------------------------
# predicates


@dataclass
class EvalContext:
    """Everything a predicate may read.

    ``velocity`` enables boundary resolution: an atom whose crossing function is
    within ``zero_tol`` of zero takes the value it has just after the current
    instant along that velocity. Without it, comparisons are literal.
    """

    x: np.ndarray
    latches: Mapping[int, float] = field(default_factory=dict)
    frozen: frozenset = frozenset()
    velocity: np.ndarray | None = None
    zero_tol: float = 1e-12


def _resolve(g: float, gdot: float | None, tol: float) -> float:
    if abs(g) <= tol:
        if gdot is None or gdot == 0.0:
            return 0.0
        return 1.0 if gdot > 0 else -1.0
    return g


class Predicate:
    def evaluate(self, ctx: EvalContext) -> bool:
        raise NotImplementedError

    def atoms(self) -> Iterator["Predicate"]:
        yield self

    def nodes(self) -> frozenset:
        return frozenset(n for a in self.atoms() for n in a.atom_nodes())

    def atom_nodes(self) -> tuple:
        return ()


_CMP_OPS = {
    "lt": lambda g: g < 0,
    "le": lambda g: g <= 0,
    "gt": lambda g: g > 0,
    "ge": lambda g: g >= 0,
}


@dataclass(frozen=True)
class Cmp(Predicate):
    """x_node - x_other - value <op> 0 (``other`` optional)."""

    op: str
    node: int
    value: float
    other: int | None = None

    def __post_init__(self):
        if self.op not in _CMP_OPS:
            raise NetworkError(f"unknown comparison {self.op!r}")
        if not np.isfinite(self.value):
            raise NetworkError("thresholds must be finite")

    def g(self, x: np.ndarray) -> float:
        v = x[self.node - 1] - self.value
        if self.other is not None:
            v -= x[self.other - 1]
        return float(v)

    def gdot(self, v: np.ndarray) -> float:
        r = v[self.node - 1]
        if self.other is not None:
            r -= v[self.other - 1]
        return float(r)

    def evaluate(self, ctx: EvalContext) -> bool:
        gd = None if ctx.velocity is None else self.gdot(ctx.velocity)
        return _CMP_OPS[self.op](_resolve(self.g(ctx.x), gd, ctx.zero_tol))

    def atom_nodes(self):
        return (self.node,) if self.other is None else (self.node, self.other)


@dataclass(frozen=True)
class At(Predicate):
    """Latched equality x_node = value: true iff the node is latched there."""

    node: int
    value: float

    def g(self, x: np.ndarray) -> float:
        return float(x[self.node - 1] - self.value)

    def gdot(self, v: np.ndarray) -> float:
        return float(v[self.node - 1])

    def evaluate(self, ctx: EvalContext) -> bool:
        if self.node in ctx.frozen:
            return False
        return ctx.latches.get(self.node) == self.value

    def atom_nodes(self):
        return (self.node,)


@dataclass(frozen=True)
class CircDistLt(Predicate):
    a: int
    b: int
    eps: float

    def __post_init__(self):
        if not 0.0 < self.eps < 0.5:
            raise NetworkError("circDistLt eps must lie in (0, 0.5)")

    def g(self, x: np.ndarray) -> float:
        return circ_dist(x[self.a - 1], x[self.b - 1]) - self.eps

    def gdot(self, v: np.ndarray) -> float | None:
        return None

    def evaluate(self, ctx: EvalContext) -> bool:
        return self.g(ctx.x) < 0

    def atom_nodes(self):
        return (self.a, self.b)


@dataclass(frozen=True)
class And(Predicate):
    items: tuple

    def evaluate(self, ctx):
        return all(p.evaluate(ctx) for p in self.items)

    def atoms(self):
        for p in self.items:
            yield from p.atoms()


@dataclass(frozen=True)
class Or(Predicate):
    items: tuple

    def evaluate(self, ctx):
        return any(p.evaluate(ctx) for p in self.items)

    def atoms(self):
        for p in self.items:
            yield from p.atoms()


@dataclass(frozen=True)
class Not(Predicate):
    item: Predicate

    def evaluate(self, ctx):
        return not self.item.evaluate(ctx)

    def atoms(self):
        yield from self.item.atoms()


@dataclass(frozen=True)
class Always(Predicate):
    def evaluate(self, ctx):
        return True

    def atoms(self):
        return iter(())


# --------------------------------------------------------------------------
# clauses and networks


@dataclass(frozen=True)
class EventClause:
    id: str
    alpha: ConnectionStructure
    predicate: Predicate
    assigns: Mapping[int, FieldSpec]
    override: bool = False  # stop clauses: win over any other assignment

    def __post_init__(self):
        assigns = {int(n): bind_field(f, int(n)) for n, f in dict(self.assigns).items()}
        if set(assigns) != set(linked_nodes(self.alpha)):
            raise NetworkError(
                f"clause {self.id!r}: assigns {sorted(assigns)} must cover exactly "
                f"the linked nodes {sorted(linked_nodes(self.alpha))}"
            )
        object.__setattr__(self, "assigns", tuple(sorted(assigns.items())))

    @property
    def fields(self) -> dict:
        return dict(self.assigns)

    def latch_atoms(self) -> list[At]:
        return [a for a in self.predicate.atoms() if isinstance(a, At)]


@dataclass(frozen=True)
class ClampSpec:
    """Per-node exterior representatives used to evaluate the event map (None = node not clamped)."""

    entries: tuple  # per node: (init, term, direction, c_minus, c_plus) or None
    tol: float = 1e-9

    def exterior(self, x: np.ndarray) -> dict:
        out = {}
        for i, e in enumerate(self.entries, start=1):
            if e is None:
                continue
            init, term, d, cm, cp = e
            s = d * (x[i - 1] - init)
            if s <= self.tol:
                out[i] = cm
            elif d * (x[i - 1] - term) >= -self.tol:
                out[i] = cp
        return out

    def apply(self, x: np.ndarray) -> tuple[np.ndarray, frozenset]:
        ext = self.exterior(x)
        if not ext:
            return x, frozenset()
        xt = np.array(x, dtype=float)
        for i, c in ext.items():
            xt[i - 1] = c
        return xt, frozenset(ext)


@dataclass(frozen=True)
class AsyncNetwork:
    spaces: tuple
    default_fields: tuple
    clauses: tuple = ()
    clamp: ClampSpec | None = None

    def __post_init__(self):
        k = len(self.spaces)
        if len(self.default_fields) != k:
            raise NetworkError("one default field per node required")
        for s in self.spaces:
            if s not in (LINE, CIRCLE):
                raise NetworkError(f"unknown phase space {s!r}")
        object.__setattr__(
            self, "default_fields", tuple(bind_field(f, i + 1) for i, f in enumerate(self.default_fields))
        )
        object.__setattr__(self, "clauses", tuple(self.clauses))
        ids = [c.id for c in self.clauses]
        if len(set(ids)) != len(ids):
            raise NetworkError("clause ids must be unique")
        for c in self.clauses:
            for n in linked_nodes(c.alpha) | c.predicate.nodes():
                if not 1 <= n <= k:
                    raise NetworkError(f"clause {c.id!r} references node {n} outside 1..{k}")
            for a in c.predicate.atoms():
                if isinstance(a, (Cmp, At)) and any(self.spaces[n - 1] == CIRCLE for n in a.atom_nodes()):
                    raise NetworkError(f"clause {c.id!r}: threshold atoms need line coordinates")
                if isinstance(a, CircDistLt) and CIRCLE not in (self.spaces[a.a - 1], self.spaces[a.b - 1]):
                    raise NetworkError(f"clause {c.id!r}: circDistLt needs circle coordinates")
        for i, f in enumerate(self.default_fields, start=1):
            if isinstance(f, Kuramoto) and self.spaces[i - 1] != CIRCLE:
                raise NetworkError(f"kuramoto field on non-circle node {i}")

    @property
    def k(self) -> int:
        return len(self.spaces)

    def clause(self, cid: str) -> EventClause:
        for c in self.clauses:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def atoms(self) -> list:
        seen = {}
        for c in self.clauses:
            for a in c.predicate.atoms():
                seen.setdefault(a, None)
        return list(seen)

    def generalized_structure(self) -> set:
        """Joins of every subset of clauses that can be simultaneously listed; a superset of the true A."""
        out = {EMPTY}
        for c in self.clauses:
            out |= {a | c.alpha for a in out}
        return out


def _context(net: AsyncNetwork, x, latches, frozen, velocity, zero_tol) -> tuple[EvalContext, frozenset]:
    x = np.asarray(x, dtype=float)
    exterior = frozenset()
    if net.clamp is not None:
        x, exterior = net.clamp.apply(x)
    ctx = EvalContext(x, latches or {}, frozenset(frozen), velocity, zero_tol)
    return ctx, exterior


def active_clauses(net: AsyncNetwork, x, latches=None, frozen=(), velocity=None, zero_tol=1e-12) -> tuple:
    ctx, _ = _context(net, x, latches, frozen, velocity, zero_tol)
    return tuple(c.id for c in net.clauses if c.predicate.evaluate(ctx))


def evaluate_event_map(net: AsyncNetwork, x, latches=None, frozen=(), velocity=None, zero_tol=1e-12):
    """Return (E(X), ids of active clauses)."""
    ids = active_clauses(net, x, latches, frozen, velocity, zero_tol)
    alpha = EMPTY
    for cid in ids:
        alpha = alpha | net.clause(cid).alpha
    return alpha, ids


def resolve_fields(net: AsyncNetwork, active: Sequence[str], x=None, frozen=()) -> tuple:
    """Per-node field specs given a set of active clause ids (weak input consistency elsewhere)."""
    fields = list(net.default_fields)
    owner: dict[int, str] = {}
    overridden: set[int] = set()
    exterior = frozenset()
    if net.clamp is not None and x is not None:
        exterior = frozenset(net.clamp.exterior(np.asarray(x, dtype=float)))
    for cid in active:
        c = net.clause(cid)
        for n, f in c.assigns:
            if n in overridden:
                continue
            if c.override:
                fields[n - 1] = f
                overridden.add(n)
                continue
            if n in exterior:
                continue
            if n in owner and fields[n - 1] != f:
                raise ConflictingAssignment(
                    f"clauses {owner[n]!r} and {cid!r} assign different fields to node {n}"
                )
            owner[n] = cid
            fields[n - 1] = f
    for n in frozen:
        fields[n - 1] = ZERO
    return tuple(fields)


def field_rates(fields: Sequence[FieldSpec], x: np.ndarray) -> np.ndarray:
    return np.array([f.rate(x) for f in fields], dtype=float)


def network_field(net: AsyncNetwork, x, latches=None, frozen=()) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    active = active_clauses(net, x, latches, frozen)
    return field_rates(resolve_fields(net, active, x, frozen), x)
