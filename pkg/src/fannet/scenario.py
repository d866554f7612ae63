"""JSON scenario files: schema, loading and serialization."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema

from .fan import Fan, NodeGuard
from .netcore import (
    ZERO,
    Affine,
    Always,
    And,
    AsyncNetwork,
    At,
    CircDistLt,
    ClampSpec,
    Cmp,
    ConnectionStructure,
    Constant,
    EventClause,
    Kuramoto,
    NetworkError,
    Not,
    Or,
    Zero,
)
from .semiflow import IntegratorConfig


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class SimSettings:
    t_max: float = 50.0
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    stall_window: float = 1.0
    min_period: float = 0.25
    max_period: float = 4.0
    recurrence_tol: float = 1e-4
    T_max: float = 3.0  # start times are drawn from [0, T_max] in scans


@dataclass
class Scenario:
    name: str
    fan: Fan
    primitives: tuple = ()
    sim: SimSettings = field(default_factory=SimSettings)
    start_times: tuple | None = None


_NUM = {"type": "number"}
_FIELD = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["constant", "zero", "kuramoto", "affine"]},
        "value": _NUM,
        "omega": _NUM,
        "kappa": _NUM,
        "partner": {"type": "integer"},
        "coeffs": {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
        "offset": _NUM,
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["nodes", "defaultFields", "events"],
    "properties": {
        "name": {"type": "string"},
        "nodes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "space", "initGuard", "termGuard"],
                "properties": {
                    "id": {"type": "integer", "minimum": 1},
                    "space": {"enum": ["line", "circle"]},
                    "initialState": _NUM,
                    "initGuard": {"type": ["number", "null"]},
                    "termGuard": {"type": ["number", "null"]},
                    "direction": {"enum": [1, -1]},
                    "coincident": {"type": "boolean"},
                    "margin": {"type": "number", "exclusiveMinimum": 0},
                },
                "additionalProperties": False,
            },
        },
        "defaultFields": {"type": "object", "additionalProperties": _FIELD},
        "events": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "alpha", "predicate", "assigns"],
                "properties": {
                    "id": {"type": "string"},
                    "alpha": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}},
                    "predicate": {"type": "object"},
                    "assigns": {"type": "object", "additionalProperties": _FIELD},
                    "override": {"type": "boolean"},
                },
                "additionalProperties": False,
            },
        },
        "primitives": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "support", "stages", "clauses"],
                "properties": {
                    "id": {"type": "string"},
                    "support": {"type": "array", "items": {"type": "integer"}},
                    "stages": {"type": "object", "additionalProperties": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
                    "clauses": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "sim": {
            "type": "object",
            "properties": {
                k: _NUM
                for k in ("tMax", "tEventLocalize", "hMax", "stateTol", "latchEps", "stallWindow",
                          "minPeriod", "maxPeriod", "recurrenceTol", "TMax")
            },
            "additionalProperties": False,
        },
        "startTimes": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "clamp": {
            "type": "array",
            "items": {
                "type": ["object", "null"],
                "required": ["cMinus", "cPlus"],
                "properties": {"cMinus": _NUM, "cPlus": _NUM},
            },
        },
    },
}

_SIM_KEYS = {
    "tMax": "t_max", "stallWindow": "stall_window", "minPeriod": "min_period",
    "maxPeriod": "max_period", "recurrenceTol": "recurrence_tol", "TMax": "T_max",
}
_CFG_KEYS = {"tEventLocalize": "t_event_localize", "hMax": "h_max", "stateTol": "state_tol", "latchEps": "latch_eps"}


def _where(doc: dict, path) -> str:
    path = list(path)
    if len(path) >= 2 and path[0] == "nodes" and isinstance(path[1], int):
        try:
            nid = doc["nodes"][path[1]].get("id", path[1] + 1)
        except (IndexError, AttributeError):
            nid = path[1] + 1
        return f"node {nid}" + (f" field {path[2]!r}" if len(path) > 2 else "")
    if len(path) >= 2 and path[0] == "events" and isinstance(path[1], int):
        try:
            eid = doc["events"][path[1]].get("id", path[1])
        except (IndexError, AttributeError):
            eid = path[1]
        return f"event {eid!r}" + (f" field {path[2]!r}" if len(path) > 2 else "")
    return "/".join(map(str, path)) or "scenario"


# ---- fields and predicates


def field_from_json(d: dict):
    kind = d["kind"]
    try:
        if kind == "constant":
            return Constant(float(d["value"]))
        if kind == "zero":
            return ZERO
        if kind == "kuramoto":
            return Kuramoto(float(d["omega"]), float(d["kappa"]), int(d["partner"]))
        return Affine(tuple((int(n), float(c)) for n, c in d["coeffs"]), float(d.get("offset", 0.0)))
    except KeyError as exc:
        raise ValidationError(f"{kind} field is missing {exc.args[0]!r}") from None


def field_to_json(f) -> dict:
    if isinstance(f, Zero):
        return {"kind": "zero"}
    if isinstance(f, Constant):
        return {"kind": "constant", "value": f.value}
    if isinstance(f, Kuramoto):
        return {"kind": "kuramoto", "omega": f.omega, "kappa": f.kappa, "partner": f.partner}
    if isinstance(f, Affine):
        return {"kind": "affine", "coeffs": [list(c) for c in f.coeffs], "offset": f.offset}
    raise TypeError(f"cannot serialize field {f!r}")


def predicate_from_json(d: dict):
    if not isinstance(d, dict):
        raise ValidationError(f"predicate must be an object, got {d!r}")
    if "and" in d:
        return And(tuple(predicate_from_json(p) for p in d["and"]))
    if "or" in d:
        return Or(tuple(predicate_from_json(p) for p in d["or"]))
    if "not" in d:
        return Not(predicate_from_json(d["not"]))
    op = d.get("op")
    try:
        if op in ("lt", "le", "gt", "ge"):
            other = d.get("other")
            return Cmp(op, int(d["node"]), float(d["value"]), None if other is None else int(other))
        if op == "at":
            return At(int(d["node"]), float(d["value"]))
        if op == "circDistLt":
            return CircDistLt(int(d["a"]), int(d["b"]), float(d["eps"]))
        if op == "true":
            return Always()
    except KeyError as exc:
        raise ValidationError(f"predicate {op!r} is missing {exc.args[0]!r}") from None
    raise ValidationError(f"unknown predicate {d!r}")


def predicate_to_json(p) -> dict:
    if isinstance(p, And):
        return {"and": [predicate_to_json(q) for q in p.items]}
    if isinstance(p, Or):
        return {"or": [predicate_to_json(q) for q in p.items]}
    if isinstance(p, Not):
        return {"not": predicate_to_json(p.item)}
    if isinstance(p, Cmp):
        d = {"op": p.op, "node": p.node, "value": p.value}
        if p.other is not None:
            d["other"] = p.other
        return d
    if isinstance(p, At):
        return {"op": "at", "node": p.node, "value": p.value}
    if isinstance(p, CircDistLt):
        return {"op": "circDistLt", "a": p.a, "b": p.b, "eps": p.eps}
    if isinstance(p, Always):
        return {"op": "true"}
    raise TypeError(f"cannot serialize predicate {p!r}")


# ---- whole scenarios


def scenario_from_dict(doc: dict, name: str = "scenario") -> Scenario:
    from .factor import PrimitiveDecl

    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ValidationError(f"{_where(doc, e.absolute_path)}: {e.message}")

    nodes = sorted(doc["nodes"], key=lambda n: n["id"])
    ids = [n["id"] for n in nodes]
    if ids != list(range(1, len(nodes) + 1)):
        raise ValidationError(f"node ids must be 1..{len(nodes)}, got {ids}")
    spaces, guards, aux = [], [], []
    for n in nodes:
        spaces.append(n["space"])
        ig, tg = n["initGuard"], n["termGuard"]
        if (ig is None) != (tg is None):
            raise ValidationError(f"node {n['id']} field 'termGuard': give both guards or neither")
        if ig is None:
            guards.append(None)
            aux.append(float(n.get("initialState", 0.0)))
            continue
        d = n.get("direction", 1 if tg >= ig else -1)
        try:
            guards.append(NodeGuard(float(ig), float(tg), d, n.get("coincident", ig == tg), n.get("margin")))
        except NetworkError as exc:
            raise ValidationError(f"node {n['id']} field 'termGuard': {exc}") from None
        aux.append(0.0)  # guarded nodes start on their init threshold

    defaults = []
    for n in ids:
        f = doc["defaultFields"].get(str(n))
        if f is None:
            raise ValidationError(f"node {n} field 'defaultFields': missing default field")
        defaults.append(field_from_json(f))

    clauses = []
    for ev in doc["events"]:
        try:
            clauses.append(
                EventClause(
                    ev["id"],
                    ConnectionStructure(frozenset(tuple(e) for e in ev["alpha"])),
                    predicate_from_json(ev["predicate"]),
                    {int(k): field_from_json(v) for k, v in ev["assigns"].items()},
                    ev.get("override", False),
                )
            )
        except (NetworkError, ValidationError) as exc:
            raise ValidationError(f"event {ev['id']!r}: {exc}") from None

    clamp = None
    if doc.get("clamp") is not None:
        entries = []
        for g, c in zip(guards, doc["clamp"]):
            entries.append(None if c is None or g is None else (g.init, g.term, g.direction, c["cMinus"], c["cPlus"]))
        clamp = ClampSpec(tuple(entries))
    try:
        net = AsyncNetwork(tuple(spaces), tuple(defaults), tuple(clauses), clamp)
        fan = Fan(net, tuple(guards), tuple(aux) if None in guards else None)
    except NetworkError as exc:
        raise ValidationError(str(exc)) from None

    prims = []
    for p in doc.get("primitives", []):
        try:
            prims.append(PrimitiveDecl(p["id"], p["support"], {int(k): tuple(v) for k, v in p["stages"].items()}, p["clauses"]))
        except ValueError as exc:
            raise ValidationError(f"primitive {p['id']!r}: {exc}") from None

    sim_doc = doc.get("sim", {})
    cfg = replace(IntegratorConfig(), **{_CFG_KEYS[k]: v for k, v in sim_doc.items() if k in _CFG_KEYS})
    sim = SimSettings(integrator=cfg, **{_SIM_KEYS[k]: v for k, v in sim_doc.items() if k in _SIM_KEYS})
    T = doc.get("startTimes")
    if T is not None and len(T) != len(nodes):
        raise ValidationError(f"startTimes: expected {len(nodes)} values, got {len(T)}")
    return Scenario(doc.get("name", name), fan, tuple(prims), sim, None if T is None else tuple(map(float, T)))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return scenario_from_dict(doc, path.stem)


def scenario_to_dict(scn: Scenario) -> dict:
    fan = scn.fan
    net = fan.net
    init = fan.init_point()
    nodes = []
    for i, (sp, g) in enumerate(zip(net.spaces, fan.guards), start=1):
        d = {"id": i, "space": sp}
        if g is None:
            d.update(initialState=float(init[i - 1]), initGuard=None, termGuard=None)
        else:
            d.update(initGuard=g.init, termGuard=g.term, direction=g.direction)
            if g.coincident:
                d["coincident"] = True
            if g.margin is not None:
                d["margin"] = g.margin
        nodes.append(d)
    events = []
    for c in net.clauses:
        ev = {
            "id": c.id,
            "alpha": [list(e) for e in c.alpha],
            "predicate": predicate_to_json(c.predicate),
            "assigns": {str(n): field_to_json(f) for n, f in c.assigns},
        }
        if c.override:
            ev["override"] = True
        events.append(ev)
    cfg, sim = scn.sim.integrator, scn.sim
    doc = {
        "name": scn.name,
        "nodes": nodes,
        "defaultFields": {str(i): field_to_json(f) for i, f in enumerate(net.default_fields, start=1)},
        "events": events,
        "sim": {
            **{k: getattr(sim, v) for k, v in _SIM_KEYS.items()},
            **{k: getattr(cfg, v) for k, v in _CFG_KEYS.items()},
        },
    }
    if scn.primitives:
        doc["primitives"] = [
            {"id": p.id, "support": sorted(p.support), "stages": {str(n): list(s) for n, s in p.stages},
             "clauses": list(p.clauses)}
            for p in scn.primitives
        ]
    if scn.start_times is not None:
        doc["startTimes"] = list(scn.start_times)
    if net.clamp is not None:
        doc["clamp"] = [None if e is None else {"cMinus": e[3], "cPlus": e[4]} for e in net.clamp.entries]
    return doc


def dump_scenario(scn: Scenario, path=None) -> str:
    text = json.dumps(scenario_to_dict(scn), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
