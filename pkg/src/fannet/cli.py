"""Command-line entry point."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import algebra, deadlock, factor, geninit, properties, transform
from .fan import NotConnected, check_geometric, transit
from .scenario import ParseError, Scenario, ValidationError, dump_scenario, load_scenario

EXIT_OK, EXIT_VERIFY, EXIT_DEADLOCK, EXIT_USAGE = 0, 2, 3, 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _start_times(args, scn: Scenario):
    T = args.start_times if getattr(args, "start_times", None) is not None else scn.start_times
    if T is not None and len(T) != scn.fan.k:
        raise ValidationError(f"--start-times: expected {scn.fan.k} values, got {len(T)}")
    return T


def cmd_simulate(args) -> int:
    scn = load_scenario(args.scenario)
    t_max = args.t_max if args.t_max is not None else scn.sim.t_max
    T = args.start_times
    fan = scn.fan
    watches = [(i, fan.guards[i - 1].term) for i in fan.guarded() if not fan.guards[i - 1].coincident]
    if T is None:
        T = (0.0,) * fan.k
    traj = geninit.evolve_generalized(fan, fan.init_point(), T, t_max, scn.sim.integrator, watches=watches)
    _emit(traj.to_csv(), args.out)
    if args.events:
        Path(args.events).write_text(traj.events_jsonl())
    return EXIT_OK


def _transition_payload(Y, S) -> dict:
    return {"Y": [float(y) for y in Y], "S": [None if s is None else float(s) for s in S]}


def cmd_transition(args) -> int:
    scn = load_scenario(args.scenario)
    rec = transit(scn.fan, scn.fan.init_point(), args.t_max or scn.sim.t_max, scn.sim.integrator)
    out = {**_transition_payload(rec.Y, rec.S), "status": rec.status}
    if not rec.reached:
        out["deadlock"] = deadlock.classify(rec.trajectory, scn.fan, scn.sim.stall_window).to_dict()
    _emit(_json(out), args.out)
    return EXIT_OK if rec.reached else EXIT_VERIFY


def cmd_gtransition(args) -> int:
    scn = load_scenario(args.scenario)
    T = _start_times(args, scn) or (0.0,) * scn.fan.k
    rec = geninit.generalized_transit(scn.fan, scn.fan.init_point(), T, args.t_max or scn.sim.t_max,
                                      scn.sim.integrator)
    out = {**_transition_payload(rec.Y, rec.S), "T": list(T), "status": rec.status}
    if not rec.reached:
        out["deadlock"] = deadlock.classify(rec.trajectory, scn.fan, scn.sim.stall_window).to_dict()
    _emit(_json(out), args.out)
    return EXIT_OK if rec.reached else EXIT_VERIFY


def cmd_regularity_scan(args) -> int:
    scn = load_scenario(args.scenario)
    rep = geninit.regularity_scan(scn.fan, args.nx, args.nt, args.T_max or scn.sim.T_max, args.seed,
                                  scn.sim.t_max, scn.sim.integrator)
    _emit(rep.to_json() + "\n", args.out)
    return EXIT_DEADLOCK if args.expect_regular and rep.failures else EXIT_OK


def cmd_deadlock_scan(args) -> int:
    scn = load_scenario(args.scenario)
    scan = deadlock.hidden_deadlock_scan(scn.fan, args.grid, args.nx, scn.sim.t_max, args.seed,
                                         scn.sim.stall_window, scn.sim.integrator)
    _emit(scan.to_json() + "\n", args.out)
    if args.csv:
        hits = {tuple(w["T"]): w["kind"] for w in scan.witnesses}
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"T_{i}" for i in range(1, scn.fan.k + 1)] + ["outcome"])
            for T in deadlock._grid(args.grid, scn.fan.k):
                w.writerow(list(T) + [hits.get(T, "connected")])
    return EXIT_DEADLOCK if args.expect_regular and scan.witnesses else EXIT_OK


def cmd_core(args) -> int:
    scn = load_scenario(args.scenario)
    scn.fan = transform.core(scn.fan)
    scn.name += "_core"
    _emit(dump_scenario(scn), args.out)
    return EXIT_OK


def cmd_stopped(args) -> int:
    scn = load_scenario(args.scenario)
    scn.fan = transform.stopped(scn.fan)
    scn.name += "_stopped"
    _emit(dump_scenario(scn), args.out)
    return EXIT_OK


def cmd_amalgamate(args) -> int:
    scns = [load_scenario(p) for p in args.scenarios]
    try:
        fan = algebra.amalgamate([s.fan for s in scns])
    except (algebra.NotIndependent, algebra.IncompatibleNetworks) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    out = Scenario("+".join(s.name for s in scns), fan, sum((s.primitives for s in scns), ()), scns[0].sim)
    _emit(dump_scenario(out), args.out)
    return EXIT_OK


def cmd_concatenate(args) -> int:
    b, a = load_scenario(args.second), load_scenario(args.first)
    try:
        fan = algebra.concatenate(b.fan, a.fan)
    except (algebra.NotPreceding, algebra.IncompatibleNetworks) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    out = Scenario(f"{b.name}_after_{a.name}", fan, a.primitives + b.primitives, a.sim)
    _emit(dump_scenario(out), args.out)
    return EXIT_OK


def cmd_factorize(args) -> int:
    scn = load_scenario(args.scenario)
    res = factor.factorize(scn.fan, scn.primitives)
    dag = res.dag
    info = {
        "layers": res.layer_ids,
        "edges": sorted(map(list, dag.hasse.edges())),
        "q": {str(i): sorted(dag.q(i)) for i in range(1, scn.fan.k + 1)},
        "droppedClauses": list(res.dropped_clauses),
    }
    _emit(_json(info), args.out)
    if args.dot:
        Path(args.dot).write_text(factor.to_dot(dag))
    return EXIT_OK


def cmd_verify_modularization(args) -> int:
    scn = load_scenario(args.scenario)
    res = factor.factorize(scn.fan, scn.primitives)
    rep = factor.verify_modularization(scn.fan, res, args.samples, args.seed, scn.sim.T_max, scn.sim.t_max,
                                       scn.sim.integrator)
    _emit(rep.to_json() + "\n", args.out)
    return EXIT_OK if rep.ok(args.tol) else EXIT_VERIFY


def cmd_verify_properties(args) -> int:
    results = properties.run_all(args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_check_geometric(args) -> int:
    scn = load_scenario(args.scenario)
    rep = check_geometric(scn.fan, args.samples, args.seed)
    _emit(rep.to_json() + "\n", args.out)
    return EXIT_OK if rep.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fannet", description="Simulate and analyse functional asynchronous networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_cmd(name, fn, help_text, out=True):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("scenario")
        if out:
            sp.add_argument("--out", "-o")
        sp.set_defaults(fn=fn)
        return sp

    sp = scenario_cmd("simulate", cmd_simulate, "trajectory CSV and event log")
    sp.add_argument("--t-max", type=float)
    sp.add_argument("--start-times", type=_floats)
    sp.add_argument("--events", help="write the event log as JSON lines")

    sp = scenario_cmd("transition", cmd_transition, "terminal states and transit times from the init point")
    sp.add_argument("--t-max", type=float)

    sp = scenario_cmd("gtransition", cmd_gtransition, "transition with per-node start times")
    sp.add_argument("--start-times", type=_floats)
    sp.add_argument("--t-max", type=float)

    sp = scenario_cmd("regularity-scan", cmd_regularity_scan, "sample (X, T) and count connected runs")
    sp.add_argument("--nx", type=int, default=1)
    sp.add_argument("--nt", type=int, default=50)
    sp.add_argument("--T-max", dest="T_max", type=float)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--expect-regular", action="store_true")

    sp = scenario_cmd("deadlock-scan", cmd_deadlock_scan, "search a start-time grid for hidden deadlocks")
    sp.add_argument("--grid", type=_floats, default=(0.0, 1.0, 2.0, 3.0, 4.0))
    sp.add_argument("--nx", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--csv", help="write a grid outcome table")
    sp.add_argument("--expect-regular", action="store_true")

    scenario_cmd("core", cmd_core, "write the clamped-evaluation variant")
    scenario_cmd("stopped", cmd_stopped, "write the variant that stops nodes at their term threshold")

    sp = sub.add_parser("amalgamate", help="merge independent scenarios")
    sp.add_argument("scenarios", nargs="+")
    sp.add_argument("--out", "-o")
    sp.set_defaults(fn=cmd_amalgamate)

    sp = sub.add_parser("concatenate", help="SECOND runs after FIRST")
    sp.add_argument("second")
    sp.add_argument("first")
    sp.add_argument("--out", "-o")
    sp.set_defaults(fn=cmd_concatenate)

    sp = scenario_cmd("factorize", cmd_factorize, "layers of the declared primitives")
    sp.add_argument("--dot")

    sp = scenario_cmd("verify-modularization", cmd_verify_modularization, "full run vs composed layers")
    sp.add_argument("--samples", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-6)

    sp = scenario_cmd("check-geometric", cmd_check_geometric, "guard and simple-type spot checks")
    sp.add_argument("--samples", type=int, default=2000)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("verify-properties", help="run the invariant suites")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_verify_properties)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotConnected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except factor.CyclicOrder as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
