"""Factorize a scenario and compare the full transition with the composed layer transitions.

    python3 scripts/modularization_run.py fixtures/three_trains.json --samples 200
"""
import argparse
import json
import sys

from fannet.factor import factorize, to_dot, verify_modularization, verify_products
from fannet.scenario import load_scenario


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenario")
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--T-max", dest="T_max", type=float)
    ap.add_argument("--dot", help="also write the layered DAG")
    args = ap.parse_args()

    scn = load_scenario(args.scenario)
    if not scn.primitives:
        print("scenario declares no primitives", file=sys.stderr)
        return 2
    res = factorize(scn.fan, scn.primitives)
    T_max = scn.sim.T_max if args.T_max is None else args.T_max
    full = verify_modularization(scn.fan, res, args.samples, args.seed, T_max, scn.sim.t_max)
    prod = verify_products(res, max(1, args.samples // 4), args.seed, T_max, scn.sim.t_max)
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(to_dot(res.dag))
    summary = {
        "layers": res.layer_ids,
        "droppedClauses": list(res.dropped_clauses),
        "composition": full.to_dict(),
        "products": prod.to_dict(),
    }
    print(json.dumps(summary, indent=2))
    return 0 if full.ok(1e-6) and prod.ok(1e-6) else 2


if __name__ == "__main__":
    sys.exit(main())
