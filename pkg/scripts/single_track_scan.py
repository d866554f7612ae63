"""Sweep start-time offsets on the single-track scenario and tabulate the outcome.

    python3 scripts/single_track_scan.py --step 0.25 --max 6 --csv scan.csv
"""
import argparse
import csv
import sys

import numpy as np

from fannet.deadlock import classify
from fannet.fan import NotConnected
from fannet.geninit import evolve_generalized, generalized_transition
from fannet.library import single_track


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--step", type=float, default=0.25)
    ap.add_argument("--max", type=float, default=6.0)
    ap.add_argument("--band", type=float, default=0.5, help="half-width of the collision band")
    ap.add_argument("--csv")
    args = ap.parse_args()

    fan = single_track(args.band).fan
    X = fan.init_point()
    rows = []
    for d in np.arange(-args.max, args.max + 1e-9, args.step):
        T = (max(0.0, -d), max(0.0, d))
        try:
            _, S = generalized_transition(fan, X, T, 50.0)
            rows.append((d, "connected", "", max(S)))
        except NotConnected:
            tr = evolve_generalized(fan, X, T, max(T) + 50.0)
            rep = classify(tr, fan)
            rows.append((d, "deadlock", rep.kind, rep.entry_time))

    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    w = csv.writer(out)
    w.writerow(["T2_minus_T1", "outcome", "kind", "time"])
    for d, outcome, kind, t in rows:
        w.writerow([f"{d:g}", outcome, kind, f"{t:.6g}"])
    if args.csv:
        out.close()

    bad = [d for d, o, _, _ in rows if o == "deadlock"]
    if bad:
        print(f"deadlocks for T2-T1 in [{min(bad):g}, {max(bad):g}]", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
