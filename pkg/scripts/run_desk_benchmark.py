#!/usr/bin/env python3
"""Paired lambda comparison on 4-class blobs: final robust accuracy and forgetting drops.

    python3 scripts/run_desk_benchmark.py --lambdas 0,0.5 --seeds 10 --csv desk.csv
"""
import argparse
import csv
import sys
import time

from roal.benchmark import DeskSetup, desk_run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", default="0,0.5")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--epsilon", type=float, default=DeskSetup.epsilon)
    ap.add_argument("--spread", type=float, default=DeskSetup.spread)
    ap.add_argument("--epochs", type=int, default=DeskSetup.epochs)
    ap.add_argument("--csv", help="also write per-seed rows here")
    args = ap.parse_args(argv)

    setup = DeskSetup(epsilon=args.epsilon, spread=args.spread, epochs=args.epochs)
    rows = []
    for lam in (float(v) for v in args.lambdas.split(",")):
        t0 = time.perf_counter()
        res = desk_run(lam, range(args.seeds), setup)
        switches = " ".join(f"{d:+.4f}" for d in res.mean_drop_by_switch)
        print(f"lambda={lam:<5g} final robust {res.mean_final_robust:.4f}  "
              f"mean drop {res.mean_drop:+.4f}  per switch [{switches}]  "
              f"({time.perf_counter() - t0:.1f}s)")
        for s, (final, drops) in enumerate(zip(res.final_robust, res.drops)):
            rows.append([lam, s, f"{final:.6g}"] + [f"{d:.6g}" for d in drops])

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "seed", "final_robust_accuracy"]
                       + [f"drop_{t}" for t in range(2, setup.iterations + 1)])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
