"""Convergence studies for the manufactured cases, written to CSV and SVG.

    python scripts/run_convergence.py                 # Test a and b, k = 1, 2
    python scripts/run_convergence.py --case a --k 1 --ns 2,4,8 --out results/

Each run writes ``<out>/<case>_<family>_k<k>.csv`` and a log-log SVG plot.
"""

import argparse
import logging
from pathlib import Path

from hrvem.verify import INDICATORS, StudyConfig, plot_svg, run_study, write_csv

DEFAULT_NS = {1: (2, 4, 8), 2: (2, 4, 6)}


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--case", choices=("a", "b"), action="append")
    p.add_argument("--k", type=int, choices=(1, 2), action="append")
    p.add_argument("--family", default="cube")
    p.add_argument("--ns", type=lambda s: tuple(int(t) for t in s.split(",")))
    p.add_argument("--stabilization", choices=("boundary", "shape"), default="boundary")
    p.add_argument("--out", type=Path, default=Path("results"))
    return p.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    args.out.mkdir(parents=True, exist_ok=True)
    for case in args.case or ["a", "b"]:
        for k in args.k or [1, 2]:
            cfg = StudyConfig(args.family, args.ns or DEFAULT_NS[k], k, case,
                              stabilization=args.stabilization)
            reports = run_study(cfg)
            stem = args.out / f"{case}_{args.family}_k{k}"
            write_csv(reports, stem.with_suffix(".csv"))
            plot_svg(reports, stem.with_suffix(".svg"), f"case {case}, {args.family}, k={k}")
            last = reports[-1]
            print(f"case {case} k={k}: finest-pair rates "
                  + ", ".join(f"{key}={last.rates[key]:.2f}" for key in INDICATORS))


if __name__ == "__main__":
    main()
