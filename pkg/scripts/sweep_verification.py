#!/usr/bin/env python3
"""Sweep completeness and soundness accept rates over projection dimensions.

Writes one CSV per sweep kind using the same machinery as
`privsum experiment`; a quick way to regenerate the rate tables.
"""

import argparse

from privsum.cli import main as cli_main


def run(args):
    for kind in ("completeness", "soundness"):
        out = f"{args.prefix}_{kind}.csv"
        code = cli_main([
            "experiment", "--kind", kind,
            "--k-grid", args.k_grid,
            "--S", str(args.S), "--d", str(args.d),
            "--beta", str(args.beta),
            "--eps", str(args.eps), "--delta", str(args.delta),
            "--trials", str(args.trials), "--seed", str(args.seed),
            "--out", out,
        ])
        if code != 0:
            raise SystemExit(code)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--k-grid", default="16,32,64,128")
    parser.add_argument("--S", type=int, default=2)
    parser.add_argument("--d", type=int, default=256)
    parser.add_argument("--beta", type=float, default=0.05)
    parser.add_argument("--eps", type=float, default=1.0)
    parser.add_argument("--delta", type=float, default=1e-2)
    parser.add_argument("--trials", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--prefix", default="sweep")
    run(parser.parse_args())
