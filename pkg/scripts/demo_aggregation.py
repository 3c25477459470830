#!/usr/bin/env python3
"""End-to-end demo: one aggregation session with a norm-inflating adversary.

Calibrates parameters, runs the same seeds with and without the adversary,
and prints how far the released sum moved.
"""

import argparse

import numpy as np

from privsum import (
    ClientBehavior,
    calibrate,
    honest_scenario,
    measured_traffic,
    robustness_delta,
    run_scenario,
    with_adversary,
)


def run(args):
    report = calibrate(eps=args.eps, delta=args.delta, eps_ss=args.eps,
                       delta_ss=args.delta, beta=args.beta, S=args.S,
                       k=args.k, d=args.d, n=args.n)
    params = report.params
    print(f"calibrated: sigma_ss={params.sigma_ss:.3f} sigma_v={params.sigma_v:.3f} "
          f"tau={params.tau:.2f} rho={params.rho:.2f}")

    base = honest_scenario(args.n, args.S, args.d)
    attacked = with_adversary(base, ClientBehavior(
        kind="norm-inflating", norm=args.adversary_norm_factor * params.rho))

    clean, _ = run_scenario(base, params, args.seed)
    dirty, transcript = run_scenario(attacked, params, args.seed)
    traffic = measured_traffic(transcript)

    adv_in = len(dirty.accepted) - len(clean.accepted)
    print(f"accepted without adversary: {len(clean.accepted)}/{args.n}")
    print(f"adversary accepted: {'yes' if adv_in > 0 else 'no'}")
    print(f"sum shift |y - y_minus_adv| = {robustness_delta(dirty, clean):.6f} "
          f"(rho budget {params.rho:.2f})")
    print(f"sum norm: {np.linalg.norm(dirty.sum):.4f}")
    print(f"traffic: client->server {traffic.client_to_server} B, "
          f"server<->server {traffic.server_to_server} B")
    print(f"transcript sha256: {transcript.sha256()}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=20)
    parser.add_argument("--S", type=int, default=2)
    parser.add_argument("--d", type=int, default=128)
    parser.add_argument("--k", type=int, default=64)
    parser.add_argument("--eps", type=float, default=1.0)
    parser.add_argument("--delta", type=float, default=1e-2)
    parser.add_argument("--beta", type=float, default=0.05)
    parser.add_argument("--adversary-norm-factor", type=float, default=3.0)
    parser.add_argument("--seed", type=int, default=7)
    run(parser.parse_args())
