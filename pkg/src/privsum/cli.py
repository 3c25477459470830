"""Command-line front door: calibrate, share, verify-norm, aggregate, experiment, audit.

Exit codes are a stable contract: 0 success, 2 usage/config/infeasible
parameters, 3 protocol abort. CSV outputs carry a schema comment as their
first line. PRIVSUM_OUTPUT_DIR overrides the directory for relative
output paths.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from .core import ProtocolParams, calibrate, chi2_thresholds, gaussian_sigma
from .errors import InfeasibleParameters, ProtocolError, ScenarioError
from .harness import Scenario, measured_traffic, run_scenario
from .rng import substream
from .sharing import clamp_probability, reconstruct, share_vector, simulate_share_view
from .verification import W_MODE_SHARED, W_MODES, run_norm_verification

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ABORT = 3

EXPERIMENT_SCHEMA = "privsum.experiment.v1"
AUDIT_SCHEMA = "privsum.audit.v1"


def _output_path(path: str) -> Path:
    base = os.environ.get("PRIVSUM_OUTPUT_DIR")
    p = Path(path)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid definition for a completeness or soundness sweep."""

    kind: str  # "completeness" | "soundness"
    k_grid: tuple[int, ...]
    S: int = 2
    d: int = 64
    n: int = 1
    beta: float = 0.05
    eps: float = 1.0
    delta: float = 1e-2
    eps_ss: float = 1.0
    delta_ss: float = 1e-2
    trials: int = 1000
    seed: int = 0
    norm_factor: float = 1.0  # soundness: adversary norm as a multiple of rho

    def to_dict(self) -> dict:
        out = asdict(self)
        out["k_grid"] = list(self.k_grid)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        data["k_grid"] = tuple(int(k) for k in data.get("k_grid", ()))
        return cls(**data)


def _add_privacy_flags(p: argparse.ArgumentParser, require: bool = True) -> None:
    p.add_argument("--eps", type=float, required=require, help="DZK epsilon for norm verification")
    p.add_argument("--delta", type=float, required=require, help="DZK delta for norm verification")
    p.add_argument("--eps-ss", type=float, default=None, help="secret-sharing epsilon (default: --eps)")
    p.add_argument("--delta-ss", type=float, default=None, help="secret-sharing delta (default: --delta)")
    p.add_argument("--beta", type=float, required=require, help="completeness/soundness failure probability")
    p.add_argument("--S", type=int, required=require, help="number of verifiers")
    p.add_argument("--k", type=int, required=require, help="projection dimension")
    p.add_argument("--d", type=int, required=require, help="payload dimension")


def _calibrate_from_args(args) -> ProtocolParams:
    report = calibrate(
        eps=args.eps, delta=args.delta,
        eps_ss=args.eps_ss if args.eps_ss is not None else args.eps,
        delta_ss=args.delta_ss if args.delta_ss is not None else args.delta,
        beta=args.beta, S=args.S, k=args.k, d=args.d,
        n=getattr(args, "n", 1) or 1,
        exact_cdf=getattr(args, "exact_cdf", False),
        trunc_b=getattr(args, "trunc_b", None),
        quant_step=getattr(args, "quant_step", 1.0),
    )
    return report.params


def cmd_calibrate(args) -> int:
    try:
        report = calibrate(
            eps=args.eps, delta=args.delta,
            eps_ss=args.eps_ss if args.eps_ss is not None else args.eps,
            delta_ss=args.delta_ss if args.delta_ss is not None else args.delta,
            beta=args.beta, S=args.S, k=args.k, d=args.d, n=args.n,
            exact_cdf=args.exact_cdf, session_calibrated=args.session_calibrated,
            trunc_b=args.trunc_b, quant_step=args.quant_step,
        )
    except InfeasibleParameters as exc:
        print(f"infeasible parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for name, formula, value in report.derivation_log:
        print(f"{name:<16} {value:<24.12g} {formula}")
    if args.out:
        path = _output_path(args.out)
        payload = {
            "params": report.params.to_dict(),
            "c_delta": report.c_delta,
            "lambda": report.lam,
            "rho_exact": report.rho_exact,
            "rho_asymptotic_estimate": report.rho_asymptotic_estimate,
            "derivation_log": [list(entry) for entry in report.derivation_log],
        }
        path.write_text(json.dumps(payload, indent=2) + "\n")
        print(f"wrote {path}")
    return EXIT_OK


def cmd_share(args) -> int:
    rng = substream(args.seed, "cli-share")
    u = rng.standard_normal(args.d)
    x = args.norm * u / np.linalg.norm(u)
    bundle = share_vector(x, args.S, args.sigma_ss, rng, client_id=args.client_id)
    err = float(np.max(np.abs(reconstruct(bundle) - x)))
    print(f"client_id={bundle.client_id} S={bundle.S} d={bundle.d} "
          f"reconstruction_error={err:.3g}")
    if args.out:
        path = _output_path(args.out)
        payload = {
            "client_id": bundle.client_id,
            "sigma_ss": args.sigma_ss,
            "x": x.tolist(),
            "shares": bundle.shares.tolist(),
        }
        path.write_text(json.dumps(payload) + "\n")
        print(f"wrote {path}")
    return EXIT_OK


def cmd_verify_norm(args) -> int:
    try:
        params = _calibrate_from_args(args)
    except InfeasibleParameters as exc:
        print(f"infeasible parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rng = substream(args.seed, "cli-verify-input")
    u = rng.standard_normal(args.d)
    x = args.norm * u / np.linalg.norm(u)
    bundle = share_vector(x, args.S, params.sigma_ss, rng, client_id="cli")
    outcome, transcript = run_norm_verification(bundle, params, args.seed,
                                                w_mode=args.w_mode)
    print(f"accept={int(outcome.accept)} v_norm={outcome.v_norm:.6g} "
          f"tau={outcome.tau:.6g} transcript_sha256={transcript.sha256()}")
    if args.transcript:
        path = _output_path(args.transcript)
        path.write_text(transcript.to_jsonl(include_payload=args.full_payloads))
        print(f"wrote {path}")
    return EXIT_OK


def _load_params(args) -> ProtocolParams:
    if args.params:
        data = json.loads(Path(args.params).read_text())
        if "params" in data:
            data = data["params"]
        return ProtocolParams.from_dict(data)
    missing = [f for f in ("eps", "delta", "beta", "k") if getattr(args, f) is None]
    if missing:
        raise ScenarioError(
            f"provide --params or the calibration flags (missing: {missing})"
        )
    return _calibrate_from_args(args)


def cmd_aggregate(args) -> int:
    try:
        scenario = Scenario.from_json(Path(args.config).read_text())
    except FileNotFoundError:
        print(f"config not found: {args.config}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args.S, args.d = scenario.S, scenario.d
        params = _load_params(args)
    except (InfeasibleParameters, ScenarioError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE

    result, transcript = run_scenario(scenario, params, args.seed)
    traffic = measured_traffic(transcript)
    summary = {
        "aborted": result.aborted,
        "accepted": sorted(result.accepted),
        "n": scenario.n,
        "accepted_count": len(result.accepted),
        "sum_norm": None if result.sum is None else float(np.linalg.norm(result.sum)),
        "client_to_server_bytes": traffic.client_to_server,
        "server_to_server_bytes": traffic.server_to_server,
        "transcript_sha256": transcript.sha256(),
        "master_seed": args.seed,
    }
    print(json.dumps(summary, indent=2))
    if args.transcript:
        path = _output_path(args.transcript)
        path.write_text(transcript.to_jsonl(include_payload=args.full_payloads))
        print(f"wrote {path}")
    if args.summary:
        path = _output_path(args.summary)
        path.write_text(json.dumps(summary, indent=2) + "\n")
        print(f"wrote {path}")
    return EXIT_ABORT if result.aborted else EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    if args.config:
        data = json.loads(Path(args.config).read_text())
        return ExperimentConfig.from_dict(data)
    if not args.k_grid:
        raise ScenarioError("empty grid: provide --k-grid or --config")
    return ExperimentConfig(
        kind=args.kind,
        k_grid=tuple(int(k) for k in args.k_grid.split(",") if k),
        S=args.S, d=args.d, beta=args.beta,
        eps=args.eps, delta=args.delta,
        eps_ss=args.eps_ss if args.eps_ss is not None else args.eps,
        delta_ss=args.delta_ss if args.delta_ss is not None else args.delta,
        trials=args.trials, seed=args.seed, norm_factor=args.norm_factor,
    )


def cmd_experiment(args) -> int:
    try:
        config = _experiment_config(args)
        if not config.k_grid:
            raise ScenarioError("empty grid")
        if config.kind not in ("completeness", "soundness"):
            raise ScenarioError(f"unknown experiment kind {config.kind!r}")
    except (ScenarioError, TypeError, ValueError, FileNotFoundError) as exc:
        print(f"invalid experiment config: {exc}", file=sys.stderr)
        return EXIT_USAGE

    rows = []
    for k in config.k_grid:
        try:
            report = calibrate(eps=config.eps, delta=config.delta,
                               eps_ss=config.eps_ss, delta_ss=config.delta_ss,
                               beta=config.beta, S=config.S, k=k, d=config.d)
        except InfeasibleParameters as exc:
            print(f"infeasible at k={k}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        params = report.params
        if config.kind == "completeness":
            target = 1.0
            pattern = audit_mod.PATTERN_RANDOM
        else:
            target = config.norm_factor * params.rho
            pattern = audit_mod.PATTERN_CONCENTRATED
        est = audit_mod.norm_verification_rate(
            params, target, config.trials,
            substream(config.seed, "experiment", config.kind, k), pattern=pattern,
        )
        rows.append({
            "kind": config.kind, "k": k, "S": config.S, "d": config.d,
            "beta": config.beta, "eps": config.eps, "delta": config.delta,
            "target_norm": target, "trials": config.trials,
            "rate": est.rate, "ci_lo": est.ci95[0], "ci_hi": est.ci95[1],
        })

    header = list(rows[0].keys())
    out = args.out or "experiment.csv"
    path = _output_path(out)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema: {EXPERIMENT_SCHEMA}\n")
        writer = csv.DictWriter(fh, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def _audit_rows(samples: int, seed: int) -> list[dict]:
    """The fixed audit battery: every row is (check, params, statistic, threshold)."""
    rows = []

    def add(check: str, params: str, statistic: float, threshold: float):
        verdict = (audit_mod.VERDICT_CONSISTENT if statistic <= threshold
                   else audit_mod.VERDICT_REJECTED)
        rows.append({
            "check": check, "params": params,
            "statistic": f"{statistic:.6g}", "threshold": f"{threshold:.6g}",
            "verdict": verdict,
        })

    # chi-square tail bounds, Monte Carlo
    for k in (8, 64, 256):
        for x in (1.0, 3.0, math.log(100.0)):
            lower, upper = chi2_thresholds(k, x)
            rng = substream(seed, "audit-chi2", k, int(x * 1000))
            draws = rng.chisquare(k, size=samples)
            bound = math.exp(-x)
            lo_rate = float(np.mean(draws <= lower))
            hi_rate = float(np.mean(draws >= upper))
            se = audit_mod.binomial_se(bound, samples)
            add("chi2-lower-tail", f"k={k},x={x:.3g}", lo_rate, bound + 3 * se)
            add("chi2-upper-tail", f"k={k},x={x:.3g}", hi_rate, bound + 3 * se)

    # Gaussian mechanism at inflated delta (sampling) and tiny delta (analytic)
    est = audit_mod.privacy_loss_mc(1.0, gaussian_sigma(1.0, 1e-2), 8, 1.0,
                                    max(samples, 1000),
                                    substream(seed, "audit-gauss"),
                                    delta_target=1e-2)
    add("gaussian-mech-mc", "eps=1,delta=1e-2", est.empirical_exceed_rate,
        1e-2 + 3 * audit_mod.binomial_se(1e-2, est.samples))
    tail = audit_mod.privacy_loss_tail(1.0, gaussian_sigma(1.0, 1e-5), 1.0)
    add("gaussian-mech-analytic", "eps=1,delta=1e-5", tail, 1e-5)

    # noisy projection privacy at audit scale
    report = calibrate(eps=1.0, delta=1e-2, eps_ss=1.0, delta_ss=1e-2,
                       beta=0.05, S=2, k=64, d=64)
    x = np.zeros(64)
    x[0] = 1.0
    est = audit_mod.conditioned_projection_privacy(
        report.params, x, max(samples, 1000), substream(seed, "audit-proj"))
    add("projection-privacy", "eps=1,delta=1e-2,k=64", est.empirical_exceed_rate,
        2e-2 + 3 * audit_mod.binomial_se(2e-2, est.samples))

    # exact share simulation, coalitions without verifier 0
    d = 8
    for S in (2, 3):
        for size in range(1, S - 1 + 1):
            T = tuple(range(1, 1 + size))
            n_samp = min(samples, 10_000)

            def real(rng, count, S=S, T=T):
                out = np.empty((count, len(T) * d))
                for i in range(count):
                    u = rng.standard_normal(d)
                    bundle = share_vector(u / np.linalg.norm(u), S, 10.0, rng)
                    out[i] = np.concatenate([bundle.shares[t] for t in T])
                return out

            def sim(rng, count, S=S, T=T):
                out = np.empty((count, len(T) * d))
                for i in range(count):
                    view = simulate_share_view(T, S, 10.0, d, rng)
                    out[i] = np.concatenate([view.messages[t] for t in T])
                return out

            rep = audit_mod.two_sample_closeness(
                real, sim, len(T) * d, n_samp,
                substream(seed, "audit-sim", S, size),
                label_p=f"real-share-view S={S} T={T}",
                label_q=f"simulated-share-view S={S} T={T}")
            add("share-sim-exact", f"S={S},T={T}", max(rep.statistics),
                rep.threshold)

    # completeness / soundness spot rates
    rate_trials = max(1000, min(samples, 10_000))
    report = calibrate(eps=1.0, delta=1e-2, eps_ss=1.0, delta_ss=1e-2,
                       beta=0.05, S=2, k=64, d=64)
    comp = audit_mod.norm_verification_rate(report.params, 1.0, rate_trials,
                                            substream(seed, "audit-comp"))
    add("completeness-rate", "beta=0.05,k=64", 1.0 - comp.rate,
        0.05 + 3 * audit_mod.binomial_se(0.05, rate_trials))
    sound = audit_mod.norm_verification_rate(
        report.params, report.params.rho, rate_trials,
        substream(seed, "audit-sound"), pattern=audit_mod.PATTERN_CONCENTRATED)
    add("soundness-rate", "beta=0.05,k=64", sound.rate,
        0.05 + 3 * audit_mod.binomial_se(0.05, rate_trials))

    # truncation distortion example
    add("truncation-clamp", "B=127,sigma_ss=20", clamp_probability(127.0, 20.0), 1e-8)
    return rows


def cmd_audit(args) -> int:
    rows = _audit_rows(args.samples, args.seed)
    lines = [f"# schema: {AUDIT_SCHEMA}"]
    lines.append("check\tparams\tstatistic\tthreshold\tverdict")
    for row in rows:
        lines.append("\t".join(row[c] if isinstance(row[c], str) else str(row[c])
                               for c in ("check", "params", "statistic",
                                         "threshold", "verdict")))
    text = "\n".join(lines) + "\n"
    if args.out:
        path = _output_path(args.out)
        path.write_text(text)
        print(f"wrote {path} ({len(rows)} checks)")
    else:
        print(text, end="")
    rejected = [r for r in rows if r["verdict"] == audit_mod.VERDICT_REJECTED]
    print(f"audit: {len(rows) - len(rejected)}/{len(rows)} checks consistent")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privsum",
        description="Robust, differentially-secure vector summation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_command(name, **kwargs):
        # defaults show up in --help so published runs are self-documenting
        return sub.add_parser(
            name, formatter_class=argparse.ArgumentDefaultsHelpFormatter, **kwargs)

    p = add_command("calibrate", help="derive all protocol parameters")
    _add_privacy_flags(p)
    p.add_argument("--n", type=int, default=1, help="client count (for session calibration)")
    p.add_argument("--exact-cdf", action="store_true",
                   help="use exact chi-square quantiles instead of tail bounds")
    p.add_argument("--session-calibrated", action="store_true",
                   help="calibrate at beta/n for a session-level guarantee")
    p.add_argument("--trunc-b", type=float, default=None, help="share truncation bound")
    p.add_argument("--quant-step", type=float, default=1.0, help="share quantization step")
    p.add_argument("--out", default=None, help="write the report as JSON")
    p.set_defaults(func=cmd_calibrate)

    p = add_command("share", help="secret-share a random vector")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--S", type=int, required=True)
    p.add_argument("--sigma-ss", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--norm", type=float, default=1.0)
    p.add_argument("--client-id", default="cli")
    p.add_argument("--out", default=None, help="write the bundle as JSON")
    p.set_defaults(func=cmd_share)

    p = add_command("verify-norm", help="run one norm-verification session")
    _add_privacy_flags(p)
    p.add_argument("--norm", type=float, default=1.0, help="input vector norm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--w-mode", choices=W_MODES, default=W_MODE_SHARED)
    p.add_argument("--exact-cdf", action="store_true")
    p.add_argument("--transcript", default=None, help="write the transcript as JSONL")
    p.add_argument("--full-payloads", action="store_true",
                   help="include hex payloads in the transcript file")
    p.set_defaults(func=cmd_verify_norm)

    p = add_command("aggregate", help="run a full aggregation scenario")
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--params", default=None, help="params JSON (from calibrate --out)")
    _add_privacy_flags(p, require=False)
    p.add_argument("--exact-cdf", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--transcript", default=None, help="write the transcript as JSONL")
    p.add_argument("--summary", default=None, help="write the run summary as JSON")
    p.add_argument("--full-payloads", action="store_true")
    p.set_defaults(func=cmd_aggregate)

    p = add_command("experiment", help="Monte Carlo sweep over a parameter grid")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--kind", choices=("completeness", "soundness"),
                   default="completeness", help="which accept rate to sweep")
    p.add_argument("--k-grid", default="", help="comma-separated projection dimensions")
    p.add_argument("--S", type=int, default=2, help="number of verifiers")
    p.add_argument("--d", type=int, default=64, help="payload dimension")
    p.add_argument("--beta", type=float, default=0.05, help="failure probability")
    p.add_argument("--eps", type=float, default=1.0, help="DZK epsilon")
    p.add_argument("--delta", type=float, default=1e-2, help="DZK delta")
    p.add_argument("--eps-ss", type=float, default=None, help="sharing epsilon (default: --eps)")
    p.add_argument("--delta-ss", type=float, default=None, help="sharing delta (default: --delta)")
    p.add_argument("--trials", type=int, default=1000, help="trials per grid point")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--norm-factor", type=float, default=1.0,
                   help="soundness: adversary norm as a multiple of rho")
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_experiment)

    p = add_command("audit", help="run the statistical audit battery")
    p.add_argument("--samples", type=int, default=100_000,
                   help="Monte Carlo samples per check (tail checks use this directly)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="TSV report path")
    p.set_defaults(func=cmd_audit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ProtocolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
