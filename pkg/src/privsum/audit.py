"""Statistical audits of the distributional and privacy claims.

Monte Carlo where the targets are large enough for sampling to have power
(delta, beta >= 1e-2), analytic Gaussian tail evaluation elsewhere.
Privacy loss is always computed from the closed-form normal log-density
ratio, never from density estimation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .core import ProtocolParams, as_vector, c_delta, sample_projection
from .errors import DimensionMismatch, ParameterError
from .harness import Scenario, run_scenario
from .rng import seed_int, substream
from .sharing import share_vector
from .verification import project_reply, verifier0_decide

VERDICT_CONSISTENT = "consistent"
VERDICT_REJECTED = "rejected"


@dataclass(frozen=True)
class PrivacyLossEstimate:
    eps_target: float
    delta_target: float | None
    empirical_exceed_rate: float
    standard_error: float
    samples: int


@dataclass(frozen=True)
class ClosenessReport:
    label_p: str
    label_q: str
    statistics: tuple[float, ...]
    threshold: float
    samples: int
    verdict: str


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    ci95: tuple[float, float]
    trials: int


def binomial_se(rate: float, n: int) -> float:
    return math.sqrt(max(rate * (1.0 - rate), 0.0) / n)


def _normal_ci95(rate: float, n: int) -> tuple[float, float]:
    half = 1.959963984540054 * binomial_se(rate, n)
    return (max(0.0, rate - half), min(1.0, rate + half))


def privacy_loss_mc(shift_norm: float, sigma: float, k: int, eps: float,
                    samples: int, seed, *,
                    delta_target: float | None = None) -> PrivacyLossEstimate:
    """Monte Carlo rate of |privacy loss| > eps for a shifted Gaussian pair.

    Samples y ~ N(m, sigma^2 I_k) with ||m|| = shift_norm and evaluates the
    log-density ratio loss(y) = (<y, m> - ||m||^2 / 2) / sigma^2 against
    the N(0, sigma^2 I_k) hypothesis.
    """
    if shift_norm < 0:
        raise ParameterError("shift_norm must be >= 0")
    if sigma <= 0 or eps <= 0:
        raise ParameterError("sigma and eps must be > 0")
    if samples < 1000:
        raise ParameterError(f"need at least 1000 samples, got {samples}")
    if k < 1:
        raise ParameterError("k must be >= 1")
    rng = substream(seed) if isinstance(seed, int) else seed
    if shift_norm == 0.0:
        exceed = 0
    else:
        # by rotational symmetry the shift sits on the first axis
        m = np.zeros(k)
        m[0] = shift_norm
        y = m + rng.normal(0.0, sigma, size=(samples, k))
        loss = (y @ m - shift_norm ** 2 / 2.0) / sigma ** 2
        exceed = int(np.sum(np.abs(loss) > eps))
    rate = exceed / samples
    return PrivacyLossEstimate(eps_target=eps, delta_target=delta_target,
                               empirical_exceed_rate=rate,
                               standard_error=binomial_se(rate, samples),
                               samples=samples)


def privacy_loss_tail(shift_norm: float, sigma: float, eps: float) -> float:
    """Exact Pr[|loss| > eps] for the shifted Gaussian pair, no sampling.

    loss ~ N(mu, 2 mu) with mu = shift_norm^2 / (2 sigma^2) under the
    shifted measure; the tail is a sum of two normal tails.
    """
    if shift_norm < 0 or sigma <= 0 or eps <= 0:
        raise ParameterError("need shift_norm >= 0, sigma > 0, eps > 0")
    if shift_norm == 0.0:
        return 0.0
    mu = shift_norm ** 2 / (2.0 * sigma ** 2)
    sd = math.sqrt(2.0 * mu)
    return float(stats.norm.sf((eps - mu) / sd) + stats.norm.sf((eps + mu) / sd))


def conditioned_projection_privacy(params: ProtocolParams, x, samples: int,
                                   seed, *, chunk: int = 1000,
                                   ) -> PrivacyLossEstimate:
    """Joint bad-event + loss-exceed rate for the noisy-projection mechanism.

    Each sample draws a fresh k x d projection W, flags ||Wx|| > c_delta
    as bad, and otherwise draws one privacy-loss sample with shift ||Wx||
    and noise variance (S - |T|) sigma_v^2 at the worst coalition
    |T| = S - 1. The combined rate is audited against 2 delta.
    """
    x = as_vector(x)
    if float(np.linalg.norm(x)) > 1.0 + 1e-12:
        raise ParameterError("input norm must be <= 1")
    if x.shape[0] != params.d:
        raise DimensionMismatch(f"x has dimension {x.shape[0]}, params.d={params.d}")
    if samples < 1000:
        raise ParameterError(f"need at least 1000 samples, got {samples}")
    k, d = params.k, params.d
    cd = c_delta(k, params.delta)
    sigma = params.sigma_v  # (S - |T|) = 1 at the worst case
    rng = substream(seed) if isinstance(seed, int) else seed

    bad = 0
    exceed = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        W = rng.standard_normal((m, k, d)) / math.sqrt(k)
        shifts = np.linalg.norm(W @ x, axis=1)
        is_bad = shifts > cd
        bad += int(np.sum(is_bad))
        good = shifts[~is_bad]
        if good.size:
            # loss depends on y only through <y, Wx>: sample that scalar directly
            y1 = good + rng.normal(0.0, sigma, size=good.size)
            loss = (y1 * good - good ** 2 / 2.0) / sigma ** 2
            exceed += int(np.sum(np.abs(loss) > params.eps))
        done += m
    rate = (bad + exceed) / samples
    return PrivacyLossEstimate(eps_target=params.eps,
                               delta_target=2.0 * params.delta,
                               empirical_exceed_rate=rate,
                               standard_error=binomial_se(rate, samples),
                               samples=samples)


ViewSampler = Callable[[np.random.Generator, int], np.ndarray]


def ks_two_sample_threshold(n: int, m: int, alpha: float) -> float:
    """Smirnov critical value for the two-sample KS statistic."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) * math.sqrt((n + m) / (n * m))


def two_sample_closeness(view_sampler_p: ViewSampler, view_sampler_q: ViewSampler,
                         marginals: int, samples: int, seed, *,
                         significance: float = 1e-3, label_p: str = "P",
                         label_q: str = "Q") -> ClosenessReport:
    """Per-marginal two-sample KS tests with Bonferroni correction.

    Samplers take (generator, count) and return (count, marginals) arrays;
    each side draws from its own substream of `seed`. The verdict is
    `rejected` iff some marginal's KS statistic exceeds the corrected
    critical value.
    """
    if marginals < 1 or samples < 2:
        raise ParameterError("need marginals >= 1 and samples >= 2")
    base = seed_int(seed)
    p = np.asarray(view_sampler_p(substream(base, "closeness", 0), samples))
    q = np.asarray(view_sampler_q(substream(base, "closeness", 1), samples))
    expected = (samples, marginals)
    if p.shape != expected or q.shape != expected:
        raise DimensionMismatch(
            f"samplers must emit shape {expected}, got {p.shape} and {q.shape}"
        )
    threshold = ks_two_sample_threshold(samples, samples,
                                        significance / marginals)
    statistics = tuple(
        float(stats.ks_2samp(p[:, j], q[:, j], method="asymp").statistic)
        for j in range(marginals)
    )
    verdict = VERDICT_REJECTED if max(statistics) > threshold else VERDICT_CONSISTENT
    return ClosenessReport(label_p=label_p, label_q=label_q,
                           statistics=statistics, threshold=threshold,
                           samples=samples, verdict=verdict)


def rate_estimate(scenario: Scenario, params: ProtocolParams,
                  event: Callable[..., bool], trials: int, seed,
                  ) -> RateEstimate:
    """Empirical frequency of an AggregateResult event over independent runs."""
    if trials < 100:
        raise ParameterError(f"need at least 100 trials, got {trials}")
    seeds = substream(seed_int(seed), "rate-trials").integers(0, 2 ** 62, size=trials)
    hits = 0
    for t in range(trials):
        result, _ = run_scenario(scenario, params, int(seeds[t]))
        if event(result):
            hits += 1
    rate = hits / trials
    return RateEstimate(rate=rate, ci95=_normal_ci95(rate, trials), trials=trials)


PATTERN_RANDOM = "random-direction"
PATTERN_CONCENTRATED = "concentrated"
PATTERN_SPREAD = "spread"


def _target_vector(pattern: str, norm: float, d: int,
                   rng: np.random.Generator) -> np.ndarray:
    if pattern == PATTERN_RANDOM:
        u = rng.standard_normal(d)
        return norm * u / np.linalg.norm(u)
    if pattern == PATTERN_CONCENTRATED:
        x = np.zeros(d)
        x[0] = norm
        return x
    if pattern == PATTERN_SPREAD:
        return np.full(d, norm / math.sqrt(d))
    raise ParameterError(f"unknown pattern {pattern!r}")


def norm_verification_rate(params: ProtocolParams, target_norm: float,
                           trials: int, seed, *,
                           pattern: str = PATTERN_RANDOM) -> RateEstimate:
    """Accept rate of the norm-verification decision at a given share-sum norm.

    Each trial shares a fresh vector of the requested norm and pattern,
    samples a fresh session projection, and runs the real reply/decide
    operations. This is the Monte Carlo driver behind the completeness
    and soundness checks.
    """
    if trials < 100:
        raise ParameterError(f"need at least 100 trials, got {trials}")
    if target_norm < 0:
        raise ParameterError("target_norm must be >= 0")
    S, d, k = params.S, params.d, params.k
    rng = substream(seed) if isinstance(seed, int) else seed
    accepts = 0
    for _ in range(trials):
        x = _target_vector(pattern, target_norm, d, rng)
        bundle = share_vector(x, S, params.sigma_ss, rng)
        W = sample_projection(k, d, rng)
        replies = [
            project_reply(bundle.shares[i], W, params.sigma_v, rng,
                          verifier_index=i)
            for i in range(1, S)
        ]
        outcome = verifier0_decide(bundle.shares[0], replies, W, params.sigma_v,
                                   params.tau, rng, expected_verifiers=S)
        if outcome.accept:
            accepts += 1
    rate = accepts / trials
    return RateEstimate(rate=rate, ci95=_normal_ci95(rate, trials), trials=trials)
