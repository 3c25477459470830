"""Norm verification: projections, decisions, protocol runs, simulator."""

import math

import numpy as np
import pytest
from scipy import stats

from privsum import (
    DimensionMismatch,
    MissingReply,
    ParameterError,
    calibrate,
    norm_verification_rate,
    project_reply,
    run_norm_verification,
    sample_projection,
    share_vector,
    simulate_norm_verification,
    substream,
    verifier0_decide,
)
from privsum.audit import PATTERN_CONCENTRATED, binomial_se
from privsum.transcript import (
    KIND_ACCEPT,
    KIND_MATRIX,
    KIND_REPLY,
    KIND_SHARE,
)
from privsum.verification import W_MODE_VERIFIER0


def small_params(**overrides):
    defaults = dict(eps=1.0, delta=1e-2, eps_ss=1.0, delta_ss=1e-2,
                    beta=0.05, S=2, k=16, d=8)
    defaults.update(overrides)
    return calibrate(**defaults).params


class TestProjectReply:
    def test_output_dimension_is_k(self):
        W = sample_projection(5, 12, 1)
        reply = project_reply(np.ones(12), W, 2.0, 3)
        assert reply.y.shape == (5,)

    def test_noise_moments_at_zero_input(self):
        # z = 0: per-coordinate mean 0 and variance sigma_v^2
        W = sample_projection(4, 6, 2)
        sigma_v = 3.0
        rng = substream(11, "reply-moments")
        draws = np.empty((25_000, 4))
        for i in range(draws.shape[0]):
            draws[i] = project_reply(np.zeros(6), W, sigma_v, rng).y
        flat = draws.ravel()
        assert abs(flat.mean()) < 4 * sigma_v / math.sqrt(flat.size)
        assert abs(flat.var() - sigma_v**2) / sigma_v**2 < 0.02

    def test_same_seed_noise_cancels(self):
        W = sample_projection(6, 10, 5)
        z = np.linspace(-1, 1, 10)
        a = project_reply(z, W, 1.5, 77).y
        b = project_reply(np.zeros(10), W, 1.5, 77).y
        # identical noise under the same seed; difference is W z up to
        # one f64 rounding per coordinate
        np.testing.assert_allclose(a - b, W.project(z), atol=1e-12)

    def test_dimension_mismatch(self):
        W = sample_projection(4, 6, 0)
        with pytest.raises(DimensionMismatch):
            project_reply(np.ones(7), W, 1.0, 0)


class TestVerifier0Decide:
    def test_missing_reply_detected(self):
        W = sample_projection(4, 6, 0)
        r1 = project_reply(np.ones(6), W, 1.0, 1, verifier_index=1)
        r3 = project_reply(np.ones(6), W, 1.0, 2, verifier_index=3)
        with pytest.raises(MissingReply):
            verifier0_decide(np.ones(6), [r1, r3], W, 1.0, 5.0, 0,
                             expected_verifiers=4)

    def test_accept_iff_norm_below_tau(self):
        W = sample_projection(4, 6, 0)
        r1 = project_reply(np.zeros(6), W, 1.0, 1, verifier_index=1)
        out = verifier0_decide(np.zeros(6), [r1], W, 1.0, 1e9, 2)
        assert out.accept and out.v_norm < out.tau
        out2 = verifier0_decide(np.zeros(6), [r1], W, 1.0, 1e-12, 2)
        assert not out2.accept

    def test_v_norm_law_is_chi_square(self):
        # k ||v||^2 / (||x||^2 + k S sigma_v^2) is chi-square(k)
        params = small_params(k=16, d=128, S=2)
        k, S, sigma_v = params.k, params.S, params.sigma_v
        rng = substream(303, "vlaw")
        u = rng.standard_normal(128)
        x = u / np.linalg.norm(u)
        samples = np.empty(10_000)
        for t in range(samples.size):
            bundle = share_vector(x, S, params.sigma_ss, rng)
            W = sample_projection(k, 128, rng)
            replies = [project_reply(bundle.shares[i], W, sigma_v, rng,
                                     verifier_index=i) for i in range(1, S)]
            out = verifier0_decide(bundle.shares[0], replies, W, sigma_v,
                                   params.tau, rng)
            samples[t] = k * out.v_norm**2 / (1.0 + k * S * sigma_v**2)
        assert stats.kstest(samples, stats.chi2(df=k).cdf).pvalue > 1e-3

    def test_decision_depends_only_on_share_sum(self):
        # two different splits of the same share sum under the same seeds
        # produce the same v up to f64 associativity
        params = small_params(k=16, d=16, S=3)
        rng = substream(404, "split")
        target = rng.standard_normal(16)
        W = sample_projection(params.k, params.d, 1234)

        def decide(split_seed):
            blinds = substream(split_seed, "blinds").normal(0, 5.0, size=(2, 16))
            shares = [target - blinds.sum(axis=0), blinds[0], blinds[1]]
            replies = [
                project_reply(shares[i], W, params.sigma_v,
                              substream(999, "reply", i), verifier_index=i)
                for i in (1, 2)
            ]
            return verifier0_decide(shares[0], replies, W, params.sigma_v,
                                    params.tau, substream(999, "decide"))

        a = decide(1)
        b = decide(2)
        assert a.v_norm == pytest.approx(b.v_norm, rel=1e-9)


class TestRunNormVerification:
    def test_transcript_structure(self):
        params = small_params(S=3)
        x = np.zeros(params.d)
        bundle = share_vector(x, params.S, params.sigma_ss, 5, client_id="c0")
        _, tr = run_norm_verification(bundle, params, 42)
        kinds = [m.kind for m in tr.messages]
        S = params.S
        assert kinds.count(KIND_SHARE) == S
        assert kinds.count(KIND_MATRIX) == S - 1
        assert kinds.count(KIND_REPLY) == S - 1
        assert kinds.count(KIND_ACCEPT) == S - 1
        assert len(tr.messages) == S + 3 * (S - 1)

    def test_deterministic_transcripts(self):
        params = small_params()
        bundle = share_vector(np.ones(params.d) / 4, params.S, params.sigma_ss,
                              5, client_id="c0")
        _, tr1 = run_norm_verification(bundle, params, 42)
        _, tr2 = run_norm_verification(bundle, params, 42)
        assert tr1.to_jsonl(include_payload=True) == tr2.to_jsonl(include_payload=True)
        assert tr1.sha256() == tr2.sha256()
        _, tr3 = run_norm_verification(bundle, params, 43)
        assert tr1.sha256() != tr3.sha256()

    def test_w_modes_give_different_matrices(self):
        params = small_params()
        bundle = share_vector(np.zeros(params.d), params.S, params.sigma_ss, 5)
        _, tr_shared = run_norm_verification(bundle, params, 7, w_mode="shared")
        _, tr_private = run_norm_verification(bundle, params, 7,
                                              w_mode=W_MODE_VERIFIER0)
        w_shared = [m for m in tr_shared.messages if m.kind == KIND_MATRIX][0]
        w_private = [m for m in tr_private.messages if m.kind == KIND_MATRIX][0]
        assert w_shared.payload != w_private.payload

    def test_honest_accept_rate_meets_completeness(self):
        params = small_params(k=64, d=32, S=2, beta=0.01)
        est = norm_verification_rate(params, 1.0, 2000, substream(1, "comp"))
        assert est.rate >= 1 - 0.01 - 3 * binomial_se(0.01, 2000)

    def test_norm_rho_accept_rate_meets_soundness(self):
        params = small_params(k=64, d=32, S=2, beta=0.05)
        est = norm_verification_rate(params, params.rho, 2000,
                                     substream(2, "sound"),
                                     pattern=PATTERN_CONCENTRATED)
        assert est.rate <= 0.05 + 3 * binomial_se(0.05, 2000)

    def test_bundle_params_shape_checks(self):
        params = small_params(S=2)
        bundle = share_vector(np.zeros(params.d), 3, params.sigma_ss, 5)
        with pytest.raises(DimensionMismatch):
            run_norm_verification(bundle, params, 0)


class TestSimulateNormVerification:
    def test_rejects_verifier0_in_coalition(self):
        params = small_params(S=3)
        with pytest.raises(ParameterError):
            simulate_norm_verification({0, 1}, params, 0)

    def test_v_sim_residual_variance(self):
        # T={1}, S=2 with honest injected replies: v_sim - (y1 - W g1) is the
        # simulator's own fresh N(0, (S-|T|) sigma_v^2 I_k) = sigma_v^2 draw
        params = small_params(S=2, k=16, d=4)
        rng = substream(606, "vsim")
        residuals = []
        for _ in range(20_000):
            injected = {}

            def honest_reply(i, g_i, W, reply_rng):
                y = W.project(g_i) + reply_rng.normal(0.0, params.sigma_v,
                                                      size=W.k)
                injected[i] = (y, W.project(g_i))
                return y

            run = simulate_norm_verification({1}, params, rng,
                                             reply_fn=honest_reply)
            y1, wg1 = injected[1]
            residuals.append(run.v_sim - (y1 - wg1))
        flat = np.concatenate(residuals)
        expected = params.sigma_v**2
        assert abs(flat.var() - expected) / expected < 0.02

    def test_w_and_share_marginals_match_real_protocol(self):
        # the simulator's W and g_i messages follow the real protocol's laws
        params = small_params(S=3, k=16, d=4)
        n = 8000
        rng_real = substream(707, "real")
        rng_sim = substream(708, "sim")
        real_g = np.empty((n, params.d))
        sim_g = np.empty((n, params.d))
        real_w = np.empty((n, params.k * params.d))
        sim_w = np.empty((n, params.k * params.d))
        for i in range(n):
            bundle = share_vector(np.zeros(params.d), params.S,
                                  params.sigma_ss, rng_real)
            real_g[i] = bundle.shares[1]
            real_w[i] = sample_projection(params.k, params.d, rng_real).entries.ravel()
            run = simulate_norm_verification({1}, params, rng_sim)
            sim_g[i] = run.shares[1]
            sim_w[i] = run.matrix.entries.ravel()
        for j in range(params.d):
            assert stats.ks_2samp(real_g[:, j], sim_g[:, j]).pvalue > 1e-4
        # spot-check a few W entries, all i.i.d. N(0, 1/k)
        for j in (0, 7, 15):
            assert stats.ks_2samp(real_w[:, j], sim_w[:, j]).pvalue > 1e-4

    def test_accept_rates_close_between_real_and_simulated(self):
        # (eps, delta)-closeness implies the accept probabilities cannot
        # differ by more than the closeness bound allows
        params = small_params(S=2, k=16, d=8, beta=0.05)
        trials = 3000
        rng = substream(809, "accept-real")
        real_accepts = 0
        for _ in range(trials):
            u = rng.standard_normal(params.d)
            bundle = share_vector(u / np.linalg.norm(u), params.S,
                                  params.sigma_ss, rng)
            out, _ = run_norm_verification(bundle, params,
                                           int(rng.integers(2**62)))
            real_accepts += out.accept
        rng_sim = substream(810, "accept-sim")
        sim_accepts = 0
        for _ in range(trials):
            run = simulate_norm_verification({1}, params, rng_sim)
            sim_accepts += run.accept
        p_real = real_accepts / trials
        p_sim = sim_accepts / trials
        slack = 3 * (binomial_se(p_real, trials) + binomial_se(p_sim, trials))
        eps, delta = params.eps, params.delta
        assert p_real <= math.exp(eps) * p_sim + delta + slack
        assert p_sim <= math.exp(eps) * p_real + delta + slack
