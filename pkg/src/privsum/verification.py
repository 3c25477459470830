"""Multi-verifier norm verification over additive secret shares.

Verifier 0 broadcasts a random projection, every verifier returns a noisy
projection of its share, and verifier 0 thresholds the noisy projected
norm: accept iff ||v|| < tau (rejection on ties). The coalition simulator
reproduces a coalition's view without the secret.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    SHARED_RANDOMNESS,
    VERIFIER0_PRIVATE,
    ProjectionMatrix,
    ProtocolParams,
    as_vector,
    sample_projection,
)
from .errors import DimensionMismatch, MissingReply, ParameterError
from .rng import as_generator, substream
from .sharing import ShareBundle, truncate_share
from .transcript import (
    KIND_ACCEPT,
    KIND_MATRIX,
    KIND_REPLY,
    KIND_SHARE,
    Message,
    MessageBus,
    Transcript,
    client_party,
    encode_accept,
    encode_matrix,
    encode_quantized,
    encode_vector,
    verifier_party,
)

W_MODE_SHARED = "shared"
W_MODE_VERIFIER0 = "verifier0"
W_MODES = (W_MODE_SHARED, W_MODE_VERIFIER0)


@dataclass(frozen=True, eq=False)
class ProjectionReply:
    """Noisy projected share returned by verifier i >= 1."""

    client_id: str
    verifier_index: int
    y: np.ndarray  # dimension k


@dataclass(frozen=True)
class VerificationOutcome:
    client_id: str
    accept: bool
    v_norm: float
    tau: float


@dataclass(frozen=True, eq=False)
class SimulatedNormRun:
    """Transcript fragment produced by the coalition simulator."""

    subset: frozenset[int]
    messages: tuple[Message, ...]
    shares: dict[int, np.ndarray]
    matrix: ProjectionMatrix
    v_sim: np.ndarray
    accept: bool


def project_reply(z_i, W: ProjectionMatrix, sigma_v: float, seed, *,
                  verifier_index: int = 1, client_id: str = "") -> ProjectionReply:
    """Compute y = W z_i + N(0, sigma_v^2 I_k), deterministic in seed."""
    if sigma_v <= 0:
        raise ParameterError(f"sigma_v must be > 0, got {sigma_v}")
    if verifier_index < 1:
        raise ParameterError("replies come from verifier indices >= 1")
    rng = as_generator(seed)
    y = W.project(as_vector(z_i, name="z_i")) + rng.normal(0.0, sigma_v, size=W.k)
    return ProjectionReply(client_id=client_id, verifier_index=verifier_index, y=y)


def verifier0_decide(z_0, replies, W: ProjectionMatrix, sigma_v: float,
                     tau: float, seed, *, client_id: str = "",
                     expected_verifiers: int | None = None) -> VerificationOutcome:
    """Aggregate the replies, add verifier 0's own noise, and threshold.

    v = W z_0 + sum_i y_i + N(0, sigma_v^2 I_k); accept iff ||v|| < tau.
    Exactly one reply per verifier index 1..S-1 is required (S inferred
    from the reply count unless expected_verifiers is given).
    """
    if sigma_v <= 0 or tau <= 0:
        raise ParameterError("sigma_v and tau must be > 0")
    replies = list(replies)
    S = expected_verifiers if expected_verifiers is not None else len(replies) + 1
    seen = {r.verifier_index for r in replies}
    expected = set(range(1, S))
    if seen != expected or len(replies) != len(expected):
        raise MissingReply(
            f"need one reply per verifier index {sorted(expected)}, got {sorted(seen)}"
        )
    rng = as_generator(seed)
    v = W.project(as_vector(z_0, name="z_0"))
    for r in sorted(replies, key=lambda r: r.verifier_index):
        if r.y.shape[0] != W.k:
            raise DimensionMismatch(
                f"reply from verifier {r.verifier_index} has dimension "
                f"{r.y.shape[0]}, expected k={W.k}"
            )
        v = v + r.y
    v = v + rng.normal(0.0, sigma_v, size=W.k)
    v_norm = float(np.linalg.norm(v))
    return VerificationOutcome(client_id=client_id, accept=v_norm < tau,
                               v_norm=v_norm, tau=tau)


def session_matrix(params: ProtocolParams, session_seed: int,
                   w_mode: str) -> ProjectionMatrix:
    """Sample the session projection from the stream selected by w_mode."""
    if w_mode == W_MODE_SHARED:
        rng = substream(session_seed, "shared-randomness")
        provenance = SHARED_RANDOMNESS
    elif w_mode == W_MODE_VERIFIER0:
        rng = substream(session_seed, "verifier", 0, "matrix")
        provenance = VERIFIER0_PRIVATE
    else:
        raise ParameterError(f"w_mode must be one of {W_MODES}, got {w_mode!r}")
    return sample_projection(params.k, params.d, rng, provenance=provenance)


def run_norm_verification(bundle: ShareBundle, params: ProtocolParams,
                          session_seed: int, w_mode: str = W_MODE_SHARED,
                          ) -> tuple[VerificationOutcome, Transcript]:
    """Run the full single-client protocol and record every message.

    Rounds: 0 share delivery to each verifier, 1 matrix broadcast,
    2 replies, 3 accept-bit broadcast. When params.trunc_b is set the
    shares are truncated/quantized before transmission and verifiers
    operate on what they received.
    """
    if bundle.S != params.S:
        raise DimensionMismatch(
            f"bundle has {bundle.S} shares but params.S={params.S}"
        )
    if bundle.d != params.d:
        raise DimensionMismatch(f"bundle dimension {bundle.d} != params.d={params.d}")

    bus = MessageBus()
    prover = client_party(bundle.client_id)

    received = []
    for i in range(params.S):
        share = bundle.shares[i]
        if params.trunc_b is not None:
            share = truncate_share(share, params.trunc_b, params.quant_step)
            payload = encode_quantized(share, params.quant_step)
        else:
            payload = encode_vector(share)
        bus.send(prover, verifier_party(i), 0, KIND_SHARE, payload)
        received.append(share)

    W = session_matrix(params, session_seed, w_mode)
    w_payload = encode_matrix(W.entries)
    for i in range(1, params.S):
        bus.send(verifier_party(0), verifier_party(i), 1, KIND_MATRIX, w_payload)

    replies = []
    for i in range(1, params.S):
        rng_i = substream(session_seed, "verifier", i, "reply", bundle.client_id)
        reply = project_reply(received[i], W, params.sigma_v, rng_i,
                              verifier_index=i, client_id=bundle.client_id)
        bus.send(verifier_party(i), verifier_party(0), 2, KIND_REPLY,
                 encode_vector(reply.y))
        replies.append(reply)

    rng_0 = substream(session_seed, "verifier", 0, "decide", bundle.client_id)
    outcome = verifier0_decide(received[0], replies, W, params.sigma_v,
                               params.tau, rng_0, client_id=bundle.client_id,
                               expected_verifiers=params.S)

    bit = encode_accept(outcome.accept)
    for i in range(1, params.S):
        bus.send(verifier_party(0), verifier_party(i), 3, KIND_ACCEPT, bit)

    transcript = Transcript(messages=bus.messages, master_seed=session_seed,
                            params=params)
    return outcome, transcript


ReplyFn = Callable[[int, np.ndarray, ProjectionMatrix, np.random.Generator], np.ndarray]


def simulate_norm_verification(T, params: ProtocolParams, seed,
                               reply_fn: ReplyFn | None = None,
                               ) -> SimulatedNormRun:
    """Simulate a coalition T's view of the protocol without any secret.

    Requires 0 not in T (coalitions containing verifier 0 compose this
    with the share-view simulator). Sends each i in T a fresh blind g_i,
    broadcasts a fresh projection W, collects T's replies via reply_fn
    (honest noisy projections of the g_i when None), then computes
    v_sim = sum_{i in T} (y_i - W g_i) + N(0, (S-|T|) sigma_v^2 I_k) and
    thresholds at tau.
    """
    subset = frozenset(int(i) for i in T)
    if not subset:
        raise ParameterError("coalition T must be non-empty")
    if 0 in subset:
        raise ParameterError(
            "simulator requires 0 not in T; compose with the share-view "
            "simulator for coalitions containing verifier 0"
        )
    if not subset < set(range(params.S)):
        raise ParameterError(
            f"T={sorted(subset)} must be a proper subset of 0..{params.S - 1}"
        )

    rng = as_generator(seed)
    bus = MessageBus()
    sim0 = verifier_party(0)

    shares: dict[int, np.ndarray] = {}
    for i in sorted(subset):
        g = rng.normal(0.0, params.sigma_ss, size=params.d)
        shares[i] = g
        bus.send(client_party("sim"), verifier_party(i), 0, KIND_SHARE,
                 encode_vector(g))

    W = sample_projection(params.k, params.d, rng, provenance=SHARED_RANDOMNESS)
    w_payload = encode_matrix(W.entries)
    for i in sorted(subset):
        bus.send(sim0, verifier_party(i), 1, KIND_MATRIX, w_payload)

    v_sim = np.zeros(params.k)
    for i in sorted(subset):
        if reply_fn is None:
            y = W.project(shares[i]) + rng.normal(0.0, params.sigma_v, size=params.k)
        else:
            y = as_vector(reply_fn(i, shares[i], W, rng), name="reply")
        v_sim = v_sim + (y - W.project(shares[i]))
    v_sim = v_sim + rng.normal(
        0.0, math.sqrt(params.S - len(subset)) * params.sigma_v, size=params.k
    )
    accept = float(np.linalg.norm(v_sim)) < params.tau

    bit = encode_accept(accept)
    for i in sorted(subset):
        bus.send(sim0, verifier_party(i), 3, KIND_ACCEPT, bit)

    return SimulatedNormRun(subset=subset, messages=bus.messages, shares=shares,
                            matrix=W, v_sim=v_sim, accept=accept)
