"""Robust secure aggregation: batch norm verification plus share summation.

Clients secret-share their vectors across the verifiers; verifiers run
one norm-verification decision per client that reached all of them,
broadcast the accepted set J*, optionally check it is large enough, and
sum the accepted shares so verifier 0 can release the total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ProtocolParams, as_vector
from .errors import (
    AbortedInput,
    DimensionMismatch,
    DuplicateClientId,
    ParameterError,
)
from .rng import substream
from .transcript import (
    KIND_ACCEPTED_SET,
    KIND_MATRIX,
    KIND_PARTIAL_SUM,
    KIND_REPLY,
    KIND_SHARE,
    MessageBus,
    Transcript,
    client_party,
    encode_id_set,
    encode_matrix,
    encode_quantized,
    encode_reply_batch,
    encode_vector,
    verifier_party,
)
from .verification import (
    ProjectionReply,
    VerificationOutcome,
    W_MODE_SHARED,
    project_reply,
    session_matrix,
    verifier0_decide,
)

BEHAVIOR_HONEST = "honest"
BEHAVIOR_NORM_INFLATING = "norm-inflating"
BEHAVIOR_INCONSISTENT = "inconsistent-shares"
BEHAVIOR_PARTIAL_SEND = "partial-send"
CLIENT_BEHAVIORS = (
    BEHAVIOR_HONEST, BEHAVIOR_NORM_INFLATING,
    BEHAVIOR_INCONSISTENT, BEHAVIOR_PARTIAL_SEND,
)

ValidityPredicate = Callable[[frozenset], bool]


@dataclass(frozen=True, eq=False)
class ClientSubmission:
    """Per-verifier share payloads from one client; None means withheld."""

    client_id: str
    payloads: dict[int, np.ndarray | None]
    behavior: str = BEHAVIOR_HONEST

    def sent_to(self) -> list[int]:
        return sorted(i for i, p in self.payloads.items() if p is not None)


@dataclass(frozen=True, eq=False)
class AggregateResult:
    """Output of one aggregation run at verifier 0."""

    sum: np.ndarray | None
    accepted: frozenset[str]
    aborted: bool
    per_client_outcomes: dict[str, VerificationOutcome]


def validity_check(J_star, n: int, threshold_fraction: float) -> bool:
    """True iff the accepted set is at least threshold_fraction of n clients."""
    if not 0 < threshold_fraction <= 1:
        raise ParameterError(
            f"threshold_fraction must lie in (0, 1], got {threshold_fraction}"
        )
    return len(J_star) >= threshold_fraction * n


def fraction_validity(n: int, threshold_fraction: float) -> ValidityPredicate:
    """Bind validity_check into the predicate form run_aggregation accepts."""
    return lambda J_star: validity_check(J_star, n, threshold_fraction)


def robustness_delta(result_with: AggregateResult,
                     result_without: AggregateResult) -> float:
    """Euclidean distance between two non-aborted aggregate sums."""
    for name, res in (("result_with", result_with), ("result_without", result_without)):
        if res.aborted or res.sum is None:
            raise AbortedInput(f"{name} is aborted and carries no sum")
    if result_with.sum.shape != result_without.sum.shape:
        raise DimensionMismatch(
            f"sums have shapes {result_with.sum.shape} vs {result_without.sum.shape}"
        )
    return float(np.linalg.norm(result_with.sum - result_without.sum))


def run_aggregation(submissions, params: ProtocolParams,
                    validity: ValidityPredicate | None = None, seed: int = 0,
                    w_mode: str = W_MODE_SHARED,
                    sigma_out: float | None = None,
                    ) -> tuple[AggregateResult, Transcript]:
    """Execute the server protocol over all submissions.

    J is the set of clients that reached every verifier; each j in J gets
    one fresh-noise verification decision against the session projection.
    If the validity predicate rejects J*, everyone aborts and no sums are
    exchanged. sigma_out, when set, adds N(0, sigma_out^2 I_d) to every
    verifier's partial sum before release (post-noise for the sum itself;
    its privacy accounting is up to the caller).

    Every verifier's noise is drawn from a substream keyed by its index
    and the client id, so adding or removing one client never perturbs
    the randomness applied to the others.
    """
    submissions = list(submissions)
    ids = [s.client_id for s in submissions]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DuplicateClientId(f"duplicate client ids: {dupes}")
    if sigma_out is not None and sigma_out <= 0:
        raise ParameterError("sigma_out must be > 0 when set")

    S, d, k = params.S, params.d, params.k
    bus = MessageBus()

    # round 0: share delivery; verifiers keep what they actually received
    received: list[dict[str, np.ndarray]] = [dict() for _ in range(S)]
    for sub in submissions:
        for i in sorted(sub.payloads):
            share = sub.payloads[i]
            if share is None:
                continue
            share = as_vector(share, name=f"share for verifier {i}")
            if share.shape[0] != d:
                raise DimensionMismatch(
                    f"client {sub.client_id} sent dimension {share.shape[0]}, "
                    f"expected d={d}"
                )
            if params.trunc_b is not None:
                payload = encode_quantized(share, params.quant_step)
            else:
                payload = encode_vector(share)
            bus.send(client_party(sub.client_id), verifier_party(i), 0,
                     KIND_SHARE, payload)
            received[i][sub.client_id] = share

    # round 1: matrix broadcast
    W = session_matrix(params, seed, w_mode)
    w_payload = encode_matrix(W.entries)
    for i in range(1, S):
        bus.send(verifier_party(0), verifier_party(i), 1, KIND_MATRIX, w_payload)

    # round 2: per-verifier reply batches for every client they heard from
    replies: list[dict[str, ProjectionReply]] = [dict() for _ in range(S)]
    for i in range(1, S):
        batch = []
        for cid in sorted(received[i]):
            rng_i = substream(seed, "verifier", i, "reply", cid)
            reply = project_reply(received[i][cid], W, params.sigma_v, rng_i,
                                  verifier_index=i, client_id=cid)
            replies[i][cid] = reply
            batch.append((cid, reply.y))
        bus.send(verifier_party(i), verifier_party(0), 2, KIND_REPLY,
                 encode_reply_batch(batch))

    # verifier 0 decides for clients that reached everyone
    J = set(received[0])
    for i in range(1, S):
        J &= set(replies[i])
    outcomes: dict[str, VerificationOutcome] = {}
    J_star: set[str] = set()
    for cid in sorted(J):
        rng_0 = substream(seed, "verifier", 0, "decide", cid)
        outcome = verifier0_decide(
            received[0][cid], [replies[i][cid] for i in range(1, S)], W,
            params.sigma_v, params.tau, rng_0, client_id=cid,
            expected_verifiers=S,
        )
        outcomes[cid] = outcome
        if outcome.accept:
            J_star.add(cid)

    # round 3: accepted-set broadcast
    set_payload = encode_id_set(J_star)
    for i in range(1, S):
        bus.send(verifier_party(0), verifier_party(i), 3, KIND_ACCEPTED_SET,
                 set_payload)

    accepted = frozenset(J_star)
    if validity is not None and not validity(accepted):
        transcript = Transcript(messages=bus.messages, master_seed=seed,
                                params=params)
        result = AggregateResult(sum=None, accepted=accepted, aborted=True,
                                 per_client_outcomes=outcomes)
        return result, transcript

    # round 4: partial sums in a fixed (sorted) order for reproducibility
    partials = []
    for i in range(S):
        s_i = np.zeros(d)
        for cid in sorted(J_star):
            if cid in received[i]:
                s_i = s_i + received[i][cid]
        if sigma_out is not None:
            rng_out = substream(seed, "verifier", i, "sum-noise")
            s_i = s_i + rng_out.normal(0.0, sigma_out, size=d)
        partials.append(s_i)
        if i >= 1:
            bus.send(verifier_party(i), verifier_party(0), 4, KIND_PARTIAL_SUM,
                     encode_vector(s_i))

    total = np.zeros(d)
    for s_i in partials:
        total = total + s_i

    transcript = Transcript(messages=bus.messages, master_seed=seed, params=params)
    result = AggregateResult(sum=total, accepted=accepted, aborted=False,
                             per_client_outcomes=outcomes)
    return result, transcript
