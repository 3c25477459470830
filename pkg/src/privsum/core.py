"""Statistical primitives and closed-form protocol calibration.

Vectors are plain 1-d float64 numpy arrays. The calibration chain goes:

    c_delta(k, delta)  ->  sigma_v  ->  tau (completeness)  ->  rho (soundness)

with sigma_ss fixed independently by the secret-sharing privacy floor.
Every derived quantity is recorded in the CalibrationReport's
derivation_log as (name, formula, value) so runs are self-documenting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DimensionMismatch, InfeasibleParameters, ParameterError
from .rng import as_generator

VERIFIER0_PRIVATE = "verifier0-private"
SHARED_RANDOMNESS = "shared-randomness"
PROVENANCES = (VERIFIER0_PRIVATE, SHARED_RANDOMNESS)


def as_vector(x, *, name: str = "x") -> np.ndarray:
    """Validate and return x as a finite 1-d float64 array (d >= 1)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise DimensionMismatch(
            f"{name} must be a 1-d vector of dimension >= 1, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} must contain only finite values")
    return arr


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """k x d matrix with i.i.d. N(0, 1/k) entries.

    provenance records which randomness stream produced it: verifier 0's
    private stream, or the shared-randomness stream every verifier can
    recompute.
    """

    entries: np.ndarray
    provenance: str = VERIFIER0_PRIVATE

    def __post_init__(self):
        if self.entries.ndim != 2 or min(self.entries.shape) < 1:
            raise DimensionMismatch(
                f"projection matrix must be 2-d, got shape {self.entries.shape}"
            )
        if self.provenance not in PROVENANCES:
            raise ParameterError(f"unknown provenance {self.provenance!r}")

    @property
    def k(self) -> int:
        return self.entries.shape[0]

    @property
    def d(self) -> int:
        return self.entries.shape[1]

    def project(self, z: np.ndarray) -> np.ndarray:
        z = as_vector(z, name="z")
        if z.shape[0] != self.d:
            raise DimensionMismatch(
                f"cannot project dimension {z.shape[0]} with a {self.k}x{self.d} matrix"
            )
        return self.entries @ z


@dataclass(frozen=True)
class ProtocolParams:
    """Full parameter set for one protocol instance.

    sigma_v / sigma_ss are noise scales (std), tau the acceptance
    threshold on the projected norm, rho the robustness bound. trunc_b,
    when set, truncates shares to [-trunc_b, trunc_b] on a quant_step grid
    before transmission.
    """

    S: int
    n: int
    d: int
    k: int
    eps: float
    delta: float
    eps_ss: float
    delta_ss: float
    beta: float
    sigma_ss: float
    sigma_v: float
    tau: float
    rho: float
    trunc_b: float | None = None
    quant_step: float = 1.0

    def __post_init__(self):
        if self.S < 2:
            raise ParameterError(f"need at least 2 verifiers, got S={self.S}")
        if self.k < 1 or self.n < 1 or self.d < 1:
            raise ParameterError("k, n, d must all be >= 1")
        for nm in ("eps", "eps_ss"):
            if getattr(self, nm) <= 0:
                raise ParameterError(f"{nm} must be > 0")
        for nm in ("delta", "delta_ss", "beta"):
            v = getattr(self, nm)
            if not 0 < v < 1:
                raise ParameterError(f"{nm} must lie in (0, 1), got {v}")
        for nm in ("sigma_ss", "sigma_v", "tau"):
            if getattr(self, nm) <= 0:
                raise ParameterError(f"{nm} must be > 0")
        if self.rho < 1:
            raise ParameterError(f"rho must be >= 1, got {self.rho}")
        if self.trunc_b is not None and self.trunc_b <= 0:
            raise ParameterError("trunc_b must be > 0 when set")
        if self.quant_step <= 0:
            raise ParameterError("quant_step must be > 0")

    def to_dict(self) -> dict:
        return {
            "S": self.S, "n": self.n, "d": self.d, "k": self.k,
            "eps": self.eps, "delta": self.delta,
            "eps_ss": self.eps_ss, "delta_ss": self.delta_ss,
            "beta": self.beta, "sigma_ss": self.sigma_ss,
            "sigma_v": self.sigma_v, "tau": self.tau, "rho": self.rho,
            "trunc_b": self.trunc_b, "quant_step": self.quant_step,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProtocolParams":
        return cls(**data)


@dataclass(frozen=True)
class CalibrationReport:
    """Calibrated parameters plus every intermediate used to derive them."""

    params: ProtocolParams
    c_delta: float
    lam: float
    rho_exact: float
    rho_asymptotic_estimate: float
    derivation_log: tuple = field(default_factory=tuple)


def gaussian_sigma(eps: float, delta: float, sensitivity: float = 1.0) -> float:
    """Minimal noise std for (eps, delta)-closeness of N(0, s^2 I) vs shift+N(0, s^2 I).

    Returns sensitivity * 2 * sqrt(ln(2/delta)) / eps; scales linearly in
    sensitivity and as 1/eps.
    """
    if eps <= 0:
        raise ParameterError(f"eps must be > 0, got {eps}")
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    if sensitivity <= 0:
        raise ParameterError(f"sensitivity must be > 0, got {sensitivity}")
    return sensitivity * 2.0 * math.sqrt(math.log(2.0 / delta)) / eps


def chi2_thresholds(k: int, x: float) -> tuple[float, float]:
    """Lower/upper tail thresholds for a chi-square(k) variable Q.

    lower = k(1 - 2 sqrt(x/k)), upper = k(1 + 2 sqrt(x/k) + 2x/k), with
    Pr[Q <= lower] <= exp(-x) and Pr[Q >= upper] <= exp(-x). The lower
    threshold may be negative for x > k/4, in which case its bound is
    vacuous.
    """
    if int(k) != k or k < 1:
        raise ParameterError(f"k must be an integer >= 1, got {k}")
    if x <= 0:
        raise ParameterError(f"x must be > 0, got {x}")
    r = math.sqrt(x / k)
    lower = k * (1.0 - 2.0 * r)
    upper = k * (1.0 + 2.0 * r + 2.0 * x / k)
    return lower, upper


def c_delta(k: int, delta: float) -> float:
    """High-probability bound on ||Wx|| for ||x|| <= 1 under a k x d N(0,1/k) ensemble.

    Pr[||Wx|| >= c_delta] <= delta. Always > 1, decreasing in k.
    """
    if int(k) != k or k < 1:
        raise ParameterError(f"k must be an integer >= 1, got {k}")
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    lk = math.log(1.0 / delta) / k
    return math.sqrt(1.0 + 2.0 * math.sqrt(lk) + 2.0 * lk)


def min_sigma_v(k: int, delta: float, eps: float) -> float:
    """Minimal projection-noise std for (eps, delta) zero-knowledge of the replies."""
    if eps <= 0:
        raise ParameterError(f"eps must be > 0, got {eps}")
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    return 2.0 * c_delta(k, delta) * math.sqrt(math.log(4.0 / delta)) / eps


def min_sigma_ss(eps_ss: float, delta_ss: float, honest_verifiers: int = 1) -> float:
    """Minimal share-noise std so the coalition view of the shares is (eps, delta)-close.

    The privacy floor is (#honest verifiers) * sigma_ss^2 >= 4 ln(2/delta)/eps^2;
    the default honest_verifiers=1 is the worst case of a coalition of all
    but one verifier.
    """
    if honest_verifiers < 1:
        raise ParameterError("need at least one honest verifier")
    return gaussian_sigma(eps_ss, delta_ss) / math.sqrt(honest_verifiers)


def completeness_tau(k: int, S: int, sigma_v: float, beta: float,
                     exact_cdf: bool = False) -> float:
    """Minimal acceptance threshold accepting every norm<=1 input w.p. >= 1-beta.

    Closed form: tau^2 = (1/k + S sigma_v^2)(k + 2 ln(1/beta) + 2 sqrt(k ln(1/beta))).
    With exact_cdf=True the chi-square tail bound is replaced by the exact
    quantile, giving a strictly smaller tau.
    """
    if S < 2:
        raise ParameterError(f"need S >= 2, got {S}")
    if sigma_v <= 0:
        raise ParameterError("sigma_v must be > 0")
    if not 0 < beta < 1:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    if int(k) != k or k < 1:
        raise ParameterError(f"k must be an integer >= 1, got {k}")
    scale = 1.0 / k + S * sigma_v ** 2
    if exact_cdf:
        q = stats.chi2.ppf(1.0 - beta, df=k)
    else:
        lb = math.log(1.0 / beta)
        q = k + 2.0 * lb + 2.0 * math.sqrt(k * lb)
    return math.sqrt(scale * q)


def soundness_rho(k: int, S: int, sigma_v: float, tau: float, beta: float,
                  exact_cdf: bool = False) -> float:
    """Minimal norm bound rejected w.p. >= 1-beta at threshold tau.

    Closed form: rho^2 = k tau^2 / (k - 2 sqrt(k ln(1/beta))) - k S sigma_v^2,
    which requires k > 4 ln(1/beta); below that the tail bound is vacuous
    and InfeasibleParameters is raised. With exact_cdf=True the exact
    lower chi-square quantile is used instead and any k is feasible.
    """
    if tau <= 0:
        raise ParameterError("tau must be > 0")
    if not 0 < beta < 1:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    if exact_cdf:
        q_lo = stats.chi2.ppf(beta, df=k)
        rho_sq = k * tau ** 2 / q_lo - k * S * sigma_v ** 2
    else:
        lb = math.log(1.0 / beta)
        denom = k - 2.0 * math.sqrt(k * lb)
        if denom <= 0:
            raise InfeasibleParameters(
                f"k <= 4*ln(1/beta) (k={k}, 4*ln(1/beta)={4 * lb:.4f}): "
                "the lower tail bound is vacuous and no sound rho exists"
            )
        rho_sq = k * tau ** 2 / denom - k * S * sigma_v ** 2
    if rho_sq < 1.0:
        # cannot happen for tau at or above its completeness minimum
        raise InfeasibleParameters(f"derived rho^2 = {rho_sq:.6g} < 1")
    return math.sqrt(rho_sq)


def calibrate(eps: float, delta: float, eps_ss: float, delta_ss: float,
              beta: float, S: int, k: int, d: int, n: int = 1, *,
              exact_cdf: bool = False, session_calibrated: bool = False,
              trunc_b: float | None = None,
              quant_step: float = 1.0) -> CalibrationReport:
    """Derive the minimal admissible parameter set from the privacy/failure targets.

    sigma_v and sigma_ss are set to their minimal values (sigma_ss at the
    worst case of a single honest verifier), tau to the minimal
    completeness threshold, rho to the minimal soundness bound given that
    tau. session_calibrated=True replaces beta by beta/n so the n-client
    union bound meets the session-level target.

    Raises InfeasibleParameters when k <= 4 ln(1/beta) in closed-form mode.
    """
    if S < 2:
        raise ParameterError(f"need S >= 2, got {S}")
    if int(k) != k or k < 1 or int(d) != d or d < 1 or int(n) != n or n < 1:
        raise ParameterError("k, d, n must be integers >= 1")
    if not 0 < beta < 1:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")

    beta_eff = beta / n if session_calibrated else beta

    cd = c_delta(k, delta)
    lam = math.sqrt(math.log(1.0 / beta_eff)) / k
    sigma_v = min_sigma_v(k, delta, eps)
    sigma_ss = min_sigma_ss(eps_ss, delta_ss, honest_verifiers=1)
    tau = completeness_tau(k, S, sigma_v, beta_eff, exact_cdf=exact_cdf)
    rho = soundness_rho(k, S, sigma_v, tau, beta_eff, exact_cdf=exact_cdf)

    # first-order expansion of rho^2 in sqrt(ln(1/beta)/k) = lambda*sqrt(k)
    a = k * S * sigma_v ** 2
    rho_asym = math.sqrt(1.0 + 4.0 * lam * math.sqrt(k) * (1.0 + a))

    tail = "exact chi-square quantile" if exact_cdf else "chi-square tail bound"
    log = (
        ("c_delta", "sqrt(1 + 2*sqrt(ln(1/delta)/k) + 2*ln(1/delta)/k)", cd),
        ("lambda", "sqrt(ln(1/beta))/k", lam),
        ("sigma_v", "2*c_delta*sqrt(ln(4/delta))/eps", sigma_v),
        ("sigma_ss", "2*sqrt(ln(2/delta_ss))/eps_ss", sigma_ss),
        ("tau_sq", f"(1/k + S*sigma_v^2) * upper quantile [{tail}]", tau ** 2),
        ("tau", "sqrt(tau_sq)", tau),
        ("rho_sq", f"k*tau_sq / lower quantile [{tail}] - k*S*sigma_v^2", rho ** 2),
        ("rho", "sqrt(rho_sq)", rho),
        ("rho_asymptotic", "sqrt(1 + 4*lambda*sqrt(k)*(1 + k*S*sigma_v^2))", rho_asym),
    )
    params = ProtocolParams(
        S=S, n=n, d=d, k=k, eps=eps, delta=delta, eps_ss=eps_ss,
        delta_ss=delta_ss, beta=beta_eff, sigma_ss=sigma_ss, sigma_v=sigma_v,
        tau=tau, rho=rho, trunc_b=trunc_b, quant_step=quant_step,
    )
    return CalibrationReport(
        params=params, c_delta=cd, lam=lam, rho_exact=rho,
        rho_asymptotic_estimate=rho_asym, derivation_log=log,
    )


def sample_projection(k: int, d: int, seed, *,
                      provenance: str = VERIFIER0_PRIVATE) -> ProjectionMatrix:
    """Sample a k x d matrix of i.i.d. N(0, 1/k) entries, deterministic in seed."""
    if int(k) != k or k < 1 or int(d) != d or d < 1:
        raise ParameterError("k and d must be integers >= 1")
    rng = as_generator(seed)
    entries = rng.standard_normal((k, d)) / math.sqrt(k)
    return ProjectionMatrix(entries=entries, provenance=provenance)
