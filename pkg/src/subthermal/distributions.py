"""Closed-form photon-number laws for multiphoton-subtracted multimode thermal light.

The family implemented here: the Bose-Einstein (geometric) law of a single
thermal mode, the compound Poisson / negative binomial law of an a-mode (or
photon-subtracted) thermal field, the Polya law for how K subtracted photons
split between an observed m-mode subsystem and the remaining M - m modes, and
the photon-number law of the m-mode subsystem after conditioning on K
subtracted photons in total.

The subsystem law is evaluated along two deliberately independent routes:

* ``subsystem_pmf`` -- closed form: a log-gamma prefactor times a terminating
  Gauss 2F1 sum,
* ``subsystem_pmf_mixture`` -- the explicit Polya mixture of compound Poisson
  components, which serves as the cross-check oracle for the closed form.

All functions are pure; there is no shared mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

__all__ = [
    "SubtractionConfig",
    "Pmf",
    "Moments",
    "bose_einstein_pmf",
    "compound_poisson_pmf",
    "polya_pmf",
    "hyp2f1_terminating",
    "subsystem_pmf",
    "subsystem_pmf_mixture",
    "subsystem_table",
    "theoretical_mean",
    "theoretical_g2",
    "pmf_mean",
    "pmf_moments",
    "poisson_table",
    "convolve_dark_counts",
    "moments_with_dark",
]

# Arguments below this size use exact integer binomials for the Polya law;
# larger ones fall back to log-gamma.
_POLYA_EXACT_LIMIT = 20_000

# Truncation tolerance of the internal Poisson table used for dark-count
# convolution; far below any tolerance the callers certify.
_DARK_TAIL_TOL = 1e-16


def _check_positive_int(value, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def _check_positive_real(value, name: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be a positive finite real, got {value}")
    return value


@dataclass(frozen=True)
class SubtractionConfig:
    """Parameters of the subtracted-subsystem law.

    M    -- total number of thermal modes
    m    -- number of observed modes, 1 <= m <= M
    K    -- total number of subtracted photons (integer; the law diverges
            for fractional K)
    mu0  -- mean photon number per mode before subtraction
    """

    M: int
    m: int
    K: int
    mu0: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "M", _check_positive_int(self.M, "M", 1))
        object.__setattr__(self, "m", _check_positive_int(self.m, "m", 1))
        object.__setattr__(self, "K", _check_positive_int(self.K, "K", 0))
        object.__setattr__(self, "mu0", _check_positive_real(self.mu0, "mu0"))
        if self.m > self.M:
            raise ValueError(f"m={self.m} exceeds M={self.M}")


@dataclass(eq=False)
class Pmf:
    """Truncated photon-number distribution with a certified tail bound.

    ``probs[N]`` is P(N) for N = 0..N_max; ``tail_bound`` is a certified upper
    bound on the probability mass beyond N_max.
    """

    probs: np.ndarray
    tail_bound: float

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim != 1 or self.probs.size == 0:
            raise ValueError("probs must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.probs)):
            raise ValueError("probs must be finite")
        if self.probs.min() < -1e-12 or self.probs.max() > 1.0 + 1e-12:
            raise ValueError("probs entries must lie in [0, 1]")
        self.tail_bound = float(self.tail_bound)
        if not (0.0 <= self.tail_bound <= 1.0):
            raise ValueError(f"tail_bound must be in [0, 1], got {self.tail_bound}")

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    def __len__(self) -> int:
        return self.probs.size


class Moments(NamedTuple):
    """Mean photon number and normalized second-order correlation g2(0)."""

    mean: float
    g2: float


def bose_einstein_pmf(n: int, mu0: float) -> float:
    """P(n) = mu0^n / (1 + mu0)^(n+1), the single-mode thermal law."""
    n = _check_positive_int(n, "n", 0)
    mu0 = _check_positive_real(mu0, "mu0")
    if n == 0:
        return 1.0 / (1.0 + mu0)
    return math.exp(n * math.log(mu0) - (n + 1) * math.log1p(mu0))


def compound_poisson_pmf(n: int, mu0: float, a: float) -> float:
    """Compound Poisson (negative binomial) law with coherence parameter a.

    P(n) = Gamma(a+n)/Gamma(a) * mu0^n/n! * (1+mu0)^-(n+a).  Mean a*mu0,
    g2 = 1 + 1/a.  Evaluated through log-gamma so large n (up to ~1e4) do
    not overflow.  Real-valued a is accepted; only the subsystem law is
    restricted to integer subtraction numbers.
    """
    n = _check_positive_int(n, "n", 0)
    mu0 = _check_positive_real(mu0, "mu0")
    a = _check_positive_real(a, "a")
    logp = -(n + a) * math.log1p(mu0)
    if n > 0:
        logp += math.lgamma(a + n) - math.lgamma(a) - math.lgamma(n + 1)
        logp += n * math.log(mu0)
    return math.exp(logp)


def polya_pmf(k: int, K: int, M: int, m: int, exact: bool = False):
    """Probability that k of the K subtracted photons came from the m-mode
    subsystem of an M-mode field.

    Balls-and-boxes counting: C(m+k-1, k) * C(M-m+K-k-1, K-k) / C(M+K-1, K).
    Small arguments use exact integer binomials (pass ``exact=True`` to get
    the unrounded ``Fraction``); astronomically large ones fall back to
    log-gamma.
    """
    k = _check_positive_int(k, "k", 0)
    K = _check_positive_int(K, "K", 0)
    M = _check_positive_int(M, "M", 1)
    m = _check_positive_int(m, "m", 1)
    if k > K:
        raise ValueError(f"k={k} exceeds K={K}")
    if m > M:
        raise ValueError(f"m={m} exceeds M={M}")

    if m == M:
        # No modes outside the subsystem: every subtraction lands inside.
        value = Fraction(1) if k == K else Fraction(0)
        return value if exact else float(value)

    if M + K <= _POLYA_EXACT_LIMIT:
        num = math.comb(m + k - 1, k) * math.comb(M - m + K - k - 1, K - k)
        value = Fraction(num, math.comb(M + K - 1, K))
        return value if exact else float(value)

    if exact:
        raise ValueError(f"exact Polya arithmetic limited to M + K <= {_POLYA_EXACT_LIMIT}")

    def _log_comb(nn: int, kk: int) -> float:
        return math.lgamma(nn + 1) - math.lgamma(kk + 1) - math.lgamma(nn - kk + 1)

    logp = (
        _log_comb(m + k - 1, k)
        + _log_comb(M - m + K - k - 1, K - k)
        - _log_comb(M + K - 1, K)
    )
    return math.exp(logp)


def _hyp2f1_terminating_scaled(negK: int, b: float, c: float, x: float) -> tuple[float, float]:
    """Terminating 2F1 sum returned as (mantissa, log_scale).

    The true value is mantissa * exp(log_scale); the split keeps very large
    intermediate sums representable so callers can fold the logarithm into
    their own log-space prefactors.
    """
    negK = _check_positive_int(-negK, "-negK (first 2F1 parameter negated)", 0)
    K = negK
    b = float(b)
    c = float(c)
    x = float(x)

    term = 1.0
    total = 1.0
    log_scale = 0.0
    for j in range(K):
        denom = (c + j) * (j + 1)
        if denom == 0.0:
            if term == 0.0:
                break
            raise ValueError(
                f"2F1 Pochhammer denominator (c)_j vanished at j={j + 1} "
                f"before the series terminated (c={c})"
            )
        term *= (j - K) * (b + j) * x / denom
        total += term
        if term == 0.0:
            break
        if abs(term) > 1e280 or abs(total) > 1e280:
            term *= 2.0**-512
            total *= 2.0**-512
            log_scale += 512.0 * math.log(2.0)
    return total, log_scale


def hyp2f1_terminating(negK: int, b: float, c: float, x: float) -> float:
    """Gauss 2F1(-K, b; c; x) for nonnegative integer K: a K+1 term polynomial.

    Summed ascending with a multiplicative term recurrence.  Raises if a
    Pochhammer factor (c)_j hits zero before the series terminates.
    """
    total, log_scale = _hyp2f1_terminating_scaled(negK, b, c, x)
    if log_scale == 0.0:
        return total
    return total * math.exp(log_scale)


def _eq15_pmf(N: int, M: int, m: int, K: int, mu0: float) -> float:
    """Generic closed form of the subsystem law; valid only for m < M.

    All gamma-ratio prefactors are assembled in log space and exponentiated
    once; at this call site every 2F1 term is nonnegative (the signs of
    (-K)_j and (c)_j cancel), so the ascending sum is cancellation-free.
    """
    log_pre = -(N + m) * math.log1p(mu0)
    if N > 0:
        log_pre += N * math.log(mu0)
    log_pre += math.lgamma(N + m) - math.lgamma(N + 1) - math.lgamma(m)
    log_pre += math.lgamma(M) - math.lgamma(M - m)
    log_pre += math.lgamma(M + K - m) - math.lgamma(M + K)

    mant, log_scale = _hyp2f1_terminating_scaled(-K, N + m, m + 1 - K - M, 1.0 / (1.0 + mu0))
    if mant <= 0.0:
        return 0.0
    return math.exp(log_pre + math.log(mant) + log_scale)


def subsystem_pmf(N: int, cfg: SubtractionConfig) -> float:
    """P(N): photon number of the m-mode subsystem after K-photon subtraction.

    Dispatches the degenerate corners where the closed form is undefined or
    simplifies: m = M is the compound Poisson law with a = K + M, and K = 0
    is the compound Poisson law with a = m independent of M.
    """
    N = _check_positive_int(N, "N", 0)
    if cfg.m == cfg.M:
        return compound_poisson_pmf(N, cfg.mu0, cfg.K + cfg.M)
    if cfg.K == 0:
        return compound_poisson_pmf(N, cfg.mu0, cfg.m)
    return _eq15_pmf(N, cfg.M, cfg.m, cfg.K, cfg.mu0)


def subsystem_pmf_mixture(N: int, cfg: SubtractionConfig) -> float:
    """Independent oracle for ``subsystem_pmf``: the explicit Polya mixture.

    P(N) = sum_k P_polya(k | K, M, m) * P_cP(N | mu0, k + m).
    """
    N = _check_positive_int(N, "N", 0)
    total = 0.0
    for k in range(cfg.K + 1):
        weight = polya_pmf(k, cfg.K, cfg.M, cfg.m)
        if weight == 0.0:
            continue
        total += weight * compound_poisson_pmf(N, cfg.mu0, k + cfg.m)
    return total


def subsystem_table(cfg: SubtractionConfig, tail_tol: float) -> Pmf:
    """Tabulate the subsystem law up to a certified tail below ``tail_tol``.

    The stopping rule uses a geometric majorant: with q = mu0/(1+mu0) the
    term ratio P(N+1)/P(N) is bounded by rho(N) = q*(K+m+N)/(N+1), which
    decreases toward q < 1, so the tail beyond N is at most
    P(N)*rho/(1-rho) once rho < 1.
    """
    tail_tol = float(tail_tol)
    if not (0.0 < tail_tol < 1.0):
        raise ValueError(f"tail_tol must be in (0, 1), got {tail_tol}")
    q = cfg.mu0 / (1.0 + cfg.mu0)
    a_max = cfg.K + cfg.m
    probs = []
    N = 0
    while True:
        p = subsystem_pmf(N, cfg)
        probs.append(p)
        rho = q * (a_max + N) / (N + 1.0)
        if rho < 1.0:
            bound = p * rho / (1.0 - rho)
            if bound <= tail_tol:
                return Pmf(np.array(probs), bound)
        N += 1
        if N > 5_000_000:
            raise RuntimeError("subsystem_table failed to certify the tail below tail_tol")


def theoretical_mean(cfg: SubtractionConfig) -> float:
    """Mean photon number of the subsystem law: m * mu0 * (1 + K/M)."""
    return cfg.m * cfg.mu0 * (1.0 + cfg.K / cfg.M)


def theoretical_g2(cfg: SubtractionConfig) -> float:
    """g2(0) of the subsystem law: (1 + 1/m)/(1 + 1/M) * (1 + 1/(M+K))."""
    return (1.0 + 1.0 / cfg.m) / (1.0 + 1.0 / cfg.M) * (1.0 + 1.0 / (cfg.M + cfg.K))


def pmf_mean(pmf: Pmf) -> float:
    """Mean of the truncated table (the tail contributes at most
    ~tail_bound * N_max, which the table's certification keeps negligible)."""
    n = np.arange(pmf.probs.size, dtype=float)
    return float(n @ pmf.probs)


def pmf_moments(pmf: Pmf) -> Moments:
    """Exact first two photocounting moments of a truncated table.

    g2 = (<N^2> - <N>) / <N>^2.  The truncation error inherits the table's
    certified tail bound (scaled by N_max^2 for the second moment), so tables
    built at tail 1e-12 give moments good to well below 1e-8 on this
    artifact's grids.
    """
    n = np.arange(pmf.probs.size, dtype=float)
    mean = float(n @ pmf.probs)
    second = float((n * n) @ pmf.probs)
    if mean < 1e-30:
        raise ValueError("g2 is undefined for a (near-)vacuum pmf: mean photon number ~ 0")
    return Moments(mean=mean, g2=(second - mean) / mean**2)


def poisson_table(mu: float, tail_tol: float = _DARK_TAIL_TOL) -> Pmf:
    """Poisson law tabulated with a certified tail below ``tail_tol``."""
    mu = float(mu)
    if not math.isfinite(mu) or mu < 0.0:
        raise ValueError(f"mu must be a finite nonnegative real, got {mu}")
    if not (0.0 < tail_tol < 1.0):
        raise ValueError(f"tail_tol must be in (0, 1), got {tail_tol}")
    if mu == 0.0:
        return Pmf(np.array([1.0]), 0.0)
    probs = [math.exp(-mu)]
    N = 0
    while True:
        rho = mu / (N + 1.0)
        if rho < 1.0:
            bound = probs[-1] * rho / (1.0 - rho)
            if bound <= tail_tol:
                return Pmf(np.array(probs), bound)
        probs.append(probs[-1] * mu / (N + 1.0))
        N += 1
        if N > 1_000_000:
            raise RuntimeError("poisson_table failed to certify the tail")


def convolve_dark_counts(pmf: Pmf, muD: float) -> Pmf:
    """Convolve a photon-number table with a Poisson dark-count background.

    ``muD`` is the total dark-count mean of the analyzed channel.  The output
    tail bound is the sum of the input bound and the (negligible) Poisson
    table bound, which certifies the combined missing mass.
    """
    muD = float(muD)
    if not math.isfinite(muD) or muD < 0.0:
        raise ValueError(f"muD must be a finite nonnegative real, got {muD}")
    if muD == 0.0:
        return Pmf(pmf.probs.copy(), pmf.tail_bound)
    dark = poisson_table(muD)
    out = np.convolve(pmf.probs, dark.probs)
    return Pmf(out, min(1.0, pmf.tail_bound + dark.tail_bound))


def moments_with_dark(moments: Moments, muD: float) -> Moments:
    """Moments of a photon law after adding an independent Poisson background.

    mean -> mean + muD and
    g2 -> (g2 * mean^2 + 2 * mean * muD + muD^2) / (mean + muD)^2.
    """
    muD = float(muD)
    if not math.isfinite(muD) or muD < 0.0:
        raise ValueError(f"muD must be a finite nonnegative real, got {muD}")
    total = moments.mean + muD
    if total <= 0.0:
        raise ValueError("combined mean must be positive")
    g2 = (moments.g2 * moments.mean**2 + 2.0 * moments.mean * muD + muD**2) / total**2
    return Moments(mean=total, g2=g2)
