"""Monte Carlo oracle for the subtracted-subsystem law and a synthetic trace
generator emulating the two-detector acquisition protocol.

The physical model: M independent thermal modes, each photon independently
routed to the subtraction detector with probability r (binomial tap), and
post-selection on the total number of tapped photons equaling K.

Conditioning reshapes the transmitted statistics.  For this tap model the
conditional law of the transmitted subsystem total is exactly the subsystem
law evaluated at the effective per-mode mean

    mu0_eff = mu_in * (1 - r) / (1 + mu_in * r),

(see ``effective_mu0``; the 1/(1 + mu_in*r) factor is the Bayesian update
from observing the tap count).  As r -> 0 this approaches mu_in*(1 - r), the
weak-tap limit.  The tests verify the exact form against brute-force
enumeration of the tap model, independent of every analytic engine.

All sampling is seeded and reproducible: trial batches derive independent
substreams from (seed, batch index), so replays are bit-identical for a
fixed configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .distributions import Pmf
from .pipeline import BinnedTrace

__all__ = [
    "SimConfig",
    "TraceConfig",
    "ConditionalResult",
    "SimulationAbort",
    "effective_mu0",
    "source_mean_for_target",
    "sample_thermal",
    "binomial_thin",
    "sample_pmf",
    "run_conditional",
    "synth_experiment_trace",
]


class SimulationAbort(RuntimeError):
    """Raised when the post-selection acceptance rate falls below the floor."""


@dataclass(frozen=True)
class SimConfig:
    """Configuration of the conditional (post-selected) simulation.

    mu_in is the per-mode mean entering the tap; r the tap probability toward
    the subtraction detector; trials the number of post-selected samples to
    collect.  ``acceptance_floor`` aborts hopeless runs with a diagnostic.
    """

    M: int
    m: int
    K_condition: int
    mu_in: float
    trials: int
    seed: int
    r: float = 0.02
    acceptance_floor: float = 1e-6
    batch_size: int = 1 << 21

    def __post_init__(self) -> None:
        if self.M < 1 or self.m < 1 or self.m > self.M:
            raise ValueError(f"need 1 <= m <= M, got m={self.m}, M={self.M}")
        if self.K_condition < 0:
            raise ValueError("K_condition must be nonnegative")
        if not (0.0 < self.r < 1.0):
            raise ValueError(f"r must lie in (0, 1), got {self.r}")
        if not (math.isfinite(self.mu_in) and self.mu_in > 0.0):
            raise ValueError(f"mu_in must be positive, got {self.mu_in}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not (0.0 < self.acceptance_floor < 1.0):
            raise ValueError("acceptance_floor must be in (0, 1)")


@dataclass(frozen=True)
class TraceConfig:
    """Configuration of the synthetic trace generator.

    ``mu0`` is the per-mode mean of the *analyzed* (post-selected) law, i.e.
    the model parameter the downstream pipeline fits; the generator solves
    for the raw source mean so the tapped, conditioned channel realizes mu0
    exactly.  This requires p_subtract < 1/(1 + mu0).
    """

    mu0: float
    muD_per_mode: float
    tau_ns: int
    thin_period_bins: int
    n_bins: int
    p_subtract: float
    seed: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu0) and self.mu0 > 0.0):
            raise ValueError(f"mu0 must be positive, got {self.mu0}")
        if self.muD_per_mode < 0.0:
            raise ValueError("muD_per_mode must be nonnegative")
        if self.tau_ns < 1 or self.thin_period_bins < 1 or self.n_bins < 1:
            raise ValueError("tau_ns, thin_period_bins and n_bins must be positive")
        if not (0.0 <= self.p_subtract <= 1.0):
            raise ValueError("p_subtract must lie in [0, 1]")
        if self.p_subtract >= 1.0 / (1.0 + self.mu0):
            raise ValueError(
                f"p_subtract={self.p_subtract} too large to realize mu0={self.mu0}: "
                f"needs p_subtract < 1/(1+mu0) = {1.0 / (1.0 + self.mu0):.4f}"
            )

    @property
    def mu_raw(self) -> float:
        """Source (pre-tap) per-bin mean realizing ``mu0`` after conditioning."""
        return source_mean_for_target(self.mu0, self.p_subtract)


class ConditionalResult(NamedTuple):
    """Post-selected samples plus the acceptance bookkeeping.

    ``mode_photons``/``mode_subtracted`` are (trials, M) arrays of the
    per-mode photon numbers and tapped counts of the accepted trials.
    """

    samples: np.ndarray
    acceptance_rate: float
    trials_total: int
    mode_photons: np.ndarray
    mode_subtracted: np.ndarray


def effective_mu0(mu_in: float, r: float) -> float:
    """Per-mode mean of the conditioned transmitted law of the binomial tap.

    mu0_eff = mu_in*(1-r)/(1 + mu_in*r).  Exact for every r in (0,1) and
    every conditioning value K; reduces to mu_in*(1-r) as r -> 0.
    """
    return mu_in * (1.0 - r) / (1.0 + mu_in * r)


def source_mean_for_target(mu0: float, r: float) -> float:
    """Inverse of ``effective_mu0``: the source mean realizing ``mu0``."""
    denom = (1.0 - r) - mu0 * r
    if denom <= 0.0:
        raise ValueError(f"no source mean realizes mu0={mu0} at tap ratio r={r}")
    return mu0 / denom


def sample_thermal(mu: float, rng: np.random.Generator, size=None):
    """Draw from the Bose-Einstein law by inverse CDF on the geometric law.

    Returns a scalar int for ``size=None``, otherwise an int64 array.
    """
    if not (math.isfinite(mu) and mu > 0.0):
        raise ValueError(f"mu must be positive, got {mu}")
    q = mu / (1.0 + mu)
    u = rng.random(size)
    # smallest n with CDF(n) = 1 - q^(n+1) >= u
    n = np.floor(np.log1p(-u) / math.log(q)).astype(np.int64)
    return int(n) if size is None else n


def binomial_thin(n, r: float, rng: np.random.Generator):
    """Beam-splitter tap: reflected ~ Binomial(n, r), transmitted the rest."""
    if not (0.0 <= r <= 1.0):
        raise ValueError(f"r must lie in [0, 1], got {r}")
    n = np.asarray(n)
    if n.size and n.min() < 0:
        raise ValueError("photon numbers must be nonnegative")
    reflected = rng.binomial(n, r)
    return reflected, n - reflected


def sample_pmf(pmf: Pmf, rng: np.random.Generator, size=None):
    """Inverse-CDF draw from a truncated table; tail mass maps to N_max."""
    total = float(pmf.probs.sum()) + pmf.tail_bound
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"pmf is not normalized: sum + tail = {total}")
    cdf = np.cumsum(pmf.probs)
    u = rng.random(size)
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, pmf.n_max)
    return int(idx) if size is None else idx.astype(np.int64)


def _total_count_cdf(M: int, mu: float, tol: float = 1e-14) -> np.ndarray:
    """CDF table of the M-mode total photon number (negative binomial)."""
    p = [math.exp(-M * math.log1p(mu))]
    q = mu / (1.0 + mu)
    n = 0
    while p[-1] > tol * (1.0 - q) or n < 4 * M * (1 + mu):
        p.append(p[-1] * q * (M + n) / (n + 1.0))
        n += 1
        if n > 10_000_000:
            raise RuntimeError("total-count table failed to converge")
    return np.cumsum(p)


def _tap_accept_probs(n_max: int, K: int, r: float) -> np.ndarray:
    """P(tap count = K | total photons = n) for n = 0..n_max (binomial pmf)."""
    n = np.arange(n_max + 1, dtype=float)
    out = np.zeros(n_max + 1)
    valid = n >= K
    nv = n[valid]
    if r > 0.0:
        log_p = _log_comb_vec(nv, K) + K * math.log(r) + (nv - K) * math.log1p(-r)
        out[valid] = np.exp(log_p)
    elif K == 0:
        out[valid] = 1.0
    return out


def _log_comb_vec(n: np.ndarray, k: int) -> np.ndarray:
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _batch_rng(seed: int, batch_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(batch_index)]))


def run_conditional(cfg: SimConfig) -> ConditionalResult:
    """Post-selected simulation of the tap model.

    Each trial draws M thermal modes at ``mu_in``, taps every photon toward
    the subtraction detector with probability r, and is accepted iff the
    total tapped count equals ``K_condition``; the recorded sample is the
    transmitted total over the first m modes.

    Implementation: trials are staged for speed, exactly in law.  The total
    photon number is drawn from the M-mode total-count law (the sum of the
    M geometric modes) and the trial accepted with the exact binomial tap
    probability of K reflections; accepted trials then reconstruct the
    per-mode detail conditionally -- photons spread uniformly over
    compositions (the conditional law of i.i.d. geometric modes given their
    sum) and tapped photons drawn as a multivariate hypergeometric pick of K
    of the photons.  Rejection on the K condition is exact; nothing is
    importance-weighted.
    """
    M, m, K = cfg.M, cfg.m, cfg.K_condition
    cdf = _total_count_cdf(M, cfg.mu_in)
    accept_prob = _tap_accept_probs(cdf.size - 1, K, cfg.r)

    samples = np.empty(cfg.trials, dtype=np.int64)
    mode_photons = np.empty((cfg.trials, M), dtype=np.int64)
    mode_subtracted = np.empty((cfg.trials, M), dtype=np.int64)
    collected = 0
    trials_total = 0
    min_trials_for_abort = max(2_000_000, int(20.0 / cfg.acceptance_floor))

    for batch_index in range(1 << 20):
        rng = _batch_rng(cfg.seed, batch_index)
        n_tot = np.searchsorted(cdf, rng.random(cfg.batch_size), side="right")
        u = rng.random(cfg.batch_size)
        accepted = np.nonzero(u < accept_prob[np.minimum(n_tot, accept_prob.size - 1)])[0]
        trials_total += cfg.batch_size

        for idx in accepted:
            n_total = int(n_tot[idx])
            if M == 1:
                modes = np.array([n_total], dtype=np.int64)
                taps = np.array([K], dtype=np.int64)
            else:
                slots = n_total + M - 1
                bars = np.sort(rng.choice(slots, size=M - 1, replace=False))
                edges = np.concatenate(([-1], bars, [slots]))
                modes = np.diff(edges) - 1
                taps = rng.multivariate_hypergeometric(modes, K)
            samples[collected] = int((modes[:m] - taps[:m]).sum())
            mode_photons[collected] = modes
            mode_subtracted[collected] = taps
            collected += 1
            if collected == cfg.trials:
                rate = collected / trials_total
                return ConditionalResult(samples, rate, trials_total,
                                         mode_photons, mode_subtracted)

        if trials_total >= min_trials_for_abort:
            rate = collected / trials_total
            if rate < cfg.acceptance_floor:
                raise SimulationAbort(
                    f"acceptance rate {rate:.3e} below floor {cfg.acceptance_floor:.1e} "
                    f"after {trials_total} trials ({collected} accepted); raise r, mu_in "
                    f"or acceptance_floor"
                )
    raise SimulationAbort("batch budget exhausted before collecting the requested trials")


def synth_experiment_trace(cfg: TraceConfig) -> BinnedTrace:
    """Generate a synthetic two-channel binned trace.

    Per bin: draw a thermal photon number at the raw source mean, split it
    binomially into the subtraction channel (probability ``p_subtract``) and
    the transmitted channel, and add Poisson dark counts of mean
    ``muD_per_mode`` to the transmitted channel.  Bins are statistically
    independent, modeling the post-thinning regime without interbin
    correlations.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 0]))
    mu_raw = cfg.mu_raw
    photons = sample_thermal(mu_raw, rng, size=cfg.n_bins)
    if cfg.p_subtract > 0.0:
        k_counts, transmitted = binomial_thin(photons, cfg.p_subtract, rng)
    else:
        k_counts = np.zeros(cfg.n_bins, dtype=np.int64)
        transmitted = photons
    n_counts = transmitted + (
        rng.poisson(cfg.muD_per_mode, size=cfg.n_bins) if cfg.muD_per_mode > 0.0
        else 0
    )
    meta = {
        "generator": "synth_experiment_trace",
        "mu0": cfg.mu0,
        "mu_raw": mu_raw,
        "p_subtract": cfg.p_subtract,
        "muD_per_mode": cfg.muD_per_mode,
        "thin_period_bins": cfg.thin_period_bins,
        "seed": cfg.seed,
    }
    return BinnedTrace(np.asarray(k_counts, dtype=np.int64),
                       np.asarray(n_counts, dtype=np.int64), cfg.tau_ns, meta)
