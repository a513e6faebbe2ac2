"""Data-processing pipeline: binning, thinning, grouping, conditioning, and
statistical verification of photocount traces against the subsystem law.

The processing chain mirrors the two-detector acquisition protocol: a pair of
synchronized photocount channels (subtraction channel k, signal channel n) is
divided into time bins of width tau, decimated to remove interbin
correlations, grouped into blocks of M bins, sorted by the total number of
subtracted photons K per block, and the per-block signal totals over the
first m bins are histogrammed and compared with the model distribution by a
chi-squared adequacy test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import gammaincc

from .distributions import (
    Pmf,
    SubtractionConfig,
    convolve_dark_counts,
    subsystem_table,
)

__all__ = [
    "BinnedTrace",
    "GroupRecord",
    "PooledCell",
    "GofReport",
    "EstimateReport",
    "FitResult",
    "bin_timestamps",
    "thin_bins",
    "group_totals",
    "group_records",
    "group_and_condition",
    "chi2_test",
    "estimate_moments",
    "fit_mu0",
]


@dataclass(eq=False)
class BinnedTrace:
    """Two-channel per-bin photocount sequence.

    ``k_counts[i]`` / ``n_counts[i]`` are the subtraction-channel and
    signal-channel counts of bin i; ``tau_ns`` is the bin width; ``meta`` is
    a free-form provenance map.
    """

    k_counts: np.ndarray
    n_counts: np.ndarray
    tau_ns: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.k_counts = np.asarray(self.k_counts, dtype=np.int64)
        self.n_counts = np.asarray(self.n_counts, dtype=np.int64)
        if self.k_counts.ndim != 1 or self.n_counts.ndim != 1:
            raise ValueError("count channels must be 1-D")
        if self.k_counts.size != self.n_counts.size:
            raise ValueError("channel lengths differ")
        if self.k_counts.size and (self.k_counts.min() < 0 or self.n_counts.min() < 0):
            raise ValueError("counts must be nonnegative")
        if isinstance(self.tau_ns, bool) or int(self.tau_ns) <= 0:
            raise ValueError(f"tau_ns must be a positive integer, got {self.tau_ns}")
        self.tau_ns = int(self.tau_ns)

    @property
    def bins(self) -> np.ndarray:
        """(k, n) pairs as an (n_bins, 2) array."""
        return np.column_stack([self.k_counts, self.n_counts])

    def __len__(self) -> int:
        return self.k_counts.size


class GroupRecord(NamedTuple):
    """Per-group summary: total subtracted photons and the partial signal sum."""

    K_total: int
    N_partial: int


@dataclass(frozen=True)
class PooledCell:
    """One histogram cell after pooling: photon numbers lo..hi (hi None = open tail)."""

    lo: int
    hi: int | None
    observed: int
    expected: float


@dataclass(frozen=True)
class GofReport:
    """Chi-squared adequacy report for a model-vs-histogram comparison."""

    chi2: float
    dof: int
    p_value: float
    pooled_cells: tuple[PooledCell, ...]
    sample_size: int


@dataclass(frozen=True)
class EstimateReport:
    """Sample moments with seeded-bootstrap standard errors."""

    mu_hat: float
    mu_se: float
    g2_hat: float
    g2_se: float
    sample_size: int
    g2_defined: bool = True


@dataclass(frozen=True)
class FitResult:
    """Maximum-likelihood mu0 fit. Boundary flags report bracket failure
    (likelihood monotone over the searched interval)."""

    mu0_hat: float
    loglik: float
    at_lower_bound: bool = False
    at_upper_bound: bool = False


def _as_sorted_ns(ts, name: str) -> np.ndarray:
    ts = np.asarray(ts, dtype=np.int64)
    if ts.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if ts.size and ts.min() < 0:
        raise ValueError(f"{name} contains negative timestamps")
    if ts.size > 1 and np.any(np.diff(ts) < 0):
        raise ValueError(f"{name} timestamps must be sorted ascending")
    return ts


def bin_timestamps(ts_subtract, ts_signal, tau_ns: int) -> BinnedTrace:
    """Count per-channel events in consecutive windows of width ``tau_ns``.

    Bins run from t = 0 through the window containing the final event of
    either channel; later windows are unobservable and are not emitted.
    """
    if isinstance(tau_ns, bool) or int(tau_ns) <= 0:
        raise ValueError(f"tau_ns must be a positive integer, got {tau_ns}")
    tau_ns = int(tau_ns)
    ts_k = _as_sorted_ns(ts_subtract, "subtraction channel")
    ts_n = _as_sorted_ns(ts_signal, "signal channel")
    if ts_k.size == 0 and ts_n.size == 0:
        return BinnedTrace(np.zeros(0, np.int64), np.zeros(0, np.int64), tau_ns)
    t_last = max(ts_k[-1] if ts_k.size else 0, ts_n[-1] if ts_n.size else 0)
    n_bins = int(t_last // tau_ns) + 1
    k = np.bincount(ts_k // tau_ns, minlength=n_bins).astype(np.int64)
    n = np.bincount(ts_n // tau_ns, minlength=n_bins).astype(np.int64)
    return BinnedTrace(k, n, tau_ns)


def thin_bins(trace: BinnedTrace, period_bins: int) -> BinnedTrace:
    """Keep every ``period_bins``-th bin starting at index 0."""
    if isinstance(period_bins, bool) or int(period_bins) < 1:
        raise ValueError(f"period_bins must be >= 1, got {period_bins}")
    p = int(period_bins)
    meta = dict(trace.meta)
    meta["thinned_by"] = meta.get("thinned_by", 1) * p
    return BinnedTrace(trace.k_counts[::p], trace.n_counts[::p], trace.tau_ns, meta)


def group_totals(trace: BinnedTrace, M: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-group (K_total, N_partial) arrays for consecutive groups of M bins.

    The trailing partial group is discarded, never padded.
    """
    if isinstance(M, bool) or int(M) < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    if isinstance(m, bool) or int(m) < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    M, m = int(M), int(m)
    if m > M:
        raise ValueError(f"m={m} exceeds M={M}")
    n_groups = len(trace) // M
    k = trace.k_counts[: n_groups * M].reshape(n_groups, M)
    n = trace.n_counts[: n_groups * M].reshape(n_groups, M)
    return k.sum(axis=1), n[:, :m].sum(axis=1)


def group_records(trace: BinnedTrace, M: int, m: int) -> list[GroupRecord]:
    """``group_totals`` as a list of records (convenience for small traces)."""
    k_tot, n_part = group_totals(trace, M, m)
    return [GroupRecord(int(a), int(b)) for a, b in zip(k_tot, n_part)]


def group_and_condition(trace: BinnedTrace, M: int, m: int, K: int) -> np.ndarray:
    """N_partial values of exactly those groups whose K_total equals K."""
    if isinstance(K, bool) or int(K) < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    k_tot, n_part = group_totals(trace, M, m)
    return n_part[k_tot == int(K)]


def _pool_cells(observed: np.ndarray, expected: np.ndarray, overflow_obs: int,
                overflow_exp: float, min_expected: float) -> list[PooledCell]:
    """Pool histogram cells from the high-N side until every expected count
    reaches ``min_expected``; residual undersized interior cells are merged
    rightward."""
    cells: list[list] = [[i, i, int(observed[i]), float(expected[i])] for i in range(observed.size)]
    cells.append([observed.size, None, int(overflow_obs), float(overflow_exp)])

    # Tail pass: absorb trailing cells into the open tail group.
    while len(cells) > 1 and cells[-1][3] < min_expected:
        last = cells.pop()
        cells[-1][1] = last[1]
        cells[-1][2] += last[2]
        cells[-1][3] += last[3]

    # Residual pass: merge any remaining undersized cell into its right
    # neighbor (or leftward if it is the last cell).
    i = 0
    while i < len(cells):
        if cells[i][3] >= min_expected or len(cells) == 1:
            i += 1
            continue
        j = i + 1 if i + 1 < len(cells) else i - 1
        lo = min(cells[i][0], cells[j][0])
        hi = None if (cells[i][1] is None or cells[j][1] is None) else max(cells[i][1], cells[j][1])
        merged = [lo, hi, cells[i][2] + cells[j][2], cells[i][3] + cells[j][3]]
        a, b = sorted((i, j))
        cells[a] = merged
        del cells[b]
        i = 0 if a == 0 else a
    return [PooledCell(lo, hi, obs, exp) for lo, hi, obs, exp in cells]


def chi2_test(samples, model: Pmf, min_expected: float = 5.0,
              fitted_params: int = 0) -> GofReport:
    """Chi-squared adequacy test of a sample histogram against a model table.

    Cells are pooled from the high-N side until every expected count reaches
    ``min_expected``; chi2 = sum (O-E)^2/E, dof = cells - 1 - fitted_params,
    and the p-value is the regularized upper incomplete gamma function
    Q(dof/2, chi2/2).
    """
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim != 1:
        raise ValueError("samples must be 1-D")
    n = samples.size
    if n < 50:
        raise ValueError(f"need at least 50 samples for the adequacy test, got {n}")
    if samples.min() < 0:
        raise ValueError("samples must be nonnegative")
    if isinstance(fitted_params, bool) or int(fitted_params) < 0:
        raise ValueError(f"fitted_params must be >= 0, got {fitted_params}")
    min_expected = float(min_expected)
    if min_expected <= 0.0:
        raise ValueError("min_expected must be positive")
    total_mass = float(model.probs.sum()) + model.tail_bound
    if abs(total_mass - 1.0) > 1e-9:
        raise ValueError(f"model is not normalized: sum + tail = {total_mass}")

    nm = model.probs.size
    hist = np.bincount(samples, minlength=nm)
    observed = hist[:nm]
    overflow_obs = int(hist[nm:].sum())
    expected = n * model.probs
    overflow_exp = n * model.tail_bound

    cells = _pool_cells(observed, expected, overflow_obs, overflow_exp, min_expected)
    if len(cells) < 2:
        raise ValueError("sample set too small to form at least 2 pooled cells")
    chi2 = float(sum((c.observed - c.expected) ** 2 / c.expected for c in cells))
    dof = len(cells) - 1 - int(fitted_params)
    if dof < 1:
        raise ValueError(f"nonpositive degrees of freedom ({dof}) after pooling")
    p_value = float(gammaincc(dof / 2.0, chi2 / 2.0))
    return GofReport(chi2=chi2, dof=dof, p_value=p_value,
                     pooled_cells=tuple(cells), sample_size=n)


def estimate_moments(samples, bootstrap_reps: int, seed) -> EstimateReport:
    """Sample mean and g2 with nonparametric bootstrap standard errors.

    g2_hat = (<N^2> - <N>)/<N>^2.  A zero sample mean leaves g2 undefined;
    the report flags it instead of fabricating a value.
    """
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim != 1 or samples.size < 2:
        raise ValueError("need at least 2 samples")
    if isinstance(bootstrap_reps, bool) or int(bootstrap_reps) < 2:
        raise ValueError("bootstrap_reps must be >= 2")
    reps = int(bootstrap_reps)
    n = samples.size
    x = samples.astype(float)

    mu = float(x.mean())
    second = float((x * x).mean())
    defined = mu > 0.0
    g2 = (second - mu) / mu**2 if defined else float("nan")

    rng = np.random.default_rng(seed)
    mus = np.empty(reps)
    g2s = np.empty(reps)
    chunk = max(1, min(reps, int(2e7) // max(n, 1)))
    done = 0
    while done < reps:
        b = min(chunk, reps - done)
        idx = rng.integers(0, n, size=(b, n))
        xs = x[idx]
        bm = xs.mean(axis=1)
        bs = (xs * xs).mean(axis=1)
        mus[done:done + b] = bm
        with np.errstate(divide="ignore", invalid="ignore"):
            g2s[done:done + b] = (bs - bm) / bm**2
        done += b

    mu_se = float(np.std(mus, ddof=1))
    with np.errstate(invalid="ignore"):
        g2_se = float(np.nanstd(g2s, ddof=1)) if defined else float("nan")
    return EstimateReport(mu_hat=mu, mu_se=mu_se, g2_hat=g2, g2_se=g2_se,
                          sample_size=n, g2_defined=defined)


def _model_log_probs(M: int, m: int, K: int, mu0: float, muD: float,
                     length: int) -> np.ndarray:
    """Log-probabilities of the dark-convolved subsystem law covering
    N = 0..length-1."""
    tol = 1e-12
    while True:
        table = convolve_dark_counts(subsystem_table(SubtractionConfig(M, m, K, mu0), tol), muD)
        if table.probs.size >= length or tol < 1e-150:
            break
        tol *= 1e-12
    probs = np.full(length, 1e-300)
    k = min(length, table.probs.size)
    probs[:k] = np.maximum(table.probs[:k], 1e-300)
    return np.log(probs)


def fit_mu0(samples, M: int, m: int, K: int, muD: float,
            search_span: float = 50.0, tol: float = 1e-6) -> FitResult:
    """Maximum-likelihood fit of mu0 by golden-section search.

    ``muD`` is the total dark-count mean of the analyzed channel.  The search
    interval brackets the moment-based estimate (sample mean minus dark,
    divided by m(1 + K/M)) by ``search_span`` in both directions; a maximizer
    pinned to an endpoint is reported through the boundary flags.
    """
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim != 1 or samples.size < 50:
        raise ValueError("need at least 50 samples to fit mu0")
    muD = float(muD)
    if muD < 0.0:
        raise ValueError("muD must be nonnegative")
    counts = np.bincount(samples).astype(float)
    length = counts.size

    center = max((samples.mean() - muD) / (m * (1.0 + K / M)), 1e-8)
    lo = center / search_span
    hi = center * search_span

    def loglik(mu0: float) -> float:
        return float(counts @ _model_log_probs(M, m, K, mu0, muD, length))

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = loglik(c), loglik(d)
    while (b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = loglik(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = loglik(d)
    mu0_hat = 0.5 * (a + b)
    return FitResult(
        mu0_hat=mu0_hat,
        loglik=loglik(mu0_hat),
        at_lower_bound=(mu0_hat - lo) <= 2.0 * tol,
        at_upper_bound=(hi - mu0_hat) <= 2.0 * tol,
    )
