"""Truncated power-series engine for probability generating functions.

A PGF G(z) = sum_n P(n) z^n is held as its coefficient vector about z = 0 up
to a fixed order.  Mode addition is coefficient convolution, photon
subtraction is the normalized derivative G'(z)/G'(1), and the subtracted
subsystem law is built as a degree-K polynomial (the terminating 2F1) in
w = 1 - G_BE(z) composed over series arithmetic.  This gives a derivation
path for the subsystem law that shares no code with the closed form in
``distributions``.

Thermal-family series (powers of the single-mode thermal PGF) carry their
(mu0, a) tag so the derivative normalization G'(1) = a * mu0 is exact: the
truncated coefficient sum alone under-counts the derivative tail by far more
than the certified comparison tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .distributions import Pmf, SubtractionConfig

__all__ = [
    "ThermalFamily",
    "TruncatedSeries",
    "pgf_bose_einstein",
    "series_multiply",
    "series_pow",
    "pgf_mean",
    "subtract_photon",
    "pgf_subtracted_subsystem",
    "coefficients_to_pmf",
]

# Matching tolerance for deciding two thermal-family tags share one mu0.
_FAMILY_MU0_RTOL = 1e-12


class ThermalFamily(NamedTuple):
    """Tag for series known to equal [1 + mu0(1-z)]^-a exactly."""

    mu0: float
    a: float


@dataclass(eq=False)
class TruncatedSeries:
    """Coefficients of a power series about z = 0 up to a fixed order.

    ``coeffs[n]`` multiplies z^n; ``order`` is the highest retained power.
    ``family`` is an optional thermal-family tag used for exact tail-aware
    normalization; it is preserved only by operations that keep the tag true.
    """

    coeffs: np.ndarray
    family: ThermalFamily | None = None

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim != 1 or self.coeffs.size == 0:
            raise ValueError("coeffs must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coeffs must be finite")

    @property
    def order(self) -> int:
        return self.coeffs.size - 1


def pgf_bose_einstein(mu0: float, order: int) -> TruncatedSeries:
    """Taylor series of the thermal PGF [1 + mu0(1-z)]^-1 about z = 0.

    Coefficient n is the Bose-Einstein probability q^n/(1+mu0) with
    q = mu0/(1+mu0).
    """
    mu0 = float(mu0)
    if not math.isfinite(mu0) or mu0 <= 0.0:
        raise ValueError(f"mu0 must be a positive finite real, got {mu0}")
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)) or order < 0:
        raise ValueError(f"order must be a nonnegative integer, got {order!r}")
    q = mu0 / (1.0 + mu0)
    coeffs = q ** np.arange(order + 1, dtype=float) / (1.0 + mu0)
    return TruncatedSeries(coeffs, family=ThermalFamily(mu0, 1.0))


def _combined_family(a: TruncatedSeries, b: TruncatedSeries) -> ThermalFamily | None:
    if a.family is None or b.family is None:
        return None
    fa, fb = a.family, b.family
    if abs(fa.mu0 - fb.mu0) > _FAMILY_MU0_RTOL * max(fa.mu0, fb.mu0):
        return None
    return ThermalFamily(fa.mu0, fa.a + fb.a)


def series_multiply(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product truncated to the smaller of the two orders."""
    order = min(a.order, b.order)
    coeffs = np.convolve(a.coeffs[: order + 1], b.coeffs[: order + 1])[: order + 1]
    return TruncatedSeries(coeffs, family=_combined_family(a, b))


def series_pow(s: TruncatedSeries, exponent: int) -> TruncatedSeries:
    """Integer power by repeated Cauchy products."""
    if isinstance(exponent, bool) or not isinstance(exponent, (int, np.integer)) or exponent < 1:
        raise ValueError(f"exponent must be a positive integer, got {exponent!r}")
    out = s
    for _ in range(int(exponent) - 1):
        out = series_multiply(out, s)
    return out


def pgf_mean(s: TruncatedSeries) -> float:
    """G'(1) of the series, i.e. the mean of the distribution it generates.

    Thermal-family series use the exact value a * mu0 (the analytically known
    geometric coefficient tail makes the full derivative sum available in
    closed form); untagged series fall back to the truncated sum
    sum_n n*c[n], which under-counts by the unmodeled tail.
    """
    if s.family is not None:
        return s.family.a * s.family.mu0
    n = np.arange(s.coeffs.size, dtype=float)
    return float(n @ s.coeffs)


def subtract_photon(g: TruncatedSeries) -> TruncatedSeries:
    """One photon subtraction: G(z) -> G'(z) / G'(1), truncated to order-1.

    Rejects series with a vanishing derivative normalization (e.g. the
    vacuum PGF).  For a thermal-family input with parameters (mu0, a) the
    result is exactly the (mu0, a+1) family member.
    """
    if g.coeffs.size < 2:
        raise ValueError("cannot subtract a photon from an order-0 series")
    norm = pgf_mean(g)
    if not math.isfinite(norm) or norm <= 0.0:
        raise ValueError(f"derivative normalization G'(1) must be positive, got {norm}")
    deriv = np.arange(1, g.coeffs.size, dtype=float) * g.coeffs[1:]
    family = None
    if g.family is not None:
        family = ThermalFamily(g.family.mu0, g.family.a + 1.0)
    return TruncatedSeries(deriv / norm, family=family)


def pgf_subtracted_subsystem(cfg: SubtractionConfig, order: int) -> TruncatedSeries:
    """Series of the subtracted-subsystem PGF for m < M.

    Computes G_BE^m * 2F1(-K, m; M; 1 - G_BE) where the terminating 2F1 is a
    degree-K polynomial in w = 1 - G_BE(z), evaluated by Horner's scheme over
    series arithmetic.  The m = M case is rejected; callers should use the
    compound Poisson series (the m-th power of the thermal PGF with a = K+M).
    """
    if cfg.m >= cfg.M:
        raise ValueError("pgf_subtracted_subsystem requires m < M; use the compound Poisson series at m = M")
    g_be = pgf_bose_einstein(cfg.mu0, order)
    base = series_pow(g_be, cfg.m)
    if cfg.K == 0:
        return base

    # Polynomial coefficients d_j = (-K)_j (m)_j / ((M)_j j!) of the 2F1.
    d = [1.0]
    for j in range(cfg.K):
        d.append(d[-1] * (j - cfg.K) * (cfg.m + j) / ((cfg.M + j) * (j + 1.0)))

    w = TruncatedSeries(-g_be.coeffs)
    w.coeffs[0] += 1.0

    horner = TruncatedSeries(np.zeros(order + 1))
    horner.coeffs[0] = d[cfg.K]
    for j in range(cfg.K - 1, -1, -1):
        horner = series_multiply(horner, w)
        horner.coeffs[0] += d[j]
    return series_multiply(base, horner)


def coefficients_to_pmf(g: TruncatedSeries) -> Pmf:
    """Read a PGF series back as a probability table.

    Negative rounding residue up to 1e-10 in magnitude is clamped to zero;
    anything larger signals an upstream bug and is rejected.  The recorded
    tail bound is 1 minus the partial sum.
    """
    if g.coeffs.min() < -1e-10:
        raise ValueError(
            f"series has negative coefficients beyond rounding tolerance (min {g.coeffs.min():.3e})"
        )
    probs = np.clip(g.coeffs, 0.0, None)
    tail = max(0.0, 1.0 - float(probs.sum()))
    return Pmf(probs, tail)
