"""Photon-number statistics of multimode thermal light under conditional
multiphoton subtraction.

Subpackages:

* ``distributions`` -- closed-form laws, moments, dark-count convolution
* ``series``        -- truncated generating-function engine
* ``simulator``     -- seeded Monte Carlo oracle and synthetic trace generator
* ``pipeline``      -- binning/grouping/conditioning and statistical tests
* ``traceio``       -- trace and event file formats
* ``cli``           -- batch command-line interface
"""

from .distributions import (
    Moments,
    Pmf,
    SubtractionConfig,
    bose_einstein_pmf,
    compound_poisson_pmf,
    convolve_dark_counts,
    hyp2f1_terminating,
    moments_with_dark,
    pmf_mean,
    pmf_moments,
    poisson_table,
    polya_pmf,
    subsystem_pmf,
    subsystem_pmf_mixture,
    subsystem_table,
    theoretical_g2,
    theoretical_mean,
)
from .series import (
    ThermalFamily,
    TruncatedSeries,
    coefficients_to_pmf,
    pgf_bose_einstein,
    pgf_mean,
    pgf_subtracted_subsystem,
    series_multiply,
    series_pow,
    subtract_photon,
)

__version__ = "0.1.0"

__all__ = [
    "Moments",
    "Pmf",
    "SubtractionConfig",
    "ThermalFamily",
    "TruncatedSeries",
    "bose_einstein_pmf",
    "coefficients_to_pmf",
    "compound_poisson_pmf",
    "convolve_dark_counts",
    "hyp2f1_terminating",
    "moments_with_dark",
    "pgf_bose_einstein",
    "pgf_mean",
    "pgf_subtracted_subsystem",
    "pmf_mean",
    "pmf_moments",
    "poisson_table",
    "polya_pmf",
    "series_multiply",
    "series_pow",
    "subsystem_pmf",
    "subsystem_pmf_mixture",
    "subsystem_table",
    "subtract_photon",
    "theoretical_g2",
    "theoretical_mean",
    "__version__",
]
